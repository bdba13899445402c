#ifndef LONGEXP_SYNTH_H_
#define LONGEXP_SYNTH_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "longexp/burst_io.h"
#include "longexp/image.h"
#include "longexp/subject.h"

namespace longexp {

enum class ShapeKind { kPlane, kDisc, kRect };

// One scene layer in world coordinates. Texture is value noise in the
// layer's local frame, so it moves rigidly with the layer.
struct SynthLayer {
  ShapeKind shape = ShapeKind::kPlane;
  Vec2 center;          // world position at frame 0
  double radius = 0.0;  // disc
  Vec2 half_size;       // rect
  // Optional x-range of a plane (world coordinates); empty when min >= max.
  double plane_min_x = 0.0;
  double plane_max_x = 0.0;

  std::array<float, 3> color{0.5f, 0.5f, 0.5f};
  double texture_contrast = 0.6;  // 0 gives a flat color
  double texture_scale = 8.0;     // feature size in pixels
  std::uint64_t texture_seed = 1;

  Vec2 velocity;                // px per frame
  double angular_velocity = 0.0;  // rad per frame about the layer center
  double wobble_amplitude = 0.0;  // rad
  double wobble_period = 8.0;     // frames
  bool subject = false;
};

// Camera motion applied to the whole image: rotation about the image center
// followed by a pan, both accumulated per frame.
struct SynthCamera {
  Vec2 pan_per_frame;
  double roll_per_frame = 0.0;
};

struct SynthScene {
  int width = 512;
  int height = 384;
  int num_frames = 8;
  std::vector<SynthLayer> layers;  // back to front
  SynthCamera camera;
  double noise_sigma = 0.0;
  std::uint64_t noise_seed = 7;
  int supersample = 2;
  std::vector<FaceRegion> faces;  // full-res coordinates at the base frame
};

// Similarity pose of a layer (local -> world) at a frame.
struct LayerPose {
  double theta = 0.0;
  Vec2 t;
  Vec2 apply(const Vec2& local) const;
  Vec2 invert(const Vec2& world) const;
};

class SynthRenderer {
 public:
  explicit SynthRenderer(SynthScene scene);

  const SynthScene& scene() const { return scene_; }
  LayerPose layer_pose(int layer, int frame) const;
  Vec2 world_to_image(const Vec2& world, int frame) const;
  Vec2 image_to_world(const Vec2& image, int frame) const;

  // Front-most layer covering the image point, -1 if none.
  int layer_at(int frame, const Vec2& p) const;
  // Where the scene point seen at p in from_frame (on `layer`) appears in
  // to_frame. Full-resolution pixel coordinates.
  Vec2 map_point(int from_frame, int to_frame, const Vec2& p, int layer) const;

  // Linear RGB frame at full resolution.
  Image render(int frame) const;
  // Subject coverage (1 inside subject layers) at a frame, full resolution.
  Image subject_mask(int frame) const;
  // Ground-truth sampling flows of the pair (a, b) at a pyramid level:
  // channels (delta_a.x, delta_a.y, delta_b.x, delta_b.y).
  Image pair_flow(int frame_a, int frame_b, int level_factor) const;

 private:
  std::array<float, 3> shade(int layer, const Vec2& local) const;
  SynthScene scene_;
};

// Deterministic value noise in [0, 1].
double value_noise(double x, double y, std::uint64_t seed);

struct SynthOutput {
  std::filesystem::path manifest;
  std::vector<std::filesystem::path> frames;
};

// Renders all frames as 8-bit sRGB PNGs plus a manifest (and optionally the
// low-resolution subject saliency of the base frame and exact pair flows in
// processing order).
SynthOutput write_synth_burst(const SynthRenderer& renderer,
                              const std::filesystem::path& dir,
                              BlurMode mode, bool write_saliency,
                              bool write_flows);

// Named scenes used by the CLI and tests: static, moving_disc,
// panning_subject, parallax, disparity_overflow, constant_velocity.
SynthScene synth_preset(const std::string& name, std::uint64_t seed = 1);

}  // namespace longexp

#endif  // LONGEXP_SYNTH_H_
