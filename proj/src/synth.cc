#include "longexp/synth.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "longexp/errors.h"

namespace longexp {
namespace fs = std::filesystem;
namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double lattice(std::int64_t ix, std::int64_t iy, std::uint64_t seed) {
  const std::uint64_t h = splitmix(seed ^ splitmix(static_cast<std::uint64_t>(ix) * 0x100000001b3ULL ^
                                                   splitmix(static_cast<std::uint64_t>(iy))));
  return static_cast<double>(h >> 11) * (1.0 / 9007199254740992.0);
}

double fade(double t) { return t * t * (3.0 - 2.0 * t); }

Vec2 rotate(const Vec2& v, double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

bool covers(const SynthLayer& layer, const Vec2& local) {
  switch (layer.shape) {
    case ShapeKind::kDisc:
      return local.x * local.x + local.y * local.y <= layer.radius * layer.radius;
    case ShapeKind::kRect:
      return std::abs(local.x) <= layer.half_size.x && std::abs(local.y) <= layer.half_size.y;
    case ShapeKind::kPlane:
      if (layer.plane_min_x >= layer.plane_max_x) return true;
      return layer.center.x + local.x >= layer.plane_min_x &&
             layer.center.x + local.x <= layer.plane_max_x;
  }
  return false;
}

}  // namespace

double value_noise(double x, double y, std::uint64_t seed) {
  const double fx = std::floor(x), fy = std::floor(y);
  const auto ix = static_cast<std::int64_t>(fx);
  const auto iy = static_cast<std::int64_t>(fy);
  const double tx = fade(x - fx), ty = fade(y - fy);
  const double a = lattice(ix, iy, seed), b = lattice(ix + 1, iy, seed);
  const double c = lattice(ix, iy + 1, seed), d = lattice(ix + 1, iy + 1, seed);
  return (a * (1 - tx) + b * tx) * (1 - ty) + (c * (1 - tx) + d * tx) * ty;
}

Vec2 LayerPose::apply(const Vec2& local) const { return rotate(local, theta) + t; }
Vec2 LayerPose::invert(const Vec2& world) const { return rotate(world - t, -theta); }

SynthRenderer::SynthRenderer(SynthScene scene) : scene_(std::move(scene)) {}

LayerPose SynthRenderer::layer_pose(int layer, int frame) const {
  const SynthLayer& l = scene_.layers[layer];
  LayerPose pose;
  pose.theta = l.angular_velocity * frame +
               l.wobble_amplitude * std::sin(2.0 * M_PI * frame / l.wobble_period);
  pose.t = l.center + l.velocity * frame;
  return pose;
}

Vec2 SynthRenderer::world_to_image(const Vec2& world, int frame) const {
  const Vec2 c{0.5 * (scene_.width - 1), 0.5 * (scene_.height - 1)};
  return rotate(world - c, scene_.camera.roll_per_frame * frame) + c +
         scene_.camera.pan_per_frame * frame;
}

Vec2 SynthRenderer::image_to_world(const Vec2& image, int frame) const {
  const Vec2 c{0.5 * (scene_.width - 1), 0.5 * (scene_.height - 1)};
  return rotate(image - scene_.camera.pan_per_frame * frame - c,
                -scene_.camera.roll_per_frame * frame) + c;
}

int SynthRenderer::layer_at(int frame, const Vec2& p) const {
  const Vec2 world = image_to_world(p, frame);
  for (int l = static_cast<int>(scene_.layers.size()) - 1; l >= 0; --l) {
    if (covers(scene_.layers[l], layer_pose(l, frame).invert(world))) return l;
  }
  return -1;
}

Vec2 SynthRenderer::map_point(int from_frame, int to_frame, const Vec2& p,
                              int layer) const {
  if (layer < 0) return p;
  const Vec2 local = layer_pose(layer, from_frame).invert(image_to_world(p, from_frame));
  return world_to_image(layer_pose(layer, to_frame).apply(local), to_frame);
}

std::array<float, 3> SynthRenderer::shade(int layer, const Vec2& local) const {
  const SynthLayer& l = scene_.layers[layer];
  const double u = local.x / l.texture_scale, v = local.y / l.texture_scale;
  const double n = 0.65 * value_noise(u, v, l.texture_seed) +
                   0.35 * value_noise(2.0 * u + 17.1, 2.0 * v + 3.7, l.texture_seed + 1);
  const double gain = 1.0 + l.texture_contrast * (2.0 * n - 1.0);
  std::array<float, 3> rgb;
  for (int c = 0; c < 3; ++c) {
    rgb[c] = static_cast<float>(std::clamp(l.color[c] * gain, 0.0, 1.0));
  }
  return rgb;
}

Image SynthRenderer::render(int frame) const {
  Image out(scene_.width, scene_.height, 3);
  const int ss = std::max(1, scene_.supersample);
  std::vector<LayerPose> poses;
  for (int l = 0; l < static_cast<int>(scene_.layers.size()); ++l) {
    poses.push_back(layer_pose(l, frame));
  }
  parallel_rows(scene_.height, 4, [&](int y) {
    for (int x = 0; x < scene_.width; ++x) {
      double acc[3] = {0, 0, 0};
      for (int sy = 0; sy < ss; ++sy) {
        for (int sx = 0; sx < ss; ++sx) {
          const Vec2 q{x + (sx + 0.5) / ss - 0.5, y + (sy + 0.5) / ss - 0.5};
          const Vec2 world = image_to_world(q, frame);
          for (int l = static_cast<int>(scene_.layers.size()) - 1; l >= 0; --l) {
            const Vec2 local = poses[l].invert(world);
            if (!covers(scene_.layers[l], local)) continue;
            const auto rgb = shade(l, local);
            for (int c = 0; c < 3; ++c) acc[c] += rgb[c];
            break;
          }
        }
      }
      for (int c = 0; c < 3; ++c) {
        out.at(x, y, c) = static_cast<float>(acc[c] / (ss * ss));
      }
    }
  });
  if (scene_.noise_sigma > 0.0) {
    std::seed_seq seq{static_cast<std::uint32_t>(scene_.noise_seed),
                      static_cast<std::uint32_t>(frame)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> noise(0.0, scene_.noise_sigma);
    for (float& v : out.data()) v = static_cast<float>(std::max(0.0, v + noise(rng)));
  }
  return out;
}

Image SynthRenderer::subject_mask(int frame) const {
  Image out(scene_.width, scene_.height, 1);
  const int ss = std::max(1, scene_.supersample);
  parallel_rows(scene_.height, 4, [&](int y) {
    for (int x = 0; x < scene_.width; ++x) {
      int hits = 0;
      for (int sy = 0; sy < ss; ++sy) {
        for (int sx = 0; sx < ss; ++sx) {
          const int l = layer_at(frame, {x + (sx + 0.5) / ss - 0.5, y + (sy + 0.5) / ss - 0.5});
          hits += l >= 0 && scene_.layers[l].subject;
        }
      }
      out.at(x, y) = static_cast<float>(hits) / (ss * ss);
    }
  });
  return out;
}

Image SynthRenderer::pair_flow(int frame_a, int frame_b, int level_factor) const {
  const LevelGeometry g{level_factor};
  const int w = (scene_.width + level_factor - 1) / level_factor;
  const int h = (scene_.height + level_factor - 1) / level_factor;
  Image out(w, h, 4);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Vec2 p{static_cast<double>(x), static_cast<double>(y)};
      const Vec2 full{g.to_full(p.x), g.to_full(p.y)};
      const Vec2 in_a = map_point(frame_b, frame_a, full, layer_at(frame_b, full));
      const Vec2 in_b = map_point(frame_a, frame_b, full, layer_at(frame_a, full));
      out.at(x, y, 0) = static_cast<float>(g.from_full(in_a.x) - p.x);
      out.at(x, y, 1) = static_cast<float>(g.from_full(in_a.y) - p.y);
      out.at(x, y, 2) = static_cast<float>(g.from_full(in_b.x) - p.x);
      out.at(x, y, 3) = static_cast<float>(g.from_full(in_b.y) - p.y);
    }
  }
  return out;
}

SynthOutput write_synth_burst(const SynthRenderer& renderer, const fs::path& dir,
                              BlurMode mode, bool write_saliency,
                              bool write_flows) {
  fs::create_directories(dir);
  const SynthScene& scene = renderer.scene();
  SynthOutput out;
  BurstManifest manifest;
  manifest.mode = mode;
  manifest.base_index = mode == BlurMode::kForeground ? 0 : scene.num_frames - 1;
  for (int f = 0; f < scene.num_frames; ++f) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%03d.png", f);
    write_png_srgb(dir / name, renderer.render(f));
    out.frames.push_back(dir / name);
    manifest.frame_paths.push_back(name);
  }
  if (write_saliency) {
    write_png_gray(dir / "saliency.png",
                   downsample(renderer.subject_mask(manifest.base_index), 8));
    manifest.saliency_map = "saliency.png";
  }
  if (write_flows) {
    fs::create_directories(dir / "flows");
    const int step = mode == BlurMode::kForeground ? 1 : -1;
    for (int k = 0; k + 1 < scene.num_frames; ++k) {
      const int a = manifest.base_index + step * k;
      const int b = a + step;
      write_raw_float(dir / "flows" / ("pair_" + std::to_string(k) + ".raw"),
                      renderer.pair_flow(a, b, 8));
    }
    manifest.flow_dir = "flows";
  }
  manifest.faces = scene.faces;
  out.manifest = dir / "manifest.json";
  save_manifest(manifest, out.manifest);
  return out;
}

SynthScene synth_preset(const std::string& name, std::uint64_t seed) {
  SynthScene scene;
  scene.width = 1024;
  scene.height = 768;
  scene.num_frames = 8;
  scene.noise_seed = seed;

  SynthLayer background;
  background.shape = ShapeKind::kPlane;
  background.center = {512, 384};
  background.color = {0.45f, 0.5f, 0.4f};
  background.texture_scale = 24.0;
  background.texture_contrast = 0.7;
  background.texture_seed = seed * 31 + 1;

  SynthLayer disc;
  disc.shape = ShapeKind::kDisc;
  disc.center = {300, 384};
  disc.radius = 140;
  disc.color = {0.8f, 0.35f, 0.25f};
  disc.texture_scale = 20.0;
  disc.texture_contrast = 0.6;
  disc.texture_seed = seed * 31 + 2;

  if (name == "static") {
    scene.num_frames = 6;
    scene.layers = {background, disc};
  } else if (name == "moving_disc") {
    disc.velocity = {24, 0};
    disc.subject = true;
    scene.layers = {background, disc};
  } else if (name == "panning_subject") {
    scene.num_frames = 9;
    disc.subject = true;
    disc.center = {360, 384};
    disc.velocity = {-32, 0};
    scene.camera.pan_per_frame = {8, -4};
    scene.layers = {background, disc};
  } else if (name == "parallax") {
    SynthLayer far = background;
    far.plane_min_x = -1e9;
    far.plane_max_x = 320;
    SynthLayer near = background;
    near.texture_seed = seed * 31 + 3;
    near.color = {0.3f, 0.45f, 0.6f};
    near.plane_min_x = 704;
    near.plane_max_x = 1e9;
    near.velocity = {16, 0};
    SynthLayer gap = background;
    gap.texture_contrast = 0.0;
    scene.layers = {gap, far, near};
  } else if (name == "disparity_overflow") {
    scene.num_frames = 4;
    SynthLayer rect = disc;
    rect.shape = ShapeKind::kRect;
    rect.center = {200, 384};
    rect.half_size = {180, 300};
    rect.velocity = {600, 0};
    scene.layers = {background, rect};
  } else if (name == "constant_velocity") {
    scene.num_frames = 16;
    SynthLayer band = disc;
    band.shape = ShapeKind::kRect;
    band.center = {200, 384};
    band.half_size = {160, 260};
    band.velocity = {40, 0};
    band.subject = true;
    scene.layers = {background, band};
  } else {
    throw InputError("unknown synth preset: " + name);
  }
  return scene;
}

}  // namespace longexp
