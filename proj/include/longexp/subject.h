#ifndef LONGEXP_SUBJECT_H_
#define LONGEXP_SUBJECT_H_

#include <filesystem>
#include <optional>
#include <vector>

#include "longexp/image.h"

namespace longexp {

// Saliency values below this (after normalization) are zeroed.
inline constexpr double kSaliencyThreshold = 0.43;

// A feathered face region: weight 1 inside inner_radius, smootherstep falloff
// to 0 at outer_radius.
struct FaceRegion {
  Vec2 center;
  double inner_radius = 0.0;
  double outer_radius = 0.0;
  // Mean aligned feature movement inside the region, percent of diagonal.
  // Filled in by compositing.
  double motion_mean = 0.0;

  void validate() const;
  // Region expressed in another pyramid level's pixel coordinates.
  FaceRegion converted(const LevelGeometry& from, const LevelGeometry& to) const;
};

struct SubjectWeightMap {
  Image saliency;  // s
  Image face;      // f
  Image weight;    // w = normalize(s (1 + f))
};

// Clamps to [0, 1], zeroes values below `threshold`, then divides by the max.
Image threshold_saliency(const Image& raw,
                         double threshold = kSaliencyThreshold);

// Centered Gaussian prior with sigma = 0.25 * image diagonal, peak 1.
Image gaussian_saliency_prior(int width, int height);

// Loads the saliency map at `path` (must match the frame dimensions) or falls
// back to the Gaussian prior, then thresholds it.
Image load_or_synthesize_saliency(
    int width, int height, const std::optional<std::filesystem::path>& path,
    double threshold = kSaliencyThreshold);

// 6t^5 - 15t^4 + 10t^3 with t clamped to [0, 1].
double smootherstep(double t);

// Falloff of one region at distance `r` from its center.
double face_falloff(const FaceRegion& region, double r);

// Per-pixel max over regions of the feathered falloff, optionally multiplied
// by a whole-subject segmentation mask of the same size.
Image face_signal(const std::vector<FaceRegion>& regions, int width,
                  int height, const Image* segmentation = nullptr);

// w = s (1 + f) divided by its max; an all-zero map stays zero.
Image combine_subject_weights(const Image& s, const Image& f);

SubjectWeightMap build_subject_map(const Image& saliency,
                                   const std::vector<FaceRegion>& regions,
                                   const Image* segmentation = nullptr);

}  // namespace longexp

#endif  // LONGEXP_SUBJECT_H_
