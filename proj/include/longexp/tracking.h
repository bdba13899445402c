#ifndef LONGEXP_TRACKING_H_
#define LONGEXP_TRACKING_H_

#include <cstdint>
#include <optional>
#include <vector>

#include "longexp/image.h"

namespace longexp {

struct AlignmentSolution;

struct TrackingParams {
  int grid_cell_px = 5;
  double harris_k = 0.04;
  // Corner response must reach this fraction of the frame's max response.
  double harris_rel_threshold = 1e-4;
  int window_radius = 5;  // 11x11 matching window
  int pyramid_levels = 3;
  int max_iterations = 20;
  double convergence_px = 0.01;
  // RMS intensity residual over the window (linear [0, 1] units).
  double max_residual_rms = 0.05;
  double max_forward_backward_px = 1.0;
  // Minimum eigenvalue of the mean window structure tensor.
  double min_eigenvalue = 1e-7;
};

// A feature followed over a contiguous span of frames. Frame numbers are
// positions in the processed sequence, 0 being the base frame.
struct Track {
  int start = 0;
  std::vector<Vec2> points;
  // Subject weight sampled where the track spawned.
  double weight = 0.0;
  bool active = true;

  int end() const { return start + static_cast<int>(points.size()); }
  bool valid(int frame) const { return frame >= start && frame < end(); }
  const Vec2& at(int frame) const { return points[frame - start]; }
};

struct TrackSet {
  std::vector<Track> tracks;
  int grid_cell_px = 5;
  int width = 0;   // low-resolution frame size
  int height = 0;
  int num_frames = 0;

  double diagonal() const;
};

// Gaussian-free image pyramid with central-difference gradients per level.
struct ImagePyramid {
  std::vector<Image> levels;
  std::vector<Image> grad_x;
  std::vector<Image> grad_y;
};
ImagePyramid build_pyramid(const Image& gray, int levels);

// Harris corner response (3x3 structure tensor window).
Image harris_response(const Image& gray, double k);

// Rejection-sampled corner detection: for every grid cell (raster order) a
// uniform v in [0, 1] is drawn; the cell's strongest corner is kept iff
// v < the mean weight over the cell and the corner passes the threshold.
// Cells flagged in `occupied` (row-major, one per cell) are skipped.
std::vector<Vec2> detect_features(const Image& gray, const Image& weight_map,
                                  std::uint64_t seed,
                                  const TrackingParams& params = {},
                                  const std::vector<bool>* occupied = nullptr);

// Pyramidal Lucas-Kanade for one point; nullopt when the point is lost
// (out of bounds, flat window, residual too high).
struct PointMatch {
  Vec2 position;
  double residual_rms = 0.0;
};
std::optional<PointMatch> match_point(const ImagePyramid& from,
                                      const ImagePyramid& to, const Vec2& p,
                                      const Vec2& guess,
                                      const TrackingParams& params);

// Match with the forward-backward consistency check.
std::optional<Vec2> track_point(const ImagePyramid& from,
                                const ImagePyramid& to, const Vec2& p,
                                const TrackingParams& params);

// Incremental tracker: frames are appended one at a time, features are
// followed into each new frame, and empty grid cells are refilled on demand.
class Tracker {
 public:
  Tracker(int width, int height, TrackingParams params, std::uint64_t seed);

  // Appends a frame (grayscale, low resolution) and tracks active features
  // into it. Returns the frame's sequence position.
  int add_frame(const Image& gray);

  // Spawns features in cells of the latest frame with no active track.
  // `sampling_weight` drives rejection sampling; `subject_weight` is
  // recorded on each new track. Both are in the latest frame's coordinates.
  void spawn(const Image& sampling_weight, const Image& subject_weight);

  // Tracks with at least two points.
  TrackSet track_set() const;
  int num_frames() const { return static_cast<int>(pyramids_.size()); }

 private:
  int width_;
  int height_;
  TrackingParams params_;
  std::uint64_t seed_;
  std::vector<ImagePyramid> pyramids_;
  std::vector<Track> tracks_;
};

// Follows the given seed points (spawned in frames[0]) through all frames
// without respawning.
TrackSet track_features(const std::vector<Image>& frames,
                        const std::vector<Vec2>& seeds,
                        const TrackingParams& params = {});

// Length of the track's polyline after mapping every point into the base
// frame, as a percentage of the low-resolution diagonal.
double track_length_diag_pct(const Track& track,
                             const AlignmentSolution& alignment);

}  // namespace longexp

#endif  // LONGEXP_TRACKING_H_
