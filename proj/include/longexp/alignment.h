#ifndef LONGEXP_ALIGNMENT_H_
#define LONGEXP_ALIGNMENT_H_

#include <vector>

#include "longexp/image.h"
#include "longexp/tracking.h"

namespace longexp {

// x' = s R(theta) x + t
struct Similarity2D {
  double s = 1.0;
  double theta = 0.0;  // radians
  Vec2 t;

  Vec2 apply(const Vec2& x) const;
  Similarity2D inverse() const;
  // (*this) after `inner`.
  Similarity2D compose(const Similarity2D& inner) const;
};

struct Correspondence {
  Vec2 from;
  Vec2 to;
  double weight = 1.0;
};

// Closed-form weighted least squares. Throws DegenerateError when fewer than
// two correspondences carry weight or all of them coincide.
Similarity2D estimate_global_similarity(
    const std::vector<Correspondence>& correspondences);

// Iteratively refits on points whose residual is within
// max(floor_px, 3 * median residual). `inliers`, when given, receives the
// final inlier flags.
Similarity2D estimate_global_similarity_robust(
    const std::vector<Correspondence>& correspondences, double floor_px = 1.0,
    std::vector<bool>* inliers = nullptr);

// Closed-form fit of scale and translation with the rotation held fixed.
Similarity2D fit_with_fixed_rotation(
    const std::vector<Correspondence>& correspondences, double theta);

struct MeshParams {
  int cols = 8;
  int rows = 6;
  double support_radius_cells = 1.5;
  int min_points = 4;
  // Bound on the displacement difference between neighboring vertices, as a
  // fraction of the smaller cell side.
  double max_neighbor_delta_cells = 0.5;
  // Tracks spawned at this subject weight or above are foreground and do not
  // contribute residuals.
  double max_subject_weight = 0.5;
};

// Displacement field on a regular vertex grid covering the image.
class MeshWarp {
 public:
  MeshWarp() = default;  // identity, no vertices
  MeshWarp(int width, int height, const MeshParams& params = {});

  int cols() const { return cols_; }
  int rows() const { return rows_; }
  double cell_width() const { return cell_w_; }
  double cell_height() const { return cell_h_; }
  double support_radius() const;
  bool empty() const { return displacements_.empty(); }

  Vec2 vertex_position(int i, int j) const;
  Vec2& displacement(int i, int j) { return displacements_[j * (cols_ + 1) + i]; }
  const Vec2& displacement(int i, int j) const {
    return displacements_[j * (cols_ + 1) + i];
  }
  // Bilinear interpolation of vertex displacements (zero for empty meshes).
  Vec2 displacement_at(const Vec2& p) const;
  double max_displacement() const;

 private:
  int cols_ = 0;
  int rows_ = 0;
  double cell_w_ = 0.0;
  double cell_h_ = 0.0;
  double support_radius_cells_ = 1.5;
  std::vector<Vec2> displacements_;
};

// Residuals are (base position, vector) pairs expressed as correspondences
// from -> to = from + vector. Each vertex gets a local similarity fitted to
// the residuals within the support radius; sparse vertices inherit the
// nearest estimated vertex's transform.
MeshWarp refine_mesh_foreground(const std::vector<Correspondence>& residuals,
                                int width, int height,
                                const MeshParams& params = {});

// Per-frame transforms into the base frame, in low-resolution pixels.
// A frame point x_f lands at base position p where p + m(p) = G(x_f).
struct AlignmentSolution {
  int width = 0;
  int height = 0;
  std::vector<Similarity2D> global;
  std::vector<MeshWarp> mesh;

  int num_frames() const { return static_cast<int>(global.size()); }
  double diagonal() const;
  void append(const Similarity2D& g, MeshWarp m = {});
  Vec2 to_base(int frame, const Vec2& x) const;
  // Position in `frame` that lands on base pixel p.
  Vec2 from_base(int frame, const Vec2& p) const;
};

struct SolverParams {
  double lambda_f = 1.0;
  double lambda_b = 10.0;
  double roll_fraction = 0.25;
  int max_iters = 50;
  double tol = 1e-8;
  // Background flow vectors shorter than this are left out of E_b.
  double min_flow_px = 0.25;
  double min_scale = 0.5;
  double max_scale = 2.0;
};

double smooth_l1(double x);

struct ClusterParams {
  int max_clusters = 4;
  int neighbor_rank = 7;
  double sigma_floor = 0.5;  // px per frame
  int max_points = 400;
};

// Spectral clustering of subject tracks (weight > 0) by mean velocity over
// frames [first_frame, last_frame]; returns the cluster with the highest
// total weight. Throws FallbackError when no subject track qualifies.
TrackSet cluster_subject_tracks(const TrackSet& tracks, int first_frame,
                                int last_frame,
                                const ClusterParams& params = {});

struct BackgroundStepReport {
  double e_f = 0.0;
  double e_b = 0.0;
  double estimated_roll = 0.0;
  int iterations = 0;
  int subject_count = 0;
  int background_count = 0;
};

// Solves the transform of `frame` (frames before it already in `solution`)
// minimizing lambda_f E_f + lambda_b E_b. Throws FallbackError on
// divergence or when no subject track reaches the frame.
Similarity2D solve_background_step(const TrackSet& subject,
                                   const TrackSet& background, int frame,
                                   const AlignmentSolution& solution,
                                   const SolverParams& params,
                                   BackgroundStepReport* report = nullptr);

// Solves frames 1..num_frames-1 in order; frame 0 is the identity.
std::vector<Similarity2D> solve_background_alignment(
    const TrackSet& subject, const TrackSet& background, int num_frames,
    const SolverParams& params = {});

// Incremental per-frame drivers used by the pipeline. Both append the
// solution for `frame`, which must equal solution.num_frames().
void align_foreground_frame(const TrackSet& tracks, int frame,
                            AlignmentSolution& solution,
                            const MeshParams& params = {},
                            bool use_mesh = true);
BackgroundStepReport align_background_frame(
    const TrackSet& tracks, int frame, AlignmentSolution& solution,
    const SolverParams& params = {}, const ClusterParams& cluster = {});

// Sampling displacement for `frame` at half resolution: the frame pixel that
// lands on half-res base pixel p is p + D(p).
Image compose_warp(int frame, const AlignmentSolution& solution,
                   int half_width, int half_height);

}  // namespace longexp

#endif  // LONGEXP_ALIGNMENT_H_
