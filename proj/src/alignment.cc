#include "longexp/alignment.h"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>

#include "longexp/errors.h"

namespace longexp {
namespace {

Vec2 rotate(const Vec2& v, double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + mid));
  }
  return m;
}

struct Centroids {
  Vec2 from, to;
  double weight = 0.0;
};

Centroids weighted_centroids(const std::vector<Correspondence>& c) {
  Centroids out;
  for (const auto& k : c) {
    if (k.weight <= 0.0) continue;
    out.from += k.from * k.weight;
    out.to += k.to * k.weight;
    out.weight += k.weight;
  }
  if (out.weight > 0.0) {
    out.from = out.from / out.weight;
    out.to = out.to / out.weight;
  }
  return out;
}

// Smallest-angle difference wrapped to (-pi, pi].
double wrap_angle(double a) { return std::remainder(a, 2.0 * M_PI); }

}  // namespace

Vec2 Similarity2D::apply(const Vec2& x) const {
  return rotate(x, theta) * s + t;
}

Similarity2D Similarity2D::inverse() const {
  Similarity2D inv;
  inv.s = 1.0 / s;
  inv.theta = -theta;
  inv.t = -(rotate(t, -theta) / s);
  return inv;
}

Similarity2D Similarity2D::compose(const Similarity2D& inner) const {
  Similarity2D out;
  out.s = s * inner.s;
  out.theta = wrap_angle(theta + inner.theta);
  out.t = apply(inner.t);
  return out;
}

Similarity2D estimate_global_similarity(
    const std::vector<Correspondence>& correspondences) {
  int used = 0;
  for (const auto& c : correspondences) used += c.weight > 0.0;
  if (used < 2) throw DegenerateError("similarity needs 2 correspondences");
  const Centroids m = weighted_centroids(correspondences);
  double a = 0.0, b = 0.0, var = 0.0;
  for (const auto& c : correspondences) {
    if (c.weight <= 0.0) continue;
    const Vec2 x = c.from - m.from;
    const Vec2 y = c.to - m.to;
    a += c.weight * dot(x, y);
    b += c.weight * cross(x, y);
    var += c.weight * dot(x, x);
  }
  if (var <= 1e-12 * m.weight) {
    throw DegenerateError("correspondences coincide");
  }
  Similarity2D out;
  out.theta = std::atan2(b, a);
  out.s = std::hypot(a, b) / var;
  out.t = m.to - rotate(m.from, out.theta) * out.s;
  return out;
}

Similarity2D estimate_global_similarity_robust(
    const std::vector<Correspondence>& correspondences, double floor_px,
    std::vector<bool>* inliers) {
  std::vector<Correspondence> work = correspondences;
  Similarity2D fit = estimate_global_similarity(work);
  std::vector<bool> keep(correspondences.size(), true);
  for (int iter = 0; iter < 10; ++iter) {
    std::vector<double> residuals;
    residuals.reserve(correspondences.size());
    for (const auto& c : correspondences) {
      residuals.push_back(norm(fit.apply(c.from) - c.to));
    }
    const double threshold = std::max(floor_px, 3.0 * median(residuals));
    bool changed = false;
    for (std::size_t k = 0; k < correspondences.size(); ++k) {
      const bool in = residuals[k] <= threshold;
      changed |= in != keep[k];
      keep[k] = in;
      work[k].weight = in ? correspondences[k].weight : 0.0;
    }
    if (!changed) break;
    try {
      fit = estimate_global_similarity(work);
    } catch (const DegenerateError&) {
      break;
    }
  }
  if (inliers) *inliers = keep;
  return fit;
}

Similarity2D fit_with_fixed_rotation(
    const std::vector<Correspondence>& correspondences, double theta) {
  const Centroids m = weighted_centroids(correspondences);
  if (m.weight <= 0.0) throw DegenerateError("no weighted correspondences");
  const Vec2 rf = rotate(m.from, theta);
  double num = 0.0, den = 0.0;
  for (const auto& c : correspondences) {
    if (c.weight <= 0.0) continue;
    const Vec2 x = rotate(c.from, theta) - rf;
    num += c.weight * dot(x, c.to - m.to);
    den += c.weight * dot(x, x);
  }
  Similarity2D out;
  out.theta = theta;
  out.s = den > 1e-12 * m.weight ? num / den : 1.0;
  out.t = m.to - rf * out.s;
  return out;
}

MeshWarp::MeshWarp(int width, int height, const MeshParams& params)
    : cols_(params.cols),
      rows_(params.rows),
      cell_w_(static_cast<double>(width) / params.cols),
      cell_h_(static_cast<double>(height) / params.rows),
      support_radius_cells_(params.support_radius_cells),
      displacements_(static_cast<std::size_t>(params.cols + 1) *
                     (params.rows + 1)) {}

double MeshWarp::support_radius() const {
  return support_radius_cells_ * std::max(cell_w_, cell_h_);
}

Vec2 MeshWarp::vertex_position(int i, int j) const {
  return {-0.5 + i * cell_w_, -0.5 + j * cell_h_};
}

Vec2 MeshWarp::displacement_at(const Vec2& p) const {
  if (empty()) return {};
  const double u = std::clamp((p.x + 0.5) / cell_w_, 0.0, static_cast<double>(cols_));
  const double v = std::clamp((p.y + 0.5) / cell_h_, 0.0, static_cast<double>(rows_));
  const int i0 = std::min(static_cast<int>(u), cols_ - 1);
  const int j0 = std::min(static_cast<int>(v), rows_ - 1);
  const double fx = u - i0, fy = v - j0;
  return displacement(i0, j0) * ((1 - fx) * (1 - fy)) +
         displacement(i0 + 1, j0) * (fx * (1 - fy)) +
         displacement(i0, j0 + 1) * ((1 - fx) * fy) +
         displacement(i0 + 1, j0 + 1) * (fx * fy);
}

double MeshWarp::max_displacement() const {
  double m = 0.0;
  for (const Vec2& d : displacements_) m = std::max(m, norm(d));
  return m;
}

MeshWarp refine_mesh_foreground(const std::vector<Correspondence>& residuals,
                                int width, int height,
                                const MeshParams& params) {
  MeshWarp mesh(width, height, params);
  const int nv = (mesh.cols() + 1) * (mesh.rows() + 1);
  std::vector<std::optional<Similarity2D>> local(nv);
  const double radius = mesh.support_radius();
  for (int j = 0; j <= mesh.rows(); ++j) {
    for (int i = 0; i <= mesh.cols(); ++i) {
      const Vec2 v = mesh.vertex_position(i, j);
      std::vector<Correspondence> near;
      for (const auto& r : residuals) {
        if (norm(r.from - v) <= radius) near.push_back({r.from, r.to, 1.0});
      }
      if (static_cast<int>(near.size()) < params.min_points) continue;
      try {
        local[j * (mesh.cols() + 1) + i] = estimate_global_similarity_robust(near);
      } catch (const DegenerateError&) {
      }
    }
  }
  bool any = false;
  for (const auto& l : local) any |= l.has_value();
  if (!any) return mesh;

  for (int j = 0; j <= mesh.rows(); ++j) {
    for (int i = 0; i <= mesh.cols(); ++i) {
      const Vec2 v = mesh.vertex_position(i, j);
      const auto& own = local[j * (mesh.cols() + 1) + i];
      const Similarity2D* s = own ? &*own : nullptr;
      if (!s) {
        double best = std::numeric_limits<double>::infinity();
        for (int jj = 0; jj <= mesh.rows(); ++jj) {
          for (int ii = 0; ii <= mesh.cols(); ++ii) {
            const auto& cand = local[jj * (mesh.cols() + 1) + ii];
            const double d = norm(mesh.vertex_position(ii, jj) - v);
            if (cand && d < best) {
              best = d;
              s = &*cand;
            }
          }
        }
      }
      mesh.displacement(i, j) = s->apply(v) - v;
    }
  }

  // Project onto the neighbor-delta bound by alternating pairwise
  // projections.
  const double bound = params.max_neighbor_delta_cells *
                       std::min(mesh.cell_width(), mesh.cell_height());
  auto project = [&](Vec2& a, Vec2& b) {
    const Vec2 d = a - b;
    const double n = norm(d);
    if (n <= bound) return false;
    const Vec2 fix = d * (0.5 * (n - bound) / n);
    a -= fix;
    b += fix;
    return true;
  };
  for (int pass = 0; pass < 100; ++pass) {
    bool changed = false;
    for (int j = 0; j <= mesh.rows(); ++j) {
      for (int i = 0; i <= mesh.cols(); ++i) {
        if (i < mesh.cols()) changed |= project(mesh.displacement(i, j), mesh.displacement(i + 1, j));
        if (j < mesh.rows()) changed |= project(mesh.displacement(i, j), mesh.displacement(i, j + 1));
      }
    }
    if (!changed) break;
  }
  return mesh;
}

double AlignmentSolution::diagonal() const { return std::hypot(width, height); }

void AlignmentSolution::append(const Similarity2D& g, MeshWarp m) {
  global.push_back(g);
  mesh.push_back(std::move(m));
}

Vec2 AlignmentSolution::to_base(int frame, const Vec2& x) const {
  const Vec2 q = global[frame].apply(x);
  const MeshWarp& m = mesh[frame];
  if (m.empty()) return q;
  Vec2 p = q;
  for (int it = 0; it < 30; ++it) {
    const Vec2 next = q - m.displacement_at(p);
    const double step = norm(next - p);
    p = next;
    if (step < 1e-9) break;
  }
  return p;
}

Vec2 AlignmentSolution::from_base(int frame, const Vec2& p) const {
  return global[frame].inverse().apply(p + mesh[frame].displacement_at(p));
}

double smooth_l1(double x) {
  const double a = std::abs(x);
  return a < 1.0 ? 0.5 * x * x : a - 0.5;
}

TrackSet cluster_subject_tracks(const TrackSet& tracks, int first_frame,
                                int last_frame, const ClusterParams& params) {
  std::vector<const Track*> candidates;
  std::vector<Vec2> velocity;
  for (const Track& t : tracks.tracks) {
    if (t.weight <= 0.0) continue;
    const int a = std::max(first_frame, t.start);
    const int b = std::min(last_frame, t.end() - 1);
    if (b <= a) continue;
    candidates.push_back(&t);
    velocity.push_back((t.at(b) - t.at(a)) / (b - a));
  }
  if (candidates.empty()) {
    throw FallbackError(FallbackReason::kNoSubjectTracks,
                        "no subject-weighted tracks to cluster");
  }
  const int n_all = static_cast<int>(candidates.size());
  std::vector<int> sample;
  const int stride = (n_all + params.max_points - 1) / params.max_points;
  for (int k = 0; k < n_all; k += stride) sample.push_back(k);
  const int n = static_cast<int>(sample.size());

  std::vector<int> label_of_sample(n, 0);
  int k_clusters = 1;
  if (n > 1) {
    Eigen::MatrixXd dist(n, n);
    for (int a = 0; a < n; ++a) {
      for (int b = 0; b < n; ++b) {
        dist(a, b) = norm(velocity[sample[a]] - velocity[sample[b]]);
      }
    }
    std::vector<double> sigma(n);
    for (int a = 0; a < n; ++a) {
      std::vector<double> row(n);
      for (int b = 0; b < n; ++b) row[b] = dist(a, b);
      std::sort(row.begin(), row.end());
      const int rank = std::min(params.neighbor_rank, n - 1);
      sigma[a] = std::max(params.sigma_floor, row[rank]);
    }
    Eigen::MatrixXd affinity(n, n);
    for (int a = 0; a < n; ++a) {
      for (int b = 0; b < n; ++b) {
        affinity(a, b) = std::exp(-dist(a, b) * dist(a, b) / (sigma[a] * sigma[b]));
      }
    }
    const Eigen::VectorXd inv_sqrt_deg =
        affinity.rowwise().sum().array().max(1e-300).rsqrt();
    Eigen::MatrixXd laplacian =
        -(inv_sqrt_deg.asDiagonal() * affinity * inv_sqrt_deg.asDiagonal());
    laplacian.diagonal().array() += 1.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(laplacian);
    const Eigen::VectorXd& lambda = eig.eigenvalues();
    const int max_k = std::min(params.max_clusters, n - 1);
    double best_gap = -1.0;
    for (int k = 1; k <= max_k; ++k) {
      const double gap = lambda(k) - lambda(k - 1);
      if (gap > best_gap + 1e-12) {
        best_gap = gap;
        k_clusters = k;
      }
    }
    if (k_clusters > 1) {
      Eigen::MatrixXd emb = eig.eigenvectors().leftCols(k_clusters);
      for (int a = 0; a < n; ++a) {
        const double r = emb.row(a).norm();
        if (r > 0) emb.row(a) /= r;
      }
      // k-means with farthest-point initialization.
      std::vector<int> centers_idx{0};
      while (static_cast<int>(centers_idx.size()) < k_clusters) {
        int far = 0;
        double far_d = -1.0;
        for (int a = 0; a < n; ++a) {
          double d = std::numeric_limits<double>::infinity();
          for (int c : centers_idx) d = std::min(d, (emb.row(a) - emb.row(c)).squaredNorm());
          if (d > far_d) {
            far_d = d;
            far = a;
          }
        }
        centers_idx.push_back(far);
      }
      Eigen::MatrixXd centers(k_clusters, k_clusters);
      for (int c = 0; c < k_clusters; ++c) centers.row(c) = emb.row(centers_idx[c]);
      for (int it = 0; it < 100; ++it) {
        bool changed = false;
        for (int a = 0; a < n; ++a) {
          int best = 0;
          double best_d = std::numeric_limits<double>::infinity();
          for (int c = 0; c < k_clusters; ++c) {
            const double d = (emb.row(a) - centers.row(c)).squaredNorm();
            if (d < best_d) {
              best_d = d;
              best = c;
            }
          }
          changed |= label_of_sample[a] != best;
          label_of_sample[a] = best;
        }
        if (!changed && it > 0) break;
        for (int c = 0; c < k_clusters; ++c) {
          Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(k_clusters);
          int count = 0;
          for (int a = 0; a < n; ++a) {
            if (label_of_sample[a] == c) {
              sum += emb.row(a);
              ++count;
            }
          }
          if (count > 0) centers.row(c) = sum / count;
        }
      }
    }
  }

  // Velocity centroids per cluster label all candidates, sampled or not.
  std::vector<Vec2> centroid(k_clusters);
  std::vector<double> centroid_w(k_clusters, 0.0);
  for (int a = 0; a < n; ++a) {
    centroid[label_of_sample[a]] += velocity[sample[a]];
    centroid_w[label_of_sample[a]] += 1.0;
  }
  for (int c = 0; c < k_clusters; ++c) {
    if (centroid_w[c] > 0) centroid[c] = centroid[c] / centroid_w[c];
  }
  std::vector<int> label(n_all, -1);
  for (int a = 0; a < n; ++a) label[sample[a]] = label_of_sample[a];
  for (int k = 0; k < n_all; ++k) {
    if (label[k] >= 0) continue;
    double best = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k_clusters; ++c) {
      if (centroid_w[c] == 0) continue;
      const double d = norm(velocity[k] - centroid[c]);
      if (d < best) {
        best = d;
        label[k] = c;
      }
    }
  }
  std::vector<double> total(k_clusters, 0.0);
  for (int k = 0; k < n_all; ++k) total[label[k]] += candidates[k]->weight;
  const int chosen = static_cast<int>(
      std::max_element(total.begin(), total.end()) - total.begin());

  TrackSet out;
  out.grid_cell_px = tracks.grid_cell_px;
  out.width = tracks.width;
  out.height = tracks.height;
  out.num_frames = tracks.num_frames;
  for (int k = 0; k < n_all; ++k) {
    if (label[k] == chosen) out.tracks.push_back(*candidates[k]);
  }
  return out;
}

namespace {

struct BackgroundVector {
  Vec2 v1;       // a_j - a_i
  Vec2 aligned_j;
  Vec2 x_k;
};

struct Problem {
  std::vector<Correspondence> subject;
  std::vector<BackgroundVector> background;
  double lambda_f = 1.0;
  double lambda_b = 10.0;

  double e_f(const Similarity2D& s) const {
    double e = 0.0;
    for (const auto& c : subject) e += c.weight * norm(c.to - s.apply(c.from));
    return e;
  }
  double e_b(const Similarity2D& s) const {
    double e = 0.0;
    for (const auto& b : background) e += smooth_l1(deviation(b, s));
    return e;
  }
  double cost(const Similarity2D& s) const {
    return lambda_f * e_f(s) + lambda_b * e_b(s);
  }
  static double deviation(const BackgroundVector& b, const Similarity2D& s) {
    const Vec2 v2 = s.apply(b.x_k) - b.aligned_j;
    const double n = norm(b.v1) * norm(v2);
    if (n <= 0.0) return 0.0;
    return 1.0 - dot(b.v1, v2) / n;
  }
};

Similarity2D from_params(const Eigen::Vector4d& p) {
  Similarity2D s;
  s.s = p(0);
  s.theta = p(1);
  s.t = {p(2), p(3)};
  return s;
}

Eigen::Vector4d to_params(const Similarity2D& s) {
  return {s.s, s.theta, s.t.x, s.t.y};
}

// Stacked residuals and IRLS weights so that sum(w r^2)/2 has the same
// gradient as the true cost at the linearization point.
void residuals(const Problem& pr, const Similarity2D& s, Eigen::VectorXd& r,
               Eigen::VectorXd* w) {
  const int n = 2 * static_cast<int>(pr.subject.size()) +
                static_cast<int>(pr.background.size());
  r.resize(n);
  if (w) w->resize(n);
  int row = 0;
  for (const auto& c : pr.subject) {
    const Vec2 d = s.apply(c.from) - c.to;
    r(row) = d.x;
    r(row + 1) = d.y;
    if (w) {
      const double omega = pr.lambda_f * c.weight / std::max(norm(d), 1e-6);
      (*w)(row) = omega;
      (*w)(row + 1) = omega;
    }
    row += 2;
  }
  for (const auto& b : pr.background) {
    const double e = Problem::deviation(b, s);
    r(row) = e;
    if (w) (*w)(row) = pr.lambda_b * (std::abs(e) < 1.0 ? 1.0 : 1.0 / std::abs(e));
    ++row;
  }
}

void check_finite(const Similarity2D& s, const SolverParams& params) {
  if (!std::isfinite(s.s) || !std::isfinite(s.theta) || !std::isfinite(s.t.x) ||
      !std::isfinite(s.t.y) || s.s < params.min_scale || s.s > params.max_scale) {
    throw FallbackError(FallbackReason::kSolverDiverged,
                        "background alignment left the valid parameter range");
  }
}

}  // namespace

Similarity2D solve_background_step(const TrackSet& subject,
                                   const TrackSet& background, int frame,
                                   const AlignmentSolution& solution,
                                   const SolverParams& params,
                                   BackgroundStepReport* report) {
  if (frame < 1 || frame != solution.num_frames()) {
    throw std::invalid_argument("background step out of order");
  }
  const int j = frame - 1;
  Problem pr;
  pr.lambda_f = params.lambda_f;
  pr.lambda_b = params.lambda_b;
  for (const Track& t : subject.tracks) {
    if (!t.valid(j) || !t.valid(frame)) continue;
    pr.subject.push_back(
        {t.at(frame), solution.to_base(j, t.at(j)), std::max(t.weight, 1e-6)});
  }
  if (pr.subject.empty()) {
    throw FallbackError(FallbackReason::kNoSubjectTracks,
                        "no subject track reaches frame " + std::to_string(frame));
  }
  BackgroundStepReport rep;
  rep.subject_count = static_cast<int>(pr.subject.size());

  Similarity2D init;
  try {
    init = estimate_global_similarity_robust(pr.subject);
  } catch (const DegenerateError&) {
    // A single subject point only fixes the translation.
    init.t = pr.subject[0].to - pr.subject[0].from;
  }
  rep.estimated_roll = init.theta;

  Similarity2D result;
  if (frame == 1) {
    result = fit_with_fixed_rotation(pr.subject, params.roll_fraction * init.theta);
  } else {
    for (const Track& t : background.tracks) {
      if (!t.valid(j) || !t.valid(frame) || t.start >= j) continue;
      const Vec2 a_i = solution.to_base(t.start, t.at(t.start));
      const Vec2 a_j = solution.to_base(j, t.at(j));
      BackgroundVector b{a_j - a_i, a_j, t.at(frame)};
      if (norm(b.v1) < params.min_flow_px) continue;
      if (norm(init.apply(b.x_k) - a_j) < params.min_flow_px) continue;
      pr.background.push_back(b);
    }
    rep.background_count = static_cast<int>(pr.background.size());

    Eigen::Vector4d p = to_params(init);
    double cost = pr.cost(init);
    double mu = 1e-3;
    const Eigen::Vector4d step_size(1e-6, 1e-6, 1e-4, 1e-4);
    for (int it = 0; it < params.max_iters; ++it) {
      rep.iterations = it + 1;
      Eigen::VectorXd r, w;
      residuals(pr, from_params(p), r, &w);
      Eigen::MatrixXd jac(r.size(), 4);
      for (int c = 0; c < 4; ++c) {
        Eigen::Vector4d hi = p, lo = p;
        hi(c) += step_size(c);
        lo(c) -= step_size(c);
        Eigen::VectorXd rh, rl;
        residuals(pr, from_params(hi), rh, nullptr);
        residuals(pr, from_params(lo), rl, nullptr);
        jac.col(c) = (rh - rl) / (2.0 * step_size(c));
      }
      const Eigen::Matrix4d a = jac.transpose() * w.asDiagonal() * jac;
      const Eigen::Vector4d g = jac.transpose() * (w.array() * r.array()).matrix();
      bool accepted = false;
      Eigen::Vector4d delta = Eigen::Vector4d::Zero();
      for (int tries = 0; tries < 12; ++tries) {
        Eigen::Matrix4d damped = a;
        damped.diagonal() += mu * a.diagonal().cwiseMax(1e-12);
        delta = damped.ldlt().solve(-g);
        if (!delta.allFinite()) break;
        const double next_cost = pr.cost(from_params(p + delta));
        if (next_cost < cost) {
          p += delta;
          cost = next_cost;
          mu = std::max(mu * 0.1, 1e-12);
          accepted = true;
          break;
        }
        mu *= 10.0;
      }
      if (!accepted || delta.norm() < params.tol) break;
    }
    result = from_params(p);
    result.theta = wrap_angle(result.theta);
  }
  check_finite(result, params);
  rep.e_f = pr.e_f(result);
  rep.e_b = pr.e_b(result);
  if (report) *report = rep;
  return result;
}

std::vector<Similarity2D> solve_background_alignment(
    const TrackSet& subject, const TrackSet& background, int num_frames,
    const SolverParams& params) {
  AlignmentSolution solution;
  solution.width = subject.width;
  solution.height = subject.height;
  solution.append({});
  for (int k = 1; k < num_frames; ++k) {
    solution.append(solve_background_step(subject, background, k, solution, params));
  }
  return solution.global;
}

void align_foreground_frame(const TrackSet& tracks, int frame,
                            AlignmentSolution& solution,
                            const MeshParams& params, bool use_mesh) {
  if (frame != solution.num_frames()) {
    throw std::invalid_argument("foreground alignment out of order");
  }
  if (frame == 0) {
    solution.append({});
    return;
  }
  std::vector<Correspondence> corr;
  std::vector<bool> background;
  for (const Track& t : tracks.tracks) {
    if (!t.valid(frame) || t.start >= frame) continue;
    corr.push_back({t.at(frame), solution.to_base(t.start, t.at(t.start)), 1.0});
    background.push_back(t.weight < params.max_subject_weight);
  }
  Similarity2D g = solution.global[frame - 1];
  try {
    g = estimate_global_similarity_robust(corr);
  } catch (const DegenerateError&) {
    solution.append(g);
    return;
  }
  MeshWarp mesh;
  if (use_mesh) {
    std::vector<Correspondence> residuals;
    residuals.reserve(corr.size());
    // Only background tracks steer the mesh so foreground motion survives.
    for (std::size_t i = 0; i < corr.size(); ++i) {
      if (background[i]) residuals.push_back({corr[i].to, g.apply(corr[i].from), 1.0});
    }
    mesh = refine_mesh_foreground(residuals, solution.width, solution.height, params);
  }
  solution.append(g, std::move(mesh));
}

BackgroundStepReport align_background_frame(const TrackSet& tracks, int frame,
                                            AlignmentSolution& solution,
                                            const SolverParams& params,
                                            const ClusterParams& cluster) {
  BackgroundStepReport report;
  if (frame == 0) {
    solution.append({});
    return report;
  }
  TrackSet reaching;
  reaching.grid_cell_px = tracks.grid_cell_px;
  reaching.width = tracks.width;
  reaching.height = tracks.height;
  reaching.num_frames = tracks.num_frames;
  TrackSet background = reaching;
  for (const Track& t : tracks.tracks) {
    if (!t.valid(frame - 1) || !t.valid(frame)) continue;
    if (t.weight > 0.0) {
      reaching.tracks.push_back(t);
    } else {
      background.tracks.push_back(t);
    }
  }
  const TrackSet subject = cluster_subject_tracks(reaching, 0, frame, cluster);
  const Similarity2D step =
      solve_background_step(subject, background, frame, solution, params, &report);
  solution.append(step);
  return report;
}

Image compose_warp(int frame, const AlignmentSolution& solution,
                   int half_width, int half_height) {
  const LevelGeometry half{2}, low{8};
  Image field(half_width, half_height, 2);
  for (int y = 0; y < half_height; ++y) {
    for (int x = 0; x < half_width; ++x) {
      const Vec2 p{static_cast<double>(x), static_cast<double>(y)};
      const Vec2 q = convert_point(solution.from_base(frame, convert_point(p, half, low)), low, half);
      field.set_vec2(x, y, q - p);
    }
  }
  return field;
}

}  // namespace longexp
