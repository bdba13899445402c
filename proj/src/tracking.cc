#include "longexp/tracking.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "longexp/alignment.h"
#include "longexp/burst_io.h"
#include "longexp/errors.h"

namespace longexp {
namespace {

Image central_gradient(const Image& img, bool along_x) {
  Image g(img.width(), img.height(), 1);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      g.at(x, y) = along_x
                       ? 0.5f * (img.clamped(x + 1, y) - img.clamped(x - 1, y))
                       : 0.5f * (img.clamped(x, y + 1) - img.clamped(x, y - 1));
    }
  }
  return g;
}

// Coordinates at pyramid level l from level 0 (2x2 box reduction).
Vec2 to_level(const Vec2& p, int l) {
  Vec2 q = p;
  for (int i = 0; i < l; ++i) q = (q - Vec2{0.5, 0.5}) * 0.5;
  return q;
}

bool in_bounds(const Vec2& p, int w, int h) {
  return p.x >= 0.0 && p.y >= 0.0 && p.x <= w - 1 && p.y <= h - 1;
}

std::seed_seq frame_seed(std::uint64_t seed, int frame) {
  return std::seed_seq{static_cast<std::uint32_t>(seed),
                       static_cast<std::uint32_t>(seed >> 32),
                       static_cast<std::uint32_t>(frame)};
}

}  // namespace

double TrackSet::diagonal() const { return std::hypot(width, height); }

ImagePyramid build_pyramid(const Image& gray, int levels) {
  ImagePyramid pyr;
  pyr.levels.push_back(luminance(gray));
  for (int l = 1; l < levels; ++l) {
    const Image& prev = pyr.levels.back();
    if (prev.width() < 8 || prev.height() < 8) break;
    pyr.levels.push_back(downsample(prev, 2));
  }
  for (const Image& level : pyr.levels) {
    pyr.grad_x.push_back(central_gradient(level, true));
    pyr.grad_y.push_back(central_gradient(level, false));
  }
  return pyr;
}

Image harris_response(const Image& gray, double k) {
  const Image img = luminance(gray);
  const Image gx = central_gradient(img, true);
  const Image gy = central_gradient(img, false);
  Image r(img.width(), img.height(), 1);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      double sxx = 0, syy = 0, sxy = 0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const double ix = gx.clamped(x + dx, y + dy);
          const double iy = gy.clamped(x + dx, y + dy);
          sxx += ix * ix;
          syy += iy * iy;
          sxy += ix * iy;
        }
      }
      const double trace = sxx + syy;
      r.at(x, y) = static_cast<float>(sxx * syy - sxy * sxy - k * trace * trace);
    }
  }
  return r;
}

std::vector<Vec2> detect_features(const Image& gray, const Image& weight_map,
                                  std::uint64_t seed,
                                  const TrackingParams& params,
                                  const std::vector<bool>* occupied) {
  if (weight_map.width() != gray.width() ||
      weight_map.height() != gray.height()) {
    throw InputError("weight map does not match frame size");
  }
  const Image response = harris_response(gray, params.harris_k);
  float max_response = 0.0f;
  for (float v : response.data()) max_response = std::max(max_response, v);
  const double threshold = params.harris_rel_threshold * max_response;

  const int cell = params.grid_cell_px;
  const int cols = (gray.width() + cell - 1) / cell;
  const int rows = (gray.height() + cell - 1) / cell;
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32)};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  std::vector<Vec2> features;
  for (int cy = 0; cy < rows; ++cy) {
    for (int cx = 0; cx < cols; ++cx) {
      const double v = uniform(rng);
      if (occupied && (*occupied)[cy * cols + cx]) continue;
      const int x0 = cx * cell, y0 = cy * cell;
      const int x1 = std::min(x0 + cell, gray.width());
      const int y1 = std::min(y0 + cell, gray.height());
      double weight_sum = 0.0;
      float best = -1.0f;
      Vec2 best_p;
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
          weight_sum += weight_map.at(x, y);
          if (response.at(x, y) > best) {
            best = response.at(x, y);
            best_p = {static_cast<double>(x), static_cast<double>(y)};
          }
        }
      }
      const double mean_weight = weight_sum / ((x1 - x0) * (y1 - y0));
      if (v < mean_weight && max_response > 0.0f && best >= threshold) {
        features.push_back(best_p);
      }
    }
  }
  return features;
}

std::optional<PointMatch> match_point(const ImagePyramid& from,
                                      const ImagePyramid& to, const Vec2& p,
                                      const Vec2& guess,
                                      const TrackingParams& params) {
  const int levels = static_cast<int>(
      std::min(from.levels.size(), to.levels.size()));
  const int r = params.window_radius;
  const int side = 2 * r + 1;
  const int area = side * side;
  std::vector<double> tmpl(area), ix(area), iy(area);

  Vec2 g = guess;
  for (int i = 0; i < levels - 1; ++i) g *= 0.5;

  Vec2 displacement;
  for (int l = levels - 1; l >= 0; --l) {
    const Image& I = from.levels[l];
    const Image& J = to.levels[l];
    const Vec2 pl = to_level(p, l);
    double gxx = 0, gyy = 0, gxy = 0;
    for (int k = 0, dy = -r; dy <= r; ++dy) {
      for (int dx = -r; dx <= r; ++dx, ++k) {
        const double sx = pl.x + dx, sy = pl.y + dy;
        tmpl[k] = I.sample(sx, sy);
        ix[k] = from.grad_x[l].sample(sx, sy);
        iy[k] = from.grad_y[l].sample(sx, sy);
        gxx += ix[k] * ix[k];
        gyy += iy[k] * iy[k];
        gxy += ix[k] * iy[k];
      }
    }
    const double det = gxx * gyy - gxy * gxy;
    const double tr = gxx + gyy;
    const double min_eig =
        0.5 * (tr - std::sqrt(std::max(0.0, tr * tr - 4.0 * det))) / area;
    Vec2 v;
    if (min_eig >= params.min_eigenvalue) {
      for (int it = 0; it < params.max_iterations; ++it) {
        double bx = 0, by = 0;
        const Vec2 q = pl + g + v;
        for (int k = 0, dy = -r; dy <= r; ++dy) {
          for (int dx = -r; dx <= r; ++dx, ++k) {
            const double diff = tmpl[k] - J.sample(q.x + dx, q.y + dy);
            bx += diff * ix[k];
            by += diff * iy[k];
          }
        }
        const Vec2 dv{(gyy * bx - gxy * by) / det, (gxx * by - gxy * bx) / det};
        v += dv;
        if (norm(dv) < params.convergence_px) break;
      }
      // A coarse level that runs away (window mostly outside the image)
      // contributes nothing; finer levels start from the previous guess.
      if (!std::isfinite(v.x) || !std::isfinite(v.y) || norm(v) > r) {
        if (l == 0) return std::nullopt;
        v = {};
      }
    } else if (l == 0) {
      return std::nullopt;
    }
    if (l > 0) {
      g = (g + v) * 2.0;
    } else {
      displacement = g + v;
    }
  }

  const Vec2 q = p + displacement;
  const Image& I = from.levels[0];
  const Image& J = to.levels[0];
  if (!in_bounds(q, J.width(), J.height())) return std::nullopt;
  double sq = 0.0;
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) {
      const double diff = I.sample(p.x + dx, p.y + dy) - J.sample(q.x + dx, q.y + dy);
      sq += diff * diff;
    }
  }
  const double rms = std::sqrt(sq / area);
  if (!(rms <= params.max_residual_rms)) return std::nullopt;
  return PointMatch{q, rms};
}

std::optional<Vec2> track_point(const ImagePyramid& from,
                                const ImagePyramid& to, const Vec2& p,
                                const TrackingParams& params) {
  const auto fwd = match_point(from, to, p, {}, params);
  if (!fwd) return std::nullopt;
  const auto back = match_point(to, from, fwd->position, p - fwd->position, params);
  if (!back || norm(back->position - p) > params.max_forward_backward_px) {
    return std::nullopt;
  }
  return fwd->position;
}

Tracker::Tracker(int width, int height, TrackingParams params,
                 std::uint64_t seed)
    : width_(width), height_(height), params_(params), seed_(seed) {}

int Tracker::add_frame(const Image& gray) {
  if (gray.width() != width_ || gray.height() != height_) {
    throw InputError("tracker frame size mismatch");
  }
  pyramids_.push_back(build_pyramid(gray, params_.pyramid_levels));
  const int frame = num_frames() - 1;
  if (frame == 0) return frame;
  const ImagePyramid& prev = pyramids_[frame - 1];
  const ImagePyramid& next = pyramids_[frame];
  for (Track& t : tracks_) {
    if (!t.active) continue;
    if (t.end() != frame) {
      t.active = false;
      continue;
    }
    const auto q = track_point(prev, next, t.points.back(), params_);
    if (q) {
      t.points.push_back(*q);
    } else {
      t.active = false;
    }
  }
  return frame;
}

void Tracker::spawn(const Image& sampling_weight, const Image& subject_weight) {
  const int frame = num_frames() - 1;
  if (frame < 0) return;
  const int cell = params_.grid_cell_px;
  const int cols = (width_ + cell - 1) / cell;
  const int rows = (height_ + cell - 1) / cell;
  std::vector<bool> occupied(static_cast<std::size_t>(cols) * rows, false);
  for (const Track& t : tracks_) {
    if (!t.active || t.end() != frame + 1) continue;
    const Vec2& p = t.points.back();
    const int cx = std::clamp(static_cast<int>(p.x) / cell, 0, cols - 1);
    const int cy = std::clamp(static_cast<int>(p.y) / cell, 0, rows - 1);
    occupied[cy * cols + cx] = true;
  }
  std::seed_seq seq = frame_seed(seed_, frame);
  std::uint64_t frame_seed_value;
  {
    std::uint32_t words[2];
    seq.generate(words, words + 2);
    frame_seed_value = (static_cast<std::uint64_t>(words[1]) << 32) | words[0];
  }
  const auto features =
      detect_features(pyramids_[frame].levels[0], sampling_weight,
                      frame_seed_value, params_, &occupied);
  for (const Vec2& p : features) {
    Track t;
    t.start = frame;
    t.points.push_back(p);
    t.weight = subject_weight.sample(p.x, p.y);
    tracks_.push_back(std::move(t));
  }
}

TrackSet Tracker::track_set() const {
  TrackSet set;
  set.grid_cell_px = params_.grid_cell_px;
  set.width = width_;
  set.height = height_;
  set.num_frames = num_frames();
  for (const Track& t : tracks_) {
    if (t.points.size() >= 2) set.tracks.push_back(t);
  }
  return set;
}

TrackSet track_features(const std::vector<Image>& frames,
                        const std::vector<Vec2>& seeds,
                        const TrackingParams& params) {
  if (frames.size() < 2) throw InputError("tracking needs at least 2 frames");
  std::vector<ImagePyramid> pyramids;
  for (const Image& f : frames) {
    pyramids.push_back(build_pyramid(f, params.pyramid_levels));
  }
  TrackSet set;
  set.grid_cell_px = params.grid_cell_px;
  set.width = frames[0].width();
  set.height = frames[0].height();
  set.num_frames = static_cast<int>(frames.size());
  for (const Vec2& seed : seeds) {
    Track t;
    t.points.push_back(seed);
    for (std::size_t i = 1; i < frames.size(); ++i) {
      const auto q = track_point(pyramids[i - 1], pyramids[i], t.points.back(), params);
      if (!q) break;
      t.points.push_back(*q);
    }
    t.active = t.end() == set.num_frames;
    if (t.points.size() >= 2) set.tracks.push_back(std::move(t));
  }
  return set;
}

double track_length_diag_pct(const Track& track,
                             const AlignmentSolution& alignment) {
  double length = 0.0;
  for (int f = track.start + 1; f < track.end(); ++f) {
    length += norm(alignment.to_base(f, track.at(f)) -
                   alignment.to_base(f - 1, track.at(f - 1)));
  }
  return 100.0 * length / alignment.diagonal();
}

}  // namespace longexp
