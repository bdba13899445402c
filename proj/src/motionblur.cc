#include "longexp/motionblur.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "longexp/burst_io.h"
#include "longexp/errors.h"

namespace longexp {
namespace {

// Sum over a (2r+1)^2 window, edge pixels excluded rather than replicated.
Image box_sum(const Image& in, int r) {
  const int w = in.width(), h = in.height();
  Image rows(w, h, 1), out(w, h, 1);
  for (int y = 0; y < h; ++y) {
    double s = 0.0;
    for (int x = 0; x <= std::min(r, w - 1); ++x) s += in.at(x, y);
    for (int x = 0; x < w; ++x) {
      rows.at(x, y) = static_cast<float>(s);
      if (x + r + 1 < w) s += in.at(x + r + 1, y);
      if (x - r >= 0) s -= in.at(x - r, y);
    }
  }
  for (int x = 0; x < w; ++x) {
    double s = 0.0;
    for (int y = 0; y <= std::min(r, h - 1); ++y) s += rows.at(x, y);
    for (int y = 0; y < h; ++y) {
      out.at(x, y) = static_cast<float>(s);
      if (y + r + 1 < h) s += rows.at(x, y + r + 1);
      if (y - r >= 0) s -= rows.at(x, y - r);
    }
  }
  return out;
}

Image median_filter(const Image& in, int r) {
  if (r <= 0) return in;
  Image out(in.width(), in.height(), in.channels());
  std::vector<float> window;
  for (int c = 0; c < in.channels(); ++c) {
    for (int y = 0; y < in.height(); ++y) {
      for (int x = 0; x < in.width(); ++x) {
        window.clear();
        for (int dy = -r; dy <= r; ++dy) {
          for (int dx = -r; dx <= r; ++dx) window.push_back(in.clamped(x + dx, y + dy, c));
        }
        auto mid = window.begin() + window.size() / 2;
        std::nth_element(window.begin(), mid, window.end());
        out.at(x, y, c) = *mid;
      }
    }
  }
  return out;
}

// Separable [1 4 6 4 1] / 16 filter, edges replicated.
Image binomial_blur(const Image& in) {
  static constexpr std::array<float, 5> k{1.0f / 16, 4.0f / 16, 6.0f / 16, 4.0f / 16, 1.0f / 16};
  const int w = in.width(), h = in.height();
  Image tmp(w, h, 1), out(w, h, 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float s = 0.0f;
      for (int i = -2; i <= 2; ++i) s += k[i + 2] * in.clamped(x + i, y);
      tmp.at(x, y) = s;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float s = 0.0f;
      for (int i = -2; i <= 2; ++i) s += k[i + 2] * tmp.clamped(x, y + i);
      out.at(x, y) = s;
    }
  }
  return out;
}

void gradients(const Image& img, Image& gx, Image& gy) {
  gx = Image(img.width(), img.height(), 1);
  gy = Image(img.width(), img.height(), 1);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      gx.at(x, y) = 0.5f * (img.clamped(x + 1, y) - img.clamped(x - 1, y));
      gy.at(x, y) = 0.5f * (img.clamped(x, y + 1) - img.clamped(x, y - 1));
    }
  }
}

double consistency(double error, const KernelParams& p) {
  return 1.0 / (1.0 + std::exp((error - p.consistency_midpoint_px) /
                               p.consistency_scale_px));
}

double path_length(const CubicPath& path) {
  double length = 0.0;
  Vec2 prev = path.p0;
  for (int i = 1; i <= 8; ++i) {
    const Vec2 q = path.at(i / 8.0);
    length += norm(q - prev);
    prev = q;
  }
  return length;
}

}  // namespace

Image estimate_flow(const Image& target, const Image& source,
                    const FlowParams& params) {
  if (target.width() != source.width() || target.height() != source.height()) {
    throw InputError("flow inputs differ in size");
  }
  std::vector<Image> tp{luminance(target)}, sp{luminance(source)};
  while (static_cast<int>(tp.size()) < params.max_levels &&
         std::min(tp.back().width(), tp.back().height()) / 2 >= params.min_level_size) {
    tp.push_back(downsample(binomial_blur(tp.back()), 2));
    sp.push_back(downsample(binomial_blur(sp.back()), 2));
  }
  const int top = static_cast<int>(tp.size()) - 1;
  const int r = params.window_radius;
  Image flow(tp[top].width(), tp[top].height(), 2);
  for (int l = top; l >= 0; --l) {
    const Image& T = tp[l];
    const Image& S = sp[l];
    const int w = T.width(), h = T.height();
    if (l < top) flow = resample(flow, w, h, 2.0);

    // Integer search: candidates in order of length so that ties keep the
    // shortest offset.
    const int sr = l == top ? std::max(params.top_search_radius,
                                       static_cast<int>(std::ceil(params.max_search_px / (1 << top))))
                            : params.search_radius;
    std::vector<Vec2> candidates;
    for (int dy = -sr; dy <= sr; ++dy) {
      for (int dx = -sr; dx <= sr; ++dx) candidates.push_back({double(dx), double(dy)});
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Vec2& a, const Vec2& b) { return norm(a) < norm(b); });
    Image best_cost(w, h, 1, std::numeric_limits<float>::infinity());
    Image best = flow;
    Image cost(w, h, 1);
    for (const Vec2& c : candidates) {
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const Vec2 f = flow.vec2_at(x, y) + c;
          const double d = S.sample(x + f.x, y + f.y) - T.at(x, y);
          cost.at(x, y) = static_cast<float>(d * d);
        }
      }
      const Image ssd = box_sum(cost, r);
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          if (ssd.at(x, y) < best_cost.at(x, y)) {
            best_cost.at(x, y) = ssd.at(x, y);
            best.set_vec2(x, y, flow.vec2_at(x, y) + c);
          }
        }
      }
    }
    const Image coarse = median_filter(best, params.median_radius);
    flow = coarse;

    // Per-pixel window Lucas-Kanade with the target's gradients; the
    // block search already placed the estimate within a pixel and the
    // refinement stays inside that pixel.
    Image tx, ty;
    gradients(T, tx, ty);
    Image a11(w, h, 1), a12(w, h, 1), a22(w, h, 1);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        a11.at(x, y) = tx.at(x, y) * tx.at(x, y);
        a12.at(x, y) = tx.at(x, y) * ty.at(x, y);
        a22.at(x, y) = ty.at(x, y) * ty.at(x, y);
      }
    }
    a11 = box_sum(a11, r);
    a12 = box_sum(a12, r);
    a22 = box_sum(a22, r);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double m11 = a11.at(x, y) + params.regularization;
        const double m22 = a22.at(x, y) + params.regularization;
        const double m12 = a12.at(x, y);
        const double det = m11 * m22 - m12 * m12;
        const Vec2 c = coarse.vec2_at(x, y);
        Vec2 f = c;
        for (int it = 0; it < params.warps_per_level; ++it) {
          double b1 = 0.0, b2 = 0.0;
          for (int dy = -r; dy <= r; ++dy) {
            const int yy = y + dy;
            if (yy < 0 || yy >= h) continue;
            for (int dx = -r; dx <= r; ++dx) {
              const int xx = x + dx;
              if (xx < 0 || xx >= w) continue;
              const double diff = T.at(xx, yy) - S.sample(xx + f.x, yy + f.y);
              b1 += tx.at(xx, yy) * diff;
              b2 += ty.at(xx, yy) * diff;
            }
          }
          const Vec2 d{(m22 * b1 - m12 * b2) / det, (m11 * b2 - m12 * b1) / det};
          if (!std::isfinite(d.x) || !std::isfinite(d.y)) break;
          Vec2 off = f + d - c;
          const double len = norm(off);
          if (len > 1.0) off *= 1.0 / len;
          f = c + off;
          if (norm(d) < 1e-3) break;
        }
        flow.set_vec2(x, y, f);
      }
    }
    flow = median_filter(flow, params.median_radius);
  }
  return flow;
}

KernelPair kernels_from_flows(const Image& delta_a, const Image& delta_b,
                              const KernelParams& params) {
  if (!delta_a.same_shape(delta_b) || delta_a.channels() != 2) {
    throw InputError("kernel flows must be matching 2-channel fields");
  }
  const int w = delta_a.width(), h = delta_a.height();
  KernelPair pair;
  pair.a = {Image(w, h, 2), Image(w, h, 1)};
  pair.b = {Image(w, h, 2), Image(w, h, 1)};
  auto clamp_len = [&](Vec2 d, bool& clamped) {
    const double n = norm(d);
    if (n > params.max_disparity_px) {
      clamped = true;
      d *= params.max_disparity_px / n;
    }
    return d;
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Vec2 da = delta_a.vec2_at(x, y);
      const Vec2 db = delta_b.vec2_at(x, y);
      const double ea = norm(da + delta_b.sample_vec2(x + da.x, y + da.y));
      const double eb = norm(db + delta_a.sample_vec2(x + db.x, y + db.y));
      const double ca = consistency(ea, params), cb = consistency(eb, params);
      const double wa = ca + cb > 1e-12 ? ca / (ca + cb) : 0.5;
      bool clamped = false;
      pair.a.delta.set_vec2(x, y, clamp_len(da, clamped));
      pair.b.delta.set_vec2(x, y, clamp_len(db, clamped));
      pair.a.weight.at(x, y) = static_cast<float>(wa);
      pair.b.weight.at(x, y) = static_cast<float>(1.0 - wa);
      pair.clamped_pixels += clamped;
    }
  }
  pair.clamp_fraction = static_cast<double>(pair.clamped_pixels) / (static_cast<double>(w) * h);
  return pair;
}

void check_disparity(const KernelPair& pair, const KernelParams& params) {
  if (pair.clamp_fraction > params.max_clamp_fraction) {
    throw FallbackError(FallbackReason::kDisparityOverflow,
                        std::to_string(pair.clamped_pixels) +
                            " pixels exceed the kernel length cap");
  }
}

KernelPair predict_kernels(const Image& frame_a, const Image& frame_b,
                           const KernelParams& params) {
  const Image da = estimate_flow(frame_b, frame_a, params.flow);
  const Image db = estimate_flow(frame_a, frame_b, params.flow);
  KernelPair pair = kernels_from_flows(da, db, params);
  check_disparity(pair, params);
  return pair;
}

KernelMap resize_kernel(const KernelMap& map, int width, int height) {
  KernelMap out;
  out.delta = resample(map.delta, width, height);
  const double sx = static_cast<double>(width) / map.delta.width();
  const double sy = static_cast<double>(height) / map.delta.height();
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      out.delta.at(x, y, 0) *= static_cast<float>(sx);
      out.delta.at(x, y, 1) *= static_cast<float>(sy);
    }
  }
  out.weight = resample(map.weight, width, height);
  return out;
}

int adaptive_samples(double length_px, int max_samples) {
  const double n = std::ceil(2.0 * length_px);
  return static_cast<int>(std::clamp(n, 2.0, static_cast<double>(max_samples)));
}

Image render_pair_linear(const Image& a, const Image& b, const KernelMap& ka,
                         const KernelMap& kb, const RenderOptions& options,
                         int workers) {
  if (!a.same_shape(b) || ka.delta.width() != a.width() ||
      ka.delta.height() != a.height() || kb.delta.width() != a.width() ||
      kb.delta.height() != a.height()) {
    throw InputError("render inputs differ in size");
  }
  Image out(a.width(), a.height(), a.channels());
  const int channels = a.channels();
  parallel_rows(a.height(), workers, [&](int y) {
    std::vector<double> acc(channels);
    for (int x = 0; x < a.width(); ++x) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (int i = 0; i < 2; ++i) {
        const Image& img = i == 0 ? a : b;
        const KernelMap& k = i == 0 ? ka : kb;
        const Vec2 d = k.delta.vec2_at(x, y);
        const int n_samples = options.fixed_samples > 0
                                  ? options.fixed_samples
                                  : adaptive_samples(norm(d));
        double wsum = 0.0;
        for (int n = 0; n < n_samples; ++n) {
          wsum += options.ramp ? 1.0 - static_cast<double>(n) / n_samples : 1.0;
        }
        const double scale = k.weight.at(x, y) / wsum;
        for (int n = 0; n < n_samples; ++n) {
          const double wn = options.ramp ? 1.0 - static_cast<double>(n) / n_samples : 1.0;
          const double t = static_cast<double>(n) / (n_samples - 1);
          const double sx = x + t * d.x, sy = y + t * d.y;
          for (int c = 0; c < channels; ++c) acc[c] += scale * wn * img.sample(sx, sy, c);
        }
      }
      for (int c = 0; c < channels; ++c) out.at(x, y, c) = static_cast<float>(acc[c]);
    }
  });
  return out;
}

Vec2 instantaneous_flow(const Vec2& plus, const Vec2& minus) {
  const double lp = norm(plus), lm = norm(minus);
  if (lp == 0.0 || lm == 0.0) return {};
  const Vec2 sum = plus + minus;
  const double ls = norm(sum);
  if (ls < 1e-12 * (lp + lm)) return {};
  const double theta = std::acos(std::clamp(dot(plus, minus) / (lp * lm), -1.0, 1.0));
  double taper = 1.0;
  if (theta > M_PI / 2) taper = 1.0 - std::pow(2.0 * theta / M_PI - 1.0, 4);
  if (taper < 1e-6) return {};
  const double t2 = theta * theta;
  const double arc = theta < 1e-3 ? 1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0
                                  : theta / std::sin(theta);
  const double harmonic = 2.0 * lp * lm / (lp + lm);
  return sum * (harmonic * arc * taper / ls);
}

Vec2 CubicPath::at(double t) const {
  const double t2 = t * t, t3 = t2 * t;
  return p0 * (2 * t3 - 3 * t2 + 1) + m0 * (t3 - 2 * t2 + t) +
         p1 * (-2 * t3 + 3 * t2) + m1 * (t3 - t2);
}

Vec2 CubicPath::derivative(double t) const {
  const double t2 = t * t;
  return p0 * (6 * t2 - 6 * t) + m0 * (3 * t2 - 4 * t + 1) +
         p1 * (-6 * t2 + 6 * t) + m1 * (3 * t2 - 2 * t);
}

CubicPath build_spline(const Vec2& origin, const Vec2& plus,
                       const Vec2& tangent0, const Vec2& tangent1) {
  return {origin, origin + plus, tangent0, tangent1};
}

Vec2 extrapolate_flow_endpoint(const Vec2& a, const Vec2& b, const Vec2& c) {
  const Vec2 bc = c - b;
  const double len = norm(bc);
  if (len == 0.0) return c;
  const Vec2 n = bc / len;
  const Vec2 mid = (b + c) * 0.5;
  const Vec2 mirrored = a - n * (2.0 * dot(a - mid, n));
  Vec2 cd = mirrored - c;
  const double l = norm(cd);
  if (l > len) cd *= len / l;
  return c + cd;
}

void append_pair(FlowSequence& seq, const KernelPair& pair, int width,
                 int height) {
  const KernelMap ka = resize_kernel(pair.a, width, height);
  const KernelMap kb = resize_kernel(pair.b, width, height);
  Image backward = ka.delta;
  for (float& v : backward.data()) v = -v;
  seq.forward.push_back(kb.delta);
  seq.backward.push_back(std::move(backward));
  seq.weight_a.push_back(ka.weight);
  seq.weight_b.push_back(kb.weight);
}

Image accumulate_burst(const std::vector<Image>& frames,
                       const FlowSequence& flows,
                       const AccumulateOptions& options) {
  const int pairs = flows.pairs();
  if (pairs < 1 || static_cast<int>(frames.size()) != pairs + 1) {
    throw InputError("accumulation needs K >= 1 pairs and K + 1 frames");
  }
  const int w = frames[0].width(), h = frames[0].height();
  const int channels = frames[0].channels();
  for (const Image& f : frames) {
    if (f.width() != w || f.height() != h || f.channels() != channels) {
      throw InputError("accumulation frames differ in size");
    }
  }
  std::vector<Image> input;
  input.reserve(frames.size());
  for (const Image& f : frames) {
    input.push_back(options.soft_gamma_k == 1.0 ? f
                                                : apply_soft_gamma(f, options.soft_gamma_k));
  }

  // Per-frame tangents for the spline paths.
  std::vector<Image> tangent;
  if (options.spline) {
    for (int k = 0; k <= pairs; ++k) tangent.emplace_back(w, h, 2);
    parallel_rows(h, options.workers, [&](int y) {
      for (int x = 0; x < w; ++x) {
        const Vec2 c{static_cast<double>(x), static_cast<double>(y)};
        for (int k = 0; k <= pairs; ++k) {
          Vec2 plus, minus;
          if (k > 0 && k < pairs) {
            plus = flows.forward[k].vec2_at(x, y);
            minus = flows.backward[k - 1].vec2_at(x, y);
          } else if (k == 0) {
            // Extrapolate one step into the past by running time backwards.
            const Vec2 b = c + flows.forward[0].vec2_at(x, y);
            const Vec2 a = pairs >= 2 ? b + flows.forward[1].sample_vec2(b.x, b.y)
                                      : b + (b - c);
            plus = b - c;
            minus = c - extrapolate_flow_endpoint(a, b, c);
          } else {
            const Vec2 b = c - flows.backward[pairs - 1].vec2_at(x, y);
            const Vec2 a = pairs >= 2 ? b - flows.backward[pairs - 2].sample_vec2(b.x, b.y)
                                      : b - (c - b);
            plus = extrapolate_flow_endpoint(a, b, c) - c;
            minus = c - b;
          }
          tangent[k].set_vec2(x, y, instantaneous_flow(plus, minus));
        }
      }
    });
  }

  Image out(w, h, channels);
  parallel_rows(h, options.workers, [&](int y) {
    std::vector<double> acc(channels);
    std::vector<double> speed;
    for (int x = 0; x < w; ++x) {
      std::fill(acc.begin(), acc.end(), 0.0);
      double wsum = 0.0;
      const Vec2 p{static_cast<double>(x), static_cast<double>(y)};
      auto pass = [&](const Image& frame, const CubicPath& path, double weight) {
        const int n_samples =
            options.fixed_samples > 0
                ? options.fixed_samples
                : adaptive_samples(path_length(path), options.max_samples);
        speed.resize(n_samples);
        double mean = 0.0;
        for (int n = 0; n < n_samples; ++n) {
          speed[n] = norm(path.derivative((n + 0.5) / n_samples));
          mean += speed[n] / n_samples;
        }
        for (int n = 0; n < n_samples; ++n) {
          const double t = (n + 0.5) / n_samples;
          const double s = mean > 1e-12 ? speed[n] / mean : 1.0;
          const double wn = weight * (1.0 - t) * s / n_samples;
          const Vec2 q = path.at(t);
          for (int c = 0; c < channels; ++c) acc[c] += wn * frame.sample(q.x, q.y, c);
          wsum += wn;
        }
      };
      for (int i = 0; i < pairs; ++i) {
        const Vec2 fwd = flows.forward[i].vec2_at(x, y);
        const Vec2 bwd = flows.backward[i].vec2_at(x, y);
        CubicPath forward_path, backward_path;
        if (options.spline) {
          const Vec2 p1 = p + fwd;
          const Vec2 q1 = p - bwd;
          forward_path = build_spline(p, fwd, tangent[i].vec2_at(x, y),
                                      tangent[i + 1].sample_vec2(p1.x, p1.y));
          backward_path = build_spline(p, -bwd, -tangent[i + 1].vec2_at(x, y),
                                       -tangent[i].sample_vec2(q1.x, q1.y));
        } else {
          forward_path = build_spline(p, fwd, fwd, fwd);
          backward_path = build_spline(p, -bwd, -bwd, -bwd);
        }
        pass(input[i + 1], forward_path, flows.weight_b[i].at(x, y));
        pass(input[i], backward_path, flows.weight_a[i].at(x, y));
      }
      for (int c = 0; c < channels; ++c) {
        double v = wsum > 0.0 ? acc[c] / wsum : input[0].at(x, y, c);
        if (options.soft_gamma_k != 1.0) v = soft_gamma(v, 1.0 / options.soft_gamma_k);
        out.at(x, y, c) = static_cast<float>(v);
      }
    }
  });
  return out;
}

Image warp_image(const Image& image, const Image& displacement) {
  Image out(displacement.width(), displacement.height(), image.channels());
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      const Vec2 d = displacement.vec2_at(x, y);
      for (int c = 0; c < image.channels(); ++c) {
        out.at(x, y, c) = image.sample(x + d.x, y + d.y, c);
      }
    }
  }
  return out;
}

}  // namespace longexp
