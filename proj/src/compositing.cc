#include "longexp/compositing.h"

#include <algorithm>
#include <cmath>

#include "longexp/errors.h"
#include "longexp/selection.h"

namespace longexp {
namespace {

// Mean over the clipped (2r+1)^2 window.
Image box_mean(const Image& in, int r) {
  const int w = in.width(), h = in.height();
  std::vector<double> integral(static_cast<std::size_t>(w + 1) * (h + 1), 0.0);
  auto at = [&](int x, int y) -> double& { return integral[static_cast<std::size_t>(y) * (w + 1) + x]; };
  for (int y = 0; y < h; ++y) {
    double row = 0.0;
    for (int x = 0; x < w; ++x) {
      row += in.at(x, y);
      at(x + 1, y + 1) = at(x + 1, y) + row;
    }
  }
  Image out(w, h, 1);
  for (int y = 0; y < h; ++y) {
    const int y0 = std::max(0, y - r), y1 = std::min(h, y + r + 1);
    for (int x = 0; x < w; ++x) {
      const int x0 = std::max(0, x - r), x1 = std::min(w, x + r + 1);
      const double s = at(x1, y1) - at(x0, y1) - at(x1, y0) + at(x0, y0);
      out.at(x, y) = static_cast<float>(s / ((x1 - x0) * (y1 - y0)));
    }
  }
  return out;
}

Image multiply(const Image& a, const Image& b) {
  Image out(a.width(), a.height(), 1);
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) out.at(x, y) = a.at(x, y) * b.at(x, y);
  }
  return out;
}

}  // namespace

FlowMask flow_mask_from_magnitude(const Image& magnitude,
                                  const CompositeParams& params) {
  FlowMask fm;
  fm.magnitude = magnitude;
  fm.mask = Image(magnitude.width(), magnitude.height(), 1);
  std::vector<double> values(magnitude.data().begin(), magnitude.data().end());
  const double p = percentile(values, params.reference_percentile);
  fm.reference = std::max(p, params.min_reference_px);
  if (fm.reference <= 0.0) return fm;
  const double lo = params.alpha * fm.reference;
  const double span = (params.beta - params.alpha) * fm.reference;
  for (int y = 0; y < magnitude.height(); ++y) {
    for (int x = 0; x < magnitude.width(); ++x) {
      fm.mask.at(x, y) = static_cast<float>(
          std::clamp((magnitude.at(x, y) - lo) / span, 0.0, 1.0));
    }
  }
  return fm;
}

FlowMask compute_flow_mask(const std::vector<Image>& flows,
                           const CompositeParams& params) {
  if (flows.empty()) throw InputError("flow mask needs at least one flow");
  Image mag(flows[0].width(), flows[0].height(), 1);
  for (const Image& f : flows) {
    if (f.width() != mag.width() || f.height() != mag.height() || f.channels() != 2) {
      throw InputError("flow fields differ in size");
    }
    for (int y = 0; y < mag.height(); ++y) {
      for (int x = 0; x < mag.width(); ++x) {
        mag.at(x, y) = std::max(mag.at(x, y), static_cast<float>(norm(f.vec2_at(x, y))));
      }
    }
  }
  return flow_mask_from_magnitude(mag, params);
}

Image refine_mask_edge_aware(const Image& mask, const Image& guide, int radius,
                             double eps) {
  const Image g = luminance(guide);
  if (g.width() != mask.width() || g.height() != mask.height()) {
    throw InputError("mask and guide differ in size");
  }
  const Image p = luminance(mask);
  const Image mean_i = box_mean(g, radius);
  const Image mean_p = box_mean(p, radius);
  const Image corr_ii = box_mean(multiply(g, g), radius);
  const Image corr_ip = box_mean(multiply(g, p), radius);
  Image a(g.width(), g.height(), 1), b(g.width(), g.height(), 1);
  for (int y = 0; y < g.height(); ++y) {
    for (int x = 0; x < g.width(); ++x) {
      const double var = corr_ii.at(x, y) - mean_i.at(x, y) * mean_i.at(x, y);
      const double cov = corr_ip.at(x, y) - mean_i.at(x, y) * mean_p.at(x, y);
      const double ak = cov / (var + eps);
      a.at(x, y) = static_cast<float>(ak);
      b.at(x, y) = static_cast<float>(mean_p.at(x, y) - ak * mean_i.at(x, y));
    }
  }
  const Image mean_a = box_mean(a, radius);
  const Image mean_b = box_mean(b, radius);
  Image out(g.width(), g.height(), 1);
  for (int y = 0; y < g.height(); ++y) {
    for (int x = 0; x < g.width(); ++x) {
      out.at(x, y) = std::clamp(mean_a.at(x, y) * g.at(x, y) + mean_b.at(x, y), 0.0f, 1.0f);
    }
  }
  return out;
}

double face_motion_mean(const FaceRegion& region, const TrackSet& tracks,
                        const AlignmentSolution& alignment) {
  double sum = 0.0;
  int count = 0;
  for (const Track& t : tracks.tracks) {
    const int end = std::min(t.end(), alignment.num_frames());
    if (end - t.start < 2) continue;
    const Vec2 base = alignment.to_base(t.start, t.at(t.start));
    if (norm(base - region.center) > region.outer_radius) continue;
    sum += track_length_diag_pct(
        Track{t.start, {t.points.begin(), t.points.begin() + (end - t.start)}, t.weight, false},
        alignment);
    ++count;
  }
  return count > 0 ? sum / count : 0.0;
}

Image face_protection_mask(const std::vector<FaceRegion>& regions, int width,
                           int height, double threshold_pct) {
  std::vector<FaceRegion> still;
  for (const FaceRegion& r : regions) {
    if (r.motion_mean < threshold_pct) still.push_back(r);
  }
  return face_signal(still, width, height);
}

Image combine_masks(const Image& flow_mask, const Image& protection) {
  if (flow_mask.width() != protection.width() ||
      flow_mask.height() != protection.height()) {
    throw InputError("masks differ in size");
  }
  Image out(flow_mask.width(), flow_mask.height(), 1);
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      out.at(x, y) = 1.0f - std::max(1.0f - flow_mask.at(x, y), protection.at(x, y));
    }
  }
  return out;
}

Image composite_final(const Image& sharp, const Image& blurred,
                      const Image& mask) {
  if (blurred.channels() != sharp.channels()) {
    throw InputError("blurred and sharp images differ in channels");
  }
  if (mask.width() != blurred.width() || mask.height() != blurred.height()) {
    throw InputError("mask and blurred image differ in size");
  }
  const Image up = blurred.width() == sharp.width() && blurred.height() == sharp.height()
                       ? blurred
                       : resample(blurred, sharp.width(), sharp.height());
  const Image m = mask.width() == sharp.width() && mask.height() == sharp.height()
                      ? mask
                      : resample(mask, sharp.width(), sharp.height());
  Image out(sharp.width(), sharp.height(), sharp.channels());
  for (int y = 0; y < sharp.height(); ++y) {
    for (int x = 0; x < sharp.width(); ++x) {
      const float a = std::clamp(m.at(x, y), 0.0f, 1.0f);
      for (int c = 0; c < sharp.channels(); ++c) {
        out.at(x, y, c) = a == 0.0f ? sharp.at(x, y, c)
                                    : a * up.at(x, y, c) + (1.0f - a) * sharp.at(x, y, c);
      }
    }
  }
  return out;
}

}  // namespace longexp
