#include "longexp/subject.h"

#include <algorithm>
#include <cmath>

#include "longexp/burst_io.h"
#include "longexp/errors.h"

namespace longexp {
namespace {

float max_value(const Image& image) {
  float m = 0.0f;
  for (float v : image.data()) m = std::max(m, v);
  return m;
}

void divide_by_max(Image& image) {
  const float m = max_value(image);
  if (m <= 0.0f) return;
  for (float& v : image.data()) v /= m;
}

}  // namespace

void FaceRegion::validate() const {
  if (!(inner_radius > 0.0 && inner_radius < outer_radius)) {
    throw InputError("face region requires 0 < inner_radius < outer_radius");
  }
}

FaceRegion FaceRegion::converted(const LevelGeometry& from,
                                 const LevelGeometry& to) const {
  FaceRegion out = *this;
  out.center = convert_point(center, from, to);
  const double scale = static_cast<double>(from.factor) / to.factor;
  out.inner_radius = inner_radius * scale;
  out.outer_radius = outer_radius * scale;
  return out;
}

Image threshold_saliency(const Image& raw, double threshold) {
  Image s(raw.width(), raw.height(), 1);
  for (int y = 0; y < raw.height(); ++y) {
    for (int x = 0; x < raw.width(); ++x) {
      const float v = std::clamp(raw.at(x, y, 0), 0.0f, 1.0f);
      s.at(x, y) = v < threshold ? 0.0f : v;
    }
  }
  divide_by_max(s);
  return s;
}

Image gaussian_saliency_prior(int width, int height) {
  Image s(width, height, 1);
  const double sigma = 0.25 * std::hypot(width, height);
  const double cx = 0.5 * (width - 1);
  const double cy = 0.5 * (height - 1);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double r2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
      s.at(x, y) = static_cast<float>(std::exp(-r2 / (2.0 * sigma * sigma)));
    }
  }
  divide_by_max(s);
  return s;
}

Image load_or_synthesize_saliency(
    int width, int height, const std::optional<std::filesystem::path>& path,
    double threshold) {
  if (!path) return threshold_saliency(gaussian_saliency_prior(width, height), threshold);
  Image raw = read_png_gray(*path);
  if (raw.width() != width || raw.height() != height) {
    throw InputError("saliency map " + path->string() +
                     " does not match low-resolution frame size");
  }
  return threshold_saliency(raw, threshold);
}

double smootherstep(double t) {
  t = std::clamp(t, 0.0, 1.0);
  return t * t * t * (t * (6.0 * t - 15.0) + 10.0);
}

double face_falloff(const FaceRegion& region, double r) {
  if (r <= region.inner_radius) return 1.0;
  if (r >= region.outer_radius) return 0.0;
  const double t = (r - region.inner_radius) /
                   (region.outer_radius - region.inner_radius);
  return 1.0 - smootherstep(t);
}

Image face_signal(const std::vector<FaceRegion>& regions, int width,
                  int height, const Image* segmentation) {
  Image f(width, height, 1);
  if (segmentation && (segmentation->width() != width ||
                       segmentation->height() != height)) {
    throw InputError("segmentation mask does not match face map size");
  }
  for (const FaceRegion& region : regions) {
    region.validate();
    const int x0 = std::max(0, static_cast<int>(std::floor(region.center.x - region.outer_radius)));
    const int x1 = std::min(width - 1, static_cast<int>(std::ceil(region.center.x + region.outer_radius)));
    const int y0 = std::max(0, static_cast<int>(std::floor(region.center.y - region.outer_radius)));
    const int y1 = std::min(height - 1, static_cast<int>(std::ceil(region.center.y + region.outer_radius)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double r = std::hypot(x - region.center.x, y - region.center.y);
        f.at(x, y) = std::max(f.at(x, y),
                              static_cast<float>(face_falloff(region, r)));
      }
    }
  }
  if (segmentation) {
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        f.at(x, y) *= std::clamp(segmentation->at(x, y, 0), 0.0f, 1.0f);
      }
    }
  }
  return f;
}

Image combine_subject_weights(const Image& s, const Image& f) {
  if (s.width() != f.width() || s.height() != f.height()) {
    throw InputError("saliency and face maps differ in size");
  }
  Image w(s.width(), s.height(), 1);
  for (int y = 0; y < s.height(); ++y) {
    for (int x = 0; x < s.width(); ++x) {
      w.at(x, y) = s.at(x, y) * (1.0f + f.at(x, y));
    }
  }
  divide_by_max(w);
  return w;
}

SubjectWeightMap build_subject_map(const Image& saliency,
                                   const std::vector<FaceRegion>& regions,
                                   const Image* segmentation) {
  SubjectWeightMap map;
  map.saliency = saliency;
  map.face = face_signal(regions, saliency.width(), saliency.height(),
                         segmentation);
  map.weight = combine_subject_weights(map.saliency, map.face);
  return map;
}

}  // namespace longexp
