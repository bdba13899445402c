#include "longexp/image.h"

#include <algorithm>
#include <stdexcept>
#include <thread>

namespace longexp {

Image::Image(int width, int height, int channels, float fill)
    : width_(width), height_(height), channels_(channels) {
  if (width < 0 || height < 0 || channels <= 0) {
    throw std::invalid_argument("Image: invalid dimensions");
  }
  data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

float Image::clamped(int x, int y, int c) const {
  x = std::clamp(x, 0, width_ - 1);
  y = std::clamp(y, 0, height_ - 1);
  return at(x, y, c);
}

float Image::sample(double x, double y, int c) const {
  x = std::clamp(x, 0.0, static_cast<double>(width_ - 1));
  y = std::clamp(y, 0.0, static_cast<double>(height_ - 1));
  const int x0 = static_cast<int>(x);
  const int y0 = static_cast<int>(y);
  const int x1 = std::min(x0 + 1, width_ - 1);
  const int y1 = std::min(y0 + 1, height_ - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const double top = at(x0, y0, c) + fx * (at(x1, y0, c) - at(x0, y0, c));
  const double bot = at(x0, y1, c) + fx * (at(x1, y1, c) - at(x0, y1, c));
  return static_cast<float>(top + fy * (bot - top));
}

Vec2 Image::sample_vec2(double x, double y) const {
  return {sample(x, y, 0), sample(x, y, 1)};
}

Image luminance(const Image& rgb) {
  if (rgb.channels() == 1) return rgb;
  Image out(rgb.width(), rgb.height(), 1);
  for (int y = 0; y < rgb.height(); ++y) {
    for (int x = 0; x < rgb.width(); ++x) {
      out.at(x, y) = 0.2126f * rgb.at(x, y, 0) + 0.7152f * rgb.at(x, y, 1) +
                     0.0722f * rgb.at(x, y, 2);
    }
  }
  return out;
}

Image resample(const Image& src, int width, int height, double value_scale) {
  Image out(width, height, src.channels());
  const double sx = static_cast<double>(src.width()) / width;
  const double sy = static_cast<double>(src.height()) / height;
  for (int y = 0; y < height; ++y) {
    const double v = (y + 0.5) * sy - 0.5;
    for (int x = 0; x < width; ++x) {
      const double u = (x + 0.5) * sx - 0.5;
      for (int c = 0; c < src.channels(); ++c) {
        out.at(x, y, c) =
            static_cast<float>(src.sample(u, v, c) * value_scale);
      }
    }
  }
  return out;
}

Vec2 convert_point(const Vec2& p, const LevelGeometry& from,
                   const LevelGeometry& to) {
  return {to.from_full(from.to_full(p.x)), to.from_full(from.to_full(p.y))};
}

void parallel_rows(int rows, int workers, const std::function<void(int)>& fn) {
  workers = std::clamp(workers, 1, std::max(1, rows));
  if (workers == 1) {
    for (int r = 0; r < rows; ++r) fn(r);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (int r = w; r < rows; r += workers) fn(r);
    });
  }
}

}  // namespace longexp
