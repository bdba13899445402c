#ifndef LONGEXP_IMAGE_H_
#define LONGEXP_IMAGE_H_

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace longexp {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
  Vec2& operator-=(const Vec2& o) { x -= o.x; y -= o.y; return *this; }
  Vec2& operator*=(double s) { x *= s; y *= s; return *this; }
  friend Vec2 operator+(Vec2 a, const Vec2& b) { return a += b; }
  friend Vec2 operator-(Vec2 a, const Vec2& b) { return a -= b; }
  friend Vec2 operator-(const Vec2& a) { return {-a.x, -a.y}; }
  friend Vec2 operator*(Vec2 a, double s) { return a *= s; }
  friend Vec2 operator*(double s, Vec2 a) { return a *= s; }
  friend Vec2 operator/(const Vec2& a, double s) { return {a.x / s, a.y / s}; }
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

inline double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
inline double cross(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }
inline double norm(const Vec2& a) { return std::hypot(a.x, a.y); }

// Dense float image with interleaved channels. Row-major, (x, y) addressing.
class Image {
 public:
  Image() = default;
  Image(int width, int height, int channels, float fill = 0.0f);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  bool empty() const { return data_.empty(); }
  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width_) * height_;
  }

  float& at(int x, int y, int c = 0) {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  float at(int x, int y, int c = 0) const {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  // Edge-clamped integer access.
  float clamped(int x, int y, int c = 0) const;

  // Bilinear lookup at continuous pixel-center coordinates, clamped to edge.
  float sample(double x, double y, int c = 0) const;
  Vec2 sample_vec2(double x, double y) const;
  Vec2 vec2_at(int x, int y) const { return {at(x, y, 0), at(x, y, 1)}; }
  void set_vec2(int x, int y, const Vec2& v) {
    at(x, y, 0) = static_cast<float>(v.x);
    at(x, y, 1) = static_cast<float>(v.y);
  }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }

  bool same_shape(const Image& o) const {
    return width_ == o.width_ && height_ == o.height_ &&
           channels_ == o.channels_;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

// Rec. 709 luminance of a linear RGB image (1-channel images pass through).
Image luminance(const Image& rgb);

// Bilinear resize of a field to new dimensions using pixel-center alignment,
// multiplying every value by `value_scale` (flow fields change units).
Image resample(const Image& src, int width, int height,
               double value_scale = 1.0);

// Pyramid level geometry. A level downsampled by `factor` from full
// resolution has pixel i centered at full-res coordinate factor*i +
// (factor-1)/2.
struct LevelGeometry {
  int factor = 1;
  double to_full(double v) const { return factor * v + (factor - 1) * 0.5; }
  double from_full(double v) const {
    return (v - (factor - 1) * 0.5) / factor;
  }
};

Vec2 convert_point(const Vec2& p, const LevelGeometry& from,
                   const LevelGeometry& to);

// Runs fn(row) for every row in [0, rows), split across up to `workers`
// threads. Rows are independent so results do not depend on the split.
void parallel_rows(int rows, int workers, const std::function<void(int)>& fn);

}  // namespace longexp

#endif  // LONGEXP_IMAGE_H_
