#ifndef LONGEXP_BURST_IO_H_
#define LONGEXP_BURST_IO_H_

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "longexp/image.h"
#include "longexp/subject.h"

namespace longexp {

enum class BlurMode { kForeground, kBackground };

std::string to_string(BlurMode mode);
BlurMode blur_mode_from_string(const std::string& s);

enum class Level { kFull, kHalf, kLow };

// Downsampling factor of a pyramid level relative to full resolution.
constexpr int level_factor(Level level) {
  switch (level) {
    case Level::kFull: return 1;
    case Level::kHalf: return 2;
    case Level::kLow: return 8;
  }
  return 1;
}

inline LevelGeometry level_geometry(Level level) {
  return {level_factor(level)};
}

// How pixel codes in the input PNGs map to linear light.
enum class InputEncoding {
  kAuto,    // 8-bit files are sRGB, 16-bit files are linear
  kSrgb,
  kLinear,
};

struct BurstManifest {
  std::vector<std::filesystem::path> frame_paths;
  int base_index = 0;
  double frame_rate_hz = 30.0;
  BlurMode mode = BlurMode::kForeground;
  InputEncoding encoding = InputEncoding::kAuto;
  // Optional low-resolution grayscale maps.
  std::optional<std::filesystem::path> saliency_map;
  std::optional<std::filesystem::path> segmentation_mask;
  // Face regions in full-resolution pixel coordinates.
  std::vector<FaceRegion> faces;
  // Directory of precomputed kernel flows (pair_<k>.raw), low resolution.
  std::optional<std::filesystem::path> flow_dir;

  // Throws InputError when invariants are violated.
  void validate() const;
};

// Parses the JSON manifest; relative paths resolve against its directory.
BurstManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const BurstManifest& manifest,
                   const std::filesystem::path& path);

struct Frame {
  Image pixels;  // linear RGB, non-negative
  Level level = Level::kFull;
  int index = 0;
  double timestamp_s = 0.0;

  int width() const { return pixels.width(); }
  int height() const { return pixels.height(); }
};

std::vector<Frame> load_burst(const BurstManifest& manifest, int workers = 1);

// Box filter over factor x factor blocks; edges are replicated when the
// dimensions are not multiples of the factor.
Image downsample(const Image& image, int factor);
Frame downsample(const Frame& frame, int factor);

float srgb_to_linear(float v);
float linear_to_srgb(float v);

struct ColorParams {
  double soft_gamma_k = 3.0;
};

// v / (v + (1 - v) k) on [0, 1]; k and 1/k are mutual inverses.
double soft_gamma(double v, double k);
Image apply_soft_gamma(const Image& image, double k);

// Decoded PNG samples normalized to [0, 1] without any transfer function.
struct DecodedPng {
  Image pixels;
  int bit_depth = 8;
};
DecodedPng read_png(const std::filesystem::path& path);

// Writes linear RGB (or 1-channel) as 8-bit sRGB.
void write_png_srgb(const std::filesystem::path& path, const Image& linear);
// Writes values in [0, 1] as 8-bit grayscale without encoding (masks).
void write_png_gray(const std::filesystem::path& path, const Image& values);
// Reads a grayscale map (any PNG), returning its first channel in [0, 1].
Image read_png_gray(const std::filesystem::path& path);

// Raw float planar files: ASCII header "RAWF <width> <height> <channels>\n"
// followed by little-endian float32 samples, one full plane per channel.
void write_raw_float(const std::filesystem::path& path, const Image& image);
Image read_raw_float(const std::filesystem::path& path);

}  // namespace longexp

#endif  // LONGEXP_BURST_IO_H_
