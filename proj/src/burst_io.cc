#include "longexp/burst_io.h"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

#include "json.hpp"
#include "longexp/errors.h"

namespace longexp {
namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(BlurMode mode) {
  return mode == BlurMode::kForeground ? "foreground_blur" : "background_blur";
}

BlurMode blur_mode_from_string(const std::string& s) {
  if (s == "foreground_blur" || s == "foreground") return BlurMode::kForeground;
  if (s == "background_blur" || s == "background") return BlurMode::kBackground;
  throw InputError("unknown blur mode '" + s + "'");
}

namespace {

std::string encoding_name(InputEncoding e) {
  switch (e) {
    case InputEncoding::kAuto: return "auto";
    case InputEncoding::kSrgb: return "srgb";
    case InputEncoding::kLinear: return "linear";
  }
  return "auto";
}

InputEncoding encoding_from_string(const std::string& s) {
  if (s == "auto") return InputEncoding::kAuto;
  if (s == "srgb") return InputEncoding::kSrgb;
  if (s == "linear") return InputEncoding::kLinear;
  throw InputError("unknown input_encoding '" + s + "'");
}

struct FileCloser {
  void operator()(std::FILE* f) const { if (f) std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const fs::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw InputError("cannot open " + path.string());
  return f;
}

void write_png(const fs::path& path, int width, int height, int channels,
               const std::vector<std::uint8_t>& bytes) {
  FilePtr file = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                            nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw InputError("failed writing " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, width, height, 8,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(bytes.data() +
                                             static_cast<std::size_t>(y) * width * channels));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

std::uint8_t quantize(float v) {
  return static_cast<std::uint8_t>(
      std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

}  // namespace

void BurstManifest::validate() const {
  if (frame_paths.size() < 2) {
    throw InputError("manifest needs at least 2 frames");
  }
  if (base_index < 0 || base_index >= static_cast<int>(frame_paths.size())) {
    throw InputError("base_index " + std::to_string(base_index) +
                     " out of range");
  }
  if (!(frame_rate_hz > 0.0)) throw InputError("frame_rate_hz must be > 0");
  for (const FaceRegion& face : faces) face.validate();
}

BurstManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open manifest " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InputError("malformed manifest " + path.string() + ": " + e.what());
  }
  const fs::path dir = path.parent_path();
  auto resolve = [&](const std::string& p) {
    fs::path candidate(p);
    return candidate.is_absolute() ? candidate : dir / candidate;
  };
  BurstManifest m;
  try {
    for (const auto& p : j.at("frames")) m.frame_paths.push_back(resolve(p));
    m.mode = blur_mode_from_string(j.value("mode", "foreground_blur"));
    const int default_base =
        m.mode == BlurMode::kBackground
            ? static_cast<int>(m.frame_paths.size()) - 1
            : 0;
    m.base_index = j.value("base_index", default_base);
    m.frame_rate_hz = j.value("frame_rate_hz", 30.0);
    m.encoding = encoding_from_string(j.value("input_encoding", "auto"));
    if (j.contains("saliency_map")) m.saliency_map = resolve(j["saliency_map"]);
    if (j.contains("segmentation_mask")) {
      m.segmentation_mask = resolve(j["segmentation_mask"]);
    }
    if (j.contains("flow_dir")) m.flow_dir = resolve(j["flow_dir"]);
    for (const auto& f : j.value("faces", json::array())) {
      FaceRegion r;
      r.center = {f.at("center").at(0).get<double>(),
                  f.at("center").at(1).get<double>()};
      r.inner_radius = f.at("inner_radius");
      r.outer_radius = f.at("outer_radius");
      m.faces.push_back(r);
    }
  } catch (const json::exception& e) {
    throw InputError("invalid manifest " + path.string() + ": " + e.what());
  }
  m.validate();
  return m;
}

void save_manifest(const BurstManifest& m, const fs::path& path) {
  const fs::path dir = path.parent_path();
  auto rel = [&](const fs::path& p) {
    // Relative entries are already relative to the manifest directory.
    if (dir.empty() || p.is_relative()) return p.generic_string();
    return fs::relative(p, fs::absolute(dir)).generic_string();
  };
  json j;
  j["frames"] = json::array();
  for (const auto& p : m.frame_paths) j["frames"].push_back(rel(p));
  j["base_index"] = m.base_index;
  j["frame_rate_hz"] = m.frame_rate_hz;
  j["mode"] = to_string(m.mode);
  j["input_encoding"] = encoding_name(m.encoding);
  if (m.saliency_map) j["saliency_map"] = rel(*m.saliency_map);
  if (m.segmentation_mask) j["segmentation_mask"] = rel(*m.segmentation_mask);
  if (m.flow_dir) j["flow_dir"] = rel(*m.flow_dir);
  j["faces"] = json::array();
  for (const FaceRegion& r : m.faces) {
    j["faces"].push_back({{"center", {r.center.x, r.center.y}},
                          {"inner_radius", r.inner_radius},
                          {"outer_radius", r.outer_radius}});
  }
  std::ofstream out(path);
  if (!out) throw InputError("cannot write manifest " + path.string());
  out << j.dump(2) << "\n";
}

float srgb_to_linear(float v) {
  v = std::clamp(v, 0.0f, 1.0f);
  return v <= 0.04045f ? v / 12.92f
                       : std::pow((v + 0.055f) / 1.055f, 2.4f);
}

float linear_to_srgb(float v) {
  v = std::clamp(v, 0.0f, 1.0f);
  return v <= 0.0031308f ? v * 12.92f
                         : 1.055f * std::pow(v, 1.0f / 2.4f) - 0.055f;
}

double soft_gamma(double v, double k) {
  v = std::clamp(v, 0.0, 1.0);
  const double denom = v + (1.0 - v) * k;
  return denom > 0.0 ? v / denom : 0.0;
}

Image apply_soft_gamma(const Image& image, double k) {
  Image out = image;
  for (float& v : out.data()) v = static_cast<float>(soft_gamma(v, k));
  return out;
}

std::vector<Frame> load_burst(const BurstManifest& manifest, int workers) {
  manifest.validate();
  const int n = static_cast<int>(manifest.frame_paths.size());
  for (const auto& p : manifest.frame_paths) {
    if (!fs::exists(p)) throw InputError("missing frame " + p.string());
  }
  std::vector<Frame> frames(n);
  std::vector<std::string> errors(n);
  parallel_rows(n, workers, [&](int i) {
    try {
      DecodedPng png = read_png(manifest.frame_paths[i]);
      const bool linear =
          manifest.encoding == InputEncoding::kLinear ||
          (manifest.encoding == InputEncoding::kAuto && png.bit_depth == 16);
      Image rgb(png.pixels.width(), png.pixels.height(), 3);
      for (int y = 0; y < rgb.height(); ++y) {
        for (int x = 0; x < rgb.width(); ++x) {
          for (int c = 0; c < 3; ++c) {
            const float v = png.pixels.at(x, y, png.pixels.channels() == 1 ? 0 : c);
            rgb.at(x, y, c) = linear ? v : srgb_to_linear(v);
          }
        }
      }
      frames[i].pixels = std::move(rgb);
      frames[i].level = Level::kFull;
      frames[i].index = i;
      frames[i].timestamp_s = i / manifest.frame_rate_hz;
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  for (const auto& e : errors) {
    if (!e.empty()) throw InputError(e);
  }
  for (const Frame& f : frames) {
    if (f.width() != frames[0].width() || f.height() != frames[0].height()) {
      throw InputError("frame dimensions differ within the burst");
    }
  }
  return frames;
}

Image downsample(const Image& image, int factor) {
  if (factor <= 1) return image;
  const int w = (image.width() + factor - 1) / factor;
  const int h = (image.height() + factor - 1) / factor;
  Image out(w, h, image.channels());
  const double inv = 1.0 / (factor * factor);
  std::vector<double> acc(image.channels());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (int dy = 0; dy < factor; ++dy) {
        for (int dx = 0; dx < factor; ++dx) {
          for (int c = 0; c < image.channels(); ++c) {
            acc[c] += image.clamped(x * factor + dx, y * factor + dy, c);
          }
        }
      }
      for (int c = 0; c < image.channels(); ++c) {
        out.at(x, y, c) = static_cast<float>(acc[c] * inv);
      }
    }
  }
  return out;
}

Frame downsample(const Frame& frame, int factor) {
  Frame out = frame;
  out.pixels = downsample(frame.pixels, factor);
  const int level = level_factor(frame.level) * factor;
  out.level = level == 2 ? Level::kHalf : level == 8 ? Level::kLow : frame.level;
  return out;
}

DecodedPng read_png(const fs::path& path) {
  FilePtr file = open_file(path, "rb");
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8)) {
    throw InputError("not a PNG file: " + path.string());
  }
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw InputError("undecodable PNG: " + path.string());
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const int width = static_cast<int>(png_get_image_width(png, info));
  const int height = static_cast<int>(png_get_image_height(png, info));
  const int depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (depth == 16 && std::endian::native == std::endian::little) {
    png_set_swap(png);
  }
  png_read_update_info(png, info);
  const int channels = png_get_channels(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  std::vector<unsigned char> buffer(rowbytes * height);
  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y) rows[y] = buffer.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);

  DecodedPng out;
  out.bit_depth = depth == 16 ? 16 : 8;
  out.pixels = Image(width, height, channels);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < channels; ++c) {
        const std::size_t i = static_cast<std::size_t>(x) * channels + c;
        float v;
        if (out.bit_depth == 16) {
          std::uint16_t s;
          std::memcpy(&s, rows[y] + 2 * i, 2);
          v = s / 65535.0f;
        } else {
          v = rows[y][i] / 255.0f;
        }
        out.pixels.at(x, y, c) = v;
      }
    }
  }
  return out;
}

void write_png_srgb(const fs::path& path, const Image& linear) {
  const int channels = linear.channels() == 1 ? 1 : 3;
  std::vector<std::uint8_t> bytes(linear.pixel_count() * channels);
  std::size_t k = 0;
  for (int y = 0; y < linear.height(); ++y) {
    for (int x = 0; x < linear.width(); ++x) {
      for (int c = 0; c < channels; ++c) {
        bytes[k++] = quantize(linear_to_srgb(linear.at(x, y, c)));
      }
    }
  }
  write_png(path, linear.width(), linear.height(), channels, bytes);
}

void write_png_gray(const fs::path& path, const Image& values) {
  std::vector<std::uint8_t> bytes(values.pixel_count());
  std::size_t k = 0;
  for (int y = 0; y < values.height(); ++y) {
    for (int x = 0; x < values.width(); ++x) {
      bytes[k++] = quantize(values.at(x, y, 0));
    }
  }
  write_png(path, values.width(), values.height(), 1, bytes);
}

Image read_png_gray(const fs::path& path) {
  if (!fs::exists(path)) throw InputError("missing map " + path.string());
  DecodedPng png = read_png(path);
  Image out(png.pixels.width(), png.pixels.height(), 1);
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) out.at(x, y) = png.pixels.at(x, y, 0);
  }
  return out;
}

void write_raw_float(const fs::path& path, const Image& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << "RAWF " << image.width() << " " << image.height() << " "
      << image.channels() << "\n";
  for (int c = 0; c < image.channels(); ++c) {
    for (int y = 0; y < image.height(); ++y) {
      for (int x = 0; x < image.width(); ++x) {
        std::uint32_t bits = std::bit_cast<std::uint32_t>(image.at(x, y, c));
        unsigned char le[4] = {
            static_cast<unsigned char>(bits), static_cast<unsigned char>(bits >> 8),
            static_cast<unsigned char>(bits >> 16), static_cast<unsigned char>(bits >> 24)};
        out.write(reinterpret_cast<const char*>(le), 4);
      }
    }
  }
  if (!out) throw InputError("failed writing " + path.string());
}

Image read_raw_float(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::string header;
  std::getline(in, header);
  std::istringstream hs(header);
  std::string magic;
  int w = 0, h = 0, c = 0;
  if (!(hs >> magic >> w >> h >> c) || magic != "RAWF" || w <= 0 || h <= 0 ||
      c <= 0) {
    throw InputError("bad raw float header in " + path.string());
  }
  Image image(w, h, c);
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        unsigned char le[4];
        if (!in.read(reinterpret_cast<char*>(le), 4)) {
          throw InputError("truncated raw float file " + path.string());
        }
        const std::uint32_t bits = le[0] | (le[1] << 8) | (le[2] << 16) |
                                   (static_cast<std::uint32_t>(le[3]) << 24);
        image.at(x, y, ch) = std::bit_cast<float>(bits);
      }
    }
  }
  return image;
}

}  // namespace longexp
