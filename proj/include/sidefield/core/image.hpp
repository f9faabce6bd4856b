#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace sidefield {

/// Row-major H x W x C image of doubles.
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> data;

  Image() = default;
  Image(int h, int w, int c, double fill = 0.0)
      : height(h), width(w), channels(c), data(static_cast<std::size_t>(h) * w * c, fill) {}

  double& at(int y, int x, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  double at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::size_t pixel_count() const { return static_cast<std::size_t>(height) * width; }
  bool same_shape(const Image& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
};

/// Rounds every value to the nearest multiple of 1/255 after clamping to [0,1].
void quantize_8bit(Image& img);

/// 8-bit PNG, 1 or 3 channels, values clamped to [0,1].
void write_png(const std::filesystem::path& path, const Image& img);
Image read_png(const std::filesystem::path& path);
Image decode_png(std::string_view bytes);
std::vector<std::uint8_t> encode_png(const Image& img);

/// Lossless binary dump: "SFIMG001", int32 h, w, c, then h*w*c little-endian doubles.
void write_float_image(const std::filesystem::path& path, const Image& img);
Image read_float_image(const std::filesystem::path& path);

}  // namespace sidefield
