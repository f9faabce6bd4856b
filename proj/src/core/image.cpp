#include "sidefield/core/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

#include <png.h>

#include "sidefield/core/error.hpp"
#include "sidefield/core/io.hpp"

namespace sidefield {

namespace {

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

int color_type_for(int channels) {
  switch (channels) {
    case 1: return PNG_COLOR_TYPE_GRAY;
    case 3: return PNG_COLOR_TYPE_RGB;
    default: throw ContractViolation("PNG export supports 1 or 3 channels");
  }
}

void append_bytes(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

void flush_noop(png_structp) {}

}  // namespace

void quantize_8bit(Image& img) {
  for (double& v : img.data) v = static_cast<double>(to_byte(v)) / 255.0;
}

std::vector<std::uint8_t> encode_png(const Image& img) {
  const int color_type = color_type_for(img.channels);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  std::vector<std::uint8_t> bytes;
  std::vector<std::uint8_t> row(static_cast<std::size_t>(img.width) * img.channels);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw ContractViolation("PNG encoding failed");
  }
  png_set_write_fn(png, &bytes, append_bytes, flush_noop);
  png_set_IHDR(png, info, img.width, img.height, 8, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  // Fixed compression settings keep the output byte-stable.
  png_set_compression_level(png, 6);
  png_write_info(png, info);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c)
        row[static_cast<std::size_t>(x) * img.channels + c] = to_byte(img.at(y, x, c));
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return bytes;
}

void write_png(const std::filesystem::path& path, const Image& img) {
  const auto bytes = encode_png(img);
  io::write_file_atomic(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

namespace {

Image read_png_stream(FILE* fp, const std::string& what) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ContractViolation("PNG decoding failed: " + what);
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  png_read_update_info(png, info);
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  const int channels = png_get_channels(png, info);
  Image img(h, w, channels);
  std::vector<std::uint8_t> row(png_get_rowbytes(png, info));
  for (int y = 0; y < h; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < channels; ++c)
        img.at(y, x, c) = row[static_cast<std::size_t>(x) * channels + c] / 255.0;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

}  // namespace

Image read_png(const std::filesystem::path& path) {
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "rb"), &std::fclose);
  if (!fp) throw ContractViolation("cannot open PNG: " + path.string());
  return read_png_stream(fp.get(), path.string());
}

Image decode_png(std::string_view bytes) {
  if (bytes.empty()) throw ContractViolation("PNG decoding failed: empty buffer");
  std::unique_ptr<FILE, int (*)(FILE*)> fp(fmemopen(const_cast<char*>(bytes.data()), bytes.size(), "rb"), &std::fclose);
  if (!fp) throw ContractViolation("PNG decoding failed: cannot open buffer");
  return read_png_stream(fp.get(), "in-memory buffer");
}

void write_float_image(const std::filesystem::path& path, const Image& img) {
  std::string buf = "SFIMG001";
  const std::int32_t dims[3] = {img.height, img.width, img.channels};
  buf.append(reinterpret_cast<const char*>(dims), sizeof(dims));
  buf.append(reinterpret_cast<const char*>(img.data.data()), img.data.size() * sizeof(double));
  io::write_file_atomic(path, buf);
}

Image read_float_image(const std::filesystem::path& path) {
  const std::string buf = io::read_file(path);
  if (buf.size() < 20 || buf.compare(0, 8, "SFIMG001") != 0)
    throw ContractViolation("not a float image dump: " + path.string());
  std::int32_t dims[3];
  std::memcpy(dims, buf.data() + 8, sizeof(dims));
  Image img(dims[0], dims[1], dims[2]);
  if (buf.size() != 20 + img.data.size() * sizeof(double))
    throw ContractViolation("truncated float image dump: " + path.string());
  std::memcpy(img.data.data(), buf.data() + 20, img.data.size() * sizeof(double));
  return img;
}

}  // namespace sidefield
