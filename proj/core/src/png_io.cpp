// Copyright Contributors to the evdemosaic project.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>
#include <string>

#include <png.h>

#include "evd/error.hpp"
#include "evd/image.hpp"

namespace evd {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw DataError("cannot open '" + path.string() + "'");
  return f;
}

struct Decoded {
  std::size_t width = 0, height = 0, channels = 0;
  int bit_depth = 8;
  std::vector<std::uint16_t> samples;  // interleaved, raw sample values
};

Decoded decode(const std::filesystem::path& path) {
  auto file = open_file(path, "rb");
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw DataError("'" + path.string() + "' is not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("libpng initialization failed");
  }
  Decoded out;
  std::vector<png_bytep> rows;
  std::vector<unsigned char> buffer;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("corrupt PNG '" + path.string() + "'");
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (depth == 16) png_set_swap(png);
  png_read_update_info(png, info);

  out.width = png_get_image_width(png, info);
  out.height = png_get_image_height(png, info);
  out.channels = png_get_channels(png, info);
  out.bit_depth = png_get_bit_depth(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  buffer.resize(rowbytes * out.height);
  rows.resize(out.height);
  for (std::size_t y = 0; y < out.height; ++y) rows[y] = buffer.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  const std::size_t n = out.width * out.height * out.channels;
  out.samples.resize(n);
  if (out.bit_depth == 16) {
    for (std::size_t i = 0; i < n; ++i) {
      out.samples[i] = static_cast<std::uint16_t>(buffer[2 * i] | (buffer[2 * i + 1] << 8));
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) out.samples[i] = buffer[i];
  }
  return out;
}

void encode(const std::filesystem::path& path, std::size_t width, std::size_t height, int color_type,
            int bit_depth, const std::vector<unsigned char>& buffer, std::size_t rowbytes) {
  auto file = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw DataError("libpng initialization failed");
  }
  std::vector<png_const_bytep> rows(height);
  for (std::size_t y = 0; y < height; ++y) rows[y] = buffer.data() + y * rowbytes;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("failed writing PNG '" + path.string() + "'");
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth,
               color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (bit_depth == 16) png_set_swap(png);
  png_write_rows(png, const_cast<png_bytepp>(rows.data()), static_cast<png_uint_32>(height));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

RgbImage read_png(const std::filesystem::path& path) {
  const auto d = decode(path);
  const double maxv = d.bit_depth == 16 ? 65535.0 : 255.0;
  RgbImage img(d.width, d.height);
  const bool gray = d.channels <= 2;
  for (std::size_t p = 0; p < d.width * d.height; ++p) {
    for (std::size_t c = 0; c < 3; ++c) {
      const std::size_t src = p * d.channels + (gray ? 0 : c);
      img.data[p * 3 + c] = d.samples[src] / maxv;
    }
  }
  return img;
}

void write_png(const std::filesystem::path& path, const RgbImage& image, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) throw ParameterError("PNG bit depth must be 8 or 16");
  const double maxv = bit_depth == 16 ? 65535.0 : 255.0;
  const std::size_t bytes = bit_depth / 8;
  const std::size_t rowbytes = image.width * 3 * bytes;
  std::vector<unsigned char> buffer(rowbytes * image.height);
  for (std::size_t i = 0; i < image.data.size(); ++i) {
    const double v = std::clamp(image.data[i], 0.0, 1.0);
    const auto q = static_cast<std::uint16_t>(std::lround(v * maxv));
    if (bytes == 2) {
      buffer[2 * i] = static_cast<unsigned char>(q & 0xFF);
      buffer[2 * i + 1] = static_cast<unsigned char>(q >> 8);
    } else {
      buffer[i] = static_cast<unsigned char>(q);
    }
  }
  encode(path, image.width, image.height, PNG_COLOR_TYPE_RGB, bit_depth, buffer, rowbytes);
}

GrayImage8 read_png_gray8(const std::filesystem::path& path) {
  const auto d = decode(path);
  if (d.bit_depth != 8) throw DataError("'" + path.string() + "' is not an 8-bit PNG");
  GrayImage8 img{d.width, d.height, std::vector<std::uint8_t>(d.width * d.height)};
  for (std::size_t p = 0; p < img.data.size(); ++p) {
    img.data[p] = static_cast<std::uint8_t>(d.samples[p * d.channels]);
  }
  return img;
}

void write_png_gray8(const std::filesystem::path& path, const GrayImage8& image) {
  std::vector<unsigned char> buffer(image.data.begin(), image.data.end());
  encode(path, image.width, image.height, PNG_COLOR_TYPE_GRAY, 8, buffer, image.width);
}

}  // namespace evd
