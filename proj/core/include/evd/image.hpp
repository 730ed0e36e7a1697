// Copyright Contributors to the evdemosaic project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace evd {

/// Three-channel image, interleaved row-major (y, x, c), values nominally in [0,1].
struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> data;

  RgbImage() = default;
  RgbImage(std::size_t w, std::size_t h, double fill = 0.0) : width(w), height(h), data(w * h * 3, fill) {}

  double& at(std::size_t y, std::size_t x, std::size_t c) { return data[(y * width + x) * 3 + c]; }
  double at(std::size_t y, std::size_t x, std::size_t c) const { return data[(y * width + x) * 3 + c]; }

  void clamp();
  bool operator==(const RgbImage&) const = default;
};

/// Single-channel 8-bit image (difference maps).
struct GrayImage8 {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> data;

  bool operator==(const GrayImage8&) const = default;
};

/// Reads 8- or 16-bit gray, gray+alpha, RGB or RGBA PNG. Alpha is dropped,
/// gray is replicated into the three channels.
RgbImage read_png(const std::filesystem::path& path);
/// `bit_depth` is 8 or 16. Values are clamped to [0,1] before quantizing.
void write_png(const std::filesystem::path& path, const RgbImage& image, int bit_depth = 8);

GrayImage8 read_png_gray8(const std::filesystem::path& path);
void write_png_gray8(const std::filesystem::path& path, const GrayImage8& image);

}  // namespace evd
