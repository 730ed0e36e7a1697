// Copyright Contributors to the evdemosaic project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "evd/image.hpp"
#include "evd/tensor.hpp"

namespace evd {

enum class PixelClass : std::uint8_t { Red, Green, Blue, Event, Inactive };

char to_char(PixelClass c) noexcept;

/// Repeating color-filter tile. Cells are row-major, tile_h x tile_w.
struct CfaPattern {
  std::size_t tile_h = 0;
  std::size_t tile_w = 0;
  std::vector<PixelClass> cells;
  std::string id;

  PixelClass cell(std::size_t ty, std::size_t tx) const { return cells[ty * tile_w + tx]; }
  /// Class of absolute pixel (y, x).
  PixelClass at(std::size_t y, std::size_t x) const { return cell(y % tile_h, x % tile_w); }
  std::size_t count(PixelClass c) const;
  /// Tile written as rows of R/G/B/E/X letters separated by '/'.
  std::string layout() const;
};

/// 4x4 Quad-Bayer tile (R quad top-left, G quads off-diagonal, B quad
/// bottom-right) with event pixels at (1,1) and (3,3).
CfaPattern make_hybridevs_pattern();

/// Resolves a pattern id: "hybridevs", "hybridevs-caption", "quad-bayer", or
/// an inline layout such as "RRGG/REGG/GGBB/GGBE". Throws ParameterError.
CfaPattern pattern_from_id(std::string_view id);

inline constexpr std::uint16_t kHoleSentinel = 0xFFFF;
inline constexpr std::uint16_t kDefaultWhiteLevel = 1023;

struct RawImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint16_t> samples;
  std::string pattern_id;
  std::uint16_t white_level = kDefaultWhiteLevel;

  std::uint16_t at(std::size_t y, std::size_t x) const { return samples[y * width + x]; }
  bool operator==(const RawImage&) const = default;
};

/// Samples an RGB image through `pattern`: each color pixel gets
/// round(channel * white_level), event pixels get the sentinel, inactive 0.
RawImage mosaic(const RgbImage& rgb, const CfaPattern& pattern,
                std::uint16_t white_level = kDefaultWhiteLevel);

/// H x W x C -> (H/s) x (W/s) x (C s^2); output channel c*s^2 + dy*s + dx.
Tensor space_to_depth(const Tensor& x, std::size_t s);
/// Exact inverse of space_to_depth.
Tensor depth_to_space(const Tensor& x, std::size_t s);

/// Hole-aware classical baseline: every missing channel (including at event
/// pixels) is the inverse-distance weighted mean of same-class samples in the
/// edge-clamped 5x5 neighbourhood; global channel mean when none exist.
RgbImage bilinear_demosaic(const RawImage& raw);

struct RawTensor {
  Tensor values;                    // H x W x 1, in [0,1], holes at 0
  std::vector<std::uint8_t> holes;  // H x W, 1 at sentinel positions
};

RawTensor raw_to_tensor(const RawImage& raw);

Tensor rgb_to_tensor(const RgbImage& rgb);
RgbImage tensor_to_rgb(const Tensor& t);

// .hevs container: "HEVS", version 0x01, id length byte + ASCII id, two zero
// bytes, u32 width, u32 height, u16 white level, then width*height u16
// samples row-major. All integers little-endian.

inline constexpr std::uint8_t kHevsVersion = 0x01;

std::size_t hevs_header_size(std::size_t pattern_id_length) noexcept;
std::vector<std::uint8_t> encode_hevs(const RawImage& raw);
RawImage decode_hevs(std::span<const std::uint8_t> bytes);
void write_hevs(const RawImage& raw, const std::filesystem::path& path);
RawImage read_hevs(const std::filesystem::path& path);

}  // namespace evd
