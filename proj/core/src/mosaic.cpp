// Copyright Contributors to the evdemosaic project.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <array>
#include <cmath>

#include "evd/error.hpp"
#include "evd/mosaic.hpp"

namespace evd {

namespace {

PixelClass from_char(char ch) {
  switch (ch) {
    case 'R': return PixelClass::Red;
    case 'G': return PixelClass::Green;
    case 'B': return PixelClass::Blue;
    case 'E': return PixelClass::Event;
    case 'X': return PixelClass::Inactive;
    default: throw ParameterError(std::string("unknown CFA cell letter '") + ch + "'");
  }
}

CfaPattern parse_layout(std::string_view layout, std::string id) {
  CfaPattern p;
  p.id = std::move(id);
  std::size_t row_len = 0;
  for (char ch : layout) {
    if (ch == '/') {
      if (p.tile_w == 0) p.tile_w = row_len;
      if (row_len != p.tile_w || row_len == 0) {
        throw ParameterError("CFA layout '" + std::string(layout) + "' has ragged rows");
      }
      ++p.tile_h;
      row_len = 0;
      continue;
    }
    p.cells.push_back(from_char(ch));
    ++row_len;
  }
  if (p.tile_w == 0) p.tile_w = row_len;
  if (row_len != p.tile_w || row_len == 0) {
    throw ParameterError("CFA layout '" + std::string(layout) + "' has ragged rows");
  }
  ++p.tile_h;
  return p;
}

int channel_of(PixelClass c) {
  switch (c) {
    case PixelClass::Red: return 0;
    case PixelClass::Green: return 1;
    case PixelClass::Blue: return 2;
    default: return -1;
  }
}

}  // namespace

char to_char(PixelClass c) noexcept {
  switch (c) {
    case PixelClass::Red: return 'R';
    case PixelClass::Green: return 'G';
    case PixelClass::Blue: return 'B';
    case PixelClass::Event: return 'E';
    case PixelClass::Inactive: return 'X';
  }
  return '?';
}

std::size_t CfaPattern::count(PixelClass c) const {
  return static_cast<std::size_t>(std::count(cells.begin(), cells.end(), c));
}

std::string CfaPattern::layout() const {
  std::string s;
  for (std::size_t y = 0; y < tile_h; ++y) {
    if (y) s += '/';
    for (std::size_t x = 0; x < tile_w; ++x) s += to_char(cell(y, x));
  }
  return s;
}

CfaPattern make_hybridevs_pattern() { return parse_layout("RRGG/REGG/GGBB/GGBE", "hybridevs"); }

CfaPattern pattern_from_id(std::string_view id) {
  if (id == "hybridevs") return make_hybridevs_pattern();
  // Event pixels at the lower-right corner of the red quad and of the upper green quad.
  if (id == "hybridevs-caption") return parse_layout("RRGG/REGE/GGBB/GGBB", std::string(id));
  if (id == "quad-bayer") return parse_layout("RRGG/RRGG/GGBB/GGBB", std::string(id));
  if (id.empty()) throw ParameterError("empty CFA pattern id");
  return parse_layout(id, std::string(id));
}

RawImage mosaic(const RgbImage& rgb, const CfaPattern& pattern, std::uint16_t white_level) {
  if (rgb.width % pattern.tile_w != 0 || rgb.height % pattern.tile_h != 0) {
    throw DimensionError("image " + std::to_string(rgb.width) + "x" + std::to_string(rgb.height) +
                         " is not a multiple of the " + std::to_string(pattern.tile_w) + "x" +
                         std::to_string(pattern.tile_h) + " CFA tile");
  }
  if (white_level == kHoleSentinel) throw ParameterError("white level collides with the hole sentinel");
  RawImage raw;
  raw.width = rgb.width;
  raw.height = rgb.height;
  raw.pattern_id = pattern.id;
  raw.white_level = white_level;
  raw.samples.resize(rgb.width * rgb.height);
  for (std::size_t y = 0; y < rgb.height; ++y) {
    for (std::size_t x = 0; x < rgb.width; ++x) {
      const auto cls = pattern.at(y, x);
      std::uint16_t v = 0;
      if (cls == PixelClass::Event) {
        v = kHoleSentinel;
      } else if (const int c = channel_of(cls); c >= 0) {
        const double value = std::clamp(rgb.at(y, x, static_cast<std::size_t>(c)), 0.0, 1.0);
        v = static_cast<std::uint16_t>(std::lround(value * white_level));
      }
      raw.samples[y * rgb.width + x] = v;
    }
  }
  return raw;
}

Tensor space_to_depth(const Tensor& x, std::size_t s) {
  if (x.rank() != 3) throw ShapeError("space_to_depth expects H x W x C, got " + shape_string(x.shape()));
  if (s == 0) throw ParameterError("space_to_depth factor must be >= 1");
  const std::size_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
  if (h % s != 0 || w % s != 0) {
    throw DimensionError("space_to_depth: " + shape_string(x.shape()) + " not divisible by " +
                         std::to_string(s));
  }
  if (s == 1) return reshape(x, x.shape());
  auto t = reshape(x, {h / s, s, w / s, s, c});
  t = permute(t, {0, 2, 4, 1, 3});
  return reshape(t, {h / s, w / s, c * s * s});
}

Tensor depth_to_space(const Tensor& x, std::size_t s) {
  if (x.rank() != 3) throw ShapeError("depth_to_space expects H x W x C, got " + shape_string(x.shape()));
  if (s == 0) throw ParameterError("depth_to_space factor must be >= 1");
  const std::size_t h = x.dim(0), w = x.dim(1), cs = x.dim(2);
  if (cs % (s * s) != 0) {
    throw DimensionError("depth_to_space: " + std::to_string(cs) + " channels not divisible by " +
                         std::to_string(s * s));
  }
  if (s == 1) return reshape(x, x.shape());
  const std::size_t c = cs / (s * s);
  auto t = reshape(x, {h, w, c, s, s});
  t = permute(t, {0, 3, 1, 4, 2});
  return reshape(t, {h * s, w * s, c});
}

RgbImage bilinear_demosaic(const RawImage& raw) {
  const auto pattern = pattern_from_id(raw.pattern_id);
  const std::size_t w = raw.width, h = raw.height;
  const double scale = 1.0 / raw.white_level;

  std::array<double, 3> channel_sum{}, channel_n{};
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      if (const int c = channel_of(pattern.at(y, x)); c >= 0) {
        channel_sum[c] += raw.at(y, x) * scale;
        channel_n[c] += 1.0;
      }
    }
  }

  std::array<double, 25> weight{};
  for (int dy = -2; dy <= 2; ++dy) {
    for (int dx = -2; dx <= 2; ++dx) {
      weight[(dy + 2) * 5 + dx + 2] = (dy || dx) ? 1.0 / std::hypot(dy, dx) : 0.0;
    }
  }

  RgbImage out(w, h);
  const auto clamp_to = [](long v, std::size_t n) {
    return static_cast<std::size_t>(std::clamp<long>(v, 0, static_cast<long>(n) - 1));
  };
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const int own = channel_of(pattern.at(y, x));
      std::array<double, 3> acc{}, wsum{};
      for (int dy = -2; dy <= 2; ++dy) {
        const std::size_t yy = clamp_to(static_cast<long>(y) + dy, h);
        for (int dx = -2; dx <= 2; ++dx) {
          if (!dy && !dx) continue;
          const std::size_t xx = clamp_to(static_cast<long>(x) + dx, w);
          const int c = channel_of(pattern.at(yy, xx));
          if (c < 0) continue;
          const double wt = weight[(dy + 2) * 5 + dx + 2];
          acc[c] += wt * raw.at(yy, xx) * scale;
          wsum[c] += wt;
        }
      }
      for (int c = 0; c < 3; ++c) {
        double v;
        if (c == own) {
          v = raw.at(y, x) * scale;
        } else if (wsum[c] > 0.0) {
          v = acc[c] / wsum[c];
        } else {
          v = channel_n[c] > 0.0 ? channel_sum[c] / channel_n[c] : 0.0;
        }
        out.at(y, x, static_cast<std::size_t>(c)) = v;
      }
    }
  }
  return out;
}

RawTensor raw_to_tensor(const RawImage& raw) {
  RawTensor rt;
  std::vector<double> v(raw.samples.size());
  rt.holes.assign(raw.samples.size(), 0);
  const double scale = 1.0 / raw.white_level;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (raw.samples[i] == kHoleSentinel) {
      v[i] = 0.0;
      rt.holes[i] = 1;
    } else {
      v[i] = raw.samples[i] * scale;
    }
  }
  rt.values = Tensor({raw.height, raw.width, 1}, std::move(v));
  return rt;
}

Tensor rgb_to_tensor(const RgbImage& rgb) { return Tensor({rgb.height, rgb.width, 3}, rgb.data); }

RgbImage tensor_to_rgb(const Tensor& t) {
  if (t.rank() != 3 || t.dim(2) != 3) {
    throw ShapeError("expected H x W x 3 tensor, got " + shape_string(t.shape()));
  }
  RgbImage img(t.dim(1), t.dim(0));
  std::copy(t.values().begin(), t.values().end(), img.data.begin());
  return img;
}

}  // namespace evd
