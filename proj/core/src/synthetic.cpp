// Copyright Contributors to the evdemosaic project.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "evd/error.hpp"
#include "evd/synthetic.hpp"

namespace evd::synthetic {

namespace {

// Portable uniform double in [0,1): the distributions in <random> are not
// specified bit-for-bit across standard libraries.
double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * unit(rng); }

constexpr int kSubsamples = 4;

void require_size(std::size_t w, std::size_t h) {
  if (w == 0 || h == 0) throw ParameterError("synthetic image needs a nonzero size");
}

}  // namespace

RgbImage smooth_gradient(std::size_t width, std::size_t height, std::uint64_t seed) {
  require_size(width, height);
  std::mt19937_64 rng(seed ^ 0x736d6f6f7468ULL);
  RgbImage img(width, height);
  for (std::size_t c = 0; c < 3; ++c) {
    const double fx = uniform(rng, 0.2, 0.8), fy = uniform(rng, 0.2, 0.8);
    const double phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const double rx = uniform(rng, -0.15, 0.15), ry = uniform(rng, -0.15, 0.15);
    for (std::size_t y = 0; y < height; ++y) {
      const double v = static_cast<double>(y) / static_cast<double>(height);
      for (std::size_t x = 0; x < width; ++x) {
        const double u = static_cast<double>(x) / static_cast<double>(width);
        const double s = std::sin(2.0 * std::numbers::pi * (fx * u + fy * v) + phase);
        img.at(y, x, c) = std::clamp(0.5 + 0.25 * s + rx * (u - 0.5) + ry * (v - 0.5), 0.1, 0.9);
      }
    }
  }
  return img;
}

RgbImage edge_scene(std::size_t width, std::size_t height, std::uint64_t seed) {
  require_size(width, height);
  RgbImage img = smooth_gradient(width, height, seed);
  std::mt19937_64 rng(seed ^ 0x65646765ULL);
  const std::size_t shapes = 4 + static_cast<std::size_t>(rng() % 3);
  const double W = static_cast<double>(width), H = static_cast<double>(height);
  for (std::size_t k = 0; k < shapes; ++k) {
    const double color[3] = {uniform(rng, 0.05, 0.95), uniform(rng, 0.05, 0.95), uniform(rng, 0.05, 0.95)};
    const bool disc = (rng() & 1) != 0;
    const double cx = uniform(rng, 0.1, 0.9) * W, cy = uniform(rng, 0.1, 0.9) * H;
    const double rx = uniform(rng, 0.08, 0.25) * W, ry = uniform(rng, 0.08, 0.25) * H;
    // Coverage from 4x4 subsamples: edges arrive band-limited, as behind a lens.
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) {
        int covered = 0;
        for (int sy = 0; sy < kSubsamples; ++sy) {
          for (int sx = 0; sx < kSubsamples; ++sx) {
            const double dx = (static_cast<double>(x) + (sx + 0.5) / kSubsamples - cx) / rx;
            const double dy = (static_cast<double>(y) + (sy + 0.5) / kSubsamples - cy) / ry;
            covered += disc ? dx * dx + dy * dy <= 1.0 : std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0;
          }
        }
        if (covered == 0) continue;
        const double a = covered / static_cast<double>(kSubsamples * kSubsamples);
        for (std::size_t c = 0; c < 3; ++c) img.at(y, x, c) = a * color[c] + (1.0 - a) * img.at(y, x, c);
      }
    }
  }
  return img;
}

train::Dataset make_dataset(std::size_t count, std::size_t width, std::size_t height, std::uint64_t seed,
                            const CfaPattern& pattern) {
  train::Dataset data;
  data.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint64_t s = seed * 1000003ULL + i;
    train::Sample sample;
    char id[32];
    std::snprintf(id, sizeof id, "synth_%03zu", i);
    sample.id = id;
    sample.gt = i % 2 == 0 ? edge_scene(width, height, s) : smooth_gradient(width, height, s);
    sample.raw = mosaic(sample.gt, pattern);
    data.push_back(std::move(sample));
  }
  return data;
}

}  // namespace evd::synthetic
