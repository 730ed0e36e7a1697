// Copyright Contributors to the evdemosaic project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "evd/image.hpp"
#include "evd/losses.hpp"

namespace evd::plot {

using Color = std::array<double, 3>;

struct Series {
  std::vector<double> x, y;
  Color color{0.0, 0.0, 0.0};
};

/// Polylines in a framed panel; axes fit the data. No text rendering.
RgbImage line_plot(const std::vector<Series>& series, std::size_t width = 640, std::size_t height = 400);

/// Bar chart of histogram counts on a log-free linear scale.
RgbImage histogram_plot(const loss::DifferenceHistogram& h, std::size_t width = 640, std::size_t height = 400);

/// Panels stacked left to right on a white background.
RgbImage hstack(const std::vector<RgbImage>& panels);

const std::vector<Color>& palette();

}  // namespace evd::plot
