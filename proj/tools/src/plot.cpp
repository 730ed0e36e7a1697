// Copyright Contributors to the evdemosaic project.
// SPDX-License-Identifier: Apache-2.0

#include "plot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace evd::plot {

namespace {

constexpr std::size_t kMargin = 24;

struct Canvas {
  RgbImage img;

  Canvas(std::size_t w, std::size_t h) : img(w, h, 1.0) {}

  void set(long x, long y, const Color& c) {
    if (x < 0 || y < 0 || static_cast<std::size_t>(x) >= img.width || static_cast<std::size_t>(y) >= img.height) return;
    for (std::size_t k = 0; k < 3; ++k) img.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x), k) = c[k];
  }

  // Bresenham, drawn two pixels thick.
  void line(long x0, long y0, long x1, long y1, const Color& c) {
    const long dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const long sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    long err = dx + dy;
    for (;;) {
      set(x0, y0, c);
      set(x0 + 1, y0, c);
      set(x0, y0 + 1, c);
      if (x0 == x1 && y0 == y1) break;
      const long e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        x0 += sx;
      }
      if (e2 <= dx) {
        err += dx;
        y0 += sy;
      }
    }
  }

  void frame() {
    const Color gray{0.3, 0.3, 0.3};
    const long l = kMargin, t = kMargin;
    const long r = static_cast<long>(img.width - kMargin), b = static_cast<long>(img.height - kMargin);
    line(l, t, r, t, gray);
    line(r, t, r, b, gray);
    line(r, b, l, b, gray);
    line(l, b, l, t, gray);
  }
};

}  // namespace

const std::vector<Color>& palette() {
  static const std::vector<Color> colors = {
      {0.12, 0.47, 0.71}, {1.00, 0.50, 0.05}, {0.17, 0.63, 0.17}, {0.84, 0.15, 0.16},
      {0.58, 0.40, 0.74}, {0.55, 0.34, 0.29}, {0.89, 0.47, 0.76}, {0.50, 0.50, 0.50},
  };
  return colors;
}

RgbImage line_plot(const std::vector<Series>& series, std::size_t width, std::size_t height) {
  Canvas canvas(width, height);
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  }
  if (!(xmax > xmin)) xmax = xmin + 1.0;
  if (!(ymax > ymin)) ymax = ymin + 1.0;
  const double pw = static_cast<double>(width - 2 * kMargin), ph = static_cast<double>(height - 2 * kMargin);
  const auto px = [&](double x) { return static_cast<long>(std::lround(kMargin + (x - xmin) / (xmax - xmin) * pw)); };
  const auto py = [&](double y) {
    return static_cast<long>(std::lround(static_cast<double>(height - kMargin) - (y - ymin) / (ymax - ymin) * ph));
  };
  canvas.frame();
  if (ymin < 0.0 && ymax > 0.0) canvas.line(px(xmin), py(0.0), px(xmax), py(0.0), {0.75, 0.75, 0.75});
  for (const auto& s : series) {
    for (std::size_t i = 1; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i - 1]) || !std::isfinite(s.y[i])) continue;
      canvas.line(px(s.x[i - 1]), py(s.y[i - 1]), px(s.x[i]), py(s.y[i]), s.color);
    }
  }
  return canvas.img;
}

RgbImage histogram_plot(const loss::DifferenceHistogram& h, std::size_t width, std::size_t height) {
  Canvas canvas(width, height);
  canvas.frame();
  if (h.counts.empty()) return canvas.img;
  const double peak = static_cast<double>(std::max<std::size_t>(1, *std::max_element(h.counts.begin(), h.counts.end())));
  const double pw = static_cast<double>(width - 2 * kMargin), ph = static_cast<double>(height - 2 * kMargin);
  const double bw = pw / static_cast<double>(h.counts.size());
  const Color fill = palette()[0];
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    const long x0 = static_cast<long>(kMargin + bw * static_cast<double>(i));
    const long x1 = std::max(x0, static_cast<long>(kMargin + bw * static_cast<double>(i + 1)) - 1);
    const long bottom = static_cast<long>(height - kMargin) - 1;
    const long top = bottom - static_cast<long>(std::lround(static_cast<double>(h.counts[i]) / peak * (ph - 1)));
    for (long x = x0; x <= x1; ++x) {
      for (long y = top; y <= bottom; ++y) canvas.set(x, y, fill);
    }
  }
  return canvas.img;
}

RgbImage hstack(const std::vector<RgbImage>& panels) {
  std::size_t w = 0, h = 0;
  for (const auto& p : panels) {
    w += p.width;
    h = std::max(h, p.height);
  }
  RgbImage out(w, h, 1.0);
  std::size_t x0 = 0;
  for (const auto& p : panels) {
    for (std::size_t y = 0; y < p.height; ++y) {
      for (std::size_t x = 0; x < p.width; ++x) {
        for (std::size_t c = 0; c < 3; ++c) out.at(y, x0 + x, c) = p.at(y, x, c);
      }
    }
    x0 += p.width;
  }
  return out;
}

}  // namespace evd::plot
