// Copyright Contributors to the evdemosaic project.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "evd/error.hpp"
#include "evd/metrics.hpp"

namespace evd::metrics {

namespace {

void require_same_size(const RgbImage& a, const RgbImage& b, const char* what) {
  if (a.width != b.width || a.height != b.height || a.data.size() != b.data.size()) {
    throw ShapeError(std::string(what) + ": image sizes differ (" + std::to_string(a.width) + "x" +
                     std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                     std::to_string(b.height) + ")");
  }
}

// Valid-mode separable filter of one plane (h x w) with taps g.
std::vector<double> filter_valid(const std::vector<double>& plane, std::size_t h, std::size_t w,
                                 const std::vector<double>& g) {
  const std::size_t k = g.size();
  const std::size_t ow = w - k + 1, oh = h - k + 1;
  std::vector<double> rows(h * ow, 0.0);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t i = 0; i < k; ++i) acc += g[i] * plane[y * w + x + i];
      rows[y * ow + x] = acc;
    }
  }
  std::vector<double> out(oh * ow, 0.0);
  for (std::size_t y = 0; y < oh; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t i = 0; i < k; ++i) acc += g[i] * rows[(y + i) * ow + x];
      out[y * ow + x] = acc;
    }
  }
  return out;
}

double mean_of(const std::vector<ImageMetrics>& images, double ImageMetrics::*field) {
  if (images.empty()) return std::numeric_limits<double>::quiet_NaN();
  double acc = 0.0;
  for (const auto& m : images) acc += m.*field;
  return acc / static_cast<double>(images.size());
}

}  // namespace

double psnr(const RgbImage& pred, const RgbImage& gt) {
  require_same_size(pred, gt, "psnr");
  if (pred.data.empty()) throw ShapeError("psnr: empty images");
  double mse = 0.0;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const double d = pred.data[i] - gt.data[i];
    mse += d * d;
  }
  mse /= static_cast<double>(pred.data.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

std::vector<double> gaussian_window(std::size_t size, double sigma) {
  std::vector<double> g(size);
  const double c = (static_cast<double>(size) - 1.0) / 2.0;
  double total = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    const double x = static_cast<double>(i) - c;
    g[i] = std::exp(-x * x / (2.0 * sigma * sigma));
    total += g[i];
  }
  for (auto& v : g) v /= total;
  return g;
}

double ssim(const RgbImage& pred, const RgbImage& gt) {
  require_same_size(pred, gt, "ssim");
  if (pred.width < kSsimWindow || pred.height < kSsimWindow) {
    throw DimensionError("ssim: image " + std::to_string(pred.width) + "x" + std::to_string(pred.height) +
                         " is smaller than the " + std::to_string(kSsimWindow) + "x" +
                         std::to_string(kSsimWindow) + " window");
  }
  const std::size_t w = pred.width, h = pred.height, n = w * h;
  const auto g = gaussian_window(kSsimWindow, kSsimSigma);
  const double c1 = kSsimK1 * kSsimK1, c2 = kSsimK2 * kSsimK2;

  double total = 0.0;
  std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = pred.data[i * 3 + c];
      y[i] = gt.data[i * 3 + c];
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = filter_valid(x, h, w, g), my = filter_valid(y, h, w, g);
    const auto sxx = filter_valid(xx, h, w, g), syy = filter_valid(yy, h, w, g), sxy = filter_valid(xy, h, w, g);
    double acc = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = sxx[i] - mx[i] * mx[i];
      const double vy = syy[i] - my[i] * my[i];
      const double cov = sxy[i] - mx[i] * my[i];
      acc += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    total += acc / static_cast<double>(mx.size());
  }
  return total / 3.0;
}

DifferenceMap difference_map(const RgbImage& pred, const RgbImage& gt, std::size_t bins) {
  require_same_size(pred, gt, "difference_map");
  const auto analysis = loss::difference_histogram(pred, gt, bins);
  DifferenceMap out;
  out.image.width = pred.width;
  out.image.height = pred.height;
  out.image.data.resize(analysis.map.size());
  for (std::size_t i = 0; i < analysis.map.size(); ++i) {
    out.image.data[i] = static_cast<std::uint8_t>(std::lround(std::clamp(analysis.map[i], 0.0, 1.0) * 255.0));
  }
  out.histogram = loss::histogram(analysis.map, bins);
  return out;
}

std::string format_metric(double value, int precision) {
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  if (std::isnan(value)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, value);
  return buf;
}

double MetricsReport::mean_psnr() const { return mean_of(images, &ImageMetrics::psnr); }
double MetricsReport::mean_ssim() const { return mean_of(images, &ImageMetrics::ssim); }
double MetricsReport::mean_baseline_psnr() const { return mean_of(images, &ImageMetrics::baseline_psnr); }
double MetricsReport::mean_baseline_ssim() const { return mean_of(images, &ImageMetrics::baseline_ssim); }

bool MetricsReport::has_baseline() const {
  return !images.empty() &&
         std::all_of(images.begin(), images.end(), [](const ImageMetrics& m) { return m.has_baseline; });
}

void write_report_csv(std::ostream& out, const MetricsReport& report) {
  const bool baseline = report.has_baseline();
  out << "image,psnr,ssim";
  if (baseline) out << ",baseline_psnr,baseline_ssim";
  out << '\n';
  for (const auto& m : report.images) {
    out << m.id << ',' << format_metric(m.psnr, 10) << ',' << format_metric(m.ssim, 10);
    if (baseline) out << ',' << format_metric(m.baseline_psnr, 10) << ',' << format_metric(m.baseline_ssim, 10);
    out << '\n';
  }
  out << "mean," << format_metric(report.mean_psnr(), 10) << ',' << format_metric(report.mean_ssim(), 10);
  if (baseline) {
    out << ',' << format_metric(report.mean_baseline_psnr(), 10) << ','
        << format_metric(report.mean_baseline_ssim(), 10);
  }
  out << '\n';
}

void write_histogram_csv(std::ostream& out, const loss::DifferenceHistogram& h) {
  out << "bin_lo,bin_hi,count\n";
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    out << format_metric(h.edges[i], 6) << ',' << format_metric(h.edges[i + 1], 6) << ',' << h.counts[i] << '\n';
  }
}

}  // namespace evd::metrics
