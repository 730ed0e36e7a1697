// Copyright Contributors to the evdemosaic project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "evd/image.hpp"
#include "evd/losses.hpp"

namespace evd::metrics {

/// 10 log10(1 / MSE) over all pixel-channels, peak 1. Identical images give
/// +infinity.
double psnr(const RgbImage& pred, const RgbImage& gt);

inline constexpr std::size_t kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;

/// Mean SSIM over the valid region of an 11x11 Gaussian window (sigma 1.5),
/// averaged over the three channels.
double ssim(const RgbImage& pred, const RgbImage& gt);

/// Normalized 1-D Gaussian taps used by ssim().
std::vector<double> gaussian_window(std::size_t size, double sigma);

struct DifferenceMap {
  GrayImage8 image;                    // round(255 * max-channel |pred - gt|)
  loss::DifferenceHistogram histogram;  // over the per-pixel map, total = W*H
};

DifferenceMap difference_map(const RgbImage& pred, const RgbImage& gt, std::size_t bins = 64);

/// "inf" for infinities, otherwise fixed with the given precision.
std::string format_metric(double value, int precision = 6);

struct ImageMetrics {
  std::string id;
  double psnr = 0.0;
  double ssim = 0.0;
  // Optional second column set (classical baseline).
  bool has_baseline = false;
  double baseline_psnr = 0.0;
  double baseline_ssim = 0.0;
  std::filesystem::path difference_map;
  std::filesystem::path histogram_csv;
};

struct MetricsReport {
  std::vector<ImageMetrics> images;

  double mean_psnr() const;
  double mean_ssim() const;
  double mean_baseline_psnr() const;
  double mean_baseline_ssim() const;
  bool has_baseline() const;
};

/// Header, one row per image, then a "mean" summary row.
void write_report_csv(std::ostream& out, const MetricsReport& report);
void write_histogram_csv(std::ostream& out, const loss::DifferenceHistogram& h);

}  // namespace evd::metrics
