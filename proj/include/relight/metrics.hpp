// Copyright 2026 relightkit authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "relight/image.hpp"

namespace relight {

// Peak signal-to-noise ratio in dB. Identical images return `cap`.
double psnr(const Image& a, const Image& b, double max_val = 1.0,
            double cap = 99.0);

// Mean local SSIM over valid 11x11 windows (Gaussian sigma=1.5,
// K1=0.01, K2=0.03, L=1) of the channel-mean grayscale images.
// Requires both dimensions >= 11.
double ssim(const Image& a, const Image& b);

using MetricFn = std::function<double(const Image&, const Image&)>;

// Evaluates `metric` on the tight bounding box of `mask` after zeroing
// off-mask pixels of both crops. Throws on an empty mask.
double masked_metric(const MetricFn& metric, const Image& a, const Image& b,
                     const Image& mask);

// Mean over consecutive frame pairs of the mean absolute difference.
double flicker_energy(const std::vector<Image>& frames);

// One evaluated variant (table row).
struct ReportRow {
  std::string variant;
  // metric name -> value; missing metrics render as "n/a".
  std::map<std::string, double> values;
};

// Plain-text table, metrics as columns. `metric_order` lists columns;
// names absent from a row's map (e.g. "lpips") are printed as "n/a".
std::string format_report_table(const std::vector<ReportRow>& rows,
                                const std::vector<std::string>& metric_order);

// One JSON object per row, sorted keys, trailing newline each.
std::string format_report_jsonl(const std::vector<ReportRow>& rows);

}  // namespace relight
