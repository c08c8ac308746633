// Copyright 2026 relightkit authors
// SPDX-License-Identifier: Apache-2.0
#include "relight/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace relight {
namespace {

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;

std::vector<double> ssim_kernel() {
  std::vector<double> k(kSsimWindow);
  const int half = kSsimWindow / 2;
  double sum = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = i - half;
    k[i] = std::exp(-(d * d) / (2.0 * kSsimSigma * kSsimSigma));
    sum += k[i];
  }
  for (double& v : k) v /= sum;
  return k;
}

struct BBox {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // half-open
  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
};

BBox mask_bbox(const Image& mask) {
  BBox box{mask.width, mask.height, 0, 0};
  bool any = false;
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (mask.at(x, y, 0) > 0.5) {
        any = true;
        box.x0 = std::min(box.x0, x);
        box.y0 = std::min(box.y0, y);
        box.x1 = std::max(box.x1, x + 1);
        box.y1 = std::max(box.y1, y + 1);
      }
    }
  }
  if (!any) throw std::runtime_error("masked_metric: empty mask");
  return box;
}

Image crop_masked(const Image& img, const Image& mask, const BBox& box) {
  Image out(box.width(), box.height(), img.channels);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      const bool on = mask.at(box.x0 + x, box.y0 + y, 0) > 0.5;
      if (!on) continue;
      for (int c = 0; c < img.channels; ++c)
        out.at(x, y, c) = img.at(box.x0 + x, box.y0 + y, c);
    }
  }
  return out;
}

}  // namespace

double psnr(const Image& a, const Image& b, double max_val, double cap) {
  if (!a.same_shape(b)) throw std::runtime_error("psnr: shape mismatch");
  double se = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    se += d * d;
  }
  const double mse = se / static_cast<double>(a.data.size());
  if (mse <= 0.0) return cap;
  return std::min(cap, 10.0 * std::log10(max_val * max_val / mse));
}

double ssim(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw std::runtime_error("ssim: shape mismatch");
  if (a.width < kSsimWindow || a.height < kSsimWindow)
    throw std::runtime_error("ssim: image smaller than 11x11");
  const Image ga = to_gray(a);
  const Image gb = to_gray(b);
  const std::vector<double> k = ssim_kernel();

  const double c1 = 0.01 * 0.01;  // (K1*L)^2, L=1
  const double c2 = 0.03 * 0.03;

  const int half = kSsimWindow / 2;
  double total = 0.0;
  long count = 0;
  for (int cy = half; cy < a.height - half; ++cy) {
    for (int cx = half; cx < a.width - half; ++cx) {
      double mu_a = 0, mu_b = 0, aa = 0, bb = 0, ab = 0;
      for (int dy = 0; dy < kSsimWindow; ++dy) {
        for (int dx = 0; dx < kSsimWindow; ++dx) {
          const double w = k[dy] * k[dx];
          const double va = ga.at(cx - half + dx, cy - half + dy, 0);
          const double vb = gb.at(cx - half + dx, cy - half + dy, 0);
          mu_a += w * va;
          mu_b += w * vb;
          aa += w * va * va;
          bb += w * vb * vb;
          ab += w * va * vb;
        }
      }
      const double var_a = aa - mu_a * mu_a;
      const double var_b = bb - mu_b * mu_b;
      const double cov = ab - mu_a * mu_b;
      const double num = (2 * mu_a * mu_b + c1) * (2 * cov + c2);
      const double den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
      total += num / den;
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

double masked_metric(const MetricFn& metric, const Image& a, const Image& b,
                     const Image& mask) {
  if (!a.same_shape(b)) throw std::runtime_error("masked_metric: shape mismatch");
  if (mask.width != a.width || mask.height != a.height)
    throw std::runtime_error("masked_metric: mask shape mismatch");
  const BBox box = mask_bbox(mask);
  return metric(crop_masked(a, mask, box), crop_masked(b, mask, box));
}

double flicker_energy(const std::vector<Image>& frames) {
  if (frames.size() < 2)
    throw std::runtime_error("flicker_energy: need at least 2 frames");
  double total = 0.0;
  for (size_t t = 0; t + 1 < frames.size(); ++t) {
    if (!frames[t].same_shape(frames[t + 1]))
      throw std::runtime_error("flicker_energy: frame shape mismatch");
    double fd = 0.0;
    for (size_t i = 0; i < frames[t].data.size(); ++i)
      fd += std::abs(frames[t + 1].data[i] - frames[t].data[i]);
    total += fd / static_cast<double>(frames[t].data.size());
  }
  return total / static_cast<double>(frames.size() - 1);
}

std::string format_report_table(const std::vector<ReportRow>& rows,
                                const std::vector<std::string>& metric_order) {
  size_t name_w = std::string("variant").size();
  for (const auto& r : rows) name_w = std::max(name_w, r.variant.size());

  std::vector<size_t> col_w(metric_order.size());
  std::vector<std::vector<std::string>> cells(rows.size());
  for (size_t m = 0; m < metric_order.size(); ++m)
    col_w[m] = metric_order[m].size();
  for (size_t r = 0; r < rows.size(); ++r) {
    cells[r].resize(metric_order.size());
    for (size_t m = 0; m < metric_order.size(); ++m) {
      auto it = rows[r].values.find(metric_order[m]);
      if (it == rows[r].values.end()) {
        cells[r][m] = "n/a";
      } else {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.4f", it->second);
        cells[r][m] = buf;
      }
      col_w[m] = std::max(col_w[m], cells[r][m].size());
    }
  }

  std::ostringstream os;
  auto pad = [](const std::string& s, size_t w) {
    return s + std::string(w - s.size(), ' ');
  };
  os << pad("variant", name_w);
  for (size_t m = 0; m < metric_order.size(); ++m)
    os << "  " << pad(metric_order[m], col_w[m]);
  os << "\n";
  os << std::string(name_w, '-');
  for (size_t m = 0; m < metric_order.size(); ++m)
    os << "  " << std::string(col_w[m], '-');
  os << "\n";
  for (size_t r = 0; r < rows.size(); ++r) {
    os << pad(rows[r].variant, name_w);
    for (size_t m = 0; m < metric_order.size(); ++m)
      os << "  " << pad(cells[r][m], col_w[m]);
    os << "\n";
  }
  return os.str();
}

std::string format_report_jsonl(const std::vector<ReportRow>& rows) {
  std::string out;
  for (const auto& r : rows) {
    nlohmann::json j;
    j["variant"] = r.variant;
    for (const auto& [k, v] : r.values) j[k] = v;
    out += j.dump();
    out += "\n";
  }
  return out;
}

}  // namespace relight
