#pragma once

#include "hfsdiff/core.hpp"

namespace hfsdiff {

struct MetricsReport {
  double nmse = 0.0;
  double psnr = 0.0;  // dB, capped at 300
  double ssim = 0.0;
};

inline constexpr double kPsnrCap = 300.0;

// ||xhat - ref||^2 / ||ref||^2 on the complex fields.
inline double nmse(const ComplexField& xhat, const ComplexField& ref) {
  xhat.check_shape(ref);
  const double den = norm2_sq(ref);
  if (den == 0.0) throw config_error("nmse: all-zero reference");
  double num = 0.0;
  for (std::size_t i = 0; i < xhat.size(); ++i) num += std::norm(xhat[i] - ref[i]);
  return num / den;
}

// 10 log10(max|ref|^2 / mse) on magnitude images, capped at 300 dB.
inline double psnr(const ComplexField& xhat, const ComplexField& ref) {
  xhat.check_shape(ref);
  double peak = 0.0, mse = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const double b = std::abs(ref[i]);
    peak = std::max(peak, b);
    const double d = std::abs(xhat[i]) - b;
    mse += d * d;
  }
  mse /= static_cast<double>(ref.size());
  if (peak == 0.0) throw config_error("psnr: all-zero reference");
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse));
}

namespace detail {

inline const std::vector<double>& ssim_window() {
  // 11-tap Gaussian, sigma = 1.5, normalized.
  static const std::vector<double> w = [] {
    std::vector<double> v(11);
    double sum = 0.0;
    for (int i = 0; i < 11; ++i) {
      const double d = i - 5;
      v[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
      sum += v[static_cast<std::size_t>(i)];
    }
    for (auto& x : v) x /= sum;
    return v;
  }();
  return w;
}

}  // namespace detail

// SSIM on magnitude images: 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
// K2 = 0.03, dynamic range = max|ref|. At the borders the window is truncated
// and its weights renormalized, so images smaller than the window are valid.
inline double ssim(const ComplexField& xhat, const ComplexField& ref) {
  xhat.check_shape(ref);
  const std::size_t rows = ref.rows(), cols = ref.cols();
  std::vector<double> a(rows * cols), b(rows * cols);
  double range = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    a[i] = std::abs(xhat[i]);
    b[i] = std::abs(ref[i]);
    range = std::max(range, b[i]);
  }
  if (range == 0.0) throw config_error("ssim: all-zero reference");
  const double c1 = (0.01 * range) * (0.01 * range);
  const double c2 = (0.03 * range) * (0.03 * range);
  const auto& w = detail::ssim_window();
  const int half = 5;

  double total = 0.0;
  for (std::size_t c = 0; c < cols; ++c)
    for (std::size_t r = 0; r < rows; ++r) {
      double wsum = 0.0, ma = 0.0, mb = 0.0;
      for (int dy = -half; dy <= half; ++dy) {
        const long rr = static_cast<long>(r) + dy;
        if (rr < 0 || rr >= static_cast<long>(rows)) continue;
        for (int dx = -half; dx <= half; ++dx) {
          const long cc = static_cast<long>(c) + dx;
          if (cc < 0 || cc >= static_cast<long>(cols)) continue;
          const double wt = w[static_cast<std::size_t>(dy + half)] *
                            w[static_cast<std::size_t>(dx + half)];
          const std::size_t idx = static_cast<std::size_t>(rr) +
                                  static_cast<std::size_t>(cc) * rows;
          wsum += wt;
          ma += wt * a[idx];
          mb += wt * b[idx];
        }
      }
      ma /= wsum;
      mb /= wsum;
      double va = 0.0, vb = 0.0, vab = 0.0;
      for (int dy = -half; dy <= half; ++dy) {
        const long rr = static_cast<long>(r) + dy;
        if (rr < 0 || rr >= static_cast<long>(rows)) continue;
        for (int dx = -half; dx <= half; ++dx) {
          const long cc = static_cast<long>(c) + dx;
          if (cc < 0 || cc >= static_cast<long>(cols)) continue;
          const double wt = w[static_cast<std::size_t>(dy + half)] *
                            w[static_cast<std::size_t>(dx + half)];
          const std::size_t idx = static_cast<std::size_t>(rr) +
                                  static_cast<std::size_t>(cc) * rows;
          va += wt * (a[idx] - ma) * (a[idx] - ma);
          vb += wt * (b[idx] - mb) * (b[idx] - mb);
          vab += wt * (a[idx] - ma) * (b[idx] - mb);
        }
      }
      va /= wsum;
      vb /= wsum;
      vab /= wsum;
      total += ((2.0 * ma * mb + c1) * (2.0 * vab + c2)) /
               ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
  return total / static_cast<double>(rows * cols);
}

inline MetricsReport compute_metrics(const ComplexField& xhat, const ComplexField& ref) {
  return {nmse(xhat, ref), psnr(xhat, ref), ssim(xhat, ref)};
}

}  // namespace hfsdiff
