#pragma once

// Test-only oracles: dense-matrix constructions of the operators, evaluated
// through Eigen, plus small numeric helpers. These deliberately avoid the
// library's FFT/operator code paths so they can act as independent checks.

#include <Eigen/Dense>
#include <complex>

#include "hfsdiff/core.hpp"
#include "hfsdiff/masks.hpp"
#include "hfsdiff/operators.hpp"

namespace oracles {

using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using hfsdiff::cdouble;
using hfsdiff::ComplexField;

inline Vec to_vec(const ComplexField& f) {
  Vec v(static_cast<Eigen::Index>(f.size()));
  for (std::size_t i = 0; i < f.size(); ++i) v[static_cast<Eigen::Index>(i)] = f[i];
  return v;
}

inline ComplexField to_field(const Vec& v, std::size_t rows, std::size_t cols,
                             hfsdiff::Domain d = hfsdiff::Domain::image) {
  ComplexField f(rows, cols, d);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = v[static_cast<Eigen::Index>(i)];
  return f;
}

// Centered unitary 2D DFT as an explicit (rows*cols) x (rows*cols) matrix,
// built directly from the exponential-sum definition. Vector index follows
// the field's column-major layout, i = r + c*rows.
inline Mat dense_dft(std::size_t rows, std::size_t cols) {
  const std::size_t n = rows * cols;
  const double cr = static_cast<double>(rows / 2);
  const double cc = static_cast<double>(cols / 2);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  Mat F(n, n);
  const double two_pi = 2.0 * 3.14159265358979323846;
  for (std::size_t v = 0; v < cols; ++v)
    for (std::size_t u = 0; u < rows; ++u)
      for (std::size_t q = 0; q < cols; ++q)
        for (std::size_t p = 0; p < rows; ++p) {
          const double phase =
              -two_pi * ((static_cast<double>(p) - cr) * (static_cast<double>(u) - cr) / rows +
                         (static_cast<double>(q) - cc) * (static_cast<double>(v) - cc) / cols);
          F(static_cast<Eigen::Index>(u + v * rows), static_cast<Eigen::Index>(p + q * rows)) =
              scale * cdouble(std::cos(phase), std::sin(phase));
        }
  return F;
}

// Diagonal 0/1 mask matrix for the low band of a FrequencyMask.
inline Mat dense_low_mask(const hfsdiff::FrequencyMask& m) {
  const std::size_t n = m.rows * m.cols;
  Mat D = Mat::Zero(n, n);
  for (std::size_t c = 0; c < m.cols; ++c)
    for (std::size_t r = 0; r < m.rows; ++r) {
      const std::size_t line = (m.axis == 0) ? r : c;
      if (m.is_low_line(line))
        D(static_cast<Eigen::Index>(r + c * m.rows), static_cast<Eigen::Index>(r + c * m.rows)) =
            1.0;
    }
  return D;
}

inline Mat dense_sampling_mask(const hfsdiff::SamplingMask& mu) {
  const std::size_t n = mu.rows * mu.cols;
  Mat D = Mat::Zero(n, n);
  for (std::size_t c = 0; c < mu.cols; ++c)
    for (std::size_t r = 0; r < mu.rows; ++r)
      if (mu.is_sampled(r, c))
        D(static_cast<Eigen::Index>(r + c * mu.rows), static_cast<Eigen::Index>(r + c * mu.rows)) =
            1.0;
  return D;
}

inline Mat dense_diag(const ComplexField& f) {
  Mat D = Mat::Zero(static_cast<Eigen::Index>(f.size()), static_cast<Eigen::Index>(f.size()));
  for (std::size_t i = 0; i < f.size(); ++i) D(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = f[i];
  return D;
}

// F^H (I - M_l) F
inline Mat dense_fh(const hfsdiff::FrequencyMask& m) {
  const Mat F = dense_dft(m.rows, m.cols);
  const Mat D = Mat::Identity(F.rows(), F.cols()) - dense_low_mask(m);
  return F.adjoint() * D * F;
}

inline Mat dense_fl(const hfsdiff::FrequencyMask& m) {
  const Mat F = dense_dft(m.rows, m.cols);
  return F.adjoint() * dense_low_mask(m) * F;
}

// Multi-coil high/low operator: sum_j diag(csm_j^*) F^H D F diag(csm_j).
inline Mat dense_multicoil(const hfsdiff::CoilSet& csm, const hfsdiff::FrequencyMask& m,
                           bool high) {
  const Mat F = dense_dft(m.rows, m.cols);
  const Mat Ml = dense_low_mask(m);
  const Mat D = high ? Mat(Mat::Identity(F.rows(), F.cols()) - Ml) : Ml;
  Mat acc = Mat::Zero(F.rows(), F.cols());
  for (const auto& map : csm.maps) {
    const Mat S = dense_diag(map);
    acc += S.adjoint() * F.adjoint() * D * F * S;
  }
  return acc;
}

// Per-coil encoding block M_u F diag(csm_j); full A stacks these vertically.
inline Mat dense_encode_block(const ComplexField& csm_j, const hfsdiff::SamplingMask& mu) {
  const Mat F = dense_dft(csm_j.rows(), csm_j.cols());
  return dense_sampling_mask(mu) * F * dense_diag(csm_j);
}

inline double rel_err(const ComplexField& got, const ComplexField& want) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    num += std::norm(got[i] - want[i]);
    den += std::norm(want[i]);
  }
  return den == 0.0 ? std::sqrt(num) : std::sqrt(num / den);
}

inline double rel_err(const Vec& got, const Vec& want) {
  return (got - want).norm() / std::max(1e-300, want.norm());
}

}  // namespace oracles
