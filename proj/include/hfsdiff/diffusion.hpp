#pragma once

#include "hfsdiff/fft.hpp"
#include "hfsdiff/operators.hpp"
#include "hfsdiff/rng.hpp"
#include "hfsdiff/schedule.hpp"

namespace hfsdiff {

// Forward perturbation x(t) | x(0) with an externally supplied noise draw z
// (image domain, complex standard normal). HFS variants attenuate and noise
// only the high band, so the low band of the output equals that of x0.
inline ComplexField perturb_given(const ComplexField& x0, double t, const DiffusionSpec& spec,
                                  const ComplexField& z) {
  x0.check_shape(z);
  const KernelCoeffs k = kernel_coeffs(spec, t);
  const double noise_std = std::sqrt(k.var);
  if (is_hfs(spec.variant)) {
    spec.freq_mask.check_shape(x0);
    ComplexField out = x0;
    add_scaled(out, k.mean_coeff - 1.0, apply_Fh(x0, spec.freq_mask));
    add_scaled(out, noise_std, apply_Fh(z, spec.freq_mask));
    return out;
  }
  ComplexField out = x0;
  out *= k.mean_coeff;
  add_scaled(out, noise_std, z);
  return out;
}

inline ComplexField perturb(const ComplexField& x0, double t, const DiffusionSpec& spec,
                            RngStream& rng) {
  const ComplexField z = rng.normal_field(x0.rows(), x0.cols(), x0.domain());
  return perturb_given(x0, t, spec, z);
}

// Forward discrete Markov chain of the HFS diffusion,
//   x_i = Fl(x_{i-1}) + sqrt(1 - beta_i) Fh(x_{i-1}) + sqrt(beta_i) Fh(z_{i-1}),
// with beta_i = beta(i/N)/N. The iterate is carried in centered k-space
// between steps (the projections are diagonal there); each step draws z in
// the image domain and transforms it. The noise transform keeps the raw DFT
// layout: the fftshift permutation is folded into the blend's index maps, and
// only the k-space rows the high band actually uses get their row transform.
// The HFS-VE chain replaces the drift/noise pair with the increment
// sqrt(sigma^2(t_i) - sigma^2(t_{i-1})) Fh(z_{i-1}).
inline ComplexField forward_chain(const ComplexField& x0, const DiffusionSpec& spec, int steps,
                                  RngStream& rng) {
  if (!is_hfs(spec.variant))
    throw config_error("forward_chain: defined for HFS variants (use n_l = 0 for VP)");
  if (steps < 0 || steps > spec.schedule.N)
    throw config_error("forward_chain: steps must lie in [0, schedule.N]");
  const FrequencyMask& m = spec.freq_mask;
  m.check_shape(x0);

  const std::size_t rows = x0.rows(), cols = x0.cols();
  const int N = spec.schedule.N;
  const double scale = 1.0 / std::sqrt(static_cast<double>(rows * cols));

  // Diffused lines in centered indexing and their raw-DFT positions.
  std::vector<std::size_t> high_lines, high_raw;
  const std::size_t extent = m.extent();
  for (std::size_t l = 0; l < extent; ++l)
    if (!m.is_low_line(l)) {
      high_lines.push_back(l);
      high_raw.push_back((l + extent - extent / 2) % extent);
    }
  const std::size_t other = (m.axis == 0) ? cols : rows;
  std::vector<std::size_t> other_raw(other);
  for (std::size_t j = 0; j < other; ++j) other_raw[j] = (j + other - other / 2) % other;

  ComplexField xk = fft2_centered(x0);
  ComplexField z(rows, cols, Domain::image);
  ComplexField zs(rows, cols, Domain::image);  // ifftshifted copy of z
  thread_local std::vector<cdouble> scratch;

  for (int i = 1; i <= steps; ++i) {
    double keep, noise;
    if (is_vp_family(spec.variant)) {
      const double beta_i = spec.schedule.discrete_beta(i, N);
      keep = std::sqrt(1.0 - beta_i);
      noise = std::sqrt(beta_i) * scale;
    } else {
      const double t_prev = static_cast<double>(i - 1) / N;
      const double t_cur = static_cast<double>(i) / N;
      keep = 1.0;
      noise = std::sqrt(spec.schedule.sigma_sq(t_cur) - spec.schedule.sigma_sq(t_prev)) * scale;
    }

    for (std::size_t idx = 0; idx < z.size(); ++idx) z[idx] = rng.complex_normal();
    detail::copy_cyclic_scaled(z, zs, rows / 2, cols / 2, 1.0);

    if (m.axis == 0) {
      // columns fully, then only the raw rows feeding the high band
      for (std::size_t c = 0; c < cols; ++c) detail::fft_1d(zs.data() + c * rows, rows, false);
      scratch.resize(cols);
      for (std::size_t h = 0; h < high_lines.size(); ++h) {
        const std::size_t rr = high_raw[h];
        for (std::size_t c = 0; c < cols; ++c) scratch[c] = zs[rr + c * rows];
        detail::fft_1d(scratch.data(), cols, false);
        const std::size_t r = high_lines[h];
        for (std::size_t c = 0; c < cols; ++c) {
          cdouble& v = xk(r, c);
          v = keep * v + noise * scratch[other_raw[c]];
        }
      }
    } else {
      scratch.resize(cols);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) scratch[c] = zs[r + c * rows];
        detail::fft_1d(scratch.data(), cols, false);
        for (std::size_t c = 0; c < cols; ++c) zs[r + c * rows] = scratch[c];
      }
      for (std::size_t h = 0; h < high_lines.size(); ++h) {
        const std::size_t cc = high_raw[h];
        detail::fft_1d(zs.data() + cc * rows, rows, false);
        const std::size_t c = high_lines[h];
        for (std::size_t r = 0; r < rows; ++r) {
          cdouble& v = xk(r, c);
          v = keep * v + noise * zs[other_raw[r] + cc * rows];
        }
      }
    }
  }
  return ifft2_centered(xk);
}

}  // namespace hfsdiff
