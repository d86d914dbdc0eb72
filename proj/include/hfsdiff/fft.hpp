#pragma once

#include <memory>
#include <utility>

#include "hfsdiff/core.hpp"

namespace hfsdiff {
namespace detail {

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// Per-size radix-2 plan: forward/inverse twiddles and the bit-reversal
// permutation. Plans live in a thread_local cache, so concurrent transforms
// never share mutable state.
struct Radix2Plan {
  std::size_t n = 0;
  std::vector<cdouble> tw_fwd, tw_inv;  // e^{-+2*pi*i*k/n}, k < n/2
  std::vector<std::uint32_t> bitrev;

  explicit Radix2Plan(std::size_t size) : n(size) {
    tw_fwd.resize(n / 2);
    tw_inv.resize(n / 2);
    const double step = -2.0 * 3.14159265358979323846 / static_cast<double>(n);
    for (std::size_t k = 0; k < n / 2; ++k) {
      const double a = step * static_cast<double>(k);
      tw_fwd[k] = {std::cos(a), std::sin(a)};
      tw_inv[k] = std::conj(tw_fwd[k]);
    }
    bitrev.resize(n);
    for (std::size_t i = 1, j = 0; i < n; ++i) {
      std::size_t bit = n >> 1;
      for (; j & bit; bit >>= 1) j ^= bit;
      j ^= bit;
      bitrev[i] = static_cast<std::uint32_t>(j);
    }
  }
};

inline const Radix2Plan& radix2_plan(std::size_t n) {
  thread_local std::vector<std::unique_ptr<Radix2Plan>> cache;
  thread_local const Radix2Plan* last = nullptr;
  if (last && last->n == n) return *last;
  for (const auto& p : cache)
    if (p->n == n) {
      last = p.get();
      return *last;
    }
  cache.push_back(std::make_unique<Radix2Plan>(n));
  last = cache.back().get();
  return *last;
}

// In-place unnormalized radix-2 DFT, X_k = sum_j x_j e^{-+2*pi*i*jk/n}.
// Butterfly products are spelled out in real arithmetic; the std::complex
// operator* would otherwise go through the non-finite-recovery helper.
inline void fft_pow2(cdouble* v, std::size_t n, bool inverse) {
  if (n < 2) return;
  const Radix2Plan& plan = radix2_plan(n);
  for (std::size_t i = 1; i < n; ++i) {
    const std::size_t j = plan.bitrev[i];
    if (i < j) std::swap(v[i], v[j]);
  }
  double* d = reinterpret_cast<double*>(v);
  const std::vector<cdouble>& w = inverse ? plan.tw_inv : plan.tw_fwd;
  const double* wd = reinterpret_cast<const double*>(w.data());
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t stride = n / len;
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const std::size_t a = 2 * (i + k);
        const std::size_t b = 2 * (i + k + half);
        const double wr = wd[2 * k * stride], wi = wd[2 * k * stride + 1];
        const double tr = d[b] * wr - d[b + 1] * wi;
        const double ti = d[b] * wi + d[b + 1] * wr;
        const double ur = d[a], ui = d[a + 1];
        d[a] = ur + tr;
        d[a + 1] = ui + ti;
        d[b] = ur - tr;
        d[b + 1] = ui - ti;
      }
    }
  }
}

struct BluesteinPlan {
  std::size_t n = 0, m = 0;
  std::vector<cdouble> chirp;       // e^{-i*pi*k^2/n}
  std::vector<cdouble> kernel_fft;  // FFT of the padded conjugate chirp
};

inline const BluesteinPlan& bluestein_plan(std::size_t n) {
  thread_local std::vector<std::unique_ptr<BluesteinPlan>> cache;
  for (const auto& p : cache)
    if (p->n == n) return *p;
  auto p = std::make_unique<BluesteinPlan>();
  p->n = n;
  p->m = next_pow2(2 * n - 1);
  p->chirp.resize(n);
  const double pi_over_n = 3.14159265358979323846 / static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) {
    // k^2 mod 2n keeps the phase argument small for large k.
    const std::size_t k2 = (k * k) % (2 * n);
    const double ang = -pi_over_n * static_cast<double>(k2);
    p->chirp[k] = {std::cos(ang), std::sin(ang)};
  }
  std::vector<cdouble> b(p->m, cdouble(0.0, 0.0));
  b[0] = std::conj(p->chirp[0]);
  for (std::size_t k = 1; k < n; ++k) {
    b[k] = std::conj(p->chirp[k]);
    b[p->m - k] = std::conj(p->chirp[k]);
  }
  fft_pow2(b.data(), p->m, false);
  p->kernel_fft = std::move(b);
  cache.push_back(std::move(p));
  return *cache.back();
}

inline cdouble cmul(cdouble a, cdouble b) {
  return {a.real() * b.real() - a.imag() * b.imag(),
          a.real() * b.imag() + a.imag() * b.real()};
}

// Arbitrary-length forward DFT via the Bluestein chirp-z transform.
inline void fft_bluestein_forward(cdouble* v, std::size_t n) {
  const BluesteinPlan& p = bluestein_plan(n);
  thread_local std::vector<cdouble> a;
  a.assign(p.m, cdouble(0.0, 0.0));
  for (std::size_t k = 0; k < n; ++k) a[k] = cmul(v[k], p.chirp[k]);
  fft_pow2(a.data(), p.m, false);
  for (std::size_t k = 0; k < p.m; ++k) a[k] = cmul(a[k], p.kernel_fft[k]);
  fft_pow2(a.data(), p.m, true);
  const double scale = 1.0 / static_cast<double>(p.m);
  for (std::size_t k = 0; k < n; ++k) v[k] = scale * cmul(a[k], p.chirp[k]);
}

inline void fft_1d(cdouble* v, std::size_t n, bool inverse) {
  if (n < 2) return;
  if (is_pow2(n)) {
    fft_pow2(v, n, inverse);
    return;
  }
  if (!inverse) {
    fft_bluestein_forward(v, n);
  } else {
    for (std::size_t k = 0; k < n; ++k) v[k] = std::conj(v[k]);
    fft_bluestein_forward(v, n);
    for (std::size_t k = 0; k < n; ++k) v[k] = std::conj(v[k]);
  }
}

// Unnormalized 2D DFT over both axes of a column-major buffer.
inline void fft_2d(cdouble* data, std::size_t rows, std::size_t cols, bool inverse) {
  // Columns are contiguous.
  for (std::size_t c = 0; c < cols; ++c) fft_1d(data + c * rows, rows, inverse);
  // Rows need a gather/scatter through scratch.
  thread_local std::vector<cdouble> scratch;
  scratch.resize(cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) scratch[c] = data[r + c * rows];
    fft_1d(scratch.data(), cols, inverse);
    for (std::size_t c = 0; c < cols; ++c) data[r + c * rows] = scratch[c];
  }
}

// dst(r, c) = scale * src((r + dr) mod rows, (c + dc) mod cols), written as
// segment copies (no per-element modulo).
inline void copy_cyclic_scaled(const ComplexField& src, ComplexField& dst, std::size_t dr,
                               std::size_t dc, double scale) {
  const std::size_t rows = src.rows(), cols = src.cols();
  for (std::size_t c = 0; c < cols; ++c) {
    const std::size_t sc = c + dc < cols ? c + dc : c + dc - cols;
    const cdouble* in = src.data() + sc * rows;
    cdouble* out = dst.data() + c * rows;
    const std::size_t first = rows - dr;  // dst rows [0, first) <- src rows [dr, rows)
    for (std::size_t r = 0; r < first; ++r) out[r] = scale * in[r + dr];
    for (std::size_t r = first; r < rows; ++r) out[r] = scale * in[r + dr - rows];
  }
}

}  // namespace detail

// Centered unitary 2D Fourier transform: DC lands at (floor(rows/2),
// floor(cols/2)) and ||F x|| = ||x||. Implemented as
// fftshift o DFT o ifftshift with 1/sqrt(rows*cols) scaling.
inline ComplexField fft2_centered(const ComplexField& x) {
  if (x.domain() != Domain::image)
    throw config_error("fft2_centered: input must be image-domain");
  const std::size_t rows = x.rows(), cols = x.cols();
  ComplexField tmp(rows, cols, Domain::kspace);
  detail::copy_cyclic_scaled(x, tmp, rows / 2, cols / 2, 1.0);  // ifftshift
  detail::fft_2d(tmp.data(), rows, cols, false);
  ComplexField out(rows, cols, Domain::kspace);
  const double scale = 1.0 / std::sqrt(static_cast<double>(rows * cols));
  detail::copy_cyclic_scaled(tmp, out, rows - rows / 2, cols - cols / 2, scale);  // fftshift
  return out;
}

inline ComplexField ifft2_centered(const ComplexField& x) {
  if (x.domain() != Domain::kspace)
    throw config_error("ifft2_centered: input must be kspace-domain");
  const std::size_t rows = x.rows(), cols = x.cols();
  ComplexField tmp(rows, cols, Domain::image);
  detail::copy_cyclic_scaled(x, tmp, rows / 2, cols / 2, 1.0);
  detail::fft_2d(tmp.data(), rows, cols, true);
  ComplexField out(rows, cols, Domain::image);
  const double scale = 1.0 / std::sqrt(static_cast<double>(rows * cols));
  detail::copy_cyclic_scaled(tmp, out, rows - rows / 2, cols - cols / 2, scale);
  return out;
}

}  // namespace hfsdiff
