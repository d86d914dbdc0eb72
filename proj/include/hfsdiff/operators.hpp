#pragma once

#include "hfsdiff/core.hpp"
#include "hfsdiff/fft.hpp"
#include "hfsdiff/masks.hpp"

namespace hfsdiff {

namespace detail {

enum class Band { low, high };

// ifft( keep-band . fft(x) ): the mask-in-Fourier-domain sandwich shared by
// both projections. Trivial masks short-circuit so that n_l = 0 makes F_h the
// exact identity (and F_l exactly zero), not a transform round-trip.
inline ComplexField band_project(const ComplexField& x, const FrequencyMask& m, Band band) {
  m.check_shape(x);
  const bool keep_all = (band == Band::high) ? m.empty_low() : m.full_low();
  const bool keep_none = (band == Band::high) ? m.full_low() : m.empty_low();
  if (keep_all) return x;
  if (keep_none) {
    ComplexField zero(x.rows(), x.cols(), x.domain());
    return zero;
  }
  ComplexField k = fft2_centered(x);
  const bool keep_low = (band == Band::low);
  if (m.axis == 0) {
    for (std::size_t c = 0; c < k.cols(); ++c)
      for (std::size_t r = 0; r < k.rows(); ++r)
        if (m.is_low_line(r) != keep_low) k(r, c) = 0.0;
  } else {
    for (std::size_t c = 0; c < k.cols(); ++c)
      if (m.is_low_line(c) != keep_low)
        for (std::size_t r = 0; r < k.rows(); ++r) k(r, c) = 0.0;
  }
  return ifft2_centered(k);
}

}  // namespace detail

// High-frequency projection F_h = F^-1 (I - M_l) F. Linear, self-adjoint,
// idempotent; F_h + F_l = identity.
inline ComplexField apply_Fh(const ComplexField& x, const FrequencyMask& m) {
  return detail::band_project(x, m, detail::Band::high);
}

// Low-frequency projection F_l = F^-1 M_l F.
inline ComplexField apply_Fl(const ComplexField& x, const FrequencyMask& m) {
  return detail::band_project(x, m, detail::Band::low);
}

// Coil sensitivity maps, image domain, one field per coil. The multi-coil
// frequency operators only partition (Fh + Fl = I) under sum-of-squares
// normalization, so that is part of the type's contract.
struct CoilSet {
  std::vector<ComplexField> maps;

  std::size_t count() const { return maps.size(); }
  std::size_t rows() const { return maps.empty() ? 0 : maps[0].rows(); }
  std::size_t cols() const { return maps.empty() ? 0 : maps[0].cols(); }

  // Largest pointwise deviation of sum_j |csm_j|^2 from 1.
  double sos_max_deviation() const {
    double dev = 0.0;
    for (std::size_t i = 0; i < maps[0].size(); ++i) {
      double s = 0.0;
      for (const auto& map : maps) s += std::norm(map[i]);
      dev = std::max(dev, std::abs(s - 1.0));
    }
    return dev;
  }

  void check_consistent() const {
    if (maps.empty()) throw dimension_error("CoilSet: no coils");
    for (const auto& map : maps)
      if (!map.same_shape(maps[0])) throw dimension_error("CoilSet: coil shape mismatch");
  }

  void check_normalized(double tol = 1e-6) const {
    check_consistent();
    const double dev = sos_max_deviation();
    if (dev > tol)
      throw config_error("CoilSet: sum-of-squares deviates from 1 by " + std::to_string(dev));
  }
};

namespace detail {

inline ComplexField multicoil_band(const ComplexField& x, const CoilSet& csm,
                                   const FrequencyMask& m, Band band) {
  csm.check_normalized();
  if (csm.rows() != x.rows() || csm.cols() != x.cols())
    throw dimension_error("multi-coil operator: csm shape mismatch");
  ComplexField acc(x.rows(), x.cols(), x.domain());
  for (const auto& map : csm.maps) {
    ComplexField weighted(x.rows(), x.cols(), x.domain());
    for (std::size_t i = 0; i < x.size(); ++i) weighted[i] = map[i] * x[i];
    const ComplexField proj = band_project(weighted, m, band);
    for (std::size_t i = 0; i < x.size(); ++i) acc[i] += std::conj(map[i]) * proj[i];
  }
  return acc;
}

}  // namespace detail

// sum_j csm_j^* . F^-1((I - M_l) . F(csm_j . x))
inline ComplexField multicoil_Fh(const ComplexField& x, const CoilSet& csm,
                                 const FrequencyMask& m) {
  return detail::multicoil_band(x, csm, m, detail::Band::high);
}

inline ComplexField multicoil_Fl(const ComplexField& x, const CoilSet& csm,
                                 const FrequencyMask& m) {
  return detail::multicoil_band(x, csm, m, detail::Band::low);
}

// Per-coil k-space measurements.
using CoilKSpace = std::vector<ComplexField>;

// Encoding operator A: x -> { M_u . F(csm_j . x) }_j. Unsampled lines are
// exact zeros.
inline CoilKSpace encode(const ComplexField& x, const CoilSet& csm, const SamplingMask& mu) {
  if (x.domain() != Domain::image) throw config_error("encode: x must be image-domain");
  csm.check_consistent();
  if (csm.rows() != x.rows() || csm.cols() != x.cols())
    throw dimension_error("encode: csm shape mismatch");
  mu.check_shape(x);
  CoilKSpace y;
  y.reserve(csm.count());
  for (const auto& map : csm.maps) {
    ComplexField weighted(x.rows(), x.cols(), Domain::image);
    for (std::size_t i = 0; i < x.size(); ++i) weighted[i] = map[i] * x[i];
    ComplexField k = fft2_centered(weighted);
    for (std::size_t c = 0; c < k.cols(); ++c)
      for (std::size_t r = 0; r < k.rows(); ++r)
        if (!mu.is_sampled(r, c)) k(r, c) = 0.0;
    y.push_back(std::move(k));
  }
  return y;
}

// Adjoint A^H: y -> sum_j csm_j^* . F^-1(M_u . y_j), so <Ax, y> = <x, A^H y>.
inline ComplexField adjoint(const CoilKSpace& y, const CoilSet& csm, const SamplingMask& mu) {
  csm.check_consistent();
  if (y.size() != csm.count()) throw dimension_error("adjoint: coil count mismatch");
  ComplexField acc(csm.rows(), csm.cols(), Domain::image);
  for (std::size_t j = 0; j < y.size(); ++j) {
    if (y[j].rows() != csm.rows() || y[j].cols() != csm.cols())
      throw dimension_error("adjoint: data shape mismatch");
    mu.check_shape(y[j]);
    ComplexField k = y[j];
    k.set_domain(Domain::kspace);
    for (std::size_t c = 0; c < k.cols(); ++c)
      for (std::size_t r = 0; r < k.rows(); ++r)
        if (!mu.is_sampled(r, c)) k(r, c) = 0.0;
    const ComplexField img = ifft2_centered(k);
    const ComplexField& map = csm.maps[j];
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += std::conj(map[i]) * img[i];
  }
  return acc;
}

// Closed form of the operator exponential e^{k F_h}: because F_h is
// idempotent the Taylor product collapses to (e^k - 1) F_h + I. Exact on both
// subspaces: low-frequency content passes through, high-frequency content is
// scaled by e^k.
inline ComplexField exp_Fh(double k, const ComplexField& x, const FrequencyMask& m) {
  if (!std::isfinite(k)) throw config_error("exp_Fh: k must be finite");
  ComplexField out = x;
  add_scaled(out, std::expm1(k), apply_Fh(x, m));
  return out;
}

}  // namespace hfsdiff
