#pragma once

#include <algorithm>
#include <numeric>

#include "hfsdiff/core.hpp"

namespace hfsdiff {

// Binary line mask splitting k-space into a centered low-frequency band of
// n_l contiguous lines and its high-frequency complement. Lines run across
// axis 0 by default (a "line" is one full row), matching a 1D phase-encode
// mask; axis 1 masks columns instead.
struct FrequencyMask {
  std::size_t nl = 0;
  int axis = 0;
  std::size_t rows = 0, cols = 0;

  static FrequencyMask centered(std::size_t nl, std::size_t rows, std::size_t cols,
                                int axis = 0) {
    if (rows == 0 || cols == 0) throw dimension_error("FrequencyMask: empty shape");
    if (axis != 0 && axis != 1) throw config_error("FrequencyMask: axis must be 0 or 1");
    FrequencyMask m;
    m.nl = nl;
    m.axis = axis;
    m.rows = rows;
    m.cols = cols;
    if (nl > m.extent())
      throw config_error("FrequencyMask: n_l exceeds the masked-axis extent");
    return m;
  }

  std::size_t extent() const { return axis == 0 ? rows : cols; }

  // First line of the low band; the band is [low_start, low_start + nl).
  std::size_t low_start() const { return extent() / 2 - nl / 2; }

  bool is_low_line(std::size_t line) const {
    return nl > 0 && line >= low_start() && line < low_start() + nl;
  }

  bool empty_low() const { return nl == 0; }
  bool full_low() const { return nl == extent(); }

  bool matches(std::size_t r, std::size_t c) const {
    return rows == r && cols == c;
  }

  void check_shape(const ComplexField& x) const {
    if (!matches(x.rows(), x.cols()))
      throw dimension_error("FrequencyMask shape mismatch with field " + x.shape_string());
  }

  // 0/1 k-space field representation of M_l, for on-disk storage.
  ComplexField to_field() const {
    ComplexField f(rows, cols, Domain::kspace);
    for (std::size_t c = 0; c < cols; ++c)
      for (std::size_t r = 0; r < rows; ++r)
        f(r, c) = is_low_line(axis == 0 ? r : c) ? 1.0 : 0.0;
    return f;
  }
};

// Undersampling pattern over k-space lines: a set of sampled line indices
// containing a contiguous centered ACS block.
struct SamplingMask {
  std::vector<std::uint8_t> line_sampled;  // one flag per line along `axis`
  double nominal_factor = 1.0;
  std::size_t acs_lines = 0;
  int axis = 0;
  std::size_t rows = 0, cols = 0;

  std::size_t extent() const { return axis == 0 ? rows : cols; }
  std::size_t total_lines() const { return extent(); }

  std::size_t sampled_count() const {
    return static_cast<std::size_t>(
        std::count(line_sampled.begin(), line_sampled.end(), std::uint8_t(1)));
  }

  double acceleration() const {
    const std::size_t n = sampled_count();
    if (n == 0) throw config_error("SamplingMask: no sampled lines");
    return static_cast<double>(total_lines()) / static_cast<double>(n);
  }

  bool is_sampled_line(std::size_t line) const { return line_sampled[line] != 0; }

  bool is_sampled(std::size_t r, std::size_t c) const {
    return is_sampled_line(axis == 0 ? r : c);
  }

  std::size_t acs_start() const { return extent() / 2 - acs_lines / 2; }

  void check_shape(const ComplexField& x) const {
    if (rows != x.rows() || cols != x.cols())
      throw dimension_error("SamplingMask shape mismatch with field " + x.shape_string());
  }

  // Full sampling, the factor = 1 degenerate pattern.
  static SamplingMask full(std::size_t rows, std::size_t cols, int axis = 0) {
    SamplingMask m;
    m.rows = rows;
    m.cols = cols;
    m.axis = axis;
    m.line_sampled.assign(m.extent(), 1);
    m.nominal_factor = 1.0;
    m.acs_lines = 0;
    return m;
  }

  ComplexField to_field() const {
    ComplexField f(rows, cols, Domain::kspace);
    for (std::size_t c = 0; c < cols; ++c)
      for (std::size_t r = 0; r < rows; ++r) f(r, c) = is_sampled(r, c) ? 1.0 : 0.0;
    return f;
  }
};

}  // namespace hfsdiff
