#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace hfsdiff {

using cdouble = std::complex<double>;

// Error taxonomy. The CLI maps these onto exit codes, tests assert on the
// concrete type.
struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape or domain-tag mismatch between operands.
struct dimension_error : error {
  using error::error;
};

// Invalid parameter, schedule, range or validation failure.
struct config_error : error {
  using error::error;
};

// Non-finite state produced by an iterative process; carries the step index.
struct divergence_error : error {
  divergence_error(const std::string& msg, int step) : error(msg), step_index(step) {}
  int step_index;
};

struct io_error : error {
  using error::error;
};

// Which side of the Fourier transform a field lives on.
enum class Domain { image, kspace };

inline const char* domain_name(Domain d) { return d == Domain::image ? "image" : "kspace"; }

// Dense 2D complex grid. Storage is column-major (row index varies fastest),
// matching the on-disk array format, so (r, c) maps to data[r + c*rows].
class ComplexField {
 public:
  ComplexField() = default;
  ComplexField(std::size_t rows, std::size_t cols, Domain domain = Domain::image)
      : rows_(rows), cols_(cols), domain_(domain), data_(rows * cols) {
    if (rows == 0 || cols == 0) throw dimension_error("ComplexField: empty grid");
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  Domain domain() const { return domain_; }
  void set_domain(Domain d) { domain_ = d; }

  cdouble& operator()(std::size_t r, std::size_t c) { return data_[r + c * rows_]; }
  const cdouble& operator()(std::size_t r, std::size_t c) const { return data_[r + c * rows_]; }
  cdouble& operator[](std::size_t i) { return data_[i]; }
  const cdouble& operator[](std::size_t i) const { return data_[i]; }

  cdouble* data() { return data_.data(); }
  const cdouble* data() const { return data_.data(); }

  bool same_shape(const ComplexField& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  ComplexField& operator+=(const ComplexField& o) {
    check_shape(o);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  ComplexField& operator-=(const ComplexField& o) {
    check_shape(o);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }
  ComplexField& operator*=(cdouble s) {
    for (auto& v : data_) v *= s;
    return *this;
  }
  ComplexField& operator*=(double s) {
    for (auto& v : data_) v *= s;
    return *this;
  }

  friend ComplexField operator+(ComplexField a, const ComplexField& b) { return a += b; }
  friend ComplexField operator-(ComplexField a, const ComplexField& b) { return a -= b; }
  friend ComplexField operator*(ComplexField a, double s) { return a *= s; }
  friend ComplexField operator*(double s, ComplexField a) { return a *= s; }

  void fill(cdouble v) {
    for (auto& x : data_) x = v;
  }

  void check_shape(const ComplexField& o) const {
    if (!same_shape(o))
      throw dimension_error("field shape mismatch: " + shape_string() + " vs " + o.shape_string());
  }
  std::string shape_string() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
  }

 private:
  std::size_t rows_ = 0, cols_ = 0;
  Domain domain_ = Domain::image;
  std::vector<cdouble> data_;
};

// x += alpha * y, without a temporary.
inline void add_scaled(ComplexField& x, double alpha, const ComplexField& y) {
  x.check_shape(y);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += alpha * y[i];
}

inline double norm2_sq(const ComplexField& x) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += std::norm(x[i]);
  return s;
}

inline double norm2(const ComplexField& x) { return std::sqrt(norm2_sq(x)); }

// <a, b> = sum conj(a) * b
inline cdouble dot(const ComplexField& a, const ComplexField& b) {
  a.check_shape(b);
  cdouble s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
  return s;
}

inline bool all_finite(const ComplexField& x) {
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!std::isfinite(x[i].real()) || !std::isfinite(x[i].imag())) return false;
  return true;
}

// Complex mean and population standard deviation of the samples,
// std = sqrt(mean |x - mean(x)|^2).
inline cdouble mean(const ComplexField& x) {
  cdouble s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i];
  return s / static_cast<double>(x.size());
}

inline double stddev(const ComplexField& x) {
  const cdouble mu = mean(x);
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += std::norm(x[i] - mu);
  return std::sqrt(s / static_cast<double>(x.size()));
}

}  // namespace hfsdiff
