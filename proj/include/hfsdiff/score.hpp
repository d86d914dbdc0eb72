#pragma once

#include <memory>

#include "hfsdiff/diffusion.hpp"

namespace hfsdiff {

// s_theta(x, t): the two-channel gradient of log p_t packaged as a complex
// field (real part = d/dRe, imaginary part = d/dIm), image domain.
class ScoreModel {
 public:
  virtual ~ScoreModel() = default;
  virtual ComplexField evaluate(const ComplexField& x, double t) const = 0;
};

// Gaussian prior over centered Fourier modes: mode k is complex normal with
// mean mean(k) and variance var(k) independently on each of the real and
// imaginary components. Diagonal in k-space, so every marginal of the forward
// diffusion stays Gaussian and the score has a closed form.
struct GaussianPrior {
  ComplexField mean;        // k-space, per-mode complex means m_k
  std::vector<double> var;  // per-mode per-component variances, > 0

  std::size_t rows() const { return mean.rows(); }
  std::size_t cols() const { return mean.cols(); }

  void validate() const {
    if (var.size() != mean.size()) throw dimension_error("GaussianPrior: var/mean size mismatch");
    for (double v : var)
      if (!(v > 0.0)) throw config_error("GaussianPrior: mode variances must be positive");
  }

  // Reproducible smooth test prior: blob-mixture mean, radially decaying
  // mode variances.
  static GaussianPrior smooth(std::size_t rows, std::size_t cols, RngStream& rng) {
    ComplexField img(rows, cols, Domain::image);
    const int blobs = 4;
    std::vector<double> cx(blobs), cy(blobs), w(blobs);
    std::vector<cdouble> amp(blobs);
    for (int b = 0; b < blobs; ++b) {
      cy[b] = rng.uniform() * rows;
      cx[b] = rng.uniform() * cols;
      w[b] = (0.08 + 0.12 * rng.uniform()) * std::min(rows, cols);
      amp[b] = cdouble(0.5 + rng.uniform(), 0.4 * (rng.uniform() - 0.5));
    }
    for (std::size_t c = 0; c < cols; ++c)
      for (std::size_t r = 0; r < rows; ++r) {
        cdouble v = 0.0;
        for (int b = 0; b < blobs; ++b) {
          const double dr = (static_cast<double>(r) - cy[b]) / w[b];
          const double dc = (static_cast<double>(c) - cx[b]) / w[b];
          v += amp[b] * std::exp(-0.5 * (dr * dr + dc * dc));
        }
        img(r, c) = v;
      }
    GaussianPrior p;
    p.mean = fft2_centered(img);
    p.var.resize(rows * cols);
    const double cr = static_cast<double>(rows / 2), cc = static_cast<double>(cols / 2);
    for (std::size_t c = 0; c < cols; ++c)
      for (std::size_t r = 0; r < rows; ++r) {
        const double fr = (static_cast<double>(r) - cr) / rows;
        const double fc = (static_cast<double>(c) - cc) / cols;
        const double rho = 2.0 * std::sqrt(fr * fr + fc * fc);
        p.var[r + c * rows] = 0.5 / std::pow(1.0 + 9.0 * rho * rho, 1.5) + 0.01;
      }
    return p;
  }

  // Draw an image-domain sample x ~ prior.
  ComplexField sample(RngStream& rng) const {
    ComplexField k(rows(), cols(), Domain::kspace);
    for (std::size_t i = 0; i < k.size(); ++i)
      k[i] = mean[i] + std::sqrt(var[i]) * rng.complex_normal();
    return ifft2_centered(k);
  }
};

// Exact marginal score of perturb() applied to a Gaussian prior. Per mode:
// diffused modes see mean a*m and per-component variance a^2*sigma^2 + v;
// for HFS variants the low band is undiffused and keeps the prior score.
inline ComplexField gaussian_score(const GaussianPrior& prior, const DiffusionSpec& spec,
                                   const ComplexField& x, double t) {
  prior.validate();
  if (prior.rows() != x.rows() || prior.cols() != x.cols())
    throw dimension_error("gaussian_score: prior/field shape mismatch");
  const KernelCoeffs kc = kernel_coeffs(spec, t);
  const double a = kc.mean_coeff, v = kc.var;
  ComplexField k = fft2_centered(x);
  const bool hfs = is_hfs(spec.variant);
  if (hfs) spec.freq_mask.check_shape(x);
  for (std::size_t c = 0; c < x.cols(); ++c)
    for (std::size_t r = 0; r < x.rows(); ++r) {
      const std::size_t i = r + c * x.rows();
      const std::size_t line = (hfs && spec.freq_mask.axis == 1) ? c : r;
      const bool low = hfs && spec.freq_mask.is_low_line(line);
      double denom;
      cdouble centered;
      if (low) {
        denom = prior.var[i];
        centered = k[i] - prior.mean[i];
      } else {
        denom = a * a * prior.var[i] + v;
        centered = k[i] - a * prior.mean[i];
      }
      if (!(denom > 0.0)) throw config_error("gaussian_score: singular mode variance");
      k[i] = -centered / denom;
    }
  return ifft2_centered(k);
}

class GaussianPriorScore : public ScoreModel {
 public:
  GaussianPriorScore(GaussianPrior prior, DiffusionSpec spec)
      : prior_(std::move(prior)), spec_(std::move(spec)) {}

  ComplexField evaluate(const ComplexField& x, double t) const override {
    return gaussian_score(prior_, spec_, x, t);
  }

  const GaussianPrior& prior() const { return prior_; }

 private:
  GaussianPrior prior_;
  DiffusionSpec spec_;
};

// Denoising-score-matching objective for one draw: the model is scored on
// x(t) built from (x0, z) and the loss vanishes exactly at the conditional
// score -Fh(z)/sqrt(v). Full-space variants use the unprojected analogue.
inline double dsm_loss(const ScoreModel& model, const ComplexField& x0, double t,
                       const ComplexField& z, const DiffusionSpec& spec) {
  const KernelCoeffs kc = kernel_coeffs(spec, t);
  if (!(kc.var > 0.0))
    throw config_error("dsm_loss: degenerate time (zero perturbation variance)");
  const double sv = std::sqrt(kc.var);
  const ComplexField xt = perturb_given(x0, t, spec, z);
  const ComplexField s = model.evaluate(xt, t);
  if (is_hfs(spec.variant)) {
    ComplexField r = apply_Fh(z, spec.freq_mask);
    add_scaled(r, sv, apply_Fh(s, spec.freq_mask));
    return norm2_sq(r);
  }
  ComplexField r = z;
  add_scaled(r, sv, s);
  return norm2_sq(r);
}

}  // namespace hfsdiff
