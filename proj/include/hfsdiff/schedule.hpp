#pragma once

#include <string>

#include "hfsdiff/core.hpp"
#include "hfsdiff/masks.hpp"

#include "json.hpp"

namespace hfsdiff {

enum class Variant { vp, ve, hfs_vp, hfs_ve };

inline bool is_hfs(Variant v) { return v == Variant::hfs_vp || v == Variant::hfs_ve; }
inline bool is_vp_family(Variant v) { return v == Variant::vp || v == Variant::hfs_vp; }

inline std::string variant_name(Variant v) {
  switch (v) {
    case Variant::vp: return "vp";
    case Variant::ve: return "ve";
    case Variant::hfs_vp: return "hfs-vp";
    case Variant::hfs_ve: return "hfs-ve";
  }
  return "?";
}

inline Variant variant_from_name(const std::string& s) {
  if (s == "vp") return Variant::vp;
  if (s == "ve") return Variant::ve;
  if (s == "hfs-vp") return Variant::hfs_vp;
  if (s == "hfs-ve") return Variant::hfs_ve;
  throw config_error("unknown SDE variant '" + s + "'");
}

// Noise schedule. The VP family uses the linear beta(t) = beta_min +
// t*(beta_max - beta_min) on t in [0,1]; the VE family uses the geometric
// sigma(t) = sigma_min * (sigma_max/sigma_min)^t. Discretization follows
// t_i = i/N, beta_i = beta(t_i)/N.
struct BetaSchedule {
  double beta_min = 0.1;
  double beta_max = 20.0;
  double sigma_min = 0.1;
  double sigma_max = 348.0;
  int N = 1000;

  double beta(double t) const { return beta_min + t * (beta_max - beta_min); }

  // int_0^t beta(s) ds
  double beta_integral(double t) const {
    return t * beta_min + 0.5 * t * t * (beta_max - beta_min);
  }

  double discrete_beta(int i, int n) const {
    return beta(static_cast<double>(i) / n) / static_cast<double>(n);
  }

  double sigma(double t) const { return sigma_min * std::pow(sigma_max / sigma_min, t); }
  double sigma_sq(double t) const {
    const double s = sigma(t);
    return s * s;
  }

  void validate(Variant variant) const {
    if (N < 1) throw config_error("schedule: N must be >= 1");
    if (is_vp_family(variant)) {
      if (!(beta_min > 0.0 && beta_min < beta_max))
        throw config_error("schedule: requires 0 < beta_min < beta_max");
      // discrete beta_i = beta(i/N)/N must stay inside (0, 1)
      if (beta(1.0) / N >= 1.0)
        throw config_error("schedule: N too small, discrete beta reaches 1 (need N > beta_max)");
    } else {
      if (!(sigma_min > 0.0 && sigma_min < sigma_max))
        throw config_error("schedule: requires 0 < sigma_min < sigma_max");
    }
  }
};

// Perturbation-kernel coefficients on the diffused subspace: x(t) has
// per-mode mean mean_coeff * x(0) and per-component variance `var` there.
// For HFS variants the undiffused low band is implicitly (a, v) = (1, 0).
struct KernelCoeffs {
  double mean_coeff = 1.0;
  double var = 0.0;
  Variant variant = Variant::vp;
};

// SDE variant + schedule + (for HFS variants) the frequency split.
struct DiffusionSpec {
  Variant variant = Variant::hfs_vp;
  BetaSchedule schedule;
  FrequencyMask freq_mask;  // ignored by full-space variants

  void validate() const {
    schedule.validate(variant);
    if (is_hfs(variant)) {
      if (freq_mask.rows == 0 || freq_mask.cols == 0)
        throw config_error("HFS variant requires a frequency mask");
    }
  }
};

inline KernelCoeffs kernel_coeffs(const DiffusionSpec& spec, double t) {
  if (!(t >= 0.0 && t <= 1.0))
    throw config_error("kernel_coeffs: t outside [0, 1]");
  KernelCoeffs k;
  k.variant = spec.variant;
  if (is_vp_family(spec.variant)) {
    const double half_int = 0.5 * spec.schedule.beta_integral(t);
    k.mean_coeff = std::exp(-half_int);
    k.var = -std::expm1(-2.0 * half_int);  // 1 - e^{-int beta}
  } else {
    k.mean_coeff = 1.0;
    k.var = spec.schedule.sigma_sq(t) - spec.schedule.sigma_sq(0.0);
  }
  return k;
}

inline void to_json(nlohmann::json& j, const DiffusionSpec& spec) {
  j = nlohmann::json{{"variant", variant_name(spec.variant)},
                     {"beta_min", spec.schedule.beta_min},
                     {"beta_max", spec.schedule.beta_max},
                     {"sigma_min", spec.schedule.sigma_min},
                     {"sigma_max", spec.schedule.sigma_max},
                     {"N", spec.schedule.N},
                     {"n_l", spec.freq_mask.nl},
                     {"axis", spec.freq_mask.axis},
                     {"rows", spec.freq_mask.rows},
                     {"cols", spec.freq_mask.cols}};
}

inline void from_json(const nlohmann::json& j, DiffusionSpec& spec) {
  spec.variant = variant_from_name(j.at("variant").get<std::string>());
  spec.schedule.beta_min = j.at("beta_min").get<double>();
  spec.schedule.beta_max = j.at("beta_max").get<double>();
  spec.schedule.sigma_min = j.at("sigma_min").get<double>();
  spec.schedule.sigma_max = j.at("sigma_max").get<double>();
  spec.schedule.N = j.at("N").get<int>();
  const std::size_t rows = j.at("rows").get<std::size_t>();
  const std::size_t cols = j.at("cols").get<std::size_t>();
  spec.freq_mask = FrequencyMask::centered(j.at("n_l").get<std::size_t>(), rows, cols,
                                           j.at("axis").get<int>());
  spec.validate();
}

}  // namespace hfsdiff
