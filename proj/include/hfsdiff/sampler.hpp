#pragma once

#include <chrono>

#include "hfsdiff/score.hpp"

#include "json.hpp"

namespace hfsdiff {

struct SamplerConfig {
  double lambda1 = 1.0;   // predictor data-consistency scale
  double lambda2 = 0.5;   // corrector data-consistency scale (calibrated on the Gaussian testbed)
  double snr_r = 0.16;    // corrector signal-to-noise ratio r
  int N = 1000;           // predictor steps; the sampler re-discretizes t_i = i/N
  int M_corr = 1;         // corrector sub-steps per predictor step
  bool dc_enabled = true;
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;  // substream, for independent parallel chains
  bool trace_enabled = true;
  int snapshot_every = 0;       // 0 disables per-step snapshots
  double norm_floor = 1e-12;    // floor on ||G|| and ||g|| before division

  void validate() const {
    if (lambda1 < 0.0) throw config_error("SamplerConfig: lambda1 must be >= 0");
    if (!(lambda2 > 0.0)) throw config_error("SamplerConfig: lambda2 must be > 0");
    if (!(snr_r > 0.0)) throw config_error("SamplerConfig: snr r must be > 0");
    if (N < 1) throw config_error("SamplerConfig: N must be >= 1");
    if (M_corr < 0) throw config_error("SamplerConfig: M_corr must be >= 0");
  }
};

inline void to_json(nlohmann::json& j, const SamplerConfig& c) {
  j = nlohmann::json{{"lambda1", c.lambda1},   {"lambda2", c.lambda2},
                     {"snr_r", c.snr_r},       {"N", c.N},
                     {"M_corr", c.M_corr},     {"dc_enabled", c.dc_enabled},
                     {"seed", c.seed},         {"stream_id", c.stream_id},
                     {"trace_enabled", c.trace_enabled},
                     {"snapshot_every", c.snapshot_every},
                     {"norm_floor", c.norm_floor}};
}

inline void from_json(const nlohmann::json& j, SamplerConfig& c) {
  c.lambda1 = j.at("lambda1").get<double>();
  c.lambda2 = j.at("lambda2").get<double>();
  c.snr_r = j.at("snr_r").get<double>();
  c.N = j.at("N").get<int>();
  c.M_corr = j.at("M_corr").get<int>();
  c.dc_enabled = j.at("dc_enabled").get<bool>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.stream_id = j.value("stream_id", std::uint64_t(0));
  c.trace_enabled = j.value("trace_enabled", true);
  c.snapshot_every = j.value("snapshot_every", 0);
  c.norm_floor = j.value("norm_floor", 1e-12);
  c.validate();
}

struct SamplerState {
  ComplexField x;
  int i = 0;  // index of the current iterate x_i; runs from N down to 0
  int k = 0;  // corrector sub-step index within the current i
  RngStream rng;
  int floor_warnings = 0;  // times ||g|| hit the norm floor in a corrector
};

struct TraceRow {
  int i = 0;
  int k = 0;  // 0 for the predictor, 1..M for correctors
  double norm_g = 0.0;
  double norm_G = 0.0;
  double nmse = std::numeric_limits<double>::quiet_NaN();
};

struct ReconReport {
  ComplexField x0;
  std::vector<TraceRow> trace;
  double wall_ms = 0.0;
  SamplerConfig config;
  int floor_warnings = 0;
  std::vector<std::pair<int, ComplexField>> snapshots;
};

// Divergence detected mid-run; carries whatever the chain produced so far.
struct recon_divergence_error : divergence_error {
  recon_divergence_error(const std::string& msg, int step, ReconReport partial_report)
      : divergence_error(msg, step), partial(std::move(partial_report)) {}
  ReconReport partial;
};

// Coil-combined zero-filled low-frequency image sum_j csm_j^* F^-1(M_l y_j):
// the mean of the HFS initialization law, exposed separately so tests can
// suppress the noise draw.
inline ComplexField init_low_freq_image(const CoilKSpace& y, const CoilSet& csm,
                                        const FrequencyMask& m) {
  csm.check_consistent();
  if (y.size() != csm.count()) throw dimension_error("init: coil count mismatch");
  ComplexField acc(csm.rows(), csm.cols(), Domain::image);
  for (std::size_t j = 0; j < y.size(); ++j) {
    m.check_shape(y[j]);
    ComplexField k(y[j].rows(), y[j].cols(), Domain::kspace);
    for (std::size_t c = 0; c < k.cols(); ++c)
      for (std::size_t r = 0; r < k.rows(); ++r)
        if (m.is_low_line(m.axis == 0 ? r : c)) k(r, c) = y[j](r, c);
    const ComplexField img = ifft2_centered(k);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += std::conj(csm.maps[j][i]) * img[i];
  }
  return acc;
}

// x_N ~ N(F^-1(M_l y), F_h) for HFS variants: low band pinned to the acquired
// data, unit-variance noise on the high band. Full-space variants start from
// their terminal law: z for VP, sigma_max * z for VE. With n_l = 0 the HFS
// initialization degenerates bit-for-bit to the VP one (zero mean, identity
// projection).
inline SamplerState init_state(const CoilKSpace& y, const CoilSet& csm, const FrequencyMask& m,
                               const DiffusionSpec& spec, const SamplerConfig& cfg) {
  SamplerState st;
  st.rng = RngStream(cfg.seed, cfg.stream_id);
  st.i = cfg.N;
  st.k = 0;
  if (is_hfs(spec.variant)) {
    if (!m.empty_low()) {
      double low_energy = 0.0;
      for (const auto& yj : y)
        for (std::size_t c = 0; c < yj.cols(); ++c)
          for (std::size_t r = 0; r < yj.rows(); ++r)
            if (m.is_low_line(m.axis == 0 ? r : c)) low_energy += std::norm(yj(r, c));
      if (low_energy == 0.0)
        throw config_error("init_state: low-frequency region of y is empty");
    }
    ComplexField x = init_low_freq_image(y, csm, m);
    const ComplexField z = st.rng.normal_field(x.rows(), x.cols(), Domain::image);
    x += apply_Fh(z, m);
    st.x = std::move(x);
  } else {
    ComplexField z = st.rng.normal_field(csm.rows(), csm.cols(), Domain::image);
    if (!is_vp_family(spec.variant)) z *= spec.schedule.sigma_max;
    st.x = std::move(z);
  }
  return st;
}

namespace detail {

// G = sum_j csm_j^* F^-1( F(csm_j x) . M_u - y_j ), the gradient of the data
// term 0.5 ||A x - y||^2 when y is zero off-mask.
inline ComplexField dc_gradient(const ComplexField& x, const CoilKSpace& y, const CoilSet& csm,
                                const SamplingMask& mu) {
  ComplexField acc(x.rows(), x.cols(), Domain::image);
  for (std::size_t j = 0; j < csm.count(); ++j) {
    ComplexField w(x.rows(), x.cols(), Domain::image);
    for (std::size_t i = 0; i < x.size(); ++i) w[i] = csm.maps[j][i] * x[i];
    ComplexField k = fft2_centered(w);
    for (std::size_t c = 0; c < k.cols(); ++c)
      for (std::size_t r = 0; r < k.rows(); ++r) {
        const cdouble masked = mu.is_sampled(r, c) ? k(r, c) : cdouble(0.0, 0.0);
        k(r, c) = masked - y[j](r, c);
      }
    const ComplexField img = ifft2_centered(k);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += std::conj(csm.maps[j][i]) * img[i];
  }
  return acc;
}

inline ComplexField project(const ComplexField& f, const DiffusionSpec& spec) {
  return is_hfs(spec.variant) ? apply_Fh(f, spec.freq_mask) : f;
}

}  // namespace detail

struct StepInfo {
  double norm_g = 0.0;
  double norm_G = 0.0;
};

// One reverse step x_{i+1} -> x_i (Alg. lines 3-7). VP family:
//   x_i = x_{i+1} + 1/2 beta_{i+1} P(x_{i+1}) + beta_{i+1} (g - eps G)
//         + sqrt(beta_{i+1}) P(z),
// with g = P(s_theta(x_{i+1}, t_{i+1})), eps = lambda1 ||g||/||G|| and P the
// high-band projection (identity for full-space variants). The VE family
// replaces the drift/noise coefficients with dsigma^2 = sigma^2(t_{i+1}) -
// sigma^2(t_i) and sqrt(dsigma^2). The schedule is re-discretized on the
// sampler's own grid, beta_i = beta(i/N)/N.
inline StepInfo predictor_step(SamplerState& state, const CoilKSpace& y, const CoilSet& csm,
                               const SamplingMask& mu, const ScoreModel& model,
                               const DiffusionSpec& spec, const SamplerConfig& cfg) {
  if (state.i < 1) throw config_error("predictor_step: no steps left");
  const int i = state.i - 1;
  const int n = cfg.N;
  const double t_next = static_cast<double>(i + 1) / n;

  const ComplexField z = state.rng.normal_field(state.x.rows(), state.x.cols(), Domain::image);
  const ComplexField s = model.evaluate(state.x, t_next);
  const ComplexField g = detail::project(s, spec);
  const ComplexField G = detail::dc_gradient(state.x, y, csm, mu);

  StepInfo info;
  info.norm_g = norm2(g);
  info.norm_G = norm2(G);
  const double eps = (cfg.dc_enabled && info.norm_G > cfg.norm_floor)
                         ? cfg.lambda1 * info.norm_g / info.norm_G
                         : 0.0;

  double drift_coeff, score_coeff, noise_std;
  if (is_vp_family(spec.variant)) {
    const double beta = spec.schedule.beta(t_next) / n;
    drift_coeff = 0.5 * beta;
    score_coeff = beta;
    noise_std = std::sqrt(beta);
  } else {
    const double t_cur = static_cast<double>(i) / n;
    const double ds2 = spec.schedule.sigma_sq(t_next) - spec.schedule.sigma_sq(t_cur);
    drift_coeff = 0.0;
    score_coeff = ds2;
    noise_std = std::sqrt(ds2);
  }

  ComplexField xn = state.x;
  if (drift_coeff != 0.0) add_scaled(xn, drift_coeff, detail::project(state.x, spec));
  add_scaled(xn, score_coeff, g);
  if (eps != 0.0) add_scaled(xn, -score_coeff * eps, G);
  add_scaled(xn, noise_std, detail::project(z, spec));

  if (!all_finite(xn)) throw divergence_error("predictor diverged", i);
  state.x = std::move(xn);
  state.i = i;
  state.k = 0;
  return info;
}

// One annealed-Langevin corrector sub-step at index i (Alg. lines 9-14):
//   eps1 = 2 alpha_i (r ||z|| / ||g||)^2, eps2 = ||g|| / (lambda2 ||G||),
//   x <- x + eps1 (g - eps2 G) + sqrt(2 eps1) P(z),
// with alpha_i = 1 - beta_i for the VP family and 1 for the VE family. A
// vanishing ||g|| is clamped to the norm floor and recorded as a warning.
inline StepInfo corrector_step(SamplerState& state, const CoilKSpace& y, const CoilSet& csm,
                               const SamplingMask& mu, const ScoreModel& model,
                               const DiffusionSpec& spec, const SamplerConfig& cfg) {
  const int i = state.i;
  const int n = cfg.N;
  const double t_i = static_cast<double>(i) / n;
  const double alpha =
      is_vp_family(spec.variant) ? 1.0 - spec.schedule.beta(t_i) / n : 1.0;

  const ComplexField z = state.rng.normal_field(state.x.rows(), state.x.cols(), Domain::image);
  const ComplexField s = model.evaluate(state.x, t_i);
  const ComplexField g = detail::project(s, spec);
  const ComplexField G = detail::dc_gradient(state.x, y, csm, mu);

  StepInfo info;
  info.norm_g = norm2(g);
  info.norm_G = norm2(G);
  double ng = info.norm_g;
  if (ng < cfg.norm_floor) {
    ng = cfg.norm_floor;
    ++state.floor_warnings;
  }
  const double ratio = cfg.snr_r * norm2(z) / ng;
  const double eps1 = 2.0 * alpha * ratio * ratio;
  const double eps2 = (cfg.dc_enabled && info.norm_G > cfg.norm_floor)
                          ? info.norm_g / (cfg.lambda2 * info.norm_G)
                          : 0.0;

  ComplexField xn = state.x;
  add_scaled(xn, eps1, g);
  if (eps2 != 0.0) add_scaled(xn, -eps1 * eps2, G);
  add_scaled(xn, std::sqrt(2.0 * eps1), detail::project(z, spec));

  if (!all_finite(xn)) throw divergence_error("corrector diverged", i);
  state.x = std::move(xn);
  state.k += 1;
  return info;
}

// Full Alg. 1 run: init, then for i = N-1 .. 0 one predictor followed by
// M_corr correctors. Deterministic given inputs and (seed, stream_id).
inline ReconReport reconstruct(const CoilKSpace& y, const CoilSet& csm, const SamplingMask& mu,
                               const FrequencyMask& m, const ScoreModel& model,
                               const DiffusionSpec& spec, const SamplerConfig& cfg,
                               const ComplexField* reference = nullptr) {
  cfg.validate();
  if (cfg.N > spec.schedule.N)
    throw config_error("reconstruct: sampler N exceeds the schedule's N");
  if (is_vp_family(spec.variant) && spec.schedule.beta(1.0) / cfg.N >= 1.0)
    throw config_error(
        "reconstruct: sampler N too small for the schedule (discrete beta reaches 1)");

  const auto t_start = std::chrono::steady_clock::now();
  ReconReport report;
  report.config = cfg;
  if (cfg.trace_enabled)
    report.trace.reserve(static_cast<std::size_t>(cfg.N) * (1 + cfg.M_corr));

  SamplerState state = init_state(y, csm, m, spec, cfg);
  auto record = [&](int i, int k, const StepInfo& info) {
    if (!cfg.trace_enabled) return;
    TraceRow row;
    row.i = i;
    row.k = k;
    row.norm_g = info.norm_g;
    row.norm_G = info.norm_G;
    if (reference) {
      ComplexField diff = state.x;
      diff -= *reference;
      row.nmse = norm2_sq(diff) / norm2_sq(*reference);
    }
    report.trace.push_back(row);
  };

  try {
    while (state.i > 0) {
      const StepInfo p = predictor_step(state, y, csm, mu, model, spec, cfg);
      record(state.i, 0, p);
      for (int k = 1; k <= cfg.M_corr; ++k) {
        const StepInfo c = corrector_step(state, y, csm, mu, model, spec, cfg);
        record(state.i, k, c);
      }
      if (cfg.snapshot_every > 0 && state.i % cfg.snapshot_every == 0)
        report.snapshots.emplace_back(state.i, state.x);
    }
  } catch (const divergence_error& e) {
    report.x0 = state.x;
    report.floor_warnings = state.floor_warnings;
    report.wall_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - t_start)
                         .count();
    throw recon_divergence_error(e.what(), e.step_index, std::move(report));
  }

  report.x0 = state.x;
  report.floor_warnings = state.floor_warnings;
  report.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t_start)
          .count();
  return report;
}

}  // namespace hfsdiff
