#pragma once

#include <atomic>
#include <functional>
#include <iomanip>
#include <sstream>
#include <thread>

#include "hfsdiff/acquisition.hpp"
#include "hfsdiff/io.hpp"
#include "hfsdiff/metrics.hpp"
#include "hfsdiff/sampler.hpp"

namespace hfsdiff {

inline constexpr const char* kToolVersion = "0.1.0";

// Fixed-order parallel map: jobs are indexed 0..n-1 and each writes only its
// own slot, so results are independent of scheduling.
inline void parallel_for(std::size_t jobs, unsigned threads,
                         const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || jobs <= 1) {
    for (std::size_t i = 0; i < jobs; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  const unsigned n = std::min<unsigned>(threads, static_cast<unsigned>(jobs));
  pool.reserve(n);
  for (unsigned w = 0; w < n; ++w)
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= jobs) return;
        fn(i);
      }
    });
  for (auto& th : pool) th.join();
}

// Single-coil (or multi-coil) Gaussian-prior testbed with a known conjugate
// posterior: truth drawn from the prior, data acquired through a uniform
// mask with a little measurement noise.
struct TestbedConfig {
  std::size_t rows = 16, cols = 16;
  std::size_t nl = 4;
  unsigned factor = 2;
  std::size_t acs_lines = 4;
  std::size_t n_coils = 1;
  double noise_std = 0.01;
  std::uint64_t seed = 1234;
  double beta_min = 0.1, beta_max = 20.0;
  double sigma_min = 0.1, sigma_max = 16.0;  // desk-scale VE endpoint
  int schedule_N = 1000;
};

inline void to_json(nlohmann::json& j, const TestbedConfig& c) {
  j = nlohmann::json{{"rows", c.rows},           {"cols", c.cols},
                     {"nl", c.nl},               {"factor", c.factor},
                     {"acs_lines", c.acs_lines}, {"n_coils", c.n_coils},
                     {"noise_std", c.noise_std}, {"seed", c.seed},
                     {"beta_min", c.beta_min},   {"beta_max", c.beta_max},
                     {"sigma_min", c.sigma_min}, {"sigma_max", c.sigma_max},
                     {"schedule_N", c.schedule_N}};
}

inline void from_json(const nlohmann::json& j, TestbedConfig& c) {
  c.rows = j.at("rows").get<std::size_t>();
  c.cols = j.at("cols").get<std::size_t>();
  c.nl = j.at("nl").get<std::size_t>();
  c.factor = j.at("factor").get<unsigned>();
  c.acs_lines = j.at("acs_lines").get<std::size_t>();
  c.n_coils = j.at("n_coils").get<std::size_t>();
  c.noise_std = j.at("noise_std").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.beta_min = j.at("beta_min").get<double>();
  c.beta_max = j.at("beta_max").get<double>();
  c.sigma_min = j.at("sigma_min").get<double>();
  c.sigma_max = j.at("sigma_max").get<double>();
  c.schedule_N = j.at("schedule_N").get<int>();
}

struct Testbed {
  TestbedConfig config;
  GaussianPrior prior;
  ComplexField truth;
  CoilSet csm;
  SamplingMask mu;
  FrequencyMask ml;
  CoilKSpace y;

  DiffusionSpec spec_for(Variant v) const {
    DiffusionSpec spec;
    spec.variant = v;
    spec.schedule.beta_min = config.beta_min;
    spec.schedule.beta_max = config.beta_max;
    spec.schedule.sigma_min = config.sigma_min;
    spec.schedule.sigma_max = config.sigma_max;
    spec.schedule.N = config.schedule_N;
    spec.freq_mask = ml;
    return spec;
  }

  GaussianPriorScore score_for(Variant v) const {
    return GaussianPriorScore(prior, spec_for(v));
  }
};

inline Testbed make_gaussian_testbed(const TestbedConfig& cfg) {
  Testbed tb;
  tb.config = cfg;
  RngStream rng(cfg.seed);
  tb.prior = GaussianPrior::smooth(cfg.rows, cfg.cols, rng);
  tb.truth = tb.prior.sample(rng);
  tb.csm = make_csm(cfg.n_coils, cfg.rows, cfg.cols);
  tb.mu = make_undersampling_mask(MaskKind::uniform, cfg.factor, cfg.acs_lines, cfg.rows, rng,
                                  cfg.cols);
  tb.ml = FrequencyMask::centered(cfg.nl, cfg.rows, cfg.cols);
  tb.y = acquire(tb.truth, tb.csm, tb.mu, cfg.noise_std, rng);
  return tb;
}

// One CSV record of the frozen sweep schema
// variant,steps,seed,nmse,psnr,ssim,wall_ms,agg (aggregate rows carry
// seed = "mean" or "std" and agg = 1; ablation rows prepend an nl column).
struct SweepRow {
  std::string variant;
  int steps = 0;
  std::string seed_label;
  double nmse = std::numeric_limits<double>::quiet_NaN();
  double psnr = std::numeric_limits<double>::quiet_NaN();
  double ssim = std::numeric_limits<double>::quiet_NaN();
  double wall_ms = 0.0;
  int agg = 0;
  long nl = -1;  // >= 0 only for ablation rows
  std::string note;
};

struct SweepConfig {
  std::vector<int> step_counts{50, 100, 200, 300, 400, 500};
  std::vector<Variant> variants{Variant::hfs_vp, Variant::vp};
  int chains = 10;
  std::uint64_t seed_base = 0;
  int M_corr = 1;
  double lambda1 = 1.0, lambda2 = 0.5, snr_r = 0.16;
  bool dc_enabled = true;
  unsigned threads = std::thread::hardware_concurrency();

  void validate() const {
    if (step_counts.empty()) throw config_error("sweep: empty step list");
    for (std::size_t i = 0; i < step_counts.size(); ++i) {
      if (step_counts[i] < 1) throw config_error("sweep: step counts must be >= 1");
      if (i > 0 && step_counts[i] <= step_counts[i - 1])
        throw config_error("sweep: step counts must be strictly increasing");
    }
    if (chains < 1) throw config_error("sweep: chains must be >= 1");
  }
};

namespace detail {

inline void append_aggregates(std::vector<SweepRow>& out, const std::vector<SweepRow>& chunk) {
  if (chunk.empty()) return;
  SweepRow mean = chunk.front(), sd = chunk.front();
  mean.seed_label = "mean";
  sd.seed_label = "std";
  mean.agg = 1;
  sd.agg = 1;
  mean.note.clear();
  sd.note.clear();
  double n = 0, snm = 0, sps = 0, sss = 0, sw = 0;
  for (const auto& r : chunk)
    if (std::isfinite(r.nmse)) {
      ++n;
      snm += r.nmse;
      sps += r.psnr;
      sss += r.ssim;
      sw += r.wall_ms;
    }
  if (n == 0) return;
  mean.nmse = snm / n;
  mean.psnr = sps / n;
  mean.ssim = sss / n;
  mean.wall_ms = sw / n;
  double vnm = 0, vps = 0, vss = 0, vw = 0;
  for (const auto& r : chunk)
    if (std::isfinite(r.nmse)) {
      vnm += (r.nmse - mean.nmse) * (r.nmse - mean.nmse);
      vps += (r.psnr - mean.psnr) * (r.psnr - mean.psnr);
      vss += (r.ssim - mean.ssim) * (r.ssim - mean.ssim);
      vw += (r.wall_ms - mean.wall_ms) * (r.wall_ms - mean.wall_ms);
    }
  sd.nmse = std::sqrt(vnm / n);
  sd.psnr = std::sqrt(vps / n);
  sd.ssim = std::sqrt(vss / n);
  sd.wall_ms = std::sqrt(vw / n);
  out.push_back(mean);
  out.push_back(sd);
}

}  // namespace detail

// Runs `chains` reconstructions per (variant, step count) with the analytic
// prior score and reports per-chain metrics plus mean/std aggregates. Chain
// seeds follow seed_base + running point index; failures are recorded in the
// row's note instead of aborting the sweep.
inline std::vector<SweepRow> convergence_sweep(const Testbed& tb, const SweepConfig& cfg) {
  cfg.validate();
  struct Job {
    Variant variant;
    int steps;
    std::uint64_t seed;
    std::size_t slot;
  };
  std::vector<Job> jobs;
  std::size_t point = 0;
  for (Variant v : cfg.variants)
    for (int steps : cfg.step_counts)
      for (int chain = 0; chain < cfg.chains; ++chain) {
        jobs.push_back({v, steps, cfg.seed_base + point, point});
        ++point;
      }

  std::vector<SweepRow> rows(jobs.size());
  parallel_for(jobs.size(), cfg.threads, [&](std::size_t j) {
    const Job& job = jobs[j];
    SweepRow row;
    row.variant = variant_name(job.variant);
    row.steps = job.steps;
    row.seed_label = std::to_string(job.seed);
    const DiffusionSpec spec = tb.spec_for(job.variant);
    const GaussianPriorScore model(tb.prior, spec);
    SamplerConfig sc;
    sc.N = job.steps;
    sc.M_corr = cfg.M_corr;
    sc.lambda1 = cfg.lambda1;
    sc.lambda2 = cfg.lambda2;
    sc.snr_r = cfg.snr_r;
    sc.dc_enabled = cfg.dc_enabled;
    sc.seed = job.seed;
    sc.trace_enabled = false;
    try {
      const ReconReport rep = reconstruct(tb.y, tb.csm, tb.mu, tb.ml, model, spec, sc);
      const MetricsReport m = compute_metrics(rep.x0, tb.truth);
      row.nmse = m.nmse;
      row.psnr = m.psnr;
      row.ssim = m.ssim;
      row.wall_ms = rep.wall_ms;
    } catch (const error& e) {
      row.note = e.what();
    }
    rows[job.slot] = std::move(row);
  });

  std::vector<SweepRow> out;
  out.reserve(rows.size() + 2 * cfg.variants.size() * cfg.step_counts.size());
  std::size_t idx = 0;
  for (std::size_t v = 0; v < cfg.variants.size(); ++v)
    for (std::size_t s = 0; s < cfg.step_counts.size(); ++s) {
      std::vector<SweepRow> chunk;
      for (int chain = 0; chain < cfg.chains; ++chain) chunk.push_back(rows[idx++]);
      for (auto& r : chunk) out.push_back(r);
      detail::append_aggregates(out, chunk);
    }
  return out;
}

// Metrics per low-band width n_l on the Gaussian testbed. Duplicate entries
// are dropped with a warning; a null model provider marks the row absent.
// The score model changes with n_l because the diffusion mask does.
using NlModelProvider =
    std::function<std::unique_ptr<ScoreModel>(std::size_t nl, const Testbed& tb,
                                              const DiffusionSpec& spec)>;

inline std::vector<SweepRow> ablation_nl(const TestbedConfig& base,
                                         std::vector<std::size_t> nl_values, int steps,
                                         int chains, std::uint64_t seed_base, unsigned threads,
                                         const NlModelProvider& provider = {},
                                         std::ostream* warnings = nullptr) {
  std::vector<std::size_t> unique_nl;
  for (std::size_t nl : nl_values) {
    if (std::find(unique_nl.begin(), unique_nl.end(), nl) != unique_nl.end()) {
      if (warnings) (*warnings) << "ablation_nl: duplicate n_l " << nl << " dropped\n";
      continue;
    }
    unique_nl.push_back(nl);
  }

  std::vector<SweepRow> out;
  std::size_t point = 0;
  for (std::size_t nl : unique_nl) {
    TestbedConfig cfg = base;
    cfg.nl = nl;
    const Testbed tb = make_gaussian_testbed(cfg);
    const DiffusionSpec spec = tb.spec_for(Variant::hfs_vp);
    std::unique_ptr<ScoreModel> model;
    if (provider) {
      model = provider(nl, tb, spec);
    } else {
      model = std::make_unique<GaussianPriorScore>(tb.prior, spec);
    }
    if (!model) {
      SweepRow absent;
      absent.variant = variant_name(Variant::hfs_vp);
      absent.nl = static_cast<long>(nl);
      absent.steps = steps;
      absent.seed_label = "absent";
      absent.note = "no model for this n_l";
      out.push_back(absent);
      point += static_cast<std::size_t>(chains);
      continue;
    }

    std::vector<SweepRow> chunk(static_cast<std::size_t>(chains));
    const std::uint64_t base_seed = seed_base + point;
    parallel_for(chunk.size(), threads, [&](std::size_t c) {
      SweepRow row;
      row.variant = variant_name(Variant::hfs_vp);
      row.nl = static_cast<long>(nl);
      row.steps = steps;
      const std::uint64_t seed = base_seed + c;
      row.seed_label = std::to_string(seed);
      SamplerConfig sc;
      sc.N = steps;
      sc.seed = seed;
      sc.trace_enabled = false;
      try {
        const ReconReport rep =
            reconstruct(tb.y, tb.csm, tb.mu, tb.ml, *model, spec, sc);
        const MetricsReport m = compute_metrics(rep.x0, tb.truth);
        row.nmse = m.nmse;
        row.psnr = m.psnr;
        row.ssim = m.ssim;
        row.wall_ms = rep.wall_ms;
      } catch (const error& e) {
        row.note = e.what();
      }
      chunk[c] = std::move(row);
    });
    point += chunk.size();
    for (const auto& r : chunk) out.push_back(r);
    detail::append_aggregates(out, chunk);  // aggregates inherit the nl tag
  }
  return out;
}

inline std::string csv_escape_note(const std::string& s) {
  std::string out = s;
  for (auto& ch : out)
    if (ch == ',' || ch == '\n') ch = ';';
  return out;
}

inline void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows,
                            bool with_nl_column = false) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write " + path);
  out << (with_nl_column ? "nl,variant,steps,seed,nmse,psnr,ssim,wall_ms,agg,note\n"
                         : "variant,steps,seed,nmse,psnr,ssim,wall_ms,agg,note\n");
  out << std::setprecision(17);
  for (const auto& r : rows) {
    if (with_nl_column) out << r.nl << ",";
    out << r.variant << "," << r.steps << "," << r.seed_label << ",";
    if (std::isfinite(r.nmse))
      out << r.nmse << "," << r.psnr << "," << r.ssim << ",";
    else
      out << ",,,";
    out << r.wall_ms << "," << r.agg << "," << csv_escape_note(r.note) << "\n";
  }
}

// Wall-clock rows plus the ratio against the first run; asserts nothing by
// itself.
struct TimingRow {
  int steps = 0;
  double wall_ms = 0.0;
  double ratio = std::numeric_limits<double>::quiet_NaN();  // wall / wall(first)
};

inline std::vector<TimingRow> timing_report(const std::vector<std::pair<int, double>>& runs) {
  std::vector<TimingRow> rows;
  rows.reserve(runs.size());
  for (std::size_t i = 0; i < runs.size(); ++i) {
    TimingRow r;
    r.steps = runs[i].first;
    r.wall_ms = runs[i].second;
    if (i > 0 && runs.size() >= 2 && runs[0].second > 0.0)
      r.ratio = runs[i].second / runs[0].second;
    rows.push_back(r);
  }
  return rows;
}

inline void write_timing_csv(const std::string& path, const std::vector<TimingRow>& rows) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write " + path);
  out << "steps,wall_ms,ratio\n" << std::setprecision(17);
  for (const auto& r : rows) {
    out << r.steps << "," << r.wall_ms << ",";
    if (std::isfinite(r.ratio)) out << r.ratio;
    out << "\n";
  }
}

// Run manifest: full configuration + seeds + version + file digests, enough
// to re-run the command and compare outputs byte for byte. A directory's
// manifest.json keeps one record per command, so a dataset folder built by
// several subcommands accumulates all of its parameters in one file.
struct RunManifest {
  std::string command;
  nlohmann::json config;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> inputs;   // path -> digest
  std::map<std::string, std::string> outputs;  // path -> digest

  nlohmann::json record() const {
    return nlohmann::json{{"config", config},
                          {"seed", seed},
                          {"inputs", inputs},
                          {"outputs", outputs}};
  }

  static RunManifest from_record(const std::string& command, const nlohmann::json& j) {
    RunManifest m;
    m.command = command;
    m.config = j.at("config");
    m.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("inputs")) m.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
    if (j.contains("outputs"))
      m.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
    return m;
  }
};

inline void add_output_digest(RunManifest& m, const std::string& path) {
  m.outputs[path] = file_digest(path);
}

// Merge this run's record into <dir>/manifest.json under its command name.
inline void write_manifest(const std::string& dir, const RunManifest& m) {
  const std::string path = dir + "/manifest.json";
  nlohmann::json j;
  if (std::filesystem::exists(path)) {
    j = read_json_file(path);
    if (!j.contains("commands") || !j.at("commands").is_object()) j["commands"] = nlohmann::json::object();
  } else {
    j = nlohmann::json{{"commands", nlohmann::json::object()}};
  }
  j["tool"] = "hfsdiff";
  j["version"] = kToolVersion;
  j["commands"][m.command] = m.record();
  write_json_file(path, j);
}

// The stored configuration of one command in a manifest file.
inline nlohmann::json manifest_config(const nlohmann::json& manifest,
                                      const std::string& command) {
  if (manifest.contains("commands") && manifest.at("commands").contains(command))
    return manifest.at("commands").at(command).at("config");
  throw config_error("manifest has no record for subcommand '" + command + "'");
}

}  // namespace hfsdiff
