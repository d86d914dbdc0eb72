// hfsdiff: generate phantoms, coil maps and undersampling masks, simulate
// acquisitions, train the toy denoiser, run predictor-corrector
// reconstructions and the benchmark harnesses. Every run writes
// manifest.json with its full configuration, seeds and file digests; passing
// --config manifest.json re-executes the run with identical parameters.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical divergence,
// 4 I/O error.

#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "hfsdiff/hfsdiff.hpp"

namespace fs = std::filesystem;
using namespace hfsdiff;
using nlohmann::json;

namespace {

void ensure_out_dir(const std::string& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw io_error("cannot create output directory " + out);
}

// Re-run support: if --config was given, replace the flag-built config with
// the one stored for this subcommand.
json effective_config(const std::string& config_path, const std::string& command,
                      json from_flags) {
  if (config_path.empty()) return from_flags;
  return manifest_config(read_json_file(config_path), command);
}

SamplingMask mask_from_field(const ComplexField& f, int axis, double factor,
                             std::size_t acs_lines) {
  SamplingMask m;
  m.axis = axis;
  m.rows = f.rows();
  m.cols = f.cols();
  m.nominal_factor = factor;
  m.acs_lines = acs_lines;
  const std::size_t n = axis == 0 ? f.rows() : f.cols();
  m.line_sampled.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const cdouble v = axis == 0 ? f(i, 0) : f(0, i);
    m.line_sampled[i] = std::abs(v) > 0.5 ? 1 : 0;
  }
  return m;
}

struct DatasetPaths {
  std::string phantom, csm, mask, y, manifest;
};

DatasetPaths dataset_paths(const std::string& dir) {
  return {dir + "/phantom", dir + "/csm", dir + "/mask", dir + "/y", dir + "/manifest.json"};
}

int cmd_phantom(const std::string& config_path, json cfg, const std::string& out) {
  cfg = effective_config(config_path, "phantom", std::move(cfg));
  ensure_out_dir(out);
  RngStream rng(cfg.at("seed").get<std::uint64_t>());
  const Phantom p =
      make_phantom(phantom_kind_from_name(cfg.at("kind").get<std::string>()),
                   cfg.at("rows").get<std::size_t>(), cfg.at("cols").get<std::size_t>(), rng,
                   cfg.at("nl").get<std::size_t>());
  write_cfl(out + "/phantom", p.image);
  const auto [lo, hi] = write_pgm16(out + "/phantom.pgm", p.image);

  RunManifest m;
  m.command = "phantom";
  cfg["norm_std"] = p.norm_std;
  cfg["pgm_min"] = lo;
  cfg["pgm_max"] = hi;
  m.config = cfg;
  m.seed = cfg.at("seed").get<std::uint64_t>();
  add_output_digest(m, out + "/phantom.cfl");
  add_output_digest(m, out + "/phantom.hdr");
  write_manifest(out, m);
  std::cout << "phantom " << p.image.rows() << "x" << p.image.cols() << " kind "
            << cfg.at("kind").get<std::string>() << " written to " << out << "\n";
  return 0;
}

int cmd_csm(const std::string& config_path, json cfg, const std::string& out) {
  cfg = effective_config(config_path, "csm", std::move(cfg));
  ensure_out_dir(out);
  const CoilSet csm = make_csm(cfg.at("coils").get<std::size_t>(),
                               cfg.at("rows").get<std::size_t>(),
                               cfg.at("cols").get<std::size_t>());
  write_cfl(out + "/csm", csm.maps);
  RunManifest m;
  m.command = "csm";
  m.config = cfg;
  add_output_digest(m, out + "/csm.cfl");
  add_output_digest(m, out + "/csm.hdr");
  write_manifest(out, m);
  std::cout << "csm: " << csm.count() << " coils, SOS deviation "
            << csm.sos_max_deviation() << "\n";
  return 0;
}

int cmd_mask(const std::string& config_path, json cfg, const std::string& out) {
  cfg = effective_config(config_path, "mask", std::move(cfg));
  ensure_out_dir(out);
  RngStream rng(cfg.at("seed").get<std::uint64_t>());
  const SamplingMask mask = make_undersampling_mask(
      mask_kind_from_name(cfg.at("kind").get<std::string>()), cfg.at("factor").get<unsigned>(),
      cfg.at("acs").get<std::size_t>(), cfg.at("lines").get<std::size_t>(), rng,
      cfg.at("cols").get<std::size_t>());
  write_cfl(out + "/mask", mask.to_field());

  RunManifest m;
  m.command = "mask";
  cfg["sampled_lines"] = mask.sampled_count();
  cfg["acceleration"] = mask.acceleration();
  m.config = cfg;
  m.seed = cfg.at("seed").get<std::uint64_t>();
  add_output_digest(m, out + "/mask.cfl");
  add_output_digest(m, out + "/mask.hdr");
  write_manifest(out, m);
  std::cout << "mask: " << mask.sampled_count() << "/" << mask.total_lines()
            << " lines sampled, nominal factor " << cfg.at("factor").get<unsigned>()
            << ", measured acceleration " << mask.acceleration() << "\n";
  return 0;
}

int cmd_acquire(const std::string& config_path, json cfg, const std::string& out) {
  cfg = effective_config(config_path, "acquire", std::move(cfg));
  ensure_out_dir(out);
  const std::string phantom_base = cfg.at("phantom").get<std::string>();
  const std::string csm_base = cfg.at("csm").get<std::string>();
  const std::string mask_base = cfg.at("mask").get<std::string>();

  const ComplexField x = read_cfl_one(phantom_base, Domain::image);
  CoilSet csm;
  csm.maps = read_cfl(csm_base, Domain::image);
  const ComplexField mask_field = read_cfl_one(mask_base, Domain::kspace);
  const SamplingMask mu =
      mask_from_field(mask_field, cfg.at("axis").get<int>(), cfg.at("factor").get<double>(),
                      cfg.at("acs").get<std::size_t>());

  RngStream rng(cfg.at("seed").get<std::uint64_t>());
  const CoilKSpace y = acquire(x, csm, mu, cfg.at("noise").get<double>(), rng);
  write_cfl(out + "/y", y);

  RunManifest m;
  m.command = "acquire";
  m.config = cfg;
  m.seed = cfg.at("seed").get<std::uint64_t>();
  m.inputs[phantom_base + ".cfl"] = file_digest(phantom_base + ".cfl");
  m.inputs[csm_base + ".cfl"] = file_digest(csm_base + ".cfl");
  m.inputs[mask_base + ".cfl"] = file_digest(mask_base + ".cfl");
  add_output_digest(m, out + "/y.cfl");
  add_output_digest(m, out + "/y.hdr");
  write_manifest(out, m);
  std::cout << "acquired " << y.size() << "-coil k-space, noise std "
            << cfg.at("noise").get<double>() << "\n";
  return 0;
}

DiffusionSpec spec_from_cfg(const json& cfg, std::size_t rows, std::size_t cols) {
  DiffusionSpec spec;
  spec.variant = variant_from_name(cfg.at("variant").get<std::string>());
  spec.schedule.beta_min = cfg.at("beta_min").get<double>();
  spec.schedule.beta_max = cfg.at("beta_max").get<double>();
  spec.schedule.sigma_min = cfg.at("sigma_min").get<double>();
  spec.schedule.sigma_max = cfg.at("sigma_max").get<double>();
  spec.schedule.N = cfg.at("schedule_N").get<int>();
  spec.freq_mask = FrequencyMask::centered(cfg.at("nl").get<std::size_t>(), rows, cols,
                                           cfg.at("axis").get<int>());
  spec.validate();
  return spec;
}

int cmd_train(const std::string& config_path, json cfg, const std::string& out) {
  cfg = effective_config(config_path, "train", std::move(cfg));
  ensure_out_dir(out);
  const std::size_t rows = cfg.at("rows").get<std::size_t>();
  const std::size_t cols = cfg.at("cols").get<std::size_t>();
  const DiffusionSpec spec = spec_from_cfg(cfg, rows, cols);

  RngStream data_rng(cfg.at("seed").get<std::uint64_t>(), 1);
  std::vector<ComplexField> dataset;
  const std::size_t count = cfg.at("count").get<std::size_t>();
  const PhantomKind kind = phantom_kind_from_name(cfg.at("kind").get<std::string>());
  for (std::size_t i = 0; i < count; ++i)
    dataset.push_back(make_phantom(kind, rows, cols, data_rng).image);

  TrainConfig tc;
  tc.learning_rate = cfg.at("lr").get<double>();
  tc.iterations = cfg.at("iters").get<int>();
  tc.batch_size = cfg.at("batch").get<int>();
  tc.ema_rate = cfg.at("ema").get<double>();
  tc.seed = cfg.at("seed").get<std::uint64_t>();
  tc.arch.hidden = cfg.at("hidden").get<int>();

  const TrainResult result = train_denoiser(dataset, spec, tc);
  save_checkpoint(out + "/model", result.model, spec, tc.ema_rate, tc.seed);
  {
    std::ofstream loss(out + "/loss.csv");
    loss << "iter,loss\n" << std::setprecision(17);
    for (std::size_t i = 0; i < result.loss_history.size(); ++i)
      loss << i + 1 << "," << result.loss_history[i] << "\n";
  }

  double head = 0, tail = 0;
  const std::size_t window = std::min<std::size_t>(100, result.loss_history.size());
  for (std::size_t i = 0; i < window; ++i) {
    head += result.loss_history[i];
    tail += result.loss_history[result.loss_history.size() - 1 - i];
  }
  RunManifest m;
  m.command = "train";
  m.config = cfg;
  m.seed = tc.seed;
  add_output_digest(m, out + "/model.json");
  add_output_digest(m, out + "/model.bin");
  add_output_digest(m, out + "/loss.csv");
  write_manifest(out, m);
  std::cout << "trained " << result.model.param_count() << " parameters, running loss "
            << head / window << " -> " << tail / window << "\n";
  return 0;
}

int cmd_reconstruct(const std::string& config_path, json cfg, const std::string& out) {
  cfg = effective_config(config_path, "reconstruct", std::move(cfg));
  ensure_out_dir(out);
  const std::string data = cfg.at("data").get<std::string>();
  const DatasetPaths paths = dataset_paths(data);

  CoilKSpace y;
  for (auto& f : read_cfl(paths.y, Domain::kspace)) y.push_back(std::move(f));
  CoilSet csm;
  csm.maps = read_cfl(paths.csm, Domain::image);
  const ComplexField mask_field = read_cfl_one(paths.mask, Domain::kspace);
  const int axis = cfg.at("axis").get<int>();
  const SamplingMask mu = mask_from_field(mask_field, axis, 0.0, 0);

  std::unique_ptr<ScoreModel> model;
  DiffusionSpec spec;
  const std::string model_path = cfg.value("model", std::string());
  const std::string prior_dir = cfg.value("prior", std::string());
  if (!model_path.empty()) {
    Checkpoint ck = load_checkpoint(model_path);
    spec = ck.spec;
    if (spec.freq_mask.rows != csm.rows() || spec.freq_mask.cols != csm.cols())
      throw config_error("checkpoint was trained on a different grid size");
    model = std::make_unique<DenoiserScore>(std::move(ck.net), spec);
  } else if (!prior_dir.empty()) {
    spec = spec_from_cfg(cfg, csm.rows(), csm.cols());
    GaussianPrior prior;
    prior.mean = read_cfl_one(prior_dir + "/prior_mean", Domain::kspace);
    const ComplexField var_field = read_cfl_one(prior_dir + "/prior_var", Domain::kspace);
    prior.var.resize(var_field.size());
    for (std::size_t i = 0; i < var_field.size(); ++i) prior.var[i] = var_field[i].real();
    prior.validate();
    model = std::make_unique<GaussianPriorScore>(std::move(prior), spec);
  } else {
    throw config_error("reconstruct needs --model or --prior");
  }

  SamplerConfig sc;
  sc.lambda1 = cfg.at("lambda1").get<double>();
  sc.lambda2 = cfg.at("lambda2").get<double>();
  sc.snr_r = cfg.at("snr_r").get<double>();
  sc.N = cfg.at("steps").get<int>();
  sc.M_corr = cfg.at("correctors").get<int>();
  sc.dc_enabled = !cfg.at("no_dc").get<bool>();
  sc.seed = cfg.at("seed").get<std::uint64_t>();
  sc.snapshot_every = cfg.at("snapshot_every").get<int>();

  ComplexField reference;
  bool have_ref = false;
  if (fs::exists(paths.phantom + ".cfl")) {
    reference = read_cfl_one(paths.phantom, Domain::image);
    have_ref = true;
  }

  const ReconReport rep = reconstruct(y, csm, mu, spec.freq_mask, *model, spec, sc,
                                      have_ref ? &reference : nullptr);
  write_cfl(out + "/recon", rep.x0);
  const auto [lo, hi] = write_pgm16(out + "/recon.pgm", rep.x0);
  {
    std::ofstream trace(out + "/trace.csv");
    trace << "i,k,norm_g,norm_G,nmse\n" << std::setprecision(17);
    for (const auto& row : rep.trace) {
      trace << row.i << "," << row.k << "," << row.norm_g << "," << row.norm_G << ",";
      if (std::isfinite(row.nmse)) trace << row.nmse;
      trace << "\n";
    }
  }
  RunManifest m;
  m.command = "reconstruct";
  cfg["pgm_min"] = lo;
  cfg["pgm_max"] = hi;
  cfg["wall_ms"] = rep.wall_ms;
  cfg["floor_warnings"] = rep.floor_warnings;
  m.config = cfg;
  m.seed = sc.seed;
  m.inputs[paths.y + ".cfl"] = file_digest(paths.y + ".cfl");
  m.inputs[paths.csm + ".cfl"] = file_digest(paths.csm + ".cfl");
  m.inputs[paths.mask + ".cfl"] = file_digest(paths.mask + ".cfl");
  add_output_digest(m, out + "/recon.cfl");
  for (const auto& [step, snap] : rep.snapshots) {
    const std::string base = out + "/snapshot_" + std::to_string(step);
    write_cfl(base, snap);
    add_output_digest(m, base + ".cfl");
  }
  write_manifest(out, m);

  std::cout << "reconstructed in " << rep.wall_ms << " ms";
  if (have_ref) {
    const MetricsReport met = compute_metrics(rep.x0, reference);
    std::cout << ", nmse " << met.nmse << ", psnr " << met.psnr << " dB, ssim " << met.ssim;
  }
  std::cout << "\n";
  return 0;
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::istringstream in(s);
  std::string tok;
  while (std::getline(in, tok, ',')) out.push_back(std::stoi(tok));
  return out;
}

TestbedConfig testbed_from_cfg(const json& cfg) {
  TestbedConfig tc;
  tc.rows = cfg.at("rows").get<std::size_t>();
  tc.cols = cfg.at("cols").get<std::size_t>();
  tc.nl = cfg.value("nl", std::size_t(0));  // ablate-nl sweeps it per point
  tc.factor = cfg.at("factor").get<unsigned>();
  tc.acs_lines = cfg.at("acs").get<std::size_t>();
  tc.n_coils = cfg.at("coils").get<std::size_t>();
  tc.noise_std = cfg.at("noise").get<double>();
  tc.seed = cfg.at("testbed_seed").get<std::uint64_t>();
  return tc;
}

int cmd_sweep(const std::string& config_path, json cfg, const std::string& out) {
  cfg = effective_config(config_path, "sweep", std::move(cfg));
  ensure_out_dir(out);
  const Testbed tb = make_gaussian_testbed(testbed_from_cfg(cfg));

  SweepConfig sc;
  sc.step_counts = cfg.at("steps_list").get<std::vector<int>>();
  sc.variants.clear();
  for (const auto& v : cfg.at("variants").get<std::vector<std::string>>())
    sc.variants.push_back(variant_from_name(v));
  sc.chains = cfg.at("chains").get<int>();
  sc.seed_base = cfg.at("seed").get<std::uint64_t>();
  sc.M_corr = cfg.at("correctors").get<int>();
  sc.lambda1 = cfg.at("lambda1").get<double>();
  sc.lambda2 = cfg.at("lambda2").get<double>();
  sc.snr_r = cfg.at("snr_r").get<double>();
  sc.dc_enabled = !cfg.at("no_dc").get<bool>();
  sc.threads = cfg.at("threads").get<unsigned>();

  const auto rows = convergence_sweep(tb, sc);
  write_sweep_csv(out + "/sweep.csv", rows);

  RunManifest m;
  m.command = "sweep";
  m.config = cfg;
  m.seed = sc.seed_base;
  add_output_digest(m, out + "/sweep.csv");
  write_manifest(out, m);

  for (const auto& r : rows)
    if (r.agg == 1 && r.seed_label == "mean")
      std::cout << r.variant << " N=" << r.steps << ": mean nmse " << r.nmse << ", psnr "
                << r.psnr << "\n";
  return 0;
}

int cmd_ablate_nl(const std::string& config_path, json cfg, const std::string& out) {
  cfg = effective_config(config_path, "ablate-nl", std::move(cfg));
  ensure_out_dir(out);
  const TestbedConfig base = testbed_from_cfg(cfg);
  std::vector<std::size_t> nls;
  for (int v : cfg.at("nl_list").get<std::vector<int>>())
    nls.push_back(static_cast<std::size_t>(v));

  NlModelProvider provider;
  const std::string models_dir = cfg.value("models_dir", std::string());
  if (!models_dir.empty()) {
    provider = [&models_dir](std::size_t nl, const Testbed&, const DiffusionSpec&)
        -> std::unique_ptr<ScoreModel> {
      const std::string path = models_dir + "/model_nl" + std::to_string(nl) + ".json";
      if (!fs::exists(path)) return nullptr;
      Checkpoint ck = load_checkpoint(path);
      return std::make_unique<DenoiserScore>(std::move(ck.net), ck.spec);
    };
  }

  const auto rows =
      ablation_nl(base, nls, cfg.at("steps").get<int>(), cfg.at("chains").get<int>(),
                  cfg.at("seed").get<std::uint64_t>(), cfg.at("threads").get<unsigned>(),
                  provider, &std::cerr);
  write_sweep_csv(out + "/ablate_nl.csv", rows, true);

  RunManifest m;
  m.command = "ablate-nl";
  m.config = cfg;
  m.seed = cfg.at("seed").get<std::uint64_t>();
  add_output_digest(m, out + "/ablate_nl.csv");
  write_manifest(out, m);

  for (const auto& r : rows)
    if (r.agg == 1 && r.seed_label == "mean")
      std::cout << "n_l=" << r.nl << ": mean nmse " << r.nmse << "\n";
  return 0;
}

int cmd_metrics(const std::string& config_path, json cfg, const std::string& out) {
  cfg = effective_config(config_path, "metrics", std::move(cfg));
  ensure_out_dir(out);
  const std::string ref_base = cfg.at("ref").get<std::string>();
  const std::string in_base = cfg.at("in").get<std::string>();
  const ComplexField ref = read_cfl_one(ref_base, Domain::image);
  const ComplexField x = read_cfl_one(in_base, Domain::image);
  const MetricsReport met = compute_metrics(x, ref);

  write_json_file(out + "/metrics.json",
                  json{{"nmse", met.nmse}, {"psnr", met.psnr}, {"ssim", met.ssim}});
  RunManifest m;
  m.command = "metrics";
  m.config = cfg;
  m.inputs[ref_base + ".cfl"] = file_digest(ref_base + ".cfl");
  m.inputs[in_base + ".cfl"] = file_digest(in_base + ".cfl");
  add_output_digest(m, out + "/metrics.json");
  write_manifest(out, m);
  std::cout << "nmse " << met.nmse << ", psnr " << met.psnr << " dB, ssim " << met.ssim << "\n";
  return 0;
}

int cmd_timing(const std::string& config_path, json cfg, const std::string& out) {
  cfg = effective_config(config_path, "timing", std::move(cfg));
  ensure_out_dir(out);
  const Testbed tb = make_gaussian_testbed(testbed_from_cfg(cfg));
  const DiffusionSpec spec = tb.spec_for(Variant::hfs_vp);
  const GaussianPriorScore model(tb.prior, spec);

  std::vector<std::pair<int, double>> runs;
  for (int steps : cfg.at("steps_list").get<std::vector<int>>()) {
    SamplerConfig sc;
    sc.N = steps;
    sc.M_corr = cfg.at("correctors").get<int>();
    sc.seed = cfg.at("seed").get<std::uint64_t>();
    sc.trace_enabled = false;
    const ReconReport rep = reconstruct(tb.y, tb.csm, tb.mu, tb.ml, model, spec, sc);
    runs.emplace_back(steps, rep.wall_ms);
  }
  const auto rows = timing_report(runs);
  write_timing_csv(out + "/timing.csv", rows);

  RunManifest m;
  m.command = "timing";
  m.config = cfg;
  m.seed = cfg.at("seed").get<std::uint64_t>();
  add_output_digest(m, out + "/timing.csv");
  write_manifest(out, m);

  for (const auto& r : rows) {
    std::cout << "N=" << r.steps << ": " << r.wall_ms << " ms";
    if (std::isfinite(r.ratio)) std::cout << " (x" << r.ratio << " vs first)";
    std::cout << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"High-frequency-subspace diffusion reconstruction toolkit"};
  app.require_subcommand(1);

  // common option storage
  std::string config_path, out = "out";
  std::uint64_t seed = 0;
  std::string variant = "hfs-vp";
  int steps = 1000, correctors = 1;
  std::size_t nl = 16;
  unsigned factor = 10;
  std::size_t acs = 24;
  double lambda1 = 1.0, lambda2 = 0.5, snr_r = 0.16;
  bool no_dc = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "manifest.json of a previous run to replay");
    sub->add_option("--seed", seed, "random seed");
    sub->add_option("--out", out, "output directory");
  };

  // phantom
  auto* sp = app.add_subcommand("phantom", "generate a ground-truth phantom");
  std::string kind = "shepp_logan";
  std::size_t rows = 64, cols = 64, ph_nl = 0;
  add_common(sp);
  sp->add_option("--kind", kind, "shepp_logan|gaussian_blobs|lowfreq_only|flat_regions");
  sp->add_option("--rows", rows);
  sp->add_option("--cols", cols);
  sp->add_option("--nl", ph_nl, "low band width for lowfreq_only (0 = rows/4)");

  // csm
  auto* sc_cmd = app.add_subcommand("csm", "generate SOS-normalized coil maps");
  std::size_t coils = 4;
  add_common(sc_cmd);
  sc_cmd->add_option("--coils", coils);
  sc_cmd->add_option("--rows", rows);
  sc_cmd->add_option("--cols", cols);

  // mask
  auto* sm = app.add_subcommand("mask", "generate an undersampling mask");
  std::string mask_kind = "uniform";
  std::size_t lines = 320;
  add_common(sm);
  sm->add_option("--kind", mask_kind, "uniform|gaussian_density");
  sm->add_option("--factor", factor, "nominal acceleration factor");
  sm->add_option("--acs", acs, "fully sampled center lines");
  sm->add_option("--lines", lines, "total k-space lines");
  sm->add_option("--cols", cols, "extent of the non-masked axis");

  // acquire
  auto* sa = app.add_subcommand("acquire", "simulate the undersampled acquisition");
  std::string phantom_base, csm_base, mask_base;
  double noise = 0.0;
  int axis = 0;
  add_common(sa);
  sa->add_option("--phantom", phantom_base, "phantom array base (default <out>/phantom)");
  sa->add_option("--csm", csm_base, "coil map base (default <out>/csm)");
  sa->add_option("--mask", mask_base, "mask base (default <out>/mask)");
  sa->add_option("--noise", noise, "k-space noise std per component");
  sa->add_option("--factor", factor);
  sa->add_option("--acs", acs);
  sa->add_option("--axis", axis);

  // train
  auto* st = app.add_subcommand("train", "train the toy denoiser");
  std::size_t count = 64;
  int iters = 2000, batch = 4, hidden = 32;
  double lr = 1e-3, ema = 0.999;
  double beta_min = 0.1, beta_max = 20.0, sigma_min = 0.1, sigma_max = 16.0;
  int schedule_N = 1000;
  std::string train_kind = "gaussian_blobs";
  add_common(st);
  st->add_option("--variant", variant);
  st->add_option("--nl", nl);
  st->add_option("--rows", rows);
  st->add_option("--cols", cols);
  st->add_option("--kind", train_kind, "phantom kind for the training set");
  st->add_option("--count", count, "training set size");
  st->add_option("--iters", iters);
  st->add_option("--batch", batch);
  st->add_option("--lr", lr);
  st->add_option("--ema", ema);
  st->add_option("--hidden", hidden);
  st->add_option("--beta-min", beta_min);
  st->add_option("--beta-max", beta_max);
  st->add_option("--sigma-min", sigma_min);
  st->add_option("--sigma-max", sigma_max);
  st->add_option("--schedule-n", schedule_N);
  st->add_option("--axis", axis);

  // reconstruct
  auto* sr = app.add_subcommand("reconstruct", "predictor-corrector reconstruction");
  std::string data_dir, model_path, prior_dir;
  int snapshot_every = 0;
  add_common(sr);
  sr->add_option("--data", data_dir, "dataset directory from `acquire`");
  sr->add_option("--model", model_path, "denoiser checkpoint (model.json)");
  sr->add_option("--prior", prior_dir, "directory with prior_mean / prior_var arrays");
  sr->add_option("--variant", variant);
  sr->add_option("--steps", steps);
  sr->add_option("--correctors", correctors);
  sr->add_option("--nl", nl);
  sr->add_option("--lambda1", lambda1);
  sr->add_option("--lambda2", lambda2);
  sr->add_option("--snr-r", snr_r);
  sr->add_flag("--no-dc", no_dc, "disable data consistency");
  sr->add_option("--snapshot-every", snapshot_every);
  sr->add_option("--beta-min", beta_min);
  sr->add_option("--beta-max", beta_max);
  sr->add_option("--sigma-min", sigma_min);
  sr->add_option("--sigma-max", sigma_max);
  sr->add_option("--schedule-n", schedule_N);
  sr->add_option("--axis", axis);

  // sweep
  auto* sw = app.add_subcommand("sweep", "sampling-step convergence sweep");
  std::string steps_list = "50,100,200,300,400,500";
  std::string variants_csv = "hfs-vp,vp";
  int chains = 10;
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());
  std::uint64_t testbed_seed = 1234;
  add_common(sw);
  sw->add_option("--steps-list", steps_list, "comma-separated step counts");
  sw->add_option("--variants", variants_csv, "comma-separated SDE variants");
  sw->add_option("--chains", chains);
  sw->add_option("--threads", threads);
  sw->add_option("--rows", rows);
  sw->add_option("--cols", cols);
  sw->add_option("--nl", nl);
  sw->add_option("--factor", factor);
  sw->add_option("--acs", acs);
  sw->add_option("--coils", coils);
  sw->add_option("--noise", noise);
  sw->add_option("--testbed-seed", testbed_seed);
  sw->add_option("--correctors", correctors);
  sw->add_option("--lambda1", lambda1);
  sw->add_option("--lambda2", lambda2);
  sw->add_option("--snr-r", snr_r);
  sw->add_flag("--no-dc", no_dc);

  // ablate-nl
  auto* sab = app.add_subcommand("ablate-nl", "low-band width ablation harness");
  std::string nl_list = "2,8,16,24,32";
  std::string models_dir;
  add_common(sab);
  sab->add_option("--nl-list", nl_list, "comma-separated n_l values");
  sab->add_option("--steps", steps);
  sab->add_option("--chains", chains);
  sab->add_option("--threads", threads);
  sab->add_option("--rows", rows);
  sab->add_option("--cols", cols);
  sab->add_option("--factor", factor);
  sab->add_option("--acs", acs);
  sab->add_option("--coils", coils);
  sab->add_option("--noise", noise);
  sab->add_option("--testbed-seed", testbed_seed);
  sab->add_option("--models-dir", models_dir,
                  "directory of model_nl<k>.json checkpoints (default: analytic score)");

  // metrics
  auto* smet = app.add_subcommand("metrics", "NMSE / PSNR / SSIM between two arrays");
  std::string ref_base, in_base;
  add_common(smet);
  smet->add_option("--ref", ref_base, "reference array base")->required();
  smet->add_option("--in", in_base, "array base under test")->required();

  // timing
  auto* stim = app.add_subcommand("timing", "wall-clock comparison across step counts");
  std::string timing_steps = "100,1000";
  add_common(stim);
  stim->add_option("--steps-list", timing_steps);
  stim->add_option("--rows", rows);
  stim->add_option("--cols", cols);
  stim->add_option("--nl", nl);
  stim->add_option("--factor", factor);
  stim->add_option("--acs", acs);
  stim->add_option("--coils", coils);
  stim->add_option("--noise", noise);
  stim->add_option("--testbed-seed", testbed_seed);
  stim->add_option("--correctors", correctors);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (sp->parsed()) {
      return cmd_phantom(config_path,
                         json{{"kind", kind},
                              {"rows", rows},
                              {"cols", cols},
                              {"nl", ph_nl},
                              {"seed", seed}},
                         out);
    }
    if (sc_cmd->parsed()) {
      return cmd_csm(config_path, json{{"coils", coils}, {"rows", rows}, {"cols", cols}}, out);
    }
    if (sm->parsed()) {
      return cmd_mask(config_path,
                      json{{"kind", mask_kind},
                           {"factor", factor},
                           {"acs", acs},
                           {"lines", lines},
                           {"cols", cols},
                           {"seed", seed}},
                      out);
    }
    if (sa->parsed()) {
      return cmd_acquire(config_path,
                         json{{"phantom", phantom_base.empty() ? out + "/phantom" : phantom_base},
                              {"csm", csm_base.empty() ? out + "/csm" : csm_base},
                              {"mask", mask_base.empty() ? out + "/mask" : mask_base},
                              {"noise", noise},
                              {"factor", static_cast<double>(factor)},
                              {"acs", acs},
                              {"axis", axis},
                              {"seed", seed}},
                         out);
    }
    if (st->parsed()) {
      return cmd_train(config_path,
                       json{{"variant", variant}, {"nl", nl},
                            {"rows", rows},       {"cols", cols},
                            {"kind", train_kind}, {"count", count},
                            {"iters", iters},     {"batch", batch},
                            {"lr", lr},           {"ema", ema},
                            {"hidden", hidden},   {"beta_min", beta_min},
                            {"beta_max", beta_max}, {"sigma_min", sigma_min},
                            {"sigma_max", sigma_max}, {"schedule_N", schedule_N},
                            {"axis", axis},       {"seed", seed}},
                       out);
    }
    if (sr->parsed()) {
      if (data_dir.empty() && config_path.empty())
        throw config_error("reconstruct needs --data or --config");
      json cfg{{"data", data_dir},   {"variant", variant},
               {"steps", steps},     {"correctors", correctors},
               {"nl", nl},           {"lambda1", lambda1},
               {"lambda2", lambda2}, {"snr_r", snr_r},
               {"no_dc", no_dc},     {"snapshot_every", snapshot_every},
               {"beta_min", beta_min}, {"beta_max", beta_max},
               {"sigma_min", sigma_min}, {"sigma_max", sigma_max},
               {"schedule_N", schedule_N}, {"axis", axis},
               {"seed", seed}};
      if (!model_path.empty()) cfg["model"] = model_path;
      if (!prior_dir.empty()) cfg["prior"] = prior_dir;
      return cmd_reconstruct(config_path, std::move(cfg), out);
    }
    if (sw->parsed()) {
      std::vector<std::string> vnames;
      {
        std::istringstream in(variants_csv);
        std::string tok;
        while (std::getline(in, tok, ',')) vnames.push_back(tok);
      }
      return cmd_sweep(config_path,
                       json{{"steps_list", parse_int_list(steps_list)},
                            {"variants", vnames},
                            {"chains", chains},
                            {"threads", threads},
                            {"rows", rows},
                            {"cols", cols},
                            {"nl", nl},
                            {"factor", factor},
                            {"acs", acs},
                            {"coils", coils},
                            {"noise", noise},
                            {"testbed_seed", testbed_seed},
                            {"correctors", correctors},
                            {"lambda1", lambda1},
                            {"lambda2", lambda2},
                            {"snr_r", snr_r},
                            {"no_dc", no_dc},
                            {"seed", seed}},
                       out);
    }
    if (sab->parsed()) {
      json cfg{{"nl_list", parse_int_list(nl_list)},
               {"steps", steps},
               {"chains", chains},
               {"threads", threads},
               {"rows", rows},
               {"cols", cols},
               {"factor", factor},
               {"acs", acs},
               {"coils", coils},
               {"noise", noise},
               {"testbed_seed", testbed_seed},
               {"seed", seed}};
      if (!models_dir.empty()) cfg["models_dir"] = models_dir;
      return cmd_ablate_nl(config_path, std::move(cfg), out);
    }
    if (smet->parsed()) {
      return cmd_metrics(config_path, json{{"ref", ref_base}, {"in", in_base}}, out);
    }
    if (stim->parsed()) {
      return cmd_timing(config_path,
                        json{{"steps_list", parse_int_list(timing_steps)},
                             {"rows", rows},
                             {"cols", cols},
                             {"nl", nl},
                             {"factor", factor},
                             {"acs", acs},
                             {"coils", coils},
                             {"noise", noise},
                             {"testbed_seed", testbed_seed},
                             {"correctors", correctors},
                             {"seed", seed}},
                        out);
    }
  } catch (const recon_divergence_error& e) {
    std::cerr << "divergence at step " << e.step_index << ": " << e.what() << "\n";
    return 3;
  } catch (const divergence_error& e) {
    std::cerr << "divergence at step " << e.step_index << ": " << e.what() << "\n";
    return 3;
  } catch (const io_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 4;
  } catch (const config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const dimension_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
