#include <catch2/catch_amalgamated.hpp>

#include "hfsdiff/acquisition.hpp"
#include "hfsdiff/denoiser.hpp"
#include "hfsdiff/score.hpp"
#include "oracles.hpp"

using namespace hfsdiff;

namespace {

DiffusionSpec make_spec(Variant v, std::size_t rows, std::size_t cols, std::size_t nl) {
  DiffusionSpec spec;
  spec.variant = v;
  spec.freq_mask = FrequencyMask::centered(nl, rows, cols);
  return spec;
}

// log p_t(x) for the Gaussian prior up to its x-independent normalization,
// evaluated through the dense DFT matrix (independent of the library FFT),
// mode-wise over real/imag components.
double log_density(const GaussianPrior& prior, const DiffusionSpec& spec,
                   const oracles::Mat& F, const ComplexField& x, double t) {
  const KernelCoeffs kc = kernel_coeffs(spec, t);
  const oracles::Vec xk = F * oracles::to_vec(x);
  double lp = 0.0;
  const std::size_t rows = x.rows();
  for (std::size_t c = 0; c < x.cols(); ++c)
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t i = r + c * rows;
      const bool low = is_hfs(spec.variant) && spec.freq_mask.is_low_line(r);
      const double a = low ? 1.0 : kc.mean_coeff;
      const double v = low ? 0.0 : kc.var;
      const double s2 = a * a * prior.var[i] + v;
      const cdouble mu = a * prior.mean[i];
      const cdouble d = xk[static_cast<Eigen::Index>(i)] - mu;
      lp += -0.5 * (d.real() * d.real() + d.imag() * d.imag()) / s2;
    }
  return lp;
}

// Test-only score model wrapping a fixed field.
struct FixedScore : ScoreModel {
  ComplexField value;
  explicit FixedScore(ComplexField v) : value(std::move(v)) {}
  ComplexField evaluate(const ComplexField&, double) const override { return value; }
};

struct ZeroScore : ScoreModel {
  ComplexField evaluate(const ComplexField& x, double) const override {
    return ComplexField(x.rows(), x.cols(), x.domain());
  }
};

}  // namespace

TEST_CASE("gaussian score at the prior mean is zero") {
  const std::size_t n = 8;
  GaussianPrior prior;
  prior.mean = ComplexField(n, n, Domain::kspace);
  prior.var.assign(n * n, 0.3);
  const DiffusionSpec spec = make_spec(Variant::hfs_vp, n, n, 2);
  const ComplexField x(n, n, Domain::image);
  const ComplexField s = gaussian_score(prior, spec, x, 0.4);
  CHECK(norm2(s) < 1e-14);
}

TEST_CASE("gaussian score low band is the undiffused prior score") {
  RngStream rng(3);
  const std::size_t n = 8;
  GaussianPrior prior = GaussianPrior::smooth(n, n, rng);
  const DiffusionSpec spec = make_spec(Variant::hfs_vp, n, n, 2);
  const ComplexField x = rng.normal_field(n, n);
  const ComplexField xk = fft2_centered(x);

  const ComplexField s1 = fft2_centered(gaussian_score(prior, spec, x, 0.3));
  const ComplexField s2 = fft2_centered(gaussian_score(prior, spec, x, 0.9));
  for (std::size_t c = 0; c < n; ++c)
    for (std::size_t r = 0; r < n; ++r)
      if (spec.freq_mask.is_low_line(r)) {
        const std::size_t i = r + c * n;
        const cdouble want = -(xk[i] - prior.mean[i]) / prior.var[i];
        REQUIRE(std::abs(s1(r, c) - want) < 1e-10);
        REQUIRE(std::abs(s1(r, c) - s2(r, c)) < 1e-10);
      }
}

TEST_CASE("gaussian score matches finite differences of log p_t") {
  RngStream rng(7);
  const std::size_t n = 8;
  GaussianPrior prior = GaussianPrior::smooth(n, n, rng);
  const oracles::Mat F = oracles::dense_dft(n, n);
  const double t = 0.7;
  // The log-density is quadratic, so the central difference has no
  // truncation error and a generous step just suppresses roundoff.
  const double h = 1e-3;

  for (Variant v : {Variant::hfs_vp, Variant::vp, Variant::ve}) {
    const DiffusionSpec spec = make_spec(v, n, n, 2);
    const ComplexField x = rng.normal_field(n, n);
    const ComplexField s = gaussian_score(prior, spec, x, t);

    ComplexField fd(n, n, Domain::image);
    for (std::size_t i = 0; i < x.size(); ++i) {
      ComplexField xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      const double d_re =
          (log_density(prior, spec, F, xp, t) - log_density(prior, spec, F, xm, t)) / (2 * h);
      xp = x;
      xm = x;
      xp[i] += cdouble(0, h);
      xm[i] -= cdouble(0, h);
      const double d_im =
          (log_density(prior, spec, F, xp, t) - log_density(prior, spec, F, xm, t)) / (2 * h);
      fd[i] = {d_re, d_im};
    }
    CHECK(oracles::rel_err(s, fd) < 1e-6);
  }
}

TEST_CASE("dsm loss contracts") {
  RngStream rng(11);
  const std::size_t n = 8;
  const DiffusionSpec spec = make_spec(Variant::hfs_vp, n, n, 2);
  const ComplexField x0 = rng.normal_field(n, n);
  const ComplexField z = rng.normal_field(n, n);
  const double t = 0.6;
  const KernelCoeffs kc = kernel_coeffs(spec, t);

  SECTION("minimizer substitution gives zero loss") {
    ComplexField opt = apply_Fh(z, spec.freq_mask);
    opt *= -1.0 / std::sqrt(kc.var);
    const FixedScore model(opt);
    CHECK(dsm_loss(model, x0, t, z, spec) <= 1e-20);
  }

  SECTION("zero score leaves the noise energy") {
    const ZeroScore model;
    const double want = norm2_sq(apply_Fh(z, spec.freq_mask));
    CHECK(dsm_loss(model, x0, t, z, spec) == Catch::Approx(want).epsilon(1e-12));
  }

  SECTION("full-space variant uses the unprojected noise") {
    const DiffusionSpec vp = make_spec(Variant::vp, n, n, 0);
    const ZeroScore model;
    CHECK(dsm_loss(model, x0, t, z, vp) == Catch::Approx(norm2_sq(z)).epsilon(1e-12));
  }

  SECTION("degenerate time rejected") {
    const ZeroScore model;
    CHECK_THROWS_AS(dsm_loss(model, x0, 0.0, z, spec), config_error);
  }
}

TEST_CASE("expected dsm loss of the analytic score equals the closed-form minimum") {
  RngStream rng(13);
  const std::size_t n = 8;
  GaussianPrior prior = GaussianPrior::smooth(n, n, rng);
  const DiffusionSpec spec = make_spec(Variant::hfs_vp, n, n, 2);
  const GaussianPriorScore model(prior, spec);

  for (double t : {0.25, 0.6, 0.9}) {
    const KernelCoeffs kc = kernel_coeffs(spec, t);
    // Optimal residual energy: sum over high modes of 2 a^2 s / (a^2 s + v).
    double want = 0.0;
    for (std::size_t c = 0; c < n; ++c)
      for (std::size_t r = 0; r < n; ++r)
        if (!spec.freq_mask.is_low_line(r)) {
          const double s = prior.var[r + c * n];
          const double a2s = kc.mean_coeff * kc.mean_coeff * s;
          want += 2.0 * a2s / (a2s + kc.var);
        }
    const int draws = 10000;
    double acc = 0.0;
    for (int i = 0; i < draws; ++i) {
      const ComplexField x0 = prior.sample(rng);
      const ComplexField z = rng.normal_field(n, n);
      acc += dsm_loss(model, x0, t, z, spec);
    }
    CHECK(acc / draws == Catch::Approx(want).epsilon(0.03));
  }
}

TEST_CASE("analytic score is locally optimal for the dsm objective") {
  RngStream rng(17);
  const std::size_t n = 8;
  GaussianPrior prior = GaussianPrior::smooth(n, n, rng);
  const DiffusionSpec spec = make_spec(Variant::hfs_vp, n, n, 2);
  const GaussianPriorScore model(prior, spec);

  // The loss is quadratic in the score, so for a perturbation s + delta*d the
  // paired difference is 2*delta*sqrt(v)<Fh d, r> + delta^2 v ||Fh d||^2 with
  // r the optimal residual. Cache the residuals once and sweep directions.
  const int draws = 3000;
  struct Draw {
    ComplexField resid;  // Fh(z) + sqrt(v) Fh(s*(x_t))
    double v;
  };
  std::vector<Draw> cache;
  cache.reserve(draws);
  for (int i = 0; i < draws; ++i) {
    const double t = 1e-3 + (1.0 - 1e-3) * rng.uniform();
    const KernelCoeffs kc = kernel_coeffs(spec, t);
    const ComplexField x0 = prior.sample(rng);
    const ComplexField z = rng.normal_field(n, n);
    const ComplexField xt = perturb_given(x0, t, spec, z);
    ComplexField r = apply_Fh(z, spec.freq_mask);
    add_scaled(r, std::sqrt(kc.var), apply_Fh(model.evaluate(xt, t), spec.freq_mask));
    cache.push_back({std::move(r), kc.var});
  }

  const double delta = 1.0;
  int nonneg = 0;
  for (int dir = 0; dir < 100; ++dir) {
    const ComplexField d = rng.normal_field(n, n);
    const ComplexField dh = apply_Fh(d, spec.freq_mask);
    const double dh2 = norm2_sq(dh);
    double diff = 0.0;
    for (const Draw& dw : cache)
      diff += 2.0 * delta * std::sqrt(dw.v) * dot(dh, dw.resid).real() +
              delta * delta * dw.v * dh2;
    if (diff / draws >= 0.0) ++nonneg;
  }
  CHECK(nonneg == 100);
}

TEST_CASE("denoiser gradients match central finite differences") {
  RngStream rng(19);
  const std::size_t n = 8;
  ArchDescriptor arch;  // 3 -> 32 -> 2
  RngStream init(23);
  DenoiserNet net = DenoiserNet::init(arch, init);
  REQUIRE(net.param_count() <= 2000);

  const ComplexField x0 = rng.normal_field(n, n);
  const ComplexField z = rng.normal_field(n, n);
  const double t = 0.37;
  const double h = 1e-5;

  // Both the projected (HFS) and unprojected (VP) losses. Under the HFS
  // projection the output bias is a null direction (a constant shift has
  // only DC content), so near-zero tensors are compared against the global
  // gradient scale instead of their own vanishing norm.
  for (Variant variant : {Variant::hfs_vp, Variant::vp}) {
    const DiffusionSpec spec = make_spec(variant, n, n, variant == Variant::vp ? 0 : 2);
    ParamGrads grads(net);
    denoiser_loss_grad(net, spec, x0, t, z, &grads);

    struct TensorCheck {
      std::vector<double> DenoiserNet::*member;
      const std::vector<double>* got;
    };
    const TensorCheck checks[] = {{&DenoiserNet::w1, &grads.w1},
                                  {&DenoiserNet::b1, &grads.b1},
                                  {&DenoiserNet::w2, &grads.w2},
                                  {&DenoiserNet::b2, &grads.b2}};
    std::vector<double> diff_norm, fd_norm;
    double fd_all_sq = 0.0;
    for (const auto& chk : checks) {
      double num = 0.0, den = 0.0;
      for (std::size_t i = 0; i < (net.*chk.member).size(); ++i) {
        DenoiserNet np = net, nm = net;
        (np.*chk.member)[i] += h;
        (nm.*chk.member)[i] -= h;
        const double fp = denoiser_loss_grad(np, spec, x0, t, z, nullptr);
        const double fm = denoiser_loss_grad(nm, spec, x0, t, z, nullptr);
        const double fd = (fp - fm) / (2 * h);
        num += ((*chk.got)[i] - fd) * ((*chk.got)[i] - fd);
        den += fd * fd;
      }
      diff_norm.push_back(std::sqrt(num));
      fd_norm.push_back(std::sqrt(den));
      fd_all_sq += den;
    }
    const double fd_all = std::sqrt(fd_all_sq);
    for (std::size_t i = 0; i < diff_norm.size(); ++i) {
      if (fd_norm[i] > 1e-6 * fd_all) {
        CHECK(diff_norm[i] / fd_norm[i] < 1e-4);
      } else {
        CHECK(diff_norm[i] < 1e-4 * fd_all);
      }
    }
  }
}

TEST_CASE("trainer loss matches dsm_loss through the deployed score") {
  RngStream rng(29);
  const std::size_t n = 8;
  const DiffusionSpec spec = make_spec(Variant::hfs_vp, n, n, 2);
  RngStream init(31);
  const DenoiserNet net = DenoiserNet::init(ArchDescriptor{}, init);
  const ComplexField x0 = rng.normal_field(n, n);
  const ComplexField z = rng.normal_field(n, n);
  const double t = 0.5;
  const double direct = denoiser_loss_grad(net, spec, x0, t, z, nullptr);
  const DenoiserScore score(net, spec);
  CHECK(dsm_loss(score, x0, t, z, spec) == Catch::Approx(direct).epsilon(1e-10));
}

TEST_CASE("training mechanics") {
  RngStream rng(37);
  std::vector<ComplexField> data;
  for (int i = 0; i < 8; ++i)
    data.push_back(make_phantom(PhantomKind::gaussian_blobs, 8, 8, rng).image);
  const DiffusionSpec spec = make_spec(Variant::hfs_vp, 8, 8, 2);

  SECTION("one step with ema_rate 0 copies the iterate") {
    TrainConfig cfg;
    cfg.iterations = 1;
    cfg.ema_rate = 0.0;
    cfg.seed = 5;
    const TrainResult r = train_denoiser(data, spec, cfg);
    REQUIRE(r.model.w1.size() == r.raw.w1.size());
    for (std::size_t i = 0; i < r.model.w1.size(); ++i) REQUIRE(r.model.w1[i] == r.raw.w1[i]);
    for (std::size_t i = 0; i < r.model.b2.size(); ++i) REQUIRE(r.model.b2[i] == r.raw.b2[i]);
  }

  SECTION("bit-identical retraining from the same seed") {
    TrainConfig cfg;
    cfg.iterations = 20;
    cfg.seed = 7;
    const TrainResult a = train_denoiser(data, spec, cfg);
    const TrainResult b = train_denoiser(data, spec, cfg);
    for (std::size_t i = 0; i < a.model.w1.size(); ++i) REQUIRE(a.model.w1[i] == b.model.w1[i]);
    for (std::size_t i = 0; i < a.loss_history.size(); ++i)
      REQUIRE(a.loss_history[i] == b.loss_history[i]);
  }

  SECTION("loss goes down over a short run") {
    TrainConfig cfg;
    cfg.iterations = 300;
    cfg.seed = 11;
    const TrainResult r = train_denoiser(data, spec, cfg);
    double head = 0, tail = 0;
    for (int i = 0; i < 50; ++i) head += r.loss_history[static_cast<std::size_t>(i)];
    for (int i = 0; i < 50; ++i)
      tail += r.loss_history[r.loss_history.size() - 1 - static_cast<std::size_t>(i)];
    CHECK(tail < head);
  }

  SECTION("empty dataset and bad configs rejected") {
    TrainConfig cfg;
    CHECK_THROWS_AS(train_denoiser({}, spec, cfg), config_error);
    TrainConfig bad = cfg;
    bad.t_floor = 0.0;
    CHECK_THROWS_AS(train_denoiser(data, spec, bad), config_error);
  }
}

TEST_CASE("denoiser score lives in the high band") {
  RngStream rng(41);
  const DiffusionSpec spec = make_spec(Variant::hfs_vp, 16, 16, 4);
  RngStream init(43);
  const DenoiserNet net = DenoiserNet::init(ArchDescriptor{}, init);
  const DenoiserScore score(net, spec);
  for (double t : {0.05, 0.5, 1.0}) {
    const ComplexField x = rng.normal_field(16, 16);
    const ComplexField s = score.evaluate(x, t);
    CHECK(norm2(apply_Fl(s, spec.freq_mask)) <= 1e-10 * norm2(s));
  }
}

TEST_CASE("checkpoint round trip") {
  const std::string base = "/tmp/hfsdiff_test_ckpt";
  RngStream init(47);
  DenoiserNet net = DenoiserNet::init(ArchDescriptor{}, init);
  const DiffusionSpec spec = make_spec(Variant::hfs_vp, 16, 16, 4);
  save_checkpoint(base, net, spec, 0.999, 123);

  const Checkpoint ck = load_checkpoint(base + ".json");
  CHECK(ck.ema_rate == 0.999);
  CHECK(ck.seed == 123);
  CHECK(ck.spec.variant == Variant::hfs_vp);
  CHECK(ck.spec.freq_mask.nl == 4);
  REQUIRE(ck.net.param_count() == net.param_count());
  for (std::size_t i = 0; i < net.w1.size(); ++i) REQUIRE(ck.net.w1[i] == net.w1[i]);
  for (std::size_t i = 0; i < net.w2.size(); ++i) REQUIRE(ck.net.w2[i] == net.w2[i]);

  CHECK_THROWS_AS(load_checkpoint("/tmp/does_not_exist_hfsdiff.json"), io_error);
}
