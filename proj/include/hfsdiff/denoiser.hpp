#pragma once

#include <fstream>
#include <numeric>

#include "hfsdiff/score.hpp"

#include "json.hpp"

namespace hfsdiff {

// Stack of real-valued planes sharing one grid, column-major within a plane.
struct Planes {
  std::size_t ch = 0, rows = 0, cols = 0;
  std::vector<double> data;

  Planes() = default;
  Planes(std::size_t ch_, std::size_t rows_, std::size_t cols_)
      : ch(ch_), rows(rows_), cols(cols_), data(ch_ * rows_ * cols_, 0.0) {}

  double& at(std::size_t p, std::size_t r, std::size_t c) {
    return data[(p * cols + c) * rows + r];
  }
  double at(std::size_t p, std::size_t r, std::size_t c) const {
    return data[(p * cols + c) * rows + r];
  }
};

struct ArchDescriptor {
  int in_channels = 3;   // Re, Im, broadcast time
  int hidden = 32;
  int out_channels = 2;  // Re, Im of the predicted high-frequency noise
  int ksize = 3;
};

inline void to_json(nlohmann::json& j, const ArchDescriptor& a) {
  j = nlohmann::json{{"in_channels", a.in_channels},
                     {"hidden", a.hidden},
                     {"out_channels", a.out_channels},
                     {"ksize", a.ksize}};
}

inline void from_json(const nlohmann::json& j, ArchDescriptor& a) {
  a.in_channels = j.at("in_channels").get<int>();
  a.hidden = j.at("hidden").get<int>();
  a.out_channels = j.at("out_channels").get<int>();
  a.ksize = j.at("ksize").get<int>();
}

namespace detail {

// Zero-padded "same" cross-correlation of a channel stack with a kernel bank
// W[out][in][ky][kx].
inline void conv_forward(const Planes& in, const std::vector<double>& W,
                         const std::vector<double>& b, int out_ch, int ksize, Planes& out) {
  const int rows = static_cast<int>(in.rows), cols = static_cast<int>(in.cols);
  const int half = ksize / 2;
  const int in_ch = static_cast<int>(in.ch);
  out = Planes(static_cast<std::size_t>(out_ch), in.rows, in.cols);
  for (int o = 0; o < out_ch; ++o)
    for (int c = 0; c < cols; ++c)
      for (int r = 0; r < rows; ++r) {
        double acc = b[static_cast<std::size_t>(o)];
        for (int i = 0; i < in_ch; ++i)
          for (int ky = 0; ky < ksize; ++ky) {
            const int rr = r + ky - half;
            if (rr < 0 || rr >= rows) continue;
            for (int kx = 0; kx < ksize; ++kx) {
              const int cc = c + kx - half;
              if (cc < 0 || cc >= cols) continue;
              acc += W[((static_cast<std::size_t>(o) * in_ch + i) * ksize + ky) * ksize + kx] *
                     in.at(static_cast<std::size_t>(i), static_cast<std::size_t>(rr),
                           static_cast<std::size_t>(cc));
            }
          }
        out.at(static_cast<std::size_t>(o), static_cast<std::size_t>(r),
               static_cast<std::size_t>(c)) = acc;
      }
}

// Gradients of the same correlation: accumulates dW/db and writes din.
inline void conv_backward(const Planes& in, const std::vector<double>& W, int out_ch, int ksize,
                          const Planes& dout, std::vector<double>& dW, std::vector<double>& db,
                          Planes* din) {
  const int rows = static_cast<int>(in.rows), cols = static_cast<int>(in.cols);
  const int half = ksize / 2;
  const int in_ch = static_cast<int>(in.ch);
  if (din) *din = Planes(in.ch, in.rows, in.cols);
  for (int o = 0; o < out_ch; ++o)
    for (int c = 0; c < cols; ++c)
      for (int r = 0; r < rows; ++r) {
        const double g = dout.at(static_cast<std::size_t>(o), static_cast<std::size_t>(r),
                                 static_cast<std::size_t>(c));
        db[static_cast<std::size_t>(o)] += g;
        for (int i = 0; i < in_ch; ++i)
          for (int ky = 0; ky < ksize; ++ky) {
            const int rr = r + ky - half;
            if (rr < 0 || rr >= rows) continue;
            for (int kx = 0; kx < ksize; ++kx) {
              const int cc = c + kx - half;
              if (cc < 0 || cc >= cols) continue;
              const std::size_t wi =
                  ((static_cast<std::size_t>(o) * in_ch + i) * ksize + ky) * ksize + kx;
              dW[wi] += g * in.at(static_cast<std::size_t>(i), static_cast<std::size_t>(rr),
                                  static_cast<std::size_t>(cc));
              if (din)
                din->at(static_cast<std::size_t>(i), static_cast<std::size_t>(rr),
                        static_cast<std::size_t>(cc)) += g * W[wi];
            }
          }
      }
}

}  // namespace detail

// Two-layer convolutional noise predictor: (Re, Im, t) -> tanh-hidden ->
// (Re, Im). The deployed score divides by -sqrt(v(t)) and projects onto the
// high band, so the network itself just predicts Fh(z).
struct DenoiserNet {
  ArchDescriptor arch;
  std::vector<double> w1, b1, w2, b2;

  static DenoiserNet init(const ArchDescriptor& arch, RngStream& rng) {
    DenoiserNet net;
    net.arch = arch;
    const std::size_t k2 = static_cast<std::size_t>(arch.ksize * arch.ksize);
    net.w1.resize(static_cast<std::size_t>(arch.hidden * arch.in_channels) * k2);
    net.b1.assign(static_cast<std::size_t>(arch.hidden), 0.0);
    net.w2.resize(static_cast<std::size_t>(arch.out_channels * arch.hidden) * k2);
    net.b2.assign(static_cast<std::size_t>(arch.out_channels), 0.0);
    const double s1 = std::sqrt(2.0 / (arch.in_channels * arch.ksize * arch.ksize));
    const double s2 = std::sqrt(2.0 / (arch.hidden * arch.ksize * arch.ksize));
    for (auto& w : net.w1) w = s1 * rng.normal();
    for (auto& w : net.w2) w = s2 * rng.normal();
    return net;
  }

  std::size_t param_count() const { return w1.size() + b1.size() + w2.size() + b2.size(); }

  Planes make_input(const ComplexField& x, double t) const {
    Planes in(3, x.rows(), x.cols());
    for (std::size_t c = 0; c < x.cols(); ++c)
      for (std::size_t r = 0; r < x.rows(); ++r) {
        in.at(0, r, c) = x(r, c).real();
        in.at(1, r, c) = x(r, c).imag();
        in.at(2, r, c) = t;
      }
    return in;
  }

  struct ForwardCache {
    Planes in, hidden, out;
  };

  ComplexField forward(const ComplexField& x, double t, ForwardCache* cache = nullptr) const {
    ForwardCache local;
    ForwardCache& cc = cache ? *cache : local;
    cc.in = make_input(x, t);
    detail::conv_forward(cc.in, w1, b1, arch.hidden, arch.ksize, cc.hidden);
    for (auto& v : cc.hidden.data) v = std::tanh(v);
    detail::conv_forward(cc.hidden, w2, b2, arch.out_channels, arch.ksize, cc.out);
    ComplexField out(x.rows(), x.cols(), Domain::image);
    for (std::size_t c = 0; c < x.cols(); ++c)
      for (std::size_t r = 0; r < x.rows(); ++r)
        out(r, c) = {cc.out.at(0, r, c), cc.out.at(1, r, c)};
    return out;
  }
};

// Flat gradient/parameter views in the frozen order w1, b1, w2, b2 (the same
// order the checkpoint blob uses).
struct ParamGrads {
  std::vector<double> w1, b1, w2, b2;

  explicit ParamGrads(const DenoiserNet& net)
      : w1(net.w1.size(), 0.0),
        b1(net.b1.size(), 0.0),
        w2(net.w2.size(), 0.0),
        b2(net.b2.size(), 0.0) {}

  void scale(double s) {
    for (auto* v : {&w1, &b1, &w2, &b2})
      for (auto& x : *v) x *= s;
  }
};

// Loss and parameter gradients of the score-matching objective in
// noise-prediction form, ||Fh(z) - Fh(net(x_t, t))||^2, for one draw.
inline double denoiser_loss_grad(const DenoiserNet& net, const DiffusionSpec& spec,
                                 const ComplexField& x0, double t, const ComplexField& z,
                                 ParamGrads* grads) {
  const ComplexField xt = perturb_given(x0, t, spec, z);
  DenoiserNet::ForwardCache cache;
  const ComplexField pred = net.forward(xt, t, &cache);

  const bool hfs = is_hfs(spec.variant);
  ComplexField resid =
      hfs ? apply_Fh(z, spec.freq_mask) - apply_Fh(pred, spec.freq_mask) : z - pred;
  const double loss = norm2_sq(resid);
  if (!grads) return loss;

  // dL/dpred = -2 * P(resid); the projection is self-adjoint.
  ComplexField dpred = hfs ? apply_Fh(resid, spec.freq_mask) : resid;
  Planes dout(2, xt.rows(), xt.cols());
  for (std::size_t c = 0; c < xt.cols(); ++c)
    for (std::size_t r = 0; r < xt.rows(); ++r) {
      dout.at(0, r, c) = -2.0 * dpred(r, c).real();
      dout.at(1, r, c) = -2.0 * dpred(r, c).imag();
    }

  Planes dhidden;
  detail::conv_backward(cache.hidden, net.w2, net.arch.out_channels, net.arch.ksize, dout,
                        grads->w2, grads->b2, &dhidden);
  for (std::size_t i = 0; i < dhidden.data.size(); ++i) {
    const double h = cache.hidden.data[i];
    dhidden.data[i] *= (1.0 - h * h);
  }
  detail::conv_backward(cache.in, net.w1, net.arch.hidden, net.arch.ksize, dhidden, grads->w1,
                        grads->b1, nullptr);
  return loss;
}

struct TrainConfig {
  double learning_rate = 1e-3;
  int iterations = 2000;
  int batch_size = 4;
  double ema_rate = 0.999;
  double t_floor = 1e-3;  // times are sampled uniformly on [t_floor, 1]
  std::uint64_t seed = 0;
  ArchDescriptor arch;

  void validate() const {
    if (!(t_floor > 0.0)) throw config_error("TrainConfig: t_floor must be positive");
    if (iterations < 1) throw config_error("TrainConfig: iteration budget must be >= 1");
    if (batch_size < 1) throw config_error("TrainConfig: batch size must be >= 1");
    if (!(ema_rate >= 0.0 && ema_rate < 1.0))
      throw config_error("TrainConfig: ema_rate must lie in [0, 1)");
  }
};

struct TrainResult {
  DenoiserNet model;  // EMA parameters, the deployed network
  DenoiserNet raw;    // last optimizer iterate
  std::vector<double> loss_history;
};

namespace detail {

struct AdamState {
  std::vector<double> m, v;
  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

inline void adam_update(std::vector<double>& theta, const std::vector<double>& grad,
                        AdamState& st, double lr, int step) {
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  const double c1 = 1.0 - std::pow(b1, step);
  const double c2 = 1.0 - std::pow(b2, step);
  for (std::size_t i = 0; i < theta.size(); ++i) {
    st.m[i] = b1 * st.m[i] + (1.0 - b1) * grad[i];
    st.v[i] = b2 * st.v[i] + (1.0 - b2) * grad[i] * grad[i];
    theta[i] -= lr * (st.m[i] / c1) / (std::sqrt(st.v[i] / c2) + eps);
  }
}

inline void ema_update(std::vector<double>& ema, const std::vector<double>& theta, double rate) {
  for (std::size_t i = 0; i < ema.size(); ++i) ema[i] = rate * ema[i] + (1.0 - rate) * theta[i];
}

}  // namespace detail

// Stochastic optimization of the mean DSM loss with Adam, EMA tracking and a
// fixed single-threaded reduction order, so results are bit-reproducible from
// the config seed.
inline TrainResult train_denoiser(const std::vector<ComplexField>& dataset,
                                  const DiffusionSpec& spec, const TrainConfig& cfg) {
  cfg.validate();
  if (dataset.empty()) throw config_error("train_denoiser: empty dataset");
  for (const auto& d : dataset)
    if (!d.same_shape(dataset[0])) throw dimension_error("train_denoiser: shape mismatch");
  if (!(kernel_coeffs(spec, cfg.t_floor).var > 0.0))
    throw config_error("train_denoiser: v(t_floor) must be positive");

  RngStream rng(cfg.seed, 0);
  DenoiserNet net = DenoiserNet::init(cfg.arch, rng);
  DenoiserNet ema = net;
  detail::AdamState st_w1(net.w1.size()), st_b1(net.b1.size()), st_w2(net.w2.size()),
      st_b2(net.b2.size());

  TrainResult result;
  result.loss_history.reserve(static_cast<std::size_t>(cfg.iterations));
  for (int it = 1; it <= cfg.iterations; ++it) {
    ParamGrads grads(net);
    double batch_loss = 0.0;
    for (int b = 0; b < cfg.batch_size; ++b) {
      const auto& x0 = dataset[rng.uniform_index(dataset.size())];
      const double t = cfg.t_floor + (1.0 - cfg.t_floor) * rng.uniform();
      const ComplexField z = rng.normal_field(x0.rows(), x0.cols(), Domain::image);
      batch_loss += denoiser_loss_grad(net, spec, x0, t, z, &grads);
    }
    batch_loss /= cfg.batch_size;
    grads.scale(1.0 / cfg.batch_size);
    if (!std::isfinite(batch_loss))
      throw divergence_error("train_denoiser: non-finite loss", it);
    detail::adam_update(net.w1, grads.w1, st_w1, cfg.learning_rate, it);
    detail::adam_update(net.b1, grads.b1, st_b1, cfg.learning_rate, it);
    detail::adam_update(net.w2, grads.w2, st_w2, cfg.learning_rate, it);
    detail::adam_update(net.b2, grads.b2, st_b2, cfg.learning_rate, it);
    detail::ema_update(ema.w1, net.w1, cfg.ema_rate);
    detail::ema_update(ema.b1, net.b1, cfg.ema_rate);
    detail::ema_update(ema.w2, net.w2, cfg.ema_rate);
    detail::ema_update(ema.b2, net.b2, cfg.ema_rate);
    result.loss_history.push_back(batch_loss);
  }
  result.model = std::move(ema);
  result.raw = std::move(net);
  return result;
}

// Deployed score: s(x, t) = -Fh(net(x, t)) / sqrt(v(t)). Times below the
// training floor are clamped so v stays positive.
class DenoiserScore : public ScoreModel {
 public:
  DenoiserScore(DenoiserNet net, DiffusionSpec spec, double t_floor = 1e-3)
      : net_(std::move(net)), spec_(std::move(spec)), t_floor_(t_floor) {}

  ComplexField evaluate(const ComplexField& x, double t) const override {
    const double tc = std::max(t, t_floor_);
    const double v = kernel_coeffs(spec_, tc).var;
    ComplexField pred = net_.forward(x, tc);
    if (is_hfs(spec_.variant)) pred = apply_Fh(pred, spec_.freq_mask);
    pred *= -1.0 / std::sqrt(v);
    return pred;
  }

  const DenoiserNet& net() const { return net_; }

 private:
  DenoiserNet net_;
  DiffusionSpec spec_;
  double t_floor_;
};

// Checkpoint: <base>.json manifest + <base>.bin little-endian float64 blob in
// the order w1, b1, w2, b2.
inline void save_checkpoint(const std::string& base, const DenoiserNet& net,
                            const DiffusionSpec& spec, double ema_rate, std::uint64_t seed) {
  nlohmann::json j;
  j["arch"] = net.arch;
  j["spec"] = spec;
  j["ema_rate"] = ema_rate;
  j["seed"] = seed;
  j["param_count"] = net.param_count();
  j["blob"] = base + ".bin";
  std::ofstream jf(base + ".json");
  if (!jf) throw io_error("cannot write " + base + ".json");
  jf << j.dump(2) << "\n";

  std::ofstream bf(base + ".bin", std::ios::binary);
  if (!bf) throw io_error("cannot write " + base + ".bin");
  auto dump = [&bf](const std::vector<double>& v) {
    bf.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(v.size() * sizeof(double)));
  };
  dump(net.w1);
  dump(net.b1);
  dump(net.w2);
  dump(net.b2);
}

struct Checkpoint {
  DenoiserNet net;
  DiffusionSpec spec;
  double ema_rate = 0.0;
  std::uint64_t seed = 0;
};

inline Checkpoint load_checkpoint(const std::string& json_path) {
  std::ifstream jf(json_path);
  if (!jf) throw io_error("cannot read " + json_path);
  nlohmann::json j;
  jf >> j;
  Checkpoint ck;
  ck.spec = j.at("spec").get<DiffusionSpec>();
  ck.ema_rate = j.at("ema_rate").get<double>();
  ck.seed = j.at("seed").get<std::uint64_t>();
  ck.net.arch = j.at("arch").get<ArchDescriptor>();
  RngStream dummy(0);
  ck.net = DenoiserNet::init(ck.net.arch, dummy);

  std::ifstream bf(j.at("blob").get<std::string>(), std::ios::binary);
  if (!bf) throw io_error("cannot read checkpoint blob");
  auto slurp = [&bf, &json_path](std::vector<double>& v) {
    bf.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
    if (!bf) throw io_error("checkpoint blob truncated: " + json_path);
  };
  slurp(ck.net.w1);
  slurp(ck.net.b1);
  slurp(ck.net.w2);
  slurp(ck.net.b2);
  if (ck.net.param_count() != j.at("param_count").get<std::size_t>())
    throw io_error("checkpoint parameter count mismatch");
  return ck;
}

}  // namespace hfsdiff
