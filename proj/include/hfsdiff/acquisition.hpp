#pragma once

#include <algorithm>
#include <cmath>

#include "hfsdiff/operators.hpp"
#include "hfsdiff/rng.hpp"

#include "json.hpp"

namespace hfsdiff {

enum class PhantomKind { shepp_logan, gaussian_blobs, lowfreq_only, flat_regions };

inline std::string phantom_kind_name(PhantomKind k) {
  switch (k) {
    case PhantomKind::shepp_logan: return "shepp_logan";
    case PhantomKind::gaussian_blobs: return "gaussian_blobs";
    case PhantomKind::lowfreq_only: return "lowfreq_only";
    case PhantomKind::flat_regions: return "flat_regions";
  }
  return "?";
}

inline PhantomKind phantom_kind_from_name(const std::string& s) {
  if (s == "shepp_logan") return PhantomKind::shepp_logan;
  if (s == "gaussian_blobs") return PhantomKind::gaussian_blobs;
  if (s == "lowfreq_only") return PhantomKind::lowfreq_only;
  if (s == "flat_regions") return PhantomKind::flat_regions;
  throw config_error("unknown phantom kind '" + s + "'");
}

// Ground-truth object, normalized so the complex samples have unit standard
// deviation; the scale that was divided out is kept for the record.
struct Phantom {
  ComplexField image;
  PhantomKind kind = PhantomKind::shepp_logan;
  double norm_std = 1.0;
};

namespace detail {

struct Ellipse {
  double value, a, b, x0, y0, phi_deg;
};

// Toft's modified Shepp-Logan intensities.
inline const std::vector<Ellipse>& shepp_logan_ellipses() {
  static const std::vector<Ellipse> e = {
      {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},      {-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0},
      {-0.2, 0.11, 0.31, 0.22, 0.0, -18.0},  {-0.2, 0.16, 0.41, -0.22, 0.0, 18.0},
      {0.1, 0.21, 0.25, 0.0, 0.35, 0.0},     {0.1, 0.046, 0.046, 0.0, 0.1, 0.0},
      {0.1, 0.046, 0.046, 0.0, -0.1, 0.0},   {0.1, 0.046, 0.023, -0.08, -0.605, 0.0},
      {0.1, 0.023, 0.023, 0.0, -0.606, 0.0}, {0.1, 0.023, 0.046, 0.06, -0.605, 0.0}};
  return e;
}

}  // namespace detail

// Deterministic test objects. `lowfreq_nl` configures the band of the
// lowfreq_only kind (0 picks rows/4); the other kinds ignore it.
inline Phantom make_phantom(PhantomKind kind, std::size_t rows, std::size_t cols, RngStream& rng,
                            std::size_t lowfreq_nl = 0) {
  if (rows < 8 || cols < 8) throw config_error("make_phantom: grid must be at least 8x8");
  Phantom p;
  p.kind = kind;
  ComplexField img(rows, cols, Domain::image);

  switch (kind) {
    case PhantomKind::shepp_logan: {
      for (std::size_t c = 0; c < cols; ++c)
        for (std::size_t r = 0; r < rows; ++r) {
          // y runs top-to-bottom in [-1, 1], x left-to-right.
          const double y = -(2.0 * static_cast<double>(r) / (rows - 1) - 1.0);
          const double x = 2.0 * static_cast<double>(c) / (cols - 1) - 1.0;
          double val = 0.0;
          for (const auto& e : detail::shepp_logan_ellipses()) {
            const double th = e.phi_deg * 3.14159265358979323846 / 180.0;
            const double xr = std::cos(th) * (x - e.x0) + std::sin(th) * (y - e.y0);
            const double yr = -std::sin(th) * (x - e.x0) + std::cos(th) * (y - e.y0);
            if (xr * xr / (e.a * e.a) + yr * yr / (e.b * e.b) <= 1.0) val += e.value;
          }
          // gentle smooth phase so the object is genuinely complex-valued
          const double phase = 0.6 * x + 0.4 * y * y;
          img(r, c) = val * cdouble(std::cos(phase), std::sin(phase));
        }
      break;
    }
    case PhantomKind::gaussian_blobs: {
      const int blobs = 6;
      for (int b = 0; b < blobs; ++b) {
        const double cy = rng.uniform() * rows;
        const double cx = rng.uniform() * cols;
        const double w = (0.05 + 0.15 * rng.uniform()) * std::min(rows, cols);
        const cdouble amp = rng.complex_normal();
        for (std::size_t c = 0; c < cols; ++c)
          for (std::size_t r = 0; r < rows; ++r) {
            const double dr = (static_cast<double>(r) - cy) / w;
            const double dc = (static_cast<double>(c) - cx) / w;
            img(r, c) += amp * std::exp(-0.5 * (dr * dr + dc * dc));
          }
      }
      break;
    }
    case PhantomKind::lowfreq_only: {
      const std::size_t nl = lowfreq_nl ? lowfreq_nl : std::max<std::size_t>(2, rows / 4);
      const FrequencyMask m = FrequencyMask::centered(nl, rows, cols);
      ComplexField k(rows, cols, Domain::kspace);
      for (std::size_t c = 0; c < cols; ++c)
        for (std::size_t r = 0; r < rows; ++r)
          if (m.is_low_line(r)) {
            const double dc = (static_cast<double>(c) - static_cast<double>(cols / 2)) /
                              static_cast<double>(cols);
            k(r, c) = rng.complex_normal() * std::exp(-8.0 * dc * dc);
          }
      img = ifft2_centered(k);
      break;
    }
    case PhantomKind::flat_regions: {
      // Two large constant areas (grey background, black block) plus two
      // small bright details.
      const double grey = 0.55;
      for (std::size_t c = 0; c < cols; ++c)
        for (std::size_t r = 0; r < rows; ++r) img(r, c) = grey;
      const std::size_t r0 = rows / 10, r1 = rows / 10 + (rows * 5) / 10;
      const std::size_t c0 = cols / 10, c1 = cols / 10 + (cols * 45) / 100;
      for (std::size_t c = c0; c < c1; ++c)
        for (std::size_t r = r0; r < r1; ++r) img(r, c) = 0.0;
      auto ellipse = [&](double cy, double cx, double ra, double rb, double val) {
        for (std::size_t c = 0; c < cols; ++c)
          for (std::size_t r = 0; r < rows; ++r) {
            const double dy = (static_cast<double>(r) - cy) / ra;
            const double dx = (static_cast<double>(c) - cx) / rb;
            if (dy * dy + dx * dx <= 1.0) img(r, c) = val;
          }
      };
      ellipse(0.72 * rows, 0.70 * cols, 0.10 * rows, 0.07 * cols, 0.95);
      ellipse(0.72 * rows, 0.32 * cols, 0.05 * rows, 0.09 * cols, 0.80);
      break;
    }
  }

  const double s = stddev(img);
  if (!(s > 0.0)) throw config_error("make_phantom: degenerate (constant) phantom");
  img *= 1.0 / s;
  p.image = std::move(img);
  p.norm_std = s;
  return p;
}

// Smooth complex Gaussian-lobe coil profiles, SOS-normalized to 1 at every
// pixel. A single coil reduces to the all-ones map.
inline CoilSet make_csm(std::size_t n_coils, std::size_t rows, std::size_t cols) {
  if (n_coils < 1) throw config_error("make_csm: need at least one coil");
  const double cr = 0.5 * (rows - 1), cc = 0.5 * (cols - 1);
  const double radius = 0.38 * std::min(rows, cols);
  const double width = 0.85 * std::min(rows, cols);
  std::vector<ComplexField> raw;
  raw.reserve(n_coils);
  for (std::size_t j = 0; j < n_coils; ++j) {
    const double ang = 2.0 * 3.14159265358979323846 * static_cast<double>(j) / n_coils;
    const double oy = n_coils == 1 ? 0.0 : cr + radius * std::sin(ang);
    const double ox = n_coils == 1 ? 0.0 : cc + radius * std::cos(ang);
    ComplexField f(rows, cols, Domain::image);
    for (std::size_t c = 0; c < cols; ++c)
      for (std::size_t r = 0; r < rows; ++r) {
        const double dy = (static_cast<double>(r) - (n_coils == 1 ? cr : oy)) / width;
        const double dx = (static_cast<double>(c) - (n_coils == 1 ? cc : ox)) / width;
        const double mag = std::exp(-0.5 * (dy * dy + dx * dx)) + 0.05;
        const double phase =
            0.9 * static_cast<double>(j) *
            ((static_cast<double>(r) - cr) / rows - (static_cast<double>(c) - cc) / cols);
        f(r, c) = mag * cdouble(std::cos(phase), std::sin(phase));
      }
    raw.push_back(std::move(f));
  }
  CoilSet csm;
  csm.maps.assign(n_coils, ComplexField(rows, cols, Domain::image));
  for (std::size_t c = 0; c < cols; ++c)
    for (std::size_t r = 0; r < rows; ++r) {
      double sos = 0.0;
      for (const auto& f : raw) sos += std::norm(f(r, c));
      const double inv = 1.0 / std::sqrt(sos);
      for (std::size_t j = 0; j < n_coils; ++j) csm.maps[j](r, c) = raw[j](r, c) * inv;
    }
  return csm;
}

enum class MaskKind { uniform, gaussian_density };

inline std::string mask_kind_name(MaskKind k) {
  return k == MaskKind::uniform ? "uniform" : "gaussian_density";
}

inline MaskKind mask_kind_from_name(const std::string& s) {
  if (s == "uniform") return MaskKind::uniform;
  if (s == "gaussian_density") return MaskKind::gaussian_density;
  throw config_error("unknown mask kind '" + s + "'");
}

// Line-undersampling pattern over `n_total_lines` k-space lines plus a
// centered fully sampled ACS block.
//
// uniform: lines { i : i mod factor == floor(factor/2) } plus the ACS block;
// the fixed offset reproduces the effective accelerations 5.93 (10x/24) and
// 6.81 (12x/22) on 320 lines.
//
// gaussian_density: a total budget of max(acs, ceil(n/factor)) lines; the
// non-ACS share is drawn without replacement with probability proportional
// to exp(-d^2 / (2 (n/4)^2)), d the distance to the center line, using
// Efraimidis-Spirakis weighted reservoir keys (rejection-free, reproducible).
inline SamplingMask make_undersampling_mask(MaskKind kind, unsigned factor,
                                            std::size_t acs_lines, std::size_t n_total_lines,
                                            RngStream& rng, std::size_t other_extent = 0,
                                            int axis = 0) {
  if (factor < 1) throw config_error("make_undersampling_mask: factor must be >= 1");
  if (factor > n_total_lines)
    throw config_error("make_undersampling_mask: factor exceeds line count");
  if (acs_lines > n_total_lines)
    throw config_error("make_undersampling_mask: acs_lines exceeds line count");
  if (other_extent == 0) other_extent = n_total_lines;

  SamplingMask m;
  m.axis = axis;
  m.rows = axis == 0 ? n_total_lines : other_extent;
  m.cols = axis == 0 ? other_extent : n_total_lines;
  m.nominal_factor = static_cast<double>(factor);
  m.acs_lines = acs_lines;
  m.line_sampled.assign(n_total_lines, 0);

  const std::size_t acs_start = n_total_lines / 2 - acs_lines / 2;
  for (std::size_t i = 0; i < acs_lines; ++i) m.line_sampled[acs_start + i] = 1;

  if (kind == MaskKind::uniform) {
    const std::size_t offset = factor / 2;
    for (std::size_t i = offset; i < n_total_lines; i += factor) m.line_sampled[i] = 1;
  } else {
    const std::size_t budget = std::max<std::size_t>(
        acs_lines, static_cast<std::size_t>(
                       std::ceil(static_cast<double>(n_total_lines) / factor)));
    const std::size_t extra = budget > acs_lines ? budget - acs_lines : 0;
    const double center = static_cast<double>(n_total_lines / 2);
    const double sigma = static_cast<double>(n_total_lines) / 4.0;
    std::vector<std::pair<double, std::size_t>> keys;  // (selection key, line)
    keys.reserve(n_total_lines);
    for (std::size_t i = 0; i < n_total_lines; ++i) {
      if (m.line_sampled[i]) continue;
      const double d = static_cast<double>(i) - center;
      const double w = std::exp(-d * d / (2.0 * sigma * sigma));
      const double u = 1.0 - rng.uniform();  // (0, 1]
      keys.emplace_back(std::pow(u, 1.0 / w), i);
    }
    std::sort(keys.begin(), keys.end(), [](const auto& a, const auto& b) {
      return a.first > b.first || (a.first == b.first && a.second < b.second);
    });
    for (std::size_t i = 0; i < std::min(extra, keys.size()); ++i)
      m.line_sampled[keys[i].second] = 1;
  }
  return m;
}

// y_j = M_u . F(csm_j . x) + eps_j with white complex noise of the given
// per-component standard deviation on sampled entries only; unsampled lines
// stay structural zeros. Noise is drawn coil by coil in storage order.
inline CoilKSpace acquire(const ComplexField& x, const CoilSet& csm, const SamplingMask& mu,
                          double noise_std, RngStream& rng) {
  if (noise_std < 0.0) throw config_error("acquire: noise_std must be >= 0");
  CoilKSpace y = encode(x, csm, mu);
  if (noise_std > 0.0) {
    for (auto& yj : y)
      for (std::size_t c = 0; c < yj.cols(); ++c)
        for (std::size_t r = 0; r < yj.rows(); ++r)
          if (mu.is_sampled(r, c)) yj(r, c) += noise_std * rng.complex_normal();
  }
  return y;
}

inline CoilKSpace acquire(const Phantom& p, const CoilSet& csm, const SamplingMask& mu,
                          double noise_std, RngStream& rng) {
  return acquire(p.image, csm, mu, noise_std, rng);
}

struct AcquisitionConfig {
  double noise_std = 0.0;
  std::size_t n_coils = 1;
  MaskKind mask_kind = MaskKind::uniform;
  unsigned factor = 2;
  std::size_t acs_lines = 4;
  std::uint64_t seed = 0;

  void validate() const {
    if (noise_std < 0.0) throw config_error("AcquisitionConfig: noise_std must be >= 0");
    if (factor < 1) throw config_error("AcquisitionConfig: factor must be >= 1");
    if (n_coils < 1) throw config_error("AcquisitionConfig: need at least one coil");
  }
};

inline void to_json(nlohmann::json& j, const AcquisitionConfig& a) {
  j = nlohmann::json{{"noise_std", a.noise_std}, {"n_coils", a.n_coils},
                     {"mask_kind", mask_kind_name(a.mask_kind)}, {"factor", a.factor},
                     {"acs_lines", a.acs_lines}, {"seed", a.seed}};
}

inline void from_json(const nlohmann::json& j, AcquisitionConfig& a) {
  a.noise_std = j.at("noise_std").get<double>();
  a.n_coils = j.at("n_coils").get<std::size_t>();
  a.mask_kind = mask_kind_from_name(j.at("mask_kind").get<std::string>());
  a.factor = j.at("factor").get<unsigned>();
  a.acs_lines = j.at("acs_lines").get<std::size_t>();
  a.seed = j.at("seed").get<std::uint64_t>();
  a.validate();
}

}  // namespace hfsdiff
