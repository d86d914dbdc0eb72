#pragma once

#include <array>
#include <cstdint>

#include "hfsdiff/core.hpp"

namespace hfsdiff {

namespace detail {

// Marsaglia-Tsang ziggurat tables for the standard normal, 256 layers with
// r = 3.6541528853610088 and layer area 4.928673233974658e-3. Positions are
// resolved with 52 bits (scale 2^52); index, sign and position come from
// disjoint bits of one 64-bit draw. Built once at startup with plain double
// arithmetic, so the table contents are deterministic.
struct ZigguratTables {
  std::array<std::uint64_t, 256> kn{};
  std::array<double, 256> wn{}, fn{};
  static constexpr double r = 3.6541528853610088;

  ZigguratTables() {
    constexpr double v = 4.928673233974658e-3;
    constexpr double m = 4503599627370496.0;  // 2^52
    double dn = r, tn = r;
    const double q = v / std::exp(-0.5 * dn * dn);
    kn[0] = static_cast<std::uint64_t>((dn / q) * m);
    kn[1] = 0;
    wn[0] = q / m;
    wn[255] = dn / m;
    fn[0] = 1.0;
    fn[255] = std::exp(-0.5 * dn * dn);
    for (int i = 254; i >= 1; --i) {
      dn = std::sqrt(-2.0 * std::log(v / dn + std::exp(-0.5 * dn * dn)));
      kn[i + 1] = static_cast<std::uint64_t>((dn / tn) * m);
      tn = dn;
      fn[i] = std::exp(-0.5 * dn * dn);
      wn[i] = dn / m;
    }
  }
};

inline const ZigguratTables& ziggurat() {
  static const ZigguratTables t;
  return t;
}

}  // namespace detail

// Counter-based random stream built on Philox4x32-10 (Salmon et al., SC'11).
// The 64-bit key is the user seed; the counter packs (block index, stream id),
// so disjoint stream ids give statistically independent substreams and every
// draw is reproducible from (seed, stream_id, call sequence). Normals use the
// Marsaglia-Tsang ziggurat, an exact rejection sampler.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed = 0, std::uint64_t stream_id = 0)
      : seed_(seed), stream_(stream_id) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_; }

  // Raw Philox4x32-10 block, exposed for known-answer tests.
  static std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                                 std::array<std::uint32_t, 2> key) {
    constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
    constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = static_cast<std::uint64_t>(M0) * ctr[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(M1) * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
             static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
             static_cast<std::uint32_t>(p0)};
      key[0] += W0;
      key[1] += W1;
    }
    return ctr;
  }

  std::uint32_t next_u32() {
    if (have_u32_) {
      have_u32_ = false;
      return spare_u32_;
    }
    const std::uint64_t v = next_u64();
    spare_u32_ = static_cast<std::uint32_t>(v >> 32);
    have_u32_ = true;
    return static_cast<std::uint32_t>(v);
  }

  std::uint64_t next_u64() {
    if (buf_pos_ == 4) refill();
    return buf_[buf_pos_++];
  }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal draw. One u64 per attempt: bits 0-7 select the layer,
  // bit 8 the sign, bits 12-63 the 52-bit position within the layer.
  double normal() {
    const auto& z = detail::ziggurat();
    for (;;) {
      const std::uint64_t u = next_u64();
      const std::size_t iz = static_cast<std::size_t>(u & 255u);
      const bool neg = (u >> 8) & 1u;
      const std::uint64_t pos = u >> 12;
      const double x = static_cast<double>(pos) * z.wn[iz];
      if (pos < z.kn[iz]) return neg ? -x : x;

      if (iz == 0) {
        // Tail beyond r: Marsaglia's exact tail sampler.
        double xt, yt;
        do {
          xt = -std::log(1.0 - uniform()) / detail::ZigguratTables::r;
          yt = -std::log(1.0 - uniform());
        } while (yt + yt < xt * xt);
        const double v = detail::ZigguratTables::r + xt;
        return neg ? -v : v;
      }
      if (z.fn[iz] + uniform() * (z.fn[iz - 1] - z.fn[iz]) < std::exp(-0.5 * x * x))
        return neg ? -x : x;
      // wedge rejected; redraw
    }
  }

  // Complex standard normal: independent unit-variance normals on the real
  // and imaginary parts.
  cdouble complex_normal() {
    const double re = normal();
    const double im = normal();
    return {re, im};
  }

  // Field of i.i.d. complex standard normals, filled in storage order.
  ComplexField normal_field(std::size_t rows, std::size_t cols, Domain d = Domain::image) {
    ComplexField z(rows, cols, d);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = complex_normal();
    return z;
  }

  // Uniform integer in [0, n), exact via threshold rejection.
  std::uint64_t uniform_index(std::uint64_t n) {
    if (n == 0) throw config_error("uniform_index: n must be positive");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % n;
  }

 private:
  // Two consecutive counter blocks per refill; the round loop is written over
  // both blocks at once so the 64-bit multiplies of independent blocks
  // overlap instead of serializing on the round dependency chain.
  void refill() {
    constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
    constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
    std::uint32_t k0 = static_cast<std::uint32_t>(seed_);
    std::uint32_t k1 = static_cast<std::uint32_t>(seed_ >> 32);
    std::array<std::array<std::uint32_t, 4>, 2> c;
    for (int b = 0; b < 2; ++b) {
      const std::uint64_t blk = block_ + static_cast<std::uint64_t>(b);
      c[b] = {static_cast<std::uint32_t>(blk), static_cast<std::uint32_t>(blk >> 32),
              static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
    }
    for (int round = 0; round < 10; ++round) {
      for (int b = 0; b < 2; ++b) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(M0) * c[b][0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(M1) * c[b][2];
        c[b] = {static_cast<std::uint32_t>(p1 >> 32) ^ c[b][1] ^ k0,
                static_cast<std::uint32_t>(p1),
                static_cast<std::uint32_t>(p0 >> 32) ^ c[b][3] ^ k1,
                static_cast<std::uint32_t>(p0)};
      }
      k0 += W0;
      k1 += W1;
    }
    for (int b = 0; b < 2; ++b) {
      buf_[static_cast<std::size_t>(2 * b)] =
          (static_cast<std::uint64_t>(c[b][1]) << 32) | c[b][0];
      buf_[static_cast<std::size_t>(2 * b + 1)] =
          (static_cast<std::uint64_t>(c[b][3]) << 32) | c[b][2];
    }
    block_ += 2;
    buf_pos_ = 0;
  }

  std::uint64_t seed_ = 0;
  std::uint64_t stream_ = 0;
  std::uint64_t block_ = 0;
  std::array<std::uint64_t, 4> buf_{};
  int buf_pos_ = 4;
  std::uint32_t spare_u32_ = 0;
  bool have_u32_ = false;
};

}  // namespace hfsdiff
