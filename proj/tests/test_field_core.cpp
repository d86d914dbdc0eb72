#include <catch2/catch_amalgamated.hpp>

#include "hfsdiff/fft.hpp"
#include "hfsdiff/masks.hpp"
#include "hfsdiff/operators.hpp"
#include "hfsdiff/rng.hpp"
#include "oracles.hpp"

using namespace hfsdiff;

namespace {

ComplexField random_field(std::size_t rows, std::size_t cols, RngStream& rng,
                          Domain d = Domain::image) {
  return rng.normal_field(rows, cols, d);
}

}  // namespace

TEST_CASE("philox4x32-10 known-answer vectors") {
  // Reference vectors from the Random123 distribution's kat_vectors file.
  auto r0 = RngStream::philox4x32({0, 0, 0, 0}, {0, 0});
  CHECK(r0 == std::array<std::uint32_t, 4>{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});

  auto r1 = RngStream::philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                                  {0xffffffffu, 0xffffffffu});
  CHECK(r1 == std::array<std::uint32_t, 4>{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});

  auto r2 = RngStream::philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                                  {0xa4093822u, 0x299f31d0u});
  CHECK(r2 == std::array<std::uint32_t, 4>{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("rng streams are reproducible and independent") {
  RngStream a(1234, 7);
  RngStream b(1234, 7);
  for (int i = 0; i < 1000; ++i) {
    REQUIRE(a.next_u32() == b.next_u32());
  }
  const double da = a.normal();
  const double db = b.normal();
  CHECK(da == db);

  RngStream c(1234, 8);
  bool any_diff = false;
  RngStream a2(1234, 7);
  for (int i = 0; i < 16; ++i) any_diff |= (a2.next_u32() != c.next_u32());
  CHECK(any_diff);
}

TEST_CASE("complex normal has unit variance per component") {
  RngStream rng(99);
  const int n = 200000;
  double sum_re = 0, sum_im = 0, ss_re = 0, ss_im = 0;
  for (int i = 0; i < n; ++i) {
    const cdouble z = rng.complex_normal();
    sum_re += z.real();
    sum_im += z.imag();
    ss_re += z.real() * z.real();
    ss_im += z.imag() * z.imag();
  }
  const double se_mean = 1.0 / std::sqrt(static_cast<double>(n));
  CHECK(std::abs(sum_re / n) < 4 * se_mean);
  CHECK(std::abs(sum_im / n) < 4 * se_mean);
  CHECK(ss_re / n == Catch::Approx(1.0).margin(4 * std::sqrt(2.0 / n)));
  CHECK(ss_im / n == Catch::Approx(1.0).margin(4 * std::sqrt(2.0 / n)));
}

TEST_CASE("normal draws match the standard normal law") {
  // Moments to fourth order plus tail masses at 1, 2, 3 sigma, all within
  // 4.5 standard errors at n = 2e6.
  RngStream rng(2024);
  const int n = 2000000;
  double m1 = 0, m2 = 0, m3 = 0, m4 = 0;
  int tail1 = 0, tail2 = 0, tail3 = 0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    m1 += x;
    m2 += x * x;
    m3 += x * x * x;
    m4 += x * x * x * x;
    const double a = std::abs(x);
    tail1 += a > 1.0;
    tail2 += a > 2.0;
    tail3 += a > 3.0;
  }
  m1 /= n;
  m2 /= n;
  m3 /= n;
  m4 /= n;
  const double rn = std::sqrt(static_cast<double>(n));
  CHECK(std::abs(m1) < 4.5 / rn);
  CHECK(std::abs(m2 - 1.0) < 4.5 * std::sqrt(2.0) / rn);
  CHECK(std::abs(m3) < 4.5 * std::sqrt(15.0) / rn);
  CHECK(std::abs(m4 - 3.0) < 4.5 * std::sqrt(96.0) / rn);

  auto check_tail = [&](int count, double p) {
    const double se = std::sqrt(p * (1.0 - p) / n);
    CHECK(std::abs(static_cast<double>(count) / n - p) < 4.5 * se);
  };
  check_tail(tail1, 0.31731050786291410);  // 2*(1 - Phi(1))
  check_tail(tail2, 0.045500263896358417);
  check_tail(tail3, 0.0026997960632601866);
}

TEST_CASE("fft of centered impulse is flat") {
  ComplexField x(8, 8, Domain::image);
  x(4, 4) = 1.0;
  const ComplexField k = fft2_centered(x);
  REQUIRE(k.domain() == Domain::kspace);
  for (std::size_t i = 0; i < k.size(); ++i) {
    CHECK(k[i].real() == Catch::Approx(0.125).margin(1e-14));
    CHECK(std::abs(k[i].imag()) < 1e-14);
  }
}

TEST_CASE("fft round trip and Parseval") {
  RngStream rng(5);
  const ComplexField x = random_field(64, 64, rng);
  const ComplexField k = fft2_centered(x);
  const ComplexField back = ifft2_centered(k);
  CHECK(oracles::rel_err(back, x) < 1e-12);
  CHECK(std::abs(norm2(k) - norm2(x)) < 1e-12 * norm2(x));
}

TEST_CASE("fft matches the dense centered DFT matrix") {
  RngStream rng(17);
  for (auto [rows, cols] : {std::pair<std::size_t, std::size_t>{4, 4},
                            {8, 8},
                            {6, 10},    // Bluestein path
                            {5, 8},     // mixed odd/pow2
                            {12, 12}}) {
    const ComplexField x = random_field(rows, cols, rng);
    const oracles::Mat F = oracles::dense_dft(rows, cols);
    const oracles::Vec want = F * oracles::to_vec(x);
    const ComplexField got = fft2_centered(x);
    CHECK(oracles::rel_err(oracles::to_vec(got), want) < 1e-12);

    const oracles::Vec inv_want = F.adjoint() * oracles::to_vec(got);
    const ComplexField inv_got = ifft2_centered(got);
    CHECK(oracles::rel_err(oracles::to_vec(inv_got), inv_want) < 1e-12);
  }
}

TEST_CASE("fft rejects wrong-domain input and empty grids") {
  CHECK_THROWS_AS(ComplexField(0, 4), dimension_error);
  ComplexField k(4, 4, Domain::kspace);
  CHECK_THROWS_AS(fft2_centered(k), config_error);
  ComplexField x(4, 4, Domain::image);
  CHECK_THROWS_AS(ifft2_centered(x), config_error);
}

TEST_CASE("frequency mask band placement") {
  const FrequencyMask m = FrequencyMask::centered(16, 320, 12);
  CHECK(m.low_start() == 152);
  CHECK(m.is_low_line(152));
  CHECK(m.is_low_line(167));
  CHECK_FALSE(m.is_low_line(151));
  CHECK_FALSE(m.is_low_line(168));

  const FrequencyMask odd = FrequencyMask::centered(3, 9, 9);
  CHECK(odd.low_start() == 3);  // lines 3,4,5 around center 4

  CHECK_THROWS_AS(FrequencyMask::centered(33, 32, 32), config_error);

  // low-set and high-set partition all lines
  const FrequencyMask m2 = FrequencyMask::centered(4, 16, 16);
  std::size_t low = 0;
  for (std::size_t i = 0; i < 16; ++i) low += m2.is_low_line(i) ? 1 : 0;
  CHECK(low == 4);
}

TEST_CASE("Fh/Fl partition, idempotency, orthogonality, self-adjointness") {
  RngStream rng(21);
  for (std::size_t nl : {std::size_t(1), std::size_t(4), std::size_t(7)}) {
    const FrequencyMask m = FrequencyMask::centered(nl, 16, 12);
    const ComplexField x = random_field(16, 12, rng);
    const ComplexField y = random_field(16, 12, rng);
    const ComplexField xh = apply_Fh(x, m);
    const ComplexField xl = apply_Fl(x, m);

    CHECK(oracles::rel_err(xh + xl, x) < 1e-12);
    CHECK(oracles::rel_err(apply_Fh(xh, m), xh) < 1e-12);
    CHECK(oracles::rel_err(apply_Fl(xl, m), xl) < 1e-12);
    CHECK(norm2(apply_Fh(xl, m)) < 1e-12 * norm2(x));
    CHECK(std::abs(dot(xh, xl)) < 1e-12 * norm2_sq(x));
    CHECK(std::abs(dot(apply_Fh(x, m), y) - dot(x, apply_Fh(y, m))) <
          1e-12 * norm2(x) * norm2(y));
  }
}

TEST_CASE("Fh with n_l = 0 is the exact identity") {
  RngStream rng(3);
  const FrequencyMask m = FrequencyMask::centered(0, 8, 8);
  const ComplexField x = random_field(8, 8, rng);
  const ComplexField xh = apply_Fh(x, m);
  for (std::size_t i = 0; i < x.size(); ++i) {
    REQUIRE(xh[i].real() == x[i].real());
    REQUIRE(xh[i].imag() == x[i].imag());
  }
  CHECK(norm2(apply_Fl(x, m)) == 0.0);

  const FrequencyMask full = FrequencyMask::centered(8, 8, 8);
  const ComplexField xl = apply_Fl(x, full);
  for (std::size_t i = 0; i < x.size(); ++i) REQUIRE(xl[i] == x[i]);
  CHECK(norm2(apply_Fh(x, full)) == 0.0);
}

TEST_CASE("Fh matches dense operator, including axis 1") {
  RngStream rng(31);
  for (int axis : {0, 1}) {
    const FrequencyMask m = FrequencyMask::centered(2, 4, 6, axis);
    const ComplexField x = random_field(4, 6, rng);
    const oracles::Mat Fh = oracles::dense_fh(m);
    const oracles::Vec want = Fh * oracles::to_vec(x);
    CHECK(oracles::rel_err(oracles::to_vec(apply_Fh(x, m)), want) < 1e-12);
  }
}

namespace {

// Two hand-normalized coils: |c1|^2 + |c2|^2 = 1 pointwise.
CoilSet two_coils(std::size_t rows, std::size_t cols) {
  CoilSet csm;
  ComplexField c1(rows, cols, Domain::image), c2(rows, cols, Domain::image);
  for (std::size_t c = 0; c < cols; ++c)
    for (std::size_t r = 0; r < rows; ++r) {
      const double w =
          0.3 + 0.4 * (static_cast<double>(r) / rows) + 0.2 * (static_cast<double>(c) / cols);
      const double phase = 0.5 * static_cast<double>(r) - 0.3 * static_cast<double>(c);
      c1(r, c) = std::sqrt(w) * cdouble(std::cos(phase), std::sin(phase));
      c2(r, c) = std::sqrt(1.0 - w);
    }
  csm.maps = {c1, c2};
  return csm;
}

}  // namespace

TEST_CASE("multicoil operators") {
  RngStream rng(41);
  const FrequencyMask m = FrequencyMask::centered(2, 4, 4);
  const ComplexField x = random_field(4, 4, rng);

  SECTION("single all-ones coil reduces to Fh") {
    CoilSet unit;
    ComplexField ones(4, 4, Domain::image);
    ones.fill(1.0);
    unit.maps = {ones};
    CHECK(oracles::rel_err(multicoil_Fh(x, unit, m), apply_Fh(x, m)) < 1e-12);
    CHECK(oracles::rel_err(multicoil_Fl(x, unit, m), apply_Fl(x, m)) < 1e-12);
  }

  SECTION("partition under SOS normalization") {
    const CoilSet csm = two_coils(4, 4);
    const ComplexField sum = multicoil_Fh(x, csm, m) + multicoil_Fl(x, csm, m);
    CHECK(oracles::rel_err(sum, x) < 1e-12);
  }

  SECTION("matches the dense operator") {
    const CoilSet csm = two_coils(4, 4);
    const oracles::Mat Mh = oracles::dense_multicoil(csm, m, true);
    const oracles::Vec want = Mh * oracles::to_vec(x);
    CHECK(oracles::rel_err(oracles::to_vec(multicoil_Fh(x, csm, m)), want) < 1e-12);
  }

  SECTION("unnormalized csm rejected") {
    CoilSet bad = two_coils(4, 4);
    bad.maps[0] *= 1.01;
    CHECK_THROWS_AS(multicoil_Fh(x, bad, m), config_error);
  }
}

TEST_CASE("encode and adjoint") {
  RngStream rng(51);

  SECTION("full sampling with a unit coil is the plain FFT") {
    const ComplexField x = random_field(8, 8, rng);
    CoilSet unit;
    ComplexField ones(8, 8, Domain::image);
    ones.fill(1.0);
    unit.maps = {ones};
    const SamplingMask mu = SamplingMask::full(8, 8);
    const CoilKSpace y = encode(x, unit, mu);
    REQUIRE(y.size() == 1);
    CHECK(oracles::rel_err(y[0], fft2_centered(x)) < 1e-13);
  }

  SECTION("adjoint identity <Ax,y> = <x,A^H y>") {
    const std::size_t rows = 16, cols = 16;
    CoilSet csm;
    for (int j = 0; j < 4; ++j) csm.maps.push_back(random_field(rows, cols, rng));
    // any maps work for the adjoint identity; normalization is irrelevant here
    SamplingMask mu = SamplingMask::full(rows, cols);
    for (std::size_t i = 0; i < rows; i += 3) mu.line_sampled[i] = 0;

    const ComplexField x = random_field(rows, cols, rng);
    CoilKSpace y;
    for (int j = 0; j < 4; ++j) y.push_back(random_field(rows, cols, rng, Domain::kspace));

    const CoilKSpace ax = encode(x, csm, mu);
    cdouble lhs = 0.0;
    for (int j = 0; j < 4; ++j) lhs += dot(ax[j], y[j]);
    const ComplexField aty = adjoint(y, csm, mu);
    const cdouble rhs = dot(x, aty);
    double ynorm = 0.0;
    for (const auto& yj : y) ynorm += norm2_sq(yj);
    CHECK(std::abs(lhs - rhs) <= 1e-10 * norm2(x) * std::sqrt(ynorm));
  }

  SECTION("A^H A matches the dense oracle on 4x4, 2 coils, alternate lines") {
    const CoilSet csm = two_coils(4, 4);
    SamplingMask mu = SamplingMask::full(4, 4);
    mu.line_sampled = {0, 1, 0, 1};
    const ComplexField x = random_field(4, 4, rng);

    oracles::Mat normal = oracles::Mat::Zero(16, 16);
    for (const auto& map : csm.maps) {
      const oracles::Mat A = oracles::dense_encode_block(map, mu);
      normal += A.adjoint() * A;
    }
    const oracles::Vec want = normal * oracles::to_vec(x);
    const ComplexField got = adjoint(encode(x, csm, mu), csm, mu);
    CHECK(oracles::rel_err(oracles::to_vec(got), want) < 1e-12);
  }

  SECTION("shape mismatch raises dimension errors") {
    const ComplexField x = random_field(4, 4, rng);
    CoilSet unit;
    ComplexField ones(4, 4, Domain::image);
    ones.fill(1.0);
    unit.maps = {ones};
    const SamplingMask mu = SamplingMask::full(8, 8);
    CHECK_THROWS_AS(encode(x, unit, mu), dimension_error);
  }
}

TEST_CASE("exp_Fh closed form") {
  RngStream rng(61);
  const FrequencyMask m = FrequencyMask::centered(2, 8, 8);
  const ComplexField x = random_field(8, 8, rng);

  SECTION("k = 0 leaves the field untouched") {
    const ComplexField y = exp_Fh(0.0, x, m);
    for (std::size_t i = 0; i < x.size(); ++i) REQUIRE(y[i] == x[i]);
  }

  SECTION("identity on purely low-frequency input") {
    const ComplexField xl = apply_Fl(x, m);
    const ComplexField y = exp_Fh(-3.7, xl, m);
    CHECK(oracles::rel_err(y, xl) < 1e-12);
  }

  SECTION("scales the high band by e^k") {
    const double k = -1.25;
    const ComplexField y = exp_Fh(k, x, m);
    const ComplexField want = apply_Fl(x, m) + std::exp(k) * apply_Fh(x, m);
    CHECK(oracles::rel_err(y, want) < 1e-12);
  }

  SECTION("semigroup") {
    const ComplexField two_step = exp_Fh(-1.5, exp_Fh(-3.525, x, m), m);
    const ComplexField one_step = exp_Fh(-5.025, x, m);
    CHECK(oracles::rel_err(two_step, one_step) < 1e-12);
  }

  SECTION("non-finite k rejected") {
    CHECK_THROWS_AS(exp_Fh(std::nan(""), x, m), config_error);
  }
}
