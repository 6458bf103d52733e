#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bhc/expsums.hpp"

#include <algorithm>

using namespace bhc;

namespace {

int quadratic_roots_in(double A, double B, double C, double lo, double hi) {
  if (A == 0.0) {
    if (B == 0.0) return 0;
    const double x = -C / B;
    return x > lo && x < hi;
  }
  const double disc = B * B - 4 * A * C;
  if (disc < 0) return 0;
  const double r1 = (-B - std::sqrt(disc)) / (2 * A), r2 = (-B + std::sqrt(disc)) / (2 * A);
  return (r1 > lo && r1 < hi) + (r2 > lo && r2 < hi && r2 != r1);
}

}  // namespace

TEST_CASE("fewnomial zeros") {
  Fewnomial two{2.0, {{1, 1}, {-2, 2}, {1, 3}}, 0.0, 5.0};
  CHECK(two(1.3) == doctest::Approx(2.0));
  const ZeroCount z = count_zeros(two, 1.0, 2.0);
  CHECK(z.count == 0);
  CHECK_FALSE(z.degenerate);
  CHECK(count_zeros(Fewnomial{1.5, {{1, 0}}, 0.5, 3.0}, 1.0, 2.0).count == 0);
  CHECK(count_zeros(Fewnomial{2.0, {{1, 1}, {-1, 1.5}}, 0.0, 5.0}, 1.0, 2.0).count == 0);

  // identically zero: (x+1)^1 - (x+2)^1 + 1 (x+0)^0 would mix exponents, so use cancelling copies
  Fewnomial zero{3.0, {{1, 0.25}, {-1, 0.2500000000001}}, 0.0, 5.0};
  CHECK(count_zeros(zero, 1.0, 2.0).degenerate);

  CHECK_THROWS_AS(count_zeros(Fewnomial{1.5, {{1, -1.5}}, 0.0, 3.0}, 1.0, 2.0), Error);
  try {
    count_zeros(two, -1.0, 2.0);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == "domain-violation");
  }

  // d = 2 against the quadratic formula
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const Fewnomial F = random_fewnomial(rng, 3, 2.0);
    double A = 0, B = 0, C = 0;
    for (const FewTerm& t : F.terms) A += t.a, B += 2 * t.a * t.alpha, C += t.a * t.alpha * t.alpha;
    CHECK(count_zeros(F, 1.0, 2.0).count == quadratic_roots_in(A, B, C, 1.0, 2.0));
  }

  // the at-most-n bound on random instances, real exponents included
  std::uniform_int_distribution<int> nn(1, 6);
  std::uniform_real_distribution<double> dd(-3.0, 6.0);
  int worst = -10;
  for (int trial = 0; trial < 300; ++trial) {
    const int n = nn(rng);
    const Fewnomial F = random_fewnomial(rng, n, dd(rng));
    const ZeroCount c = count_zeros(F, 1.0, 2.0);
    if (!c.degenerate) worst = std::max(worst, c.count - n);
  }
  CHECK(worst <= 0);
}

TEST_CASE("level sets") {
  Fewnomial two{2.0, {{1, 1}, {-2, 2}, {1, 3}}, 0.0, 5.0};
  CHECK(level_set_measure(two, 1.0, 1.0, 2.0, 10000).measure == 0.0);
  Fewnomial lin{1.0, {{1, 0}}, 0.0, 5.0};
  CHECK(level_set_measure(lin, 0.5, 1.0, 2.0, 10000).measure == 0.0);
  // |x - 1.5| < 0.1 on [1,2]
  Fewnomial shifted{1.0, {{1, -1.5}}, 0.0, 5.0};
  CHECK(level_set_measure(shifted, 0.1, 1.0, 2.0).measure == doctest::Approx(0.2).epsilon(1e-4));

  Rng rng(12);
  std::uniform_real_distribution<double> leta(-6.0, 0.0);
  double worst = 0.0;
  for (double d : {1.5, 2.0, 3.0}) {
    for (int trial = 0; trial < 30; ++trial) {
      const Fewnomial F = random_fewnomial(rng, 4, d);
      const double sup = F.scale(1.0, 2.0);
      const LevelSetReport r = level_set_measure(F, std::pow(10.0, leta(rng)) * sup, 1.0, 2.0, 20000);
      CHECK(r.interpolation_case == (d == 2.0));
      worst = std::max(worst, r.measure / r.bound);
    }
  }
  MESSAGE("worst fewnomial level-set ratio " << worst);
  CHECK(worst <= 10.0);
}

TEST_CASE("phase level sets") {
  Rng rng(13);
  const LambdaTilde lt = random_lambda_tilde(rng, 6);
  const long N = lt.N();
  CHECK(phase_levelset_bound(3 * N, 2 * N + 3, 3 * N, lt, 0.1, 3.0).infinite);
  CHECK(phase_levelset_bound(3 * N, 3 * N, 2 * N + 3, lt, 0.1, 4.0).infinite);
  CHECK(phase_levelset_bound(3 * N, 2 * N + 1, 3 * N + 5, lt, 0.1, 5.5).infinite == false);
  const PhaseBound b4 = phase_levelset_bound(2 * N, 4 * N - 2, 4 * N - 2, lt, 0.5, 4.0);
  CHECK(b4.L == doctest::Approx(std::sqrt(0.5 * N / double((2 * N - 2) * (2 * N - 2)))));

  // derivative of F_4^{a-1} equals (N/2) dP/dv at v = N x / 2
  const long p = 3 * N, q = 3 * N + 2, r = 2 * N + 5;
  const Fewnomial F = phase_fewnomial(p, q, r, lt, 4.0);
  for (long v : {N, N + 3, 2 * N - 1}) CHECK(F(2.0 * v / N) == doctest::Approx(phase_P(p, q, r, v, lt, 4.0)));

  std::uniform_int_distribution<long> idx(2 * N, 4 * N - 2);
  std::uniform_real_distribution<double> leta(-4.0, 1.0);
  for (double a : {3.0, 4.0}) {
    double worst = 0.0;
    int tested = 0;
    while (tested < 50) {
      const long pp = idx(rng), qq = idx(rng), rr = idx(rng);
      if (!lt.has(qq + rr - pp)) continue;
      const double eta = std::pow(10.0, leta(rng)) * N;
      const PhaseBound b = phase_levelset_bound(pp, qq, rr, lt, eta, a);
      if (b.infinite) continue;
      const double meas = phase_levelset_measure(pp, qq, rr, lt, eta, a, 20000);
      worst = std::max(worst, meas / (10.0 * b.L));
      ++tested;
    }
    MESSAGE("a=" << a << " worst phase level-set ratio " << worst);
    CHECK(worst <= 10.0);
  }
}

TEST_CASE("weyl sums") {
  Rng rng(14);
  for (int am : {4, 6}) {
    const LambdaTilde lt = random_lambda_tilde(rng, am);
    const long N = lt.N();
    long total = 0;
    for (long p = 2 * N; p < 4 * N - 1; ++p)
      for (long q = 2 * N; q < 4 * N - 1; ++q)
        for (long r = 2 * N; r < 4 * N - 1; ++r) total += v_window(p, q, r, N).size();
    CHECK(total == N * N * N * N);
    for (double a : {3.0, 4.0}) {
      const WeylReport z = weyl_sum(0.0, lt, a);
      CHECK(z.value.real() == std::ldexp(1.0, 2 * am));
      CHECK(z.value.imag() == 0.0);
      for (double Ns : {0.3, 0.77}) {
        const WeylReport w = weyl_sum(Ns / N, lt, a, 2);
        const double oracle = weyl_sum_squared_form(Ns / N, lt, a);
        CHECK(w.value.real() == doctest::Approx(oracle).epsilon(1e-9));
        CHECK(std::abs(w.value.imag()) <= 1e-9 * z.abs);
        CHECK(w.abs <= z.abs * (1 + 1e-12));
      }
    }
  }
  const LambdaTilde flat = constant_lambda_tilde(6, 12.0);
  CHECK(weyl_resonant(flat, 3.0));
  CHECK_FALSE(weyl_resonant(flat, 4.0));
  CHECK_FALSE(weyl_resonant(random_lambda_tilde(rng, 6), 3.0));
  // resonant family: no cancellation whatsoever
  CHECK(weyl_sum(0.9 / 8.0, flat, 3.0).normalized > 0.05);

  double prev = 2.0;
  for (int am : {4, 6, 8}) {
    const WeylScan sc = weyl_scan(random_lambda_tilde(rng, am), 4.0, 0.25, 8, 2);
    MESSAGE("am=" << am << " max |J|/2^{2am} = " << sc.max_normalized);
    CHECK(sc.max_normalized < prev);
    CHECK_FALSE(sc.resonant);
    prev = sc.max_normalized;
  }

  set_sample_budget(100);
  CHECK_THROWS_AS(weyl_sum(0.1, random_lambda_tilde(rng, 4), 4.0), Error);
  set_sample_budget(std::int64_t(1) << 26);
}

TEST_CASE("van der corput") {
  const VdcReport third = vdc_check([](double n) { return n / 3.0; }, 0, 99, 1.0 / 3.0);
  CHECK(third.sum_abs == doctest::Approx(1.0));
  CHECK(third.bound == doctest::Approx(9.0));
  CHECK(third.admissible);
  const VdcReport near_half = vdc_check([](double n) { return 0.49 * n; }, 0, 99, 0.49);
  CHECK(near_half.sum_abs < 1e-9);
  CHECK(near_half.bound == doctest::Approx(3.0 / 0.49));
  CHECK(near_half.admissible);
  CHECK_FALSE(vdc_check([](double n) { return 0.2 * n; }, 0, 50, 0.3).admissible);
  CHECK_FALSE(vdc_check([](double n) { return 0.01 * n * n - 0.3 * n; }, 0, 30, 0.01).admissible);

  CHECK(calibrate_vdc_constant() <= vdc_constant);

  Rng rng(15);
  std::uniform_real_distribution<double> th(0.0, 1.0), be(-0.05, 0.05);
  int run = 0, bad = 0;
  while (run < 200) {
    const double t = th(rng), b = be(rng);
    auto F = [=](double n) { return t * n + b * std::pow(n, 1.1); };
    const VdcReport probe = vdc_check(F, 1, 300, 1e-3);
    if (probe.min_norm_derivative < 1e-3) continue;
    const VdcReport r = vdc_check(F, 1, 300, probe.min_norm_derivative);
    if (!r.admissible) continue;
    bad += !r.holds;
    ++run;
  }
  CHECK(bad == 0);
}

TEST_CASE("tube decomposition") {
  TubeGrid lin;
  lin.am = 6;
  for (long p = lin.p_lo(); p <= lin.p_hi(); ++p) lin.values.push_back(double(p));
  const TubeDecomposition dl = tube_decompose(lin);
  CHECK(dl.steps == 1);
  CHECK(std::all_of(dl.in_L.begin(), dl.in_L.end(), [](char c) { return c != 0; }));

  Rng rng(16);
  for (int am : {6, 12}) {
    for (int trial = 0; trial < 3; ++trial) {
      const TubeGrid g = random_tube_grid(rng, am);
      const TubeDecomposition d = tube_decompose(g);
      CHECK(double(d.steps) <= d.step_cap);
      for (const Tube& t : d.heavy) CHECK(t.slope(g) <= d.step_cap);
      const auto [worst, allowed] = non_concentration(g, d);
      CHECK(worst <= allowed);
    }
  }
}
