#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bhc/experiments.hpp"

#include <set>

using namespace bhc;

namespace {

double closed_form_lambda_bar(double alpha, double beta, double lam, int am, double a) {
  const double N = std::exp2(am / 2.0);
  double s = 0.0;
  for (long n = long(N); n < long(2 * N); ++n) {
    const double c = beta - alpha + a * std::pow(n / N, a - 1.0) * lam;
    s += c == 0.0 ? 1.0 / N : std::abs(std::sin(pi * c / N) / (pi * c));
  }
  return s;
}

}  // namespace

TEST_CASE("report formatting") {
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
  CHECK(format_double(2.0) == "2");
  CHECK(hex64(fnv1a("")) == "cbf29ce484222325");
  CHECK(hex64(fnv1a("a")) == "af63dc4c8601ec8c");

  DecayReport r;
  r.add(4, 1.0, 2.0);
  r.add(6, 0.25, 2.0);
  r.fit();
  CHECK(r.slope == doctest::Approx(-1.0));
  CHECK(r.to_csv() == "m,value,log2_value,bound\n4,1,0,2\n6,0.25,-2,2\n");
  const auto j = r.summary();
  CHECK(j.contains("config_hash"));
  CHECK(j.contains("metrics"));

  DecayReport flat;
  flat.add(1, 0.0, 1.0);
  flat.fit();
  CHECK(std::isfinite(flat.slope));
}

TEST_CASE("random stopping time") {
  Rng rng(1);
  const RealGrid lam = random_stopping_time(rng, -2.0, 6.0, 4096, 6, 4.0, 16.0);
  const double w = 1.0 / 64.0;
  for (Index i = 1; i < lam.size(); ++i) {
    CHECK(lam[i] >= 4.0);
    CHECK(lam[i] <= 16.0);
    if (std::floor(lam.x(i) / w + 1e-9) == std::floor(lam.x(i - 1) / w + 1e-9)) CHECK(lam[i] == lam[i - 1]);
  }
  CHECK_THROWS_AS(random_stopping_time(rng, 0.0, 1.0, 64, 4, 0.0, 1.0), Error);
}

TEST_CASE("single-scale form") {
  const double L = -2.0, R = 6.0;
  const int am = 4;
  const Index n = 1024;
  RealGrid lam(L, R, n);

  SUBCASE("zero input") {
    Rng rng(2);
    const ComplexGrid g = random_band_limited(rng, L, R, n, -8.0, 8.0);
    lam.samples.setConstant(3.0);
    CHECK(lambda_bar(ComplexGrid(L, R, n), g, lam, am, 4.0) == 0.0);
  }
  SUBCASE("pure frequencies against the closed form") {
    for (double lv : {0.0, 1.5, 7.25}) {
      for (auto [alpha, beta] : {std::pair{0.0, 0.0}, {2.5, -1.0}, {-6.0, 10.125}}) {
        lam.samples.setConstant(lv);
        const ComplexGrid f = sample<cd>(L, R, n, [&](double x) { return e(alpha * x); });
        const ComplexGrid g = sample<cd>(L, R, n, [&](double x) { return e(beta * x); });
        const double want = closed_form_lambda_bar(alpha, beta, lv, am, 4.0);
        CHECK(lambda_bar(f, g, lam, am, 4.0) == doctest::Approx(want).epsilon(1e-3));
      }
    }
  }
  SUBCASE("ceiling, refinement and filters") {
    Rng rng(3);
    const ComplexGrid f = random_band_limited(rng, L, R, 2048, 0.0, 32.0);
    const ComplexGrid g = random_band_limited(rng, L, R, 2048, -32.0, 0.0);
    const RealGrid lr = random_stopping_time(rng, L, R, 2048, am, 1.0, 4.0);
    const double base = lambda_bar(f, g, lr, am, 4.0);
    CHECK(base > 0.0);
    CHECK(base <= l2_norm(f) * l2_norm(g));
    LambdaBarOptions fine;
    fine.oversample = 2 * lambda_bar_oversample(f, g, lr, am, 4.0);
    CHECK(lambda_bar(f, g, lr, am, 4.0, fine) == doctest::Approx(base).epsilon(1e-2));
    LambdaBarOptions none;
    none.keep = [](long, long) { return false; };
    CHECK(lambda_bar(f, g, lr, am, 4.0, none) == 0.0);
    LambdaBarOptions par;
    par.workers = 3;
    CHECK(lambda_bar(f, g, lr, am, 4.0, par) == base);
    CHECK_THROWS_AS(lambda_bar(f, g, lr, 5, 4.0), Error);
  }
  SUBCASE("budget") {
    const ComplexGrid f = sample<cd>(L, R, n, [](double) { return 1.0; });
    lam.samples.setConstant(1.0);
    set_sample_budget(100);
    try {
      lambda_bar(f, f, lam, am, 4.0);
      FAIL("expected error");
    } catch (const Error& err) {
      CHECK(err.code() == "budget-exceeded");
    }
    set_sample_budget(std::int64_t(1) << 26);
  }
}

TEST_CASE("uniform and clustered cells") {
  const double L = -2.0, R = 6.0;
  const Index n = 4096;
  const int am = 6;
  const long N = 8;
  const IndexRange cells{-2 * N, 6 * N};
  const ComplexGrid flat = sample<cd>(L, R, n, [](double x) { return e(3.0 * x); });
  const CellSplit fs = split_uniform_clustered(flat, 0.25, am, cells);
  CHECK(fs.clustered.empty());
  CHECK(long(fs.uniform.size()) == cells.size());

  const ComplexGrid spike = sample<cd>(L, R, n, [](double x) { return std::exp(-std::pow((x - 1.53) * 200.0, 2)); });
  const CellSplit ss = split_uniform_clustered(spike, 0.25, am, cells);
  CHECK(ss.clustered.size() + ss.uniform.size() == size_t(cells.size()));
  CHECK(ss.clustered == std::vector<long>{11, 12, 13});  // 1.53 lies in I^{12}

  Rng rng(4);
  for (double mu : {0.1, 0.25, 0.5}) {
    for (int t = 0; t < 5; ++t) {
      const ComplexGrid f = random_band_limited(rng, L, R, n, -20.0, 20.0);
      const CellSplit s = split_uniform_clustered(f, mu, am, cells);
      CHECK(double(s.clustered.size()) <= 3.0 * std::exp2((1.0 - mu) * am / 2.0));
    }
  }
}

TEST_CASE("clustered sub-form") {
  const double L = -2.0, R = 6.0;
  const Index n = 2048;
  const int am = 6;
  const double mu = 0.25;
  Rng rng(5);
  double worst = 0.0;
  for (double c : {0.3, -0.55, 0.8}) {
    // f carries a bump inside x - t in [-1, 1]; g is spread out
    const ComplexGrid f0 = sample<cd>(L, R, n, [&](double x) { return std::exp(-std::pow((x - c) * 30.0, 2)); });
    const ComplexGrid f = freq_project(f0, -60.0, 60.0);
    const ComplexGrid g = random_band_limited(rng, L, R, n, -40.0, 0.0);
    const RealGrid lam = random_stopping_time(rng, L, R, n, am, 2.0, 8.0);
    const CellSplit s = split_uniform_clustered(f, mu, am, {-8, 8});
    REQUIRE_FALSE(s.clustered.empty());
    const std::set<long> C(s.clustered.begin(), s.clustered.end());
    LambdaBarOptions opts;
    opts.keep = [&](long p, long nn) { return C.count(p - nn) > 0; };
    const double part = lambda_bar(f, g, lam, am, 4.0, opts);
    const double total = lambda_bar(f, g, lam, am, 4.0);
    CHECK(part <= total * (1 + 1e-12));
    worst = std::max(worst, part / (std::exp2(-mu * am / 4.0) * l2_norm(f) * l2_norm(g)));
  }
  MESSAGE("clustered sub-form ratio " << worst);
  CHECK(worst <= 10.0);
}

TEST_CASE("counterexample construction") {
  const int am = 4;
  const CounterexampleInstance inst = build_counterexample(am);
  const double N = 4.0;
  CHECK(inst.f_norm >= N / 4);
  CHECK(inst.f_norm <= 4 * N);
  CHECK(inst.g_norm >= N / 4);
  CHECK(inst.g_norm <= 4 * N);
  CHECK(inst.coeff_min >= 0.25);
  CHECK(inst.coeff_max <= 4.0);
  CHECK(inst.js == std::vector<long>{2, 3});

  // lambda takes the value N j on A_j and N^2 on the rest of [1,2]
  std::set<double> levels;
  for (Index i = 0; i < inst.lambda.size(); ++i) {
    const double x = inst.lambda.x(i);
    if (x < 1.0 || x >= 2.0) continue;
    levels.insert(inst.lambda[i]);
    const long c = long(std::floor(x * N * N + 1e-9));
    const long j = c % long(N);
    CHECK(inst.lambda[i] == (j >= 2 ? N * double(j) : N * N));
  }
  CHECK(levels == std::set<double>{8.0, 12.0, 16.0});

  // absolute values dominate the signed model form
  const double absf = abs_model_form(inst);
  const cd signed_form = trilinear_form(inst.f, inst.g, inst.h, inst.lambda, inst.ctx);
  CHECK(absf > 0.0);
  CHECK(std::abs(signed_form) <= absf * (1 + 1e-12));
  CHECK(abs_model_form(inst, 3) == doctest::Approx(absf).epsilon(1e-12));

  CounterexampleInstance zero = inst;
  zero.h.samples.setZero();
  CHECK(abs_model_form(zero) == 0.0);
  CHECK(counterexample_ratio(inst) == doctest::Approx(absf / (inst.f_norm * inst.g_norm)));

  CHECK(first_term_fraction(inst) >= 0.01);

  CHECK_THROWS_AS(build_counterexample(5), Error);
  CHECK_THROWS_AS(build_counterexample(4, 100), Error);
}

TEST_CASE("stationary phase sweep") {
  StationarySweepOptions o;
  o.samples = 8;
  const DecayReport r = stationary_phase_sweep(3.0, 0, {4, 6, 8}, o);
  REQUIRE(r.value.size() == 3);
  CHECK(r.value[2] < r.value[0]);
  CHECK(r.slope < 0.0);
  CHECK(std::abs(cd(r.metrics["kappa_re"].get<double>(), r.metrics["kappa_im"].get<double>()) - kappa()) < 0.05);
  CHECK(std::isfinite(r.metrics["nonstationary"].get<double>()));
  CHECK_THROWS_AS(stationary_phase_sweep(1.0, 0, {4}), Error);
}

TEST_CASE("domination sweep") {
  DominationOptions o;
  o.m_values = {1, 2};
  o.k_values = {-1, 1};
  o.pairs = 2;
  const DecayReport r = domination_sweep(o);
  CHECK(r.value.size() == 2);
  CHECK(r.metrics["constant"].get<double>() > 0.0);
  CHECK(r.metrics["constant"].get<double>() < 8.0 + 1e-9);  // |rho(t/2^k)/t| <= 2^{1-k} on |t| <= 2^{k+1}
}

TEST_CASE("tile sweeps") {
  const DecayReport se = size_energy_sweep(10, 12, 10.0, 3);
  CHECK(se.value.size() == 10);
  CHECK(se.pass);
  SizeEstimateOptions o;
  o.collections = 3;
  o.light_am = {4};
  const DecayReport sz = size_estimate_sweep(o);
  CHECK(sz.value.size() == 3);
  CHECK(sz.metrics["light_items"].get<int>() > 0);
  CHECK(sz.pass);
}

TEST_CASE("experiment configuration") {
  ExperimentConfig c;
  c.experiment = "decay";
  c.am = {4, 6};
  c.seed = 99;
  const auto j = to_json(c);
  const ExperimentConfig back = config_from_json(j);
  CHECK(to_json(back) == j);
  CHECK(config_hash(back) == config_hash(c));
  ExperimentConfig w = c;
  w.workers = 4;
  CHECK(config_hash(w) == config_hash(c));
  w.seed = 100;
  CHECK(config_hash(w) != config_hash(c));

  try {
    config_from_json({{"experimnt", "gabor"}});
    FAIL("expected error");
  } catch (const Error& err) {
    CHECK(err.code() == "config-error");
  }
  CHECK_THROWS_AS(config_from_json({{"seed", "many"}}), Error);
  CHECK_THROWS_AS(config_from_json({{"grid", 1000}}), Error);
  CHECK_THROWS_AS(config_from_json(nlohmann::json::array()), Error);

  CHECK(with_defaults(ExperimentConfig{.experiment = "weyl"}).a == 4.0);
  CHECK(with_defaults(ExperimentConfig{.experiment = "multiplier"}).am == std::vector<int>{4, 6, 8, 10});

  try {
    run_experiment(ExperimentConfig{.experiment = "nonsense"});
    FAIL("expected error");
  } catch (const Error& err) {
    CHECK(err.code() == "unknown-experiment");
  }
  ExperimentConfig g;
  g.experiment = "gabor";
  g.trials = 3;
  const DecayReport r1 = run_experiment(g), r2 = run_experiment(g);
  CHECK(r1.pass);
  CHECK(r1.to_csv() == r2.to_csv());
  CHECK(r1.summary()["config_hash"] == config_hash(with_defaults(g)));
}
