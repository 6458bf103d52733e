#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bhc/operators.hpp"
#include "bhc/wavepackets.hpp"

#include <algorithm>

using namespace bhc;

namespace {

double rel_err(const ComplexGrid& a, const ComplexGrid& b) { return (a.samples - b.samples).norm() / b.samples.norm(); }

cd direct_inner(const ComplexGrid& f, const ComplexGrid& g) {
  cd s = 0.0;
  for (Index i = 0; i < f.size(); ++i) s += f[i] * std::conj(g[i]);
  return s * f.step();
}

}  // namespace

TEST_CASE("window transform") {
  cd integral = 0.0;
  const int M = 1 << 14;
  for (int i = 0; i < M; ++i) integral += phi_window(-1.0 / 6.0 + (i + 0.5) * 2.0 / M) * 2.0 / M;
  CHECK(std::abs(window_check(0.0) - integral) < 1e-10);
  // Parseval
  double s = 0.0;
  for (int i = -4000; i < 4000; ++i) s += std::norm(window_check((i + 0.5) * 0.01)) * 0.01;
  CHECK(std::abs(s - std::pow(window_l2_norm(), 2)) < 1e-6);
}

TEST_CASE("packets are normalized and match the continuous formula") {
  const GaborSystem sys(-4.0, 4.0, 1024, 2);
  CHECK(sys.B() == 32);
  CHECK(sys.U() == 32);
  CHECK(std::abs(sys.normalization_ratio() - 1.0) < 1e-8);
  for (long c : {-3L, 0L, 5L}) {
    const ComplexGrid p = sys.packet(c, 7);
    CHECK(std::abs(l2_norm(p) - 1.0) < 1e-10);
    const Eigen::MatrixXcd coef = sys.analyze(p, {c});
    CHECK(std::abs(coef(0, 7) - 1.0) < 1e-8);
    CHECK(std::abs(coef(0, 7) - direct_inner(p, p)) < 1e-12);
    // 2^{j/2} e(c(2^j x - n)) check(2^j x - n) near the packet center
    for (Index i : {Index(540), Index(600), Index(650)}) {
      cd expect = 0.0;
      for (int z = -3; z <= 3; ++z) {  // periodization
        const double y = 4.0 * p.x(i) - 7.0 + 32.0 * z;
        expect += 2.0 * e(double(c) * y) * sys.normalized_check(y);
      }
      CHECK(std::abs(p[i] - expect) < 1e-9);
    }
  }
  const ComplexGrid zero(-4.0, 4.0, 1024);
  CHECK(sys.analyze(zero, {0, 1, 2}).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(GaborSystem(-4.0, 4.0, 1024, -4), Error);
  try {
    sys.analyze(zero, {15});
    FAIL("expected error");
  } catch (const Error& err) {
    CHECK(err.code() == "band-unrepresentable");
  }
}

TEST_CASE("frame bounds agree with an explicit Gram matrix") {
  const double L = -2.0, R = 2.0;
  const Index n = 64;
  const GaborSystem sys(L, R, n, 1);
  for (const std::vector<long>& cs : {std::vector<long>{-2, -1, 0, 1}, sys.full_cells(-3)}) {
    Eigen::MatrixXcd Phi(n, Index(cs.size()) * sys.B());
    Index col = 0;
    for (long c : cs)
      for (long m = 0; m < long(sys.B()); ++m) Phi.col(col++) = sys.packet(c, m).samples;
    // frame operator f -> sum <f,p> p  is  Phi Phi^* h
    const Eigen::MatrixXcd S = Phi * Phi.adjoint() * (R - L) / double(n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(S);
    const auto [lo, hi] = sys.frame_bounds(cs, true);
    CHECK(std::abs(hi - es.eigenvalues().maxCoeff()) < 1e-10 * hi);
    CHECK(std::abs(lo - std::max(0.0, es.eigenvalues().minCoeff())) < 1e-10 * hi);
  }
  const auto [lo, hi] = sys.frame_bounds(sys.full_cells(-3), true);
  MESSAGE("full-system frame bounds " << lo << " " << hi);
  CHECK(lo > 0.0);

  // Bessel bound for a band-limited signal
  Rng rng(3);
  const ComplexGrid f = random_band_limited(rng, L, R, n, -2.0, 2.0);
  const CoefficientTable t = gabor_coeffs(f, {1, 0}, {-2, 3}, {0, long(sys.B())});
  CHECK(t.energy() <= hi * 1.000001);
}

TEST_CASE("dual frame reconstruction") {
  Rng rng(17);
  const double L = -8.0, R = 8.0;
  const Index n = 4096;
  const PacketFamily fam{2, 0};
  const GaborSystem sys(L, R, n, fam.j_scale);
  const IndexRange all_u{-long(sys.U()) / 2, long(sys.U()) / 2};
  const IndexRange all_n{0, long(sys.B())};
  const GaborDual dual = gabor_dual(L, R, n, fam, all_u, true);
  CHECK(dual.lower_bound > 0.0);

  SUBCASE("random band-limited signals") {
    for (int trial = 0; trial < 3; ++trial) {
      const ComplexGrid f = random_band_limited(rng, L, R, n, -100.0, 100.0);
      const CoefficientTable t = gabor_coeffs(f, fam, all_u, all_n, true);
      CHECK(rel_err(gabor_reconstruct(t, dual), f) < 1e-6);
    }
  }
  SUBCASE("single packet") {
    const ComplexGrid p = sys.packet(3, 11);
    const CoefficientTable t = gabor_coeffs(p, fam, all_u, all_n, true);
    CHECK(rel_err(gabor_reconstruct(t, dual), p) < 1e-8);
  }
  SUBCASE("zero") {
    const CoefficientTable t = gabor_coeffs(ComplexGrid(L, R, n), fam, all_u, all_n, true);
    CHECK(gabor_reconstruct(t, dual).samples.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("index mismatch") {
    const ComplexGrid f = random_band_limited(rng, L, R, n, -10.0, 10.0);
    const CoefficientTable t = gabor_coeffs(f, fam, {-3, 3}, all_n, true);
    try {
      gabor_reconstruct(t, dual);
      FAIL("expected error");
    } catch (const Error& err) {
      CHECK(err.code() == "index-range-mismatch");
    }
  }
  SUBCASE("csv") {
    const CoefficientTable t = gabor_coeffs(sys.packet(0, 0), fam, {0, 2}, {0, 2});
    const std::string csv = t.to_csv();
    CHECK(csv.rfind("u,n,re,im\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
  }
}

TEST_CASE("oscillatory weight") {
  const double a = 3.0;
  const int am = 6, k = 0;
  const double lam_band = std::exp2(am - a * k);

  CHECK(rho_band(a, am, k, 1e-3) == 0.0);
  RealGrid lam(0.0, 1.0, 8);
  lam.samples.setConstant(1e-3);
  const ComplexGrid we = weight_we({k, 9, -6, am, a, lam});
  for (Index i = 0; i < lam.size(); ++i) CHECK(rho_band(a, am, k, lam[i]) * std::abs(we[i]) == 0.0);

  SUBCASE("critical point constant") {
    for (long n : {8L, 12L, 15L})
      for (double lam_v : {0.7 * lam_band, lam_band, 1.3 * lam_band}) {
        const double xc = critical_frequency(a, am, k, n, lam_v);
        CHECK(std::abs(critical_frequency_numeric(a, am, k, n, lam_v) - xc) < 1e-9 * xc);
      }
    const double xc4 = critical_frequency(4.0, 8, 1, 20, 300.0);
    CHECK(std::abs(critical_frequency_numeric(4.0, 8, 1, 20, 300.0) - xc4) < 1e-9 * xc4);
  }
  SUBCASE("majorant equals rho at the correlation point") {
    const long n = 10;
    const double lam_v = lam_band;
    const double xc = critical_frequency(a, am, k, n, lam_v);
    // choose lambda so that xc is an even integer
    const double target = 2.0 * std::round(xc / 2.0);
    const double lam_c = lam_v * target / xc;
    const long v = -long(target / 2.0);
    CHECK(std::abs(weight_majorant_at(a, am, k, n, v, lam_c) - rho_band(a, am, k, lam_c)) < 1e-9);
  }
  SUBCASE("non-stationary decay") {
    const double N = std::exp2(am / 2.0);
    for (long n : {200L, 400L, -300L}) {
      const cd w = weight_we_at(a, am, k, n, -6, lam_band);
      CHECK(std::abs(w) <= std::pow(N + std::abs(double(n)), -3.0));
    }
  }
  SUBCASE("majorant domination") {
    Rng rng(8);
    std::uniform_real_distribution<double> ul(0.3, 3.0);
    std::uniform_int_distribution<long> un(8, 15), uv(-11, -4);
    double C = 0.0;
    for (int i = 0; i < 60; ++i) {
      const long n = un(rng), v = uv(rng);
      const double lam_v = lam_band * ul(rng);
      const double lhs = rho_band(a, am, k, lam_v) * std::abs(weight_we_at(a, am, k, n, v, lam_v));
      const double w = weight_majorant_at(a, am, k, n, v, lam_v);
      if (lhs > 0) C = std::max(C, lhs / w);
    }
    MESSAGE("majorant constant " << C);
    CHECK(C < 20.0);
  }
}

TEST_CASE("continuous model block") {
  const int am = 4, k = 0;
  ModelContext ctx = make_context(am, k, 1, 1);
  const Index n = 512;
  const ComplexGrid one = sample<cd>(0.0, 8.0, n, [](double) { return 1.0; });
  const ComplexGrid s0 = continuous_S_tilde(one, one, ctx, 5, 0);
  CHECK(std::abs(s0[3] - std::exp2(-am / 2.0)) < 1e-14);
  const ComplexGrid s1 = continuous_S_tilde(one, one, ctx, 5, 3);
  CHECK(s1.samples.cwiseAbs().maxCoeff() < 1e-14);
  CHECK_THROWS_AS(continuous_S_tilde(one, ComplexGrid(0.0, 8.0, 256), ctx, 5, 0), Error);
}

TEST_CASE("discrete model block") {
  const int am = 4, k = 0;
  const ModelContext ctx = make_context(am, k, 1, 1);
  const long N = ctx.N();
  const double L = 0.0, R = 8.0;
  const Index grid = 2048;
  const GaborSystem sys(L, R, grid, ctx.j_scale());
  const long B = long(sys.B());

  CHECK(model_S(ComplexGrid(L, R, grid), ComplexGrid(L, R, grid), ctx, N, -N, N).samples.cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(make_context(5, 0, 1, 1), Error);

  SUBCASE("single packets against direct inner products") {
    const long n0 = N + 1, v0 = -N + 1, p0 = N + 2, u0 = N + 3;
    const long pr = ctx.p_r(p0);
    const PacketFamily in = packet_family(am, k, ctx.ell);
    const PacketFamily out = packet_family(am, k, 2 * ctx.ell - 1);
    const ComplexGrid f = sys.packet(in.offset + u0 - v0, pr - n0);
    const ComplexGrid g = sys.packet(in.offset + u0 + v0, pr + n0);
    const ComplexGrid S = model_S(f, g, ctx, n0, v0, p0);
    ComplexGrid ref(L, R, grid);
    for (long u = ctx.windows.u.lo; u < ctx.windows.u.hi; ++u) {
      const cd cf = direct_inner(f, sys.packet(in.offset + u - v0, pr - n0));
      const cd cg = direct_inner(g, sys.packet(in.offset + u + v0, pr + n0));
      if (cf == 0.0 && cg == 0.0) continue;
      ref.samples += std::exp2(-(am + 2.0 * k) / 4.0) * cf * cg * sys.packet(out.offset + 2 * u, pr).samples;
    }
    CHECK(rel_err(S, ref) < 1e-10);
  }

  SUBCASE("Plancherel aggregate") {
    Rng rng(4);
    const ComplexGrid f = random_band_limited(rng, L, R, grid, 24.0, 56.0);
    const ComplexGrid g = random_band_limited(rng, L, R, grid, 0.0, 24.0);
    const PlancherelReport rep = plancherel_aggregate(f, g, ctx);
    MESSAGE("Plancherel rel error " << rep.rel_error);
    CHECK(rep.rhs > 0.0);
    CHECK(rep.rel_error < 1e-6);
  }

  SUBCASE("transition identity converges in the truncation radius") {
    Rng rng(12);
    const ComplexGrid f = random_band_limited(rng, L, R, grid, 24.0, 56.0);
    const ComplexGrid g = random_band_limited(rng, L, R, grid, 0.0, 24.0);
    const long nn = N + 1, v = -N + 2, p = N + 1;
    // u over every value the spectra reach
    const IndexRange all_u{-long(sys.U()) / 4 + 1, long(sys.U()) / 4 - 1};
    const ComplexGrid S = model_S(f, g, ctx, nn, v, p, all_u);
    std::vector<double> xs, ys;
    for (int radius : {1, 2, 4, 8}) {
      double err = 0.0, ref = 0.0;
      for (const auto& [i, val] : transition_sum(f, g, ctx, nn, v, p, radius)) {
        err = std::max(err, std::abs(val - S[i]));
        ref = std::max(ref, std::abs(S[i]));
      }
      MESSAGE("radius " << radius << " rel error " << err / ref);
      xs.push_back(std::log2(double(radius)));
      ys.push_back(std::log2(err / ref));
    }
    CHECK(fit_slope(xs, ys) <= -2.0);
    (void)B;
  }
}

TEST_CASE("trilinear form") {
  const int am = 4, k = 0;
  const ModelContext ctx = make_context(am, k, 1, 1);
  const double L = 0.0, R = 8.0;
  const Index grid = 2048;
  const GaborSystem sys(L, R, grid, ctx.j_scale());
  Rng rng(30);
  const ComplexGrid f = random_band_limited(rng, L, R, grid, 24.0, 56.0);
  const ComplexGrid g = random_band_limited(rng, L, R, grid, 0.0, 24.0);
  RealGrid lam(L, R, grid);
  lam.samples.setConstant(std::exp2(am) * 0.4);

  CHECK(trilinear_form(f, g, ComplexGrid(L, R, grid), lam, ctx) == cd(0.0));

  SUBCASE("direct oracle on a reduced window") {
    ModelContext small = ctx;
    small.windows.n = {4, 6};
    small.windows.v = {-4, -2};
    small.windows.p = {5, 7};
    const ComplexGrid h = random_band_limited(rng, L, R, grid, -72.0, -36.0);
    const cd val = trilinear_form(f, g, h, lam, small);
    const PacketFamily in = packet_family(am, k, 1), out = packet_family(am, k, 1);
    cd ref = 0.0;
    for (long n = 4; n < 6; ++n)
      for (long v = -4; v < -2; ++v) {
        const cd we = weight_we_at(3.0, am, k, n, v, lam[0]);
        const double rb = rho_band(3.0, am, k, lam[0]);
        for (long p = 5; p < 7; ++p)
          for (long u = small.windows.u.lo; u < small.windows.u.hi; ++u) {
            const long pr = small.p_r(p);
            const cd cf = direct_inner(f, sys.packet(in.offset + u - v, pr - n));
            const cd cg = direct_inner(g, sys.packet(in.offset + u + v, pr + n));
            const ComplexGrid P = sys.packet(out.offset + 2 * u, pr);
            cd integral = 0.0;
            for (Index i = 0; i < grid; ++i) integral += P[i] * h[i] * rb * we;
            ref += std::exp2(-am / 4.0) * cf * cg * integral * P.step();
          }
      }
    CHECK(std::abs(ref) > 0.0);
    CHECK(std::abs(val - ref) < 1e-9 * std::abs(ref));
  }
  SUBCASE("Cauchy-Schwarz") {
    const ComplexGrid h = random_band_limited(rng, L, R, grid, -72.0, -36.0);
    const cd val = trilinear_form(f, g, h, lam, ctx);
    // |L| <= sum_{n,v} (sum_{p,u} |coef|^2)^{1/2} * ||h rho w^e||
    const ModelCoefficients mc = model_coefficients(f, g, ctx);
    double bound = 0.0;
    const long B = long(sys.B());
    for (long n = ctx.windows.n.lo; n < ctx.windows.n.hi; ++n)
      for (long v = ctx.windows.v.lo; v < ctx.windows.v.hi; ++v) {
        double s = 0.0;
        for (long p = ctx.windows.p.lo; p < ctx.windows.p.hi; ++p)
          for (long u = ctx.windows.u.lo; u < ctx.windows.u.hi; ++u) {
            const long pr = ctx.p_r(p);
            s += std::norm(mc.f.at(u - v, ((pr - n) % B + B) % B) * mc.g.at(u + v, ((pr + n) % B + B) % B));
          }
        const double wn = std::abs(weight_we_at(3.0, am, k, n, v, lam[0])) * rho_band(3.0, am, k, lam[0]);
        bound += std::exp2(-am / 4.0) * std::sqrt(s) * wn * l2_norm(h) * std::sqrt(sys.frame_bounds(sys.full_cells(), true).second);
      }
    CHECK(std::abs(val) <= bound);
  }
}

TEST_CASE("index classification") {
  const int am = 4, k = 0;
  const ModelContext ctx = make_context(am, k, 1, 1);
  const long N = ctx.N();
  const double L = 0.0, R = 8.0;
  const Index grid = 2048;
  Rng rng(50);
  const ComplexGrid f = random_band_limited(rng, L, R, grid, 24.0, 56.0);
  const ComplexGrid g = random_band_limited(rng, L, R, grid, 0.0, 24.0);
  RealGrid lam(L, R, grid);
  for (Index i = 0; i < grid; ++i) lam[i] = std::exp2(am) * (0.6 + 0.8 * double(i % 97) / 97.0);
  const IndexRange pp{N * N, N * N + 32};

  const Classification cls = classify_indices(f, g, lam, ctx, 0.125, 0.25, pp);
  const auto l = cls.members(MassClass::light), u = cls.members(MassClass::uniform), c = cls.members(MassClass::clustered);
  CHECK(l.size() + u.size() + c.size() == size_t(pp.size() * N * N));
  for (const auto& t : l) CHECK((!u.count(t) && !c.count(t)));
  for (const auto& t : u) CHECK(!c.count(t));
  MESSAGE("light " << l.size() << " uniform " << u.size() << " clustered " << c.size());

  SUBCASE("zero weight is light") {
    RealGrid off = lam;
    off.samples.setConstant(1e-6);
    const Classification z = classify_indices(f, g, off, ctx, 0.125, 0.25, pp);
    CHECK(z.members(MassClass::light).size() == z.items.size());
  }
  SUBCASE("a spike makes its cell clustered") {
    ComplexGrid fs = f;
    const long n0 = N + 2;
    const long pp0 = N * N + 5;
    const long m = ctx.p_r(pp0 / N) - n0;
    const double len = std::exp2(-ctx.j_scale());
    // large band-limited bump centered in I_k^m
    const double x0 = (double(m) + 0.5) * len;
    for (Index i = 0; i < grid; ++i) {
      double d = fs.x(i) - x0;
      d -= (R - L) * std::round(d / (R - L));
      fs[i] += 400.0 * std::exp(-d * d * 400.0) * e(28.0 * fs.x(i));
    }
    RealGrid lam_c = lam;
    lam_c.samples.setConstant(std::exp2(am));
    const Classification z = classify_indices(fs, g, lam_c, ctx, 10.0, 0.25, {pp0, pp0 + 1});
    bool found = false;
    for (const auto& it : z.items)
      if (it.n == n0) {
        CHECK(it.cls == MassClass::clustered);
        found = true;
      }
    CHECK(found);
    // clustered count for this p' is at most 2 * 2^{(1-mu) am / 2}
    std::set<long> cn;
    for (const auto& it : z.items)
      if (it.cls == MassClass::clustered) cn.insert(it.n);
    CHECK(double(cn.size()) <= 2.0 * std::exp2((1.0 - 0.25) * am / 2.0));
  }
}
