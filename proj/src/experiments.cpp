#include "bhc/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>

namespace bhc {

namespace {

long mod(long a, long b) { return ((a % b) + b) % b; }

Index pow2_at_least(double x) {
  Index n = 1;
  while (double(n) < x) n *= 2;
  return n;
}

// Spectral zero padding onto an os-times finer lattice of the same period.
Eigen::VectorXcd refine(const ComplexGrid& f, int os) {
  if (os == 1) return f.samples;
  const Index n = f.size(), m = n * os;
  const Eigen::VectorXcd F = dft(f.samples);
  Eigen::VectorXcd G = Eigen::VectorXcd::Zero(m);
  for (Index q = 0; q < n / 2; ++q) G[q] = F[q];
  for (Index q = n / 2 + 1; q < n; ++q) G[m - n + q] = F[q];
  G[n / 2] = 0.5 * F[n / 2];
  G[m - n / 2] = 0.5 * F[n / 2];
  return idft(G) * double(os);
}

// Index of x on a lattice of step h starting at left; throws unless x is (nearly) a lattice point.
Index lattice_index(double left, double h, double x, const char* what) {
  const double r = (x - left) / h;
  const double k = std::round(r);
  if (std::abs(r - k) > 1e-6) throw Error("grid-mismatch", std::string(what) + " is not on the grid lattice");
  return Index(k);
}

double rel_err(const ComplexGrid& a, const ComplexGrid& b) {
  return (a.samples - b.samples).norm() / b.samples.norm();
}

bool strictly_decreasing(const std::vector<double>& v) {
  for (size_t i = 1; i < v.size(); ++i)
    if (!(v[i] < v[i - 1])) return false;
  return true;
}

bool non_increasing(const std::vector<double>& v) {
  for (size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[i - 1]) return false;
  return true;
}

}  // namespace

// ---- reports -------------------------------------------------------------------

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void DecayReport::add(double m_val, double v, double b) {
  m.push_back(m_val);
  value.push_back(v);
  bound.push_back(b);
}

std::vector<double> DecayReport::log2_value() const {
  std::vector<double> out;
  for (double v : value) out.push_back(v > 0 ? std::log2(v) : -std::numeric_limits<double>::infinity());
  return out;
}

void DecayReport::fit() {
  std::vector<double> xs, ys;
  for (size_t i = 0; i < value.size(); ++i)
    if (value[i] > 0 && std::isfinite(value[i])) xs.push_back(m[i]), ys.push_back(std::log2(value[i]));
  slope = 0.0;
  if (xs.size() >= 2 && *std::max_element(xs.begin(), xs.end()) > *std::min_element(xs.begin(), xs.end()))
    slope = fit_slope(xs, ys);
}

std::string DecayReport::to_csv() const {
  std::ostringstream os;
  os << "m,value,log2_value,bound\n";
  const auto lv = log2_value();
  for (size_t i = 0; i < value.size(); ++i)
    os << format_double(m[i]) << ',' << format_double(value[i]) << ',' << format_double(lv[i]) << ','
       << format_double(bound[i]) << '\n';
  return os.str();
}

nlohmann::json DecayReport::summary() const {
  return {{"experiment", experiment}, {"config_hash", config_hash}, {"seed", seed},          {"pass", pass},
          {"slope", slope},           {"runtime_s", runtime_s},     {"metrics", metrics}};
}

// ---- the single-scale form ---------------------------------------------------------

RealGrid random_stopping_time(Rng& rng, double left, double right, Index n, int am, double lo, double hi) {
  if (!(lo > 0 && hi >= lo)) throw Error("domain-violation", "stopping-time band must be positive");
  RealGrid lam(left, right, n);
  const double w = std::ldexp(1.0, -am);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::map<long, double> level;
  for (Index i = 0; i < n; ++i) {
    const long cell = long(std::floor(lam.x(i) / w + 1e-9));
    auto it = level.find(cell);
    if (it == level.end()) it = level.emplace(cell, lo * std::pow(hi / lo, u(rng))).first;
    lam[i] = it->second;
  }
  return lam;
}

double effective_band(const ComplexGrid& f, double rel_tol) {
  const Eigen::VectorXcd F = dft(f.samples);
  const double peak = F.cwiseAbs().maxCoeff();
  double band = 0.0;
  if (peak == 0.0) return 0.0;
  for (Index q = 0; q < F.size(); ++q)
    if (std::abs(F[q]) > rel_tol * peak) band = std::max(band, std::abs(bin_frequency(q, F.size(), f.length())));
  return band;
}

int lambda_bar_oversample(const ComplexGrid& f, const ComplexGrid& g, const RealGrid& lambda, int am, double a) {
  (void)am;
  const double lam_max = lambda.samples.cwiseAbs().maxCoeff();
  const double band = effective_band(f) + effective_band(g) + a * std::pow(2.0, a - 1.0) * lam_max;
  const double need = 16.0 * band * f.length() / double(f.size());
  return int(std::max<Index>(1, pow2_at_least(need)));
}

double lambda_bar(const ComplexGrid& f, const ComplexGrid& g, const RealGrid& lambda, int am, double a,
                  const LambdaBarOptions& opts) {
  require_same_grid(f, g);
  require_same_grid(f, lambda);
  if (am % 2 != 0) throw Error("am-parity", "a*m must be even");
  const long N = 1L << (am / 2);
  const int os = opts.oversample > 0 ? opts.oversample : lambda_bar_oversample(f, g, lambda, am, a);
  if (!is_pow2(os)) throw Error("grid-mismatch", "oversample must be a power of two");
  if (f.samples.isZero(0.0) || g.samples.isZero(0.0)) return 0.0;

  const Index M = f.size() * os;
  const double h = f.length() / double(M);
  const Index cell = lattice_index(0.0, h, 1.0 / double(N), "the cell length 2^{-am/2}");
  if (cell < 1) throw Error("grid-mismatch", "grid too coarse for the cells I^n");
  const Index x0 = lattice_index(f.left, h, 1.0, "x = 1");
  const Index sx = std::max(1, os / 4);
  const Index nx = (N * cell) / sx;
  check_budget(std::int64_t(M), "lambda_bar");

  const Eigen::VectorXcd F = refine(f, os), G = refine(g, os);
  const Index mask = M - 1;
  std::vector<double> inner(size_t(nx), 0.0);
  parallel_for(nx, opts.workers, [&](Index q) {
    const Index ix = x0 + q * sx;
    const double x = f.left + double(ix) * h;
    const long p = long(std::floor(x * double(N) + 1e-9));
    const double lam = lambda[(ix & mask) / os];
    double S = 0.0;
    for (long n = N; n < 2 * N; ++n) {
      if (opts.keep && !opts.keep(p, n)) continue;
      const double phi = a * std::pow(double(n) / double(N), a - 1.0) * lam;
      const Index t0 = Index(n) * cell;
      cd z = e(phi * double(t0) * h);
      const cd dz = e(phi * h);
      cd acc = 0.0;
      for (Index s = 0; s <= cell; ++s) {
        const Index it = t0 + s;
        cd term = F[(ix - it) & mask] * G[(ix + it) & mask] * z;
        if (s == 0 || s == cell) term *= 0.5;
        acc += term;
        z *= dz;
      }
      S += std::abs(acc) * h;
    }
    inner[size_t(q)] = S;
  });
  double total = 0.0;
  for (double S : inner) total += S * S;
  return std::sqrt(total * h * double(sx));
}

CellSplit split_uniform_clustered(const ComplexGrid& f, double mu, int am, IndexRange cells) {
  const double N = std::exp2(am / 2.0);
  const double total = f.step() * f.samples.squaredNorm();
  const double thr = std::exp2((mu - 1.0) * am / 2.0) * total;
  CellSplit out;
  for (long n = cells.lo; n < cells.hi; ++n) {
    const double lo = double(n - 1) / N, hi = double(n + 2) / N;
    double s = 0.0;
    for (Index i = 0; i < f.size(); ++i) {
      const double x = f.x(i);
      if (x >= lo && x < hi) s += std::norm(f[i]);
    }
    s *= f.step();
    (total > 0.0 && s >= thr ? out.clustered : out.uniform).push_back(n);
  }
  return out;
}

// ---- the absolute-value counterexample -------------------------------------------

CounterexampleInstance build_counterexample(int am, long L, double a) {
  if (am % 2 != 0 || am < 2) throw Error("am-parity", "am must be a positive even integer");
  if (L < 1) throw Error("domain-violation", "L must be a positive integer");
  CounterexampleInstance inst;
  inst.am = am;
  inst.L = L;
  inst.a = a;
  inst.ctx = make_context(am, 0, 1, 1, a);
  const long N = inst.ctx.N();
  const double Nd = double(N);
  const double left = -2.0, right = 6.0, T = right - left;
  const Index n = pow2_at_least(std::max(16.0 * T * Nd * Nd, 2.5 * T * (3.5 * Nd * Nd + 4.0 * Nd)));

  for (long j = N / 2; j < N; ++j)
    if (j % L == 0) inst.js.push_back(j);
  for (long q = N; q < 2 * N; ++q)
    if (q % L == 0) inst.qs.push_back(q);
  if (inst.js.empty() || inst.qs.empty()) throw Error("domain-violation", "L leaves no progression at this scale");

  // lambda: N j on I_{j,q} = q/N + [j, j+1]/N^2, 2^{am} elsewhere
  inst.lambda = RealGrid(left, right, n);
  inst.h = ComplexGrid(left, right, n);
  for (Index i = 0; i < n; ++i) {
    const double x = inst.lambda.x(i);
    double lam = Nd * Nd;
    if (x >= 1.0 && x < 2.0) {
      inst.h[i] = 1.0;
      const long c = long(std::floor(x * Nd * Nd + 1e-9));
      const long q = c / N, j = c % N;
      if (q % L == 0 && j % L == 0 && j >= N / 2) lam = Nd * double(j);
    }
    inst.lambda[i] = lam;
  }

  // f, g: unit coefficients on every packet the windows read, two positions of margin
  const ModelWindows& W = inst.ctx.windows;
  const int js = am / 2;
  const GaborSystem sys(left, right, n, js);
  const long B = long(sys.B());
  auto packet_sum = [&](long c_lo, long c_hi, long m_lo, long m_hi) {
    const PacketFamily fam = packet_family(am, 0, inst.ctx.ell);
    std::vector<long> cs;
    for (long c = c_lo; c <= c_hi; ++c) cs.push_back(fam.offset + c);
    Eigen::MatrixXcd M = Eigen::MatrixXcd::Zero(Index(cs.size()), B);
    for (Index r = 0; r < Index(cs.size()); ++r)
      for (long m = m_lo; m <= m_hi; ++m) M(r, mod(m, B)) = 1.0;
    return sys.synthesize(M, cs);
  };
  inst.f = packet_sum(W.u.lo - (W.v.hi - 1), (W.u.hi - 1) - W.v.lo, W.p.lo - (W.n.hi - 1) - 2,
                      (W.p.hi - 1) - W.n.lo + 2);
  inst.g = packet_sum(W.u.lo + W.v.lo, (W.u.hi - 1) + (W.v.hi - 1), W.p.lo + W.n.lo - 2,
                      (W.p.hi - 1) + (W.n.hi - 1) + 2);
  inst.f_norm = l2_norm(inst.f);
  inst.g_norm = l2_norm(inst.g);
  inst.h_sup = inst.h.samples.cwiseAbs().maxCoeff();

  const ModelCoefficients mc = model_coefficients(inst.f, inst.g, inst.ctx);
  double lo = 1e300, hi = 0.0;
  for (long u = W.u.lo; u < W.u.hi; ++u)
    for (long v = W.v.lo; v < W.v.hi; ++v)
      for (long nn = W.n.lo; nn < W.n.hi; ++nn)
        for (long p = W.p.lo; p < W.p.hi; ++p) {
          const double cf = std::abs(mc.f.at(u - v, mod(p - nn, B)));
          const double cg = std::abs(mc.g.at(u + v, mod(p + nn, B)));
          lo = std::min({lo, cf, cg});
          hi = std::max({hi, cf, cg});
        }
  inst.coeff_min = lo;
  inst.coeff_max = hi;
  return inst;
}

double abs_model_form(const CounterexampleInstance& inst, int workers) {
  const ComplexGrid& f = inst.f;
  require_same_grid(f, inst.g);
  require_same_grid(f, inst.h);
  require_same_grid(f, inst.lambda);
  const ModelContext& ctx = inst.ctx;
  if (inst.h.samples.isZero(0.0)) return 0.0;
  const ModelCoefficients mc = model_coefficients(f, inst.g, ctx);
  const ModelWindows& W = ctx.windows;
  const PacketFamily out_fam = packet_family(ctx.am, ctx.k, 2 * ctx.ell - 1);
  const GaborSystem sys(f.left, f.right, f.size(), out_fam.j_scale);
  const long B = long(sys.B());
  std::vector<long> cs;
  for (long u = W.u.lo; u < W.u.hi; ++u) cs.push_back(out_fam.offset + 2 * u);
  check_budget(std::int64_t(f.size()) * std::int64_t(cs.size()), "abs_model_form");

  std::vector<std::pair<long, long>> nv;
  for (long n = W.n.lo; n < W.n.hi; ++n)
    for (long v = W.v.lo; v < W.v.hi; ++v) nv.emplace_back(n, v);
  std::vector<double> parts(nv.size(), 0.0);
  parallel_for(Index(nv.size()), workers, [&](Index t) {
    const auto [n, v] = nv[size_t(t)];
    const ComplexGrid we = weight_we(OscWeight{ctx.k, n, v, ctx.am, ctx.a, inst.lambda});
    ComplexGrid Wc(f.left, f.right, f.size());
    for (Index i = 0; i < f.size(); ++i)
      Wc[i] = std::conj(inst.h[i] * rho_band(ctx.a, ctx.am, ctx.k, inst.lambda[i]) * we[i]);
    if (Wc.samples.isZero(0.0)) return;
    const Eigen::MatrixXcd A = sys.analyze(Wc, cs);
    double acc = 0.0;
    for (long p = W.p.lo; p < W.p.hi; ++p) {
      const long pr = ctx.p_r(p);
      for (long u = W.u.lo; u < W.u.hi; ++u)
        acc += std::abs(mc.f.at(u - v, mod(pr - n, B))) * std::abs(mc.g.at(u + v, mod(pr + n, B))) *
               std::abs(A(u - W.u.lo, mod(pr, B)));
    }
    parts[size_t(t)] = acc;
  });
  const double total = std::accumulate(parts.begin(), parts.end(), 0.0);
  return std::exp2(-(ctx.am + 2.0 * ctx.k) / 4.0) * total;
}

double counterexample_ratio(const CounterexampleInstance& inst, int workers) {
  const double denom = inst.f_norm * inst.g_norm * inst.h_sup;
  if (denom == 0.0) return 0.0;
  return abs_model_form(inst, workers) / denom;
}

double first_term_I(int am, long j, long u) {
  const double N = std::exp2(am / 2.0);
  const int pts = 2000;
  cd acc = 0.0;
  for (int i = 0; i < pts; ++i) {
    const double y = (double(i) + 0.5) / pts;
    acc += window_check((double(j) + y) / N) * e(2.0 * double(u) * y / N);
  }
  return std::pow(N, -1.5) * std::abs(acc) / pts;
}

double first_term_fraction(const CounterexampleInstance& inst) {
  const long N = inst.ctx.N();
  const double thr = 1e-10 * std::exp2(-0.75 * inst.am);
  double worst = 1.0;
  for (long j : inst.js) {
    long ok = 0;
    for (long u = N; u < 2 * N; ++u) ok += first_term_I(inst.am, j, u) >= thr;
    worst = std::min(worst, double(ok) / double(N));
  }
  return worst;
}

// ---- stationary phase and domination -------------------------------------------------

DecayReport stationary_phase_sweep(double a, int k, const std::vector<int>& am_list,
                                   const StationarySweepOptions& opts) {
  if (a == 1.0) throw Error("domain-violation", "a = 1 has no stationary point");
  if (am_list.empty()) throw Error("domain-violation", "empty am ladder");
  DecayReport rep;
  rep.experiment = "multiplier";
  rep.seed = opts.seed;
  Rng rng(opts.seed);
  std::uniform_real_distribution<double> ul(-1.0, 1.0), us(0.6, 1.8);
  std::vector<std::pair<double, double>> pts;  // (lambda', s)
  for (int i = 0; i < opts.samples; ++i) pts.emplace_back(std::exp2(ul(rng)), us(rng));

  cd kappa_fit = 0.0;
  double nonstat = 0.0;
  for (size_t idx = 0; idx < am_list.size(); ++idx) {
    OperatorParams P;
    P.a = a;
    P.am = am_list[idx];
    P.k = k;
    std::vector<cd> M(pts.size()), mm(pts.size());
    parallel_for(Index(pts.size()), opts.workers, [&](Index i) {
      const auto [lp, s] = pts[size_t(i)];
      const double lam = lp * P.lambda_scale();
      const double zeta = a * lp * std::pow(s, a - 1.0) * P.zeta_scale();
      M[size_t(i)] = multiplier_exact(P, zeta, lam);
      mm[size_t(i)] = multiplier_main(P, zeta, lam, MainTerm::stationary);
    });
    if (idx == 0) {
      cd num = 0.0;
      double den = 0.0;
      for (size_t i = 0; i < pts.size(); ++i) num += std::conj(mm[i]) * M[i], den += std::norm(mm[i]);
      kappa_fit = den > 0 ? num / den : cd(0.0);
    }
    double worst = 0.0;
    for (size_t i = 0; i < pts.size(); ++i) worst = std::max(worst, std::abs(M[i] - kappa_fit * mm[i]));
    rep.add(P.am, worst * std::exp2(P.am / 2.0), 0.0);

    for (double s_off : {0.2, 4.0}) {
      const double lp = 1.0;
      const double zeta = a * lp * std::pow(s_off, a - 1.0) * P.zeta_scale();
      nonstat = std::max(nonstat, std::abs(multiplier_exact(P, zeta, lp * P.lambda_scale())) * std::exp2(P.am));
    }
  }
  for (double& b : rep.bound) b = rep.value.front();  // the decrease is measured against the first rung
  rep.fit();
  rep.metrics["kappa_re"] = kappa_fit.real();
  rep.metrics["kappa_im"] = kappa_fit.imag();
  rep.metrics["kappa_reference_re"] = kappa().real();
  rep.metrics["kappa_reference_im"] = kappa().imag();
  rep.metrics["nonstationary"] = nonstat;
  rep.pass = strictly_decreasing(rep.value) && rep.slope <= -0.2;
  return rep;
}

DecayReport domination_sweep(const DominationOptions& opts) {
  DecayReport rep;
  rep.experiment = "dominate";
  rep.seed = opts.seed;
  Rng rng(opts.seed);
  const double left = -4.0, right = 4.0, T = right - left;

  double overall = 0.0;
  for (int m : opts.m_values) {
    double worst = 0.0;
    for (int k : opts.k_values) {
      OperatorParams P;
      P.a = opts.a;
      P.am = opts.a * m;
      P.k = k;
      // inputs reach the stationary frequency 2^{am-k} as far as the grid cap allows
      const double band = std::min(0.75 * P.zeta_scale(), opts.band_cap);
      const Index n = std::max(opts.grid, pow2_at_least(4.0 * T * band));
      TmkOptions tm;
      tm.workers = opts.workers;
      for (int i = 0; i < opts.points; ++i) tm.points.push_back(n / 4 + Index(i) * (n / 2) / opts.points);
      for (int pair = 0; pair < opts.pairs; ++pair) {
        const ComplexGrid f = random_band_limited(rng, left, right, n, -band, band);
        const ComplexGrid g = random_band_limited(rng, left, right, n, -band, band);
        const double c = P.lambda_scale();
        P.lambda = random_stopping_time(rng, left, right, n, int(std::lround(P.am)), c * std::exp2(-opts.a),
                                        c * std::exp2(opts.a));
        const ComplexGrid Tx = t_mk(f, g, P, tm);
        const RealGrid Mx = bilinear_max(f, g, dyadic_radii(f, k - 2, k + 2), opts.workers, tm.points);
        for (Index i : tm.points)
          if (Mx[i] > 0) worst = std::max(worst, std::abs(Tx[i]) / Mx[i]);
      }
    }
    rep.add(m, worst, 50.0);
    overall = std::max(overall, worst);
  }
  rep.fit();
  rep.metrics["constant"] = overall;
  rep.pass = overall < 50.0;
  return rep;
}

// ---- size estimates ----------------------------------------------------------------

DecayReport size_estimate_sweep(const SizeEstimateOptions& opts) {
  DecayReport rep;
  rep.experiment = "size-estimates";
  rep.seed = opts.seed;
  Rng rng(opts.seed);
  const double left = -8.0, right = 8.0;
  const Index n = 16384;
  double worst_f = 0.0, worst_g = 0.0;
  for (int trial = 0; trial < opts.collections; ++trial) {
    const auto tiles = random_tiles(rng, size_t(opts.tiles), 4, {-2, 0, 2});
    const ComplexGrid f = random_band_limited(rng, left, right, n, 0.0, 300.0);
    const ComplexGrid g = random_band_limited(rng, left, right, n, 0.0, 300.0);
    std::vector<double> af, ag;
    for (const TriTile& P : tiles) af.push_back(f_tile(f, P)), ag.push_back(g_tile(g, P));
    for (int j : {1, 2}) {
      const ComplexGrid& F = j == 1 ? f : g;
      const std::vector<double>& a = j == 1 ? af : ag;
      double sup = 0.0;
      for (const TreeCandidate& c : lacunary_candidates(tiles, a, j)) sup = std::max(sup, local_l2(F, c.I));
      for (const TriTile& P : tiles) sup = std::max(sup, local_l2(F, P.I()));
      const double r = sup > 0 ? size_j(tiles, a, j) / sup : 0.0;
      (j == 1 ? worst_f : worst_g) = std::max(j == 1 ? worst_f : worst_g, r);
    }
  }
  rep.add(1, worst_f, opts.slack);
  rep.add(2, worst_g, opts.slack);

  // light-mass scenarios on P(0,1,1): the stopping time is either far from every stationary window or random
  double worst_light = 0.0;
  int light_items = 0;
  for (int am : opts.light_am) {
    const ModelContext ctx = make_context(am, 0, 1, 1, opts.a);
    const TriTile P = make_tri_tile(0, 1, 1, am);
    const long N = ctx.N();
    const double L0 = 0.0, R0 = 8.0;
    const Index grid = pow2_at_least(std::max(2048.0, 8.0 * 16.0 * double(N * N)));
    const ComplexGrid f = random_band_limited(rng, L0, R0, grid, 1.5 * N * N, 3.5 * N * N);
    const ComplexGrid g = random_band_limited(rng, L0, R0, grid, -1.5 * N * N, 1.5 * N * N);
    const ComplexGrid h = random_band_limited(rng, L0, R0, grid, -4.0 * N * N, 4.0 * N * N);
    const double band = std::exp2(am);
    std::vector<RealGrid> lams;
    RealGrid far(L0, R0, grid);
    far.samples.setConstant(band * std::exp2(opts.a - 0.5));
    lams.push_back(far);
    lams.push_back(random_stopping_time(rng, L0, R0, grid, am, band * std::exp2(-opts.a), band * std::exp2(opts.a)));
    const double sup = local_l2(h, P.I());
    for (const RealGrid& lam : lams) {
      const Classification cls = classify_indices(f, g, lam, ctx, opts.delta1, opts.mu);
      for (const auto& it : cls.items) light_items += it.cls == MassClass::light;
      const auto hc = localized_h_coeffs(h, lam, P, cls, opts.workers);
      const double size3 = h_star(hc, MassClass::light) / std::sqrt(P.I().length());
      const double allowed = std::exp2(-opts.delta1 * am / 2.0) * sup;
      worst_light = std::max(worst_light, size3 / allowed);
    }
  }
  rep.add(3, worst_light, opts.slack);
  rep.fit();
  rep.metrics["size_f"] = worst_f;
  rep.metrics["size_g"] = worst_g;
  rep.metrics["light"] = worst_light;
  rep.metrics["light_items"] = light_items;
  rep.pass = worst_f <= opts.slack && worst_g <= opts.slack && worst_light <= opts.slack && light_items > 0;
  return rep;
}

DecayReport size_energy_sweep(int collections, int max_tiles, double slack, std::uint64_t seed) {
  DecayReport rep;
  rep.experiment = "size-energy";
  rep.seed = seed;
  Rng rng(seed);
  std::uniform_int_distribution<int> count(1, max_tiles);
  std::normal_distribution<double> gauss;
  const std::array<double, 3> third{1.0 / 3, 1.0 / 3, 1.0 / 3};
  double worst = 0.0;
  for (int c = 0; c < collections; ++c) {
    const auto tiles = random_tiles(rng, size_t(count(rng)), 4);
    std::array<std::vector<double>, 3> a;
    for (auto& v : a)
      for (size_t i = 0; i < tiles.size(); ++i) v.push_back(gauss(rng));
    const double r = check_size_energy(tiles, a, third).ratio;
    rep.add(c, r, slack);
    worst = std::max(worst, r);
  }
  rep.fit();
  rep.metrics["worst_ratio"] = worst;
  rep.pass = worst <= slack;
  return rep;
}

// ---- single-scale decay and counterexample sweeps ---------------------------------------

DecayReport lambda_bar_sweep(const LambdaBarSweepOptions& opts) {
  DecayReport rep;
  rep.experiment = "decay";
  rep.seed = opts.seed;
  Rng rng(opts.seed);
  const double left = -2.0, right = 6.0, T = right - left;
  int clustered = 0;
  double trivial_excess = 0.0;
  for (int am : opts.am_list) {
    if (am % 2 != 0) throw Error("am-parity", "a*m must be even");
    const double N = std::exp2(am / 2.0), N2 = N * N;
    const Index n = opts.grid > 0 ? opts.grid : pow2_at_least(48.0 * N2 * T / 8.0);
    double acc = 0.0;
    for (int t = 0; t < opts.trials; ++t) {
      const ComplexGrid f = random_band_limited(rng, left, right, n, 0.0, 2.0 * N2);
      const ComplexGrid g = random_band_limited(rng, left, right, n, -2.0 * N2, 0.0);
      const RealGrid lam = random_stopping_time(rng, left, right, n, am, std::exp2(am - 5.0), std::exp2(am - 3.0));
      const long Nl = long(N);
      clustered += int(split_uniform_clustered(f, opts.mu, am, {-Nl, Nl}).clustered.size());
      clustered += int(split_uniform_clustered(g, opts.mu, am, {2 * Nl, 4 * Nl}).clustered.size());
      LambdaBarOptions lo;
      lo.workers = opts.workers;
      const double v = lambda_bar(f, g, lam, am, opts.a, lo) / (l2_norm(f) * l2_norm(g));
      trivial_excess = std::max(trivial_excess, v);
      acc += v;
    }
    rep.add(am, acc / opts.trials, 1.0);
  }
  rep.fit();
  rep.metrics["clustered_cells"] = clustered;
  rep.metrics["max_normalized"] = trivial_excess;
  rep.pass = clustered == 0 && non_increasing(rep.value) && rep.slope < 0.0 && trivial_excess <= 1.0;
  return rep;
}

DecayReport counterexample_sweep(const std::vector<int>& am_list, long L, double a, int workers) {
  DecayReport rep;
  rep.experiment = "counterexample";
  double frac = 1.0, cmin = 1e300, cmax = 0.0, fmin = 1e300, fmax = 0.0;
  nlohmann::json per = nlohmann::json::array();
  for (int am : am_list) {
    const CounterexampleInstance inst = build_counterexample(am, L, a);
    const double ratio = counterexample_ratio(inst, workers);
    const double fr = first_term_fraction(inst);
    const double N = std::exp2(am / 2.0);
    frac = std::min(frac, fr);
    cmin = std::min(cmin, inst.coeff_min);
    cmax = std::max(cmax, inst.coeff_max);
    fmin = std::min({fmin, inst.f_norm / N, inst.g_norm / N});
    fmax = std::max({fmax, inst.f_norm / N, inst.g_norm / N});
    rep.add(am, ratio, rep.value.empty() ? 0.5 * ratio : 0.5 * rep.value.front());
    per.push_back({{"am", am}, {"ratio", ratio}, {"first_term_fraction", fr}, {"f_norm", inst.f_norm},
                   {"g_norm", inst.g_norm}});
  }
  rep.fit();
  double worst = 1e300;
  for (double v : rep.value) worst = std::min(worst, v / rep.value.front());
  rep.metrics["ratio"] = rep.value.empty() ? 0.0 : rep.value.back();
  rep.metrics["min_relative_ratio"] = worst;
  rep.metrics["first_term_fraction"] = frac;
  rep.metrics["coeff_min"] = cmin;
  rep.metrics["coeff_max"] = cmax;
  rep.metrics["norm_over_N_min"] = fmin;
  rep.metrics["norm_over_N_max"] = fmax;
  rep.metrics["instances"] = per;
  rep.pass = !rep.value.empty() && rep.value.front() > 0 && worst >= 0.5 && frac >= 0.01;
  return rep;
}

// ---- experiment driver -----------------------------------------------------------------

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"gabor",  "multiplier", "decay",          "weyl",
                                              "levelset", "tiles",    "counterexample", "dominate"};
  return names;
}

nlohmann::json to_json(const ExperimentConfig& c) {
  return {{"experiment", c.experiment},
          {"a", c.a},
          {"am", c.am},
          {"grid", c.grid},
          {"seed", c.seed},
          {"trials", c.trials},
          {"slack", c.slack},
          {"window_constant", c.window_constant},
          {"L", c.L},
          {"mu", c.mu},
          {"delta1", c.delta1},
          {"workers", c.workers},
          {"out_dir", c.out_dir}};
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error("config-error", "configuration must be a mapping");
  ExperimentConfig c;
  try {
    for (const auto& [key, val] : j.items()) {
      if (key == "experiment") c.experiment = val.get<std::string>();
      else if (key == "a") c.a = val.get<double>();
      else if (key == "am") c.am = val.get<std::vector<int>>();
      else if (key == "grid") c.grid = val.get<Index>();
      else if (key == "seed") c.seed = val.get<std::uint64_t>();
      else if (key == "trials") c.trials = val.get<int>();
      else if (key == "slack") c.slack = val.get<double>();
      else if (key == "window_constant") c.window_constant = val.get<long>();
      else if (key == "L") c.L = val.get<long>();
      else if (key == "mu") c.mu = val.get<double>();
      else if (key == "delta1") c.delta1 = val.get<double>();
      else if (key == "workers") c.workers = val.get<int>();
      else if (key == "out_dir") c.out_dir = val.get<std::string>();
      else throw Error("config-error", "unknown key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& ex) {
    throw Error("config-error", ex.what());
  }
  if (c.grid != 0 && !is_pow2(c.grid)) throw Error("config-error", "grid must be a power of two");
  if (c.workers < 1) throw Error("config-error", "workers must be positive");
  if (!(c.slack > 0)) throw Error("config-error", "slack must be positive");
  return c;
}

std::string config_hash(const ExperimentConfig& c) {
  nlohmann::json j = to_json(c);
  j.erase("workers");  // results do not depend on the worker count
  j.erase("out_dir");
  return hex64(fnv1a(j.dump()));
}

ExperimentConfig with_defaults(ExperimentConfig c) {
  const std::string& e = c.experiment;
  auto ladder = [&](std::vector<int> d) {
    if (c.am.empty()) c.am = std::move(d);
  };
  auto trials = [&](int t) {
    if (c.trials == 0) c.trials = t;
  };
  if (e == "gabor") {
    if (c.grid == 0) c.grid = 4096;
    trials(20);
  } else if (e == "multiplier") {
    ladder({4, 6, 8, 10});
    trials(24);
  } else if (e == "decay") {
    if (c.a == 3.0) c.a = 4.0;
    ladder({4, 6, 8});
    trials(2);
  } else if (e == "weyl") {
    if (c.a == 3.0) c.a = 4.0;
    ladder({4, 8, 12});
    trials(8);
  } else if (e == "levelset") {
    trials(200);
  } else if (e == "tiles") {
    trials(100);
  } else if (e == "counterexample") {
    ladder({4, 6, 8});
  } else if (e == "dominate") {
    ladder({1, 2, 3, 4});
    if (c.grid == 0) c.grid = 1024;
    trials(10);
  }
  return c;
}

namespace {

DecayReport run_gabor(const ExperimentConfig& c) {
  DecayReport rep;
  Rng rng(c.seed);
  const double L = -8.0, R = 8.0;
  const PacketFamily fam{2, 0};
  const GaborSystem sys(L, R, c.grid, fam.j_scale);
  const IndexRange all_u{-long(sys.U()) / 2, long(sys.U()) / 2};
  const IndexRange all_n{0, long(sys.B())};
  const GaborDual dual = gabor_dual(L, R, c.grid, fam, all_u, true);
  const double band = 0.2 * double(c.grid) / (R - L);
  double worst = 0.0;
  for (int t = 0; t < c.trials; ++t) {
    const ComplexGrid f = random_band_limited(rng, L, R, c.grid, -band, band);
    const double err = rel_err(gabor_reconstruct(gabor_coeffs(f, fam, all_u, all_n, true), dual), f);
    rep.add(t, err, 1e-6);
    worst = std::max(worst, err);
  }
  rep.metrics["max_error"] = worst;
  rep.metrics["frame_lower"] = dual.lower_bound;
  rep.metrics["frame_upper"] = dual.upper_bound;
  rep.pass = worst < 1e-6;
  return rep;
}

DecayReport run_weyl(const ExperimentConfig& c) {
  DecayReport rep;
  Rng rng(c.seed);
  bool exact_zero = true;
  for (int am : c.am) {
    const LambdaTilde lt = random_lambda_tilde(rng, am);
    const WeylReport z = weyl_sum(0.0, lt, c.a, c.workers);
    exact_zero = exact_zero && z.value == cd(std::ldexp(1.0, 2 * am), 0.0);
    const WeylScan sc = weyl_scan(lt, c.a, 0.25, c.trials, c.workers);
    rep.add(am, sc.max_normalized, 1.0);
  }
  const LambdaTilde flat = constant_lambda_tilde(6, 12.0);
  const bool witness = weyl_resonant(flat, 3.0);
  rep.fit();
  rep.metrics["J0_exact"] = exact_zero;
  rep.metrics["resonant_witness_a3"] = witness;
  rep.pass = exact_zero && witness && strictly_decreasing(rep.value);
  return rep;
}

DecayReport run_levelset(const ExperimentConfig& c) {
  DecayReport rep;
  Rng rng(c.seed);
  std::uniform_int_distribution<int> nn(1, 6);
  std::uniform_real_distribution<double> dd(-3.0, 6.0), leta(-6.0, 0.0), pleta(-4.0, 1.0);
  // zero counts
  int violations = 0, degenerate = 0;
  double worst_zero = -10;
  for (int t = 0; t < 5 * c.trials; ++t) {
    const int n = nn(rng);
    const ZeroCount z = count_zeros(random_fewnomial(rng, n, dd(rng)), 1.0, 2.0);
    if (z.degenerate) {
      ++degenerate;
      continue;
    }
    violations += z.count > n;
    worst_zero = std::max(worst_zero, double(z.count - n));
  }
  rep.add(1, double(violations), 0.0);
  // fewnomial sublevel sets
  double worst_f = 0.0;
  for (int t = 0; t < c.trials; ++t) {
    const int n = std::max(2, nn(rng));
    const Fewnomial F = random_fewnomial(rng, n, dd(rng));
    const double eta = std::pow(10.0, leta(rng)) * F.scale(1.0, 2.0);
    const LevelSetReport r = level_set_measure(F, eta, 1.0, 2.0, 20000);
    if (r.bound > 0) worst_f = std::max(worst_f, r.measure / r.bound);
  }
  rep.add(2, worst_f, c.slack);
  // phase sublevel sets, a in {3, 4}
  double worst_p = 0.0;
  int tested = 0;
  const int am = c.am.empty() ? 6 : c.am.front();
  LambdaTilde lt = random_lambda_tilde(rng, am);
  const long N = lt.N();
  std::uniform_int_distribution<long> idx(2 * N, 4 * N - 2);
  while (tested < c.trials / 2) {
    const double a = tested % 2 == 0 ? 3.0 : 4.0;
    const long p = idx(rng), q = idx(rng), r = idx(rng);
    if (!lt.has(q + r - p)) continue;
    const double eta = std::pow(10.0, pleta(rng)) * double(N);
    const PhaseBound b = phase_levelset_bound(p, q, r, lt, eta, a);
    if (b.infinite) continue;
    worst_p = std::max(worst_p, phase_levelset_measure(p, q, r, lt, eta, a, 20000) / (c.slack * b.L));
    ++tested;
    if (tested % 20 == 0) lt = random_lambda_tilde(rng, am);
  }
  rep.add(3, worst_p, 1.0);
  rep.metrics["zero_violations"] = violations;
  rep.metrics["degenerate"] = degenerate;
  rep.metrics["worst_zero_excess"] = worst_zero;
  rep.metrics["fewnomial_ratio"] = worst_f;
  rep.metrics["phase_ratio"] = worst_p;
  rep.pass = violations == 0 && worst_f <= c.slack && worst_p <= 1.0;
  return rep;
}

DecayReport run_tiles(const ExperimentConfig& c) {
  DecayReport rep = size_energy_sweep(c.trials, 20, c.slack, c.seed);
  SizeEstimateOptions so;
  so.seed = c.seed + 1;
  so.slack = c.slack;
  so.delta1 = c.delta1;
  so.mu = c.mu;
  so.workers = c.workers;
  so.collections = std::max(1, c.trials / 5);
  const DecayReport se = size_estimate_sweep(so);
  rep.metrics["size_estimates"] = se.metrics;
  rep.pass = rep.pass && se.pass;
  return rep;
}

}  // namespace

DecayReport run_experiment(const ExperimentConfig& config) {
  const auto& names = experiment_names();
  if (std::find(names.begin(), names.end(), config.experiment) == names.end())
    throw Error("unknown-experiment", "no experiment named '" + config.experiment + "'");
  const ExperimentConfig c = with_defaults(config);
  const auto start = std::chrono::steady_clock::now();
  DecayReport rep;
  const std::string& e = c.experiment;
  if (e == "gabor") {
    rep = run_gabor(c);
  } else if (e == "multiplier") {
    rep = stationary_phase_sweep(c.a, 0, c.am, {c.trials, c.seed, c.workers});
  } else if (e == "decay") {
    LambdaBarSweepOptions o;
    o.a = c.a;
    o.am_list = c.am;
    o.trials = c.trials;
    o.mu = c.mu;
    o.seed = c.seed;
    o.grid = c.grid;
    o.workers = c.workers;
    rep = lambda_bar_sweep(o);
  } else if (e == "weyl") {
    rep = run_weyl(c);
  } else if (e == "levelset") {
    rep = run_levelset(c);
  } else if (e == "tiles") {
    rep = run_tiles(c);
  } else if (e == "counterexample") {
    rep = counterexample_sweep(c.am, c.L, c.a, c.workers);
  } else {
    DominationOptions o;
    o.m_values = c.am;
    o.pairs = c.trials;
    o.a = c.a;
    o.grid = c.grid;
    o.seed = c.seed;
    o.workers = c.workers;
    rep = domination_sweep(o);
  }
  rep.experiment = e;
  rep.seed = c.seed;
  rep.config_hash = config_hash(c);
  rep.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

}  // namespace bhc
