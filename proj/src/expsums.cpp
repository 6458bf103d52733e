#include "bhc/expsums.hpp"

#include <algorithm>
#include <cmath>

namespace bhc {

namespace {

bool integral(double d) { return d == std::floor(d) && std::abs(d) < 64; }

// Integer powers by repeated multiplication; otherwise the odd extension of |b|^d.
double spow(double b, double d) {
  if (integral(d)) {
    int k = int(d);
    const bool inv = k < 0;
    k = std::abs(k);
    double r = 1.0;
    for (int i = 0; i < k; ++i) r *= b;
    return inv ? 1.0 / r : r;
  }
  return b >= 0.0 ? std::pow(b, d) : -std::pow(-b, d);
}

double frac_dist(double x) { return std::abs(x - std::nearbyint(x)); }

}  // namespace

// ---- fewnomials ----------------------------------------------------------------

double Fewnomial::operator()(double x) const {
  double s = 0.0;
  for (const FewTerm& t : terms) s += t.a * spow(x + t.alpha, d);
  return s;
}

double Fewnomial::derivative(double x) const {
  double s = 0.0;
  for (const FewTerm& t : terms) s += t.a * d * spow(x + t.alpha, d - 1.0);
  return s;
}

double Fewnomial::scale(double lo, double hi) const {
  double s = 0.0;
  for (const FewTerm& t : terms)
    s += std::abs(t.a) * std::max(std::abs(spow(lo + t.alpha, d)), std::abs(spow(hi + t.alpha, d)));
  return s;
}

void Fewnomial::validate() const {
  for (size_t i = 0; i < terms.size(); ++i)
    for (size_t j = i + 1; j < terms.size(); ++j)
      if (terms[i].alpha == terms[j].alpha) throw Error("domain-violation", "shifts alpha_k must be distinct");
  if (!integral(d))
    for (const FewTerm& t : terms)
      if (dom_lo + t.alpha <= 0.0) throw Error("domain-violation", "x + alpha_k must stay positive on the domain");
}

ZeroCount count_zeros(const Fewnomial& F, double lo, double hi, Index grid_n) {
  F.validate();
  if (lo < F.dom_lo || hi > F.dom_hi || !(hi > lo)) throw Error("domain-violation", "interval outside the domain");
  if (grid_n < 2) throw Error("grid-mismatch", "need at least two grid points");
  ZeroCount out;
  const double tiny = 1e-12 * F.scale(lo, hi);
  std::vector<double> xs(grid_n), fs(grid_n);
  bool all_small = true;
  for (Index i = 0; i < grid_n; ++i) {
    xs[i] = lo + (hi - lo) * double(i) / double(grid_n - 1);
    fs[i] = F(xs[i]);
    if (std::abs(fs[i]) >= tiny) all_small = false;
  }
  if (all_small) {
    out.degenerate = true;
    return out;
  }
  for (Index i = 0; i < grid_n; ++i) {
    if (fs[i] == 0.0) {
      out.roots.push_back(xs[i]);
      continue;
    }
    if (i + 1 < grid_n && fs[i + 1] != 0.0 && (fs[i] < 0.0) != (fs[i + 1] < 0.0)) {
      double a = xs[i], b = xs[i + 1], fa = fs[i];
      while (b - a > 1e-12) {
        const double c = 0.5 * (a + b), fc = F(c);
        if (fc == 0.0) a = b = c;
        else if ((fc < 0.0) == (fa < 0.0)) a = c, fa = fc;
        else b = c;
      }
      out.roots.push_back(0.5 * (a + b));
    }
  }
  out.count = int(out.roots.size());
  return out;
}

double levelset_constant_K(const Fewnomial& F) {
  const int n = F.n();
  if (n < 2) return std::numeric_limits<double>::infinity();
  const FewTerm& last = F.terms.back();
  double prod = std::abs(last.a);
  for (int j = 1; j <= n - 1; ++j) prod *= std::abs(F.d - j + 1) * std::abs(last.alpha - F.terms[size_t(j - 1)].alpha);
  if (prod == 0.0) return std::numeric_limits<double>::infinity();
  return std::pow(3.0, 2.0 * std::abs(F.d) + 2.0 * n + 10.0) / std::pow(prod, 1.0 / (n - 1));
}

LevelSetReport level_set_measure(const Fewnomial& F, double eta, double lo, double hi, Index samples) {
  LevelSetReport rep;
  const double h = (hi - lo) / double(samples);
  double sup = 0.0;
  Index hits = 0;
  for (Index i = 0; i < samples; ++i) {
    const double v = std::abs(F(lo + (double(i) + 0.5) * h));
    sup = std::max(sup, v);
    if (v < eta) ++hits;
  }
  rep.measure = double(hits) * h;
  const int n = F.n();
  if (integral(F.d) && F.d >= 1.0 && F.d < n - 1) {
    rep.interpolation_case = true;
    rep.bound = sup > 0.0 ? 100.0 * F.d * F.d * std::pow(eta / sup, 1.0 / F.d) : std::numeric_limits<double>::infinity();
  } else {
    rep.bound = levelset_constant_K(F) * std::pow(eta, 1.0 / (n - 1));
  }
  return rep;
}

Fewnomial random_fewnomial(Rng& rng, int n, double d) {
  std::uniform_real_distribution<double> mag(0.2, 2.0), shift(-0.5, 0.5), coin(0.0, 1.0);
  Fewnomial F;
  F.d = d;
  F.dom_lo = 1.0;
  F.dom_hi = 2.0;
  while (int(F.terms.size()) < n) {
    const double al = shift(rng);
    bool fresh = true;
    for (const FewTerm& t : F.terms) fresh = fresh && std::abs(t.alpha - al) > 1e-3;
    if (!fresh) continue;
    F.terms.push_back({(coin(rng) < 0.5 ? -1.0 : 1.0) * mag(rng), al});
  }
  return F;
}

// ---- phase of the double TT* sum ---------------------------------------------------

LambdaTilde random_lambda_tilde(Rng& rng, int am, int pieces) {
  if (am % 2 != 0) throw Error("am-parity", "am must be even");
  LambdaTilde lt;
  lt.am = am;
  const long N = lt.N();
  if (pieces <= 0) pieces = int(N);
  const long len = 2 * N;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> level(static_cast<size_t>(pieces));
  for (double& l : level) l = double(N) * std::exp2(u(rng));
  lt.values.resize(size_t(len));
  for (long i = 0; i < len; ++i) lt.values[size_t(i)] = level[size_t(i * pieces / len)];
  return lt;
}

LambdaTilde constant_lambda_tilde(int am, double value) {
  if (am % 2 != 0) throw Error("am-parity", "am must be even");
  LambdaTilde lt;
  lt.am = am;
  lt.values.assign(size_t(2 * lt.N()), value);
  return lt;
}

Fewnomial phase_fewnomial(long p, long q, long r, const LambdaTilde& lt, double a) {
  const long s = q + r - p;
  if (!lt.has(p) || !lt.has(q) || !lt.has(r) || !lt.has(s))
    throw Error("index-range-mismatch", "p, q, r and q+r-p must index lambda~");
  const double N = double(lt.N());
  Fewnomial F;
  F.d = a - 1.0;
  F.dom_lo = 0.1;
  F.dom_hi = 10.0;
  F.terms = {{lt(p), -double(p) / N}, {-lt(q), double(q - 2 * p) / N}, {-lt(r), -double(r) / N}, {lt(s), double(q - p - r) / N}};
  return F;
}

double phase_P(long p, long q, long r, long v, const LambdaTilde& lt, double a) {
  const double N = double(lt.N()), d = a - 1.0;
  return spow(double(2 * v - p) / N, d) * lt(p) - spow(double(2 * v + q - 2 * p) / N, d) * lt(q) -
         spow(double(2 * v - r) / N, d) * lt(r) + spow(double(2 * v + q - p - r) / N, d) * lt(q + r - p);
}

PhaseBound phase_levelset_bound(long p, long q, long r, const LambdaTilde& lt, double eta, double a) {
  PhaseBound b;
  const double N = double(lt.N());
  double denom = 0.0, L = 0.0;
  if (a == 3.0) {
    denom = std::abs(double(r - q) * lt(p) + double(p - r) * lt(q) + double(q - p) * lt(r));
    if (denom > 0.0) L = eta * N / denom;
  } else if (a == 4.0) {
    denom = std::abs(double(p - r)) * std::abs(double(p - q));
    if (denom > 0.0) L = std::sqrt(eta * N / denom);
  } else {
    denom = std::abs((a - 1) * (a - 2) * (a - 3) * (a - 4)) * std::abs(double(p - r)) * std::abs(double(q - p)) *
            std::abs(double(r - q));
    if (denom > 0.0) L = std::pow(20.0, a) * std::cbrt(eta * N * N / denom);
  }
  if (denom > 0.0) {
    b.L = L;
    b.infinite = false;
  }
  return b;
}

double phase_levelset_measure(long p, long q, long r, const LambdaTilde& lt, double eta, double a, Index samples) {
  const Fewnomial F = phase_fewnomial(p, q, r, lt, a);
  const double h = 1.0 / double(samples);
  Index hits = 0;
  for (Index i = 0; i < samples; ++i)
    if (std::abs(F.derivative(1.0 + (double(i) + 0.5) * h)) < eta) ++hits;
  return double(hits) * h;
}

VWindow v_window(long p, long q, long r, long N) {
  VWindow w;
  w.lo = std::max({N, p - 2 * N + 1, N + p - q, r - 2 * N + 1});
  w.hi = std::min({2 * N - 1, p - N, 2 * N - 1 + p - q, r - N});
  return w;
}

WeylReport weyl_sum(double s, const LambdaTilde& lt, double a, int workers) {
  const long N = lt.N();
  const std::int64_t n4 = std::int64_t(N) * N * N * N;
  check_budget(n4, "weyl_sum");
  const long plo = 2 * N, phi = 4 * N - 1;  // p, q, r range over u + v with u, v in [N, 2N)
  const long span = phi - plo;
  std::vector<cd> slot(static_cast<size_t>(span));
  std::vector<long> count(static_cast<size_t>(span), 0);
  const double scale = double(N) * s;
  parallel_for(span, workers, [&](Index i) {
    const long p = plo + long(i);
    cd acc = 0.0;
    long c = 0;
    for (long q = plo; q < phi; ++q)
      for (long r = plo; r < phi; ++r) {
        const VWindow w = v_window(p, q, r, N);
        for (long v = w.lo; v <= w.hi; ++v) acc += e(scale * phase_P(p, q, r, v, lt, a));
        c += w.size();
      }
    slot[size_t(i)] = acc;
    count[size_t(i)] = c;
  });
  WeylReport rep;
  for (long i = 0; i < span; ++i) {
    rep.value += slot[size_t(i)];
    rep.terms += count[size_t(i)];
  }
  rep.abs = std::abs(rep.value);
  rep.trivial = double(n4);
  rep.normalized = rep.abs / rep.trivial;
  return rep;
}

double weyl_sum_squared_form(double s, const LambdaTilde& lt, double a) {
  const long N = lt.N();
  const double Nd = double(N), d = a - 1.0, scale = Nd * s;
  // phase(u, v) = N s ((v-u)/N)^{a-1} lambda~(u+v)
  Eigen::MatrixXcd E(N, N);
  for (long u = 0; u < N; ++u)
    for (long v = 0; v < N; ++v) E(u, v) = e(scale * spow(double(v - u) / Nd, d) * lt(2 * N + u + v));
  // sum_{v,v1} |sum_u E(u,v) conj(E(u,v1))|^2
  const Eigen::MatrixXcd G = E.transpose() * E.conjugate();
  return G.squaredNorm();
}

bool weyl_resonant(const LambdaTilde& lt, double a, double tol) {
  const long N = lt.N();
  double ref = 0.0;
  for (double v : lt.values) ref = std::max(ref, std::abs(v));
  const long plo = 2 * N, phi = 4 * N - 1;
  for (long p = plo; p < phi; ++p)
    for (long q = plo; q < phi; ++q)
      for (long r = plo; r < phi; ++r) {
        const VWindow w = v_window(p, q, r, N);
        if (w.size() < 2) continue;
        const double P0 = phase_P(p, q, r, w.lo, lt, a);
        for (long v = w.lo + 1; v <= w.hi; ++v)
          if (std::abs(phase_P(p, q, r, v, lt, a) - P0) > tol * ref) return false;
      }
  return true;
}

WeylScan weyl_scan(const LambdaTilde& lt, double a, double nu, int count, int workers) {
  WeylScan sc;
  const double N = double(lt.N());
  const double lo = std::pow(N, -2.0 * nu);
  for (int i = 0; i < count; ++i) {
    const double Ns = count == 1 ? 1.0 : lo * std::pow(1.0 / lo, double(i) / double(count - 1));
    const WeylReport r = weyl_sum(Ns / N, lt, a, workers);
    sc.s_values.push_back(Ns / N);
    sc.normalized.push_back(r.normalized);
    sc.max_normalized = std::max(sc.max_normalized, r.normalized);
  }
  sc.resonant = weyl_resonant(lt, a);
  return sc;
}

// ---- discrete Van der Corput ----------------------------------------------------

VdcReport vdc_check(const std::function<double(double)>& F, long n0, long n1, double alpha) {
  VdcReport rep;
  cd s = 0.0;
  for (long n = n0; n <= n1; ++n) s += e(F(double(n)));
  rep.sum_abs = std::abs(s);
  rep.bound = vdc_constant / alpha;
  rep.holds = rep.sum_abs <= rep.bound;
  // sampled F' by central differences, 8 points per unit
  const long pts = std::max(2L, 8 * (n1 - n0) + 1);
  const double h = 1e-5;
  double prev = 0.0, min_norm = 1.0;
  int dir = 0;
  bool monotone = true;
  for (long i = 0; i < pts; ++i) {
    const double x = double(n0) + double(n1 - n0) * double(i) / double(pts - 1);
    const double dF = (F(x + h) - F(x - h)) / (2.0 * h);
    min_norm = std::min(min_norm, frac_dist(dF));
    if (i > 0) {
      const double diff = dF - prev;
      if (std::abs(diff) > 1e-9) {
        const int sd = diff > 0 ? 1 : -1;
        if (dir != 0 && sd != dir) monotone = false;
        dir = sd;
      }
    }
    prev = dF;
  }
  rep.min_norm_derivative = min_norm;
  rep.admissible = monotone && min_norm >= alpha * (1.0 - 1e-6);
  return rep;
}

double calibrate_vdc_constant(long length, int sweep) {
  double worst = 0.0;
  for (int i = 1; i < sweep; ++i) {
    const double th = double(i) / double(sweep);
    cd s = 0.0;
    for (long n = 0; n < length; ++n) s += e(th * double(n));
    worst = std::max(worst, std::abs(s) * frac_dist(th));
  }
  return worst;
}

// ---- tube decomposition ------------------------------------------------------

double Tube::line(const TubeGrid& g, double p) const {
  const double t = (p - double(g.p_lo())) / double(g.p_hi() - g.p_lo());
  return alpha_center + t * (omega_center - alpha_center);
}

double Tube::slope(const TubeGrid& g) const {
  return std::abs(omega_center - alpha_center) / double(g.p_hi() - g.p_lo());
}

TubeGrid random_tube_grid(Rng& rng, int am) {
  if (am % 2 != 0) throw Error("am-parity", "am must be even");
  TubeGrid g;
  g.am = am;
  std::uniform_real_distribution<double> u(double(g.p_lo()), double(g.p_hi()));
  g.values.resize(size_t(g.p_hi() - g.p_lo() + 1));
  for (double& v : g.values) v = u(rng);
  return g;
}

std::vector<Tube> all_tubes(const TubeGrid& g, double eps) {
  const double cap = std::exp2(2.0 * eps * g.m());
  const double len = double(g.p_hi() - g.p_lo());
  // 2^{2 eps m + 2} J_Q, dilated about its center
  const double c = 0.5 * double(g.p_lo() + g.p_hi());
  const double half = 0.5 * len * std::exp2(2.0 * eps * g.m() + 2.0);
  const long jlo = long(std::ceil(c - half)), jhi = long(std::floor(c + half)) - 1;
  // tubes away from every sample have zero density in any mask and are skipped
  double vmin = 1e300, vmax = -1e300;
  for (double v : g.values) vmin = std::min(vmin, v), vmax = std::max(vmax, v);
  const double reach = cap * len + 1.0;
  std::vector<Tube> out;
  for (long ja = std::max(jlo, long(std::floor(vmin - reach))); ja <= std::min(jhi, long(std::ceil(vmax + reach))); ++ja)
    for (long jo = std::max(jlo, long(std::floor(double(ja) - cap * len)) - 1);
         jo <= std::min(jhi, long(std::ceil(double(ja) + cap * len)) + 1); ++jo) {
      Tube t{double(ja) + 0.5, double(jo) + 0.5};
      if (t.slope(g) <= cap) out.push_back(t);
    }
  return out;
}

namespace {

long tube_count(const TubeGrid& g, const Tube& t, const std::vector<char>& mask, std::vector<long>* members) {
  long c = 0;
  for (size_t i = 0; i < g.values.size(); ++i) {
    if (!mask[i]) continue;
    const double d = g.values[i] - t.line(g, double(g.p_lo() + long(i)));
    if (d >= -0.5 && d < 0.5) {
      ++c;
      if (members) members->push_back(long(i));
    }
  }
  return c;
}

}  // namespace

TubeDecomposition tube_decompose(const TubeGrid& g, double eps) {
  TubeDecomposition dec;
  dec.eps = eps;
  dec.step_cap = std::exp2(2.0 * eps * g.m());
  const size_t npts = g.values.size();
  dec.in_L.assign(npts, 0);
  const std::vector<Tube> tubes = all_tubes(g, eps);
  std::vector<char> used(tubes.size(), 0);
  const double thr = std::exp2(-2.0 * eps * g.m()) * double(npts);
  for (;;) {
    std::vector<char> mask(npts);
    for (size_t i = 0; i < npts; ++i) mask[i] = !dec.in_L[i];
    long best = -1;
    size_t arg = 0;
    for (size_t t = 0; t < tubes.size(); ++t) {
      if (used[t]) continue;
      const long c = tube_count(g, tubes[t], mask, nullptr);
      if (c > best) best = c, arg = t;
    }
    if (best < 0 || double(best) < thr) break;
    std::vector<long> members;
    tube_count(g, tubes[arg], mask, &members);
    for (long i : members) dec.in_L[size_t(i)] = 1;
    used[arg] = 1;
    dec.heavy.push_back(tubes[arg]);
    ++dec.steps;
  }
  return dec;
}

std::pair<double, double> non_concentration(const TubeGrid& g, const TubeDecomposition& dec) {
  const double w = std::exp2(dec.eps * g.m() - 10.0);
  const double npts = double(g.values.size());
  double worst = 0.0;
  for (const Tube& t : all_tubes(g, dec.eps)) {
    long c = 0;
    for (size_t i = 0; i < g.values.size(); ++i)
      if (!dec.in_L[i] && std::abs(g.values[i] - t.line(g, double(g.p_lo() + long(i)))) <= w) ++c;
    worst = std::max(worst, double(c) / npts);
  }
  return {worst, std::exp2(-dec.eps * g.m())};
}

}  // namespace bhc
