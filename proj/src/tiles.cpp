#include "bhc/tiles.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

namespace bhc {

Interval Interval::dilate(double c) const {
  const double half = 0.5 * c * length();
  return {center() - half, center() + half};
}

Interval TriTile::I() const { return {std::ldexp(double(r), k), std::ldexp(double(r + 1), k)}; }

Interval TriTile::omega(int j) const {
  const double s = std::exp2(double(am - k));
  switch (j) {
    case 1: return {s * (ell + 1), s * (ell + 2)};
    case 2: return {s * (ell - 1), s * ell};
    case 3: return {s * (2 * ell), s * (2 * ell + 1)};
  }
  throw Error("domain-violation", "tile direction must be 1, 2 or 3");
}

TriTile make_tri_tile(int k, int ell, long r, int am) {
  if (am % 2 || am <= 0) throw Error("am-parity", "a*m must be a positive even integer");
  return {k, ell, r, am};
}

TriTile tri_tile_from_first(const Rect& p1, int am) {
  const int k = int(std::lround(std::log2(p1.I.length())));
  const long r = std::lround(std::ldexp(p1.I.lo, -k));
  const int ell = int(std::lround(p1.omega.lo / std::exp2(double(am - k)))) - 1;
  return make_tri_tile(k, ell, r, am);
}

double whitney_ratio(const TriTile& P) {
  const Interval w1 = P.omega(1), w2 = P.omega(2);
  // closest point of the square to the diagonal: minimize xi - eta
  const double gap = w1.lo - w2.hi;
  return gap / std::sqrt(2.0) / w1.length();
}

Rect SubTile::s(int j) const {
  const int am = parent.am, k = parent.k;
  const double len = std::exp2(double(k - am / 2));  // |I_s| = 2^{-(am/2-k)}
  const double flen = 1.0 / len;
  const double base = std::ldexp(double(parent.r - 1), k);
  const double big = std::exp2(double(am - k));
  const long ell = parent.ell;
  switch (j) {
    case 1: return {{base + (p - n) * len, base + (p - n + 1) * len}, {ell * big + (u - v) * flen, ell * big + (u - v + 1) * flen}};
    case 2:
      return {{base + (p + n) * len, base + (p + n + 1) * len},
              {(ell - 1) * big + (u + v) * flen, (ell - 1) * big + (u + v + 1) * flen}};
    case 3:
      return {{base + p * len, base + (p + 1) * len},
              {(2 * ell - 1) * big + 2 * u * flen, (2 * ell - 1) * big + (2 * u + 1) * flen}};
  }
  throw Error("domain-violation", "tile direction must be 1, 2 or 3");
}

std::vector<SubTile> enumerate_subtiles(const TriTile& P, long window_constant) {
  if (P.am % 2) throw Error("am-parity", "a*m must be even");
  const ModelWindows w = default_windows(P.am, window_constant);
  std::vector<SubTile> out;
  out.reserve(size_t(w.u.size() * w.v.size() * w.n.size() * w.p.size()));
  for (long u = w.u.lo; u < w.u.hi; ++u)
    for (long v = w.v.lo; v < w.v.hi; ++v)
      for (long n = w.n.lo; n < w.n.hi; ++n)
        for (long p = w.p.lo; p < w.p.hi; ++p) out.push_back({P, u, v, n, p});
  return out;
}

bool refines(const SubTile& s, double c) {
  auto near = [c](const Interval& inner, const Interval& outer) {
    return inner.lo >= outer.lo - c * outer.length() && inner.hi <= outer.hi + c * outer.length();
  };
  for (int j = 1; j <= 3; ++j) {
    const Rect t = s.s(j);
    const Rect P = s.parent.tile(j);
    if (!near(t.I, P.I) || !near(t.omega, P.omega)) return false;
  }
  return true;
}

double top_frequency(double xi, int j) { return j == 3 ? 2.0 * xi : xi; }

bool lacunary_at(const TriTile& P, double xi, int j, double dilation) {
  const Interval w = P.omega(j);
  const double x = top_frequency(xi, j);
  return w.dilate(dilation).contains(x) && !w.contains(x);
}

bool overlapping_at(const TriTile& P, double xi, int j) { return P.omega(j).contains(top_frequency(xi, j)); }

bool is_tree(const Tree& T, double dilation) {
  for (const TriTile& P : T.tiles) {
    if (!T.top_interval.contains(P.I())) return false;
    const bool ok = T.kind == TreeKind::lacunary ? lacunary_at(P, T.top_freq, T.direction, dilation)
                                                 : overlapping_at(P, T.top_freq, T.direction);
    if (!ok) return false;
  }
  return true;
}

bool strongly_disjoint(const Tree& T1, const Tree& T2, Disjointness variant) {
  if (T1.kind != TreeKind::lacunary || T2.kind != TreeKind::lacunary || T1.direction != T2.direction)
    throw Error("direction-mismatch", "strong disjointness needs two lacunary trees of the same direction");
  const int j = T1.direction;
  auto one_way = [&](const Tree& A, const Tree& B) {
    const Interval top = variant == Disjointness::tripled ? A.top_interval.dilate(3.0) : A.top_interval;
    for (const TriTile& P : A.tiles)
      for (const TriTile& Q : B.tiles) {
        const Interval wp = P.omega(j), wq = Q.omega(j);
        if (wp.dilate(3.0).overlaps(wq.dilate(3.0)) && wp.length() < wq.length() && Q.I().overlaps(top)) return false;
      }
    return true;
  };
  return one_way(T1, T2) && one_way(T2, T1);
}

std::vector<std::vector<TriTile>> sparse_subfamilies(const std::vector<TriTile>& tiles) {
  std::map<std::pair<int, int>, std::vector<TriTile>> groups;
  for (const TriTile& P : tiles) groups[{((P.k % 2) + 2) % 2, ((P.ell % 3) + 3) % 3}].push_back(P);
  std::vector<std::vector<TriTile>> out;
  for (auto& [key, g] : groups) out.push_back(std::move(g));
  return out;
}

std::vector<TriTile> random_tiles(Rng& rng, size_t count, int am, const std::vector<int>& k_values) {
  std::uniform_int_distribution<size_t> pick_k(0, k_values.size() - 1);
  std::uniform_real_distribution<double> ux(0.0, 4.0), uxi(0.0, 1.0);
  std::uniform_int_distribution<int> off(-3, 1);
  const double xi0 = std::exp2(double(am)) * (1.0 + 3.0 * uxi(rng));
  std::set<TriTile> seen;
  std::vector<TriTile> out;
  for (int guard = 0; out.size() < count && guard < 1000 * int(count); ++guard) {
    const int k = k_values[pick_k(rng)];
    const long r = long(std::floor(std::ldexp(ux(rng), -k)));
    const int ell = int(std::floor(xi0 / std::exp2(double(am - k)))) + off(rng);
    const TriTile P = make_tri_tile(k, ell, r, am);
    if (seen.insert(P).second) out.push_back(P);
  }
  return out;
}

// ---- size and energy -----------------------------------------------------------

std::vector<TreeCandidate> lacunary_candidates(const std::vector<TriTile>& tiles, const std::vector<double>& a, int j,
                                               const std::vector<bool>& active) {
  if (a.size() != tiles.size()) throw Error("domain-violation", "one coefficient per tile required");
  std::vector<TreeCandidate> out;
  if (tiles.empty()) return out;
  auto is_active = [&](size_t i) { return active.empty() || active[i]; };

  int k_max = tiles[0].k;
  for (const TriTile& P : tiles) k_max = std::max(k_max, P.k);
  std::set<std::pair<int, long>> tops;
  for (size_t i = 0; i < tiles.size(); ++i) {
    if (!is_active(i)) continue;
    for (int kk = tiles[i].k; kk <= k_max + 4; ++kk) {
      const long rr = long(std::floor(std::ldexp(double(tiles[i].r), tiles[i].k - kk)));
      tops.emplace(kk, rr);
    }
  }
  std::vector<double> brk;
  const double scale = j == 3 ? 0.5 : 1.0;
  for (size_t i = 0; i < tiles.size(); ++i) {
    if (!is_active(i)) continue;
    const Interval w = tiles[i].omega(j);
    for (double x : {w.lo - w.length(), w.lo, w.hi, w.hi + w.length()}) brk.push_back(x * scale);
  }
  std::sort(brk.begin(), brk.end());
  brk.erase(std::unique(brk.begin(), brk.end()), brk.end());
  std::vector<double> xis = brk;
  for (size_t i = 0; i + 1 < brk.size(); ++i) xis.push_back(0.5 * (brk[i] + brk[i + 1]));
  std::sort(xis.begin(), xis.end());

  for (const auto& [kk, rr] : tops) {
    const Interval I{std::ldexp(double(rr), kk), std::ldexp(double(rr + 1), kk)};
    std::set<std::vector<size_t>> seen;
    for (double xi : xis) {
      TreeCandidate c{I, xi, {}, 0.0};
      double s = 0.0;
      for (size_t i = 0; i < tiles.size(); ++i) {
        if (!is_active(i) || !I.contains(tiles[i].I()) || !lacunary_at(tiles[i], xi, j)) continue;
        c.members.push_back(i);
        s += a[i] * a[i];
      }
      if (c.members.empty() || !seen.insert(c.members).second) continue;
      c.size = std::sqrt(s / I.length());
      out.push_back(std::move(c));
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const TreeCandidate& x, const TreeCandidate& y) {
    if (x.I.lo != y.I.lo) return x.I.lo < y.I.lo;
    if (x.I.length() != y.I.length()) return x.I.length() < y.I.length();
    return x.xi < y.xi;
  });
  return out;
}

double size_j(const std::vector<TriTile>& tiles, const std::vector<double>& a, int j) {
  double best = 0.0;
  for (const TreeCandidate& c : lacunary_candidates(tiles, a, j)) best = std::max(best, c.size);
  return best;
}

namespace {

double subset_size(const TreeCandidate& c, const std::vector<double>& a, const std::vector<char>& in) {
  double s = 0.0;
  for (size_t i : c.members)
    if (in[i]) s += a[i] * a[i];
  return std::sqrt(s / c.I.length());
}

}  // namespace

EnergyReport energy_j(const std::vector<TriTile>& tiles, const std::vector<double>& a, int j, Disjointness variant) {
  EnergyReport rep;
  const std::vector<TreeCandidate> cands = lacunary_candidates(tiles, a, j);
  double top = 0.0, floor_size = 1e300;
  for (const TreeCandidate& c : cands) {
    top = std::max(top, c.size);
    if (c.size > 0) floor_size = std::min(floor_size, c.size);
  }
  if (top == 0.0) return rep;
  const int d_hi = int(std::ceil(std::log2(top)));
  const int d_lo = std::max(d_hi - 60, int(std::floor(std::log2(floor_size))) - 1);
  const size_t n = tiles.size();
  // longest tops first, so a lone admissible tree is never beaten by the greedy family
  std::vector<size_t> order(cands.size());
  std::iota(order.begin(), order.end(), size_t(0));
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t x, size_t y) { return cands[x].I.length() > cands[y].I.length(); });

  for (int d = d_hi; d >= d_lo; --d) {
    const double thr = std::ldexp(1.0, d);
    std::vector<char> active(n, 1);
    std::vector<Tree> family;
    double total = 0.0;
    std::vector<char> rejected(cands.size(), 0);
    for (;;) {
      bool picked = false;
      for (size_t oi = 0; oi < order.size() && !picked; ++oi) {
        const size_t ci = order[oi];
        if (rejected[ci]) continue;
        const TreeCandidate& c = cands[ci];
        if (subset_size(c, a, active) <= thr) continue;
        std::vector<char> in(n, 0);
        Tree T;
        T.top_interval = c.I;
        T.top_freq = c.xi;
        T.direction = j;
        T.kind = TreeKind::lacunary;
        for (size_t i : c.members)
          if (active[i]) in[i] = 1, T.tiles.push_back(tiles[i]);
        // every subtree stays below 2^{d+1}
        bool capped = true;
        for (const TreeCandidate& sub : cands)
          if (subset_size(sub, a, in) > 2.0 * thr) {
            capped = false;
            break;
          }
        if (!capped) {
          rejected[ci] = 1;
          continue;
        }
        bool disjoint = true;
        for (const Tree& F : family)
          if (!strongly_disjoint(F, T, variant)) {
            disjoint = false;
            break;
          }
        if (!disjoint) {
          rejected[ci] = 1;
          continue;
        }
        for (size_t i = 0; i < n; ++i) {
          if (in[i]) active[i] = 0;
          // overlapping trees with tops I_T and its two neighbours
          const Interval I = c.I;
          for (const Interval& J : {I, I.shifted(I.length()), I.shifted(-I.length())})
            if (active[i] && J.contains(tiles[i].I()) && overlapping_at(tiles[i], c.xi, j)) active[i] = 0;
        }
        total += c.I.length();
        family.push_back(std::move(T));
        picked = true;
      }
      if (!picked) break;
    }
    const double e = thr * std::sqrt(total);
    if (e > rep.energy) {
      rep.energy = e;
      rep.best_d = d;
      rep.trees = family;
    }
  }
  return rep;
}

SizeEnergyReport check_size_energy(const std::vector<TriTile>& tiles, const std::array<std::vector<double>, 3>& a,
                                   const std::array<double, 3>& theta) {
  double tsum = 0.0;
  for (double t : theta) {
    if (t < 0.0 || t >= 1.0) throw Error("theta-constraint", "theta_j must lie in [0,1)");
    tsum += t;
  }
  if (std::abs(tsum - 1.0) > 1e-12) throw Error("theta-constraint", "theta_1 + theta_2 + theta_3 must equal 1");
  SizeEnergyReport rep;
  double s = 0.0;
  for (size_t i = 0; i < tiles.size(); ++i) s += a[0][i] * a[1][i] * a[2][i] / std::sqrt(tiles[i].I().length());
  rep.lhs = std::abs(s);
  std::array<std::vector<double>, 3> mag;
  for (int j = 0; j < 3; ++j) {
    mag[j].resize(a[j].size());
    for (size_t i = 0; i < a[j].size(); ++i) mag[j][i] = std::abs(a[j][i]);
  }
  rep.rhs = 1.0;
  for (int j = 0; j < 3; ++j) {
    rep.size[j] = size_j(tiles, mag[j], j + 1);
    rep.energy[j] = energy_j(tiles, mag[j], j + 1).energy;
    rep.rhs *= std::pow(rep.size[j], theta[j]) * std::pow(rep.energy[j], 1.0 - theta[j]);
  }
  rep.ratio = rep.rhs > 0 ? rep.lhs / rep.rhs : (rep.lhs > 0 ? INFINITY : 0.0);
  return rep;
}

// ---- coefficients attached to tiles --------------------------------------------

double chi_tilde(const Interval& I, double x) { return std::pow(1.0 + I.distance(x) / I.length(), -10.0); }

double local_l2(const ComplexGrid& f, const Interval& I) {
  double s = 0.0;
  for (Index i = 0; i < f.size(); ++i) {
    const double c = chi_tilde(I, f.x(i));
    s += std::norm(f[i]) * c * c;
  }
  return std::sqrt(s * f.step() / I.length());
}

namespace {

double tile_energy(const ComplexGrid& f, const TriTile& P, long w_lo, long w_hi) {
  const PacketFamily fam = packet_family(P.am, P.k, P.ell);
  const GaborSystem sys(f.left, f.right, f.size(), fam.j_scale);
  const long N = 1L << (P.am / 2);
  const long B = long(sys.B());
  const CoefficientTable t = gabor_coeffs(f, fam, {w_lo, w_hi}, {0, B});
  double s = 0.0;
  for (long w = w_lo; w < w_hi; ++w)
    for (long m = P.r * N; m < (P.r + 1) * N; ++m) s += std::norm(t.at(w, ((m % B) + B) % B));
  return std::sqrt(s);
}

std::vector<Index> cell_points(const ComplexGrid& f, const Interval& c) {
  std::vector<Index> out;
  const double T = f.length();
  const double h = f.step();
  const long i0 = long(std::ceil((c.lo - f.left) / h - 1e-9));
  const long i1 = long(std::ceil((c.hi - f.left) / h - 1e-9));
  for (long i = i0; i < i1; ++i) out.push_back(Index(((i % long(f.size())) + long(f.size())) % long(f.size())));
  (void)T;
  return out;
}

Interval fine_interval(const TriTile& P, long p_prime) {
  const double w = std::exp2(double(P.k - P.am));
  const double lo = std::ldexp(double(P.r - 1), P.k) + double(p_prime) * w;
  return {lo, lo + w};
}

}  // namespace

double f_tile(const ComplexGrid& f, const TriTile& P) {
  const long N = 1L << (P.am / 2);
  return tile_energy(f, P, 2 * N, 3 * N);
}

double g_tile(const ComplexGrid& g, const TriTile& P) {
  const long N = 1L << (P.am / 2);
  return tile_energy(g, P, 0, N);
}

ComplexGrid psi_packet(const TriTile& P, long p_prime, double left, double right, Index grid_n) {
  ComplexGrid out(left, right, grid_n);
  const Interval cell = fine_interval(P, p_prime);
  const auto pts = cell_points(out, cell);
  if (pts.size() < 4) throw Error("grid-mismatch", "grid too coarse to resolve the fine cell of Psi");
  const double xi = P.omega(3).center();
  const double h = out.step();
  const long base = long(std::ceil((cell.lo - left) / h - 1e-9));
  double nrm = 0.0;
  for (size_t q = 0; q < pts.size(); ++q) {
    const double x = left + double(base + long(q)) * h;  // unwrapped position
    const double b = bump((x - cell.center()) / (0.5 * cell.length()));
    out[pts[q]] = b * e(xi * x);
    nrm += b * b;
  }
  out.samples /= std::sqrt(nrm * h);
  return out;
}

std::vector<LocalizedHCoeff> localized_h_coeffs(const ComplexGrid& h, const RealGrid& lambda, const TriTile& P,
                                                const Classification& cls, int workers) {
  require_same_grid(h, lambda);
  const ModelContext& ctx = cls.ctx;
  if (ctx.am != P.am || ctx.k != P.k || ctx.ell != P.ell || ctx.r != P.r)
    throw Error("classification-mismatch", "classification was computed for a different tri-tile");
  // group items by (n, v)
  std::map<std::pair<long, long>, std::vector<size_t>> by_nv;
  for (size_t i = 0; i < cls.items.size(); ++i) by_nv[{cls.items[i].n, cls.items[i].v}].push_back(i);
  std::vector<std::pair<long, long>> keys;
  for (const auto& kv : by_nv) keys.push_back(kv.first);

  std::map<long, ComplexGrid> psi;
  std::map<long, std::vector<Index>> pts;
  for (const auto& it : cls.items)
    if (!psi.count(it.p_prime)) {
      psi.emplace(it.p_prime, psi_packet(P, it.p_prime, h.left, h.right, h.size()));
      pts.emplace(it.p_prime, cell_points(h, fine_interval(P, it.p_prime)));
    }

  std::vector<double> sq(cls.items.size(), 0.0);
  parallel_for(Index(keys.size()), workers, [&](Index t) {
    const auto [n, v] = keys[t];
    std::map<double, cd> cache;
    for (size_t idx : by_nv.at(keys[t])) {
      const auto& it = cls.items[idx];
      const ComplexGrid& ps = psi.at(it.p_prime);
      cd acc = 0.0;
      for (Index i : pts.at(it.p_prime)) {
        const double lam = lambda[i];
        const double rb = rho_band(ctx.a, ctx.am, ctx.k, lam);
        if (rb == 0.0) continue;
        auto c = cache.find(lam);
        if (c == cache.end()) c = cache.emplace(lam, weight_we_at(ctx.a, ctx.am, ctx.k, n, v, lam)).first;
        acc += h[i] * rb * c->second * std::conj(ps[i]);
      }
      sq[idx] = std::norm(acc * h.step());
    }
  });

  std::map<std::pair<long, MassClass>, double> agg;
  for (size_t i = 0; i < cls.items.size(); ++i) agg[{cls.items[i].p_prime, cls.items[i].cls}] += sq[i];
  std::vector<LocalizedHCoeff> out;
  const double norm = std::exp2(-P.am / 2.0);
  for (const auto& [key, s] : agg) out.push_back({P, key.first, key.second, std::sqrt(norm * s)});
  return out;
}

double h_star(const std::vector<LocalizedHCoeff>& coeffs, MassClass c) {
  double s = 0.0;
  for (const auto& x : coeffs)
    if (x.cls == c) s += x.value * x.value;
  return std::sqrt(s);
}

// ---- serialization ---------------------------------------------------------------

nlohmann::json dyadic_json(double x) {
  if (x == 0.0) return {{"mantissa", 0}, {"exponent", 0}};
  int E = 0;
  const double f = std::frexp(x, &E);
  long long m = static_cast<long long>(std::ldexp(f, 53));
  int e = E - 53;
  while (m % 2 == 0) m /= 2, ++e;
  return {{"mantissa", m}, {"exponent", e}};
}

namespace {
nlohmann::json interval_json(const Interval& I) { return {{"lo", dyadic_json(I.lo)}, {"hi", dyadic_json(I.hi)}}; }
}  // namespace

nlohmann::json to_json(const TriTile& P) {
  return {{"k", P.k},
          {"ell", P.ell},
          {"r", P.r},
          {"am", P.am},
          {"I", interval_json(P.I())},
          {"omega", {interval_json(P.omega(1)), interval_json(P.omega(2)), interval_json(P.omega(3))}}};
}

nlohmann::json to_json(const Tree& T) {
  nlohmann::json tiles = nlohmann::json::array();
  for (const TriTile& P : T.tiles) tiles.push_back(to_json(P));
  return {{"direction", T.direction},
          {"kind", T.kind == TreeKind::lacunary ? "lacunary" : "overlapping"},
          {"top_interval", interval_json(T.top_interval)},
          {"top_freq", T.top_freq},
          {"tiles", tiles}};
}

}  // namespace bhc
