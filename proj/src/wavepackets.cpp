#include "bhc/wavepackets.hpp"
#include "bhc/operators.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace bhc {

namespace {

long mod(long a, long b) {
  long r = a % b;
  return r < 0 ? r + b : r;
}

constexpr double kWinLo = -1.0 / 6.0;
constexpr double kWinHi = 11.0 / 6.0;

// Grid indices whose sample points fall in [a,b), the interval read periodically.
std::vector<Index> cell_indices(double left, double right, Index n, double a, double b) {
  const double T = right - left;
  const double h = T / double(n);
  const long i0 = long(std::ceil((a - left) / h - 1e-9));
  const long i1 = long(std::ceil((b - left) / h - 1e-9));
  std::vector<Index> out;
  for (long i = i0; i < i1; ++i) out.push_back(Index(mod(i, long(n))));
  return out;
}

// psi(xi / 2^{am/2}) in the weight: 1 on [1/2, 4].
double weight_psi(double y) { return smooth_step(4.0 * (y - 0.25)) * smooth_step((8.0 - y) / 4.0); }

}  // namespace

double window_l2_norm() {
  static const double norm = [] {
    const int M = 1 << 16;
    const double h = 2.0 / M;
    double s = 0.0;
    for (int i = 0; i < M; ++i) {
      const double b = bump(-1.0 + (i + 0.5) * h);
      s += b * b;
    }
    return std::sqrt(s * h);
  }();
  return norm;
}

cd window_check(double y) {
  const Index M = std::max<Index>(4096, Index(std::ceil(64.0 * std::abs(y))));
  const double h = (kWinHi - kWinLo) / double(M);
  cd acc = 0.0;
  for (Index i = 0; i < M; ++i) {
    const double xi = kWinLo + (double(i) + 0.5) * h;
    acc += phi_window(xi) * e(xi * y);
  }
  return acc * h;
}

PacketFamily packet_family(int am, int k, int ell) {
  if (am % 2) throw Error("am-parity", "a*m must be even");
  return {am / 2 - k, (1L << (am / 2)) * long(ell - 1)};
}

// ---- Gabor system ----------------------------------------------------------

GaborSystem::GaborSystem(double left, double right, Index grid_n, int j_scale)
    : left_(left), right_(right), n_(grid_n), j_(j_scale) {
  if (!is_pow2(grid_n) || !(right > left)) throw Error("grid-mismatch", "invalid grid for Gabor system");
  const double T = right - left;
  const double Bd = std::ldexp(T, j_scale);
  B_ = Index(std::llround(Bd));
  if (B_ < 1 || std::abs(Bd - double(B_)) > 1e-9 || grid_n % B_)
    throw Error("grid-mismatch", "T 2^j must be an integer dividing the grid size");
  U_ = grid_n / B_;
  const double s0 = left / (T / double(grid_n));
  if (std::abs(s0 - std::round(s0)) > 1e-9) throw Error("grid-mismatch", "left endpoint must lie on the lattice");
  double sum = 0.0;
  for (long q = long(std::floor(kWinLo * B_)) - 1; q <= long(std::ceil(kWinHi * B_)) + 1; ++q) {
    const double w = phi_window(double(q) / double(B_));
    sum += w * w;
  }
  alpha_ = double(grid_n) / std::sqrt(T * sum);
  const double alpha_cont = double(grid_n) / T * std::ldexp(1.0, 0) / std::sqrt(std::ldexp(1.0, j_scale)) / window_l2_norm();
  ratio_ = alpha_ / alpha_cont;
}

double GaborSystem::phase_shift() const { return std::round(left_ / ((right_ - left_) / double(n_))); }

void GaborSystem::check_cell(long c, bool wrap) const {
  if (wrap) return;
  const double qlo = (double(c) + kWinLo) * double(B_);
  const double qhi = (double(c) + kWinHi) * double(B_);
  if (qlo < -double(n_) / 2.0 || qhi > double(n_) / 2.0)
    throw Error("band-unrepresentable", "packet frequency cell " + std::to_string(c) + " exceeds the Nyquist range");
}

Eigen::MatrixXcd GaborSystem::analyze(const ComplexGrid& f, const std::vector<long>& cs, bool wrap) const {
  if (f.size() != n_ || f.left != left_ || f.right != right_) throw Error("grid-mismatch", "signal not on system grid");
  const Eigen::VectorXcd F = dft(f.samples);
  const double T = right_ - left_;
  const double s0 = phase_shift();
  Eigen::MatrixXcd out(cs.size(), B_);
  for (size_t row = 0; row < cs.size(); ++row) {
    const long c = cs[row];
    check_cell(c, wrap);
    Eigen::VectorXcd E = Eigen::VectorXcd::Zero(B_);
    const long q0 = long(std::floor((c + kWinLo) * B_)), q1 = long(std::ceil((c + kWinHi) * B_));
    for (long q = q0; q <= q1; ++q) {
      const double w = phi_window(double(q) / double(B_) - double(c));
      if (w == 0.0) continue;
      E[mod(q, B_)] += F[mod(q, n_)] * w * e(-double(q) * s0 / double(n_));
    }
    out.row(row) = (idft(E) * (T / double(n_) / double(n_) * alpha_ * double(B_))).transpose();
  }
  return out;
}

ComplexGrid GaborSystem::synthesize(const Eigen::MatrixXcd& coeffs, const std::vector<long>& cs, bool wrap) const {
  if (coeffs.rows() != Index(cs.size()) || coeffs.cols() != B_)
    throw Error("index-range-mismatch", "coefficient matrix does not match the cell list");
  const double s0 = phase_shift();
  Eigen::VectorXcd P = Eigen::VectorXcd::Zero(n_);
  for (size_t row = 0; row < cs.size(); ++row) {
    const long c = cs[row];
    check_cell(c, wrap);
    if (coeffs.row(row).isZero(0.0)) continue;
    const Eigen::VectorXcd D = dft(coeffs.row(row).transpose());
    const long q0 = long(std::floor((c + kWinLo) * B_)), q1 = long(std::ceil((c + kWinHi) * B_));
    for (long q = q0; q <= q1; ++q) {
      const double w = phi_window(double(q) / double(B_) - double(c));
      if (w == 0.0) continue;
      P[mod(q, n_)] += alpha_ * w * e(double(q) * s0 / double(n_)) * D[mod(q, B_)];
    }
  }
  return ComplexGrid(left_, right_, idft(P));
}

ComplexGrid GaborSystem::packet(long c, long n) const {
  Eigen::MatrixXcd coeffs = Eigen::MatrixXcd::Zero(1, B_);
  coeffs(0, mod(n, B_)) = 1.0;
  return synthesize(coeffs, {c}, true);
}

std::vector<long> GaborSystem::full_cells(long c0) const {
  std::vector<long> cs(U_);
  for (Index i = 0; i < U_; ++i) cs[i] = c0 + long(i);
  return cs;
}

Eigen::MatrixXd GaborSystem::fiber_matrix(Index beta, const std::vector<long>& cs) const {
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(U_, Index(cs.size()));
  for (size_t col = 0; col < cs.size(); ++col) {
    const long c = cs[col];
    const long q0 = long(std::floor((c + kWinLo) * B_)), q1 = long(std::ceil((c + kWinHi) * B_));
    for (long q = q0; q <= q1; ++q) {
      if (mod(q, B_) != beta) continue;
      const double w = phi_window(double(q) / double(B_) - double(c));
      A(mod(q, n_) / B_, Index(col)) += w;
    }
  }
  return A;
}

std::pair<double, double> GaborSystem::frame_bounds(const std::vector<long>& cs, bool wrap) const {
  for (long c : cs) check_cell(c, wrap);
  const double gamma = alpha_ * alpha_ * double(B_) * (right_ - left_) / double(n_) / double(n_);
  double lo = 1e300, hi = 0.0;
  for (Index beta = 0; beta < B_; ++beta) {
    const Eigen::MatrixXd A = fiber_matrix(beta, cs);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A * A.transpose(), Eigen::EigenvaluesOnly);
    lo = std::min(lo, gamma * es.eigenvalues().minCoeff());
    hi = std::max(hi, gamma * es.eigenvalues().maxCoeff());
  }
  return {std::max(lo, 0.0), hi};
}

// ---- tables and duals -------------------------------------------------------

std::string CoefficientTable::to_csv() const {
  std::ostringstream os;
  os << std::setprecision(17) << "u,n,re,im\n";
  for (long u = u_range.lo; u < u_range.hi; ++u)
    for (long n = n_range.lo; n < n_range.hi; ++n) {
      const cd v = at(u, n);
      os << u << ',' << n << ',' << v.real() << ',' << v.imag() << '\n';
    }
  return os.str();
}

CoefficientTable gabor_coeffs(const ComplexGrid& f, PacketFamily family, IndexRange u_range, IndexRange n_range,
                              bool wrap) {
  const GaborSystem sys(f.left, f.right, f.size(), family.j_scale);
  std::vector<long> cs;
  for (long u = u_range.lo; u < u_range.hi; ++u) cs.push_back(family.offset + u);
  const Eigen::MatrixXcd M = sys.analyze(f, cs, wrap);
  CoefficientTable t;
  t.j_scale = family.j_scale;
  t.offset = family.offset;
  t.u_range = u_range;
  t.n_range = n_range;
  t.left = f.left, t.right = f.right, t.grid_n = f.size();
  t.values.resize(u_range.size(), n_range.size());
  for (long u = 0; u < u_range.size(); ++u)
    for (long n = 0; n < n_range.size(); ++n) t.values(u, n) = M(u, mod(n_range.lo + n, long(sys.B())));
  return t;
}

GaborDual gabor_dual(double left, double right, Index grid_n, PacketFamily family, IndexRange u_range, bool wrap) {
  const GaborSystem sys(left, right, grid_n, family.j_scale);
  std::vector<long> cs;
  for (long u = u_range.lo; u < u_range.hi; ++u) cs.push_back(family.offset + u);
  for (long c : cs) sys.check_cell(c, wrap);
  GaborDual d;
  d.j_scale = family.j_scale;
  d.offset = family.offset;
  d.u_range = u_range;
  d.n_range = {0, long(sys.B())};
  d.left = left, d.right = right, d.grid_n = grid_n, d.wrap = wrap;
  d.gamma = sys.alpha() * sys.alpha() * double(sys.B()) * (right - left) / double(grid_n) / double(grid_n);
  std::vector<Eigen::MatrixXd> grams;
  double top = 0.0, bottom = 1e300;
  for (Index beta = 0; beta < sys.B(); ++beta) {
    const Eigen::MatrixXd A = sys.fiber_matrix(beta, cs);
    grams.push_back(d.gamma * A * A.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(grams.back(), Eigen::EigenvaluesOnly);
    top = std::max(top, es.eigenvalues().maxCoeff());
    bottom = std::min(bottom, es.eigenvalues().minCoeff());
  }
  d.upper_bound = top;
  d.lower_bound = std::max(bottom, 0.0);
  const double floor = 1e-12 * top;
  for (auto& G : grams) {
    G.diagonal().array() += floor;
    d.fibers.emplace_back(G);
  }
  return d;
}

ComplexGrid gabor_reconstruct(const CoefficientTable& table, const GaborDual& dual) {
  if (table.j_scale != dual.j_scale || table.offset != dual.offset || !(table.u_range == dual.u_range) ||
      table.n_range.size() != dual.n_range.size() || table.grid_n != dual.grid_n || table.left != dual.left ||
      table.right != dual.right)
    throw Error("index-range-mismatch", "coefficient table and dual frame cover different indices");
  const GaborSystem sys(dual.left, dual.right, dual.grid_n, dual.j_scale);
  const Index B = sys.B(), U = sys.U(), n = dual.grid_n;
  std::vector<long> cs;
  Eigen::MatrixXcd M(table.u_range.size(), B);
  for (long u = table.u_range.lo; u < table.u_range.hi; ++u) {
    cs.push_back(dual.offset + u);
    for (long m = table.n_range.lo; m < table.n_range.hi; ++m) M(u - table.u_range.lo, mod(m, long(B))) = table.at(u, m);
  }
  const ComplexGrid synth = sys.synthesize(M, cs, dual.wrap);
  const Eigen::VectorXcd P = dft(synth.samples);
  const double s0 = sys.phase_shift();
  Eigen::VectorXcd F(n);
  for (Index beta = 0; beta < B; ++beta) {
    Eigen::VectorXcd rhs(U);
    Eigen::VectorXcd ph(U);
    for (Index i = 0; i < U; ++i) {
      const Index q = beta + B * i;
      const long qs = q < n / 2 ? long(q) : long(q) - long(n);
      ph[i] = e(-double(qs) * s0 / double(n));
      rhs[i] = ph[i] * P[q];
    }
    const Eigen::VectorXcd sol = dual.fibers[beta].solve(rhs);
    for (Index i = 0; i < U; ++i) F[beta + B * i] = std::conj(ph[i]) * sol[i];
  }
  return ComplexGrid(dual.left, dual.right, idft(F));
}

// ---- oscillatory weight -----------------------------------------------------

double rho_band(double a, int am, int k, double lambda_val) {
  return rho_tilde(a, lambda_val / std::exp2(double(am) - a * double(k)));
}

cd weight_we_at(double a, int am, int k, long n, long v, double lambda_val) {
  const double ap = a / (a - 1.0);
  const double N = std::ldexp(1.0, am / 2);
  const double K = std::exp2((am / 2.0 - k) * ap);
  const double lam_pow = std::pow(lambda_val, -1.0 / (a - 1.0));
  const double ca = c_a(a);
  const double lo = -2.0 * v + kWinLo, hi = -2.0 * v + kWinHi;
  const double xmax = std::max(std::abs(lo), std::abs(hi));
  const double deriv = std::abs(double(n)) + std::abs(ca) * K * ap * std::pow(xmax, ap - 1.0) * lam_pow;
  auto amp = [&](double xi) { return cd(phi_window(xi + 2.0 * v) * weight_psi(xi / N)); };
  auto phase = [&](double xi) {
    return double(n) * xi + ca * K * std::pow(std::abs(xi), ap) * lam_pow;
  };
  return oscillatory_integral(amp, phase, lo, hi, deriv, {16, 512});
}

double critical_frequency(double a, int am, int k, long n, double lambda_val) {
  return a * std::pow(double(n), a - 1.0) * lambda_val / std::exp2(a * (am / 2.0 - k));
}

double critical_frequency_numeric(double a, int am, int k, long n, double lambda_val) {
  const double ap = a / (a - 1.0);
  const double K = std::exp2((am / 2.0 - k) * ap);
  const double lam_pow = std::pow(lambda_val, -1.0 / (a - 1.0));
  const double ca = c_a(a);
  auto dphase = [&](double xi) { return double(n) + ca * K * ap * std::pow(xi, ap - 1.0) * lam_pow; };
  const double guess = critical_frequency(a, am, k, n, lambda_val);
  double lo = guess / 64.0, hi = guess * 64.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (dphase(mid) > 0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double weight_majorant_at(double a, int am, int k, long n, long v, double lambda_val) {
  const double d = critical_frequency(a, am, k, n, lambda_val) + 2.0 * double(v);
  return rho_band(a, am, k, lambda_val) / (1.0 + d * d);
}

ComplexGrid weight_we(const OscWeight& w) {
  ComplexGrid out(w.lambda.left, w.lambda.right, w.lambda.size());
  std::map<double, cd> cache;
  for (Index i = 0; i < out.size(); ++i) {
    const double lam = w.lambda[i];
    auto it = cache.find(lam);
    if (it == cache.end()) it = cache.emplace(lam, weight_we_at(w.a, w.am, w.k, w.n, w.v, lam)).first;
    out[i] = it->second;
  }
  return out;
}

RealGrid weight_majorant(const OscWeight& w) {
  RealGrid out(w.lambda.left, w.lambda.right, w.lambda.size());
  for (Index i = 0; i < out.size(); ++i) out[i] = weight_majorant_at(w.a, w.am, w.k, w.n, w.v, w.lambda[i]);
  return out;
}

// ---- models -----------------------------------------------------------------

ModelWindows default_windows(int am, long width_constant) {
  const long N = 1L << (am / 2);
  const long W = width_constant * N;
  ModelWindows w;
  w.u = {N + 1, N + 1 + W};
  w.v = {-3 * N / 2 + 1, -3 * N / 2 + 1 + W};
  w.n = {N, N + W};
  w.p = {N, N + W};
  return w;
}

ModelContext make_context(int am, int k, int ell, long r, double a) {
  if (am % 2) throw Error("am-parity", "a*m must be even");
  ModelContext c;
  c.am = am, c.k = k, c.ell = ell, c.r = r, c.a = a;
  c.windows = default_windows(am);
  return c;
}

ModelCoefficients model_coefficients(const ComplexGrid& f, const ComplexGrid& g, const ModelContext& ctx,
                                     IndexRange u_override) {
  const IndexRange U = u_override.size() > 0 ? u_override : ctx.windows.u;
  const IndexRange V = ctx.windows.v;
  const PacketFamily fam = packet_family(ctx.am, ctx.k, ctx.ell);
  const GaborSystem sys(f.left, f.right, f.size(), fam.j_scale);
  const IndexRange all_n{0, long(sys.B())};
  ModelCoefficients mc;
  mc.f = gabor_coeffs(f, fam, {U.lo - (V.hi - 1), U.hi - V.lo}, all_n);
  mc.g = gabor_coeffs(g, fam, {U.lo + V.lo, U.hi + V.hi - 1}, all_n);
  return mc;
}

ComplexGrid model_S(const ModelCoefficients& mc, const ModelContext& ctx, long n, long v, long p,
                    IndexRange u_override) {
  const IndexRange U = u_override.size() > 0 ? u_override : ctx.windows.u;
  const PacketFamily out_fam = packet_family(ctx.am, ctx.k, 2 * ctx.ell - 1);
  const GaborSystem sys(mc.f.left, mc.f.right, mc.f.grid_n, out_fam.j_scale);
  const long B = long(sys.B());
  const long pr = ctx.p_r(p);
  const double scale = std::exp2(-(ctx.am + 2.0 * ctx.k) / 4.0);
  std::vector<long> cs;
  Eigen::MatrixXcd M = Eigen::MatrixXcd::Zero(U.size(), B);
  for (long u = U.lo; u < U.hi; ++u) {
    cs.push_back(out_fam.offset + 2 * u);
    M(u - U.lo, mod(pr, B)) = scale * mc.f.at(u - v, mod(pr - n, B)) * mc.g.at(u + v, mod(pr + n, B));
  }
  return sys.synthesize(M, cs);
}

ComplexGrid model_S(const ComplexGrid& f, const ComplexGrid& g, const ModelContext& ctx, long n, long v, long p,
                    IndexRange u_override) {
  require_same_grid(f, g);
  return model_S(model_coefficients(f, g, ctx, u_override), ctx, n, v, p, u_override);
}

ComplexGrid continuous_S_tilde(const ComplexGrid& F, const ComplexGrid& G, const ModelContext& ctx, long n, long v) {
  require_same_grid(F, G);
  const int j = ctx.j_scale();
  const double len = std::ldexp(1.0, -j);
  const double h = F.step();
  const Index grid = F.size();
  const Index M = Index(std::llround(len / h));
  if (M < 1 || std::abs(double(M) * h - len) > 1e-9 * len)
    throw Error("grid-mismatch", "the interval I_k^n must be a whole number of grid steps");
  const double t0 = double(n) * len;
  const Index s0 = Index(std::llround(t0 / h));
  ComplexGrid out(F.left, F.right, grid);
  Eigen::VectorXcd ph(M);
  for (Index s = 0; s < M; ++s) ph[s] = e(-2.0 * double(v) * double(s) / double(M));
  const double scale = std::ldexp(1.0, -ctx.k) * h;
  for (Index i = 0; i < grid; ++i) {
    cd acc = 0.0;
    for (Index s = 0; s < M; ++s) {
      const long shift = long(s0 + s);
      acc += F[mod(long(i) - shift, long(grid))] * G[mod(long(i) + shift, long(grid))] * ph[s];
    }
    out[i] = scale * acc;
  }
  return out;
}

std::vector<std::pair<Index, cd>> transition_sum(const ComplexGrid& f, const ComplexGrid& g, const ModelContext& ctx,
                                                 long n, long v, long p, int radius) {
  require_same_grid(f, g);
  const int j = ctx.j_scale();
  const GaborSystem sys(f.left, f.right, f.size(), j);
  const double h = f.step();
  const long grid = long(f.size());
  const double len = std::ldexp(1.0, -j);
  const long M = std::llround(len / h);
  if (M < 1 || std::abs(double(M) * h - len) > 1e-9 * len)
    throw Error("grid-mismatch", "the interval I_k^n must be a whole number of grid steps");
  const long N = ctx.N();
  const long pr = ctx.p_r(p);
  // lattice coordinate of the grid origin in units of 1/M: 2^j left = z_left / M
  const long z_left = std::llround(std::ldexp(f.left, j) * double(M));

  // conj(check_{0,ell})(y) for y = z / M over the range the sums touch
  const long z_lo = -(radius + 3) * M, z_hi = (radius + 3) * M;
  std::vector<cd> cc(z_hi - z_lo + 1);
  const double off_in = double(N) * double(ctx.ell - 1);
  for (long z = z_lo; z <= z_hi; ++z) {
    const double y = double(z) / double(M);
    cc[z - z_lo] = std::conj(sys.normalized_check(y) * e(y * off_in));
  }
  auto conj_check = [&](long z) { return cc[z - z_lo]; };

  // points of I_k^{p_r}
  const std::vector<Index> xs = cell_indices(f.left, f.right, f.size(), double(pr) * len, double(pr + 1) * len);
  const long i_base = std::llround((double(pr) * len - f.left) / h);  // unwrapped lattice index of the cell start

  std::vector<std::pair<Index, cd>> out;
  const double off_out = double(N) * double(2 * ctx.ell - 2);
  for (size_t idx = 0; idx < xs.size(); ++idx) {
    const long i = i_base + long(idx);  // unwrapped index, consistent with the lattice coordinates
    cd acc = 0.0;
    for (long s = 0; s < M; ++s) {
      const long shift = n * M + s;  // t = shift * h
      cd A1 = 0.0, A2 = 0.0;
      for (long j1 = -radius; j1 <= radius; ++j1) {
        const long z1 = z_left + (i - s) - pr * M + j1 * M;
        A1 += f[mod(i - shift + j1 * M, grid)] * conj_check(z1);
      }
      for (long j2 = -radius; j2 <= radius; ++j2) {
        const long z2 = z_left + (i + s) - pr * M + j2 * M;
        A2 += g[mod(i + shift + j2 * M, grid)] * conj_check(z2);
      }
      acc += A1 * A2 * e(-2.0 * double(v) * double(s) / double(M));
    }
    const double X = double(z_left + i - pr * M) / double(M);
    const cd outer = sys.normalized_check(X) * e(X * off_out);
    out.emplace_back(xs[idx], std::ldexp(1.0, -ctx.k) * outer * acc * h);
  }
  return out;
}

PlancherelReport plancherel_aggregate(const ComplexGrid& f, const ComplexGrid& g, const ModelContext& ctx,
                                      int workers) {
  const ModelCoefficients mc = model_coefficients(f, g, ctx);
  const ModelWindows& W = ctx.windows;
  const GaborSystem sys(f.left, f.right, f.size(), ctx.j_scale());
  const long B = long(sys.B());
  std::vector<std::tuple<long, long, long>> triples;
  for (long n = W.n.lo; n < W.n.hi; ++n)
    for (long v = W.v.lo; v < W.v.hi; ++v)
      for (long p = W.p.lo; p < W.p.hi; ++p) triples.emplace_back(n, v, p);
  std::vector<double> lhs(triples.size()), rhs(triples.size());
  const double scale = std::exp2(-ctx.am / 2.0 - ctx.k);
  parallel_for(Index(triples.size()), workers, [&](Index t) {
    const auto [n, v, p] = triples[t];
    const ComplexGrid S = model_S(mc, ctx, n, v, p);
    lhs[t] = S.step() * S.samples.squaredNorm();
    double r = 0.0;
    const long pr = ctx.p_r(p);
    for (long u = W.u.lo; u < W.u.hi; ++u)
      r += std::norm(mc.f.at(u - v, mod(pr - n, B))) * std::norm(mc.g.at(u + v, mod(pr + n, B)));
    rhs[t] = scale * r;
  });
  PlancherelReport rep;
  for (size_t t = 0; t < triples.size(); ++t) rep.lhs += lhs[t], rep.rhs += rhs[t];
  rep.rel_error = std::abs(rep.lhs - rep.rhs) / rep.rhs;
  return rep;
}

cd trilinear_form(const ComplexGrid& f, const ComplexGrid& g, const ComplexGrid& h, const RealGrid& lambda,
                  const ModelContext& ctx, int workers) {
  require_same_grid(f, g);
  require_same_grid(f, h);
  require_same_grid(f, lambda);
  const ModelCoefficients mc = model_coefficients(f, g, ctx);
  const ModelWindows& W = ctx.windows;
  const PacketFamily out_fam = packet_family(ctx.am, ctx.k, 2 * ctx.ell - 1);
  const GaborSystem sys(f.left, f.right, f.size(), out_fam.j_scale);
  const long B = long(sys.B());
  std::vector<long> cs;
  for (long u = W.u.lo; u < W.u.hi; ++u) cs.push_back(out_fam.offset + 2 * u);
  const double scale = std::exp2(-(ctx.am + 2.0 * ctx.k) / 4.0);

  std::vector<std::pair<long, long>> nv;
  for (long n = W.n.lo; n < W.n.hi; ++n)
    for (long v = W.v.lo; v < W.v.hi; ++v) nv.emplace_back(n, v);
  std::vector<cd> parts(nv.size());
  parallel_for(Index(nv.size()), workers, [&](Index t) {
    const auto [n, v] = nv[t];
    OscWeight ow{ctx.k, n, v, ctx.am, ctx.a, lambda};
    const ComplexGrid we = weight_we(ow);
    ComplexGrid Wc(f.left, f.right, f.size());
    for (Index i = 0; i < f.size(); ++i) Wc[i] = std::conj(h[i] * rho_band(ctx.a, ctx.am, ctx.k, lambda[i]) * we[i]);
    if (Wc.samples.isZero(0.0)) return;
    const Eigen::MatrixXcd A = sys.analyze(Wc, cs);  // conj of int packet * W
    cd acc = 0.0;
    for (long p = W.p.lo; p < W.p.hi; ++p) {
      const long pr = ctx.p_r(p);
      for (long u = W.u.lo; u < W.u.hi; ++u)
        acc += mc.f.at(u - v, mod(pr - n, B)) * mc.g.at(u + v, mod(pr + n, B)) * std::conj(A(u - W.u.lo, mod(pr, B)));
    }
    parts[t] = scale * acc;
  });
  cd total = 0.0;
  for (const cd& c : parts) total += c;
  return total;
}

// ---- classification ------------------------------------------------------------

std::set<std::tuple<long, long, long>> Classification::members(MassClass c) const {
  std::set<std::tuple<long, long, long>> s;
  for (const auto& it : items)
    if (it.cls == c) s.emplace(it.p_prime, it.n, it.v);
  return s;
}

std::pair<double, double> fine_cell(const ModelContext& ctx, long p_prime) {
  const double w = std::ldexp(1.0, ctx.k - ctx.am);
  const double lo = std::ldexp(1.0, ctx.k) * double(ctx.r - 1) + double(p_prime) * w;
  return {lo, lo + w};
}

ComplexGrid tile_component(const CoefficientTable& table, const ModelContext& ctx, double left, double right,
                           Index grid_n) {
  const GaborSystem sys(left, right, grid_n, table.j_scale);
  const long B = long(sys.B());
  const long N = ctx.N();
  std::vector<long> cs;
  Eigen::MatrixXcd M = Eigen::MatrixXcd::Zero(table.u_range.size(), B);
  for (long u = table.u_range.lo; u < table.u_range.hi; ++u) {
    cs.push_back(table.offset + u);
    for (long m = N * (ctx.r - 1) - 4 * N; m < N * (ctx.r - 1) + 4 * N; ++m)
      M(u - table.u_range.lo, mod(m, B)) = table.at(u, mod(m, B));
  }
  return sys.synthesize(M, cs);
}

Classification classify_indices(const ComplexGrid& f, const ComplexGrid& g, const RealGrid& lambda,
                                const ModelContext& ctx, double delta1, double mu, IndexRange p_prime_range) {
  require_same_grid(f, g);
  require_same_grid(f, lambda);
  const long N = ctx.N();
  const IndexRange PP = p_prime_range.size() > 0 ? p_prime_range : IndexRange{N * N, 2 * N * N};
  const ModelCoefficients mc = model_coefficients(f, g, ctx);
  const ComplexGrid fc = tile_component(mc.f, ctx, f.left, f.right, f.size());
  const ComplexGrid gc = tile_component(mc.g, ctx, f.left, f.right, f.size());
  const double fn = std::pow(l2_norm(fc), 2), gn = std::pow(l2_norm(gc), 2);
  const double len = std::ldexp(1.0, -ctx.j_scale());
  auto local_avg = [&](const ComplexGrid& F, long m) {
    const auto idx = cell_indices(F.left, F.right, F.size(), double(m) * len, double(m + 1) * len);
    double s = 0.0;
    for (Index i : idx) s += std::norm(F[i]);
    return idx.empty() ? 0.0 : s / double(idx.size());
  };
  const double thr_f = std::exp2(mu * ctx.am / 2.0 - ctx.k) * fn;
  const double thr_g = std::exp2(mu * ctx.am / 2.0 - ctx.k) * gn;
  const double light_thr = std::exp2(-delta1 * ctx.am);

  Classification out;
  out.ctx = ctx;
  out.delta1 = delta1;
  out.mu = mu;
  for (long pp = PP.lo; pp < PP.hi; ++pp) {
    const auto [a0, a1] = fine_cell(ctx, pp);
    const auto cell = cell_indices(f.left, f.right, f.size(), a0, a1);
    const long pr = ctx.p_r(pp / N);
    for (long n = ctx.windows.n.lo; n < ctx.windows.n.hi; ++n) {
      const bool f_ok = local_avg(fc, pr - n) <= thr_f;
      const bool g_ok = local_avg(gc, pr + n) <= thr_g;
      for (long v = ctx.windows.v.lo; v < ctx.windows.v.hi; ++v) {
        double mass = 0.0;
        for (Index i : cell) mass += weight_majorant_at(ctx.a, ctx.am, ctx.k, n, v, lambda[i]);
        mass = cell.empty() ? 0.0 : mass / double(cell.size());
        MassClass c = mass < light_thr ? MassClass::light : (f_ok && g_ok ? MassClass::uniform : MassClass::clustered);
        out.items.push_back({pp, n, v, c, mass});
      }
    }
  }
  return out;
}

}  // namespace bhc
