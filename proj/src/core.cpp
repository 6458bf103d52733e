#include "bhc/core.hpp"

#include <unsupported/Eigen/FFT>

#include <atomic>
#include <cmath>
#include <cstdlib>

namespace bhc {

ComplexGrid to_complex(const RealGrid& f) {
  return ComplexGrid(f.left, f.right, f.samples.cast<cd>().eval());
}

Eigen::VectorXcd dft(const Eigen::VectorXcd& x) {
  Eigen::FFT<double> fft;
  Eigen::VectorXcd out(x.size());
  fft.fwd(out, x);
  return out;
}

Eigen::VectorXcd idft(const Eigen::VectorXcd& X) {
  Eigen::FFT<double> fft;
  Eigen::VectorXcd out(X.size());
  fft.inv(out, X);
  return out;
}

// ---- budget --------------------------------------------------------------

namespace {

std::int64_t budget_from_env() {
  if (const char* s = std::getenv("BHC_LAB_BUDGET")) {
    char* end = nullptr;
    long long v = std::strtoll(s, &end, 10);
    if (end != s && v > 0) return v;
  }
  return std::int64_t(1) << 26;
}

std::atomic<std::int64_t>& budget_slot() {
  static std::atomic<std::int64_t> slot{budget_from_env()};
  return slot;
}

}  // namespace

std::int64_t sample_budget() { return budget_slot().load(); }
void set_sample_budget(std::int64_t n) { budget_slot().store(n); }

void check_budget(std::int64_t requested, const char* what) {
  if (requested > sample_budget())
    throw Error("budget-exceeded", std::string(what) + " needs " + std::to_string(requested) +
                                       " samples, budget is " + std::to_string(sample_budget()));
}

// ---- bumps ---------------------------------------------------------------

double bump(double x) {
  if (std::abs(x) >= 1.0) return 0.0;
  return std::exp(1.0 - 1.0 / (1.0 - x * x));
}

double smooth_step(double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double l = std::exp(-1.0 / x);
  const double r = std::exp(-1.0 / (1.0 - x));
  return l / (l + r);
}

double eta(double t) { return smooth_step(2.0 - std::abs(t)); }

double rho(double t) { return eta(t) - eta(2.0 * t); }

double eta_a(double a, double lam) {
  const double top = std::exp2(a);
  return smooth_step((top - std::abs(lam)) / (top - 1.0));
}

double rho_tilde(double a, double lam) { return eta_a(a, lam) - eta_a(a, std::exp2(a) * lam); }

double phi_window(double xi) { return bump(xi - 5.0 / 6.0); }

double psi_window(double a, double xi) {
  const double x = std::abs(xi);
  const double lo = a * std::exp2(1.0 - 2.0 * a);
  const double hi = a * std::exp2(2.0 * a - 1.0);
  if (x <= 0.0) return 0.0;
  if (x < lo) return smooth_step(std::log2(x / lo) + 1.0);
  if (x > hi) return smooth_step(1.0 - std::log2(x / hi));
  return 1.0;
}

BumpFamily make_bump(BumpKind kind, double a) {
  BumpFamily b;
  b.kind = kind;
  switch (kind) {
    case BumpKind::rho:
      b.lo = 0.5, b.hi = 2.0;
      b.evaluator = [](double t) { return rho(t); };
      break;
    case BumpKind::rho_tilde_a:
      b.lo = std::exp2(-a), b.hi = std::exp2(a);
      b.evaluator = [a](double t) { return rho_tilde(a, t); };
      break;
    case BumpKind::phi:
      b.lo = -1.0 / 6.0, b.hi = 11.0 / 6.0, b.even = false;
      b.evaluator = [](double t) { return phi_window(t); };
      break;
    case BumpKind::psi:
      b.lo = a * std::exp2(-2.0 * a), b.hi = a * std::exp2(2.0 * a);
      b.evaluator = [a](double t) { return psi_window(a, t); };
      break;
    case BumpKind::chi:
      b.lo = 0.0, b.hi = 2.0;
      b.evaluator = [](double t) { return eta(t); };
      break;
  }
  return b;
}

BumpFamily build_rho_partition(int k_min, int k_max) {
  if (k_min > k_max) throw Error("domain-violation", "k_min > k_max");
  BumpFamily b = make_bump(BumpKind::rho);
  b.k_min = k_min;
  b.k_max = k_max;
  return b;
}

double partition_sum(const BumpFamily& rho_family, double t) {
  double s = 0.0;
  for (int k = rho_family.k_min; k <= rho_family.k_max; ++k) s += rho_family(std::ldexp(t, -k));
  return s;
}

// ---- projection ----------------------------------------------------------

ComplexGrid freq_project(const ComplexGrid& f, double lo, double hi, WindowKind window) {
  f.validate();
  const Index n = f.size();
  const double len = f.length();
  const double nyq = double(n) / (2.0 * len);
  if (!(lo < hi) || lo <= -nyq || hi >= nyq)
    throw Error("band-unrepresentable", "band [" + std::to_string(lo) + "," + std::to_string(hi) +
                                            "] outside Nyquist range " + std::to_string(nyq));
  Eigen::VectorXcd F = dft(f.samples);
  const double ramp = (hi - lo) / 8.0;
  for (Index q = 0; q < n; ++q) {
    const double xi = bin_frequency(q, n, len);
    double w;
    if (window == WindowKind::sharp)
      w = (xi >= lo && xi <= hi) ? 1.0 : 0.0;
    else
      w = smooth_step((xi - lo) / ramp) * smooth_step((hi - xi) / ramp);
    F[q] *= w;
  }
  return ComplexGrid(f.left, f.right, idft(F));
}

// ---- quadrature ----------------------------------------------------------

Index quadrature_points(double lo, double hi, double deriv_bound, QuadratureRule rule) {
  if (rule.min_pts_per_period < 4) throw Error("domain-violation", "min_pts_per_period must be >= 4");
  const double len = std::abs(hi - lo);
  const double periods = std::abs(deriv_bound) * len;
  return std::max<Index>(rule.min_samples, Index(std::ceil(periods * rule.min_pts_per_period)));
}

cd oscillatory_integral(const std::function<cd(double)>& amplitude, const std::function<double(double)>& phase,
                        double lo, double hi, double deriv_bound, QuadratureRule rule) {
  const Index n = quadrature_points(lo, hi, deriv_bound, rule);
  check_budget(n, "oscillatory_integral");
  const double h = (hi - lo) / double(n);
  cd acc = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double t = lo + (double(i) + 0.5) * h;
    acc += amplitude(t) * e(phase(t));
  }
  return acc * h;
}

BandlimitedSampler::BandlimitedSampler(const ComplexGrid& f, int oversample)
    : left_(f.left), length_(f.length()) {
  const Index n = f.size();
  const Index m = n * oversample;
  Eigen::VectorXcd F = dft(f.samples);
  Eigen::VectorXcd G = Eigen::VectorXcd::Zero(m);
  for (Index q = 0; q < n / 2; ++q) G[q] = F[q];
  for (Index q = n / 2 + 1; q < n; ++q) G[m - n + q] = F[q];
  G[n / 2] = 0.5 * F[n / 2];
  G[m - n / 2] = 0.5 * F[n / 2];
  fine_ = idft(G) * double(oversample);
}

cd BandlimitedSampler::operator()(double x) const {
  constexpr int order = 8;
  const Index m = fine_.size();
  const double pos = (x - left_) / length_ * double(m);
  const double base = std::floor(pos);
  const double frac = pos - base;
  const Index i0 = Index(base) - order / 2 + 1;
  cd acc = 0.0;
  for (int a = 0; a < order; ++a) {
    const double xa = double(a - order / 2 + 1);
    double w = 1.0;
    for (int b = 0; b < order; ++b) {
      if (b == a) continue;
      const double xb = double(b - order / 2 + 1);
      w *= (frac - xb) / (xa - xb);
    }
    Index idx = (i0 + a) % m;
    if (idx < 0) idx += m;
    acc += w * fine_[idx];
  }
  return acc;
}

// ---- random inputs -------------------------------------------------------

ComplexGrid random_band_limited(Rng& rng, double left, double right, Index n, double lo, double hi) {
  ComplexGrid f(left, right, n);
  std::normal_distribution<double> gauss;
  Eigen::VectorXcd F = Eigen::VectorXcd::Zero(n);
  const double len = right - left;
  for (Index q = 0; q < n; ++q) {
    const double xi = bin_frequency(q, n, len);
    if (xi >= lo && xi <= hi) F[q] = cd(gauss(rng), gauss(rng));
  }
  f.samples = idft(F);
  const double nrm = l2_norm(f);
  if (nrm > 0) f.samples /= nrm;
  return f;
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = double(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sx += x[i], sy += y[i], sxx += x[i] * x[i], sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace bhc
