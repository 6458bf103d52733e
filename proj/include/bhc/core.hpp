#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace bhc {

using Eigen::Index;
using cd = std::complex<double>;
using Rng = std::mt19937_64;

inline constexpr double pi = std::numbers::pi;

// Every failure mode carries a stable short code ("budget-exceeded", ...).
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& detail)
      : std::runtime_error(code + ": " + detail), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

// e(A) = exp(2 pi i A). All exponentials in the library use this normalization.
inline cd e(double a) { return std::polar(1.0, 2.0 * pi * a); }

inline bool is_pow2(Index n) { return n > 0 && (n & (n - 1)) == 0; }

// Samples at left + i*(right-left)/n, i = 0..n-1; the right endpoint is the periodic image of left.
template <typename Scalar>
struct GridFunction {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  double left = 0.0;
  double right = 1.0;
  Vector samples;

  GridFunction() = default;
  GridFunction(double l, double r, Index n) : left(l), right(r), samples(Vector::Zero(n)) { validate(); }
  GridFunction(double l, double r, Vector s) : left(l), right(r), samples(std::move(s)) { validate(); }

  Index size() const { return samples.size(); }
  double length() const { return right - left; }
  double step() const { return length() / double(size()); }
  double x(Index i) const { return left + double(i) * step(); }
  Scalar& operator[](Index i) { return samples[i]; }
  const Scalar& operator[](Index i) const { return samples[i]; }

  void validate() const {
    if (samples.size() == 0) throw Error("empty-grid", "grid function without samples");
    if (!is_pow2(samples.size())) throw Error("grid-mismatch", "sample count must be a power of two");
    if (!(right > left)) throw Error("grid-mismatch", "right endpoint must exceed left");
  }
  bool finite() const { return samples.allFinite(); }
  bool same_grid(const GridFunction& o) const {
    return size() == o.size() && left == o.left && right == o.right;
  }
};

using ComplexGrid = GridFunction<cd>;
using RealGrid = GridFunction<double>;

template <typename Scalar, typename F>
GridFunction<Scalar> sample(double left, double right, Index n, F&& f) {
  GridFunction<Scalar> g(left, right, n);
  for (Index i = 0; i < n; ++i) g[i] = Scalar(f(g.x(i)));
  return g;
}

template <typename A, typename B>
void require_same_grid(const GridFunction<A>& f, const GridFunction<B>& g) {
  if (f.size() != g.size() || f.left != g.left || f.right != g.right)
    throw Error("grid-mismatch", "operands live on different grids");
}

template <typename Scalar>
double l2_norm(const GridFunction<Scalar>& f) {
  return std::sqrt(f.step() * f.samples.squaredNorm());
}

inline cd inner(const ComplexGrid& f, const ComplexGrid& g) {
  require_same_grid(f, g);
  return f.step() * g.samples.dot(f.samples);  // Eigen dot conjugates its left operand
}

ComplexGrid to_complex(const RealGrid& f);

// Signed frequency (cycles per unit length) of DFT bin q on an n-point grid of length len.
inline double bin_frequency(Index q, Index n, double len) {
  return double(q < n / 2 ? q : q - n) / len;
}

Eigen::VectorXcd dft(const Eigen::VectorXcd& x);
Eigen::VectorXcd idft(const Eigen::VectorXcd& X);

// ---- sample budget -------------------------------------------------------

// Cap on samples a single quadrature may use. Read once from BHC_LAB_BUDGET.
std::int64_t sample_budget();
void set_sample_budget(std::int64_t n);
void check_budget(std::int64_t requested, const char* what);

// ---- bumps ---------------------------------------------------------------

double bump(double x);         // b(x) = exp(1 - 1/(1-x^2)) on (-1,1)
double smooth_step(double x);  // 0 for x <= 0, 1 for x >= 1, smooth in between
double eta(double t);          // 1 on |t| <= 1, 0 on |t| >= 2
double rho(double t);          // eta(t) - eta(2t), support 1/2 <= |t| <= 2
double eta_a(double a, double lam);      // 1 on |lam| <= 1, 0 on |lam| >= 2^a
double rho_tilde(double a, double lam);  // support 2^-a <= |lam| <= 2^a
double phi_window(double xi);            // b(xi - 5/6), support (-1/6, 11/6)
double psi_window(double a, double xi);  // 1 on the stationary band of the multiplier main term

enum class BumpKind { rho, rho_tilde_a, phi, psi, chi };

struct BumpFamily {
  BumpKind kind = BumpKind::rho;
  double lo = 0.0;  // support is [lo,hi] (mirrored to [-hi,-lo] for even kinds)
  double hi = 0.0;
  bool even = true;
  std::function<double(double)> evaluator;
  int k_min = 0;
  int k_max = 0;

  double operator()(double t) const { return evaluator(t); }
};

BumpFamily build_rho_partition(int k_min, int k_max);
BumpFamily make_bump(BumpKind kind, double a = 3.0);
// Sum_{k=k_min}^{k_max} rho(2^-k t).
double partition_sum(const BumpFamily& rho_family, double t);

// ---- frequency projection ------------------------------------------------

enum class WindowKind { sharp, smooth };

// Multiplies the DFT of f by the window on [lo,hi]; smooth uses a bump rising over 1/8 of the band.
ComplexGrid freq_project(const ComplexGrid& f, double lo, double hi, WindowKind window = WindowKind::sharp);

// ---- quadrature ----------------------------------------------------------

struct QuadratureRule {
  int min_pts_per_period = 8;
  Index min_samples = 64;
};

// Composite midpoint rule for  int_lo^hi amp(t) e(phase(t)) dt  with at least
// min_pts_per_period samples per oscillation, given sup|phase'| <= deriv_bound.
cd oscillatory_integral(const std::function<cd(double)>& amplitude, const std::function<double(double)>& phase,
                        double lo, double hi, double deriv_bound, QuadratureRule rule = {});

// Number of midpoint samples the rule above would use.
Index quadrature_points(double lo, double hi, double deriv_bound, QuadratureRule rule = {});

// Off-grid evaluation of a periodic band-limited grid function: spectral
// oversampling followed by local cubic Lagrange interpolation.
class BandlimitedSampler {
 public:
  explicit BandlimitedSampler(const ComplexGrid& f, int oversample = 8);
  cd operator()(double x) const;

 private:
  double left_ = 0.0;
  double length_ = 1.0;
  Eigen::VectorXcd fine_;
};

// ---- randomness and parallelism --------------------------------------------

// Random f with DFT supported in the frequency band [lo,hi], normalized to unit L2 norm.
ComplexGrid random_band_limited(Rng& rng, double left, double right, Index n, double lo, double hi);

// Runs body(i) for i in [0,n). Result ordering is the caller's business, so output is
// deterministic whenever body writes only to slot i.
template <typename F>
void parallel_for(Index n, int workers, F&& body) {
  if (workers <= 1 || n < 2) {
    for (Index i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (Index i = w; i < n; i += workers) body(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& err : errors)
    if (err) std::rethrow_exception(err);
}

// Least-squares slope of y against x.
double fit_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace bhc
