#pragma once

#include "bhc/core.hpp"

#include <functional>
#include <limits>
#include <vector>

namespace bhc {

// ---- fewnomials ----------------------------------------------------------------

struct FewTerm {
  double a = 0.0;
  double alpha = 0.0;
};

// F(x) = sum_k a_k (x + alpha_k)^d on an interval where every x + alpha_k > 0.
struct Fewnomial {
  double d = 2.0;
  std::vector<FewTerm> terms;
  double dom_lo = 0.0;
  double dom_hi = 1.0;

  int n() const { return int(terms.size()); }
  double operator()(double x) const;
  double derivative(double x) const;
  // sum |a_k| sup |(x + alpha_k)^d| over [lo,hi]; the reference magnitude for "zero".
  double scale(double lo, double hi) const;
  void validate() const;
};

struct ZeroCount {
  int count = 0;
  bool degenerate = false;  // |F| < 1e-12 scale everywhere on the grid
  std::vector<double> roots;
};

// Sign changes on a grid of grid_n points, each bracket bisected to width 1e-12.
ZeroCount count_zeros(const Fewnomial& F, double lo, double hi, Index grid_n = 20000);

struct LevelSetReport {
  double measure = 0.0;  // |{x in [lo,hi] : |F(x)| < eta}|
  double bound = 0.0;    // level-set bound (interpolation form for integer d < n-1, K(F) eta^{1/(n-1)} otherwise)
  bool interpolation_case = false;
};

// Deterministic midpoint grid of `samples` points.
LevelSetReport level_set_measure(const Fewnomial& F, double eta, double lo, double hi, Index samples = 100000);
double levelset_constant_K(const Fewnomial& F);

Fewnomial random_fewnomial(Rng& rng, int n, double d);

// ---- phase of the double TT* sum ---------------------------------------------------

// lambda~ sampled on the integers [2N, 4N), N = 2^{am/2}; index p maps to values[p - 2N].
struct LambdaTilde {
  int am = 4;
  std::vector<double> values;

  long N() const { return 1L << (am / 2); }
  long lo() const { return 2 * N(); }
  long hi() const { return 4 * N(); }  // exclusive
  bool has(long p) const { return p >= lo() && p < hi(); }
  double operator()(long p) const { return values[size_t(p - lo())]; }
};

// Values in [N, 2N]: piecewise constant on `pieces` blocks with log-uniform levels.
LambdaTilde random_lambda_tilde(Rng& rng, int am, int pieces = 0);
LambdaTilde constant_lambda_tilde(int am, double value);

// P_{p,q,r}(v) as F_4^{a-1}(2v/N).
Fewnomial phase_fewnomial(long p, long q, long r, const LambdaTilde& lt, double a);
double phase_P(long p, long q, long r, long v, const LambdaTilde& lt, double a);

struct PhaseBound {
  double L = std::numeric_limits<double>::infinity();
  bool infinite = true;  // vanishing denominator
};

// L_eta by case: a = 3, a = 4, or generic a not in {1,2,3,4}. Implied constants taken to be 1.
PhaseBound phase_levelset_bound(long p, long q, long r, const LambdaTilde& lt, double eta, double a);
// |{x in [1,2] : |d/dx F_4^{a-1}(x)| < eta}| on a fine grid.
double phase_levelset_measure(long p, long q, long r, const LambdaTilde& lt, double eta, double a,
                              Index samples = 100000);

// v-window of the sum: v ~ N together with the a_1 <= v <= a_2 constraints. Empty when lo > hi.
struct VWindow {
  long lo = 0;
  long hi = -1;  // inclusive
  long size() const { return hi >= lo ? hi - lo + 1 : 0; }
};
VWindow v_window(long p, long q, long r, long N);

struct WeylReport {
  cd value;
  double abs = 0.0;
  double trivial = 0.0;  // N^4 = 2^{2am}
  double normalized = 0.0;
  long terms = 0;
};

// J(s) = sum_{p,q,r} sum_{v in window} e(N s P_{p,q,r}(v)), exact O(N^4) evaluation.
WeylReport weyl_sum(double s, const LambdaTilde& lt, double a, int workers = 1);
// The same quantity in its squared form sum_{v,v1} |sum_u e(...)|^2, an O(N^3) evaluation.
double weyl_sum_squared_form(double s, const LambdaTilde& lt, double a);
// Every P_{p,q,r} is constant in v: no cancellation in v is available at any s.
bool weyl_resonant(const LambdaTilde& lt, double a, double tol = 1e-9);

struct WeylScan {
  std::vector<double> s_values;
  std::vector<double> normalized;  // |J(s)| 2^{-2am}
  double max_normalized = 0.0;
  bool resonant = false;
};

// Max of |J(s)| over N s in [N^{-2 nu}, 1], `count` log-spaced points.
WeylScan weyl_scan(const LambdaTilde& lt, double a, double nu = 0.25, int count = 12, int workers = 1);

// ---- discrete Van der Corput ----------------------------------------------------

inline constexpr double vdc_constant = 3.0;

struct VdcReport {
  double sum_abs = 0.0;
  double bound = 0.0;
  double min_norm_derivative = 0.0;  // sampled min ||F'||
  bool admissible = true;            // sampled ||F'|| >= alpha and F' monotone
  bool holds = true;
};

// |sum_{n in [n0,n1] integers} e(F(n))| against vdc_constant / alpha.
VdcReport vdc_check(const std::function<double(double)>& F, long n0, long n1, double alpha);
// max over a dense sweep of linear phases of |sum| * ||F'||.
double calibrate_vdc_constant(long length = 200, int sweep = 4000);

// ---- tube decomposition ------------------------------------------------------

// a = 3 setting: I_Q = J_Q = [2^{am/2-1}, 2^{am/2+1}]; lambda~ given on I_Q cap Z.
struct TubeGrid {
  int am = 6;
  std::vector<double> values;  // values[i] = lambda~(p_lo + i)

  long p_lo() const { return 1L << (am / 2 - 1); }
  long p_hi() const { return 1L << (am / 2 + 1); }  // inclusive
  double m() const { return am / 3.0; }
};

struct Tube {
  double alpha_center = 0.0;  // c(alpha_tau), at x = p_lo
  double omega_center = 0.0;  // c(omega_tau), at x = p_hi
  double line(const TubeGrid& g, double p) const;
  double slope(const TubeGrid& g) const;
};

struct TubeDecomposition {
  std::vector<char> in_L;  // per index of the grid
  std::vector<Tube> heavy;
  int steps = 0;
  double step_cap = 0.0;  // 2^{2 eps m}
  double eps = 3.0 / 38.0;
};

TubeGrid random_tube_grid(Rng& rng, int am);
// Enumerates every admissible tube; density = # points of `mask` in the tube / # (I_Q cap Z).
std::vector<Tube> all_tubes(const TubeGrid& g, double eps);
TubeDecomposition tube_decompose(const TubeGrid& g, double eps = 3.0 / 38.0);
// Largest N-density within the 2^{eps m - 10} neighbourhood of any tube line, and the allowed 2^{-eps m}.
std::pair<double, double> non_concentration(const TubeGrid& g, const TubeDecomposition& dec);

}  // namespace bhc
