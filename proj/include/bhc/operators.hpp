#pragma once

#include "bhc/core.hpp"

#include <vector>

namespace bhc {

struct OperatorParams {
  double a = 3.0;
  double am = 6.0;  // the product a*m; m itself may be fractional (a = 4, am = 6)
  int k = 0;
  RealGrid lambda;         // stopping time lambda(x), same grid as f and g
  double eps_trunc = 0.0;  // 0 means one grid step
  double R_trunc = 1.0;
  bool odd_power = false;  // t^a read as sign(t)|t|^a instead of |t|^a

  double m() const { return am / a; }
  double a_prime() const { return a / (a - 1.0); }
  // Dyadic centre 2^{a(m-k)} of the admissible lambda band.
  double lambda_scale() const { return std::exp2(am - a * k); }
  // Dyadic centre 2^{am-k} of the stationary frequency band.
  double zeta_scale() const { return std::exp2(am - k); }
};

struct MultiplierSample {
  double zeta = 0.0;
  double lambda_val = 0.0;
  cd exact;
  cd main;
};

double power_branch(double t, double a, bool odd_power);

// c_a = a^{-a/(a-1)} - a^{-1/(a-1)}, the value of the phase at its critical point.
double c_a(double a);

// Absolute factor e^{i pi/4} produced by a nondegenerate minimum of the phase.
inline cd kappa() { return std::polar(1.0, pi / 4.0); }

// max over lambda of |PV int_{eps<=|t|<=R} f(x-t) g(x+t) e(lambda t^a) dt/t| on the grid lattice.
RealGrid bc_a(const ComplexGrid& f, const ComplexGrid& g, const OperatorParams& params,
              const std::vector<double>& lambda_grid, int workers = 1);

// sup over r of (1/2r) int_{-r}^{r} |f(x-t)||g(x+t)| dt; each r is snapped to the grid lattice.
// With `points` given, only those grid indices are evaluated and the rest stay zero.
RealGrid bilinear_max(const ComplexGrid& f, const ComplexGrid& g, const std::vector<double>& r_grid, int workers = 1,
                      const std::vector<Index>& points = {});

// Dyadic radii 2^j, j in [j_lo, j_hi], clipped to half the grid length.
std::vector<double> dyadic_radii(const ComplexGrid& f, int j_lo, int j_hi);

struct TmkOptions {
  std::vector<Index> points;  // grid indices to evaluate; empty means all
  QuadratureRule rule{8, 256};
  int workers = 1;
};

// rho~(2^{-a(m-k)} lambda(x)) int f(x-t) g(x+t) e(lambda(x) t^a) rho(2^{-k} t) dt/t.
// Output is zero at indices not listed in opts.points.
ComplexGrid t_mk(const ComplexGrid& f, const ComplexGrid& g, const OperatorParams& params, const TmkOptions& opts = {});

cd multiplier_exact(const OperatorParams& params, double zeta, double lambda_val, QuadratureRule rule = {8, 512});

enum class MainTerm {
  tensor,      // 2^{-am/2} e(c_a zeta^{a'} lambda^{-1/(a-1)}) rho~(lambda') psi(zeta')
  stationary,  // same phase with the exact stationary amplitude theta(s)/sqrt(a(a-1) lambda' s^{a-2})
};

cd multiplier_main(const OperatorParams& params, double zeta, double lambda_val, MainTerm mode = MainTerm::tensor);

MultiplierSample multiplier_sample(const OperatorParams& params, double zeta, double lambda_val,
                                   MainTerm mode = MainTerm::stationary);

enum class ModelSymbol { exact, tensor, stationary };

// Applies the symbol (xi - eta; lambda(x)) to the discrete spectra of f and g by a double sum
// over their nonzero bins. Main-term symbols carry the factor kappa.
ComplexGrid t_mk_model(const ComplexGrid& f, const ComplexGrid& g, const OperatorParams& params,
                       ModelSymbol symbol = ModelSymbol::stationary, const std::vector<Index>& points = {},
                       int workers = 1);

// chi(lambda,t) = sum_{j+k<=0} rho~(2^{-aj} lambda) rho(2^{-k} t) = sum_j rho~(2^{-aj} lambda) eta(2^j t).
double chi_low(double a, double lambda_val, double t);

// int f(x-t) g(x+t) e(lambda(x) t^a) chi(lambda(x),t) dt/t on the grid lattice.
ComplexGrid t_zero(const ComplexGrid& f, const ComplexGrid& g, const OperatorParams& params, int workers = 1);

// sup_K |int f(x-t) g(x+t) eta(2^{-K} t) dt/t| over K in [K_lo, K_hi].
RealGrid hilbert_max_truncation(const ComplexGrid& f, const ComplexGrid& g, int K_lo, int K_hi, int workers = 1);

}  // namespace bhc
