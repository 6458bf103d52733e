#pragma once

#include "bhc/core.hpp"

#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

namespace bhc {

// Continuous frequency window phi and its inverse Fourier transform phi_check(y) = int phi(xi) e(xi y) d xi.
double window_l2_norm();
cd window_check(double y);

struct WavePacketIndex {
  int j_scale = 0;  // am/2 - k
  int ell = 0;
  long u = 0;
  long n = 0;
};

// Frequency offset of packet (j,ell,u) in units of 2^j: c = u + 2^{am/2}(ell - 1).
struct PacketFamily {
  int j_scale = 0;
  long offset = 0;
};

PacketFamily packet_family(int am, int k, int ell);

struct IndexRange {
  long lo = 0;  // inclusive
  long hi = 0;  // exclusive
  long size() const { return hi - lo; }
  bool contains(long v) const { return v >= lo && v < hi; }
  bool operator==(const IndexRange&) const = default;
};

// Gabor system at scale 2^j on a periodic grid: packets
//   2^{j/2} e(c(2^j x - n)) phi_check(2^j x - n),  periodized,
// normalized to unit discrete L2 norm. B = T 2^j spatial positions, U = grid_n / B frequency cells.
class GaborSystem {
 public:
  GaborSystem(double left, double right, Index grid_n, int j_scale);

  double left() const { return left_; }
  double right() const { return right_; }
  Index grid_size() const { return n_; }
  int j_scale() const { return j_; }
  Index B() const { return B_; }
  Index U() const { return U_; }
  // Ratio of the discrete packet normalization to the continuous one (1 up to Riemann-sum error).
  double normalization_ratio() const { return ratio_; }
  // phi_check normalized exactly like the packets of this system, so that packet(x) = 2^{j/2} e(...) check(...).
  cd normalized_check(double y) const { return window_check(y) * ratio_ / window_l2_norm(); }

  // Coefficients <f, packet(c, n)> for each c in cs and every n in [0,B).
  Eigen::MatrixXcd analyze(const ComplexGrid& f, const std::vector<long>& cs, bool wrap = false) const;
  // Sum over c in cs, n in [0,B) of coeffs(c,n) packet(c,n).
  ComplexGrid synthesize(const Eigen::MatrixXcd& coeffs, const std::vector<long>& cs, bool wrap = false) const;
  ComplexGrid packet(long c, long n) const;

  // Eigenvalues of the frame operator of {packet(c,n): c in cs, n in [0,B)}, per fiber.
  std::pair<double, double> frame_bounds(const std::vector<long>& cs, bool wrap = false) const;
  // All U frequency cells starting at c0; the periodic system is a frame of the whole grid.
  std::vector<long> full_cells(long c0 = 0) const;

  double alpha() const { return alpha_; }  // DFT amplitude of a unit-norm packet
  // Throws band-unrepresentable when cell c crosses Nyquist and wrapping is off.
  void check_cell(long c, bool wrap) const;
  double phase_shift() const;  // e(-q left / T) = e(-q * phase_shift / grid_n)
  // U x |cs| matrix of window values on the DFT bins congruent to beta mod B.
  Eigen::MatrixXd fiber_matrix(Index beta, const std::vector<long>& cs) const;

 private:
  double left_, right_;
  Index n_;
  int j_;
  Index B_, U_;
  double alpha_;
  double ratio_;
};

struct CoefficientTable {
  int j_scale = 0;
  long offset = 0;
  IndexRange u_range;
  IndexRange n_range;
  double left = 0.0, right = 1.0;
  Index grid_n = 0;
  Eigen::MatrixXcd values;  // (u - u_lo, n - n_lo)

  cd at(long u, long n) const { return values(u - u_range.lo, n - n_range.lo); }
  double energy() const { return values.squaredNorm(); }
  std::string to_csv() const;
};

// <f, packet^{u,n}> for u in u_range and n in n_range (n taken modulo B on the periodic grid).
CoefficientTable gabor_coeffs(const ComplexGrid& f, PacketFamily family, IndexRange u_range, IndexRange n_range,
                              bool wrap = false);

struct GaborDual {
  int j_scale = 0;
  long offset = 0;
  IndexRange u_range;
  IndexRange n_range;
  double left = 0.0, right = 1.0;
  Index grid_n = 0;
  bool wrap = false;
  std::vector<Eigen::LLT<Eigen::MatrixXd>> fibers;  // regularized frame operator per fiber
  double gamma = 1.0;
  double lower_bound = 0.0, upper_bound = 0.0;
};

// Dual frame for packets with u in u_range and all B spatial positions, by fiberwise Gram inversion
// with Tikhonov floor 1e-12 relative to the largest eigenvalue.
GaborDual gabor_dual(double left, double right, Index grid_n, PacketFamily family, IndexRange u_range,
                     bool wrap = false);

ComplexGrid gabor_reconstruct(const CoefficientTable& table, const GaborDual& dual);

// ---- oscillatory weight -----------------------------------------------------

struct OscWeight {
  int k = 0;
  long n = 0;
  long v = 0;
  int am = 4;
  double a = 3.0;
  RealGrid lambda;

  double m() const { return am / a; }
  // Critical-point constant: xi_c = cbar_a n^{a-1} lambda / 2^{a(am/2-k)}.
  double cbar_a() const { return a; }
};

// rho_{am-ak}(lambda) = rho~_a(lambda / 2^{a(m-k)}).
double rho_band(double a, int am, int k, double lambda_val);

// Pointwise value of w^e_{k,n,v} at a given lambda.
cd weight_we_at(double a, int am, int k, long n, long v, double lambda_val);
// w^e over the whole grid (values cached per distinct lambda).
ComplexGrid weight_we(const OscWeight& w);
// Majorant rho / (1 + |xi_c + 2v|^2).
double weight_majorant_at(double a, int am, int k, long n, long v, double lambda_val);
RealGrid weight_majorant(const OscWeight& w);
// xi_c for the given data.
double critical_frequency(double a, int am, int k, long n, double lambda_val);
// Numerical argmin of |nu'| on a fine bracket; validates cbar_a.
double critical_frequency_numeric(double a, int am, int k, long n, double lambda_val);

// ---- discrete and continuous models ----------------------------------------

struct ModelWindows {
  IndexRange u;  // default (N, 2N]
  IndexRange v;  // default (-3N/2, -N/2]
  IndexRange n;  // default [N, 2N)
  IndexRange p;  // default [N, 2N)
};

ModelWindows default_windows(int am, long width_constant = 1);

struct ModelContext {
  int am = 4;
  int k = 0;
  int ell = 1;
  long r = 1;
  double a = 3.0;
  ModelWindows windows;

  long N() const { return 1L << (am / 2); }
  int j_scale() const { return am / 2 - k; }
  long p_r(long p) const { return N() * (r - 1) + p; }
};

ModelContext make_context(int am, int k, int ell, long r, double a = 3.0);

// Coefficient tables of f against the input families, covering every (u -+ v, p_r -+ n) the windows reach.
struct ModelCoefficients {
  CoefficientTable f;
  CoefficientTable g;
};

ModelCoefficients model_coefficients(const ComplexGrid& f, const ComplexGrid& g, const ModelContext& ctx,
                                     IndexRange u_override = {0, 0});

// S^{n,v,p}_{k,ell,r}(f,g) on the grid, summing u over ctx.windows.u (or u_override when nonempty).
ComplexGrid model_S(const ComplexGrid& f, const ComplexGrid& g, const ModelContext& ctx, long n, long v, long p,
                    IndexRange u_override = {0, 0});
ComplexGrid model_S(const ModelCoefficients& coeffs, const ModelContext& ctx, long n, long v, long p,
                    IndexRange u_override = {0, 0});

// 2^{-k} int_{I_k^n} F(x-t) G(x+t) e(-2v(2^j t - n)) dt on the grid lattice.
ComplexGrid continuous_S_tilde(const ComplexGrid& F, const ComplexGrid& G, const ModelContext& ctx, long n, long v);

// The |j1|,|j2| <= radius truncation of the continuous-model expansion of S^{n,v,p}, evaluated at the
// grid points of I_k^{p_r}. Returns (grid index, value) pairs.
std::vector<std::pair<Index, cd>> transition_sum(const ComplexGrid& f, const ComplexGrid& g, const ModelContext& ctx,
                                                 long n, long v, long p, int radius);

struct PlancherelReport {
  double lhs = 0.0;  // sum over (n,v,p) of int |S|^2
  double rhs = 0.0;  // 2^{-am/2-k} sum over (u,v,n,p) |f coeff|^2 |g coeff|^2
  double rel_error = 0.0;
};

PlancherelReport plancherel_aggregate(const ComplexGrid& f, const ComplexGrid& g, const ModelContext& ctx,
                                      int workers = 1);

// Trilinear model form L_{m,k,ell,r}(f,g,h) with lambda(x) = ctx-provided grid.
cd trilinear_form(const ComplexGrid& f, const ComplexGrid& g, const ComplexGrid& h, const RealGrid& lambda,
                  const ModelContext& ctx, int workers = 1);

// ---- index classification ---------------------------------------------------

enum class MassClass { light, uniform, clustered };

struct ClassifiedIndex {
  long p_prime = 0;
  long n = 0;
  long v = 0;
  MassClass cls = MassClass::light;
  double mass = 0.0;
};

struct Classification {
  ModelContext ctx;
  double delta1 = 0.125;
  double mu = 0.25;
  std::vector<ClassifiedIndex> items;

  std::set<std::tuple<long, long, long>> members(MassClass c) const;
};

// Spatial cell underline-I_{k,r}^{p'} = [2^k(r-1) + p' 2^{k-am}, + 2^{k-am}].
std::pair<double, double> fine_cell(const ModelContext& ctx, long p_prime);

// The component f_{ell+1,r}: packets at positions p_r with |p| < 4 * 2^{am/2}, which covers every
// cell I_k^{p_r -+ n} the model touches.
ComplexGrid tile_component(const CoefficientTable& table, const ModelContext& ctx, double left, double right,
                           Index grid_n);

Classification classify_indices(const ComplexGrid& f, const ComplexGrid& g, const RealGrid& lambda,
                                const ModelContext& ctx, double delta1 = 0.125, double mu = 0.25,
                                IndexRange p_prime_range = {0, 0});

}  // namespace bhc
