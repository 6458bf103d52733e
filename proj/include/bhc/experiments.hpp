#pragma once

#include "bhc/expsums.hpp"
#include "bhc/operators.hpp"
#include "bhc/tiles.hpp"
#include "bhc/wavepackets.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace bhc {

// ---- reports -------------------------------------------------------------------

// 17 significant digits, enough to round-trip a double.
std::string format_double(double x);
std::uint64_t fnv1a(const std::string& bytes);
std::string hex64(std::uint64_t h);

// One row per ladder value m (the column holds whatever parameter the experiment sweeps, usually a*m).
struct DecayReport {
  std::string experiment;
  std::vector<double> m;
  std::vector<double> value;
  std::vector<double> bound;
  double slope = 0.0;  // least-squares slope of log2(value) against m over positive values
  double runtime_s = 0.0;
  std::uint64_t seed = 0;
  std::string config_hash;
  bool pass = false;
  nlohmann::json metrics = nlohmann::json::object();

  void add(double m_val, double v, double b);
  std::vector<double> log2_value() const;
  void fit();
  // Header "m,value,log2_value,bound".
  std::string to_csv() const;
  // {experiment, config_hash, seed, pass, slope, runtime_s, metrics}
  nlohmann::json summary() const;
};

// ---- the single-scale form ---------------------------------------------------------

// Piecewise constant on the dyadic cells of width 2^{-am} of the grid, log-uniform values in [lo, hi].
RealGrid random_stopping_time(Rng& rng, double left, double right, Index n, int am, double lo, double hi);

struct LambdaBarOptions {
  int oversample = 0;  // fine lattice refinement; 0 picks one from the spectra and the phase
  int workers = 1;
  // Restricts the (p, n) pairs that enter the form; empty keeps all of them.
  std::function<bool(long p, long n)> keep;
};

// (sum_p int_{I^p} (sum_n |int_{I^n} f(x-t) g(x+t) e(a (n/N)^{a-1} lambda(x) t) dt|)^2 dx)^{1/2}
// with I^n = [n/N, (n+1)/N] and n, p in [N, 2N). Integrals are Riemann sums on a spectrally refined lattice.
double lambda_bar(const ComplexGrid& f, const ComplexGrid& g, const RealGrid& lambda, int am, double a,
                  const LambdaBarOptions& opts = {});

// The lattice refinement lambda_bar picks when none is given.
int lambda_bar_oversample(const ComplexGrid& f, const ComplexGrid& g, const RealGrid& lambda, int am, double a);

// Largest |frequency| carrying DFT mass above rel_tol of the peak.
double effective_band(const ComplexGrid& f, double rel_tol = 1e-12);

struct CellSplit {
  std::vector<long> clustered;
  std::vector<long> uniform;
};

// n in clustered iff int_{3 I^n} |f|^2 >= 2^{(mu-1) am/2} ||f||^2, for n in `cells`.
CellSplit split_uniform_clustered(const ComplexGrid& f, double mu, int am, IndexRange cells);

// ---- the absolute-value counterexample -------------------------------------------

struct CounterexampleInstance {
  int am = 4;
  long L = 1;
  double a = 3.0;
  ComplexGrid f, g, h;
  RealGrid lambda;
  std::vector<long> js;  // structured levels, lambda = N j on A_j
  std::vector<long> qs;  // progression points, A_j = union of q/N + [j, j+1]/N^2
  double f_norm = 0.0, g_norm = 0.0, h_sup = 0.0;
  double coeff_min = 0.0, coeff_max = 0.0;  // |<f, packet>| and |<g, packet>| over the indices the form reads
  ModelContext ctx;
};

// lambda = 2^{am} on [1,2] except lambda = N j on A_j (j in [N/2, N) cap L Z); f and g full packet sums; h = 1_{[1,2)}.
CounterexampleInstance build_counterexample(int am, long L = 1, double a = 3.0);

// The P(0,1,1) model with absolute values inside every sum.
double abs_model_form(const CounterexampleInstance& inst, int workers = 1);
// abs form / (||f|| ||g|| ||h||_inf)
double counterexample_ratio(const CounterexampleInstance& inst, int workers = 1);

// 2^{am/4} |int_{I_{j,p}} phi_check(N x - p) e(2u (N x - p)) dx|; independent of p.
double first_term_I(int am, long j, long u);
// Smallest over js of the fraction of u in [N, 2N) with first_term_I >= 1e-10 2^{-3am/4}.
double first_term_fraction(const CounterexampleInstance& inst);

// ---- stationary phase and domination -------------------------------------------------

struct StationarySweepOptions {
  int samples = 24;
  std::uint64_t seed = 1;
  int workers = 1;
};

// sup over the sampled stationary band of |M - kappa m| 2^{am/2}, kappa fitted at the first am and frozen.
// metrics: kappa (re, im), nonstationary (max |M| 2^{am} off the band).
DecayReport stationary_phase_sweep(double a, int k, const std::vector<int>& am_list,
                                   const StationarySweepOptions& opts = {});

struct DominationOptions {
  std::vector<int> m_values{1, 2, 3, 4};
  std::vector<int> k_values{-2, -1, 0, 1, 2};
  int pairs = 10;
  int points = 3;  // evaluation points per (m, k, pair)
  double a = 3.0;
  Index grid = 1024;        // smallest grid; grown so the input band fits
  double band_cap = 1024.0;  // inputs are band-limited to min(0.75 2^{am-k}, band_cap)
  std::uint64_t seed = 1;
  int workers = 1;
};

// max_x |T_{m,k}(f,g)(x)| / bilinear_max(f,g)(x) per m; one row per m, metrics.constant = overall max.
DecayReport domination_sweep(const DominationOptions& opts = {});

struct SizeEstimateOptions {
  int collections = 20;
  int tiles = 12;
  std::vector<int> light_am{4, 6};
  double a = 3.0;
  double delta1 = 0.125;
  double mu = 0.25;
  double slack = 10.0;
  std::uint64_t seed = 1;
  int workers = 1;
};

// Rows: m = 1, 2 for Size_j / (local L2 sup) of f(P_1), g(P_2) over random collections;
// m = 3 for the light-class Size_3 / (2^{-delta1 am/2} local L2 sup) over light-mass scenarios.
DecayReport size_estimate_sweep(const SizeEstimateOptions& opts = {});
// One row per random collection of at most max_tiles tiles: size-energy ratio, theta = (1/3, 1/3, 1/3).
DecayReport size_energy_sweep(int collections, int max_tiles, double slack, std::uint64_t seed);

struct LambdaBarSweepOptions {
  double a = 4.0;
  std::vector<int> am_list{4, 6, 8};
  int trials = 2;
  double mu = 0.25;
  std::uint64_t seed = 1;
  Index grid = 0;  // 0 sizes the grid from the band
  int workers = 1;
};

// Mean of lambda_bar / (||f|| ||g||) per am; f in band [0, 2N^2], g in [-2N^2, 0] on [-2, 6], lambda piecewise
// constant and log-uniform in [2^{am-5}, 2^{am-3}]. Inputs are checked to be uniform class.
DecayReport lambda_bar_sweep(const LambdaBarSweepOptions& opts = {});

// counterexample_ratio per am, with the first-term fraction and the coefficient and norm ranges in metrics.
DecayReport counterexample_sweep(const std::vector<int>& am_list, long L = 1, double a = 3.0, int workers = 1);

// ---- experiment driver -----------------------------------------------------------------

struct ExperimentConfig {
  std::string experiment = "gabor";
  double a = 3.0;
  std::vector<int> am;  // empty means the experiment's default ladder
  Index grid = 0;       // 0 means the experiment's default
  std::uint64_t seed = 1;
  int trials = 0;  // 0 means the experiment's default
  double slack = 10.0;
  long window_constant = 1;
  long L = 1;
  double mu = 0.25;
  double delta1 = 0.125;
  int workers = 1;
  std::string out_dir = ".";
};

const std::vector<std::string>& experiment_names();
nlohmann::json to_json(const ExperimentConfig& c);
// Throws Error("config-error") on unknown keys or ill-typed values.
ExperimentConfig config_from_json(const nlohmann::json& j);
std::string config_hash(const ExperimentConfig& c);
// Fills default ladders, grid and trial counts for the named experiment.
ExperimentConfig with_defaults(ExperimentConfig c);

// Throws Error("unknown-experiment") for names outside experiment_names().
DecayReport run_experiment(const ExperimentConfig& config);

}  // namespace bhc
