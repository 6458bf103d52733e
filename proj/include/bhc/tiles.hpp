#pragma once

#include "bhc/wavepackets.hpp"

#include <json.hpp>

#include <array>
#include <optional>
#include <vector>

namespace bhc {

// Closed interval [lo, hi]; all endpoints produced here are exact dyadic rationals.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double length() const { return hi - lo; }
  double center() const { return 0.5 * (lo + hi); }
  bool contains(double x) const { return x >= lo && x <= hi; }
  bool contains(const Interval& o) const { return o.lo >= lo && o.hi <= hi; }
  // Interiors meet.
  bool overlaps(const Interval& o) const { return lo < o.hi && o.lo < hi; }
  // Same center, c times the length.
  Interval dilate(double c) const;
  Interval shifted(double d) const { return {lo + d, hi + d}; }
  double distance(double x) const { return x < lo ? lo - x : (x > hi ? x - hi : 0.0); }
  bool operator==(const Interval&) const = default;
};

struct Rect {
  Interval I;
  Interval omega;
  double area() const { return I.length() * omega.length(); }
};

struct TriTile {
  int k = 0;
  int ell = 0;
  long r = 0;
  int am = 4;

  Interval I() const;
  // omega_{P_j}, j in {1,2,3}
  Interval omega(int j) const;
  Rect tile(int j) const { return {I(), omega(j)}; }
  bool operator==(const TriTile&) const = default;
  auto operator<=>(const TriTile&) const = default;
};

TriTile make_tri_tile(int k, int ell, long r, int am);
// Inverse of the rank-1 map P -> P_1.
TriTile tri_tile_from_first(const Rect& p1, int am);
// dist(omega_1 x omega_2, {xi = eta}) / |omega_1|.
double whitney_ratio(const TriTile& P);

struct SubTile {
  TriTile parent;
  long u = 0, v = 0, n = 0, p = 0;

  Rect s(int j) const;
};

std::vector<SubTile> enumerate_subtiles(const TriTile& P, long window_constant = 1);
// s_j lies within distance c |.| of P_j in both space and frequency (the refinement up to O(1) subfamilies).
bool refines(const SubTile& s, double c = 4.0);

enum class TreeKind { lacunary, overlapping };

struct Tree {
  std::vector<TriTile> tiles;
  Interval top_interval;
  double top_freq = 0.0;  // top data (xi, xi, 2 xi)
  int direction = 1;
  TreeKind kind = TreeKind::lacunary;
};

double top_frequency(double xi, int j);
// xi_j in dilation*omega_j minus omega_j.
bool lacunary_at(const TriTile& P, double xi, int j, double dilation = 3.0);
bool overlapping_at(const TriTile& P, double xi, int j);
// Checks the tree conditions of every member, with the given dilation for lacunary trees.
bool is_tree(const Tree& T, double dilation = 3.0);

enum class Disjointness { tripled, standard };

bool strongly_disjoint(const Tree& T1, const Tree& T2, Disjointness variant = Disjointness::tripled);

// Splits a collection into subfamilies with scales differing by at least 2 and separated Whitney cubes.
std::vector<std::vector<TriTile>> sparse_subfamilies(const std::vector<TriTile>& tiles);

// Random finite sparse collection: scales from k_values, tiles clustered around one frequency line so that
// nontrivial trees exist. Distinct tiles.
std::vector<TriTile> random_tiles(Rng& rng, size_t count, int am, const std::vector<int>& k_values = {-4, -2, 0, 2});

// ---- size and energy -----------------------------------------------------------

struct TreeCandidate {
  Interval I;
  double xi = 0.0;
  std::vector<size_t> members;  // indices into the collection
  double size = 0.0;
};

// All maximal j-lacunary trees over the candidate tops, with members taken from `active` (all when empty).
std::vector<TreeCandidate> lacunary_candidates(const std::vector<TriTile>& tiles, const std::vector<double>& a, int j,
                                               const std::vector<bool>& active = {});

double size_j(const std::vector<TriTile>& tiles, const std::vector<double>& a, int j);

struct EnergyReport {
  double energy = 0.0;
  int best_d = 0;
  std::vector<Tree> trees;  // selected family at best_d
};

EnergyReport energy_j(const std::vector<TriTile>& tiles, const std::vector<double>& a, int j,
                      Disjointness variant = Disjointness::tripled);

struct SizeEnergyReport {
  double lhs = 0.0;
  double rhs = 0.0;
  double ratio = 0.0;
  std::array<double, 3> size{};
  std::array<double, 3> energy{};
};

SizeEnergyReport check_size_energy(const std::vector<TriTile>& tiles, const std::array<std::vector<double>, 3>& a,
                                   const std::array<double, 3>& theta);

// ---- coefficients attached to tiles --------------------------------------------

// chi~_I(x) = (1 + dist(x, I)/|I|)^{-10}
double chi_tilde(const Interval& I, double x);
// |I|^{-1/2} || f chi~_I ||_2 on the grid.
double local_l2(const ComplexGrid& f, const Interval& I);

// f(P_1) and g(P_2): l2 norms of the packet coefficients of the sub-tiles refining P_1, P_2.
double f_tile(const ComplexGrid& f, const TriTile& P);
double g_tile(const ComplexGrid& g, const TriTile& P);

// Psi_{P_3}^{p'}: unit-norm bump supported on the fine cell, modulated to the center of omega_{P_3}.
ComplexGrid psi_packet(const TriTile& P, long p_prime, double left, double right, Index grid_n);

struct LocalizedHCoeff {
  TriTile P;
  long p_prime = 0;
  MassClass cls = MassClass::light;
  double value = 0.0;  // (2^{-am/2} sum over (n,v) of class cls at p' of |<h rho w^e, Psi>|^2)^{1/2}
};

std::vector<LocalizedHCoeff> localized_h_coeffs(const ComplexGrid& h, const RealGrid& lambda, const TriTile& P,
                                                const Classification& cls, int workers = 1);
// h_*(P_3) aggregated over p'.
double h_star(const std::vector<LocalizedHCoeff>& coeffs, MassClass c);

// ---- serialization ---------------------------------------------------------------

nlohmann::json dyadic_json(double x);
nlohmann::json to_json(const TriTile& P);
nlohmann::json to_json(const Tree& T);

}  // namespace bhc
