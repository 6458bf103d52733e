#include "bhc/operators.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace bhc {

namespace {

Index wrap(Index i, Index n) {
  i %= n;
  return i < 0 ? i + n : i;
}

std::vector<Index> all_points(Index n, const std::vector<Index>& points) {
  if (!points.empty()) return points;
  std::vector<Index> out(n);
  for (Index i = 0; i < n; ++i) out[i] = i;
  return out;
}

}  // namespace

double power_branch(double t, double a, bool odd_power) {
  const double p = std::pow(std::abs(t), a);
  return (odd_power && t < 0) ? -p : p;
}

double c_a(double a) { return std::pow(a, -a / (a - 1.0)) - std::pow(a, -1.0 / (a - 1.0)); }

RealGrid bc_a(const ComplexGrid& f, const ComplexGrid& g, const OperatorParams& params,
              const std::vector<double>& lambda_grid, int workers) {
  require_same_grid(f, g);
  if (lambda_grid.empty()) throw Error("empty-grid", "lambda grid is empty");
  const Index n = f.size();
  const double h = f.step();
  const Index s_lo = std::max<Index>(1, Index(std::lround(params.eps_trunc / h)));
  const Index s_hi = std::min<Index>(n / 2 - 1, Index(std::floor(params.R_trunc / h + 1e-9)));
  if (params.eps_trunc >= params.R_trunc && params.eps_trunc > 0)
    throw Error("domain-violation", "eps_trunc must be below R_trunc");

  const Index L = Index(lambda_grid.size());
  Eigen::MatrixXcd plus(s_hi + 1, L), minus(s_hi + 1, L);
  for (Index l = 0; l < L; ++l)
    for (Index s = s_lo; s <= s_hi; ++s) {
      const double t = double(s) * h;
      plus(s, l) = e(lambda_grid[l] * power_branch(t, params.a, params.odd_power)) / t;
      minus(s, l) = e(lambda_grid[l] * power_branch(-t, params.a, params.odd_power)) / (-t);
    }

  RealGrid out(f.left, f.right, n);
  parallel_for(n, workers, [&](Index i) {
    Eigen::VectorXcd fwd(s_hi + 1), bwd(s_hi + 1);
    for (Index s = s_lo; s <= s_hi; ++s) {
      fwd[s] = f[wrap(i - s, n)] * g[wrap(i + s, n)];
      bwd[s] = f[wrap(i + s, n)] * g[wrap(i - s, n)];
    }
    double best = 0.0;
    for (Index l = 0; l < L; ++l) {
      cd acc = 0.0;
      for (Index s = s_lo; s <= s_hi; ++s) acc += fwd[s] * plus(s, l) + bwd[s] * minus(s, l);
      best = std::max(best, std::abs(acc * h));
    }
    out[i] = best;
  });
  return out;
}

RealGrid bilinear_max(const ComplexGrid& f, const ComplexGrid& g, const std::vector<double>& r_grid, int workers,
                      const std::vector<Index>& points) {
  require_same_grid(f, g);
  if (r_grid.empty()) throw Error("empty-grid", "radius grid is empty");
  const Index n = f.size();
  const double h = f.step();
  std::vector<Index> S;
  for (double r : r_grid) S.push_back(std::clamp<Index>(Index(std::lround(r / h)), 1, n / 2));
  const Index s_max = *std::max_element(S.begin(), S.end());
  RealGrid out(f.left, f.right, n);
  const Index count = points.empty() ? n : Index(points.size());
  parallel_for(count, workers, [&](Index idx) {
    const Index i = points.empty() ? idx : points[size_t(idx)];
    // cum[s] = trapezoid sum of |f(x-t)g(x+t)| over |t| <= s*h, in units of h
    std::vector<double> pair(s_max + 1), cum(s_max + 1);
    pair[0] = std::abs(f[i]) * std::abs(g[i]);
    for (Index s = 1; s <= s_max; ++s)
      pair[s] = std::abs(f[wrap(i - s, n)]) * std::abs(g[wrap(i + s, n)]) +
                std::abs(f[wrap(i + s, n)]) * std::abs(g[wrap(i - s, n)]);
    double run = pair[0];
    for (Index s = 1; s <= s_max; ++s) {
      cum[s] = run + 0.5 * pair[s];
      run += pair[s];
    }
    double best = 0.0;
    for (Index s : S) best = std::max(best, cum[s] / (2.0 * double(s)));
    out[i] = best;
  });
  return out;
}

std::vector<double> dyadic_radii(const ComplexGrid& f, int j_lo, int j_hi) {
  std::vector<double> r;
  for (int j = j_lo; j <= j_hi; ++j) {
    const double v = std::ldexp(1.0, j);
    if (v >= f.step() && v <= f.length() / 2) r.push_back(v);
  }
  return r;
}

ComplexGrid t_mk(const ComplexGrid& f, const ComplexGrid& g, const OperatorParams& params, const TmkOptions& opts) {
  require_same_grid(f, g);
  require_same_grid(f, params.lambda);
  const Index n = f.size();
  const BandlimitedSampler fs(f), gs(g);
  const auto pts = all_points(n, opts.points);
  const double nyq = double(n) / (2.0 * f.length());
  const double t_lo = std::ldexp(1.0, params.k - 1), t_hi = std::ldexp(1.0, params.k + 1);
  ComplexGrid out(f.left, f.right, n);
  std::vector<cd> vals(pts.size());
  parallel_for(Index(pts.size()), opts.workers, [&](Index idx) {
    const Index i = pts[idx];
    const double x = f.x(i);
    const double lam = params.lambda[i];
    const double cut = rho_tilde(params.a, lam / params.lambda_scale());
    if (cut == 0.0) {
      vals[idx] = 0.0;
      return;
    }
    const double deriv = params.a * std::abs(lam) * std::pow(t_hi, params.a - 1.0) + 2.0 * nyq;
    const Index N = quadrature_points(t_lo, t_hi, deriv, opts.rule);
    check_budget(N, "t_mk");
    const double dt = (t_hi - t_lo) / double(N);
    cd acc = 0.0;
    for (Index q = 0; q < N; ++q) {
      const double t = t_lo + (double(q) + 0.5) * dt;
      const double w = rho(std::ldexp(t, -params.k)) / t;
      acc += w * (fs(x - t) * gs(x + t) * e(lam * power_branch(t, params.a, params.odd_power)) -
                  fs(x + t) * gs(x - t) * e(lam * power_branch(-t, params.a, params.odd_power)));
    }
    vals[idx] = cut * acc * dt;
  });
  for (size_t idx = 0; idx < pts.size(); ++idx) out[pts[idx]] = vals[idx];
  return out;
}

cd multiplier_exact(const OperatorParams& params, double zeta, double lambda_val, QuadratureRule rule) {
  if (lambda_val == 0.0) throw Error("domain-violation", "lambda must be nonzero");
  const double t_lo = std::ldexp(1.0, params.k - 1), t_hi = std::ldexp(1.0, params.k + 1);
  const double deriv = params.a * std::abs(lambda_val) * std::pow(t_hi, params.a - 1.0) + std::abs(zeta);
  auto amp = [&](double t) { return cd(rho(std::ldexp(t, -params.k)) / t); };
  auto pos = [&](double t) { return lambda_val * power_branch(t, params.a, params.odd_power) - zeta * t; };
  auto neg = [&](double s) { return lambda_val * power_branch(-s, params.a, params.odd_power) + zeta * s; };
  const cd plus = oscillatory_integral(amp, pos, t_lo, t_hi, deriv, rule);
  const cd minus = oscillatory_integral(amp, neg, t_lo, t_hi, deriv, rule);
  return plus - minus;
}

cd multiplier_main(const OperatorParams& params, double zeta, double lambda_val, MainTerm mode) {
  if (lambda_val == 0.0 || zeta == 0.0) throw Error("domain-violation", "zeta and lambda must be nonzero");
  const double a = params.a;
  const double az = std::abs(zeta);
  const double sign = zeta > 0 ? 1.0 : -1.0;
  if (lambda_val < 0 || (params.odd_power && zeta < 0)) return 0.0;  // no critical point on either branch
  const cd phase = e(c_a(a) * std::pow(az, params.a_prime()) * std::pow(lambda_val, -1.0 / (a - 1.0)));
  const double scale = std::exp2(-params.am / 2.0);
  const double lp = lambda_val / params.lambda_scale();
  const double zp = az / params.zeta_scale();
  if (mode == MainTerm::tensor) return sign * scale * phase * rho_tilde(a, lp) * psi_window(a, zp);
  const double s = std::pow(zp / (a * lp), 1.0 / (a - 1.0));
  const double theta = rho(s) / s;
  return sign * scale * phase * theta / std::sqrt(a * (a - 1.0) * lp * std::pow(s, a - 2.0));
}

MultiplierSample multiplier_sample(const OperatorParams& params, double zeta, double lambda_val, MainTerm mode) {
  return {zeta, lambda_val, multiplier_exact(params, zeta, lambda_val), multiplier_main(params, zeta, lambda_val, mode)};
}

ComplexGrid t_mk_model(const ComplexGrid& f, const ComplexGrid& g, const OperatorParams& params, ModelSymbol symbol,
                       const std::vector<Index>& points, int workers) {
  require_same_grid(f, g);
  require_same_grid(f, params.lambda);
  const Index n = f.size();
  const double len = f.length();
  const Eigen::VectorXcd F = dft(f.samples) / double(n);
  const Eigen::VectorXcd G = dft(g.samples) / double(n);
  const double fmax = F.cwiseAbs().maxCoeff(), gmax = G.cwiseAbs().maxCoeff();
  std::vector<Index> fq, gq;  // signed bin numbers of the nonzero spectra
  for (Index q = 0; q < n; ++q) {
    const Index sq = q < n / 2 ? q : q - n;
    if (std::abs(F[q]) > 1e-14 * fmax) fq.push_back(sq);
    if (std::abs(G[q]) > 1e-14 * gmax) gq.push_back(sq);
  }
  std::sort(fq.begin(), fq.end());
  std::sort(gq.begin(), gq.end());
  check_budget(std::int64_t(fq.size()) * std::int64_t(gq.size()), "t_mk_model");
  const auto pts = all_points(n, points);
  if (fq.empty() || gq.empty()) return ComplexGrid(f.left, f.right, n);

  auto sym = [&](double zeta, double lam) -> cd {
    if (zeta == 0.0) return 0.0;
    switch (symbol) {
      case ModelSymbol::exact:
        return rho_tilde(params.a, lam / params.lambda_scale()) * multiplier_exact(params, zeta, lam);
      case ModelSymbol::tensor:
        return kappa() * multiplier_main(params, zeta, lam, MainTerm::tensor);
      case ModelSymbol::stationary:
        return kappa() * rho_tilde(params.a, lam / params.lambda_scale()) *
               multiplier_main(params, zeta, lam, MainTerm::stationary);
    }
    return 0.0;
  };

  // Symbols depend only on the bin difference, and lambda typically takes few values.
  const Index dmin = fq.front() - gq.back(), dmax = fq.back() - gq.front();
  std::map<double, std::vector<cd>> cache;
  for (Index i : pts) {
    const double lam = params.lambda[i];
    if (cache.count(lam)) continue;
    std::vector<cd> row(dmax - dmin + 1, 0.0);
    if (rho_tilde(params.a, lam / params.lambda_scale()) != 0.0 || symbol == ModelSymbol::tensor)
      for (Index d = dmin; d <= dmax; ++d) row[d - dmin] = sym(double(d) / len, lam);
    cache.emplace(lam, std::move(row));
  }

  ComplexGrid out(f.left, f.right, n);
  std::vector<cd> vals(pts.size());
  parallel_for(Index(pts.size()), workers, [&](Index idx) {
    const Index i = pts[idx];
    const auto& row = cache.at(params.lambda[i]);
    const double x = f.x(i) - f.left;
    cd acc = 0.0;
    for (Index a1 : fq) {
      const cd fa = F[wrap(a1, n)];
      for (Index b1 : gq) {
        const cd s = row[a1 - b1 - dmin];
        if (s == 0.0) continue;
        acc += fa * G[wrap(b1, n)] * s * e(double(a1 + b1) * x / len);
      }
    }
    vals[idx] = acc;
  });
  for (size_t idx = 0; idx < pts.size(); ++idx) out[pts[idx]] = vals[idx];
  return out;
}

double chi_low(double a, double lambda_val, double t) {
  if (lambda_val == 0.0) return 0.0;
  const double j0 = std::log2(std::abs(lambda_val)) / a;
  double s = 0.0;
  for (int j = int(std::floor(j0)) - 2; j <= int(std::ceil(j0)) + 2; ++j)
    s += rho_tilde(a, std::abs(lambda_val) * std::exp2(-a * j)) * eta(std::ldexp(t, j));
  return s;
}

ComplexGrid t_zero(const ComplexGrid& f, const ComplexGrid& g, const OperatorParams& params, int workers) {
  require_same_grid(f, g);
  require_same_grid(f, params.lambda);
  const Index n = f.size();
  const double h = f.step();
  ComplexGrid out(f.left, f.right, n);
  parallel_for(n, workers, [&](Index i) {
    const double lam = params.lambda[i];
    if (lam == 0.0) return;
    const double j0 = std::floor(std::log2(std::abs(lam)) / params.a) - 2;
    const Index S = std::min<Index>(n / 2 - 1, Index(std::ceil(std::ldexp(2.0, -int(j0)) / h)));
    cd acc = 0.0;
    for (Index s = 1; s <= S; ++s) {
      const double t = double(s) * h;
      const double w = chi_low(params.a, lam, t) / t;
      if (w == 0.0) continue;
      acc += w * (f[wrap(i - s, n)] * g[wrap(i + s, n)] * e(lam * power_branch(t, params.a, params.odd_power)) -
                  f[wrap(i + s, n)] * g[wrap(i - s, n)] * e(lam * power_branch(-t, params.a, params.odd_power)));
    }
    out[i] = acc * h;
  });
  return out;
}

RealGrid hilbert_max_truncation(const ComplexGrid& f, const ComplexGrid& g, int K_lo, int K_hi, int workers) {
  require_same_grid(f, g);
  const Index n = f.size();
  const double h = f.step();
  RealGrid out(f.left, f.right, n);
  parallel_for(n, workers, [&](Index i) {
    double best = 0.0;
    for (int K = K_lo; K <= K_hi; ++K) {
      const Index S = std::min<Index>(n / 2 - 1, Index(std::ceil(std::ldexp(2.0, K) / h)));
      cd acc = 0.0;
      for (Index s = 1; s <= S; ++s) {
        const double t = double(s) * h;
        acc += eta(std::ldexp(t, -K)) / t * (f[wrap(i - s, n)] * g[wrap(i + s, n)] - f[wrap(i + s, n)] * g[wrap(i - s, n)]);
      }
      best = std::max(best, std::abs(acc * h));
    }
    out[i] = best;
  });
  return out;
}

}  // namespace bhc
