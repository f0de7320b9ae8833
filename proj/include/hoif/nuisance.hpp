#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "hoif/basis.hpp"
#include "hoif/functional.hpp"
#include "hoif/types.hpp"

namespace hoif {

// Histogram density estimate on a per-dimension grid of g = round(k^(1/d))
// cells, clipped below at sigma_g and renormalized to mass one.
struct HistogramDensity {
  int cells_per_dim = 1;
  int d = 1;
  std::vector<double> value;  // density value per cell

  long cell_of(const VectorXd& x) const {
    long c = 0;
    for (int j = d - 1; j >= 0; --j) {
      long cj = static_cast<long>(std::floor(x[j] * cells_per_dim));
      cj = std::min<long>(cells_per_dim - 1, std::max<long>(0, cj));
      c = c * cells_per_dim + cj;
    }
    return c;
  }
  double operator()(const VectorXd& x) const { return value[static_cast<std::size_t>(cell_of(x))]; }
};

// Training-sample nuisance estimates. All members are pure functions of x,
// frozen at construction; clipping keeps the fitted density-side quantities
// away from zero and the regressions inside the sup-norm budget.
struct NuisanceFit {
  XFn b_hat;
  XFn p_hat;
  XFn g_hat;         // varsigma_hat * f_hat
  XFn f_hat;         // fitted covariate density
  XFn varsigma_hat;  // fitted E[H1 | X = x]
  double sigma_g = 1e-3;
  double c_inf = 1e6;
  int k_b = 0, k_p = 0, k_f = 0;  // chosen series sizes
  std::optional<HistogramDensity> f_hist;  // set when f_hat is a histogram
};

namespace detail {
inline double clip_abs(double v, double c) { return std::max(-c, std::min(c, v)); }

// magnitude clip away from zero, preserving sign
inline double clip_away_from_zero(double v, double floor) {
  if (v >= 0.0) return std::max(v, floor);
  return std::min(v, -floor);
}
}  // namespace detail

// Least-squares series fit of per-observation values `y` against the first k
// basis functions at the given observations. Ridge-regularized exactly like
// the Gram orthonormalization so interpolating fits stay solvable.
inline VectorXd series_ls_coeffs(const BasisSystem& basis, const std::vector<Observation>& obs,
                                 const std::vector<double>& y, int k) {
  if (static_cast<int>(obs.size()) < 1) throw std::invalid_argument("series fit: empty training sample");
  if (k > static_cast<int>(obs.size())) throw std::invalid_argument("series fit: k exceeds the training size");
  MatrixXd X(static_cast<Eigen::Index>(obs.size()), k);
  VectorXd Y(static_cast<Eigen::Index>(obs.size()));
  for (std::size_t i = 0; i < obs.size(); ++i) {
    X.row(static_cast<Eigen::Index>(i)) = basis.eval_first(obs[i].x, k).transpose();
    Y[static_cast<Eigen::Index>(i)] = y[i];
  }
  MatrixXd G = X.transpose() * X;
  G.diagonal().array() += 1e-10 * G.trace() / static_cast<double>(k);
  Eigen::LDLT<MatrixXd> solver(G);
  if (solver.info() != Eigen::Success) throw std::runtime_error("series fit: singular design");
  return solver.solve(X.transpose() * Y);
}

// Series regression of a pseudo-outcome, clipped to [-c_inf, c_inf].
inline XFn fit_series_regression(const BasisSystem& basis, const std::vector<Observation>& obs,
                                 const std::function<double(const Observation&)>& pseudo, int k, double c_inf) {
  std::vector<double> y(obs.size());
  for (std::size_t i = 0; i < obs.size(); ++i) y[i] = pseudo(obs[i]);
  VectorXd coef = series_ls_coeffs(basis, obs, y, k);
  // capture by value; BasisSystem is immutable
  BasisSystem b = basis;
  return [b, coef, k, c_inf](const VectorXd& x) {
    return detail::clip_abs(b.eval_first(x, k).dot(coef), c_inf);
  };
}


inline HistogramDensity fit_density(const std::vector<Observation>& obs, int d, int k_cells, double sigma_g) {
  HistogramDensity h;
  h.d = d;
  h.cells_per_dim = std::max(1, static_cast<int>(std::llround(std::pow(static_cast<double>(k_cells), 1.0 / d))));
  long total = 1;
  for (int j = 0; j < d; ++j) total *= h.cells_per_dim;
  h.value.assign(static_cast<std::size_t>(total), 0.0);
  const double cell_vol = 1.0 / static_cast<double>(total);
  for (const auto& o : obs) h.value[static_cast<std::size_t>(h.cell_of(o.x))] += 1.0;
  for (auto& v : h.value) v /= (static_cast<double>(obs.size()) * cell_vol);
  // clip below, then push the surplus back onto the unclipped cells so the
  // mass stays one; a couple of sweeps settles at desk scale
  for (int sweep = 0; sweep < 8; ++sweep) {
    double mass = 0.0;
    for (auto& v : h.value) {
      v = std::max(v, sigma_g);
      mass += v * cell_vol;
    }
    if (std::fabs(mass - 1.0) < 1e-12) break;
    double free_mass = 0.0;
    for (const auto& v : h.value)
      if (v > sigma_g) free_mass += v * cell_vol;
    if (free_mass <= 0.0) break;
    const double scale = (1.0 - (mass - free_mass)) / free_mass;
    for (auto& v : h.value)
      if (v > sigma_g) v *= scale;
  }
  return h;
}

struct NuisanceConfig {
  int k_b = 0;           // 0 = rate-default ceil(n^{d/(2*beta+d)})
  int k_p = 0;
  int k_f_cells = 0;     // histogram cells
  double sigma_g = 1e-3;
  double c_inf = 1e6;
  double beta_b = 1.0, beta_p = 1.0;  // used only for the rate-default sizes
};

inline int rate_default_size(std::size_t n_train, double beta, int d) {
  const double expo = static_cast<double>(d) / (2.0 * beta + static_cast<double>(d));
  return std::max(1, static_cast<int>(std::ceil(std::pow(static_cast<double>(n_train), expo))));
}

// Fits every nuisance component for a functional from the training split.
// The conditional-moment identities behind the residual factors give generic
// pseudo-outcomes: b = -E[H3|X]/E[H1|X] and p = -E[H2|X]/E[H1|X], so each
// target is a ratio of two series regressions (a single regression when H1 is
// constant), composed and then clipped.
inline NuisanceFit fit_nuisance(const FunctionalSpec& spec, const Dataset& data, const BasisSystem& basis,
                                const NuisanceConfig& cfg = {}) {
  const auto tr_idx = data.indices(Split::training);
  if (tr_idx.empty()) throw std::invalid_argument("fit_nuisance: empty training split");
  std::vector<Observation> tr;
  tr.reserve(tr_idx.size());
  for (auto i : tr_idx) tr.push_back(data.obs[i]);
  const int d = data.dim();

  const int kb = cfg.k_b > 0 ? cfg.k_b : std::min<int>(basis.size(), rate_default_size(tr.size(), cfg.beta_b, d));
  const int kp = cfg.k_p > 0 ? cfg.k_p : std::min<int>(basis.size(), rate_default_size(tr.size(), cfg.beta_p, d));
  const int kf = cfg.k_f_cells > 0 ? cfg.k_f_cells : std::max(1, static_cast<int>(std::floor(std::cbrt(static_cast<double>(tr.size())))));

  NuisanceFit fit;
  fit.sigma_g = cfg.sigma_g;
  fit.c_inf = cfg.c_inf;
  fit.k_b = kb;
  fit.k_p = kp;
  fit.k_f = kf;

  auto h1 = spec.h1;
  XFn num_b = fit_series_regression(basis, tr, [&spec](const Observation& o) { return -spec.h3(o); }, kb, cfg.c_inf);
  XFn num_p = fit_series_regression(basis, tr, [&spec](const Observation& o) { return -spec.h2(o); }, kp, cfg.c_inf);
  XFn den_b = fit_series_regression(basis, tr, [h1](const Observation& o) { return h1(o); }, kb, cfg.c_inf);
  XFn den_p = fit_series_regression(basis, tr, [h1](const Observation& o) { return h1(o); }, kp, cfg.c_inf);

  const double floor = cfg.sigma_g;
  const double c_inf = cfg.c_inf;
  fit.b_hat = [num_b, den_b, floor, c_inf](const VectorXd& x) {
    return detail::clip_abs(num_b(x) / detail::clip_away_from_zero(den_b(x), floor), c_inf);
  };
  fit.p_hat = [num_p, den_p, floor, c_inf](const VectorXd& x) {
    return detail::clip_abs(num_p(x) / detail::clip_away_from_zero(den_p(x), floor), c_inf);
  };
  // varsigma from the finer of the two denominator fits
  XFn den = kb >= kp ? den_b : den_p;
  fit.varsigma_hat = [den, floor](const VectorXd& x) { return detail::clip_away_from_zero(den(x), floor); };

  HistogramDensity fh = fit_density(tr, d, kf, cfg.sigma_g);
  fit.f_hist = fh;
  fit.f_hat = [fh](const VectorXd& x) { return fh(x); };
  XFn vs = fit.varsigma_hat;
  fit.g_hat = [fh, vs, floor](const VectorXd& x) { return detail::clip_away_from_zero(vs(x) * fh(x), floor); };
  return fit;
}

// Cross-validated series-size selection for the randomized-trial treatment
// effect: candidate s solves the s moment equations
//   0 = P_c[{Y - A*coef'phi_s(X)} phi_s(X) {A - pi0(X)}]
// on the candidate half, and the winner minimizes the validation risk
//   P_v[sigma0^{-2}(X) {Y - [A - pi0(X)] bhat(X)}^2].
struct CvSelection {
  XFn b_hat;
  int s = 0;
  std::vector<double> risk;          // validation risk per candidate (NaN if skipped)
  std::vector<int> skipped;          // candidates with a singular moment system
};

inline CvSelection cv_select(const std::vector<Observation>& train, const BasisSystem& basis, const XFn& pi0,
                             int s_max) {
  if (train.size() < 4) throw std::invalid_argument("cv_select: training sample too small");
  const std::size_t n_c = train.size() / 2;
  std::vector<Observation> cand(train.begin(), train.begin() + static_cast<long>(n_c));
  std::vector<Observation> valid(train.begin() + static_cast<long>(n_c), train.end());

  CvSelection out;
  out.risk.assign(static_cast<std::size_t>(s_max), std::numeric_limits<double>::quiet_NaN());
  double best = std::numeric_limits<double>::infinity();
  std::vector<VectorXd> coefs(static_cast<std::size_t>(s_max));

  for (int s = 1; s <= s_max; ++s) {
    MatrixXd M = MatrixXd::Zero(s, s);
    VectorXd rhs = VectorXd::Zero(s);
    for (const auto& o : cand) {
      const VectorXd phi = basis.eval_first(o.x, s);
      const double w = o.a - pi0(o.x);
      M.noalias() += phi * phi.transpose() * (o.a * w);
      rhs.noalias() += phi * (o.y * w);
    }
    M /= static_cast<double>(cand.size());
    rhs /= static_cast<double>(cand.size());
    Eigen::FullPivLU<MatrixXd> lu(M);
    if (!lu.isInvertible()) {
      out.skipped.push_back(s);
      continue;
    }
    const VectorXd coef = lu.solve(rhs);
    coefs[static_cast<std::size_t>(s - 1)] = coef;
    double risk = 0.0;
    for (const auto& o : valid) {
      const double p0 = pi0(o.x);
      const double s0sq = p0 * (1.0 - p0);
      const double bv = basis.eval_first(o.x, s).dot(coef);
      const double r = o.y - (o.a - p0) * bv;
      risk += r * r / s0sq;
    }
    risk /= static_cast<double>(valid.size());
    out.risk[static_cast<std::size_t>(s - 1)] = risk;
    if (risk < best) {
      best = risk;
      out.s = s;
    }
  }
  if (out.s == 0) throw std::runtime_error("cv_select: every candidate moment system was singular");
  const VectorXd coef = coefs[static_cast<std::size_t>(out.s - 1)];
  const int s_sel = out.s;
  BasisSystem b = basis;
  out.b_hat = [b, coef, s_sel](const VectorXd& x) { return b.eval_first(x, s_sel).dot(coef); };
  return out;
}

}  // namespace hoif
