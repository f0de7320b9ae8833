#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "hoif/estimators.hpp"
#include "hoif/functional.hpp"
#include "hoif/stats.hpp"
#include "hoif/types.hpp"

namespace hoif {

// ---------------------------------------------------------------------------
// confidence balls for a regression / treatment-effect function

enum class BallNorm { empirical, lebesgue };

// A ball of functions around the training-sample center: membership compares
// the empirical (or Lebesgue) squared distance against the one-sided upper
// bound psi_hat + z_alpha * W.
struct ConfidenceBall {
  XFn center;
  double radius_sq = 0.0;
  double alpha = 0.0;
  BallNorm norm = BallNorm::empirical;
  // estimation-split points carrying the empirical norm
  MatrixXd points;

  bool member(const XFn& candidate) const {
    if (norm == BallNorm::empirical) {
      KahanSum s;
      for (Eigen::Index i = 0; i < points.rows(); ++i) {
        const VectorXd x = points.row(i).transpose();
        const double diff = candidate(x) - center(x);
        s.add(diff * diff);
      }
      return s.value() / static_cast<double>(points.rows()) <= radius_sq;
    }
    // Lebesgue variant: midpoint grid of 512 cells per dimension slice
    KahanSum s;
    const int g = 512;
    VectorXd x(points.cols());
    if (points.cols() != 1) throw std::invalid_argument("confidence ball: Lebesgue norm implemented for d = 1");
    for (int i = 0; i < g; ++i) {
      x[0] = (i + 0.5) / g;
      const double diff = candidate(x) - center(x);
      s.add(diff * diff);
    }
    return s.value() / g <= radius_sq;
  }

  double empirical_distance_sq(const XFn& candidate) const {
    KahanSum s;
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      const VectorXd x = points.row(i).transpose();
      const double diff = candidate(x) - center(x);
      s.add(diff * diff);
    }
    return s.value() / static_cast<double>(points.rows());
  }
};

// Builds the ball from a residual-square report (the functional targeting
// E[(b - center)^2]): the radius is the upper interval endpoint. A negative
// radius is reported as-is; the ball is then honestly empty.
inline ConfidenceBall confidence_ball(const Dataset& data, const XFn& center, const EstimateReport& rep,
                                      double alpha, BallNorm norm = BallNorm::empirical) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("confidence_ball: alpha outside (0,1)");
  ConfidenceBall ball;
  ball.center = center;
  ball.alpha = alpha;
  ball.norm = norm;
  const double z = normal_upper_quantile(alpha);
  ball.radius_sq = rep.psi_hat + z * std::sqrt(std::max(0.0, rep.w2_total));
  const auto idx = data.indices(Split::estimation);
  ball.points.resize(static_cast<Eigen::Index>(idx.size()), data.dim());
  for (std::size_t r = 0; r < idx.size(); ++r)
    ball.points.row(static_cast<Eigen::Index>(r)) = data.obs[idx[r]].x.transpose();
  return ball;
}

// Membership of the regime induced by a candidate effect function: the set of
// plug-in rules 1[b*(x) > 0] over ball members.
inline bool regime_set_membership(const XFn& candidate, const ConfidenceBall& ball) {
  return ball.member(candidate);
}

inline std::function<double(const VectorXd&)> induced_regime(const XFn& candidate) {
  return [candidate](const VectorXd& x) { return candidate(x) > 0.0 ? 1.0 : 0.0; };
}

// ---------------------------------------------------------------------------
// test inversion for implicitly defined roots

struct TauConfidenceSet {
  std::vector<double> grid;
  std::vector<bool> accepted;
  double hull_lo = std::numeric_limits<double>::quiet_NaN();
  double hull_hi = std::numeric_limits<double>::quiet_NaN();
  double grid_spacing = 0.0;
  bool empty = true;
};

// Accepts every grid point whose standardized statistic lies inside the
// two-sided normal band; the hull is reported alongside the full accepted set
// because acceptance regions need not be intervals.
inline TauConfidenceSet invert_ci_for_tau(const std::vector<double>& tau_grid,
                                          const std::function<std::pair<double, double>(double)>& estimator,
                                          double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("invert_ci_for_tau: alpha outside (0,1)");
  if (tau_grid.size() < 2) throw std::invalid_argument("invert_ci_for_tau: need a grid of two or more points");
  const double z = normal_upper_quantile(alpha / 2.0);
  TauConfidenceSet out;
  out.grid = tau_grid;
  out.accepted.resize(tau_grid.size(), false);
  out.grid_spacing = tau_grid.size() > 1 ? tau_grid[1] - tau_grid[0] : 0.0;
  for (std::size_t i = 0; i < tau_grid.size(); ++i) {
    const auto [psi, w] = estimator(tau_grid[i]);
    if (!(w > 0.0)) throw std::invalid_argument("invert_ci_for_tau: scale must be positive on the grid");
    const bool in = std::fabs(psi / w) < z;
    out.accepted[i] = in;
    if (in) {
      if (out.empty) {
        out.hull_lo = tau_grid[i];
        out.empty = false;
      }
      out.hull_hi = tau_grid[i];
    }
  }
  return out;
}

// Root of tau -> psi(tau): closed form when the map is affine (detected by
// three-point collinearity), otherwise bisection on a sign-changing bracket.
inline double solve_tau(const std::function<double(double)>& psi, double lo, double hi, double tol_scale = 1.0) {
  if (!(hi > lo)) throw std::invalid_argument("solve_tau: empty bracket");
  const double f_lo = psi(lo), f_hi = psi(hi);
  const double mid = 0.5 * (lo + hi);
  const double f_mid = psi(mid);
  const double affine_gap = std::fabs(f_mid - 0.5 * (f_lo + f_hi));
  const double scale = std::max({std::fabs(f_lo), std::fabs(f_hi), 1e-300});
  if (affine_gap <= 1e-10 * scale) {
    const double slope = (f_hi - f_lo) / (hi - lo);
    if (slope == 0.0) throw std::invalid_argument("solve_tau: flat map has no isolated root");
    return lo - f_lo / slope;
  }
  if (f_lo == 0.0) return lo;
  if (f_hi == 0.0) return hi;
  if ((f_lo > 0.0) == (f_hi > 0.0)) throw std::invalid_argument("solve_tau: no sign change over the bracket");
  double a = lo, b = hi, fa = f_lo;
  for (int it = 0; it < 200; ++it) {
    const double c = 0.5 * (a + b);
    const double fc = psi(c);
    if (std::fabs(fc) <= 1e-10 * tol_scale || 0.5 * (b - a) < 1e-15 * (std::fabs(a) + std::fabs(b) + 1.0)) return c;
    if ((fc > 0.0) == (fa > 0.0)) {
      a = c;
      fa = fc;
    } else {
      b = c;
    }
  }
  return 0.5 * (a + b);
}

}  // namespace hoif
