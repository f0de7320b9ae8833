#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include "hoif/types.hpp"

namespace hoif {

using ObsFn = std::function<double(const Observation&)>;
using XFn = std::function<double(const VectorXd&)>;

enum class FunctionalId {
  ExpProduct1a,     // E[b(X)p(X)], b = E[Y|X], p = E[A|X]
  ExpCondCov1b,     // E[cov(Y,A|X)]
  VarWeightedATE1c, // 1b applied to Y - tau*A
  MARMean2a,        // E[Y] under missing-at-random, p = 1/propensity
  MNARMean2b,       // missing-not-at-random with known tilt alpha
  TrialSquare4,     // E[b(X)^2] for the treatment-effect contrast, known randomization
  BallResidual5,    // E[(b(X) - bref(X))^2] for regression confidence balls
};

struct FunctionalOptions {
  std::optional<double> tau;              // VarWeightedATE1c
  std::optional<double> alpha;            // MNARMean2b
  XFn pi0;                                // TrialSquare4: randomization probabilities
  XFn c;                                  // TrialSquare4: free H4 direction, default 0
  XFn b_ref;                              // BallResidual5 center; optional for TrialSquare4 (ball form)
  std::optional<std::pair<XFn, XFn>> weight_override;  // custom (bdot, pdot)
};

// The target functional: the four H-functions of the first-order influence
// kernel H(b,p) = B*P*H1 + B*H2 + P*H3 + H4, plus the analyst weight pair
// (bdot, pdot). Weight defaults are the choices that whiten the design
// (make the fitted Q identically one) where such a choice exists.
struct FunctionalSpec {
  FunctionalId id;
  ObsFn h1, h2, h3, h4;
  bool requires_binary_a = false;
  bool b_equals_p = false;  // single-nuisance functionals (squares of b)
  // Weight rule: either fixed functions of x, or "pdot equals the fitted p-hat".
  XFn bdot_fixed;           // always set
  XFn pdot_fixed;           // null when pdot tracks the fitted p
  bool pdot_is_fitted_p = false;
  std::string name;

  double h_value(const Observation& o, double b_val, double p_val) const {
    return h1(o) * b_val * p_val + h2(o) * b_val + h3(o) * p_val + h4(o);
  }
};

namespace detail {
inline ObsFn const_fn(double v) {
  return [v](const Observation&) { return v; };
}
}  // namespace detail

inline FunctionalSpec make_functional(FunctionalId id, const FunctionalOptions& opt = {}) {
  FunctionalSpec s;
  s.id = id;
  switch (id) {
    case FunctionalId::ExpProduct1a:
      s.h1 = detail::const_fn(-1.0);
      s.h2 = [](const Observation& o) { return o.a; };
      s.h3 = [](const Observation& o) { return o.y; };
      s.h4 = detail::const_fn(0.0);
      s.bdot_fixed = [](const VectorXd&) { return 1.0; };
      s.pdot_fixed = [](const VectorXd&) { return -1.0; };
      s.name = "exp_product";
      break;
    case FunctionalId::ExpCondCov1b:
      s.h1 = detail::const_fn(1.0);
      s.h2 = [](const Observation& o) { return -o.a; };
      s.h3 = [](const Observation& o) { return -o.y; };
      s.h4 = [](const Observation& o) { return o.a * o.y; };
      s.bdot_fixed = [](const VectorXd&) { return 1.0; };
      s.pdot_fixed = [](const VectorXd&) { return 1.0; };
      s.name = "exp_cond_cov";
      break;
    case FunctionalId::VarWeightedATE1c: {
      if (!opt.tau) throw std::invalid_argument("make_functional: VarWeightedATE1c needs tau");
      const double tau = *opt.tau;
      // Expected conditional covariance of (Y - tau*A, A).
      s.h1 = detail::const_fn(1.0);
      s.h2 = [](const Observation& o) { return -o.a; };
      s.h3 = [tau](const Observation& o) { return -(o.y - tau * o.a); };
      s.h4 = [tau](const Observation& o) { return o.a * (o.y - tau * o.a); };
      s.bdot_fixed = [](const VectorXd&) { return 1.0; };
      s.pdot_fixed = [](const VectorXd&) { return 1.0; };
      s.requires_binary_a = true;
      s.name = "var_weighted_ate";
      break;
    }
    case FunctionalId::MARMean2a:
      s.h1 = [](const Observation& o) { return -o.a; };
      s.h2 = detail::const_fn(1.0);
      s.h3 = [](const Observation& o) { return o.a * o.y; };
      s.h4 = detail::const_fn(0.0);
      s.bdot_fixed = [](const VectorXd&) { return -1.0; };
      s.pdot_is_fitted_p = true;  // pdot = fitted p = 1/propensity
      s.requires_binary_a = true;
      s.name = "mar_mean";
      break;
    case FunctionalId::MNARMean2b: {
      if (!opt.alpha) throw std::invalid_argument("make_functional: MNARMean2b needs alpha");
      const double alpha = *opt.alpha;
      s.h1 = [alpha](const Observation& o) { return -std::exp(-alpha * o.y) * o.a; };
      s.h2 = [](const Observation& o) { return 1.0 - o.a; };
      s.h3 = [alpha](const Observation& o) { return o.a * o.y * std::exp(-alpha * o.y); };
      s.h4 = [](const Observation& o) { return o.a * o.y; };
      s.bdot_fixed = [](const VectorXd&) { return -1.0; };
      s.pdot_is_fitted_p = true;
      s.requires_binary_a = true;
      s.name = "mnar_mean";
      break;
    }
    case FunctionalId::TrialSquare4: {
      if (!opt.pi0) throw std::invalid_argument("make_functional: TrialSquare4 needs pi0");
      XFn pi0 = opt.pi0;
      XFn cfn = opt.c ? opt.c : XFn([](const VectorXd&) { return 0.0; });
      XFn bref = opt.b_ref;  // optional: shifts H4 to target E[(b - bref)^2]
      auto sig2inv = [pi0](const VectorXd& x) {
        const double p = pi0(x);
        if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("TrialSquare4: pi0 outside (0,1)");
        return 1.0 / (p * (1.0 - p));
      };
      s.h1 = [pi0, sig2inv](const Observation& o) {
        return 1.0 - 2.0 * o.a * (o.a - pi0(o.x)) * sig2inv(o.x);
      };
      s.h2 = [pi0, sig2inv](const Observation& o) { return (o.a - pi0(o.x)) * sig2inv(o.x) * o.y; };
      s.h3 = s.h2;
      s.h4 = [pi0, sig2inv, cfn, bref](const Observation& o) {
        double v = cfn(o.x) * (o.a - pi0(o.x));
        if (bref) {
          const double br = bref(o.x);
          v += -2.0 * (o.a - pi0(o.x)) * sig2inv(o.x) * o.y * br + br * br;
        }
        return v;
      };
      s.bdot_fixed = [](const VectorXd&) { return 1.0; };
      s.pdot_fixed = [](const VectorXd&) { return -1.0; };
      s.requires_binary_a = true;
      s.b_equals_p = true;
      s.name = "trial_square";
      break;
    }
    case FunctionalId::BallResidual5: {
      if (!opt.b_ref) throw std::invalid_argument("make_functional: BallResidual5 needs b_ref");
      XFn bref = opt.b_ref;
      s.h1 = detail::const_fn(-1.0);
      s.h2 = [](const Observation& o) { return o.y; };
      s.h3 = s.h2;
      s.h4 = [bref](const Observation& o) {
        const double br = bref(o.x);
        return -2.0 * br * o.y + br * br;
      };
      s.bdot_fixed = [](const VectorXd&) { return 1.0; };
      s.pdot_fixed = [](const VectorXd&) { return -1.0; };
      s.b_equals_p = true;
      s.name = "ball_residual";
      break;
    }
    default:
      throw std::invalid_argument("make_functional: unknown functional id");
  }
  if (opt.weight_override) {
    s.bdot_fixed = opt.weight_override->first;
    s.pdot_fixed = opt.weight_override->second;
    s.pdot_is_fitted_p = false;
  }
  return s;
}

inline double h_value(const FunctionalSpec& spec, const Observation& o, double b_val, double p_val) {
  return spec.h_value(o, b_val, p_val);
}

// The two per-observation residual factors that seed every correction order:
//   eps   = (H1*phat + H2)*bdot     (zero-mean given X when phat = p)
//   delta = (H1*bhat + H3)*pdot     (zero-mean given X when bhat = b)
struct ResidualPair {
  double eps = 0.0;
  double delta = 0.0;
};

inline ResidualPair residuals(const FunctionalSpec& spec, const Observation& o, double bhat_x, double phat_x,
                              double bdot_x, double pdot_x) {
  ResidualPair r;
  const double H1 = spec.h1(o);
  r.eps = (H1 * phat_x + spec.h2(o)) * bdot_x;
  r.delta = (H1 * bhat_x + spec.h3(o)) * pdot_x;
  return r;
}

}  // namespace hoif
