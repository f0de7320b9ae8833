// Acceptance suite: one pass/fail line per criterion, every tolerance pinned
// in code. Run with no arguments for the full gate, or pass criterion numbers
// to run a subset (e.g. ./acceptance 5 9 10).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hoif/estimators.hpp"
#include "hoif/inference.hpp"
#include "hoif/mc.hpp"
#include "hoif/minimax.hpp"
#include "hoif/nuisance.hpp"
#include "hoif/oracles.hpp"
#include "hoif/parallel.hpp"
#include "hoif/simple.hpp"
#include "hoif/truth.hpp"

using namespace hoif;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

FunctionalSpec spec_for(FunctionalId id) {
  FunctionalOptions opt;
  if (id == FunctionalId::VarWeightedATE1c) opt.tau = 0.3;
  if (id == FunctionalId::MNARMean2b) opt.alpha = 0.4;
  return make_functional(id, opt);
}

// ---------------------------------------------------------------------------
// 1. exact double robustness

Outcome criterion1() {
  Rng rng(101);
  double worst = 0.0;
  const std::vector<FunctionalId> ids = {FunctionalId::ExpProduct1a, FunctionalId::ExpCondCov1b,
                                         FunctionalId::MARMean2a, FunctionalId::MNARMean2b};
  for (int rep = 0; rep < 50; ++rep) {
    DiscreteTruth t = random_discrete_truth(rng, 5 + static_cast<int>(rng.next_below(3)), true);
    DiscreteTruth wrong = perturb_truth(t, rng, 0.35);
    const FunctionalSpec spec = spec_for(ids[static_cast<std::size_t>(rep) % ids.size()]);
    const double psi = t.psi(spec);
    for (int side = 0; side < 2; ++side) {
      ObsKernel h = [&](const std::vector<const Observation*>& o) {
        for (std::size_t g = 0; g < t.n_x(); ++g)
          if ((t.x_atoms.row(static_cast<Eigen::Index>(g)).transpose() - o[0]->x).cwiseAbs().maxCoeff() < 1e-12) {
            const double b = side == 0 ? wrong.b_true(spec, g) : t.b_true(spec, g);
            const double p = side == 0 ? t.p_true(spec, g) : wrong.p_true(spec, g);
            return spec.h_value(*o[0], b, p);
          }
        throw std::logic_error("atom missing");
      };
      worst = std::max(worst, std::fabs(exact_mean_kernel(h, 1, t) - psi));
    }
  }
  return {worst <= 1e-12, "max |E[H] - psi| = " + fmt(worst) + " over 50 truths x 2 sides (tol 1e-12)"};
}

// ---------------------------------------------------------------------------
// 2. truncation-bias identity

Outcome criterion2() {
  Rng rng(202);
  double worst = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    DiscreteTruth t = random_discrete_truth(rng, 6, true);
    DiscreteTruth wrong = perturb_truth(t, rng, 0.3);
    const bool use_mar = rep % 3 == 1;
    const FunctionalSpec spec = spec_for(use_mar ? FunctionalId::MARMean2a : FunctionalId::ExpCondCov1b);
    OracleNuisance nu = oracle_nuisance_from(wrong, spec);
    const int k = 2 + static_cast<int>(rng.next_below(3));
    OracleDesign des = oracle_design(build_basis(rep % 2 ? BasisKind::tensor_poly : BasisKind::tensor_haar, 1,
                                                 std::max(4, k)),
                                     k, wrong, nu);
    const auto tb = oracle_truncation_bias(t, spec, nu, des);
    worst = std::max(worst, std::fabs(tb.tb_direct - tb.tb_projection));
  }
  return {worst <= 1e-10, "max |direct - double projection| = " + fmt(worst) + " over 50 truths (tol 1e-10)"};
}

// ---------------------------------------------------------------------------
// 3. estimation-bias identity and single-nuisance zeroes

Outcome criterion3() {
  Rng rng(303);
  double worst_identity = 0.0;
  double worst_zero = 0.0;
  for (int rep = 0; rep < 10; ++rep) {
    DiscreteTruth t = random_discrete_truth(rng, 5, true);
    DiscreteTruth wrong = perturb_truth(t, rng, 0.3);
    const FunctionalSpec spec = spec_for(FunctionalId::ExpCondCov1b);
    OracleNuisance nu = oracle_nuisance_from(wrong, spec);
    OracleDesign des = oracle_design(build_basis(BasisKind::tensor_poly, 1, 3), 3, wrong, nu);
    for (int m : {2, 3}) {
      const auto eb = oracle_estimation_bias(t, spec, nu, des, m);
      worst_identity = std::max(worst_identity, std::fabs(eb.eb_closed - eb.eb_enumeration));
    }
  }
  // single-nuisance zeroes, including the density-side product case
  for (int rep = 0; rep < 5; ++rep) {
    DiscreteTruth t = random_discrete_truth(rng, 5, true);
    DiscreteTruth wrong = perturb_truth(t, rng, 0.3);
    const FunctionalSpec spec = spec_for(FunctionalId::ExpCondCov1b);
    OracleNuisance base = oracle_nuisance_from(wrong, spec);
    auto lookup_true = [&t](const FunctionalSpec& s, bool want_b) {
      return XFn([&t, s, want_b](const VectorXd& x) {
        for (std::size_t g = 0; g < t.n_x(); ++g)
          if ((t.x_atoms.row(static_cast<Eigen::Index>(g)).transpose() - x).cwiseAbs().maxCoeff() < 1e-12)
            return want_b ? t.b_true(s, g) : t.p_true(s, g);
        throw std::logic_error("atom missing");
      });
    };
    OracleDesign des = oracle_design(build_basis(BasisKind::tensor_poly, 1, 3), 3, wrong, base);
    for (int which = 0; which < 2; ++which) {
      OracleNuisance nu = base;
      if (which == 0) nu.b_hat = lookup_true(spec, true);
      else nu.p_hat = lookup_true(spec, false);
      for (int m : {2, 3}) {
        const auto eb = oracle_estimation_bias(t, spec, nu, des, m);
        worst_zero = std::max(worst_zero, std::fabs(eb.eb_closed));
      }
    }
    {  // ghat = g through the fitted marginal and varsigma jointly
      OracleNuisance nu = oracle_nuisance_from(t, spec);
      nu.b_hat = base.b_hat;
      nu.p_hat = base.p_hat;
      OracleDesign des_true = oracle_design(build_basis(BasisKind::tensor_poly, 1, 3), 3, t, nu);
      for (int m : {2, 3}) {
        const auto eb = oracle_estimation_bias(t, spec, nu, des_true, m);
        worst_zero = std::max(worst_zero, std::fabs(eb.eb_closed));
        worst_zero = std::max(worst_zero, std::fabs(eb.eb_enumeration) * 1e-2);  // enumeration tol 1e-10
      }
    }
  }
  {  // missing-data design: ghat = g as a product with f-hat away from f
    Rng r2(9091);
    DiscreteTruth t = random_discrete_truth(r2, 5, true);
    const FunctionalSpec spec = spec_for(FunctionalId::MARMean2a);
    // target marginal w distinct from f, with pi scaled to keep the product
    DiscreteTruth fitted = perturb_truth(t, r2, 0.25);
    for (std::size_t g = 0; g < t.n_x(); ++g) {
      const double r = t.x_prob[static_cast<Eigen::Index>(g)] / fitted.x_prob[static_cast<Eigen::Index>(g)];
      // set P(A=1|x) under the fitted law to pi * r by rebalancing the A-mass
      double pi_true = 0.0;
      for (const auto& a : t.cond[g]) pi_true += a.a > 0.5 ? a.prob : 0.0;
      double pi_target = std::min(0.95, std::max(0.05, pi_true * r));
      double pi_fit = 0.0;
      for (const auto& a : fitted.cond[g]) pi_fit += a.a > 0.5 ? a.prob : 0.0;
      for (auto& a : fitted.cond[g]) a.prob *= (a.a > 0.5) ? pi_target / pi_fit : (1.0 - pi_target) / (1.0 - pi_fit);
      // adjust the marginal so the product varsigma*f matches the truth
      fitted.x_prob[static_cast<Eigen::Index>(g)] =
          t.x_prob[static_cast<Eigen::Index>(g)] * pi_true / pi_target;
    }
    // renormalization would break the product; verify mass instead
    const double mass = fitted.x_prob.sum();
    if (std::fabs(mass - 1.0) > 0.5) return {false, "internal: product design degenerate"};
    fitted.x_prob /= mass;  // compensate by scaling pi back up
    for (std::size_t g = 0; g < t.n_x(); ++g) {
      double pi_fit = 0.0;
      for (const auto& a : fitted.cond[g]) pi_fit += a.a > 0.5 ? a.prob : 0.0;
      const double pi_new = std::min(0.97, pi_fit * mass);
      for (auto& a : fitted.cond[g]) a.prob *= (a.a > 0.5) ? pi_new / pi_fit : (1.0 - pi_new) / (1.0 - pi_fit);
    }
    OracleNuisance nu = oracle_nuisance_from(fitted, spec);
    OracleDesign des = oracle_design(build_basis(BasisKind::tensor_poly, 1, 3), 3, fitted, nu);
    // confirm the product matches before asserting the zero
    double prod_gap = 0.0;
    for (std::size_t g = 0; g < t.n_x(); ++g) {
      const double ghat = fitted.varsigma(spec, g) * fitted.x_prob[static_cast<Eigen::Index>(g)];
      const double gtrue = t.varsigma(spec, g) * t.x_prob[static_cast<Eigen::Index>(g)];
      prod_gap = std::max(prod_gap, std::fabs(ghat - gtrue));
    }
    if (prod_gap < 1e-12) {
      for (int m : {2, 3}) {
        const auto eb = oracle_estimation_bias(t, spec, nu, des, m);
        worst_zero = std::max(worst_zero, std::fabs(eb.eb_closed));
      }
    } else {
      return {false, "internal: fitted product failed to match g (gap " + fmt(prod_gap) + ")"};
    }
  }
  const bool pass = worst_identity <= 1e-10 && worst_zero <= 1e-12;
  return {pass, "identity gap " + fmt(worst_identity) + " (tol 1e-10); robustness zeroes " + fmt(worst_zero) +
                    " (tol 1e-12)"};
}

// ---------------------------------------------------------------------------
// 4. multi-robustness of the modified estimator

Outcome criterion4() {
  Rng rng(404);
  double worst = 0.0;
  double base_bias = 0.0;
  for (int rep = 0; rep < 5; ++rep) {
    DiscreteTruth t = random_discrete_truth(rng, 5, true);
    DiscreteTruth wrong = perturb_truth(t, rng, 0.35);
    const FunctionalSpec spec = spec_for(FunctionalId::ExpCondCov1b);
    OracleNuisance nu = oracle_nuisance_from(wrong, spec);
    OracleDesign des = oracle_design(build_basis(BasisKind::tensor_poly, 1, 3), 3, wrong, nu);
    const auto tb = oracle_truncation_bias(t, spec, nu, des);
    const TruthMoments tm = truth_moments(t, spec, nu, des);
    const double e_mod = expected_psi_mod(t, spec, nu, des, {tm.gram}, 3);
    worst = std::max(worst, std::fabs(e_mod - tb.psi_tilde_k));
    base_bias = std::max(base_bias, std::fabs(oracle_estimation_bias(t, spec, nu, des, 3).eb_closed));
  }
  const bool pass = worst <= 1e-10 && base_bias > 1e-8;
  return {pass, "max |E[psi_mod] - psi_tilde| = " + fmt(worst) + " (tol 1e-10), unmodified bias " + fmt(base_bias)};
}

// ---------------------------------------------------------------------------
// 5. engine oracle equivalence

Outcome criterion5() {
  Rng rng(505);
  double worst = 0.0;
  for (int rep = 0; rep < 200; ++rep) {
    const int m = 2 + static_cast<int>(rng.next_below(3));
    const int n = m + 2 + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(12 - m - 1)));
    ChainKernel ck;
    std::vector<long> dims(static_cast<std::size_t>(m - 1));
    for (auto& d : dims) d = 1 + static_cast<long>(rng.next_below(4));
    ck.head.resize(n, dims.front());
    ck.tail.resize(n, dims.back());
    for (int i = 0; i < n; ++i) {
      for (long q = 0; q < dims.front(); ++q) ck.head(i, q) = 2.0 * rng.next_uniform() - 1.0;
      for (long q = 0; q < dims.back(); ++q) ck.tail(i, q) = 2.0 * rng.next_uniform() - 1.0;
    }
    for (int u = 0; u + 1 < m - 1; ++u) {
      if (rng.next_uniform() < 0.5) {
        RankOneMid r;
        r.c.resize(n);
        r.U.resize(n, dims[static_cast<std::size_t>(u)]);
        r.V.resize(n, dims[static_cast<std::size_t>(u) + 1]);
        for (int i = 0; i < n; ++i) {
          r.c[i] = 2.0 * rng.next_uniform() - 1.0;
          for (long q = 0; q < r.U.cols(); ++q) r.U(i, q) = rng.next_uniform();
          for (long q = 0; q < r.V.cols(); ++q) r.V(i, q) = rng.next_uniform();
        }
        ck.mids.emplace_back(std::move(r));
      } else {
        DenseMid dmid;
        for (int i = 0; i < n; ++i) {
          MatrixXd M(dims[static_cast<std::size_t>(u)], dims[static_cast<std::size_t>(u) + 1]);
          for (long a = 0; a < M.rows(); ++a)
            for (long b = 0; b < M.cols(); ++b) M(a, b) = 2.0 * rng.next_uniform() - 1.0;
          dmid.mats.push_back(std::move(M));
        }
        ck.mids.emplace_back(std::move(dmid));
      }
    }
    const double brute = vn_brute_chain(ck);
    const double fast = vn_chain(ck);
    worst = std::max(worst, std::fabs(fast - brute) / (1.0 + std::fabs(brute)));
  }
  return {worst <= 1e-10, "max relative gap = " + fmt(worst) + " over 200 kernels (tol 1e-10)"};
}

// ---------------------------------------------------------------------------
// 6. degeneracy and cross-order orthogonality

Outcome criterion6() {
  Rng rng(606);
  DiscreteTruth t = random_discrete_truth(rng, 2, true);
  DiscreteTruth wrong = perturb_truth(t, rng, 0.3);
  const FunctionalSpec spec = spec_for(FunctionalId::ExpCondCov1b);
  OracleNuisance nu = oracle_nuisance_from(wrong, spec);
  OracleDesign des = oracle_design(build_basis(BasisKind::tensor_poly, 1, 2), 2, wrong, nu);
  const AtomChains ac = atom_chains(wrong, spec, nu, des);

  double worst_deg = 0.0;
  std::vector<ChainKernel> chains;
  for (int j : {2, 3, 4}) {
    chains.push_back(make_chain(ac.dm, full_ranges(j, 2), (j % 2 == 0) ? -1.0 : 1.0));
    const ChainKernel& ck = chains.back();
    worst_deg = std::max(worst_deg, max_conditional_mean_atoms(
                                        [&ck](const std::vector<int>& idx) { return ck.eval(idx); }, j, ac.prob));
  }
  // first-order kernel: centered plug-in
  VectorXd h(ac.prob.size());
  {
    const auto joint = wrong.joint();
    for (Eigen::Index i = 0; i < h.size(); ++i)
      h[i] = spec.h_value(joint[static_cast<std::size_t>(i)].obs, nu.b_hat(joint[static_cast<std::size_t>(i)].obs.x),
                          nu.p_hat(joint[static_cast<std::size_t>(i)].obs.x));
    double mean = 0.0;
    for (Eigen::Index i = 0; i < h.size(); ++i) mean += ac.prob[i] * h[i];
    h.array() -= mean;
  }
  auto f1 = [&h](const std::vector<int>& idx) { return h[idx[0]]; };
  auto fj = [&chains](int j) {
    const ChainKernel& ck = chains[static_cast<std::size_t>(j - 2)];
    return std::function<double(const std::vector<int>&)>(
        [&ck](const std::vector<int>& idx) { return ck.eval(idx); });
  };
  double worst_cross = 0.0;
  const int n = 9;
  auto cross = [&](const std::function<double(const std::vector<int>&)>& a, int ma,
                   const std::function<double(const std::vector<int>&)>& b, int mb) {
    const double prod = exact_vn_product_mean_atoms(a, ma, b, mb, n, ac.prob);
    const double ea = expected_atom_kernel(a, ma, ac.prob);
    const double eb = expected_atom_kernel(b, mb, ac.prob);
    worst_cross = std::max(worst_cross, std::fabs(prod - ea * eb));
  };
  cross(f1, 1, fj(2), 2);
  cross(f1, 1, fj(3), 3);
  cross(fj(2), 2, fj(3), 3);
  cross(fj(2), 2, fj(4), 4);
  cross(fj(3), 3, fj(4), 4);
  const bool pass = worst_deg <= 1e-10 && worst_cross <= 1e-10;
  return {pass, "max conditional mean " + fmt(worst_deg) + ", max cross-order covariance " + fmt(worst_cross) +
                    " (tol 1e-10)"};
}

// ---------------------------------------------------------------------------
// 7. variance estimator unbiasedness

Outcome criterion7() {
  Rng rng(707);
  double worst = 0.0;
  for (int rep = 0; rep < 3; ++rep) {
    DiscreteTruth t = random_discrete_truth(rng, 3, true);
    DiscreteTruth wrong = perturb_truth(t, rng, 0.3);
    const FunctionalSpec spec = spec_for(FunctionalId::ExpCondCov1b);
    OracleNuisance nu = oracle_nuisance_from(wrong, spec);
    OracleDesign des = oracle_design(build_basis(BasisKind::tensor_poly, 1, 2), 2, wrong, nu);
    const AtomChains ac = atom_chains(wrong, spec, nu, des);
    const int n = 6;
    {  // order one
      VectorXd h(ac.prob.size());
      const auto joint = wrong.joint();
      for (Eigen::Index i = 0; i < h.size(); ++i)
        h[i] = spec.h_value(joint[static_cast<std::size_t>(i)].obs,
                            nu.b_hat(joint[static_cast<std::size_t>(i)].obs.x),
                            nu.p_hat(joint[static_cast<std::size_t>(i)].obs.x));
      auto pair_kernel = [&h](const std::vector<int>& idx) {
        const double d = h[idx[0]] - h[idx[1]];
        return 0.5 * d * d;
      };
      const double lhs = expected_atom_kernel(pair_kernel, 2, ac.prob) / n;
      auto one = [&h](const std::vector<int>& idx) { return h[idx[0]]; };
      const double rhs = exact_vn_product_mean_atoms(one, 1, one, 1, n, ac.prob) -
                         std::pow(expected_atom_kernel(one, 1, ac.prob), 2);
      worst = std::max(worst, std::fabs(lhs - rhs));
    }
    {  // order two
      ChainKernel ck = make_chain(ac.dm, full_ranges(2, 2), -1.0);
      auto f = [&ck](const std::vector<int>& idx) { return ck.eval(idx); };
      auto sym_sq = [&f](const std::vector<int>& idx) {
        const std::vector<int> rev = {idx[1], idx[0]};
        const double sym = 0.5 * (f(idx) + f(rev));
        return sym * sym;
      };
      const double lhs = expected_atom_kernel(sym_sq, 2, ac.prob) / detail::comb(n, 2);
      const double rhs = exact_vn_product_mean_atoms(f, 2, f, 2, n, ac.prob) -
                         std::pow(expected_atom_kernel(f, 2, ac.prob), 2);
      worst = std::max(worst, std::fabs(lhs - rhs));
    }
  }
  return {worst <= 1e-10, "max |E[W2_jj] - var| = " + fmt(worst) + " for j in {1,2} (tol 1e-10)"};
}

// ---------------------------------------------------------------------------
// 8. variance scaling of the order-2 correction

Outcome criterion8() {
  // residual-square design with the center at the truth: the first-order term
  // vanishes identically and the kernel is degenerate under the sampling law,
  // so the replication variance isolates the order-2 correction
  XFn b_true = weierstrass(0.8, 10, 0.5);
  XFn center = b_true;

  auto run_var = [&](int n_est, int k, std::uint64_t seed) {
    NuisanceFit fit;
    fit.b_hat = center;
    fit.p_hat = center;
    fit.varsigma_hat = [](const VectorXd&) { return -1.0; };
    fit.f_hat = [](const VectorXd&) { return 1.0; };
    fit.g_hat = fit.varsigma_hat;
    FunctionalOptions fo;
    fo.b_ref = center;
    const FunctionalSpec spec = make_functional(FunctionalId::BallResidual5, fo);
    BasisSystem basis = build_basis(BasisKind::tensor_haar, 1, k);
    GramTransform id;
    id.T = MatrixXd::Identity(k, k);
    id.identity = true;
    const int reps = 500;
    std::vector<double> vals(static_cast<std::size_t>(reps));
    parallel_for(static_cast<std::size_t>(reps), [&](std::size_t r) {
      Rng rng(seed + r);
      Dataset data;
      for (int i = 0; i < n_est; ++i) {
        Observation o;
        o.x = VectorXd::Constant(1, rng.next_uniform());
        o.y = b_true(o.x) + 0.4 * rng.next_normal();
        o.a = o.y;
        data.obs.push_back(std::move(o));
      }
      data.split.assign(static_cast<std::size_t>(n_est), Split::estimation);
      DesignMatrix dm = build_design(basis, data, spec, fit, k, id);
      ChainKernel ck = make_chain(dm, full_ranges(2, k), -1.0);
      vals[r] = vn_chain(ck);
    });
    return variance_of(vals);
  };

  std::vector<double> ks = {400, 800, 1600};
  std::vector<double> vark;
  for (double k : ks) vark.push_back(run_var(200, static_cast<int>(k), 881));
  const double slope_k = rate_slope(ks, vark).slope;

  std::vector<double> ns = {100, 200, 400};
  std::vector<double> varn;
  for (double n : ns) varn.push_back(run_var(static_cast<int>(n), 1600, 882));
  const double slope_n = rate_slope(ns, varn).slope;

  const bool pass = std::fabs(slope_k - 1.0) <= 0.2 && std::fabs(slope_n + 2.0) <= 0.2;
  return {pass, "slope in k = " + fmt(slope_k) + " (target 1 +- 0.2), slope in n = " + fmt(slope_n) +
                    " (target -2 +- 0.2, fixed k = 1600 > n)"};
}

// ---------------------------------------------------------------------------
// 9. planner closed-form values

Outcome criterion9() {
  std::ostringstream msg;
  bool pass = true;
  auto expect = [&](const std::string& label, double got, double want) {
    const bool ok = std::fabs(got - want) <= 1e-12;
    pass = pass && ok;
    if (!ok) msg << label << " got " << got << " want " << want << "; ";
  };
  expect("threshold(1/8,0)", rates::gd_threshold(0.125, 0.0), 1.0 / 22.0);
  SmoothnessConfig sm_root;
  sm_root.beta_b = sm_root.beta_p = 0.3;
  sm_root.beta_g = 0.1;
  sm_root.d = 1;
  expect("k exponent root", rate_plan(sm_root, 1000).k_opt_exponent, 5.0 / 6.0);
  SmoothnessConfig sm_sub;
  sm_sub.beta_b = sm_sub.beta_p = 0.1;
  sm_sub.beta_g = 0.2;
  sm_sub.d = 1;
  expect("k exponent sub-root", rate_plan(sm_sub, 1000).k_opt_exponent, 2.0 / (1.0 + 0.4));
  SmoothnessConfig sm_pair;
  sm_pair.beta_b = 0.25;
  sm_pair.beta_p = 0.0;
  sm_pair.beta_g = 0.25;
  sm_pair.d = 1;
  RatePlan pair_plan = rate_plan(sm_pair, 1000);
  expect("second-order bias exponent", rates::eb_exponent(sm_pair, 2), 1.0 / 3.0);
  expect("target exponent", pair_plan.target_exponent, 1.0 / 3.0);
  expect("root-estimator bias exponent", pair_plan.tau2_bias_exponent, 1.0 / 6.0);
  return {pass, pass ? "thresholds, exponents, and the worked pair all exact to 1e-12" : msg.str()};
}

// ---------------------------------------------------------------------------
// 10. partition-plan structure

Outcome criterion10() {
  std::ostringstream msg;
  bool pass = true;
  for (int i = 0; i < 20 && pass; ++i) {
    const double bd = 0.06 + 0.008 * i;
    const double delta = (i % 4) * 0.4;
    const double bb = 2.0 * bd / (2.0 + delta);
    SmoothnessConfig sm;
    sm.beta_b = bb;
    sm.beta_p = bb * (1.0 + delta);
    sm.beta_g = rates::gd_threshold(bd, delta) * 1.6 + 0.02;
    sm.d = 1;
    int J_seen = -1;
    for (long n : {1000L, 10000L, 100000L}) {
      PartitionPlan plan = hyperbola_partition(sm, n);
      if (J_seen < 0) J_seen = plan.J;
      if (plan.J != J_seen) {
        pass = false;
        msg << "J varies with n at grid point " << i;
        break;
      }
      for (int s = -1; s <= plan.J; ++s)
        if (std::fabs(plan.exponent.at(2 * s + 1) + plan.exponent.at(2 * s + 2) - plan.hyperbola_exponent) > 1e-12) {
          pass = false;
          msg << "hyperbola pairing broken at grid point " << i;
        }
      long prev = 0;
      for (int s = 0; s <= plan.J + 1; ++s) {
        if (plan.size.at(2 * s) <= prev) {
          pass = false;
          msg << "even interleaving broken at grid point " << i;
        }
        prev = plan.size.at(2 * s);
      }
      if (plan.size.at(2 * plan.J + 1) != plan.size.at(2 * plan.J + 2)) {
        pass = false;
        msg << "equal pair broken at grid point " << i;
      }
      for (int s = plan.J; s >= -1; --s) {
        if (plan.size.at(2 * s + 1) < prev) {
          pass = false;
          msg << "odd interleaving broken at grid point " << i;
        }
        prev = plan.size.at(2 * s + 1);
      }
      // disjoint cover by lattice count and pairwise intersection
      double covered = 0.0;
      std::vector<LatticeRectangle> all = plan.omega;
      all.insert(all.end(), plan.complement.begin(), plan.complement.end());
      for (const auto& r : all) covered += r.lattice_points();
      const double full = static_cast<double>(plan.k_minus1()) * static_cast<double>(plan.k_minus1());
      if (std::fabs(covered - full) > 1e-9 * full) {
        pass = false;
        msg << "cover count broken at grid point " << i;
      }
      for (std::size_t a = 0; a < all.size() && pass; ++a)
        for (std::size_t b = a + 1; b < all.size(); ++b) {
          const long plo = std::max(all[a].p_lo, all[b].p_lo), phi = std::min(all[a].p_hi, all[b].p_hi);
          const long blo = std::max(all[a].b_lo, all[b].b_lo), bhi = std::min(all[a].b_hi, all[b].b_hi);
          if (plo < phi && blo < bhi) {
            pass = false;
            msg << "overlap at grid point " << i;
            break;
          }
        }
    }
  }
  // equality case: J grows like ceil(log n)
  SmoothnessConfig sm_eq;
  sm_eq.beta_b = sm_eq.beta_p = 0.1;
  sm_eq.beta_g = 3.0 / 64.0;
  sm_eq.d = 1;
  for (long n : {1000L, 100000L}) {
    PartitionPlan plan = hyperbola_partition(sm_eq, n);
    if (!plan.equality_case || plan.J != static_cast<int>(std::ceil(std::log(static_cast<double>(n))))) {
      pass = false;
      msg << "equality case J mismatch at n=" << n;
    }
  }
  return {pass, pass ? "interleaving, pairing, disjoint cover, n-free J, and log-growth all hold" : msg.str()};
}

// ---------------------------------------------------------------------------
// scaffolding for rectangle/block criteria

struct DeskSetup {
  DiscreteTruth fitted;
  FunctionalSpec spec;
  Dataset data;
  BasisSystem basis;
  GramTransform transform;
  NuisanceFit fit;
};

DeskSetup desk_setup(std::uint64_t seed, int atoms, int k, std::size_t n, bool all_estimation = false) {
  Rng rng(seed);
  DiscreteTruth truth = random_discrete_truth(rng, atoms, true);
  DiscreteTruth fitted = perturb_truth(truth, rng, 0.3);
  FunctionalSpec spec = spec_for(FunctionalId::ExpCondCov1b);
  OracleNuisance nu = oracle_nuisance_from(fitted, spec);
  BasisSystem basis = build_basis(BasisKind::tensor_poly, 1, k);
  WeightedPoints ref;
  ref.points = fitted.x_atoms;
  ref.weights = fitted.x_prob;
  GramTransform tr = orthonormalize(basis, ref, k);
  Dataset data = generate_data(truth, n, seed + 1);
  if (all_estimation) data.split.assign(n, Split::estimation);
  NuisanceFit fit;
  fit.b_hat = nu.b_hat;
  fit.p_hat = nu.p_hat;
  fit.varsigma_hat = nu.varsigma_hat;
  fit.f_hat = [](const VectorXd&) { return 1.0; };
  fit.g_hat = fit.varsigma_hat;
  return DeskSetup{std::move(fitted), std::move(spec), std::move(data), std::move(basis), std::move(tr),
                   std::move(fit)};
}

// 11. rectangle estimator consistency

Outcome criterion11() {
  DeskSetup s = desk_setup(111, 7, 5, 40);
  EstimatorOptions opt;
  opt.compute_variance = false;
  const DesignMatrix dm = build_design(s.basis, s.data, s.spec, s.fit, 5, s.transform);

  const auto plain3 = estimate_psi_mk(s.data, s.spec, s.fit, s.basis, s.transform, 3, 5, opt);
  const double gap_full = std::fabs(u3_rectangle(dm, {0, 5, 0, 5}) - plain3.order_terms[2]);

  double gap_add = 0.0;
  {
    const double whole = u3_rectangle(dm, {0, 5, 0, 4});
    const double parts = u3_rectangle(dm, {0, 2, 0, 2}) + u3_rectangle(dm, {2, 5, 0, 2}) +
                         u3_rectangle(dm, {0, 3, 2, 4}) + u3_rectangle(dm, {3, 5, 2, 4});
    gap_add = std::fabs(whole - parts);
  }

  PartitionPlan full;
  full.J = 0;
  full.n = static_cast<long>(s.data.count(Split::estimation));
  full.hyperbola_exponent = 2.0;
  full.size = {{-2, 0}, {-1, 5}, {0, 5}, {1, 5}, {2, 5}};
  full.omega = {{0, 5, 0, 5}, {0, 5, 5, 5}, {5, 5, 5, 5}};
  const auto part = estimate_psi3_KJ(s.data, s.spec, s.fit, s.basis, s.transform, full, opt);
  const double gap_collapse = std::fabs(part.psi_hat - plain3.psi_hat);

  const bool pass = gap_full <= 1e-12 && gap_add <= 1e-12 && gap_collapse <= 1e-12;
  return {pass, "full-rectangle gap " + fmt(gap_full) + ", additivity gap " + fmt(gap_add) + ", collapse gap " +
                    fmt(gap_collapse) + " (tol 1e-12)"};
}

// 12. block assembly

Outcome criterion12() {
  DeskSetup s = desk_setup(121, 6, 6, 8, true);
  const DesignMatrix dm = build_design(s.basis, s.data, s.spec, s.fit, 6, s.transform);

  PartitionPlan plan;
  plan.J = 1;
  plan.n = 8;
  plan.hyperbola_exponent = 2.0;
  plan.size = {{-2, 0}, {-1, 6}, {0, 2}, {1, 5}, {2, 3}, {3, 4}, {4, 4}};

  double worst = 0.0;
  int terms = 0;
  for (int v : {4, 5}) {
    const auto chains = eff_order_chains(dm, plan, v, 1.0);
    for (const auto& ck : chains) {
      const double brute = vn_brute_chain(ck);
      worst = std::max(worst, std::fabs(vn_chain(ck) - brute) / (1.0 + std::fabs(brute)));
      ++terms;
    }
  }
  // rectangle pieces of the third-order layer against brute force
  for (const LatticeRectangle& r :
       {LatticeRectangle{0, 6, 0, 2}, LatticeRectangle{0, 2, 2, 6}, LatticeRectangle{2, 3, 2, 3}}) {
    ChainKernel ck = make_chain(dm, {{static_cast<int>(r.p_lo), static_cast<int>(r.p_hi)},
                                     {static_cast<int>(r.b_lo), static_cast<int>(r.b_hi)}},
                                1.0);
    const double brute = vn_brute_chain(ck);
    worst = std::max(worst, std::fabs(u3_rectangle(dm, r) - brute) / (1.0 + std::fabs(brute)));
    ++terms;
  }

  // collapse identity on a larger sample
  DeskSetup s2 = desk_setup(122, 6, 4, 30);
  EstimatorOptions opt;
  opt.compute_variance = false;
  PartitionPlan degenerate;
  degenerate.J = 0;
  degenerate.n = static_cast<long>(s2.data.count(Split::estimation));
  degenerate.hyperbola_exponent = 2.0;
  degenerate.size = {{-2, 0}, {-1, 4}, {0, 4}, {1, 4}, {2, 4}};
  degenerate.omega = {{0, 4, 0, 4}, {0, 4, 4, 4}, {4, 4, 4, 4}};
  SmoothnessConfig sm;
  sm.beta_b = sm.beta_p = 0.1;
  sm.beta_g = 0.06;
  sm.d = 1;
  EffAssembly eff = estimate_psi_eff(s2.data, s2.spec, s2.fit, s2.basis, s2.transform, sm, degenerate, opt);
  const auto plain = estimate_psi_mk(s2.data, s2.spec, s2.fit, s2.basis, s2.transform, eff.m_block, 4, opt);
  const double gap_collapse = std::fabs(eff.report.psi_hat - plain.psi_hat);

  const bool pass = worst <= 1e-10 && gap_collapse <= 1e-11 && eff.m_block >= 4;
  return {pass, std::to_string(terms) + " block terms vs brute, max gap " + fmt(worst) +
                    " (tol 1e-10); collapse gap " + fmt(gap_collapse)};
}

// ---------------------------------------------------------------------------
// 13. coverage studies

struct CoverageResult {
  double coverage = 0.0;
  double se = 0.0;
};

CoverageResult coverage_interval_study(long reps) {
  XFn b_true = weierstrass(0.8, 10, 0.4);
  XFn p_true = random_series_function(0.8, 1, 0.5, 977);
  SmoothTruth truth;
  truth.d = 1;
  truth.b = b_true;
  truth.p = p_true;
  truth.sigma_y = 0.25;
  truth.sigma_a = 0.25;
  truth.cor_ay = 0.5;
  const double psi = 0.5 * 0.25 * 0.25;
  const FunctionalSpec spec = spec_for(FunctionalId::ExpCondCov1b);
  BasisSystem basis = build_basis(BasisKind::tensor_haar, 1, 2048);
  const int k = 2048;  // n^{1.2} = 1737 snapped up to the full dyadic block

  McSummary s = monte_carlo(reps, 77000, [&](std::uint64_t seed, long) {
    Dataset data = truth.generate(1000, seed);  // half for training, 500 for estimation
    NuisanceConfig ncfg;
    ncfg.k_b = 16;
    ncfg.k_p = 16;
    ncfg.k_f_cells = 4;
    NuisanceFit fit = fit_nuisance(spec, data, basis, ncfg);
    auto dm = build_design_haar_block(basis, data, spec, fit, k);
    if (!dm) throw std::runtime_error("coverage study: fast design expected");
    const VectorXd h = plugin_values(data, spec, fit);
    EstimateReport rep;
    rep.m = 2;
    rep.k = k;
    rep.order_terms.push_back(h.mean());
    rep.w2.push_back(w2_first_order(h));
    ChainKernel ck = make_chain(*dm, full_ranges(2, k), -1.0);
    rep.order_terms.push_back(vn_chain(ck));
    VarianceOptions vopt;
    rep.w2.push_back(w2_component({std::move(ck)}, 2, *dm, vopt));
    rep.finalize_sums();
    confidence_interval(rep, 0.10);
    RepRecord rec;
    rec.n = 500;
    rec.k = k;
    rec.m = 2;
    rec.psi_hat = rep.psi_hat;
    rec.truth_psi = psi;
    rec.lo = rep.lo;
    rec.hi = rep.hi;
    rec.covered = rep.lo <= psi && psi <= rep.hi;
    return rec;
  });
  return {s.coverage, s.coverage_se};
}

CoverageResult coverage_ball_study(long reps) {
  XFn b_true = weierstrass(0.8, 10, 0.4);
  SmoothTruth truth;
  truth.d = 1;
  truth.b = b_true;
  truth.p = b_true;
  truth.sigma_y = 0.3;
  BasisSystem basis = build_basis(BasisKind::tensor_haar, 1, 2048);
  const int k = 2048;

  McSummary s = monte_carlo(reps, 88000, [&](std::uint64_t seed, long) {
    Dataset data = truth.generate(1000, seed);
    for (auto& o : data.obs) o.a = o.y;
    std::vector<Observation> tr;
    for (std::size_t i = 0; i < data.obs.size(); ++i)
      if (data.split[i] == Split::training) tr.push_back(data.obs[i]);
    BasisSystem cb = build_basis(BasisKind::tensor_poly, 1, 6);
    XFn center = fit_series_regression(cb, tr, [](const Observation& o) { return o.y; }, 6, 1e6);
    FunctionalOptions fo;
    fo.b_ref = center;
    const FunctionalSpec spec = make_functional(FunctionalId::BallResidual5, fo);
    NuisanceConfig ncfg;
    ncfg.k_b = 16;
    ncfg.k_p = 16;
    ncfg.k_f_cells = 4;
    NuisanceFit fit = fit_nuisance(spec, data, basis, ncfg);
    auto dm = build_design_haar_block(basis, data, spec, fit, k);
    if (!dm) throw std::runtime_error("ball study: fast design expected");
    const VectorXd h = plugin_values(data, spec, fit);
    EstimateReport rep;
    rep.m = 2;
    rep.k = k;
    rep.order_terms.push_back(h.mean());
    rep.w2.push_back(w2_first_order(h));
    ChainKernel ck = make_chain(*dm, full_ranges(2, k), -1.0);
    rep.order_terms.push_back(vn_chain(ck));
    VarianceOptions vopt;
    rep.w2.push_back(w2_component({std::move(ck)}, 2, *dm, vopt));
    rep.finalize_sums();
    ConfidenceBall ball = confidence_ball(data, center, rep, 0.10);
    RepRecord rec;
    rec.n = 500;
    rec.k = k;
    rec.m = 2;
    rec.psi_hat = rep.psi_hat;
    rec.covered = ball.member(b_true);
    return rec;
  });
  return {s.coverage, s.coverage_se};
}

CoverageResult coverage_tau_study(long reps) {
  XFn gamma = [](const VectorXd& x) { return 0.6 + 0.3 * std::sin(2.0 * M_PI * x[0]); };
  XFn m0 = weierstrass(0.8, 10, 0.3);
  XFn pi = [](const VectorXd& x) { return 0.4 + 0.2 * x[0]; };
  // variance-weighted effect: E[gamma pi (1-pi)] / E[pi (1-pi)]
  double num = 0.0, den = 0.0;
  const int g = 8192;
  for (int i = 0; i < g; ++i) {
    const VectorXd x = VectorXd::Constant(1, (i + 0.5) / g);
    const double s2 = pi(x) * (1.0 - pi(x));
    num += gamma(x) * s2 / g;
    den += s2 / g;
  }
  const double tau_true = num / den;

  BasisSystem basis = build_basis(BasisKind::tensor_haar, 1, 256);
  const int k = 256;
  McSummary s = monte_carlo(reps, 99000, [&](std::uint64_t seed, long) {
    Rng rng(seed);
    Dataset data;
    for (int i = 0; i < 1000; ++i) {
      Observation o;
      o.x = VectorXd::Constant(1, rng.next_uniform());
      o.a = rng.next_uniform() < pi(o.x) ? 1.0 : 0.0;
      o.y = m0(o.x) + gamma(o.x) * o.a + 0.3 * rng.next_normal();
      data.obs.push_back(std::move(o));
    }
    SplitConfig sc;
    assign_split(data, sc);

    std::vector<Observation> tr;
    for (std::size_t i = 0; i < data.obs.size(); ++i)
      if (data.split[i] == Split::training) tr.push_back(data.obs[i]);
    BasisSystem cb = build_basis(BasisKind::tensor_poly, 1, 6);
    XFn b_star = fit_series_regression(cb, tr, [](const Observation& o) { return o.y; }, 6, 1e6);
    XFn p_hat = fit_series_regression(cb, tr, [](const Observation& o) { return o.a; }, 6, 1e6);

    NuisanceFit fit;
    fit.p_hat = p_hat;
    fit.b_hat = b_star;  // replaced per grid point
    fit.varsigma_hat = [](const VectorXd&) { return 1.0; };
    HistogramDensity fh = fit_density(tr, 1, 8, 1e-3);
    fit.f_hist = fh;
    fit.f_hat = [fh](const VectorXd& x) { return fh(x); };
    fit.g_hat = fit.f_hat;

    std::vector<double> grid;
    const int pts = 41;
    for (int i = 0; i < pts; ++i) grid.push_back(tau_true - 0.45 + 0.9 * i / (pts - 1.0));
    auto eval_tau = [&](double tau) {
      FunctionalOptions fo;
      fo.tau = tau;
      const FunctionalSpec spec_tau = make_functional(FunctionalId::VarWeightedATE1c, fo);
      NuisanceFit ft = fit;
      ft.b_hat = [b_star, p_hat, tau](const VectorXd& x) { return b_star(x) - tau * p_hat(x); };
      auto dm = build_design_haar_block(basis, data, spec_tau, ft, k);
      if (!dm) throw std::runtime_error("tau study: fast design expected");
      const VectorXd h = plugin_values(data, spec_tau, ft);
      EstimateReport rep;
      rep.m = 2;
      rep.k = k;
      rep.order_terms.push_back(h.mean());
      rep.w2.push_back(w2_first_order(h));
      ChainKernel ck = make_chain(*dm, full_ranges(2, k), -1.0);
      rep.order_terms.push_back(vn_chain(ck));
      VarianceOptions vopt;
      rep.w2.push_back(w2_component({std::move(ck)}, 2, *dm, vopt));
      rep.finalize_sums();
      return std::make_pair(rep.psi_hat, std::sqrt(std::max(1e-300, rep.w2_total)));
    };
    TauConfidenceSet set = invert_ci_for_tau(grid, eval_tau, 0.10);
    RepRecord rec;
    rec.n = 500;
    rec.k = k;
    rec.m = 2;
    bool covered = false;
    for (std::size_t i = 0; i < grid.size(); ++i)
      if (set.accepted[i] && std::fabs(grid[i] - tau_true) <= 0.5 * (grid[1] - grid[0]) + 1e-12) covered = true;
    rec.covered = covered;
    rec.truth_psi = tau_true;
    rec.psi_hat = set.empty ? 0.0 : 0.5 * (set.hull_lo + set.hull_hi);
    return rec;
  });
  return {s.coverage, s.coverage_se};
}

Outcome criterion13() {
  const CoverageResult interval = coverage_interval_study(2000);
  const CoverageResult ball = coverage_ball_study(2000);
  const CoverageResult tau = coverage_tau_study(1000);
  const bool pass = interval.coverage >= 0.87 && ball.coverage >= 0.87 && tau.coverage >= 0.87;
  return {pass, "interval " + fmt(interval.coverage) + " (se " + fmt(interval.se) + "), ball " +
                    fmt(ball.coverage) + " (se " + fmt(ball.se) + "), root inversion " + fmt(tau.coverage) +
                    " (se " + fmt(tau.se) + "); floor 0.87 at nominal 0.90"};
}

// ---------------------------------------------------------------------------
// 14. simple-estimator rate slopes

Outcome criterion14() {
  // residual-variance estimator: MSE slope -8(beta/d)/(4 beta/d + 1) at
  // beta = 0.5 with the recommended subcube count; above the quarter cut the
  // squared error is regression-increment driven, so the noise floor stays
  // subordinate across the n range
  double slope_var = 0.0;
  {
    const double beta = 0.5;
    XFn b = weierstrass(beta, 12, 1.0);
    const double sigma2 = 0.01;
    // n chosen so the recommended cube count n^{2/(1+4beta)} doubles exactly
    // each step, keeping the self-similar regression in phase across scales
    std::vector<double> ns = {181, 512, 1448, 4096};
    std::vector<double> mses;
    for (double nd : ns) {
      const int n = static_cast<int>(nd);
      const long k = static_cast<long>(std::llround(std::pow(nd, 2.0 / (1.0 + 4.0 * beta))));
      const int reps = 3000;
      std::vector<double> errs(static_cast<std::size_t>(reps));
      parallel_for(static_cast<std::size_t>(reps), [&](std::size_t r) {
        Rng rng(140000 + r * 13 + static_cast<std::uint64_t>(n));
        Dataset d;
        for (int i = 0; i < n; ++i) {
          Observation o;
          o.x = VectorXd::Constant(1, rng.next_uniform());
          o.y = b(o.x) + std::sqrt(sigma2) * rng.next_normal();
          d.obs.push_back(std::move(o));
        }
        d.split.assign(static_cast<std::size_t>(n), Split::estimation);
        const double err = subcube_variance(d, k, 555 + r) - sigma2;
        errs[r] = err * err;
      });
      mses.push_back(mean_of(errs));
    }
    slope_var = rate_slope(ns, mses).slope;
  }

  // sorted-difference estimator: bias slope -2 beta at beta = 0.3
  double slope_bias = 0.0;
  {
    const double beta = 0.3;
    XFn b = weierstrass(beta, 14, 0.8);
    XFn p = [b](const VectorXd& x) {
      VectorXd flip = x;
      flip[0] = 1.0 - x[0];
      return 0.7 * b(flip);
    };
    std::vector<double> ns = {250, 1000, 4000};
    std::vector<double> biases;
    for (double nd : ns) {
      const int n = static_cast<int>(nd);
      const int reps = 4000;
      std::vector<double> vals(static_cast<std::size_t>(reps));
      parallel_for(static_cast<std::size_t>(reps), [&](std::size_t r) {
        Rng rng(150000 + r * 17 + static_cast<std::uint64_t>(n));
        Dataset d;
        for (int i = 0; i < n; ++i) {
          Observation o;
          o.x = VectorXd::Constant(1, rng.next_uniform());
          o.y = b(o.x);  // noiseless: the spacing term is the whole mean
          o.a = p(o.x);
          d.obs.push_back(std::move(o));
        }
        d.split.assign(static_cast<std::size_t>(n), Split::estimation);
        vals[r] = difference_estimator(d).value;
      });
      biases.push_back(std::fabs(mean_of(vals)));  // psi = 0 by construction
    }
    slope_bias = rate_slope(ns, biases).slope;
  }

  const double beta_over_d = 0.5;
  const double target_var = -8.0 * beta_over_d / (4.0 * beta_over_d + 1.0);
  const double target_bias = -2.0 * 0.3;
  const bool pass = std::fabs(slope_var - target_var) <= 0.15 && std::fabs(slope_bias - target_bias) <= 0.15;
  return {pass, "subcube MSE slope " + fmt(slope_var) + " (target " + fmt(target_var) +
                    " +- 0.15); difference bias slope " + fmt(slope_bias) + " (target " + fmt(target_bias) +
                    " +- 0.15)"};
}

// ---------------------------------------------------------------------------
// 15. third-order kernel non-uniqueness

Outcome criterion15() {
  double worst_gap = 0.0;
  bool ordering = true;
  double widest_margin = 0.0;
  for (std::uint64_t seed : {151ULL, 152ULL, 153ULL}) {
    Rng rng(seed);
    DiscreteTruth t = random_discrete_truth(rng, 5, true);
    DiscreteTruth wrong = perturb_truth(t, rng, 0.35);
    const FunctionalSpec spec = spec_for(FunctionalId::ExpCondCov1b);
    OracleNuisance nu = oracle_nuisance_from(wrong, spec);
    OracleDesign des = oracle_design(build_basis(BasisKind::tensor_poly, 1, 3), 3, wrong, nu);
    const auto cmp = alt_third_order_bias(t, wrong, spec, nu, des);
    worst_gap = std::max(worst_gap, std::fabs((cmp.bias_star - cmp.bias_standard) - cmp.gap_closed));
    ordering = ordering && std::fabs(cmp.bias_star) > std::fabs(cmp.bias_standard);
    widest_margin = std::max(widest_margin, std::fabs(cmp.bias_star) - std::fabs(cmp.bias_standard));
  }
  const bool pass = worst_gap <= 1e-10 && ordering;
  return {pass, "gap-formula error " + fmt(worst_gap) + " (tol 1e-10); centered-slot kernel bias larger on all "
                    "designs (widest margin " + fmt(widest_margin) + ")"};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> chosen;
  for (int i = 1; i < argc; ++i) chosen.insert(std::atoi(argv[i]));

  struct Entry {
    int id;
    const char* label;
    std::function<Outcome()> fn;
  };
  const std::vector<Entry> entries = {
      {1, "exact double robustness", criterion1},
      {2, "truncation-bias double-projection identity", criterion2},
      {3, "estimation-bias identity and robustness zeroes", criterion3},
      {4, "multi-robustness of the modified estimator", criterion4},
      {5, "chain engine vs brute force", criterion5},
      {6, "degeneracy and cross-order orthogonality", criterion6},
      {7, "variance-component unbiasedness", criterion7},
      {8, "order-2 variance scaling in k and n", criterion8},
      {9, "planner closed-form values", criterion9},
      {10, "partition-plan structure", criterion10},
      {11, "rectangle estimator consistency", criterion11},
      {12, "block-range assembly vs brute force", criterion12},
      {13, "interval, ball, and root-inversion coverage", criterion13},
      {14, "simple-estimator rate slopes", criterion14},
      {15, "third-order kernel non-uniqueness", criterion15},
  };

  bool all_pass = true;
  for (const auto& e : entries) {
    if (!chosen.empty() && !chosen.count(e.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = e.fn();
    } catch (const std::exception& ex) {
      out = {false, std::string("exception: ") + ex.what()};
    }
    const double secs =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count() /
        1000.0;
    all_pass = all_pass && out.pass;
    std::printf("[%s] criterion %2d: %s - %s (%.1fs)\n", out.pass ? "PASS" : "FAIL", e.id, e.label,
                out.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%s\n", all_pass ? "ACCEPTANCE: ALL CRITERIA PASS" : "ACCEPTANCE: FAILURES PRESENT");
  return all_pass ? 0 : 1;
}
