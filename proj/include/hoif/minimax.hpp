#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hoif/estimators.hpp"
#include "hoif/types.hpp"

namespace hoif {

// ---------------------------------------------------------------------------
// closed-form exponent arithmetic

namespace rates {

// estimation-bias exponent of the order-m estimator (log factors dropped)
inline double eb_exponent(const SmoothnessConfig& sm, int m) {
  const double xb = sm.beta_b / sm.d, xp = sm.beta_p / sm.d, xg = sm.beta_g / sm.d;
  return (m - 1) * xg / (1.0 + 2.0 * xg) + xb / (1.0 + 2.0 * xb) + xp / (1.0 + 2.0 * xp);
}

inline double target_exponent(const SmoothnessConfig& sm) {
  const double bd = sm.beta() / sm.d;
  return bd > 0.25 ? 0.5 : 4.0 * bd / (4.0 * bd + 1.0);
}

// smoothness threshold on beta_g/d for the optimal sub-root rate (the
// introduction display); delta may be infinite
inline double gd_threshold(double beta_over_d, double delta) {
  const double bd = beta_over_d;
  if (std::isinf(delta)) return 2.0 * bd * (1.0 - 4.0 * bd) / ((1.0 + 4.0 * bd) - 4.0 * bd * (1.0 - 4.0 * bd));
  const double num = bd * 2.0 * (delta + 1.0) * (1.0 - 4.0 * bd);
  const double den = (delta + 2.0) * (1.0 + 4.0 * bd) - 4.0 * bd * (1.0 - 4.0 * bd) * (delta + 1.0);
  return num / den;
}

// the same condition written on 2x/(2x+1) with x = beta_g/d
inline double ratio_threshold(double beta_over_d, double delta) {
  const double bd = beta_over_d;
  const double frac = std::isinf(delta) ? 1.0 : (delta + 1.0) / (delta + 2.0);
  return 4.0 * bd * frac * (1.0 - 4.0 * bd) / (1.0 + 4.0 * bd);
}

}  // namespace rates

enum class RateRegime { root_n, boundary, sub_root_n };

struct RatePlan {
  RateRegime regime = RateRegime::root_n;
  double beta = 0.0, delta = 0.0;
  double k_opt_exponent = 0.0;
  long k_opt = 0;
  int m_opt = 0;
  int m_star = 0;    // order parameter of the conjectured below-threshold rate
  int m_block = 0;   // smallest order whose estimation bias clears the target
  double target_exponent = 0.0;      // n-exponent of the attainable rate
  double tb_exponent = 0.0;          // truncation-bias exponent at k_opt
  double eb_exponent = 0.0;          // estimation-bias exponent at m_opt
  double sd_exponent = 0.0;          // standard-deviation exponent at (m_opt, k_opt)
  double gd_threshold = 0.0;         // required beta_g/d for the sub-root rate
  double ratio_lhs = 0.0, ratio_rhs = 0.0;  // the 2x/(2x+1) form of the same cut
  bool threshold_met = false;
  double below_cut_rate_exponent = 0.0;  // conjectured (log-factor) exponent
  double tau2_bias_exponent = 0.0;       // bias exponent of the plug-in root estimator
  bool g_known = false;
};

inline RatePlan rate_plan(const SmoothnessConfig& sm, long n, bool g_known = false) {
  if (n < 2) throw std::invalid_argument("rate_plan: need n >= 2");
  sm.validate(true);
  const double bd = sm.beta() / sm.d;
  if (!(bd > 0.0)) throw std::invalid_argument("rate_plan: beta must be positive");
  const double xg = sm.beta_g / sm.d;

  RatePlan plan;
  plan.g_known = g_known;
  plan.beta = sm.beta();
  plan.delta = sm.delta();
  plan.regime = bd > 0.25 + 1e-15 ? RateRegime::root_n
                                  : (std::fabs(bd - 0.25) <= 1e-15 ? RateRegime::boundary : RateRegime::sub_root_n);
  plan.target_exponent = rates::target_exponent(sm);
  plan.k_opt_exponent = (plan.regime == RateRegime::root_n) ? 1.0 / (4.0 * bd) : 2.0 / (1.0 + 4.0 * bd);
  plan.k_opt = std::max<long>(1, static_cast<long>(std::llround(std::pow(static_cast<double>(n), plan.k_opt_exponent))));
  plan.tb_exponent = plan.k_opt_exponent * 2.0 * bd;

  if (g_known) {
    plan.m_opt = 2;  // no estimation bias once the density side is known
    plan.eb_exponent = std::numeric_limits<double>::infinity();
  } else {
    int m = 1;
    while (m < 64 && rates::eb_exponent(sm, m) < plan.target_exponent - 1e-12) ++m;
    plan.m_opt = std::max(2, m);
    plan.eb_exponent = rates::eb_exponent(sm, plan.m_opt);
  }
  plan.sd_exponent =
      0.5 * (1.0 - std::max(0.0, (plan.m_opt - 1.0) * (plan.k_opt_exponent - 1.0)));

  // smallest order with estimation bias strictly inside the sub-root target
  {
    const double D = plan.target_exponent - sm.beta_b / (sm.d + 2.0 * sm.beta_b) -
                     sm.beta_p / (sm.d + 2.0 * sm.beta_p);
    plan.m_block = static_cast<int>(std::floor(D * (2.0 + sm.d / sm.beta_g) + 1.0)) + 1;
  }

  plan.gd_threshold = rates::gd_threshold(bd, plan.delta);
  plan.ratio_lhs = 2.0 * xg / (2.0 * xg + 1.0);
  plan.ratio_rhs = rates::ratio_threshold(bd, plan.delta);
  plan.threshold_met = xg > plan.gd_threshold - 1e-15;

  // conjectured rate below the cut (reported only, never asserted attained)
  {
    const double inner = bd * (4.0 * bd + (1.0 - 4.0 * bd) * (1.0 + 2.0 * xg) / xg);
    // tolerance keeps exact rational boundary cases on the floor side
    plan.m_star = static_cast<int>(std::ceil(std::sqrt(std::max(0.0, inner)) - (1.0 + 2.0 * bd) - 1e-9));
    const double mstar = static_cast<double>(plan.m_star);
    plan.below_cut_rate_exponent = -0.5 + (xg / (1.0 + 2.0 * xg)) * (mstar + 1.0) * (mstar + 1.0) / (2.0 * bd);
  }
  plan.tau2_bias_exponent = (sm.beta_b / sm.d) / (1.0 + 2.0 * sm.beta_b / sm.d);
  return plan;
}

// ---------------------------------------------------------------------------
// the hyperbola partition

struct LatticeRectangle {
  // half-open index ranges (lo, hi] on the p side (first coordinate) and the
  // b side (second coordinate)
  long p_lo = 0, p_hi = 0, b_lo = 0, b_hi = 0;
  bool empty() const { return p_hi <= p_lo || b_hi <= b_lo; }
  double lattice_points() const {
    return static_cast<double>(std::max<long>(0, p_hi - p_lo)) * static_cast<double>(std::max<long>(0, b_hi - b_lo));
  }
};

struct PartitionPlan {
  int J = 0;
  double c_star = 0.0;
  double q = 0.0;
  bool equality_case = false;
  bool swapped = false;  // beta_p < beta_b on input; roles exchanged internally
  long n = 0;
  double hyperbola_exponent = 0.0;  // exponent of the product constant
  // exponents and rounded sizes by label: -2, -1, 0, 1, ..., 2J+2
  std::map<int, double> exponent;
  std::map<int, long> size;
  std::vector<LatticeRectangle> omega;
  std::vector<LatticeRectangle> complement;

  long k_minus1() const { return size.at(-1); }
};

namespace detail {
inline long round_half_down(double x) { return static_cast<long>(std::ceil(x - 0.5)); }
}  // namespace detail

inline PartitionPlan hyperbola_partition(const SmoothnessConfig& sm_in, long n, long k_cap = 0) {
  SmoothnessConfig sm = sm_in;
  bool swapped = false;
  if (sm.beta_p < sm.beta_b) {
    std::swap(sm.beta_p, sm.beta_b);
    swapped = true;
  }
  sm.validate();
  const double bd = sm.beta() / sm.d;
  if (!(bd < 0.25))
    throw std::invalid_argument("hyperbola_partition: the plan applies below the root-n cut (beta/d < 1/4)");
  const double delta = sm.delta();
  const double xg = sm.beta_g / sm.d;

  PartitionPlan plan;
  plan.swapped = swapped;
  plan.n = n;
  plan.hyperbola_exponent = (3.0 + 4.0 * bd) / (1.0 + 4.0 * bd);
  const double target_sum = 0.5 * plan.hyperbola_exponent;

  plan.c_star = (2.0 * xg / (2.0 * xg + 1.0)) * (delta + 2.0) / (4.0 * bd) -
                2.0 * (delta + 2.0) / (4.0 * bd + 1.0) + plan.hyperbola_exponent;
  const double margin = plan.c_star + delta;
  if (margin < -1e-12)
    throw std::invalid_argument("hyperbola_partition: the smoothness cut is strictly violated");
  plan.equality_case = std::fabs(margin) <= 1e-12;

  const double logn = std::log(static_cast<double>(n));
  if (plan.equality_case) {
    plan.J = static_cast<int>(std::ceil(logn));
    plan.q = (target_sum - 1.0) / static_cast<double>(plan.J + 1);
    for (int s = 0; s <= plan.J + 1; ++s)
      plan.exponent[2 * s] = 1.0 + plan.q * static_cast<double>(s);
  } else {
    // smallest J with (1+delta)^{J+1} + c* sum_{l<=J+1} (1+delta)^{l-1} above
    // the endpoint exponent; q <= c* then pins k_{2J+2} exactly
    int J = 0;
    for (; J < 4096; ++J) {
      double geo = 0.0;
      for (int l = 1; l <= J + 1; ++l) geo += std::pow(1.0 + delta, l - 1);
      if (std::pow(1.0 + delta, J + 1) + plan.c_star * geo > target_sum) break;
    }
    plan.J = J;
    double geo = 0.0;
    for (int l = 1; l <= plan.J + 1; ++l) geo += std::pow(1.0 + delta, l - 1);
    plan.q = (target_sum - std::pow(1.0 + delta, plan.J + 1)) / geo;
    for (int s = 0; s <= plan.J + 1; ++s) {
      double part = 0.0;
      for (int l = 1; l <= s; ++l) part += std::pow(1.0 + delta, l - 1);
      plan.exponent[2 * s] = std::pow(1.0 + delta, s) + plan.q * part;
    }
  }
  // odd labels from the hyperbola pairing; label 2J+1 coincides with 2J+2
  for (int s = -1; s <= plan.J; ++s)
    plan.exponent[2 * s + 1] = plan.hyperbola_exponent - plan.exponent[2 * s + 2];
  plan.exponent[-2] = 0.0;

  // rounded sizes, ties downward, interleaving enforced
  plan.size[-2] = 0;
  std::vector<int> order;  // labels in increasing-size order
  for (int s = 0; s <= plan.J + 1; ++s) order.push_back(2 * s);
  for (int s = plan.J; s >= -1; --s) order.push_back(2 * s + 1);
  long prev = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const int lab = order[i];
    long v = detail::round_half_down(std::pow(static_cast<double>(n), plan.exponent[lab]));
    if (lab == 2 * plan.J + 1) {
      v = plan.size[2 * plan.J + 2];  // forced equality
      plan.size[lab] = v;
      prev = v;
      continue;
    }
    v = std::max(v, prev + 1);
    if (k_cap > 0) v = std::min(v, k_cap);
    plan.size[lab] = v;
    prev = v;
  }

  // assemble the covered region and its complement
  auto sz = [&plan](int lab) { return plan.size.at(lab); };
  for (int s = 0; s <= plan.J; ++s) {
    plan.omega.push_back({sz(2 * s - 2), sz(2 * s - 1), sz(2 * s - 2), sz(2 * s)});
    plan.omega.push_back({sz(2 * s - 2), sz(2 * s), sz(2 * s), sz(2 * s - 1)});
    plan.complement.push_back({sz(2 * s), sz(2 * s - 1), sz(2 * s + 1), sz(2 * s - 1)});
    plan.complement.push_back({sz(2 * s + 1), sz(2 * s - 1), sz(2 * s), sz(2 * s + 1)});
  }
  plan.omega.push_back({sz(2 * plan.J), sz(2 * plan.J + 1), sz(2 * plan.J), sz(2 * plan.J + 1)});
  return plan;
}

// ---------------------------------------------------------------------------
// rectangle and block statistics

// third-order statistic over an index rectangle: head on the p-side range,
// tail on the b-side range, the shared-column identity subtracted where the
// ranges meet on the diagonal
inline double u3_rectangle(const DesignMatrix& dm, const LatticeRectangle& rect, UstatCounters* ctr = nullptr) {
  if (rect.empty()) throw std::invalid_argument("u3_rectangle: empty rectangle");
  const std::vector<IndexRange> ranges = {{static_cast<int>(rect.p_lo), static_cast<int>(rect.p_hi)},
                                          {static_cast<int>(rect.b_lo), static_cast<int>(rect.b_hi)}};
  return vn_chain(make_chain(dm, ranges, 1.0), ctr);
}

// general order-m block statistic with one column range per chain position
inline double um_block(const DesignMatrix& dm, const std::vector<IndexRange>& ranges, UstatCounters* ctr = nullptr) {
  const int m = static_cast<int>(ranges.size()) + 1;
  if (m > 6) throw std::invalid_argument("um_block: orders above 6 are not supported");
  for (const auto& r : ranges)
    if (r.width() <= 0) throw std::invalid_argument("um_block: empty index range");
  return vn_chain(make_chain(dm, ranges, 1.0), ctr);
}

// ---------------------------------------------------------------------------
// the partitioned third-order estimator

inline EstimateReport estimate_psi3_KJ(const Dataset& data, const FunctionalSpec& spec, const NuisanceFit& fit,
                                       const BasisSystem& basis, const GramTransform& transform,
                                       const PartitionPlan& plan, const EstimatorOptions& opt = {}) {
  const int k1 = static_cast<int>(plan.k_minus1());
  if (k1 > basis.size()) throw std::invalid_argument("estimate_psi3_KJ: plan exceeds the basis size");
  const DesignMatrix dm = build_design(basis, data, spec, fit, k1, transform);
  const VectorXd h = plugin_values(data, spec, fit);
  const int n = static_cast<int>(dm.n());

  EstimateReport rep;
  rep.m = 3;
  rep.k = k1;
  rep.functional = spec.name + "_partitioned";
  rep.variance_seed = opt.variance.seed;
  rep.order_terms.push_back(h.mean());
  if (opt.compute_variance) rep.w2.push_back(w2_first_order(h));

  {
    ChainKernel c2 = make_chain(dm, full_ranges(2, k1), -1.0);
    rep.order_terms.push_back(vn_chain(c2));
    if (opt.compute_variance)
      rep.w2.push_back(w2_component({std::move(c2)}, 2, dm, opt.variance, &rep.variance_tuples));
  }

  std::vector<ChainKernel> rect_chains;
  KahanSum third;
  double lattice = 0.0;
  for (const auto& r : plan.omega) {
    if (r.empty()) continue;
    const std::vector<IndexRange> ranges = {{static_cast<int>(r.p_lo), static_cast<int>(r.p_hi)},
                                            {static_cast<int>(r.b_lo), static_cast<int>(r.b_hi)}};
    ChainKernel ck = make_chain(dm, ranges, 1.0);
    third.add(vn_chain(ck));
    rect_chains.push_back(std::move(ck));
    lattice += r.lattice_points();
  }
  rep.order_terms.push_back(third.value());
  if (opt.compute_variance) {
    rep.w2.push_back(rect_chains.empty()
                         ? 0.0
                         : w2_component(rect_chains, 3, dm, opt.variance, &rep.variance_tuples));
  }
  rep.diagnostics["n_est"] = static_cast<double>(n);
  rep.diagnostics["rectangles"] = static_cast<double>(2 * plan.J + 1);
  rep.diagnostics["lattice_points"] = lattice;
  rep.diagnostics["var_order_first"] = static_cast<double>(plan.k_minus1()) / (static_cast<double>(n) * n);
  // each rectangle contributes n^{-8beta/(4beta+d)} = n^{-2(hyper-1)}
  rep.diagnostics["var_order_rects"] =
      (2.0 * plan.J + 1.0) * std::pow(static_cast<double>(plan.n), -2.0 * (plan.hyperbola_exponent - 1.0));
  rep.finalize_sums();
  confidence_interval(rep, opt.alpha, opt.interval_mode, opt.c_bias, n);
  return rep;
}

// ---------------------------------------------------------------------------
// the full block-range assembly

struct EffAssembly {
  EstimateReport report;
  int m_block = 0;
  int terms_evaluated = 0;
};

// Order-v block sums: the base column plus every single-slot elevation, the
// paired elevations along the partition rectangles, and the corner term.
inline std::vector<ChainKernel> eff_order_chains(const DesignMatrix& dm, const PartitionPlan& plan, int v,
                                                 double sign) {
  const int k0 = static_cast<int>(plan.size.at(0));
  const int km1 = static_cast<int>(plan.k_minus1());
  std::vector<ChainKernel> chains;
  auto add = [&](const std::vector<IndexRange>& ranges) {
    for (const auto& r : ranges)
      if (r.width() <= 0) return;  // structurally empty elevation
    chains.push_back(make_chain(dm, ranges, sign));
  };

  // base block and single elevations
  add(std::vector<IndexRange>(static_cast<std::size_t>(v - 1), IndexRange{0, k0}));
  for (int u = 0; u < v - 1; ++u) {
    std::vector<IndexRange> ranges(static_cast<std::size_t>(v - 1), IndexRange{0, k0});
    ranges[static_cast<std::size_t>(u)] = IndexRange{k0, km1};
    add(ranges);
  }
  // paired elevations over the partition rectangles
  for (int s = 1; s <= plan.J; ++s) {
    const int lo = static_cast<int>(plan.size.at(2 * s - 2));
    const int odd = static_cast<int>(plan.size.at(2 * s - 1));
    const int even = static_cast<int>(plan.size.at(2 * s));
    for (int u = 0; u + 1 < v - 1; ++u) {
      std::vector<IndexRange> a(static_cast<std::size_t>(v - 1), IndexRange{0, k0});
      a[static_cast<std::size_t>(u)] = IndexRange{lo, odd};
      a[static_cast<std::size_t>(u) + 1] = IndexRange{lo, even};
      add(a);
      std::vector<IndexRange> b(static_cast<std::size_t>(v - 1), IndexRange{0, k0});
      b[static_cast<std::size_t>(u)] = IndexRange{lo, even};
      b[static_cast<std::size_t>(u) + 1] = IndexRange{even, odd};
      add(b);
    }
  }
  // corner term at the equal pair
  {
    const int lo = static_cast<int>(plan.size.at(2 * plan.J));
    const int hi = static_cast<int>(plan.size.at(2 * plan.J + 1));
    for (int u = 0; u + 1 < v - 1; ++u) {
      std::vector<IndexRange> c(static_cast<std::size_t>(v - 1), IndexRange{0, k0});
      c[static_cast<std::size_t>(u)] = IndexRange{lo, hi};
      c[static_cast<std::size_t>(u) + 1] = IndexRange{lo, hi};
      add(c);
    }
  }
  return chains;
}

inline EffAssembly estimate_psi_eff(const Dataset& data, const FunctionalSpec& spec, const NuisanceFit& fit,
                                    const BasisSystem& basis, const GramTransform& transform,
                                    const SmoothnessConfig& sm, const PartitionPlan& plan,
                                    const EstimatorOptions& opt = {}, int m_cap = 6) {
  RatePlan rp = rate_plan(sm, plan.n);
  EffAssembly out;
  out.m_block = rp.m_block;
  if (out.m_block > m_cap)
    throw std::invalid_argument("estimate_psi_eff: the required block order exceeds the configured ceiling");

  EstimateReport rep = estimate_psi3_KJ(data, spec, fit, basis, transform, plan, opt);
  const DesignMatrix dm = build_design(basis, data, spec, fit, static_cast<int>(plan.k_minus1()), transform);
  for (int v = 4; v <= out.m_block; ++v) {
    const double sign = (v % 2 == 0) ? -1.0 : 1.0;
    auto chains = eff_order_chains(dm, plan, v, sign);
    KahanSum term;
    for (const auto& ck : chains) term.add(vn_chain(ck));
    out.terms_evaluated += static_cast<int>(chains.size());
    rep.order_terms.push_back(term.value());
    if (opt.compute_variance && !chains.empty())
      rep.w2.push_back(w2_component(chains, v, dm, opt.variance, &rep.variance_tuples));
    else if (opt.compute_variance)
      rep.w2.push_back(0.0);
  }
  rep.m = std::max(3, out.m_block);
  rep.functional = spec.name + "_blocked";
  // variance bookkeeping: k_{-1}/n^2 + sum k_{2s} k_{2s-1} / n^3 + k_{2J+1}^2 / n^3
  {
    const double n = static_cast<double>(dm.n());
    double v_order = static_cast<double>(plan.k_minus1()) / (n * n);
    for (int s = 0; s <= plan.J; ++s)
      v_order += static_cast<double>(plan.size.at(2 * s)) * static_cast<double>(plan.size.at(2 * s - 1)) / (n * n * n);
    const double corner = static_cast<double>(plan.size.at(2 * plan.J + 1));
    v_order += corner * corner / (n * n * n);
    rep.diagnostics["var_order_blocks"] = v_order;
  }
  rep.finalize_sums();
  confidence_interval(rep, opt.alpha, opt.interval_mode, opt.c_bias, static_cast<int>(dm.n()));
  out.report = rep;
  return out;
}

}  // namespace hoif
