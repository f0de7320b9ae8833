#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hoif/design.hpp"
#include "hoif/stats.hpp"
#include "hoif/ustat.hpp"

namespace hoif {

// ---------------------------------------------------------------------------
// report

struct EstimateReport {
  double psi_hat = 0.0;
  // order_terms[0] is the first-order statistic (the plug-in display); entry
  // j-1 for j >= 2 is the signed order-j correction. psi_hat is their sum.
  std::vector<double> order_terms;
  std::vector<double> w2;  // variance components, same indexing
  double w2_total = 0.0;
  double lo = 0.0, hi = 0.0, alpha = 0.0;
  int m = 0, k = 0;
  std::string functional;
  std::string basis;
  std::uint64_t variance_seed = 0;
  std::uint64_t variance_tuples = 0;
  std::map<std::string, double> diagnostics;

  void finalize_sums() {
    KahanSum s;
    for (double t : order_terms) s.add(t);
    psi_hat = s.value();
    KahanSum w;
    for (double t : w2) w.add(t);
    w2_total = w.value();
  }
};

struct VarianceOptions {
  int j_exact_max = 2;                      // exact symmetrized squares through this order
  std::uint64_t tuple_budget = 2000000;     // cap on sampled tuples for higher orders
  std::uint64_t seed = 1;
};

// ---------------------------------------------------------------------------
// chain construction from a design

struct IndexRange {
  int lo = 0;  // exclusive
  int hi = 0;  // inclusive
  int width() const { return hi - lo; }
};

// Builds the order-m product kernel with per-position column ranges:
// head eps_i * z_i[r0], mids (qsq_i * z_i[rL] z_i[rR]' - I on shared global
// columns), tail z_i[r_last] * delta_i. `sign` folds into the head.
inline ChainKernel make_chain(const DesignMatrix& dm, const std::vector<IndexRange>& ranges, double sign) {
  const int m = static_cast<int>(ranges.size()) + 1;
  if (m < 2) throw std::invalid_argument("make_chain: order below two");
  for (const auto& r : ranges) {
    if (r.width() <= 0) throw std::invalid_argument("make_chain: empty index range");
    if (r.lo < 0 || r.hi > dm.k()) throw std::invalid_argument("make_chain: index range out of bounds");
  }
  ChainKernel ck;
  const auto& R0 = ranges.front();
  const auto& RL = ranges.back();
  ck.head = sign * dm.eps.asDiagonal() * dm.rows.middleCols(R0.lo, R0.width());
  ck.tail = dm.delta.asDiagonal() * dm.rows.middleCols(RL.lo, RL.width());
  for (std::size_t u = 0; u + 1 < ranges.size(); ++u) {
    RankOneMid mid;
    mid.c = dm.qsq;
    mid.U = dm.rows.middleCols(ranges[u].lo, ranges[u].width());
    mid.V = dm.rows.middleCols(ranges[u + 1].lo, ranges[u + 1].width());
    mid.offL = ranges[u].lo;
    mid.offR = ranges[u + 1].lo;
    ck.mids.emplace_back(std::move(mid));
  }
  return ck;
}

inline std::vector<IndexRange> full_ranges(int order, int k) {
  return std::vector<IndexRange>(static_cast<std::size_t>(order - 1), IndexRange{0, k});
}

// ---------------------------------------------------------------------------
// variance components

namespace detail {

inline double comb(int n, int j) {
  double c = 1.0;
  for (int i = 0; i < j; ++i) c = c * static_cast<double>(n - i) / static_cast<double>(i + 1);
  return c;
}

// V_n of the squared symmetrized kernel for a sum of order-2 chains.
inline double vn_sym_square_2(const std::vector<ChainKernel>& chains, const DesignMatrix& dm) {
  const int n = static_cast<int>(dm.n());
  KahanSum acc;
  if (dm.same_cell_only && chains.size() == 1) {
    // rows live on disjoint cells: cross terms vanish unless cells match
    std::map<long, std::vector<int>> buckets;
    for (int i = 0; i < n; ++i) buckets[dm.cell[static_cast<std::size_t>(i)]].push_back(i);
    const auto& ck = chains.front();
    for (const auto& [cell, members] : buckets) {
      for (std::size_t a = 0; a < members.size(); ++a)
        for (std::size_t b = 0; b < members.size(); ++b) {
          if (a == b) continue;
          const int i = members[a], j = members[b];
          const double fij = ck.head.row(i).dot(ck.tail.row(j));
          const double fji = ck.head.row(j).dot(ck.tail.row(i));
          const double sym = 0.5 * (fij + fji);
          acc.add(sym * sym);
        }
    }
  } else {
    MatrixXd G = MatrixXd::Zero(n, n);
    for (const auto& ck : chains) G.noalias() += ck.head * ck.tail.transpose();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        const double sym = 0.5 * (G(i, j) + G(j, i));
        acc.add(sym * sym);
      }
  }
  return acc.value() / (static_cast<double>(n) * static_cast<double>(n - 1));
}

inline void permutations_of(int m, std::vector<std::vector<int>>& out) {
  std::vector<int> p(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) p[static_cast<std::size_t>(i)] = i;
  out.clear();
  do {
    out.push_back(p);
  } while (std::next_permutation(p.begin(), p.end()));
}

inline double eval_sum(const std::vector<ChainKernel>& chains, const std::vector<int>& idx) {
  double v = 0.0;
  for (const auto& ck : chains) v += ck.eval(idx);
  return v;
}

// exact V_n[(f^sym)^2] by enumeration over distinct tuples (desk scale)
inline double vn_sym_square_exact(const std::vector<ChainKernel>& chains, int order, int n) {
  std::vector<std::vector<int>> perms;
  permutations_of(order, perms);
  double tuples = 1.0;
  for (int j = 0; j < order; ++j) tuples *= static_cast<double>(n - j);
  if (tuples * static_cast<double>(perms.size()) > 5e7)
    throw std::invalid_argument("variance_hat: exact symmetrized square budget exceeded; lower j_exact_max");
  std::vector<int> idx(static_cast<std::size_t>(order), 0), pidx(static_cast<std::size_t>(order), 0);
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  KahanSum acc;
  std::function<void(int)> rec = [&](int pos) {
    if (pos == order) {
      double sym = 0.0;
      for (const auto& p : perms) {
        for (int q = 0; q < order; ++q) pidx[static_cast<std::size_t>(q)] = idx[static_cast<std::size_t>(p[static_cast<std::size_t>(q)])];
        sym += eval_sum(chains, pidx);
      }
      sym /= static_cast<double>(perms.size());
      acc.add(sym * sym);
      return;
    }
    for (int i = 0; i < n; ++i) {
      if (used[static_cast<std::size_t>(i)]) continue;
      used[static_cast<std::size_t>(i)] = true;
      idx[static_cast<std::size_t>(pos)] = i;
      rec(pos + 1);
      used[static_cast<std::size_t>(i)] = false;
    }
  };
  rec(0);
  return acc.value() / tuples;
}

// unbiased tuple-sampled V_n[(f^sym)^2]
inline double vn_sym_square_sampled(const std::vector<ChainKernel>& chains, int order, int n,
                                    std::uint64_t budget, std::uint64_t seed, std::uint64_t& used_tuples) {
  std::vector<std::vector<int>> perms;
  permutations_of(order, perms);
  double tuples = 1.0;
  for (int j = 0; j < order; ++j) tuples *= static_cast<double>(n - j);
  const std::uint64_t B = static_cast<std::uint64_t>(std::min<double>(static_cast<double>(budget), tuples));
  used_tuples = B;
  Rng rng(seed);
  std::vector<int> idx(static_cast<std::size_t>(order), 0), pidx(static_cast<std::size_t>(order), 0);
  KahanSum acc;
  for (std::uint64_t t = 0; t < B; ++t) {
    // rejection sampling of an ordered distinct tuple
    for (;;) {
      bool ok = true;
      for (int q = 0; q < order; ++q) idx[static_cast<std::size_t>(q)] = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n)));
      for (int a = 0; a < order && ok; ++a)
        for (int b = a + 1; b < order; ++b)
          if (idx[static_cast<std::size_t>(a)] == idx[static_cast<std::size_t>(b)]) {
            ok = false;
            break;
          }
      if (ok) break;
    }
    double sym = 0.0;
    for (const auto& p : perms) {
      for (int q = 0; q < order; ++q) pidx[static_cast<std::size_t>(q)] = idx[static_cast<std::size_t>(p[static_cast<std::size_t>(q)])];
      sym += eval_sum(chains, pidx);
    }
    sym /= static_cast<double>(perms.size());
    acc.add(sym * sym);
  }
  return acc.value() / static_cast<double>(B);
}

}  // namespace detail

// W^2 component for an order-j correction given as a sum of chains:
//   C(n,j)^{-1} * V_n[(symmetrized kernel)^2],
// exact through j_exact_max, tuple-sampled (seed recorded) beyond.
inline double w2_component(const std::vector<ChainKernel>& chains, int order, const DesignMatrix& dm,
                           const VarianceOptions& opt, std::uint64_t* sampled_tuples = nullptr) {
  const int n = static_cast<int>(dm.n());
  if (n < 2 * order) throw std::invalid_argument("variance_hat: need n >= 2j for the order-j component");
  double vn_sq;
  if (order == 2) {
    vn_sq = detail::vn_sym_square_2(chains, dm);
  } else if (order <= opt.j_exact_max) {
    vn_sq = detail::vn_sym_square_exact(chains, order, n);
  } else {
    std::uint64_t used = 0;
    vn_sq = detail::vn_sym_square_sampled(chains, order, n, opt.tuple_budget, opt.seed + static_cast<std::uint64_t>(order), used);
    if (sampled_tuples) *sampled_tuples += used;
  }
  return vn_sq / detail::comb(n, order);
}

// First-order component: the unbiased sample variance of the plug-in kernel
// over n, itself a pairwise U-statistic, divided by n.
inline double w2_first_order(const VectorXd& h) {
  const int n = static_cast<int>(h.size());
  if (n < 2) throw std::invalid_argument("variance_hat: need n >= 2");
  const double mean = h.mean();
  KahanSum s;
  for (int i = 0; i < n; ++i) s.add((h[i] - mean) * (h[i] - mean));
  const double sample_var = s.value() / static_cast<double>(n - 1);
  return sample_var / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// intervals

enum class IntervalMode { plain, inflated, bias_corrected };

// Two-sided normal interval psi_hat +/- z_{alpha/2} * W; the bias-corrected
// mode widens by c_bias * sqrt(max(1, (k/n)^{m-1}) / n) with a user constant.
inline void confidence_interval(EstimateReport& rep, double alpha, IntervalMode mode = IntervalMode::plain,
                                double c_bias = 0.0, int n_est = 0) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("confidence_interval: alpha outside (0,1)");
  const double z = normal_upper_quantile(alpha / 2.0);
  double half = z * std::sqrt(std::max(0.0, rep.w2_total));
  if (mode == IntervalMode::bias_corrected) {
    if (n_est <= 0) throw std::invalid_argument("confidence_interval: bias-corrected mode needs the sample size");
    const double ratio = static_cast<double>(rep.k) / static_cast<double>(n_est);
    const double scale = std::max(1.0, std::pow(ratio, rep.m - 1)) / static_cast<double>(n_est);
    half += c_bias * std::sqrt(scale);
  }
  rep.alpha = alpha;
  rep.lo = rep.psi_hat - half;
  rep.hi = rep.psi_hat + half;
}

// ---------------------------------------------------------------------------
// the order-m estimator

struct EstimatorOptions {
  VarianceOptions variance;
  double alpha = 0.05;
  IntervalMode interval_mode = IntervalMode::plain;
  double c_bias = 0.0;
  bool compute_variance = true;
};

inline VectorXd plugin_values(const Dataset& data, const FunctionalSpec& spec, const NuisanceFit& fit) {
  const auto idx = data.indices(Split::estimation);
  VectorXd h(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const Observation& o = data.obs[idx[r]];
    h[static_cast<Eigen::Index>(r)] = spec.h_value(o, fit.b_hat(o.x), fit.p_hat(o.x));
  }
  return h;
}

// psi_hat_{m,k}: the plug-in display plus alternating distinct-index chain
// corrections of orders 2..m, all over the estimation split.
inline EstimateReport estimate_psi_mk(const Dataset& data, const FunctionalSpec& spec, const NuisanceFit& fit,
                                      const BasisSystem& basis, const GramTransform& transform, int m, int k,
                                      const EstimatorOptions& opt = {}) {
  if (m < 1) throw std::invalid_argument("estimate_psi_mk: order must be positive");
  if (k > basis.size()) throw std::invalid_argument("estimate_psi_mk: k exceeds the basis size");
  const DesignMatrix dm = build_design(basis, data, spec, fit, k, transform);
  const VectorXd h = plugin_values(data, spec, fit);
  const int n = static_cast<int>(dm.n());

  EstimateReport rep;
  rep.m = m;
  rep.k = k;
  rep.functional = spec.name;
  rep.variance_seed = opt.variance.seed;
  rep.order_terms.push_back(h.mean());
  if (opt.compute_variance) rep.w2.push_back(w2_first_order(h));

  for (int j = 2; j <= m; ++j) {
    const double sign = (j % 2 == 0) ? -1.0 : 1.0;  // (-1)^{j-1}
    ChainKernel ck = make_chain(dm, full_ranges(j, k), sign);
    rep.order_terms.push_back(vn_chain(ck));
    if (opt.compute_variance)
      rep.w2.push_back(w2_component({std::move(ck)}, j, dm, opt.variance, &rep.variance_tuples));
  }
  rep.diagnostics["n_est"] = static_cast<double>(n);
  rep.finalize_sums();
  confidence_interval(rep, opt.alpha, opt.interval_mode, opt.c_bias, n);
  return rep;
}

// ---------------------------------------------------------------------------
// multi-robust variant

// Gram of the whitened design under an alternative density-side fit:
//   integral of bdot*pdot*g_s(x) * z(x) z(x)' dx
// evaluated on a supplied quadrature/atom support for Lebesgue integration.
inline MatrixXd whitened_gram_under(const BasisSystem& basis, const GramTransform& transform,
                                    const FunctionalSpec& spec, const NuisanceFit& fit, int k, const XFn& g_s,
                                    const WeightedPoints& lebesgue_support) {
  auto [bdot, pdot] = weight_functions(spec, fit);
  MatrixXd g = MatrixXd::Zero(k, k);
  for (Eigen::Index i = 0; i < lebesgue_support.points.rows(); ++i) {
    const VectorXd x = lebesgue_support.points.row(i).transpose();
    const double bd = bdot(x), pd = pdot(x);
    const double qsq = bd * pd * fit.varsigma_hat(x);
    if (!(qsq > 0.0)) throw std::runtime_error("whitened_gram_under: weight sign condition violated");
    const VectorXd z = transform.apply(basis.eval_first(x, k)) / std::sqrt(qsq);
    const double w = lebesgue_support.weights[i] * bd * pd * g_s(x);
    g.selfadjointView<Eigen::Lower>().rankUpdate(z, w);
  }
  g.triangularView<Eigen::StrictlyUpper>() = g.transpose();
  return g;
}

// psi_hat_mod_{m,k}: orders j >= 3 re-whiten chain slots s = 3..j with the
// extra density-side fits, making the estimator (m+1)-fold robust. Equals
// estimate_psi_mk exactly when every extra Gram is the identity.
inline EstimateReport estimate_psi_mk_mod(const Dataset& data, const FunctionalSpec& spec, const NuisanceFit& fit,
                                          const BasisSystem& basis, const GramTransform& transform,
                                          const std::vector<MatrixXd>& extra_grams, int m, int k,
                                          const EstimatorOptions& opt = {}) {
  if (m < 3) throw std::invalid_argument("estimate_psi_mk_mod: needs order m >= 3");
  if (static_cast<int>(extra_grams.size()) != m - 2)
    throw std::invalid_argument("estimate_psi_mk_mod: needs m-2 extra density-side fits");
  const DesignMatrix dm = build_design(basis, data, spec, fit, k, transform);
  const VectorXd h = plugin_values(data, spec, fit);
  const int n = static_cast<int>(dm.n());

  std::vector<Eigen::LDLT<MatrixXd>> inv;
  inv.reserve(extra_grams.size());
  for (const auto& g : extra_grams) {
    inv.emplace_back(g);
    if (inv.back().info() != Eigen::Success)
      throw std::runtime_error("estimate_psi_mk_mod: extra Gram is singular");
  }

  EstimateReport rep;
  rep.m = m;
  rep.k = k;
  rep.functional = spec.name + "_mod";
  rep.variance_seed = opt.variance.seed;
  rep.order_terms.push_back(h.mean());
  if (opt.compute_variance) rep.w2.push_back(w2_first_order(h));

  {
    ChainKernel ck = make_chain(dm, full_ranges(2, k), -1.0);
    rep.order_terms.push_back(vn_chain(ck));
    if (opt.compute_variance)
      rep.w2.push_back(w2_component({std::move(ck)}, 2, dm, opt.variance, &rep.variance_tuples));
  }

  for (int j = 3; j <= m; ++j) {
    const double sign = (j % 2 == 0) ? -1.0 : 1.0;
    ChainKernel ck;
    ck.head = sign * dm.eps.asDiagonal() * dm.rows;
    // slot 2: plain (M_i - I)
    {
      RankOneMid mid;
      mid.c = dm.qsq;
      mid.U = dm.rows;
      mid.V = dm.rows;
      ck.mids.emplace_back(std::move(mid));
    }
    // slots s = 3..j-1: Ehat_s^{-1} (M_i - Ehat_s) = (Ehat_s^{-1} qsq_i z_i) z_i' - I
    for (int s = 3; s <= j - 1; ++s) {
      RankOneMid mid;
      mid.c = dm.qsq;
      mid.U = inv[static_cast<std::size_t>(s - 3)].solve(dm.rows.transpose()).transpose();
      mid.V = dm.rows;
      ck.mids.emplace_back(std::move(mid));
    }
    // tail absorbs Ehat_j^{-1}
    ck.tail = dm.delta.asDiagonal() *
              inv[static_cast<std::size_t>(j - 3)].solve(dm.rows.transpose()).transpose();
    rep.order_terms.push_back(vn_chain(ck));
    if (opt.compute_variance)
      rep.w2.push_back(w2_component({std::move(ck)}, j, dm, opt.variance, &rep.variance_tuples));
  }
  rep.diagnostics["n_est"] = static_cast<double>(n);
  rep.finalize_sums();
  confidence_interval(rep, opt.alpha, opt.interval_mode, opt.c_bias, n);
  return rep;
}

}  // namespace hoif
