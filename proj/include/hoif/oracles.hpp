#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "hoif/basis.hpp"
#include "hoif/design.hpp"
#include "hoif/estimators.hpp"
#include "hoif/truth.hpp"
#include "hoif/ustat.hpp"

namespace hoif {

// ---------------------------------------------------------------------------
// Desk-scale oracles: everything here is evaluated exactly on discrete laws,
// giving two independent routes (closed form vs enumeration) to the same
// quantity wherever the theory supplies a formula.

// Fitted objects for oracle computations: per-x closures plus the analyst
// weight pair, typically read off a perturbed discrete law.
struct OracleNuisance {
  XFn b_hat, p_hat;
  XFn bdot, pdot;
  XFn varsigma_hat;  // fitted E[H1 | X]
};

// Whitened design z(x) built under a fitted discrete law: basis values,
// Gram-orthonormalized under the fitted X-marginal, scaled by
// {varsigma_hat * bdot * pdot}^{-1/2}.
struct OracleDesign {
  BasisSystem basis;
  GramTransform transform;
  int k = 0;
  XFn inv_qhat;  // (varsigma_hat*bdot*pdot)^{-1/2}

  VectorXd z(const VectorXd& x) const { return transform.apply(basis.eval_first(x, k)) * inv_qhat(x); }
};

inline OracleNuisance oracle_nuisance_from(const DiscreteTruth& fitted_law, const FunctionalSpec& spec) {
  // per-atom lookups over the fitted law's shared atom grid
  auto lookup = [fitted_law](const VectorXd& x) -> std::size_t {
    for (std::size_t g = 0; g < fitted_law.n_x(); ++g)
      if ((fitted_law.x_atoms.row(static_cast<Eigen::Index>(g)).transpose() - x).cwiseAbs().maxCoeff() < 1e-12)
        return g;
    throw std::invalid_argument("oracle nuisance: x is not an atom of the fitted law");
  };
  OracleNuisance nu;
  nu.b_hat = [fitted_law, spec, lookup](const VectorXd& x) { return fitted_law.b_true(spec, lookup(x)); };
  nu.p_hat = [fitted_law, spec, lookup](const VectorXd& x) { return fitted_law.p_true(spec, lookup(x)); };
  nu.varsigma_hat = [fitted_law, spec, lookup](const VectorXd& x) { return fitted_law.varsigma(spec, lookup(x)); };
  nu.bdot = spec.bdot_fixed;
  if (spec.pdot_is_fitted_p) {
    XFn ph = nu.p_hat;
    nu.pdot = ph;
  } else {
    nu.pdot = spec.pdot_fixed;
  }
  return nu;
}

inline OracleDesign oracle_design(const BasisSystem& basis, int k, const DiscreteTruth& fitted_law,
                                  const OracleNuisance& nu, OrthoMode mode = OrthoMode::gram_sqrt_inverse) {
  WeightedPoints ref;
  ref.points = fitted_law.x_atoms;
  ref.weights = fitted_law.x_prob;
  OracleDesign d{basis, orthonormalize(basis, ref, k, mode), k, nullptr};
  XFn bdot = nu.bdot, pdot = nu.pdot, vs = nu.varsigma_hat;
  d.inv_qhat = [bdot, pdot, vs](const VectorXd& x) {
    const double q2 = bdot(x) * pdot(x) * vs(x);
    if (!(q2 > 0.0)) throw std::runtime_error("oracle design: weight sign condition violated");
    return 1.0 / std::sqrt(q2);
  };
  return d;
}

// ---------------------------------------------------------------------------
// atom-level chain data: the estimator kernels evaluated on the joint atoms
// of a law, for exact product-law expectations

struct AtomChains {
  DesignMatrix dm;  // rows/eps/delta/qsq hold per-atom values
  VectorXd prob;
};

inline AtomChains atom_chains(const DiscreteTruth& law, const FunctionalSpec& spec, const OracleNuisance& nu,
                              const OracleDesign& des) {
  const auto atoms = law.joint();
  AtomChains out;
  out.dm.rows.resize(static_cast<Eigen::Index>(atoms.size()), des.k);
  out.dm.eps.resize(static_cast<Eigen::Index>(atoms.size()));
  out.dm.delta.resize(static_cast<Eigen::Index>(atoms.size()));
  out.dm.qsq.resize(static_cast<Eigen::Index>(atoms.size()));
  out.prob.resize(static_cast<Eigen::Index>(atoms.size()));
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    const Observation& o = atoms[i].obs;
    out.dm.rows.row(static_cast<Eigen::Index>(i)) = des.z(o.x).transpose();
    const double bd = nu.bdot(o.x), pd = nu.pdot(o.x);
    const auto r = residuals(spec, o, nu.b_hat(o.x), nu.p_hat(o.x), bd, pd);
    out.dm.eps[static_cast<Eigen::Index>(i)] = r.eps;
    out.dm.delta[static_cast<Eigen::Index>(i)] = r.delta;
    out.dm.qsq[static_cast<Eigen::Index>(i)] = bd * pd * spec.h1(o);
    out.prob[static_cast<Eigen::Index>(i)] = atoms[i].prob;
  }
  return out;
}

// E over the product law of an atom-index kernel
inline double expected_atom_kernel(const std::function<double(const std::vector<int>&)>& f, int m,
                                   const VectorXd& prob) {
  const int A = static_cast<int>(prob.size());
  double budget = 1.0;
  for (int j = 0; j < m; ++j) budget *= static_cast<double>(A);
  if (budget > 3.4e7) throw std::invalid_argument("expected_atom_kernel: enumeration budget exceeded");
  std::vector<int> idx(static_cast<std::size_t>(m), 0);
  KahanSum total;
  for (;;) {
    double p = 1.0;
    for (int j = 0; j < m; ++j) p *= prob[idx[static_cast<std::size_t>(j)]];
    total.add(p * f(idx));
    int j = 0;
    for (; j < m; ++j) {
      if (++idx[static_cast<std::size_t>(j)] < A) break;
      idx[static_cast<std::size_t>(j)] = 0;
    }
    if (j == m) break;
  }
  return total.value();
}

inline double expected_chain(const ChainKernel& ck, const VectorXd& prob) {
  return expected_atom_kernel([&ck](const std::vector<int>& idx) { return ck.eval(idx); }, ck.order(), prob);
}

// max over positions and conditioning assignments of |E[f | others]|
inline double max_conditional_mean_atoms(const std::function<double(const std::vector<int>&)>& f, int m,
                                         const VectorXd& prob) {
  const int A = static_cast<int>(prob.size());
  double worst = 0.0;
  std::vector<int> idx(static_cast<std::size_t>(m), 0);
  for (int hold = 0; hold < m; ++hold) {
    std::vector<int> others;
    for (int j = 0; j < m; ++j)
      if (j != hold) others.push_back(j);
    std::vector<int> oidx(others.size(), 0);
    for (;;) {
      double s = 0.0;
      for (int av = 0; av < A; ++av) {
        idx[static_cast<std::size_t>(hold)] = av;
        for (std::size_t t = 0; t < others.size(); ++t) idx[static_cast<std::size_t>(others[t])] = oidx[t];
        s += prob[av] * f(idx);
      }
      worst = std::max(worst, std::fabs(s));
      std::size_t j = 0;
      for (; j < others.size(); ++j) {
        if (++oidx[j] < A) break;
        oidx[j] = 0;
      }
      if (j == others.size() || others.empty()) break;
    }
  }
  return worst;
}

// Exact E[V_n[f] V_n[g]] for atom-index kernels (overlap-pattern memoization).
inline double exact_vn_product_mean_atoms(const std::function<double(const std::vector<int>&)>& f, int mf,
                                          const std::function<double(const std::vector<int>&)>& g, int mg, int n,
                                          const VectorXd& prob) {
  if (n < mf || n < mg) throw std::invalid_argument("exact_vn_product_mean_atoms: n below kernel order");
  std::vector<std::vector<int>> tf, tg;
  detail::distinct_tuples(n, mf, tf);
  detail::distinct_tuples(n, mg, tg);
  if (static_cast<double>(tf.size()) * static_cast<double>(tg.size()) > 4e6)
    throw std::invalid_argument("exact_vn_product_mean_atoms: tuple budget exceeded");
  const int A = static_cast<int>(prob.size());

  std::map<std::vector<int>, double> memo;
  KahanSum total;
  std::vector<int> fa(static_cast<std::size_t>(mf)), ga(static_cast<std::size_t>(mg));
  for (const auto& S : tf) {
    for (const auto& T : tg) {
      std::vector<int> labels;
      labels.reserve(S.size() + T.size());
      std::map<int, int> seen;
      for (int v : S) {
        auto it = seen.find(v);
        if (it == seen.end()) it = seen.emplace(v, static_cast<int>(seen.size())).first;
        labels.push_back(it->second);
      }
      for (int v : T) {
        auto it = seen.find(v);
        if (it == seen.end()) it = seen.emplace(v, static_cast<int>(seen.size())).first;
        labels.push_back(it->second);
      }
      auto it = memo.find(labels);
      if (it == memo.end()) {
        const int n_vars = static_cast<int>(seen.size());
        double budget = 1.0;
        for (int q = 0; q < n_vars; ++q) budget *= static_cast<double>(A);
        if (budget > 3.4e7) throw std::invalid_argument("exact_vn_product_mean_atoms: atom budget exceeded");
        std::vector<int> var_idx(static_cast<std::size_t>(n_vars), 0);
        KahanSum pat;
        for (;;) {
          double p = 1.0;
          for (int v = 0; v < n_vars; ++v) p *= prob[var_idx[static_cast<std::size_t>(v)]];
          for (int j = 0; j < mf; ++j) fa[static_cast<std::size_t>(j)] = var_idx[static_cast<std::size_t>(labels[static_cast<std::size_t>(j)])];
          for (int j = 0; j < mg; ++j) ga[static_cast<std::size_t>(j)] = var_idx[static_cast<std::size_t>(labels[static_cast<std::size_t>(mf + j)])];
          pat.add(p * f(fa) * g(ga));
          int v = 0;
          for (; v < n_vars; ++v) {
            if (++var_idx[static_cast<std::size_t>(v)] < A) break;
            var_idx[static_cast<std::size_t>(v)] = 0;
          }
          if (v == n_vars) break;
        }
        it = memo.emplace(labels, pat.value()).first;
      }
      total.add(it->second);
    }
  }
  double norm = 1.0;
  for (int j = 0; j < mf; ++j) norm /= static_cast<double>(n - j);
  for (int j = 0; j < mg; ++j) norm /= static_cast<double>(n - j);
  return total.value() * norm;
}

// ---------------------------------------------------------------------------
// moment matrices under the true law

struct TruthMoments {
  MatrixXd gram;   // E[Q^2 z z'] with Q^2 = bdot*pdot*varsigma_true
  VectorXd exp_b;  // E[Q^2 (B - Bhat)/bdot * z]
  VectorXd exp_p;  // E[Q^2 (P - Phat)/pdot * z]
  double e_uv = 0.0;  // E[varsigma_true (B - Bhat)(P - Phat)]
};

inline TruthMoments truth_moments(const DiscreteTruth& truth, const FunctionalSpec& spec, const OracleNuisance& nu,
                                  const OracleDesign& des) {
  TruthMoments tm;
  tm.gram = MatrixXd::Zero(des.k, des.k);
  tm.exp_b = VectorXd::Zero(des.k);
  tm.exp_p = VectorXd::Zero(des.k);
  for (std::size_t g = 0; g < truth.n_x(); ++g) {
    const VectorXd x = truth.x_atoms.row(static_cast<Eigen::Index>(g)).transpose();
    const double w = truth.x_prob[static_cast<Eigen::Index>(g)];
    const double vs = truth.varsigma(spec, g);
    const double bd = nu.bdot(x), pd = nu.pdot(x);
    const double q2 = bd * pd * vs;
    const VectorXd z = des.z(x);
    tm.gram.noalias() += w * q2 * z * z.transpose();
    const double db = truth.b_true(spec, g) - nu.b_hat(x);
    const double dp = truth.p_true(spec, g) - nu.p_hat(x);
    tm.exp_b.noalias() += w * q2 * (db / bd) * z;
    tm.exp_p.noalias() += w * q2 * (dp / pd) * z;
    tm.e_uv += w * vs * db * dp;
  }
  return tm;
}

// ---------------------------------------------------------------------------
// truncation bias

struct TruncationOracle {
  double psi_true = 0.0;
  double psi_tilde_k = 0.0;
  double tb_direct = 0.0;      // psi_tilde_k - psi via the closed-form working
                               // model coefficients
  double tb_projection = 0.0;  // the orthocomplement double-projection value
  VectorXd eta_tilde, alpha_tilde;
};

// Both routes to the truncation bias: the closed-form working-model solution
// (eta, alpha) defining psi_tilde_k, and the product of projections onto the
// orthocomplement of the weighted span.
inline TruncationOracle oracle_truncation_bias(const DiscreteTruth& truth, const FunctionalSpec& spec,
                                               const OracleNuisance& nu, const OracleDesign& des) {
  const TruthMoments tm = truth_moments(truth, spec, nu, des);
  Eigen::LDLT<MatrixXd> G(tm.gram);
  if (G.info() != Eigen::Success) throw std::runtime_error("oracle_truncation_bias: singular weighted Gram");

  TruncationOracle out;
  out.eta_tilde = G.solve(tm.exp_b);
  out.alpha_tilde = G.solve(tm.exp_p);
  out.psi_true = truth.psi(spec);

  KahanSum psi_tilde;
  for (std::size_t g = 0; g < truth.n_x(); ++g) {
    const VectorXd x = truth.x_atoms.row(static_cast<Eigen::Index>(g)).transpose();
    const double w = truth.x_prob[static_cast<Eigen::Index>(g)];
    const VectorXd z = des.z(x);
    const double bt = nu.b_hat(x) + nu.bdot(x) * out.eta_tilde.dot(z);
    const double pt = nu.p_hat(x) + nu.pdot(x) * out.alpha_tilde.dot(z);
    psi_tilde.add(w * (bt * pt * truth.varsigma(spec, g) + bt * truth.cond_mean(spec.h2, g) +
                       pt * truth.cond_mean(spec.h3, g) + truth.cond_mean(spec.h4, g)));
  }
  out.psi_tilde_k = psi_tilde.value();
  out.tb_direct = out.psi_tilde_k - out.psi_true;
  out.tb_projection = tm.e_uv - tm.exp_b.dot(G.solve(tm.exp_p));
  return out;
}

// ---------------------------------------------------------------------------
// estimation bias

struct EstimationOracle {
  double psi_tilde_k = 0.0;
  double eb_closed = 0.0;       // (-1)^{m-1} expP' (G-I)^{m-1} G^{-1} expB
  double eb_enumeration = 0.0;  // E[psi_hat_{m,k}] - psi_tilde_k, product-law enumeration
  double e_psi_hat = 0.0;
};

inline double expected_plugin(const DiscreteTruth& truth, const FunctionalSpec& spec, const OracleNuisance& nu) {
  KahanSum s;
  for (std::size_t g = 0; g < truth.n_x(); ++g) {
    const VectorXd x = truth.x_atoms.row(static_cast<Eigen::Index>(g)).transpose();
    const double w = truth.x_prob[static_cast<Eigen::Index>(g)];
    const double bh = nu.b_hat(x), ph = nu.p_hat(x);
    s.add(w * (bh * ph * truth.varsigma(spec, g) + bh * truth.cond_mean(spec.h2, g) +
               ph * truth.cond_mean(spec.h3, g) + truth.cond_mean(spec.h4, g)));
  }
  return s.value();
}

inline EstimationOracle oracle_estimation_bias(const DiscreteTruth& truth, const FunctionalSpec& spec,
                                               const OracleNuisance& nu, const OracleDesign& des, int m,
                                               double consistency_tol = 1e-8) {
  const TruthMoments tm = truth_moments(truth, spec, nu, des);
  Eigen::LDLT<MatrixXd> G(tm.gram);
  if (G.info() != Eigen::Success) throw std::runtime_error("oracle_estimation_bias: singular weighted Gram");

  EstimationOracle out;
  const MatrixXd gmi = tm.gram - MatrixXd::Identity(des.k, des.k);
  VectorXd v = G.solve(tm.exp_b);
  for (int p = 0; p < m - 1; ++p) v = gmi * v;
  out.eb_closed = ((m - 1) % 2 == 0 ? 1.0 : -1.0) * tm.exp_p.dot(v);

  // enumeration route
  out.psi_tilde_k = oracle_truncation_bias(truth, spec, nu, des).psi_tilde_k;
  const AtomChains ac = atom_chains(truth, spec, nu, des);
  KahanSum e_psi;
  e_psi.add(expected_plugin(truth, spec, nu));
  for (int j = 2; j <= m; ++j) {
    const double sign = (j % 2 == 0) ? -1.0 : 1.0;
    e_psi.add(expected_chain(make_chain(ac.dm, full_ranges(j, des.k), sign), ac.prob));
  }
  out.e_psi_hat = e_psi.value();
  out.eb_enumeration = out.e_psi_hat - out.psi_tilde_k;

  const double scale = 1.0 + std::fabs(out.eb_enumeration);
  if (std::fabs(out.eb_closed - out.eb_enumeration) > consistency_tol * scale)
    throw std::runtime_error("oracle_estimation_bias: closed form and enumeration disagree");
  return out;
}

// Expected value of the multi-robust estimator under the true law, by
// enumeration; extra_grams are the re-whitening matrices of the modified
// orders (identity recovers the plain estimator).
inline double expected_psi_mod(const DiscreteTruth& truth, const FunctionalSpec& spec, const OracleNuisance& nu,
                               const OracleDesign& des, const std::vector<MatrixXd>& extra_grams, int m) {
  if (m < 3 || static_cast<int>(extra_grams.size()) != m - 2)
    throw std::invalid_argument("expected_psi_mod: needs m >= 3 and m-2 extra Grams");
  const AtomChains ac = atom_chains(truth, spec, nu, des);
  std::vector<Eigen::LDLT<MatrixXd>> inv;
  for (const auto& g : extra_grams) inv.emplace_back(g);

  KahanSum e_psi;
  e_psi.add(expected_plugin(truth, spec, nu));
  e_psi.add(expected_chain(make_chain(ac.dm, full_ranges(2, des.k), -1.0), ac.prob));
  for (int j = 3; j <= m; ++j) {
    const double sign = (j % 2 == 0) ? -1.0 : 1.0;
    ChainKernel ck;
    ck.head = sign * ac.dm.eps.asDiagonal() * ac.dm.rows;
    {
      RankOneMid mid;
      mid.c = ac.dm.qsq;
      mid.U = ac.dm.rows;
      mid.V = ac.dm.rows;
      ck.mids.emplace_back(std::move(mid));
    }
    for (int s = 3; s <= j - 1; ++s) {
      RankOneMid mid;
      mid.c = ac.dm.qsq;
      mid.U = inv[static_cast<std::size_t>(s - 3)].solve(ac.dm.rows.transpose()).transpose();
      mid.V = ac.dm.rows;
      ck.mids.emplace_back(std::move(mid));
    }
    ck.tail = ac.dm.delta.asDiagonal() * inv[static_cast<std::size_t>(j - 3)].solve(ac.dm.rows.transpose()).transpose();
    e_psi.add(expected_chain(ck, ac.prob));
  }
  return e_psi.value();
}

// ---------------------------------------------------------------------------
// the two competing third-order kernels (truncated-projection ambiguity)

struct ThirdOrderComparison {
  double bias_standard = 0.0;       // enumeration, chain kernel
  double bias_star = 0.0;           // enumeration, centered-slot kernel
  double bias_standard_closed = 0.0;
  double bias_star_closed = 0.0;
  double gap_closed = 0.0;
};

// Exact means under the true law of the two order-3 kernels that coincide at
// the infeasible limit but differ after truncation; requires H1 identically
// one so the unweighted whitened basis applies.
inline ThirdOrderComparison alt_third_order_bias(const DiscreteTruth& truth, const DiscreteTruth& fitted_law,
                                                 const FunctionalSpec& spec, const OracleNuisance& nu,
                                                 const OracleDesign& des) {
  {
    Observation probe;
    probe.x = truth.x_atoms.row(0).transpose();
    probe.a = 0.0;
    probe.y = 0.0;
    for (std::size_t g = 0; g < truth.n_x(); ++g)
      if (std::fabs(truth.varsigma(spec, g) - 1.0) > 1e-12)
        throw std::invalid_argument("alt_third_order_bias: needs a functional with H1 identically one");
  }
  const AtomChains ac = atom_chains(truth, spec, nu, des);
  // standard chain: eps_b at slot one, centered projector slot, eps_p at slot
  // three; our stored eps/delta pair carries (p-residual, b-residual), and the
  // mean is orientation-free, so reuse the stock chain.
  ChainKernel standard = make_chain(ac.dm, full_ranges(3, des.k), 1.0);

  // star kernel: eps_1 * z1'(z2 - mu_hat) * (z1'z3) * delta_3
  VectorXd mu_hat = VectorXd::Zero(des.k);
  {
    const auto atoms_f = fitted_law.joint();
    for (const auto& a : atoms_f) mu_hat += a.prob * des.z(a.obs.x);
  }
  auto star = [&ac, &mu_hat](const std::vector<int>& idx) {
    const VectorXd z1 = ac.dm.rows.row(idx[0]).transpose();
    const VectorXd z2 = ac.dm.rows.row(idx[1]).transpose();
    const VectorXd z3 = ac.dm.rows.row(idx[2]).transpose();
    return ac.dm.eps[idx[0]] * z1.dot(z2 - mu_hat) * z1.dot(z3) * ac.dm.delta[idx[2]];
  };

  ThirdOrderComparison out;
  out.bias_standard = expected_chain(standard, ac.prob);
  out.bias_star = expected_atom_kernel(star, 3, ac.prob);

  // closed forms from true-law moments
  const int k = des.k;
  MatrixXd gram_true = MatrixXd::Zero(k, k);
  VectorXd e_eps_z = VectorXd::Zero(k), e_delta_z = VectorXd::Zero(k), mu_true = VectorXd::Zero(k);
  MatrixXd m_eps = MatrixXd::Zero(k, k);
  for (Eigen::Index i = 0; i < ac.prob.size(); ++i) {
    const VectorXd z = ac.dm.rows.row(i).transpose();
    const double w = ac.prob[i];
    gram_true.noalias() += w * ac.dm.qsq[i] * z * z.transpose();
    e_eps_z.noalias() += w * ac.dm.eps[i] * z;
    e_delta_z.noalias() += w * ac.dm.delta[i] * z;
    mu_true.noalias() += w * z;
    m_eps.noalias() += w * ac.dm.eps[i] * z * z.transpose();
  }
  out.bias_standard_closed =
      e_eps_z.dot((gram_true - MatrixXd::Identity(k, k)) * e_delta_z);
  out.bias_star_closed = (mu_true - mu_hat).dot(m_eps * e_delta_z);
  out.gap_closed = out.bias_star_closed - out.bias_standard_closed;
  return out;
}

// ---------------------------------------------------------------------------
// random discrete laws for verification suites

inline DiscreteTruth random_discrete_truth(Rng& rng, int n_x_atoms, bool binary_a, int d = 1) {
  DiscreteTruth t;
  t.x_atoms.resize(n_x_atoms, d);
  for (int g = 0; g < n_x_atoms; ++g)
    for (int j = 0; j < d; ++j)
      t.x_atoms(g, j) = (static_cast<double>(g) + 0.2 + 0.6 * rng.next_uniform()) / static_cast<double>(n_x_atoms);
  t.x_prob.resize(n_x_atoms);
  double tot = 0.0;
  for (int g = 0; g < n_x_atoms; ++g) {
    t.x_prob[g] = 0.2 + rng.next_uniform();
    tot += t.x_prob[g];
  }
  t.x_prob /= tot;
  t.cond.resize(static_cast<std::size_t>(n_x_atoms));
  for (int g = 0; g < n_x_atoms; ++g) {
    const double pa = 0.2 + 0.6 * rng.next_uniform();
    const double y0 = -1.0 + 2.0 * rng.next_uniform();
    const double y1 = -1.0 + 2.0 * rng.next_uniform();
    const double py_hi_a0 = 0.2 + 0.6 * rng.next_uniform();
    const double py_hi_a1 = 0.2 + 0.6 * rng.next_uniform();
    const double a0 = binary_a ? 0.0 : -0.5 + rng.next_uniform();
    const double a1 = binary_a ? 1.0 : 0.5 + rng.next_uniform();
    t.cond[static_cast<std::size_t>(g)] = {
        {a0, y0, (1.0 - pa) * (1.0 - py_hi_a0)},
        {a0, y1, (1.0 - pa) * py_hi_a0},
        {a1, y0, pa * (1.0 - py_hi_a1)},
        {a1, y1, pa * py_hi_a1},
    };
  }
  t.validate();
  return t;
}

// Perturbs the conditional laws and the X-marginal, keeping atoms in place:
// a generically misspecified companion playing the fitted law.
inline DiscreteTruth perturb_truth(const DiscreteTruth& base, Rng& rng, double scale) {
  DiscreteTruth t = base;
  double tot = 0.0;
  for (Eigen::Index g = 0; g < t.x_prob.size(); ++g) {
    t.x_prob[g] = std::max(0.02, t.x_prob[g] * (1.0 + scale * (2.0 * rng.next_uniform() - 1.0)));
    tot += t.x_prob[g];
  }
  t.x_prob /= tot;
  for (auto& cl : t.cond) {
    double ctot = 0.0;
    for (auto& a : cl) {
      a.prob = std::max(0.02, a.prob * (1.0 + scale * (2.0 * rng.next_uniform() - 1.0)));
      ctot += a.prob;
    }
    for (auto& a : cl) a.prob /= ctot;
  }
  t.validate();
  return t;
}

}  // namespace hoif
