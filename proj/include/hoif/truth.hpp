#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "hoif/functional.hpp"
#include "hoif/rng.hpp"
#include "hoif/types.hpp"

namespace hoif {

// A fully enumerable law for O = (Y, A, X): finitely many X atoms, each with
// a finite conditional law for (A, Y). Everything an estimator or oracle
// needs -- true nuisances, the target value, exact moments -- is a finite sum.
struct DiscreteTruth {
  MatrixXd x_atoms;  // G x d
  VectorXd x_prob;   // G, sums to one

  struct AYAtom {
    double a = 0.0, y = 0.0, prob = 0.0;
  };
  std::vector<std::vector<AYAtom>> cond;  // conditional law per X atom

  struct JointAtom {
    Observation obs;
    double prob = 0.0;
    std::size_t x_index = 0;
  };

  std::size_t n_x() const { return static_cast<std::size_t>(x_atoms.rows()); }

  void validate() const {
    if (static_cast<std::size_t>(x_prob.size()) != n_x() || cond.size() != n_x())
      throw std::invalid_argument("DiscreteTruth: inconsistent atom tables");
    double tot = 0.0;
    for (std::size_t g = 0; g < n_x(); ++g) {
      double c = 0.0;
      for (const auto& a : cond[g]) c += a.prob;
      if (std::fabs(c - 1.0) > 1e-12) throw std::invalid_argument("DiscreteTruth: conditional law does not sum to one");
      tot += x_prob[static_cast<Eigen::Index>(g)];
    }
    if (std::fabs(tot - 1.0) > 1e-12) throw std::invalid_argument("DiscreteTruth: atom masses do not sum to one");
  }

  std::vector<JointAtom> joint() const {
    std::vector<JointAtom> out;
    for (std::size_t g = 0; g < n_x(); ++g) {
      for (const auto& a : cond[g]) {
        JointAtom j;
        j.obs.x = x_atoms.row(static_cast<Eigen::Index>(g)).transpose();
        j.obs.a = a.a;
        j.obs.y = a.y;
        j.prob = x_prob[static_cast<Eigen::Index>(g)] * a.prob;
        j.x_index = g;
        out.push_back(j);
      }
    }
    return out;
  }

  double cond_mean(const ObsFn& h, std::size_t g) const {
    double s = 0.0;
    Observation o;
    o.x = x_atoms.row(static_cast<Eigen::Index>(g)).transpose();
    for (const auto& a : cond[g]) {
      o.a = a.a;
      o.y = a.y;
      s += a.prob * h(o);
    }
    return s;
  }

  double mean(const ObsFn& h) const {
    double s = 0.0;
    for (std::size_t g = 0; g < n_x(); ++g) s += x_prob[static_cast<Eigen::Index>(g)] * cond_mean(h, g);
    return s;
  }

  // True nuisances via the conditional-moment identities of the H-kernel.
  double varsigma(const FunctionalSpec& spec, std::size_t g) const { return cond_mean(spec.h1, g); }
  double b_true(const FunctionalSpec& spec, std::size_t g) const {
    return -cond_mean(spec.h3, g) / varsigma(spec, g);
  }
  double p_true(const FunctionalSpec& spec, std::size_t g) const {
    return -cond_mean(spec.h2, g) / varsigma(spec, g);
  }
  // g(x) = E[H1|X=x] * mass(x): for a discrete law the "density" slot carries
  // the atom masses.
  double g_weight(const FunctionalSpec& spec, std::size_t g) const {
    return varsigma(spec, g) * x_prob[static_cast<Eigen::Index>(g)];
  }

  // psi = E[-B*P*H1 + H4]
  double psi(const FunctionalSpec& spec) const {
    double s = 0.0;
    for (std::size_t g = 0; g < n_x(); ++g) {
      const double bp = b_true(spec, g) * p_true(spec, g);
      s += x_prob[static_cast<Eigen::Index>(g)] * (-bp * varsigma(spec, g) + cond_mean(spec.h4, g));
    }
    return s;
  }

  // E[h(O) * w(X)] for a per-atom x-weight
  double mean_weighted(const ObsFn& h, const std::function<double(std::size_t)>& w) const {
    double s = 0.0;
    for (std::size_t g = 0; g < n_x(); ++g) s += x_prob[static_cast<Eigen::Index>(g)] * w(g) * cond_mean(h, g);
    return s;
  }
};

// m-ary kernel over observations, for exact enumeration.
using ObsKernel = std::function<double(const std::vector<const Observation*>&)>;

// E[f(O_1, ..., O_m)] over the m-fold product law; equals the mean of the
// distinct-index U-statistic with this kernel by exchangeability.
inline double exact_mean_kernel(const ObsKernel& f, int m, const DiscreteTruth& truth) {
  const auto atoms = truth.joint();
  const std::size_t A = atoms.size();
  double budget = 1.0;
  for (int j = 0; j < m; ++j) budget *= static_cast<double>(A);
  if (budget > 3.4e7) throw std::invalid_argument("exact_mean_kernel: enumeration budget exceeded");

  std::vector<std::size_t> idx(static_cast<std::size_t>(m), 0);
  std::vector<const Observation*> args(static_cast<std::size_t>(m));
  double total = 0.0;
  for (;;) {
    double p = 1.0;
    for (int j = 0; j < m; ++j) {
      p *= atoms[idx[static_cast<std::size_t>(j)]].prob;
      args[static_cast<std::size_t>(j)] = &atoms[idx[static_cast<std::size_t>(j)]].obs;
    }
    total += p * f(args);
    int j = 0;
    for (; j < m; ++j) {
      if (++idx[static_cast<std::size_t>(j)] < A) break;
      idx[static_cast<std::size_t>(j)] = 0;
    }
    if (j == m) break;
  }
  return total;
}

// Largest conditional mean |E[f | all arguments but one]| over positions and
// atom assignments; zero for kernels degenerate under `law`.
inline double max_conditional_mean(const ObsKernel& f, int m, const DiscreteTruth& law) {
  const auto atoms = law.joint();
  const std::size_t A = atoms.size();
  double worst = 0.0;
  std::vector<std::size_t> idx(static_cast<std::size_t>(m), 0);
  std::vector<const Observation*> args(static_cast<std::size_t>(m));
  for (int hold = 0; hold < m; ++hold) {
    std::vector<std::size_t> others;
    for (int j = 0; j < m; ++j)
      if (j != hold) others.push_back(static_cast<std::size_t>(j));
    std::vector<std::size_t> oidx(others.size(), 0);
    for (;;) {
      double s = 0.0;
      for (std::size_t av = 0; av < A; ++av) {
        idx[static_cast<std::size_t>(hold)] = av;
        for (std::size_t t = 0; t < others.size(); ++t) idx[others[t]] = oidx[t];
        for (int j = 0; j < m; ++j) args[static_cast<std::size_t>(j)] = &atoms[idx[static_cast<std::size_t>(j)]].obs;
        s += atoms[av].prob * f(args);
      }
      worst = std::max(worst, std::fabs(s));
      std::size_t j = 0;
      for (; j < others.size(); ++j) {
        if (++oidx[j] < A) break;
        oidx[j] = 0;
      }
      if (j == others.size() || others.empty()) break;
    }
    if (m == 1) break;
  }
  return worst;
}

namespace detail {
// expectation of f(S-slots) * g(T-slots) where equal labels share one draw
inline double pattern_expectation(const ObsKernel& f, int mf, const ObsKernel& g, int mg,
                                  const std::vector<int>& labels, int n_vars,
                                  const std::vector<DiscreteTruth::JointAtom>& atoms) {
  const std::size_t A = atoms.size();
  std::vector<std::size_t> var_idx(static_cast<std::size_t>(n_vars), 0);
  std::vector<const Observation*> fa(static_cast<std::size_t>(mf));
  std::vector<const Observation*> ga(static_cast<std::size_t>(mg));
  double total = 0.0;
  for (;;) {
    double p = 1.0;
    for (int v = 0; v < n_vars; ++v) p *= atoms[var_idx[static_cast<std::size_t>(v)]].prob;
    for (int j = 0; j < mf; ++j) fa[static_cast<std::size_t>(j)] = &atoms[var_idx[static_cast<std::size_t>(labels[static_cast<std::size_t>(j)])]].obs;
    for (int j = 0; j < mg; ++j) ga[static_cast<std::size_t>(j)] = &atoms[var_idx[static_cast<std::size_t>(labels[static_cast<std::size_t>(mf + j)])]].obs;
    total += p * f(fa) * g(ga);
    int v = 0;
    for (; v < n_vars; ++v) {
      if (++var_idx[static_cast<std::size_t>(v)] < A) break;
      var_idx[static_cast<std::size_t>(v)] = 0;
    }
    if (v == n_vars) break;
  }
  return total;
}

inline void distinct_tuples(int n, int m, std::vector<std::vector<int>>& out) {
  std::vector<int> cur;
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  std::function<void()> rec = [&]() {
    if (static_cast<int>(cur.size()) == m) {
      out.push_back(cur);
      return;
    }
    for (int i = 0; i < n; ++i) {
      if (used[static_cast<std::size_t>(i)]) continue;
      used[static_cast<std::size_t>(i)] = true;
      cur.push_back(i);
      rec();
      cur.pop_back();
      used[static_cast<std::size_t>(i)] = false;
    }
  };
  rec();
}
}  // namespace detail

// Exact E[ V_n[f] * V_n[g] ] under the n-fold product of `law`, by summing
// over every pair of ordered distinct index tuples and memoizing the overlap
// pattern. No degeneracy assumptions; this is the independent route used to
// check variance estimators and cross-order orthogonality.
inline double exact_vn_product_mean(const ObsKernel& f, int mf, const ObsKernel& g, int mg, int n,
                                    const DiscreteTruth& law) {
  if (n < mf || n < mg) throw std::invalid_argument("exact_vn_product_mean: n below kernel order");
  const auto atoms = law.joint();
  std::vector<std::vector<int>> tf, tg;
  detail::distinct_tuples(n, mf, tf);
  detail::distinct_tuples(n, mg, tg);
  double budget = static_cast<double>(tf.size()) * static_cast<double>(tg.size());
  if (budget > 4e6) throw std::invalid_argument("exact_vn_product_mean: tuple budget exceeded");

  std::map<std::vector<int>, double> memo;
  double total = 0.0;
  for (const auto& S : tf) {
    for (const auto& T : tg) {
      // canonical overlap pattern: relabel indices by first occurrence
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
        double au = 1.0;
        for (std::size_t q = 0; q < seen.size(); ++q) au *= static_cast<double>(atoms.size());
        if (au > 3.4e7) throw std::invalid_argument("exact_vn_product_mean: atom budget exceeded");
        const double v = detail::pattern_expectation(f, mf, g, mg, labels, static_cast<int>(seen.size()), atoms);
        it = memo.emplace(labels, v).first;
      }
      total += it->second;
    }
  }
  double norm = 1.0;
  for (int j = 0; j < mf; ++j) norm /= static_cast<double>(n - j);
  for (int j = 0; j < mg; ++j) norm /= static_cast<double>(n - j);
  return total * norm;
}

inline double exact_vn_variance(const ObsKernel& f, int m, int n, const DiscreteTruth& law) {
  const double m2 = exact_vn_product_mean(f, m, f, m, n, law);
  const double m1 = exact_mean_kernel(f, m, law);
  return m2 - m1 * m1;
}

inline double exact_vn_covariance(const ObsKernel& f, int mf, const ObsKernel& g, int mg, int n,
                                  const DiscreteTruth& law) {
  const double m2 = exact_vn_product_mean(f, mf, g, mg, n, law);
  return m2 - exact_mean_kernel(f, mf, law) * exact_mean_kernel(g, mg, law);
}

// ---------------------------------------------------------------------------
// sampling

struct SplitConfig {
  // training fraction c* (default half); est_power in (0,1] switches to the
  // "small training sample" split with n_train = ceil(N^{1-est_power})... the
  // efficiency split keeps N - ceil(N^{1-eps}) observations for estimation.
  double train_fraction = 0.5;
  double efficiency_eps = 0.0;  // > 0 enables the N^{1-eps} training split

  std::size_t n_train(std::size_t N) const {
    if (efficiency_eps > 0.0) {
      const double t = std::pow(static_cast<double>(N), 1.0 - efficiency_eps);
      return std::max<std::size_t>(1, std::min(N - 1, static_cast<std::size_t>(std::ceil(t))));
    }
    return std::max<std::size_t>(1, std::min(N - 1, static_cast<std::size_t>(std::ceil(train_fraction * static_cast<double>(N)))));
  }
};

inline void assign_split(Dataset& d, const SplitConfig& cfg) {
  const std::size_t N = d.obs.size();
  const std::size_t ntr = cfg.n_train(N);
  d.split.assign(N, Split::estimation);
  for (std::size_t i = 0; i < ntr; ++i) d.split[i] = Split::training;
}

inline Dataset generate_data(const DiscreteTruth& truth, std::size_t n, std::uint64_t seed,
                             const SplitConfig& split = {}) {
  if (n < 2) throw std::invalid_argument("generate_data: need n >= 2");
  const auto atoms = truth.joint();
  std::vector<double> cum;
  cum.reserve(atoms.size());
  double acc = 0.0;
  for (const auto& a : atoms) {
    acc += a.prob;
    cum.push_back(acc);
  }
  Rng rng(seed);
  Dataset d;
  d.obs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.next_uniform() * acc;
    const std::size_t j = static_cast<std::size_t>(std::lower_bound(cum.begin(), cum.end(), u) - cum.begin());
    d.obs.push_back(atoms[std::min(j, atoms.size() - 1)].obs);
  }
  assign_split(d, split);
  return d;
}

// A smooth sampling design on [0,1]^d with uniform X. The regressions b and p
// are arbitrary functions; A is either Bernoulli(pi(x)) or p(x) plus noise,
// and Y is b(x) plus noise. cor_ay correlates the two noises so conditional-
// covariance functionals have a nonzero target.
struct SmoothTruth {
  int d = 1;
  XFn b;
  XFn p;                 // E[A|X] (also the Bernoulli rate when binary_a)
  bool binary_a = false;
  double sigma_y = 0.25;
  double sigma_a = 0.25;
  double cor_ay = 0.0;

  Dataset generate(std::size_t n, std::uint64_t seed, const SplitConfig& split = {}) const {
    if (n < 2) throw std::invalid_argument("generate_data: need n >= 2");
    Rng rng(seed);
    Dataset out;
    out.obs.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      Observation o;
      o.x.resize(d);
      for (int j = 0; j < d; ++j) o.x[j] = rng.next_uniform();
      const double pb = p ? p(o.x) : 0.0;
      if (binary_a) {
        o.a = rng.next_uniform() < pb ? 1.0 : 0.0;
        o.y = (b ? b(o.x) : 0.0) + sigma_y * rng.next_normal();
      } else {
        const double z1 = rng.next_normal();
        const double z2 = rng.next_normal();
        o.a = pb + sigma_a * z1;
        o.y = (b ? b(o.x) : 0.0) + sigma_y * (cor_ay * z1 + std::sqrt(std::max(0.0, 1.0 - cor_ay * cor_ay)) * z2);
      }
      out.obs.push_back(std::move(o));
    }
    assign_split(out, split);
    return out;
  }
};

// Deterministic Holder-beta test function (a finite Weierstrass sum): exactly
// exponent beta for 0 < beta < 1 as levels grow.
inline XFn weierstrass(double beta, int levels = 12, double scale = 1.0, int dim_index = 0) {
  return [beta, levels, scale, dim_index](const VectorXd& x) {
    double s = 0.0;
    double amp = 1.0;
    double freq = 1.0;
    for (int l = 0; l < levels; ++l) {
      s += amp * std::cos(2.0 * M_PI * freq * x[dim_index]);
      amp *= std::pow(2.0, -beta);
      freq *= 2.0;
    }
    return scale * s;
  };
}

// Random series truth with coefficient envelope C * l^{-(beta/d + 1/2)} and
// seeded signs, a Sobolev-decay stand-in for a Holder-ball draw.
inline XFn random_series_function(double beta, int d, double C, std::uint64_t seed, int terms = 64) {
  std::vector<double> coef(static_cast<std::size_t>(terms));
  Rng rng(seed);
  for (int l = 1; l <= terms; ++l) {
    const double env = C * std::pow(static_cast<double>(l), -(beta / d + 0.5));
    coef[static_cast<std::size_t>(l - 1)] = (rng.next_uniform() < 0.5 ? -1.0 : 1.0) * env;
  }
  return [coef, d](const VectorXd& x) {
    double s = 0.0;
    double arg = 0.0;
    for (int j = 0; j < d; ++j) arg += x[j];
    for (std::size_t l = 0; l < coef.size(); ++l)
      s += coef[l] * std::sqrt(2.0) * std::cos(M_PI * static_cast<double>(l + 1) * arg / d);
    return s;
  };
}

}  // namespace hoif
