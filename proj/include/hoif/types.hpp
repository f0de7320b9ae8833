#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace hoif {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Eigen::VectorXi;

// One data record O = (Y, A, X) with X in the unit cube.
struct Observation {
  double y = 0.0;
  double a = 0.0;
  VectorXd x;  // d coordinates, each in [0,1]
};

enum class Split { training, estimation };

struct Dataset {
  std::vector<Observation> obs;
  std::vector<Split> split;  // one label per observation

  std::size_t size() const { return obs.size(); }
  int dim() const { return obs.empty() ? 0 : static_cast<int>(obs.front().x.size()); }

  std::size_t count(Split s) const {
    std::size_t c = 0;
    for (auto lab : split)
      if (lab == s) ++c;
    return c;
  }

  std::vector<std::size_t> indices(Split s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < split.size(); ++i)
      if (split[i] == s) out.push_back(i);
    return out;
  }

  Dataset subset(Split s) const {
    Dataset d;
    for (std::size_t i = 0; i < obs.size(); ++i) {
      if (split[i] == s) {
        d.obs.push_back(obs[i]);
        d.split.push_back(s);
      }
    }
    return d;
  }

  void validate(bool require_binary_a = false) const {
    if (obs.size() != split.size()) throw std::invalid_argument("Dataset: split labels must cover every observation");
    if (count(Split::estimation) < 1) throw std::invalid_argument("Dataset: estimation sample is empty");
    for (const auto& o : obs) {
      for (int j = 0; j < o.x.size(); ++j)
        if (!(o.x[j] >= 0.0 && o.x[j] <= 1.0)) throw std::invalid_argument("Dataset: covariate outside the unit cube");
      if (require_binary_a && !(o.a == 0.0 || o.a == 1.0))
        throw std::invalid_argument("Dataset: functional requires binary treatment indicator");
    }
  }
};

// Smoothness assumptions for the planner: Holder exponents and radii for the
// regression, weight, and density-side nuisances.
struct SmoothnessConfig {
  double beta_b = 0.0;
  double beta_p = 0.0;
  double beta_g = 0.0;
  double C_b = 1.0, C_p = 1.0, C_g = 1.0;
  int d = 1;

  double beta() const { return 0.5 * (beta_b + beta_p); }

  // |beta_p/beta_b - 1|; infinite when the smaller exponent is zero.
  double delta() const {
    const double lo = std::min(beta_b, beta_p);
    const double hi = std::max(beta_b, beta_p);
    if (lo <= 0.0) return std::numeric_limits<double>::infinity();
    return hi / lo - 1.0;
  }

  void validate(bool planner_only = false) const {
    if (d < 1) throw std::invalid_argument("SmoothnessConfig: dimension must be positive");
    if (beta_g <= 0.0) throw std::invalid_argument("SmoothnessConfig: beta_g must be positive");
    const bool zero_ok = planner_only;
    if (!zero_ok && (beta_b <= 0.0 || beta_p <= 0.0))
      throw std::invalid_argument("SmoothnessConfig: zero exponents are planner-only what-ifs");
    if (beta_b < 0.0 || beta_p < 0.0) throw std::invalid_argument("SmoothnessConfig: negative exponent");
  }
};

}  // namespace hoif
