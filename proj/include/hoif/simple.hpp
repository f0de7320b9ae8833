#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "hoif/rng.hpp"
#include "hoif/types.hpp"

namespace hoif {

// ---------------------------------------------------------------------------
// sorted-pair difference estimator for the expected conditional covariance
// (univariate X): pair consecutive order statistics and average the cross
// products; an odd trailing observation is dropped.

struct DifferenceResult {
  double value = 0.0;
  bool dropped_last = false;
};

inline DifferenceResult difference_estimator(const Dataset& data) {
  if (data.dim() != 1) throw std::invalid_argument("difference_estimator: requires univariate X");
  std::vector<std::size_t> order(data.obs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&data](std::size_t a, std::size_t b) {
    const double xa = data.obs[a].x[0], xb = data.obs[b].x[0];
    return xa < xb || (xa == xb && a < b);  // index breaks ties
  });
  DifferenceResult out;
  std::size_t n = order.size();
  if (n < 2) throw std::invalid_argument("difference_estimator: need two or more observations");
  if (n % 2 == 1) {
    out.dropped_last = true;
    --n;
  }
  KahanSum s;
  for (std::size_t i = 0; i + 1 < n + 1; i += 2) {
    const Observation& a = data.obs[order[i]];
    const Observation& b = data.obs[order[i + 1]];
    s.add(a.y * a.a + b.y * b.a - b.y * a.a - a.y * b.a);  // = (Ya - Yb)(Aa - Ab)
  }
  out.value = s.value() / static_cast<double>(n);
  return out;
}

// ---------------------------------------------------------------------------
// dyadic subcube partition with per-cube occupant lists

struct SubcubeIndex {
  int cells_per_dim = 1;
  int d = 1;
  long n_cells = 1;
  std::map<long, std::vector<std::size_t>> occupants;

  static SubcubeIndex build(const Dataset& data, long k) {
    if (k < 1) throw std::invalid_argument("subcube partition: need k >= 1");
    SubcubeIndex idx;
    idx.d = data.dim();
    idx.cells_per_dim = std::max(1, static_cast<int>(std::llround(std::pow(static_cast<double>(k), 1.0 / idx.d))));
    idx.n_cells = 1;
    for (int j = 0; j < idx.d; ++j) idx.n_cells *= idx.cells_per_dim;
    for (std::size_t i = 0; i < data.obs.size(); ++i) idx.occupants[idx.cell_of(data.obs[i].x)].push_back(i);
    return idx;
  }

  long cell_of(const VectorXd& x) const {
    long c = 0;
    for (int j = d - 1; j >= 0; --j) {
      long cj = static_cast<long>(std::floor(x[j] * cells_per_dim));
      cj = std::min<long>(cells_per_dim - 1, std::max<long>(0, cj));
      c = c * cells_per_dim + cj;
    }
    return c;
  }
};

namespace detail {
// the within-cube pair: the two occupants, or a seeded random pair without
// replacement when the cube holds more
inline bool pick_pair(const std::vector<std::size_t>& members, Rng& rng, std::size_t& i, std::size_t& j) {
  if (members.size() < 2) return false;
  if (members.size() == 2) {
    i = members[0];
    j = members[1];
    return true;
  }
  const std::size_t a = static_cast<std::size_t>(rng.next_below(members.size()));
  std::size_t b = static_cast<std::size_t>(rng.next_below(members.size() - 1));
  if (b >= a) ++b;
  i = members[a];
  j = members[b];
  return true;
}
}  // namespace detail

// homoscedastic residual-variance estimator: average of (Y_i - Y_j)^2 / 2
// over occupied subcubes
inline double subcube_variance(const Dataset& data, long k, std::uint64_t seed) {
  SubcubeIndex idx = SubcubeIndex::build(data, k);
  Rng rng(seed);
  KahanSum s;
  long used = 0;
  for (const auto& [cell, members] : idx.occupants) {
    std::size_t i = 0, j = 0;
    if (!detail::pick_pair(members, rng, i, j)) continue;
    const double dlt = data.obs[i].y - data.obs[j].y;
    s.add(0.5 * dlt * dlt);
    ++used;
  }
  if (used == 0) throw std::runtime_error("subcube_variance: no subcube holds two observations");
  return s.value() / static_cast<double>(used);
}

// treatment-effect root: the tau making the within-cube covariance sum vanish;
// linear in tau, so the root is a ratio of pair sums
inline double subcube_tau(const Dataset& data, long k, std::uint64_t seed) {
  SubcubeIndex idx = SubcubeIndex::build(data, k);
  Rng rng(seed);
  KahanSum num, den;
  long used = 0;
  for (const auto& [cell, members] : idx.occupants) {
    std::size_t i = 0, j = 0;
    if (!detail::pick_pair(members, rng, i, j)) continue;
    const double dy = data.obs[i].y - data.obs[j].y;
    const double da = data.obs[i].a - data.obs[j].a;
    num.add(dy * da);
    den.add(da * da);
    ++used;
  }
  if (used == 0) throw std::runtime_error("subcube_tau: no subcube holds two observations");
  if (den.value() == 0.0) throw std::runtime_error("subcube_tau: no within-cube treatment variation");
  return num.value() / den.value();
}

}  // namespace hoif
