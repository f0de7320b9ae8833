#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "hoif/basis.hpp"
#include "hoif/types.hpp"

namespace hoif {

// A finite weighted point set on [0,1]^d standing in for a reference measure:
// discrete atoms (exact), an empirical sample (weights 1/n), or quadrature
// nodes that integrate basis-function products exactly against a piecewise
// density.
struct WeightedPoints {
  MatrixXd points;   // N x d
  VectorXd weights;  // N

  std::size_t size() const { return static_cast<std::size_t>(points.rows()); }

  double total() const { return weights.sum(); }

  double integrate(const std::function<double(const VectorXd&)>& f) const {
    double s = 0.0;
    for (Eigen::Index i = 0; i < points.rows(); ++i) s += weights[i] * f(points.row(i).transpose());
    return s;
  }
};

inline WeightedPoints empirical_measure(const Dataset& data, Split part) {
  const auto idx = data.indices(part);
  if (idx.empty()) throw std::invalid_argument("empirical_measure: empty split");
  WeightedPoints m;
  m.points.resize(static_cast<Eigen::Index>(idx.size()), data.dim());
  m.weights = VectorXd::Constant(static_cast<Eigen::Index>(idx.size()), 1.0 / static_cast<double>(idx.size()));
  for (std::size_t r = 0; r < idx.size(); ++r) m.points.row(static_cast<Eigen::Index>(r)) = data.obs[idx[r]].x.transpose();
  return m;
}

namespace detail {
// Gauss-Legendre nodes/weights on [0,1], exact for polynomials of degree 2n-1.
inline void gauss_legendre_unit(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  nodes.resize(static_cast<std::size_t>(n));
  weights.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    // Newton iteration from the Chebyshev initial guess, on [-1,1].
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      if (n == 1) { p1 = x; }
      for (int k = 1; k < n; ++k) {
        const double p2 = ((2.0 * k + 1.0) * x * p1 - k * p0) / (k + 1.0);
        p0 = p1;
        p1 = p2;
      }
      const double dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::fabs(dx) < 1e-15) break;
    }
    double p0 = 1.0, p1 = x;
    for (int k = 1; k < n; ++k) {
      const double p2 = ((2.0 * k + 1.0) * x * p1 - k * p0) / (k + 1.0);
      p0 = p1;
      p1 = p2;
    }
    const double dp = n * (x * p1 - p0) / (x * x - 1.0);
    nodes[static_cast<std::size_t>(i)] = 0.5 * (x + 1.0);
    weights[static_cast<std::size_t>(i)] = 1.0 / ((1.0 - x * x) * dp * dp);
  }
}
}  // namespace detail

// Quadrature nodes on a dyadic grid with `cells_per_dim` cells per dimension
// and `nodes_per_dim` Gauss points per cell per dimension, weighted by the
// supplied density. Integrates f * (polynomials of per-dim degree <=
// 2*nodes_per_dim - 1) exactly when the density is constant on the cells.
inline WeightedPoints quadrature_measure(const std::function<double(const VectorXd&)>& density, int d,
                                         int cells_per_dim, int nodes_per_dim) {
  if (cells_per_dim < 1 || nodes_per_dim < 1) throw std::invalid_argument("quadrature_measure: bad grid");
  std::vector<double> gn, gw;
  detail::gauss_legendre_unit(nodes_per_dim, gn, gw);
  const long npts_dim = static_cast<long>(cells_per_dim) * nodes_per_dim;
  double total = 1.0;
  for (int j = 0; j < d; ++j) total *= static_cast<double>(npts_dim);
  if (total > 4e6) throw std::invalid_argument("quadrature_measure: grid too large");
  const long n_total = static_cast<long>(total);

  WeightedPoints m;
  m.points.resize(n_total, d);
  m.weights.resize(n_total);
  const double cell_w = 1.0 / static_cast<double>(cells_per_dim);
  std::vector<long> digit(static_cast<std::size_t>(d), 0);
  for (long r = 0; r < n_total; ++r) {
    long rem = r;
    double w = 1.0;
    VectorXd x(d);
    for (int j = 0; j < d; ++j) {
      const long dj = rem % npts_dim;
      rem /= npts_dim;
      const long cell = dj / nodes_per_dim;
      const long node = dj % nodes_per_dim;
      x[j] = (static_cast<double>(cell) + gn[static_cast<std::size_t>(node)]) * cell_w;
      w *= gw[static_cast<std::size_t>(node)] * cell_w;
    }
    m.points.row(r) = x.transpose();
    m.weights[r] = w * density(x);
  }
  (void)digit;
  return m;
}

// Measure adapted to a basis: resolution fine enough that products of any two
// of the first k basis functions are integrated exactly against a density that
// is piecewise constant on `density_cells_per_dim` dyadic cells.
inline WeightedPoints quadrature_for_basis(const BasisSystem& basis, int k,
                                           const std::function<double(const VectorXd&)>& density,
                                           int density_cells_per_dim) {
  int cells = density_cells_per_dim;
  int nodes = 1;
  if (basis.kind() == BasisKind::tensor_poly) {
    nodes = basis.max_degree(k) + 1;
  } else {
    const int r = basis.piecewise_resolution(k);
    cells = std::max(cells, 1 << r);
  }
  return quadrature_measure(density, basis.dim(), cells, nodes);
}

// Gram matrix of basis functions (k0, k1] x (k0, k1] under the measure,
// optionally with a pointwise weight folded in.
inline MatrixXd gram_matrix(const BasisSystem& basis, const WeightedPoints& m, int k,
                            const std::function<double(const VectorXd&)>& weight = nullptr) {
  MatrixXd g = MatrixXd::Zero(k, k);
  for (Eigen::Index i = 0; i < m.points.rows(); ++i) {
    const VectorXd x = m.points.row(i).transpose();
    const VectorXd phi = basis.eval_first(x, k);
    const double w = m.weights[i] * (weight ? weight(x) : 1.0);
    g.selfadjointView<Eigen::Lower>().rankUpdate(phi, w);
  }
  g.triangularView<Eigen::StrictlyUpper>() = g.transpose();
  return g;
}

}  // namespace hoif
