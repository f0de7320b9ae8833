#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "hoif/basis.hpp"
#include "hoif/functional.hpp"
#include "hoif/measure.hpp"
#include "hoif/nuisance.hpp"
#include "hoif/types.hpp"

namespace hoif {

enum class OrthoMode { gram_sqrt_inverse, backward_gram_schmidt };

// Linear map T applied to raw basis values so the transformed components are
// orthonormal under the fitted reference measure. The backward mode keeps the
// trailing spans: span{T*phi_t, ..., T*phi_k} = span{phi_t, ..., phi_k} for
// every t.
struct GramTransform {
  MatrixXd T;
  OrthoMode mode = OrthoMode::gram_sqrt_inverse;
  bool identity = false;

  VectorXd apply(const VectorXd& phi) const { return identity ? phi : VectorXd(T * phi); }
};

inline GramTransform orthonormalize_gram(const MatrixXd& gram_in, OrthoMode mode) {
  const Eigen::Index k = gram_in.rows();
  // regularization floor: eigenvalues below it are clamped, so clean Grams
  // pass through exactly; genuinely singular references (relative condition
  // beyond 1e12) are rejected rather than smoothed over
  const double floor_ev = 1e-10 * gram_in.trace() / static_cast<double>(k);

  GramTransform out;
  out.mode = mode;
  if ((gram_in - MatrixXd::Identity(k, k)).cwiseAbs().maxCoeff() < 1e-13) {
    out.T = MatrixXd::Identity(k, k);
    out.identity = true;
    return out;
  }
  {
    Eigen::SelfAdjointEigenSolver<MatrixXd> probe(gram_in, Eigen::EigenvaluesOnly);
    const double lo = probe.eigenvalues().minCoeff();
    const double hi = probe.eigenvalues().maxCoeff();
    if (!(lo > hi * 1e-12))
      throw std::runtime_error("orthonormalize: reference Gram matrix is numerically singular");
  }
  if (mode == OrthoMode::gram_sqrt_inverse) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(gram_in);
    VectorXd ev = es.eigenvalues().cwiseMax(floor_ev);
    out.T = es.eigenvectors() * ev.cwiseSqrt().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
  } else {
    // Gram-Schmidt from the last component backwards, via a Cholesky factor of
    // the index-reversed Gram; regularize only if the raw factorization fails.
    MatrixXd rev(k, k);
    for (Eigen::Index i = 0; i < k; ++i)
      for (Eigen::Index j = 0; j < k; ++j) rev(i, j) = gram_in(k - 1 - i, k - 1 - j);
    Eigen::LLT<MatrixXd> llt(rev);
    if (llt.info() != Eigen::Success) {
      rev.diagonal().array() += floor_ev;
      llt.compute(rev);
      if (llt.info() != Eigen::Success)
        throw std::runtime_error("orthonormalize: reference Gram matrix is numerically singular");
    }
    {
      const VectorXd d = MatrixXd(llt.matrixL()).diagonal();
      const double cond_sq = d.maxCoeff() / d.minCoeff();
      if (!(d.minCoeff() > 0.0) || cond_sq * cond_sq > 1e12)
        throw std::runtime_error("orthonormalize: reference Gram matrix is numerically singular");
    }
    MatrixXd Linv = MatrixXd::Identity(k, k);
    llt.matrixL().solveInPlace(Linv);
    out.T.resize(k, k);
    for (Eigen::Index i = 0; i < k; ++i)
      for (Eigen::Index j = 0; j < k; ++j) out.T(i, j) = Linv(k - 1 - i, k - 1 - j);
  }
  return out;
}

inline GramTransform orthonormalize(const BasisSystem& basis, const WeightedPoints& reference, int k,
                                    OrthoMode mode = OrthoMode::gram_sqrt_inverse) {
  return orthonormalize_gram(gram_matrix(basis, reference, k), mode);
}

// Per-sample whitened rows z(x_i) = T*phi(x_i) * {varsigma*bdot*pdot}(x_i)^{-1/2}
// over the estimation split, plus bookkeeping for the residual factors.
struct DesignMatrix {
  MatrixXd rows;      // n_est x k
  VectorXd weight;    // the per-sample scalar folded into rows
  VectorXd eps;       // (H1*phat + H2)*bdot
  VectorXd delta;     // (H1*bhat + H3)*pdot
  VectorXd qsq;       // per-sample (bdot*pdot*H1), the mid-factor scalar
  // Set when rows are supported on disjoint dyadic cells (full Haar father
  // block under a compatible histogram reference): cross-sample inner products
  // vanish unless two samples share a cell.
  bool same_cell_only = false;
  std::vector<long> cell;

  Eigen::Index n() const { return rows.rows(); }
  Eigen::Index k() const { return rows.cols(); }
};

struct DesignOptions {
  OrthoMode mode = OrthoMode::gram_sqrt_inverse;
  double weight_floor = 1e-12;  // guard for the sign condition bdot*pdot*varsigma > 0
};

// Resolve the analyst weight pair for a spec given the fit.
inline std::pair<XFn, XFn> weight_functions(const FunctionalSpec& spec, const NuisanceFit& fit) {
  XFn bdot = spec.bdot_fixed;
  XFn pdot;
  if (spec.pdot_is_fitted_p) {
    auto ph = fit.p_hat;
    pdot = [ph](const VectorXd& x) { return ph(x); };
  } else {
    pdot = spec.pdot_fixed;
  }
  return {bdot, pdot};
}

// Full-father-block shortcut: when k spans a complete Haar tensor block and
// the fitted density is a histogram on a compatible dyadic grid, the Gram
// under f-hat is an orthogonal conjugation of the cell-mass diagonal, so the
// whitened row is just the raw Haar vector rescaled by the cell mass. Rows of
// distinct cells are exactly orthogonal, which downstream variance code
// exploits.
inline std::optional<DesignMatrix> build_design_haar_block(const BasisSystem& basis, const Dataset& data,
                                                           const FunctionalSpec& spec, const NuisanceFit& fit,
                                                           int k, const DesignOptions& opt = {}) {
  if (basis.kind() != BasisKind::tensor_haar || !fit.f_hist) return std::nullopt;
  const int d = basis.dim();
  // k must be a full block 2^{level*d}
  int level = 0;
  long block = 1;
  while (block < k) {
    block <<= d;
    ++level;
  }
  if (block != k) return std::nullopt;
  const int res = 1 << level;  // basis cells per dimension
  const int h = fit.f_hist->cells_per_dim;
  if (h % res != 0 && res % h != 0) return std::nullopt;

  // cell masses at the basis resolution
  const long n_cells = block;
  std::vector<double> mass(static_cast<std::size_t>(n_cells), 0.0);
  {
    const double hist_cell_vol = 1.0 / std::pow(static_cast<double>(h), d);
    if (h % res == 0) {
      // aggregate finer histogram cells into basis cells
      const long hn = static_cast<long>(std::llround(std::pow(static_cast<double>(h), d)));
      for (long c = 0; c < hn; ++c) {
        long rem = c, idx = 0;
        for (int j = 0; j < d; ++j) {
          const long cj = rem % h;
          rem /= h;
          const long bj = cj * res / h;
          idx += bj * static_cast<long>(std::llround(std::pow(static_cast<double>(res), j)));
        }
        mass[static_cast<std::size_t>(idx)] += fit.f_hist->value[static_cast<std::size_t>(c)] * hist_cell_vol;
      }
    } else {
      // histogram is coarser: the density is constant across each basis cell
      const double cell_vol = 1.0 / static_cast<double>(n_cells);
      for (long c = 0; c < n_cells; ++c) {
        VectorXd x(d);
        long rem = c;
        for (int j = 0; j < d; ++j) {
          x[j] = (static_cast<double>(rem % res) + 0.5) / res;
          rem /= res;
        }
        mass[static_cast<std::size_t>(c)] = (*fit.f_hist)(x)*cell_vol;
      }
    }
  }

  const auto idx = data.indices(Split::estimation);
  auto [bdot, pdot] = weight_functions(spec, fit);
  DesignMatrix dm;
  dm.rows.resize(static_cast<Eigen::Index>(idx.size()), k);
  dm.weight.resize(static_cast<Eigen::Index>(idx.size()));
  dm.eps.resize(static_cast<Eigen::Index>(idx.size()));
  dm.delta.resize(static_cast<Eigen::Index>(idx.size()));
  dm.qsq.resize(static_cast<Eigen::Index>(idx.size()));
  dm.same_cell_only = true;
  dm.cell.resize(idx.size());
  const double scale_base = static_cast<double>(n_cells);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const Observation& o = data.obs[idx[r]];
    long cell = 0;
    for (int j = d - 1; j >= 0; --j) {
      long cj = static_cast<long>(std::floor(o.x[j] * res));
      cj = std::min<long>(res - 1, std::max<long>(0, cj));
      cell = cell * res + cj;
    }
    dm.cell[r] = cell;
    const double m = mass[static_cast<std::size_t>(cell)];
    if (!(m > 0.0)) return std::nullopt;  // clipped densities keep mass positive
    const double bd = bdot(o.x);
    const double pd = pdot(o.x);
    const double vs = fit.varsigma_hat(o.x);
    const double qsq_x = bd * pd * vs;
    if (!(qsq_x > opt.weight_floor))
      throw std::runtime_error(
          "build_design: varsigma*bdot*pdot is not positive; the analyst weight pair violates the sign condition");
    const double w = 1.0 / std::sqrt(qsq_x * scale_base * m);
    dm.rows.row(static_cast<Eigen::Index>(r)) = (basis.eval_first(o.x, k) * w).transpose();
    dm.weight[static_cast<Eigen::Index>(r)] = w;
    const auto res_pair = residuals(spec, o, fit.b_hat(o.x), fit.p_hat(o.x), bd, pd);
    dm.eps[static_cast<Eigen::Index>(r)] = res_pair.eps;
    dm.delta[static_cast<Eigen::Index>(r)] = res_pair.delta;
    dm.qsq[static_cast<Eigen::Index>(r)] = bd * pd * spec.h1(o);
  }
  return dm;
}

// Builds the design over the estimation split. `reference` carries the
// training-sample fitted measure used for the Gram; pass the same measure that
// was used to orthonormalize.
inline DesignMatrix build_design(const BasisSystem& basis, const Dataset& data, const FunctionalSpec& spec,
                                 const NuisanceFit& fit, int k, const GramTransform& transform,
                                 const DesignOptions& opt = {}) {
  if (k > basis.size()) throw std::invalid_argument("build_design: k exceeds basis size");
  const auto idx = data.indices(Split::estimation);
  auto [bdot, pdot] = weight_functions(spec, fit);

  DesignMatrix dm;
  dm.rows.resize(static_cast<Eigen::Index>(idx.size()), k);
  dm.weight.resize(static_cast<Eigen::Index>(idx.size()));
  dm.eps.resize(static_cast<Eigen::Index>(idx.size()));
  dm.delta.resize(static_cast<Eigen::Index>(idx.size()));
  dm.qsq.resize(static_cast<Eigen::Index>(idx.size()));

  for (std::size_t r = 0; r < idx.size(); ++r) {
    const Observation& o = data.obs[idx[r]];
    const double bd = bdot(o.x);
    const double pd = pdot(o.x);
    const double vs = fit.varsigma_hat(o.x);
    const double qsq_x = bd * pd * vs;
    if (!(qsq_x > opt.weight_floor))
      throw std::runtime_error(
          "build_design: varsigma*bdot*pdot is not positive; the analyst weight pair violates the sign condition");
    const double w = 1.0 / std::sqrt(qsq_x);
    const VectorXd phi = basis.eval_first(o.x, k);
    dm.rows.row(static_cast<Eigen::Index>(r)) = (transform.apply(phi) * w).transpose();
    dm.weight[static_cast<Eigen::Index>(r)] = w;
    const auto res = residuals(spec, o, fit.b_hat(o.x), fit.p_hat(o.x), bd, pd);
    dm.eps[static_cast<Eigen::Index>(r)] = res.eps;
    dm.delta[static_cast<Eigen::Index>(r)] = res.delta;
    dm.qsq[static_cast<Eigen::Index>(r)] = bd * pd * spec.h1(o);
  }
  return dm;
}

}  // namespace hoif
