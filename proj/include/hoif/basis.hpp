#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "hoif/types.hpp"

namespace hoif {

enum class BasisKind { tensor_haar, tensor_wavelet, tensor_poly };

namespace detail {

// Univariate Haar functions in multiresolution order:
//   index 0          : father, constant 1 on [0,1)
//   index i >= 1     : mother at level l = floor(log2(i)), translate t = i - 2^l,
//                      value 2^{l/2} * (+1 on first half, -1 on second half).
inline double haar_1d(int index, double x) {
  if (index == 0) return 1.0;
  int level = 0;
  while ((2 << level) <= index) ++level;  // 2^l <= i < 2^{l+1}
  const int t = index - (1 << level);
  const double scaled = x * static_cast<double>(1 << level) - t;
  if (scaled < 0.0 || scaled >= 1.0) {
    if (x == 1.0 && t == (1 << level) - 1) return -std::pow(2.0, 0.5 * level);
    return 0.0;
  }
  const double amp = std::pow(2.0, 0.5 * level);
  return scaled < 0.5 ? amp : -amp;
}

// Shifted Legendre polynomials, orthonormal on [0,1].
inline double legendre_1d(int degree, double x) {
  const double u = 2.0 * x - 1.0;
  double pkm1 = 1.0, pk = u;
  if (degree == 0) return 1.0;
  for (int k = 1; k < degree; ++k) {
    const double pkp1 = ((2.0 * k + 1.0) * u * pk - k * pkm1) / (k + 1.0);
    pkm1 = pk;
    pk = pkp1;
  }
  return std::sqrt(2.0 * degree + 1.0) * pk;
}

}  // namespace detail

// An ordered tensor-product basis on [0,1]^d, orthonormal under Lebesgue
// measure. Wavelet kinds are ordered father-block first, then mother levels
// in increasing level; within a level, sign patterns (which dimensions carry
// a mother factor) run in binary order and translations lexicographically.
// Polynomials are ordered by total degree, then lexicographically.
class BasisSystem {
public:
  struct Term {
    // Per-dimension univariate selector. Haar: per-dim index into haar_1d.
    // Poly: per-dim degree.
    std::vector<int> comp;
  };

  BasisSystem(BasisKind kind, int d, int K_max, int vanishing_moments = 0)
      : kind_(kind), d_(d), K_max_(K_max) {
    if (d < 1) throw std::invalid_argument("build_basis: dimension must be positive");
    if (K_max < 1) throw std::invalid_argument("build_basis: K_max below the admissible minimum of 1");
    if (kind == BasisKind::tensor_wavelet && vanishing_moments > 0)
      throw std::invalid_argument(
          "build_basis: only the Haar family (zero vanishing moments) is implemented; "
          "use tensor_poly for smoother targets");
    if (kind == BasisKind::tensor_wavelet) kind_ = BasisKind::tensor_haar;
    build_order();
  }

  BasisKind kind() const { return kind_; }
  int dim() const { return d_; }
  int size() const { return K_max_; }

  // Value of ordered basis function `index` (0-based) at x.
  double value(int index, const VectorXd& x) const {
    const Term& t = terms_[static_cast<std::size_t>(index)];
    double v = 1.0;
    for (int j = 0; j < d_; ++j) {
      v *= (kind_ == BasisKind::tensor_poly) ? detail::legendre_1d(t.comp[j], x[j])
                                             : detail::haar_1d(t.comp[j], x[j]);
      if (v == 0.0) return 0.0;
    }
    return v;
  }

  // values for ordered indices in the 1-based inclusive range (k0, k1].
  VectorXd eval_range(const VectorXd& x, int k0, int k1) const {
    if (k1 <= k0) throw std::invalid_argument("eval_basis: empty index range");
    if (k0 < 0 || k1 > K_max_) throw std::invalid_argument("eval_basis: index range out of bounds");
    VectorXd out(k1 - k0);
    for (int i = k0; i < k1; ++i) out[i - k0] = value(i, x);
    return out;
  }

  VectorXd eval_first(const VectorXd& x, int k) const { return eval_range(x, 0, k); }

  // Smallest dyadic resolution R such that every one of the first k functions
  // is constant on cells of side 2^-R (Haar kinds only).
  int piecewise_resolution(int k) const {
    if (kind_ == BasisKind::tensor_poly)
      throw std::logic_error("piecewise_resolution: polynomial bases are not piecewise constant");
    int r = 0;
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < d_; ++j) {
        const int c = terms_[static_cast<std::size_t>(i)].comp[j];
        if (c == 0) continue;
        int level = 0;
        while ((2 << level) <= c) ++level;
        r = std::max(r, level + 1);
      }
    return r;
  }

  int max_degree(int k) const {
    if (kind_ != BasisKind::tensor_poly) return 0;
    int m = 0;
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < d_; ++j) m = std::max(m, terms_[static_cast<std::size_t>(i)].comp[j]);
    return m;
  }

  // Sizes at which the leading block spans a full father space (nested MRA
  // spaces for wavelets; full total-degree layers for polynomials).
  std::vector<int> admissible_block_sizes() const {
    std::vector<int> out;
    if (kind_ == BasisKind::tensor_poly) {
      int total = 0, deg = 0;
      while (total < K_max_) {
        int layer = 0;  // number of d-tuples with sum == deg
        layer = count_layer(deg);
        total += layer;
        if (total <= K_max_) out.push_back(total);
        ++deg;
      }
    } else {
      std::int64_t sz = 1;
      while (sz <= K_max_) {
        out.push_back(static_cast<int>(sz));
        sz *= (std::int64_t{1} << d_);
      }
    }
    return out;
  }

  const Term& term(int index) const { return terms_[static_cast<std::size_t>(index)]; }

private:
  int count_layer(int deg) const {
    // compositions of deg into d nonnegative parts
    std::int64_t c = 1;
    for (int i = 1; i < d_; ++i) c = c * (deg + i) / i;
    return static_cast<int>(c);
  }

  void build_order() {
    terms_.reserve(static_cast<std::size_t>(K_max_));
    if (kind_ == BasisKind::tensor_poly) {
      int deg = 0;
      while (static_cast<int>(terms_.size()) < K_max_) {
        std::vector<int> comp(d_, 0);
        emit_degree_layer(deg, 0, comp);
        ++deg;
        if (deg > K_max_ + 1) break;
      }
    } else {
      // father block: the constant
      terms_.push_back(Term{std::vector<int>(d_, 0)});
      int level = 0;
      while (static_cast<int>(terms_.size()) < K_max_) {
        emit_haar_level(level);
        ++level;
        if (level > 40) throw std::invalid_argument("build_basis: K_max too large");
      }
    }
    terms_.resize(static_cast<std::size_t>(K_max_));
  }

  void emit_degree_layer(int deg, int pos, std::vector<int>& comp) {
    if (static_cast<int>(terms_.size()) >= K_max_) return;
    if (pos == d_ - 1) {
      comp[pos] = deg;
      terms_.push_back(Term{comp});
      return;
    }
    for (int v = deg; v >= 0; --v) {
      comp[pos] = v;
      emit_degree_layer(deg - v, pos + 1, comp);
      if (static_cast<int>(terms_.size()) >= K_max_) return;
    }
  }

  void emit_haar_level(int level) {
    // Completes the level (level+1) tensor father space. New functions are the
    // tensor products whose deepest mother factor sits at `level`: for each
    // nonzero pattern of "level-mother" slots, mother slots run over the 2^level
    // translates at this level and the remaining slots run over the whole
    // lower block (constant plus mothers below this level), which also has
    // 2^level univariate members.
    const int half = 1 << level;
    for (int pattern = 1; pattern < (1 << d_); ++pattern) {
      std::vector<int> idx(d_, 0);
      for (int j = 0; j < d_; ++j) idx[j] = ((pattern >> j) & 1) ? half : 0;
      for (;;) {
        terms_.push_back(Term{idx});
        if (static_cast<int>(terms_.size()) >= K_max_) return;
        int j = 0;
        for (; j < d_; ++j) {
          const bool mother = (pattern >> j) & 1;
          const int lo = mother ? half : 0;
          const int hi = mother ? 2 * half : half;
          if (++idx[j] < hi) break;
          idx[j] = lo;
        }
        if (j == d_) break;
      }
    }
  }

  BasisKind kind_;
  int d_;
  int K_max_;
  std::vector<Term> terms_;
};

inline BasisSystem build_basis(BasisKind kind, int d, int K_max, int vanishing_moments = 0) {
  return BasisSystem(kind, d, K_max, vanishing_moments);
}

}  // namespace hoif
