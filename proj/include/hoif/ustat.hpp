#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "hoif/truth.hpp"
#include "hoif/types.hpp"

namespace hoif {

// Operation counters for the cost-bound checks: sample_ops counts per-sample
// fold steps, aggregate_ops counts entries touched while forming aggregates.
struct UstatCounters {
  std::uint64_t sample_ops = 0;
  std::uint64_t aggregate_ops = 0;
};

// ---------------------------------------------------------------------------
// brute force

// V_n over ordered distinct m-tuples of an arbitrary kernel, normalized by
// (n-m)!/n!. The budget guard keeps full enumeration at desk scale.
inline double vn_brute(const std::function<double(const std::vector<int>&)>& kernel, int n, int m) {
  if (m < 1) throw std::invalid_argument("vn_brute: order must be positive");
  if (n < m) throw std::invalid_argument("vn_brute: need n >= m");
  if (m > 3 && n > 14) throw std::invalid_argument("vn_brute: enumeration budget exceeded (n <= 14 when m > 3)");
  double count = 1.0;
  for (int j = 0; j < m; ++j) count *= static_cast<double>(n - j);
  if (count > 2e8) throw std::invalid_argument("vn_brute: enumeration budget exceeded");

  std::vector<int> idx(static_cast<std::size_t>(m), 0);
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  KahanSum sum;
  std::function<void(int)> rec = [&](int pos) {
    if (pos == m) {
      sum.add(kernel(idx));
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
  return sum.value() / count;
}

// ---------------------------------------------------------------------------
// set partitions of {0..m-1}

struct SetPartition {
  std::vector<std::vector<int>> blocks;
  double mobius_from_bottom = 1.0;  // prod over blocks of (-1)^{|B|-1} (|B|-1)!
};

inline std::vector<SetPartition> set_partitions(int m) {
  std::vector<SetPartition> out;
  std::vector<int> assign(static_cast<std::size_t>(m), 0);
  std::function<void(int, int)> rec = [&](int pos, int maxb) {
    if (pos == m) {
      SetPartition p;
      p.blocks.assign(static_cast<std::size_t>(maxb), {});
      for (int i = 0; i < m; ++i) p.blocks[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])].push_back(i);
      double mu = 1.0;
      for (const auto& b : p.blocks) {
        double f = 1.0;
        for (std::size_t j = 2; j < b.size(); ++j) f *= static_cast<double>(j);
        mu *= ((b.size() - 1) % 2 == 0 ? 1.0 : -1.0) * f;
      }
      p.mobius_from_bottom = mu;
      out.push_back(std::move(p));
      return;
    }
    for (int b = 0; b <= maxb; ++b) {
      assign[static_cast<std::size_t>(pos)] = b;
      rec(pos + 1, std::max(maxb, b + 1));
    }
  };
  rec(0, 0);
  return out;
}

// ---------------------------------------------------------------------------
// chain kernels

// Rank-one-minus-identity mid factor: per sample i the matrix
//   c_i * U.row(i)' * V.row(i) - I_rect,
// where I_rect[a,b] = 1 when the global column indices offL+a and offR+b
// coincide. This is the shape every correction-order kernel takes.
struct RankOneMid {
  VectorXd c;   // n
  MatrixXd U;   // n x kL
  MatrixXd V;   // n x kR
  long offL = 0, offR = 0;
  bool subtract_identity = true;
};

struct DenseMid {
  std::vector<MatrixXd> mats;  // n matrices, kL x kR
};

using MidFactor = std::variant<RankOneMid, DenseMid>;

// Order-m product kernel a_{i1}' * M^{(1)}_{i2} * ... * M^{(m-2)}_{i_{m-1}} * b_{i_m}.
struct ChainKernel {
  MatrixXd head;  // n x k1, row i = a_i
  std::vector<MidFactor> mids;
  MatrixXd tail;  // n x k_{m-1}

  int order() const { return static_cast<int>(mids.size()) + 2; }
  int n() const { return static_cast<int>(head.rows()); }

  long mid_cols(std::size_t u) const {
    if (std::holds_alternative<RankOneMid>(mids[u])) return std::get<RankOneMid>(mids[u]).V.cols();
    return std::get<DenseMid>(mids[u]).mats.front().cols();
  }
  long mid_rows(std::size_t u) const {
    if (std::holds_alternative<RankOneMid>(mids[u])) return std::get<RankOneMid>(mids[u]).U.cols();
    return std::get<DenseMid>(mids[u]).mats.front().rows();
  }

  void validate() const {
    const int nn = n();
    if (tail.rows() != nn) throw std::invalid_argument("ChainKernel: head/tail sample counts differ");
    long cols = head.cols();
    for (std::size_t u = 0; u < mids.size(); ++u) {
      if (mid_rows(u) != cols) throw std::invalid_argument("ChainKernel: mid factor shape mismatch");
      cols = mid_cols(u);
      if (std::holds_alternative<DenseMid>(mids[u]) &&
          static_cast<int>(std::get<DenseMid>(mids[u]).mats.size()) != nn)
        throw std::invalid_argument("ChainKernel: mid factor sample counts differ");
      if (std::holds_alternative<RankOneMid>(mids[u]) && std::get<RankOneMid>(mids[u]).U.rows() != nn)
        throw std::invalid_argument("ChainKernel: mid factor sample counts differ");
    }
    if (tail.cols() != cols) throw std::invalid_argument("ChainKernel: tail dimension mismatch");
    if (!head.allFinite() || !tail.allFinite()) throw std::invalid_argument("ChainKernel: non-finite entries");
  }

  // direct evaluation at an index tuple, for brute-force comparison
  double eval(const std::vector<int>& idx) const {
    Eigen::RowVectorXd row = head.row(idx[0]);
    for (std::size_t u = 0; u < mids.size(); ++u) row = apply_sample(row, u, idx[u + 1]);
    return row.dot(tail.row(idx[idx.size() - 1]));
  }

  Eigen::RowVectorXd apply_sample(const Eigen::RowVectorXd& row, std::size_t u, int i) const {
    if (std::holds_alternative<DenseMid>(mids[u])) {
      return row * std::get<DenseMid>(mids[u]).mats[static_cast<std::size_t>(i)];
    }
    const RankOneMid& r = std::get<RankOneMid>(mids[u]);
    Eigen::RowVectorXd out = (r.c[i] * row.dot(r.U.row(i))) * r.V.row(i);
    if (r.subtract_identity) {
      // subtract the row shifted onto the shared global indices
      const long kl = r.U.cols(), kr = r.V.cols();
      const long lo = std::max(r.offL, r.offR);
      const long hi = std::min(r.offL + kl, r.offR + kr);
      for (long s = lo; s < hi; ++s) out[s - r.offR] -= row[s - r.offL];
    }
    return out;
  }

  MatrixXd aggregate_mid(std::size_t u, double n_scale, UstatCounters* ctr) const {
    const long kl = mid_rows(u), kr = mid_cols(u);
    MatrixXd agg = MatrixXd::Zero(kl, kr);
    if (std::holds_alternative<DenseMid>(mids[u])) {
      for (const auto& m : std::get<DenseMid>(mids[u]).mats) agg += m;
    } else {
      const RankOneMid& r = std::get<RankOneMid>(mids[u]);
      agg = r.U.transpose() * r.c.asDiagonal() * r.V;
      if (r.subtract_identity) {
        const long lo = std::max(r.offL, r.offR);
        const long hi = std::min(r.offL + kl, r.offR + kr);
        for (long s = lo; s < hi; ++s) agg(s - r.offL, s - r.offR) -= n_scale;
      }
    }
    if (ctr) ctr->aggregate_ops += static_cast<std::uint64_t>(kl * kr);
    return agg;
  }
};

namespace detail {

struct ChainAggregates {
  Eigen::RowVectorXd head;  // sum of head rows
  VectorXd tail;            // sum of tail rows
  std::vector<MatrixXd> mids;
};

inline ChainAggregates make_aggregates(const ChainKernel& ck, UstatCounters* ctr) {
  ChainAggregates agg;
  agg.head = ck.head.colwise().sum();
  agg.tail = ck.tail.colwise().sum().transpose();
  agg.mids.reserve(ck.mids.size());
  for (std::size_t u = 0; u < ck.mids.size(); ++u)
    agg.mids.push_back(ck.aggregate_mid(u, static_cast<double>(ck.n()), ctr));
  if (ctr) ctr->aggregate_ops += static_cast<std::uint64_t>(ck.head.size() + ck.tail.size());
  return agg;
}

// A(partition): sum of the chain over index assignments with one free sample
// index per block. `block_of[pos]` maps chain positions to blocks; positions
// in singleton blocks use the precomputed aggregates.
inline double partition_sum(const ChainKernel& ck, const ChainAggregates& agg, const std::vector<int>& block_of,
                            const std::vector<std::vector<int>>& blocks, UstatCounters* ctr) {
  const int m = ck.order();
  const int n = ck.n();
  std::vector<int> expanded;  // blocks that need a per-sample index
  for (std::size_t b = 0; b < blocks.size(); ++b)
    if (blocks[b].size() >= 2) expanded.push_back(static_cast<int>(b));
  const int t = static_cast<int>(expanded.size());

  std::vector<int> sample_of_block(blocks.size(), -1);
  auto fold = [&]() -> double {
    Eigen::RowVectorXd row;
    // position 0: head
    {
      const int s = sample_of_block[static_cast<std::size_t>(block_of[0])];
      row = (s < 0) ? agg.head : Eigen::RowVectorXd(ck.head.row(s));
    }
    for (int pos = 1; pos <= m - 2; ++pos) {
      const int s = sample_of_block[static_cast<std::size_t>(block_of[static_cast<std::size_t>(pos)])];
      if (s < 0)
        row = row * agg.mids[static_cast<std::size_t>(pos - 1)];
      else
        row = ck.apply_sample(row, static_cast<std::size_t>(pos - 1), s);
      if (ctr) ctr->sample_ops += static_cast<std::uint64_t>(row.size());
    }
    const int s = sample_of_block[static_cast<std::size_t>(block_of[static_cast<std::size_t>(m - 1)])];
    const double v = (s < 0) ? row.dot(agg.tail) : row.dot(ck.tail.row(s));
    if (ctr) ctr->sample_ops += static_cast<std::uint64_t>(row.size());
    return v;
  };

  if (t == 0) return fold();

  double budget = 1.0;
  for (int q = 0; q < t; ++q) budget *= static_cast<double>(n);
  if (budget * static_cast<double>(m) > 6e9)
    throw std::invalid_argument("vn_chain: coincidence-block budget exceeded");

  std::vector<int> cursor(static_cast<std::size_t>(t), 0);
  KahanSum total;
  for (;;) {
    for (int q = 0; q < t; ++q) sample_of_block[static_cast<std::size_t>(expanded[static_cast<std::size_t>(q)])] = cursor[static_cast<std::size_t>(q)];
    total.add(fold());
    int q = 0;
    for (; q < t; ++q) {
      if (++cursor[static_cast<std::size_t>(q)] < n) break;
      cursor[static_cast<std::size_t>(q)] = 0;
    }
    if (q == t) break;
  }
  return total.value();
}

}  // namespace detail

// Exact V_n of a chain kernel over ordered distinct tuples, by inclusion-
// exclusion on the partition lattice: the distinct-index sum is
//   sum over partitions P of mu(P) * A(P),
// with mu the Mobius function from the discrete partition and A(P) the free
// per-block sum evaluated by tensor contraction.
inline double vn_chain(const ChainKernel& ck, UstatCounters* ctr = nullptr) {
  ck.validate();
  const int m = ck.order();
  const int n = ck.n();
  if (m > 6) throw std::invalid_argument("vn_chain: orders above 6 are not supported");
  if (n < m) throw std::invalid_argument("vn_chain: need n >= order");

  static thread_local std::vector<std::vector<SetPartition>> cache(7);
  if (cache[static_cast<std::size_t>(m)].empty()) cache[static_cast<std::size_t>(m)] = set_partitions(m);
  const auto& parts = cache[static_cast<std::size_t>(m)];

  const auto agg = detail::make_aggregates(ck, ctr);
  std::vector<int> block_of(static_cast<std::size_t>(m), 0);
  KahanSum total;
  for (const auto& p : parts) {
    for (std::size_t b = 0; b < p.blocks.size(); ++b)
      for (int pos : p.blocks[b]) block_of[static_cast<std::size_t>(pos)] = static_cast<int>(b);
    total.add(p.mobius_from_bottom * detail::partition_sum(ck, agg, block_of, p.blocks, ctr));
  }
  double norm = 1.0;
  for (int j = 0; j < m; ++j) norm /= static_cast<double>(n - j);
  return total.value() * norm;
}

inline double vn_brute_chain(const ChainKernel& ck) {
  ck.validate();
  return vn_brute([&ck](const std::vector<int>& idx) { return ck.eval(idx); }, ck.n(), ck.order());
}

// ---------------------------------------------------------------------------
// Hoeffding degeneration

// Projects an m-ary kernel onto its fully degenerate part under a discrete
// reference law: the alternating sum over argument subsets S of
// (-1)^{m-|S|} E[f | arguments in S]. The output has zero conditional mean
// given any m-1 arguments under that law.
inline ObsKernel degenerate_project(const ObsKernel& f, int m, const DiscreteTruth& ref) {
  const auto atoms = ref.joint();
  return [f, m, atoms](const std::vector<const Observation*>& args) -> double {
    const int M = m;
    double total = 0.0;
    // iterate over subsets S of {0..m-1}; integrate out the complement
    for (unsigned mask = 0; mask < (1u << M); ++mask) {
      std::vector<int> out_pos;
      for (int j = 0; j < M; ++j)
        if (!((mask >> j) & 1u)) out_pos.push_back(j);
      const int r = static_cast<int>(out_pos.size());
      const int sign = (r % 2 == 0) ? 1 : -1;
      std::vector<const Observation*> work(args);
      if (r == 0) {
        total += sign * f(work);
        continue;
      }
      std::vector<std::size_t> idx(static_cast<std::size_t>(r), 0);
      double acc = 0.0;
      for (;;) {
        double p = 1.0;
        for (int q = 0; q < r; ++q) {
          const auto& at = atoms[idx[static_cast<std::size_t>(q)]];
          work[static_cast<std::size_t>(out_pos[static_cast<std::size_t>(q)])] = &at.obs;
          p *= at.prob;
        }
        acc += p * f(work);
        int q = 0;
        for (; q < r; ++q) {
          if (++idx[static_cast<std::size_t>(q)] < atoms.size()) break;
          idx[static_cast<std::size_t>(q)] = 0;
        }
        if (q == r) break;
      }
      total += sign * acc;
    }
    return total;
  };
}

}  // namespace hoif
