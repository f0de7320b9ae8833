#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hoif/parallel.hpp"
#include "hoif/stats.hpp"

namespace hoif {

// One replication's outcome inside a Monte Carlo study.
struct RepRecord {
  long rep = 0;
  long n = 0;
  long k = 0;
  int m = 0;
  std::string estimator;
  double psi_hat = 0.0;
  double w = 0.0;   // standard error scale
  double lo = 0.0, hi = 0.0;
  bool covered = false;
  double truth_psi = 0.0;
};

struct McSummary {
  std::vector<RepRecord> reps;
  double mean = 0.0;
  double bias = 0.0;
  double variance = 0.0;
  double mse = 0.0;
  double coverage = 0.0;
  double coverage_se = 0.0;  // binomial standard error
  double mean_se = 0.0;
};

// Runs rep_fn over deterministic per-rep seeds (base_seed + rep), in parallel
// with per-slot writes, and aggregates in fixed rep order with compensated
// summation.
inline McSummary monte_carlo(long reps, std::uint64_t base_seed,
                             const std::function<RepRecord(std::uint64_t, long)>& rep_fn) {
  if (reps < 1) throw std::invalid_argument("monte_carlo: need one or more replications");
  McSummary out;
  out.reps.resize(static_cast<std::size_t>(reps));
  parallel_for(static_cast<std::size_t>(reps), [&](std::size_t r) {
    out.reps[r] = rep_fn(base_seed + static_cast<std::uint64_t>(r), static_cast<long>(r));
    out.reps[r].rep = static_cast<long>(r);
  });
  KahanSum sum, sum_err, sum_cov;
  for (const auto& r : out.reps) {
    sum.add(r.psi_hat);
    sum_err.add(r.psi_hat - r.truth_psi);
    sum_cov.add(r.covered ? 1.0 : 0.0);
  }
  const double nreps = static_cast<double>(reps);
  out.mean = sum.value() / nreps;
  out.bias = sum_err.value() / nreps;
  out.coverage = sum_cov.value() / nreps;
  out.coverage_se = std::sqrt(std::max(0.0, out.coverage * (1.0 - out.coverage) / nreps));
  KahanSum ss, se2;
  for (const auto& r : out.reps) {
    ss.add((r.psi_hat - out.mean) * (r.psi_hat - out.mean));
    se2.add((r.psi_hat - r.truth_psi) * (r.psi_hat - r.truth_psi));
  }
  out.variance = reps > 1 ? ss.value() / (nreps - 1.0) : 0.0;
  out.mse = se2.value() / nreps;
  out.mean_se = std::sqrt(out.variance / nreps);
  return out;
}

// Log-log rate slope across (n, value) pairs, with the regression SE.
inline SlopeFit rate_slope(const std::vector<double>& n_values, const std::vector<double>& y_values) {
  std::vector<double> lx, ly;
  lx.reserve(n_values.size());
  ly.reserve(y_values.size());
  for (std::size_t i = 0; i < n_values.size(); ++i) {
    if (!(n_values[i] > 0.0) || !(y_values[i] > 0.0))
      throw std::invalid_argument("rate_slope: needs positive sizes and values");
    lx.push_back(std::log(n_values[i]));
    ly.push_back(std::log(y_values[i]));
  }
  return fit_slope(lx, ly);
}

}  // namespace hoif
