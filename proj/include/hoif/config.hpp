#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hoif/basis.hpp"
#include "hoif/estimators.hpp"
#include "hoif/functional.hpp"
#include "hoif/types.hpp"

namespace hoif {

// Configuration errors surface with exit code 2 at the command line.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

enum class TaskKind { estimate, plan, verify, mc };
enum class EstimatorKind {
  psi_mk,
  psi_mod,
  psi3_KJ,
  psi_eff,
  difference,
  subcube_variance,
  subcube_tau,
  ball,
  tau_invert,
};

enum class TruthKind { smooth_product, smooth_cov, trial, mar, ball_design, discrete };

struct FunctionalConfig {
  std::string id = "exp_cond_cov";
  double tau = 0.0;
  double alpha_tilt = 0.0;  // MNAR tilt
  double pi0_const = 0.5;   // randomized-trial assignment probability
};

struct BasisConfig {
  std::string kind = "tensor_haar";
  int dim = 1;
  int k_max = 64;
  int vanishing_moments = 0;
};

struct EstimatorConfig {
  EstimatorKind type = EstimatorKind::psi_mk;
  int m = 2;
  long k = 16;
  double alpha = 0.05;
  std::string interval = "plain";
  double c_bias = 0.0;
  int j_exact_max = 2;
  std::uint64_t tuple_budget = 2000000;
  long subcube_k = 0;  // 0: planner default
  double tau_lo = -1.0, tau_hi = 1.0;
  int tau_points = 41;
  int extra_g_fits = 1;  // psi_mod
};

struct NuisancePlanConfig {
  int k_b = 0, k_p = 0, k_f_cells = 0;
  double sigma_g = 1e-3;
  double c_inf = 1e6;
  int cv_s_max = 0;
};

struct DataConfig {
  TruthKind truth = TruthKind::smooth_cov;
  long n = 500;
  double beta_b = 0.8, beta_p = 0.8;
  double sigma_y = 0.25, sigma_a = 0.25, cor_ay = 0.5;
  int atoms = 6;             // discrete designs
  std::uint64_t seed_offset = 0;
};

struct SplitConfigIn {
  double train_fraction = 0.5;
  double efficiency_eps = 0.0;
};

struct ExperimentConfig {
  int schema_version = 1;
  TaskKind task = TaskKind::estimate;
  std::uint64_t seed = 1;
  int threads = 0;  // 0: leave the process default
  std::string out_prefix = "hoif_run";
  FunctionalConfig functional;
  BasisConfig basis;
  SmoothnessConfig smoothness;
  EstimatorConfig estimator;
  NuisancePlanConfig nuisance;
  DataConfig data;
  SplitConfigIn split;
  long mc_reps = 100;
};

// Parses and validates a config document; throws ConfigError naming the
// offending key.
ExperimentConfig parse_config_text(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);

FunctionalId functional_id_from(const std::string& name);
BasisKind basis_kind_from(const std::string& name);

}  // namespace hoif
