#include "hoif/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace hoif {

using nlohmann::json;

namespace {

[[noreturn]] void missing(const std::string& key) { throw ConfigError("missing required key: " + key); }

void check_keys(const json& j, const std::string& scope, const std::set<std::string>& allowed) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      throw ConfigError("unknown key: " + (scope.empty() ? it.key() : scope + "." + it.key()));
}

double num_or(const json& j, const std::string& key, double dflt) {
  if (!j.contains(key)) return dflt;
  if (!j.at(key).is_number()) throw ConfigError("key must be numeric: " + key);
  return j.at(key).get<double>();
}

long int_or(const json& j, const std::string& key, long dflt) {
  if (!j.contains(key)) return dflt;
  if (!j.at(key).is_number_integer()) throw ConfigError("key must be an integer: " + key);
  return j.at(key).get<long>();
}

std::string str_or(const json& j, const std::string& key, const std::string& dflt) {
  if (!j.contains(key)) return dflt;
  if (!j.at(key).is_string()) throw ConfigError("key must be a string: " + key);
  return j.at(key).get<std::string>();
}

}  // namespace

FunctionalId functional_id_from(const std::string& name) {
  if (name == "exp_product") return FunctionalId::ExpProduct1a;
  if (name == "exp_cond_cov") return FunctionalId::ExpCondCov1b;
  if (name == "var_weighted_ate") return FunctionalId::VarWeightedATE1c;
  if (name == "mar_mean") return FunctionalId::MARMean2a;
  if (name == "mnar_mean") return FunctionalId::MNARMean2b;
  if (name == "trial_square") return FunctionalId::TrialSquare4;
  if (name == "ball_residual") return FunctionalId::BallResidual5;
  throw ConfigError("unknown functional id: " + name);
}

BasisKind basis_kind_from(const std::string& name) {
  if (name == "tensor_haar") return BasisKind::tensor_haar;
  if (name == "tensor_wavelet") return BasisKind::tensor_wavelet;
  if (name == "tensor_poly") return BasisKind::tensor_poly;
  throw ConfigError("unknown basis kind: " + name);
}

namespace {

TaskKind task_from(const std::string& name) {
  if (name == "estimate") return TaskKind::estimate;
  if (name == "plan") return TaskKind::plan;
  if (name == "verify") return TaskKind::verify;
  if (name == "mc") return TaskKind::mc;
  throw ConfigError("unknown task: " + name);
}

EstimatorKind estimator_from(const std::string& name) {
  if (name == "psi_mk") return EstimatorKind::psi_mk;
  if (name == "psi_mod") return EstimatorKind::psi_mod;
  if (name == "psi3_KJ") return EstimatorKind::psi3_KJ;
  if (name == "psi_eff") return EstimatorKind::psi_eff;
  if (name == "difference") return EstimatorKind::difference;
  if (name == "subcube_variance") return EstimatorKind::subcube_variance;
  if (name == "subcube_tau") return EstimatorKind::subcube_tau;
  if (name == "ball") return EstimatorKind::ball;
  if (name == "tau_invert") return EstimatorKind::tau_invert;
  throw ConfigError("unknown estimator type: " + name);
}

TruthKind truth_from(const std::string& name) {
  if (name == "smooth_product") return TruthKind::smooth_product;
  if (name == "smooth_cov") return TruthKind::smooth_cov;
  if (name == "trial") return TruthKind::trial;
  if (name == "mar") return TruthKind::mar;
  if (name == "ball_design") return TruthKind::ball_design;
  if (name == "discrete") return TruthKind::discrete;
  throw ConfigError("unknown truth design: " + name);
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config does not parse as JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");
  check_keys(j, "", {"schema_version", "task", "seed", "threads", "out_prefix", "functional", "basis", "smoothness",
                     "estimator", "nuisance", "data", "split", "mc"});

  ExperimentConfig c;
  if (!j.contains("schema_version")) missing("schema_version");
  c.schema_version = static_cast<int>(int_or(j, "schema_version", 1));
  if (c.schema_version != 1) throw ConfigError("unsupported schema_version (this build reads version 1)");
  if (!j.contains("task")) missing("task");
  c.task = task_from(str_or(j, "task", ""));
  c.seed = static_cast<std::uint64_t>(int_or(j, "seed", 1));
  c.threads = static_cast<int>(int_or(j, "threads", 0));
  c.out_prefix = str_or(j, "out_prefix", "hoif_run");

  if (j.contains("functional")) {
    const json& f = j.at("functional");
    check_keys(f, "functional", {"id", "tau", "alpha_tilt", "pi0_const"});
    if (!f.contains("id")) missing("functional.id");
    c.functional.id = str_or(f, "id", "");
    (void)functional_id_from(c.functional.id);
    c.functional.tau = num_or(f, "tau", 0.0);
    c.functional.alpha_tilt = num_or(f, "alpha_tilt", 0.0);
    c.functional.pi0_const = num_or(f, "pi0_const", 0.5);
    if (!(c.functional.pi0_const > 0.0 && c.functional.pi0_const < 1.0))
      throw ConfigError("functional.pi0_const must lie in (0,1)");
  }

  if (j.contains("basis")) {
    const json& b = j.at("basis");
    check_keys(b, "basis", {"kind", "dim", "k_max", "vanishing_moments"});
    c.basis.kind = str_or(b, "kind", "tensor_haar");
    (void)basis_kind_from(c.basis.kind);
    c.basis.dim = static_cast<int>(int_or(b, "dim", 1));
    c.basis.k_max = static_cast<int>(int_or(b, "k_max", 64));
    c.basis.vanishing_moments = static_cast<int>(int_or(b, "vanishing_moments", 0));
    if (c.basis.dim < 1) throw ConfigError("basis.dim must be positive");
    if (c.basis.k_max < 1) throw ConfigError("basis.k_max must be positive");
  }

  if (j.contains("smoothness")) {
    const json& s = j.at("smoothness");
    check_keys(s, "smoothness", {"beta_b", "beta_p", "beta_g", "d", "C_b", "C_p", "C_g"});
    if (!s.contains("beta_b")) missing("smoothness.beta_b");
    if (!s.contains("beta_p")) missing("smoothness.beta_p");
    if (!s.contains("beta_g")) missing("smoothness.beta_g");
    c.smoothness.beta_b = num_or(s, "beta_b", 0.0);
    c.smoothness.beta_p = num_or(s, "beta_p", 0.0);
    c.smoothness.beta_g = num_or(s, "beta_g", 0.0);
    c.smoothness.d = static_cast<int>(int_or(s, "d", 1));
    c.smoothness.C_b = num_or(s, "C_b", 1.0);
    c.smoothness.C_p = num_or(s, "C_p", 1.0);
    c.smoothness.C_g = num_or(s, "C_g", 1.0);
  } else if (j.contains("task") && c.task == TaskKind::plan) {
    missing("smoothness");
  }

  if (j.contains("estimator")) {
    const json& e = j.at("estimator");
    check_keys(e, "estimator",
               {"type", "m", "k", "alpha", "interval", "c_bias", "j_exact_max", "tuple_budget", "subcube_k",
                "tau_lo", "tau_hi", "tau_points", "extra_g_fits"});
    if (!e.contains("type")) missing("estimator.type");
    c.estimator.type = estimator_from(str_or(e, "type", ""));
    c.estimator.m = static_cast<int>(int_or(e, "m", 2));
    c.estimator.k = int_or(e, "k", 16);
    c.estimator.alpha = num_or(e, "alpha", 0.05);
    c.estimator.interval = str_or(e, "interval", "plain");
    if (c.estimator.interval != "plain" && c.estimator.interval != "inflated" &&
        c.estimator.interval != "bias_corrected")
      throw ConfigError("estimator.interval must be plain, inflated, or bias_corrected");
    c.estimator.c_bias = num_or(e, "c_bias", 0.0);
    c.estimator.j_exact_max = static_cast<int>(int_or(e, "j_exact_max", 2));
    c.estimator.tuple_budget = static_cast<std::uint64_t>(int_or(e, "tuple_budget", 2000000));
    c.estimator.subcube_k = int_or(e, "subcube_k", 0);
    c.estimator.tau_lo = num_or(e, "tau_lo", -1.0);
    c.estimator.tau_hi = num_or(e, "tau_hi", 1.0);
    c.estimator.tau_points = static_cast<int>(int_or(e, "tau_points", 41));
    c.estimator.extra_g_fits = static_cast<int>(int_or(e, "extra_g_fits", 1));
    if (!(c.estimator.alpha > 0.0 && c.estimator.alpha < 1.0)) throw ConfigError("estimator.alpha must lie in (0,1)");
    if (c.estimator.m < 1 || c.estimator.m > 6) throw ConfigError("estimator.m must lie in 1..6");
    if (c.estimator.j_exact_max < 2 || c.estimator.j_exact_max > 3)
      throw ConfigError("estimator.j_exact_max must be 2 or 3");
    if (c.estimator.type == EstimatorKind::tau_invert && !(c.estimator.tau_hi > c.estimator.tau_lo))
      throw ConfigError("estimator.tau_hi must exceed estimator.tau_lo");
  } else if (c.task == TaskKind::estimate || c.task == TaskKind::mc) {
    missing("estimator");
  }

  if (j.contains("nuisance")) {
    const json& u = j.at("nuisance");
    check_keys(u, "nuisance", {"k_b", "k_p", "k_f_cells", "sigma_g", "c_inf", "cv_s_max"});
    c.nuisance.k_b = static_cast<int>(int_or(u, "k_b", 0));
    c.nuisance.k_p = static_cast<int>(int_or(u, "k_p", 0));
    c.nuisance.k_f_cells = static_cast<int>(int_or(u, "k_f_cells", 0));
    c.nuisance.sigma_g = num_or(u, "sigma_g", 1e-3);
    c.nuisance.c_inf = num_or(u, "c_inf", 1e6);
    c.nuisance.cv_s_max = static_cast<int>(int_or(u, "cv_s_max", 0));
    if (!(c.nuisance.sigma_g > 0.0)) throw ConfigError("nuisance.sigma_g must be positive");
  }

  if (j.contains("data")) {
    const json& d = j.at("data");
    check_keys(d, "data",
               {"truth", "n", "beta_b", "beta_p", "sigma_y", "sigma_a", "cor_ay", "atoms", "seed_offset"});
    c.data.truth = truth_from(str_or(d, "truth", "smooth_cov"));
    c.data.n = int_or(d, "n", 500);
    c.data.beta_b = num_or(d, "beta_b", 0.8);
    c.data.beta_p = num_or(d, "beta_p", 0.8);
    c.data.sigma_y = num_or(d, "sigma_y", 0.25);
    c.data.sigma_a = num_or(d, "sigma_a", 0.25);
    c.data.cor_ay = num_or(d, "cor_ay", 0.5);
    c.data.atoms = static_cast<int>(int_or(d, "atoms", 6));
    c.data.seed_offset = static_cast<std::uint64_t>(int_or(d, "seed_offset", 0));
    if (c.data.n < 4) throw ConfigError("data.n must be at least 4");
  } else if (c.task == TaskKind::estimate || c.task == TaskKind::mc) {
    missing("data");
  }

  if (j.contains("split")) {
    const json& s = j.at("split");
    check_keys(s, "split", {"train_fraction", "efficiency_eps"});
    c.split.train_fraction = num_or(s, "train_fraction", 0.5);
    c.split.efficiency_eps = num_or(s, "efficiency_eps", 0.0);
    if (!(c.split.train_fraction > 0.0 && c.split.train_fraction < 1.0))
      throw ConfigError("split.train_fraction must lie in (0,1)");
  }

  if (j.contains("mc")) {
    const json& m = j.at("mc");
    check_keys(m, "mc", {"reps"});
    c.mc_reps = int_or(m, "reps", 100);
    if (c.mc_reps < 1) throw ConfigError("mc.reps must be positive");
  } else if (c.task == TaskKind::mc) {
    missing("mc");
  }

  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_config_text(buf.str());
}

}  // namespace hoif
