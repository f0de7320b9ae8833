#include "hoif/driver.hpp"

#include <cmath>
#include <functional>
#include <iostream>
#include <sstream>

#include "hoif/inference.hpp"
#include "hoif/mc.hpp"
#include "hoif/minimax.hpp"
#include "hoif/nuisance.hpp"
#include "hoif/oracles.hpp"
#include "hoif/parallel.hpp"
#include "hoif/report.hpp"
#include "hoif/simple.hpp"
#include "hoif/truth.hpp"

namespace hoif {

namespace {

// ---------------------------------------------------------------------------
// sampling designs behind the named truths

struct TruthBundle {
  std::function<Dataset(std::uint64_t)> sample;
  FunctionalId functional = FunctionalId::ExpCondCov1b;
  FunctionalOptions options;
  double psi_true = 0.0;  // population target (tau for root designs)
  XFn pi0;                // known assignment probabilities where applicable
  XFn true_b;             // population regression where closed-form
};

double quad1(const std::function<double(double)>& f) {
  double s = 0.0;
  const int g = 8192;
  for (int i = 0; i < g; ++i) s += f((i + 0.5) / g) / g;
  return s;
}

TruthBundle make_truth(const ExperimentConfig& cfg) {
  const DataConfig& d = cfg.data;
  SplitConfig split;
  split.train_fraction = cfg.split.train_fraction;
  split.efficiency_eps = cfg.split.efficiency_eps;
  TruthBundle out;

  XFn b = weierstrass(d.beta_b, 12, 0.4);
  XFn p_raw = random_series_function(d.beta_p, 1, 0.5, 977);
  switch (d.truth) {
    case TruthKind::smooth_product:
    case TruthKind::smooth_cov: {
      SmoothTruth t;
      t.d = 1;
      t.b = b;
      t.p = p_raw;
      t.sigma_y = d.sigma_y;
      t.sigma_a = d.sigma_a;
      t.cor_ay = d.cor_ay;
      out.sample = [t, split, n = d.n](std::uint64_t seed) {
        return t.generate(static_cast<std::size_t>(n), seed, split);
      };
      if (d.truth == TruthKind::smooth_cov) {
        out.functional = FunctionalId::ExpCondCov1b;
        out.psi_true = d.cor_ay * d.sigma_y * d.sigma_a;
      } else {
        out.functional = FunctionalId::ExpProduct1a;
        out.psi_true = quad1([&](double x) {
          const VectorXd v = VectorXd::Constant(1, x);
          return b(v) * p_raw(v);
        });
      }
      out.true_b = b;
      break;
    }
    case TruthKind::mar: {
      XFn pi = [p_raw](const VectorXd& x) { return 0.45 + 0.35 * std::tanh(p_raw(x)); };
      out.sample = [b, pi, split, d](std::uint64_t seed) {
        Rng rng(seed);
        Dataset data;
        for (long i = 0; i < d.n; ++i) {
          Observation o;
          o.x = VectorXd::Constant(1, rng.next_uniform());
          const bool observed = rng.next_uniform() < pi(o.x);
          o.a = observed ? 1.0 : 0.0;
          o.y = observed ? b(o.x) + d.sigma_y * rng.next_normal() : 0.0;
          data.obs.push_back(std::move(o));
        }
        assign_split(data, split);
        return data;
      };
      out.functional = FunctionalId::MARMean2a;
      out.psi_true = quad1([&](double x) { return b(VectorXd::Constant(1, x)); });
      out.true_b = b;
      break;
    }
    case TruthKind::trial:
    case TruthKind::ball_design: {
      const double pi0c = cfg.functional.pi0_const;
      if (d.truth == TruthKind::trial) {
        XFn m0 = random_series_function(d.beta_b, 1, 0.3, 1234);
        out.sample = [b, m0, pi0c, split, d](std::uint64_t seed) {
          Rng rng(seed);
          Dataset data;
          for (long i = 0; i < d.n; ++i) {
            Observation o;
            o.x = VectorXd::Constant(1, rng.next_uniform());
            o.a = rng.next_uniform() < pi0c ? 1.0 : 0.0;
            o.y = m0(o.x) + b(o.x) * o.a + d.sigma_y * rng.next_normal();
            data.obs.push_back(std::move(o));
          }
          assign_split(data, split);
          return data;
        };
        out.functional = FunctionalId::TrialSquare4;
        out.options.pi0 = [pi0c](const VectorXd&) { return pi0c; };
        out.pi0 = out.options.pi0;
        if (cfg.estimator.type == EstimatorKind::tau_invert) {
          // constant assignment probability: the variance-weighted effect is
          // the plain average effect
          out.psi_true = quad1([&](double x) { return b(VectorXd::Constant(1, x)); });
        } else {
          out.psi_true = quad1([&](double x) {
            const double bb = b(VectorXd::Constant(1, x));
            return bb * bb;
          });
        }
      } else {
        SmoothTruth t;
        t.d = 1;
        t.b = b;
        t.p = b;
        t.sigma_y = d.sigma_y;
        out.sample = [t, split, n = d.n](std::uint64_t seed) {
          Dataset data = t.generate(static_cast<std::size_t>(n), seed, split);
          for (auto& o : data.obs) o.a = o.y;  // single response: A tracks Y
          return data;
        };
        out.functional = FunctionalId::BallResidual5;
      }
      out.true_b = b;
      break;
    }
    case TruthKind::discrete: {
      Rng seed_rng(cfg.seed + 101);
      DiscreteTruth t = random_discrete_truth(seed_rng, d.atoms, true);
      FunctionalId fid = functional_id_from(cfg.functional.id);
      if (fid == FunctionalId::VarWeightedATE1c || fid == FunctionalId::TrialSquare4 ||
          fid == FunctionalId::BallResidual5)
        fid = FunctionalId::ExpCondCov1b;  // discrete designs target the covariance family
      FunctionalOptions probe_opt;
      if (fid == FunctionalId::MNARMean2b) probe_opt.alpha = cfg.functional.alpha_tilt;
      auto spec_probe = make_functional(fid, probe_opt);
      out.options = probe_opt;
      out.functional = spec_probe.id;
      out.psi_true = t.psi(spec_probe);
      out.sample = [t, split, n = d.n](std::uint64_t seed) {
        return generate_data(t, static_cast<std::size_t>(n), seed, split);
      };
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON shaping

JsonValue report_json(const EstimateReport& rep) {
  JsonValue j = JsonValue::object();
  j.set("psi_hat", JsonValue::number(rep.psi_hat));
  JsonValue terms = JsonValue::array();
  for (double t : rep.order_terms) terms.push(JsonValue::number(t));
  j.set("order_terms", std::move(terms));
  JsonValue w2 = JsonValue::array();
  for (double t : rep.w2) w2.push(JsonValue::number(t));
  j.set("w2_components", std::move(w2));
  j.set("w2_total", JsonValue::number(rep.w2_total));
  JsonValue interval = JsonValue::object();
  interval.set("lo", JsonValue::number(rep.lo));
  interval.set("hi", JsonValue::number(rep.hi));
  interval.set("alpha", JsonValue::number(rep.alpha));
  j.set("interval", std::move(interval));
  j.set("m", JsonValue::integer(rep.m));
  j.set("k", JsonValue::integer(rep.k));
  j.set("functional", JsonValue::string(rep.functional));
  j.set("variance_seed", JsonValue::integer(static_cast<long long>(rep.variance_seed)));
  j.set("variance_tuples", JsonValue::integer(static_cast<long long>(rep.variance_tuples)));
  JsonValue diag = JsonValue::object();
  for (const auto& [k2, v] : rep.diagnostics) diag.set(k2, JsonValue::number(v));
  j.set("diagnostics", std::move(diag));
  return j;
}

std::string order_table_csv(const EstimateReport& rep) {
  std::string csv = csv_row({"j", "value", "W2_jj"});
  for (std::size_t i = 0; i < rep.order_terms.size(); ++i)
    csv += csv_row({std::to_string(i + 1), format_double(rep.order_terms[i]),
                    i < rep.w2.size() ? format_double(rep.w2[i]) : ""});
  return csv;
}

std::string rep_table_csv(const McSummary& s) {
  std::string csv = csv_row({"rep", "n", "k", "m", "estimator", "psi_hat", "W", "lo", "hi", "covered", "truth_psi"});
  for (const auto& r : s.reps)
    csv += csv_row({std::to_string(r.rep), std::to_string(r.n), std::to_string(r.k), std::to_string(r.m),
                    r.estimator, format_double(r.psi_hat), format_double(r.w), format_double(r.lo),
                    format_double(r.hi), r.covered ? "1" : "0", format_double(r.truth_psi)});
  return csv;
}

JsonValue summary_json(const McSummary& s) {
  JsonValue j = JsonValue::object();
  j.set("reps", JsonValue::integer(static_cast<long long>(s.reps.size())));
  j.set("mean", JsonValue::number(s.mean));
  j.set("bias", JsonValue::number(s.bias));
  j.set("variance", JsonValue::number(s.variance));
  j.set("mse", JsonValue::number(s.mse));
  j.set("coverage", JsonValue::number(s.coverage));
  j.set("coverage_se", JsonValue::number(s.coverage_se));
  j.set("mean_se", JsonValue::number(s.mean_se));
  return j;
}

// ---------------------------------------------------------------------------
// single-dataset estimation shared between tasks

struct FitContext {
  FunctionalSpec spec;
  NuisanceFit fit;
  BasisSystem basis;
};

FitContext fit_on(const ExperimentConfig& cfg, const TruthBundle& truth, const Dataset& data) {
  FunctionalOptions fopt = truth.options;
  if (truth.functional == FunctionalId::VarWeightedATE1c) fopt.tau = cfg.functional.tau;
  if (truth.functional == FunctionalId::MNARMean2b) fopt.alpha = cfg.functional.alpha_tilt;
  if (truth.functional == FunctionalId::BallResidual5 && !fopt.b_ref) {
    // center: training-sample series fit of the response
    std::vector<Observation> tr;
    for (std::size_t i = 0; i < data.obs.size(); ++i)
      if (data.split[i] == Split::training) tr.push_back(data.obs[i]);
    BasisSystem cb = build_basis(BasisKind::tensor_poly, 1, 6);
    fopt.b_ref = fit_series_regression(cb, tr, [](const Observation& o) { return o.y; }, 6, 1e6);
  }
  FunctionalSpec spec = make_functional(truth.functional, fopt);
  data.validate(spec.requires_binary_a);

  BasisSystem basis = build_basis(basis_kind_from(cfg.basis.kind), cfg.basis.dim, cfg.basis.k_max,
                                  cfg.basis.vanishing_moments);
  NuisanceConfig ncfg;
  ncfg.k_b = cfg.nuisance.k_b;
  ncfg.k_p = cfg.nuisance.k_p;
  ncfg.k_f_cells = cfg.nuisance.k_f_cells;
  ncfg.sigma_g = cfg.nuisance.sigma_g;
  ncfg.c_inf = cfg.nuisance.c_inf;
  ncfg.beta_b = cfg.data.beta_b;
  ncfg.beta_p = cfg.data.beta_p;
  NuisanceFit fit = fit_nuisance(spec, data, basis, ncfg);
  return FitContext{std::move(spec), std::move(fit), std::move(basis)};
}

DesignMatrix design_for(const FitContext& ctx, const Dataset& data, int k) {
  if (auto fast = build_design_haar_block(ctx.basis, data, ctx.spec, ctx.fit, k)) return std::move(*fast);
  if (k > 1024)
    throw std::runtime_error(
        "estimate: k above 1024 needs the dyadic Haar fast path (tensor_haar basis with a full father block)");
  WeightedPoints ref = quadrature_for_basis(ctx.basis, k, ctx.fit.f_hat, std::max(1, ctx.fit.k_f));
  GramTransform tr = orthonormalize(ctx.basis, ref, k);
  return build_design(ctx.basis, data, ctx.spec, ctx.fit, k, tr);
}

EstimateReport estimate_with_design(const FitContext& ctx, const Dataset& data, int m, int k,
                                    const EstimatorOptions& opt) {
  const DesignMatrix dm = design_for(ctx, data, k);
  const VectorXd h = plugin_values(data, ctx.spec, ctx.fit);
  EstimateReport rep;
  rep.m = m;
  rep.k = k;
  rep.functional = ctx.spec.name;
  rep.variance_seed = opt.variance.seed;
  rep.order_terms.push_back(h.mean());
  if (opt.compute_variance) rep.w2.push_back(w2_first_order(h));
  for (int j = 2; j <= m; ++j) {
    const double sign = (j % 2 == 0) ? -1.0 : 1.0;
    ChainKernel ck = make_chain(dm, full_ranges(j, k), sign);
    rep.order_terms.push_back(vn_chain(ck));
    if (opt.compute_variance)
      rep.w2.push_back(w2_component({std::move(ck)}, j, dm, opt.variance, &rep.variance_tuples));
  }
  rep.diagnostics["n_est"] = static_cast<double>(dm.n());
  rep.finalize_sums();
  confidence_interval(rep, opt.alpha, opt.interval_mode, opt.c_bias, static_cast<int>(dm.n()));
  return rep;
}

EstimatorOptions options_from(const ExperimentConfig& cfg, std::uint64_t seed) {
  EstimatorOptions opt;
  opt.alpha = cfg.estimator.alpha;
  opt.interval_mode = cfg.estimator.interval == "bias_corrected" ? IntervalMode::bias_corrected
                      : cfg.estimator.interval == "inflated"     ? IntervalMode::inflated
                                                                 : IntervalMode::plain;
  opt.c_bias = cfg.estimator.c_bias;
  opt.variance.j_exact_max = cfg.estimator.j_exact_max;
  opt.variance.tuple_budget = cfg.estimator.tuple_budget;
  opt.variance.seed = seed;
  return opt;
}

long default_subcube_k(const ExperimentConfig& cfg, long n) {
  if (cfg.estimator.subcube_k > 0) return cfg.estimator.subcube_k;
  const double bd = 0.5 * (cfg.data.beta_b + cfg.data.beta_p);
  return std::max<long>(1, static_cast<long>(std::llround(std::pow(static_cast<double>(n), 2.0 / (1.0 + 4.0 * bd)))));
}

// one replication for the estimator kinds that reduce to a scalar report;
// full_report, when supplied, captures the per-order table of the last run
RepRecord run_one_rep(const ExperimentConfig& cfg, const TruthBundle& truth, std::uint64_t seed, long rep_index,
                      EstimateReport* full_report = nullptr) {
  RepRecord rec;
  rec.n = cfg.data.n;
  rec.truth_psi = truth.psi_true;
  Dataset data = truth.sample(seed + cfg.data.seed_offset);

  switch (cfg.estimator.type) {
    case EstimatorKind::difference: {
      Dataset est = data.subset(Split::estimation);
      rec.estimator = "difference";
      rec.psi_hat = difference_estimator(est).value;
      rec.m = 1;
      return rec;
    }
    case EstimatorKind::subcube_variance: {
      Dataset est = data.subset(Split::estimation);
      rec.estimator = "subcube_variance";
      rec.k = default_subcube_k(cfg, static_cast<long>(est.obs.size()));
      rec.psi_hat = subcube_variance(est, rec.k, seed ^ 0x5bcu);
      rec.m = 2;
      return rec;
    }
    case EstimatorKind::subcube_tau: {
      Dataset est = data.subset(Split::estimation);
      rec.estimator = "subcube_tau";
      rec.k = default_subcube_k(cfg, static_cast<long>(est.obs.size()));
      rec.psi_hat = subcube_tau(est, rec.k, seed ^ 0x7a1u);
      rec.m = 2;
      return rec;
    }
    default: break;
  }

  FitContext ctx = fit_on(cfg, truth, data);
  EstimatorOptions opt = options_from(cfg, seed);

  switch (cfg.estimator.type) {
    case EstimatorKind::psi_mk: {
      const auto rep = estimate_with_design(ctx, data, cfg.estimator.m, static_cast<int>(cfg.estimator.k), opt);
      if (full_report) *full_report = rep;
      rec.estimator = "psi_mk";
      rec.m = rep.m;
      rec.k = rep.k;
      rec.psi_hat = rep.psi_hat;
      rec.w = std::sqrt(std::max(0.0, rep.w2_total));
      rec.lo = rep.lo;
      rec.hi = rep.hi;
      rec.covered = rep.lo <= truth.psi_true && truth.psi_true <= rep.hi;
      return rec;
    }
    case EstimatorKind::ball: {
      const auto rep = estimate_with_design(ctx, data, cfg.estimator.m, static_cast<int>(cfg.estimator.k), opt);
      // per-replication target: the residual square of the training center
      XFn center;
      {
        // the spec built for BallResidual5 carries the center through H4;
        // refit the same center for membership scoring
        std::vector<Observation> tr;
        for (std::size_t i = 0; i < data.obs.size(); ++i)
          if (data.split[i] == Split::training) tr.push_back(data.obs[i]);
        BasisSystem cb = build_basis(BasisKind::tensor_poly, 1, 6);
        center = fit_series_regression(cb, tr, [](const Observation& o) { return o.y; }, 6, 1e6);
      }
      ConfidenceBall ball = confidence_ball(data, center, rep, cfg.estimator.alpha);
      rec.estimator = "ball";
      rec.m = rep.m;
      rec.k = rep.k;
      rec.psi_hat = rep.psi_hat;
      rec.w = std::sqrt(std::max(0.0, rep.w2_total));
      rec.lo = 0.0;
      rec.hi = ball.radius_sq;
      rec.truth_psi = quad1([&](double x) {
        const VectorXd v = VectorXd::Constant(1, x);
        const double diff = truth.true_b(v) - center(v);
        return diff * diff;
      });
      rec.covered = truth.true_b && ball.member(truth.true_b);
      return rec;
    }
    case EstimatorKind::tau_invert: {
      // grid inversion for the covariance root using the order-2 estimator;
      // the design is free of tau, so build it once
      std::vector<Observation> tr;
      for (std::size_t i = 0; i < data.obs.size(); ++i)
        if (data.split[i] == Split::training) tr.push_back(data.obs[i]);
      BasisSystem cb = build_basis(BasisKind::tensor_poly, 1, 6);
      XFn b_star = fit_series_regression(cb, tr, [](const Observation& o) { return o.y; }, 6, 1e6);
      XFn p_hat = fit_series_regression(cb, tr, [](const Observation& o) { return o.a; }, 6, 1e6);

      std::vector<double> grid;
      for (int i = 0; i < cfg.estimator.tau_points; ++i)
        grid.push_back(cfg.estimator.tau_lo + (cfg.estimator.tau_hi - cfg.estimator.tau_lo) * i /
                                                 (cfg.estimator.tau_points - 1.0));
      auto eval_tau = [&](double tau) {
        FunctionalOptions fo;
        fo.tau = tau;
        FunctionalSpec spec_tau = make_functional(FunctionalId::VarWeightedATE1c, fo);
        NuisanceFit fit_tau = ctx.fit;
        fit_tau.b_hat = [b_star, p_hat, tau](const VectorXd& x) { return b_star(x) - tau * p_hat(x); };
        fit_tau.p_hat = p_hat;
        fit_tau.varsigma_hat = [](const VectorXd&) { return 1.0; };
        FitContext ctx_tau{spec_tau, fit_tau, ctx.basis};
        EstimatorOptions o2 = opt;
        o2.alpha = cfg.estimator.alpha;
        const auto r = estimate_with_design(ctx_tau, data, cfg.estimator.m, static_cast<int>(cfg.estimator.k), o2);
        return std::make_pair(r.psi_hat, std::sqrt(std::max(1e-300, r.w2_total)));
      };
      TauConfidenceSet set = invert_ci_for_tau(grid, eval_tau, cfg.estimator.alpha);
      rec.estimator = "tau_invert";
      rec.m = cfg.estimator.m;
      rec.k = cfg.estimator.k;
      rec.psi_hat = set.empty ? std::numeric_limits<double>::quiet_NaN() : 0.5 * (set.hull_lo + set.hull_hi);
      rec.lo = set.hull_lo;
      rec.hi = set.hull_hi;
      // accepted-set coverage: the grid point nearest the true root
      bool covered = false;
      for (std::size_t i = 0; i < grid.size(); ++i)
        if (set.accepted[i] && std::fabs(grid[i] - truth.psi_true) <= 0.5 * set.grid_spacing + 1e-12) covered = true;
      rec.covered = covered;
      return rec;
    }
    case EstimatorKind::psi_mod: {
      // extra density-side fits: histograms at successively doubled grids
      const int k = static_cast<int>(cfg.estimator.k);
      if (k > 128) throw std::runtime_error("psi_mod: desk-scale runs cap k at 128");
      WeightedPoints ref = quadrature_for_basis(ctx.basis, k, ctx.fit.f_hat, std::max(1, ctx.fit.k_f));
      GramTransform tr = orthonormalize(ctx.basis, ref, k);
      std::vector<Observation> train;
      for (std::size_t i = 0; i < data.obs.size(); ++i)
        if (data.split[i] == Split::training) train.push_back(data.obs[i]);
      std::vector<MatrixXd> grams;
      WeightedPoints leb = quadrature_for_basis(ctx.basis, k, [](const VectorXd&) { return 1.0; }, 1);
      for (int s = 0; s < cfg.estimator.m - 2; ++s) {
        HistogramDensity fs = fit_density(train, ctx.basis.dim(), std::max(1, ctx.fit.k_f << (s + 1)),
                                          cfg.nuisance.sigma_g);
        XFn vs = ctx.fit.varsigma_hat;
        XFn gs = [fs, vs](const VectorXd& x) { return vs(x) * fs(x); };
        grams.push_back(whitened_gram_under(ctx.basis, tr, ctx.spec, ctx.fit, k, gs, leb));
      }
      const auto rep = estimate_psi_mk_mod(data, ctx.spec, ctx.fit, ctx.basis, tr, grams, cfg.estimator.m, k, opt);
      if (full_report) *full_report = rep;
      rec.estimator = "psi_mod";
      rec.m = rep.m;
      rec.k = rep.k;
      rec.psi_hat = rep.psi_hat;
      rec.w = std::sqrt(std::max(0.0, rep.w2_total));
      rec.lo = rep.lo;
      rec.hi = rep.hi;
      rec.covered = rep.lo <= truth.psi_true && truth.psi_true <= rep.hi;
      return rec;
    }
    case EstimatorKind::psi3_KJ:
    case EstimatorKind::psi_eff: {
      SmoothnessConfig sm = cfg.smoothness;
      const long n_est = static_cast<long>(data.count(Split::estimation));
      PartitionPlan plan = hyperbola_partition(sm, n_est, cfg.basis.k_max);
      const int k1 = static_cast<int>(plan.k_minus1());
      WeightedPoints ref = quadrature_for_basis(ctx.basis, k1, ctx.fit.f_hat, std::max(1, ctx.fit.k_f));
      GramTransform tr = orthonormalize(ctx.basis, ref, k1);
      EstimateReport rep;
      if (cfg.estimator.type == EstimatorKind::psi3_KJ) {
        rep = estimate_psi3_KJ(data, ctx.spec, ctx.fit, ctx.basis, tr, plan, opt);
        rec.estimator = "psi3_KJ";
      } else {
        rep = estimate_psi_eff(data, ctx.spec, ctx.fit, ctx.basis, tr, sm, plan, opt).report;
        rec.estimator = "psi_eff";
      }
      if (full_report) *full_report = rep;
      rec.m = rep.m;
      rec.k = rep.k;
      rec.psi_hat = rep.psi_hat;
      rec.w = std::sqrt(std::max(0.0, rep.w2_total));
      rec.lo = rep.lo;
      rec.hi = rep.hi;
      rec.covered = rep.lo <= truth.psi_true && truth.psi_true <= rep.hi;
      return rec;
    }
    default:
      throw std::runtime_error("estimator type not wired");
  }
}

JsonValue plan_json(const ExperimentConfig& cfg) {
  RatePlan rp = rate_plan(cfg.smoothness, cfg.data.n > 0 ? cfg.data.n : 1000);
  JsonValue j = JsonValue::object();
  j.set("regime", JsonValue::string(rp.regime == RateRegime::root_n     ? "root_n"
                                    : rp.regime == RateRegime::boundary ? "boundary"
                                                                        : "sub_root_n"));
  j.set("beta", JsonValue::number(rp.beta));
  j.set("delta", JsonValue::number(rp.delta));
  j.set("k_opt_exponent", JsonValue::number(rp.k_opt_exponent));
  j.set("k_opt", JsonValue::integer(rp.k_opt));
  j.set("m_opt", JsonValue::integer(rp.m_opt));
  j.set("m_star", JsonValue::integer(rp.m_star));
  j.set("m_block", JsonValue::integer(rp.m_block));
  j.set("target_exponent", JsonValue::number(rp.target_exponent));
  j.set("tb_exponent", JsonValue::number(rp.tb_exponent));
  j.set("eb_exponent", JsonValue::number(rp.eb_exponent));
  j.set("sd_exponent", JsonValue::number(rp.sd_exponent));
  j.set("gd_threshold", JsonValue::number(rp.gd_threshold));
  j.set("ratio_lhs", JsonValue::number(rp.ratio_lhs));
  j.set("ratio_rhs", JsonValue::number(rp.ratio_rhs));
  j.set("threshold_met", JsonValue::boolean(rp.threshold_met));
  j.set("below_cut_rate_exponent", JsonValue::number(rp.below_cut_rate_exponent));
  j.set("tau2_bias_exponent", JsonValue::number(rp.tau2_bias_exponent));

  if (rp.regime == RateRegime::sub_root_n && rp.threshold_met) {
    PartitionPlan plan = hyperbola_partition(cfg.smoothness, cfg.data.n > 0 ? cfg.data.n : 1000);
    JsonValue pj = JsonValue::object();
    pj.set("J", JsonValue::integer(plan.J));
    pj.set("c_star", JsonValue::number(plan.c_star));
    pj.set("q", JsonValue::number(plan.q));
    pj.set("equality_case", JsonValue::boolean(plan.equality_case));
    pj.set("swapped", JsonValue::boolean(plan.swapped));
    pj.set("hyperbola_exponent", JsonValue::number(plan.hyperbola_exponent));
    JsonValue expo = JsonValue::object();
    JsonValue sizes = JsonValue::object();
    for (const auto& [lab, e] : plan.exponent) {
      expo.set(std::to_string(lab), JsonValue::number(e));
      sizes.set(std::to_string(lab), JsonValue::integer(plan.size.at(lab)));
    }
    pj.set("exponents", std::move(expo));
    pj.set("sizes", std::move(sizes));
    JsonValue rects = JsonValue::array();
    for (const auto& r : plan.omega) {
      JsonValue rj = JsonValue::object();
      rj.set("p_lo", JsonValue::integer(r.p_lo));
      rj.set("p_hi", JsonValue::integer(r.p_hi));
      rj.set("b_lo", JsonValue::integer(r.b_lo));
      rj.set("b_hi", JsonValue::integer(r.b_hi));
      rects.push(std::move(rj));
    }
    pj.set("omega", std::move(rects));
    j.set("partition", std::move(pj));
  }
  return j;
}

// ---------------------------------------------------------------------------
// identity suite for the verify task

struct IdentityResult {
  std::string name;
  double max_err = 0.0;
  double tol = 0.0;
  bool pass = false;
};

std::vector<IdentityResult> run_identity_suite(std::uint64_t seed) {
  std::vector<IdentityResult> out;
  auto record = [&out](const std::string& name, double err, double tol) {
    out.push_back({name, err, tol, err <= tol});
  };

  {  // single-nuisance robustness of the first-order kernel
    Rng rng(seed);
    double worst = 0.0;
    for (int rep = 0; rep < 10; ++rep) {
      DiscreteTruth t = random_discrete_truth(rng, 6, true);
      DiscreteTruth wrong = perturb_truth(t, rng, 0.35);
      auto spec = make_functional(FunctionalId::ExpCondCov1b);
      const double psi = t.psi(spec);
      for (int side = 0; side < 2; ++side) {
        ObsKernel h = [&](const std::vector<const Observation*>& o) {
          for (std::size_t g = 0; g < t.n_x(); ++g)
            if ((t.x_atoms.row(static_cast<Eigen::Index>(g)).transpose() - o[0]->x).cwiseAbs().maxCoeff() < 1e-12) {
              const double b = side == 0 ? wrong.b_true(spec, g) : t.b_true(spec, g);
              const double p = side == 0 ? t.p_true(spec, g) : wrong.p_true(spec, g);
              return spec.h_value(*o[0], b, p);
            }
          throw std::logic_error("atom missing");
        };
        worst = std::max(worst, std::fabs(exact_mean_kernel(h, 1, t) - psi));
      }
    }
    record("double_robustness", worst, 1e-12);
  }
  {  // truncation identity
    Rng rng(seed + 1);
    double worst = 0.0;
    for (int rep = 0; rep < 10; ++rep) {
      DiscreteTruth t = random_discrete_truth(rng, 6, true);
      DiscreteTruth wrong = perturb_truth(t, rng, 0.3);
      auto spec = make_functional(FunctionalId::ExpCondCov1b);
      OracleNuisance nu = oracle_nuisance_from(wrong, spec);
      OracleDesign des = oracle_design(build_basis(BasisKind::tensor_poly, 1, 3), 3, wrong, nu);
      const auto tb = oracle_truncation_bias(t, spec, nu, des);
      worst = std::max(worst, std::fabs(tb.tb_direct - tb.tb_projection));
    }
    record("truncation_double_projection", worst, 1e-10);
  }
  {  // estimation-bias identity at orders two and three
    Rng rng(seed + 2);
    double worst = 0.0;
    for (int rep = 0; rep < 5; ++rep) {
      DiscreteTruth t = random_discrete_truth(rng, 5, true);
      DiscreteTruth wrong = perturb_truth(t, rng, 0.3);
      auto spec = make_functional(FunctionalId::ExpCondCov1b);
      OracleNuisance nu = oracle_nuisance_from(wrong, spec);
      OracleDesign des = oracle_design(build_basis(BasisKind::tensor_poly, 1, 3), 3, wrong, nu);
      for (int m : {2, 3}) {
        const auto eb = oracle_estimation_bias(t, spec, nu, des, m);
        worst = std::max(worst, std::fabs(eb.eb_closed - eb.eb_enumeration));
      }
    }
    record("estimation_bias_closed_form", worst, 1e-10);
  }
  {  // chain engine vs brute force
    Rng rng(seed + 3);
    double worst = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
      const int m = 2 + static_cast<int>(rng.next_below(3));
      const int n = m + 3 + static_cast<int>(rng.next_below(6));
      ChainKernel ck;
      const int k1 = 1 + static_cast<int>(rng.next_below(3));
      const int k2 = 1 + static_cast<int>(rng.next_below(3));
      ck.head.resize(n, k1);
      ck.tail.resize(n, m == 2 ? k1 : k2);
      for (int i = 0; i < n; ++i) {
        for (int q = 0; q < ck.head.cols(); ++q) ck.head(i, q) = 2.0 * rng.next_uniform() - 1.0;
        for (int q = 0; q < ck.tail.cols(); ++q) ck.tail(i, q) = 2.0 * rng.next_uniform() - 1.0;
      }
      for (int u = 0; u < m - 2; ++u) {
        DenseMid dm;
        const long rows = u == 0 ? k1 : k2;
        for (int i = 0; i < n; ++i) {
          MatrixXd M(rows, k2);
          for (long a = 0; a < rows; ++a)
            for (long b = 0; b < k2; ++b) M(a, b) = 2.0 * rng.next_uniform() - 1.0;
          dm.mats.push_back(M);
        }
        ck.mids.emplace_back(std::move(dm));
      }
      const double brute = vn_brute_chain(ck);
      worst = std::max(worst, std::fabs(vn_chain(ck) - brute) / (1.0 + std::fabs(brute)));
    }
    record("chain_vs_brute", worst, 1e-10);
  }
  {  // degeneracy and cross-order orthogonality under the fitted law
    Rng rng(seed + 4);
    DiscreteTruth t = random_discrete_truth(rng, 3, true);
    DiscreteTruth wrong = perturb_truth(t, rng, 0.3);
    auto spec = make_functional(FunctionalId::ExpCondCov1b);
    OracleNuisance nu = oracle_nuisance_from(wrong, spec);
    OracleDesign des = oracle_design(build_basis(BasisKind::tensor_poly, 1, 2), 2, wrong, nu);
    const AtomChains ac = atom_chains(wrong, spec, nu, des);
    double worst = 0.0;
    for (int jj : {2, 3}) {
      ChainKernel ck = make_chain(ac.dm, full_ranges(jj, 2), (jj % 2 == 0) ? -1.0 : 1.0);
      worst = std::max(worst, max_conditional_mean_atoms(
                                  [&ck](const std::vector<int>& idx) { return ck.eval(idx); }, jj, ac.prob));
    }
    record("degeneracy", worst, 1e-10);
    ChainKernel c2 = make_chain(ac.dm, full_ranges(2, 2), -1.0);
    ChainKernel c3 = make_chain(ac.dm, full_ranges(3, 2), 1.0);
    auto f2 = [&c2](const std::vector<int>& idx) { return c2.eval(idx); };
    auto f3 = [&c3](const std::vector<int>& idx) { return c3.eval(idx); };
    const double cross = exact_vn_product_mean_atoms(f2, 2, f3, 3, 7, ac.prob) -
                         expected_atom_kernel(f2, 2, ac.prob) * expected_atom_kernel(f3, 3, ac.prob);
    record("cross_order_orthogonality", std::fabs(cross), 1e-10);
  }
  {  // variance-component unbiasedness at order two
    Rng rng(seed + 5);
    DiscreteTruth t = random_discrete_truth(rng, 3, true);
    DiscreteTruth wrong = perturb_truth(t, rng, 0.3);
    auto spec = make_functional(FunctionalId::ExpCondCov1b);
    OracleNuisance nu = oracle_nuisance_from(wrong, spec);
    OracleDesign des = oracle_design(build_basis(BasisKind::tensor_poly, 1, 2), 2, wrong, nu);
    const AtomChains ac = atom_chains(wrong, spec, nu, des);
    ChainKernel ck = make_chain(ac.dm, full_ranges(2, 2), -1.0);
    auto f = [&ck](const std::vector<int>& idx) { return ck.eval(idx); };
    auto sym_sq = [&f](const std::vector<int>& idx) {
      const std::vector<int> rev = {idx[1], idx[0]};
      const double sym = 0.5 * (f(idx) + f(rev));
      return sym * sym;
    };
    const int n = 6;
    const double lhs = expected_atom_kernel(sym_sq, 2, ac.prob) / detail::comb(n, 2);
    const double rhs = exact_vn_product_mean_atoms(f, 2, f, 2, n, ac.prob) -
                       std::pow(expected_atom_kernel(f, 2, ac.prob), 2);
    record("variance_component_unbiasedness", std::fabs(lhs - rhs), 1e-10);
  }
  return out;
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg) {
  RunResult rr;
  if (cfg.threads > 0) thread_cap() = static_cast<std::size_t>(cfg.threads);
  try {
    switch (cfg.task) {
      case TaskKind::plan: {
        JsonValue j = JsonValue::object();
        j.set("schema_version", JsonValue::integer(1));
        j.set("task", JsonValue::string("plan"));
        j.set("plan", plan_json(cfg));
        const std::string path = cfg.out_prefix + ".json";
        write_text_file(path, j.dump());
        rr.files.push_back(path);
        break;
      }
      case TaskKind::estimate: {
        TruthBundle truth = make_truth(cfg);
        EstimateReport full;
        RepRecord rec = run_one_rep(cfg, truth, cfg.seed, 0, &full);
        const bool has_orders = !full.order_terms.empty();
        JsonValue j = JsonValue::object();
        j.set("schema_version", JsonValue::integer(1));
        j.set("task", JsonValue::string("estimate"));
        j.set("estimator", JsonValue::string(rec.estimator));
        j.set("psi_hat", JsonValue::number(rec.psi_hat));
        j.set("w", JsonValue::number(rec.w));
        j.set("lo", JsonValue::number(rec.lo));
        j.set("hi", JsonValue::number(rec.hi));
        j.set("m", JsonValue::integer(rec.m));
        j.set("k", JsonValue::integer(rec.k));
        j.set("n", JsonValue::integer(rec.n));
        j.set("truth_psi", JsonValue::number(rec.truth_psi));
        j.set("seed", JsonValue::integer(static_cast<long long>(cfg.seed)));
        if (has_orders) j.set("report", report_json(full));
        const std::string path = cfg.out_prefix + ".json";
        write_text_file(path, j.dump());
        rr.files.push_back(path);
        const std::string csv_path = cfg.out_prefix + ".csv";
        if (has_orders) {
          write_text_file(csv_path, order_table_csv(full));
        } else {
          McSummary single;
          single.reps = {rec};
          write_text_file(csv_path, rep_table_csv(single));
        }
        rr.files.push_back(csv_path);
        break;
      }
      case TaskKind::mc: {
        TruthBundle truth = make_truth(cfg);
        McSummary summary = monte_carlo(cfg.mc_reps, cfg.seed, [&](std::uint64_t seed, long rep) {
          return run_one_rep(cfg, truth, seed, rep);
        });
        JsonValue j = JsonValue::object();
        j.set("schema_version", JsonValue::integer(1));
        j.set("task", JsonValue::string("mc"));
        j.set("summary", summary_json(summary));
        const std::string path = cfg.out_prefix + ".json";
        write_text_file(path, j.dump());
        rr.files.push_back(path);
        const std::string csv_path = cfg.out_prefix + ".csv";
        write_text_file(csv_path, rep_table_csv(summary));
        rr.files.push_back(csv_path);
        break;
      }
      case TaskKind::verify: {
        const auto results = run_identity_suite(cfg.seed);
        JsonValue arr = JsonValue::array();
        bool all_pass = true;
        std::ostringstream table;
        for (const auto& r : results) {
          all_pass = all_pass && r.pass;
          JsonValue e = JsonValue::object();
          e.set("identity", JsonValue::string(r.name));
          e.set("max_err", JsonValue::number(r.max_err));
          e.set("tol", JsonValue::number(r.tol));
          e.set("pass", JsonValue::boolean(r.pass));
          arr.push(std::move(e));
          table << (r.pass ? "PASS " : "FAIL ") << r.name << "  max_err=" << format_double(r.max_err)
                << "  tol=" << format_double(r.tol) << "\n";
        }
        JsonValue j = JsonValue::object();
        j.set("schema_version", JsonValue::integer(1));
        j.set("task", JsonValue::string("verify"));
        j.set("all_pass", JsonValue::boolean(all_pass));
        j.set("identities", std::move(arr));
        const std::string path = cfg.out_prefix + ".json";
        write_text_file(path, j.dump());
        rr.files.push_back(path);
        rr.message = table.str();
        if (!all_pass) rr.exit_code = 1;
        break;
      }
    }
  } catch (const ConfigError& e) {
    rr.exit_code = 2;
    rr.message = std::string("config error: ") + e.what();
  } catch (const std::invalid_argument& e) {
    rr.exit_code = 2;
    rr.message = std::string("config error: ") + e.what();
  } catch (const std::exception& e) {
    rr.exit_code = 1;
    rr.message = std::string("runtime error: ") + e.what();
    try {
      JsonValue j = JsonValue::object();
      j.set("schema_version", JsonValue::integer(1));
      j.set("error", JsonValue::string(e.what()));
      write_text_file(cfg.out_prefix + ".error.json", j.dump());
      rr.files.push_back(cfg.out_prefix + ".error.json");
    } catch (...) {
    }
  }
  return rr;
}

RunResult run_config_file(const std::string& path, const std::string& task_override, std::uint64_t seed_override,
                          int threads_override, const std::string& out_override) {
  RunResult rr;
  ExperimentConfig cfg;
  try {
    cfg = load_config(path);
    if (!task_override.empty()) {
      if (task_override == "estimate") cfg.task = TaskKind::estimate;
      else if (task_override == "plan") cfg.task = TaskKind::plan;
      else if (task_override == "verify") cfg.task = TaskKind::verify;
      else if (task_override == "mc") cfg.task = TaskKind::mc;
      else throw ConfigError("unknown task: " + task_override);
    }
    if (seed_override != 0) cfg.seed = seed_override;
    if (threads_override > 0) cfg.threads = threads_override;
    if (!out_override.empty()) cfg.out_prefix = out_override;
  } catch (const std::exception& e) {
    rr.exit_code = 2;
    rr.message = std::string("config error: ") + e.what();
    return rr;
  }
  return run_experiment(cfg);
}

}  // namespace hoif
