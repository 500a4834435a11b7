#pragma once

// Simulation harness reproducing the operating-characteristics studies:
// data generation under the preset simulation truths, first-stage
// estimation per endpoint, GLS fitting with Wald (GLS) and parametric
// bootstrap (GLS-B) intervals, RMSE and coverage aggregation.

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dosekit/first_stage.hpp"
#include "dosekit/gls.hpp"
#include "dosekit/parallel.hpp"
#include "dosekit/rng.hpp"
#include "dosekit/types.hpp"

namespace dosekit {

enum class Endpoint { Normal, Binary, Count, TimeToEvent };

inline const char* endpoint_name(Endpoint e) {
  switch (e) {
    case Endpoint::Normal: return "normal";
    case Endpoint::Binary: return "binary";
    case Endpoint::Count: return "count";
    case Endpoint::TimeToEvent: return "tte";
  }
  throw validation_error("endpoint_name: unknown endpoint");
}

inline Endpoint endpoint_from_string(const std::string& s) {
  if (s == "normal") return Endpoint::Normal;
  if (s == "binary") return Endpoint::Binary;
  if (s == "count") return Endpoint::Count;
  if (s == "tte") return Endpoint::TimeToEvent;
  throw validation_error("unknown endpoint: " + s);
}

// Simulation truth in the (theta0, theta1, theta2) parameterization of the
// preset table: emax theta0 + theta1 x/(theta2+x), exponential
// theta0 + theta1 (exp(x/theta2)-1), quadratic theta0 + theta1 x + theta2 x^2.
inline double preset_mean(ModelFamily family, const std::array<double, 3>& th, double x) {
  switch (family) {
    case ModelFamily::Emax: return th[0] + th[1] * x / (th[2] + x);
    case ModelFamily::Exponential: return th[0] + th[1] * std::expm1(x / th[2]);
    case ModelFamily::Quadratic: return th[0] + th[1] * x + th[2] * x * x;
    default: throw validation_error("preset_mean: unsupported family for simulation presets");
  }
}

struct SimScenario {
  std::string name;
  Endpoint endpoint = Endpoint::Count;
  ModelFamily family = ModelFamily::Emax;
  std::array<double, 3> theta = {0.0, 0.0, 0.0};
  DoseDesign design{std::vector<double>{0.0, 0.05, 0.2, 0.5, 0.8, 1.0}};
  int n_per_arm = 100;
  int replicates = 500;
  std::uint64_t seed = 1;
  // nuisance: sigma = 1 (normal), overdispersion k = 1 (count),
  // administrative censoring at t = 10 (time-to-event)
  double sigma = 1.0;
  double overdispersion = 1.0;
  double censor_time = 10.0;

  double true_mean(double x) const { return preset_mean(family, theta, x); }
  double max_effect_dose() const {
    double best = design[1];
    double best_eff = 0.0;
    for (std::size_t i = 1; i < design.size(); ++i) {
      const double eff = std::abs(true_mean(design[i]) - true_mean(0.0));
      if (eff > best_eff) {
        best_eff = eff;
        best = design[i];
      }
    }
    return best;
  }
};

// Preset scenario table keyed as table1-<endpoint>-<family>.
inline SimScenario preset_scenario(const std::string& name) {
  auto make = [&](Endpoint e, ModelFamily f, std::array<double, 3> th) {
    SimScenario s;
    s.name = name;
    s.endpoint = e;
    s.family = f;
    s.theta = th;
    return s;
  };
  if (name == "table1-binary-quadratic") return make(Endpoint::Binary, ModelFamily::Quadratic, {-1.734, 4.335, -2.7094});
  if (name == "table1-binary-emax") return make(Endpoint::Binary, ModelFamily::Emax, {-1.734, 1.8207, 0.05});
  if (name == "table1-binary-exponential") return make(Endpoint::Binary, ModelFamily::Exponential, {-1.734, 0.01176, 0.2});
  if (name == "table1-count-quadratic") return make(Endpoint::Count, ModelFamily::Quadratic, {2.0, -2.0, 1.25});
  if (name == "table1-count-emax") return make(Endpoint::Count, ModelFamily::Emax, {2.0, -0.84, 0.05});
  if (name == "table1-count-exponential") return make(Endpoint::Count, ModelFamily::Exponential, {2.0, -0.005427, 0.2});
  if (name == "table1-tte-quadratic") return make(Endpoint::TimeToEvent, ModelFamily::Quadratic, {0.0, -1.8876, 1.1797});
  if (name == "table1-tte-emax") return make(Endpoint::TimeToEvent, ModelFamily::Emax, {0.0, -0.7928, 0.05});
  if (name == "table1-tte-exponential") return make(Endpoint::TimeToEvent, ModelFamily::Exponential, {0.0, -0.005122, 0.2});
  if (name == "table1-normal-quadratic") return make(Endpoint::Normal, ModelFamily::Quadratic, {0.0, 2.61, 1.633});
  if (name == "table1-normal-emax") return make(Endpoint::Normal, ModelFamily::Emax, {0.0, 1.097, 0.05});
  if (name == "table1-normal-exponential") return make(Endpoint::Normal, ModelFamily::Exponential, {0.0, 0.007089, 0.2});
  throw validation_error("unknown scenario preset: " + name);
}

inline std::vector<std::string> preset_scenario_names() {
  return {"table1-binary-quadratic", "table1-binary-emax",  "table1-binary-exponential",
          "table1-count-quadratic",  "table1-count-emax",   "table1-count-exponential",
          "table1-tte-quadratic",    "table1-tte-emax",     "table1-tte-exponential",
          "table1-normal-quadratic", "table1-normal-emax",  "table1-normal-exponential"};
}

struct SubjectData {
  Endpoint endpoint = Endpoint::Normal;
  std::vector<NormalRow> normal;
  std::vector<CountRow> count;
  std::vector<BinaryGroup> binary;
  std::vector<TteRow> tte;
};

inline Rng replicate_stream(const SimScenario& sc, std::uint64_t replicate_index,
                            std::uint64_t purpose = 0) {
  return Rng(hash_combine(sc.seed, hash_string(sc.name.empty() ? "scenario" : sc.name.c_str())),
             replicate_index, purpose);
}

// Deterministic per (seed, scenario, replicate-index).
inline SubjectData generate(const SimScenario& sc, std::uint64_t replicate_index) {
  Rng rng = replicate_stream(sc, replicate_index);
  SubjectData out;
  out.endpoint = sc.endpoint;
  for (std::size_t d = 0; d < sc.design.size(); ++d) {
    const double x = sc.design[d];
    const double m = sc.true_mean(x);
    switch (sc.endpoint) {
      case Endpoint::Normal:
        for (int i = 0; i < sc.n_per_arm; ++i) out.normal.push_back({x, rng.normal(m, sc.sigma)});
        break;
      case Endpoint::Binary: {
        const double p = 1.0 / (1.0 + std::exp(-m));
        long succ = 0;
        for (int i = 0; i < sc.n_per_arm; ++i) succ += rng.bernoulli(p) ? 1 : 0;
        out.binary.push_back({x, succ, sc.n_per_arm});
        break;
      }
      case Endpoint::Count:
        for (int i = 0; i < sc.n_per_arm; ++i)
          out.count.push_back({x, rng.negative_binomial(std::exp(m), sc.overdispersion)});
        break;
      case Endpoint::TimeToEvent:
        for (int i = 0; i < sc.n_per_arm; ++i) {
          const double t = rng.exponential(std::exp(m));
          out.tte.push_back({x, std::min(t, sc.censor_time), t <= sc.censor_time});
        }
        break;
    }
  }
  return out;
}

inline AnovaEstimate first_stage_for(const SubjectData& data, bool haldane = true) {
  switch (data.endpoint) {
    case Endpoint::Normal: return anova_normal(data.normal);
    case Endpoint::Binary: return logistic_saturated(data.binary, haldane);
    case Endpoint::Count: return negbin_saturated(data.count);
    case Endpoint::TimeToEvent: return coxph_factor(data.tte);
  }
  throw validation_error("first_stage_for: unknown endpoint");
}

// Fit bounds used by the operating-characteristics studies.
inline FitBounds study_fit_bounds(ModelFamily family, const DoseDesign& design) {
  const double xk = design.max_dose();
  switch (family) {
    case ModelFamily::Emax: return {{{0.001 * xk, 5.0 * xk}}};
    case ModelFamily::Exponential: return {{{0.05 * xk, 5.0 * xk}}};
    default: return default_fit_bounds(family, design);
  }
}

// True parameter vector on the scale the analysis estimates: the table
// parameterization for full fits, the Cox log-hazard-ratio scale (no
// intercept, slope negated) for time-to-event.
inline Vector analysis_true_params(const SimScenario& sc) {
  const bool tte = sc.endpoint == Endpoint::TimeToEvent;
  if (!tte) {
    Vector v(3);
    v << sc.theta[0], sc.theta[1], sc.theta[2];
    return v;
  }
  Vector v(2);
  v << -sc.theta[1], (sc.family == ModelFamily::Quadratic ? -sc.theta[2] : sc.theta[2]);
  return v;
}

// Placebo-adjusted truth on the analysis scale (log hazard ratio for tte).
inline double analysis_true_mean(const SimScenario& sc, double x) {
  const double m = sc.true_mean(x);
  if (sc.endpoint == Endpoint::TimeToEvent) return -(m - sc.true_mean(0.0));
  return m;
}

// Fitted parameters mapped onto the same scale as analysis_true_params:
// quadratic fits are reported in the polynomial parameterization, in which
// the model is linear and the GLS covariance is exact.
inline Vector analysis_params(const FittedModel& fit) {
  if (fit.family == ModelFamily::Quadratic) {
    if (fit.plac_adj) {
      Vector v(2);
      v << fit.theta[0], fit.theta[0] * fit.theta[1];
      return v;
    }
    Vector v(3);
    v << fit.theta[0], fit.theta[1], fit.theta[1] * fit.theta[2];
    return v;
  }
  return fit.theta;
}

inline Matrix analysis_covariance(const FittedModel& fit) {
  if (fit.theta_cov.size() == 0) return fit.theta_cov;
  if (fit.family != ModelFamily::Quadratic) return fit.theta_cov;
  // exact Jacobian of the (theta -> beta) map at the fit
  if (fit.plac_adj) {
    Matrix j(2, 2);
    j << 1.0, 0.0, fit.theta[1], fit.theta[0];
    return j * fit.theta_cov * j.transpose();
  }
  Matrix j = Matrix::Identity(3, 3);
  j(2, 1) = fit.theta[2];
  j(2, 2) = fit.theta[1];
  return j * fit.theta_cov * j.transpose();
}

// Root mean squared estimation error averaged over the design doses.
template <typename PredictFn, typename TruthFn>
double rmse_dose_response(const PredictFn& fitted, const TruthFn& truth, const DoseDesign& design,
                          bool include_placebo = true) {
  double ss = 0.0;
  int n = 0;
  if (include_placebo && design.placebo_adjusted()) {
    ss += 0.0;  // both curves vanish at placebo by construction
    ++n;
  }
  for (std::size_t i = 0; i < design.size(); ++i) {
    const double d = fitted(design[i]) - truth(design[i]);
    ss += d * d;
    ++n;
  }
  return std::sqrt(ss / static_cast<double>(n));
}

inline double rmse_dose_response(const FittedModel& fit, const SimScenario& sc) {
  auto pred = [&](double x) { return fit.predict(x); };
  auto truth = [&](double x) { return analysis_true_mean(sc, x); };
  // six design doses; for placebo-adjusted fits dose 0 contributes zero error
  if (sc.endpoint == Endpoint::TimeToEvent)
    return rmse_dose_response(pred, truth, sc.design.active_part(), true);
  return rmse_dose_response(pred, truth, sc.design, false);
}

struct MethodCoverage {
  Vector per_param;      // coverage per component, over analyzed replicates
  double mean = 0.0;     // average of per_param
  double joint = 0.0;    // all components covered simultaneously
  int intervals = 0;     // replicates that produced an interval set
};

struct ScenarioCell {
  std::string scenario;
  int n_per_arm = 0;
  int replicates = 0;
  int failures = 0;          // replicates whose analysis failed outright
  int at_bound = 0;          // fits that hit a nonlinear-parameter bound
  double rmse_mean = 0.0;
  MethodCoverage gls;
  MethodCoverage gls_b;
  int boot_draws = 0;
  int boot_failures = 0;     // replicates whose bootstrap arm failed
  double ci_level = 0.90;
};

struct SimReport {
  std::vector<ScenarioCell> cells;
};

struct StudyConfig {
  bool run_gls = true;
  bool run_gls_b = true;
  int boot_draws = 500;
  double ci_level = 0.90;
  unsigned threads = 1;
};

namespace detail {
struct ReplicateOutcome {
  bool ok = false;
  bool at_bound = false;
  bool gls_interval = false;
  bool glsb_ok = false;
  double rmse = 0.0;
  std::array<bool, 3> cover_gls{false, false, false};
  std::array<bool, 3> cover_glsb{false, false, false};
};
}  // namespace detail

// One scenario at one sample size: generate -> first stage -> GLS fit ->
// Wald and bootstrap coverage of the true parameters, plus the RMSE of the
// fitted dose-response. Replicate failures are logged, never fatal. A fit
// on a parameter bound has no usable asymptotic covariance, so the Wald arm
// produces no interval there and the replicate counts as not covered.
inline ScenarioCell run_cell(const SimScenario& sc, const StudyConfig& cfg) {
  const Vector truth = analysis_true_params(sc);
  const int dim = static_cast<int>(truth.size());
  const double z = norm_quantile(0.5 + cfg.ci_level / 2.0);
  const double q_lo = (1.0 - cfg.ci_level) / 2.0;
  const double q_hi = 1.0 - q_lo;

  std::vector<detail::ReplicateOutcome> outcomes(static_cast<std::size_t>(sc.replicates));
  parallel_for_indexed(static_cast<std::size_t>(sc.replicates), cfg.threads, [&](std::size_t rep) {
    detail::ReplicateOutcome& oc = outcomes[rep];
    try {
      const SubjectData data = generate(sc, rep);
      const AnovaEstimate est = first_stage_for(data);
      const FitBounds bounds = study_fit_bounds(sc.family, est.design);
      const FittedModel fit = gls_fit(est, sc.family, bounds);
      oc.ok = true;
      oc.at_bound = fit.any_at_bound();
      oc.rmse = rmse_dose_response(fit, sc);

      if (cfg.run_gls && fit.cov_reliable) {
        const Vector est_p = analysis_params(fit);
        const Matrix cov_p = analysis_covariance(fit);
        oc.gls_interval = true;
        for (int j = 0; j < dim; ++j) {
          const double se = std::sqrt(std::max(cov_p(j, j), 0.0));
          oc.cover_gls[static_cast<std::size_t>(j)] =
              std::abs(est_p[j] - truth[j]) <= z * se;
        }
      }
      if (cfg.run_gls_b) {
        try {
          Rng boot_seed_rng = replicate_stream(sc, rep, 0xB00457ULL);
          const BootstrapResult boot =
              bootstrap(est, sc.family, bounds, cfg.boot_draws, boot_seed_rng.next_u64(), q_lo, q_hi, 2);
          // per-component quantiles on the analysis scale
          const Eigen::Index nb = boot.theta_draws.rows();
          std::vector<double> comp(static_cast<std::size_t>(nb));
          oc.glsb_ok = true;
          for (int j = 0; j < dim; ++j) {
            for (Eigen::Index i = 0; i < nb; ++i) {
              FittedModel tmp;
              tmp.family = sc.family;
              tmp.plac_adj = est.plac_adj;
              tmp.theta = boot.theta_draws.row(i).transpose();
              comp[static_cast<std::size_t>(i)] = analysis_params(tmp)[j];
            }
            const double lo = quantile_type7(comp, q_lo);
            const double hi = quantile_type7(comp, q_hi);
            oc.cover_glsb[static_cast<std::size_t>(j)] = lo <= truth[j] && truth[j] <= hi;
          }
        } catch (const std::exception&) {
          oc.glsb_ok = false;
        }
      }
    } catch (const std::exception&) {
      oc.ok = false;
    }
  });

  ScenarioCell cell;
  cell.scenario = sc.name;
  cell.n_per_arm = sc.n_per_arm;
  cell.replicates = sc.replicates;
  cell.boot_draws = cfg.run_gls_b ? cfg.boot_draws : 0;
  cell.ci_level = cfg.ci_level;
  cell.gls.per_param = Vector::Zero(dim);
  cell.gls_b.per_param = Vector::Zero(dim);
  int analyzed = 0;
  int glsb_analyzed = 0;
  double rmse_sum = 0.0;
  int gls_joint = 0, glsb_joint = 0;
  for (const auto& oc : outcomes) {
    if (!oc.ok) {
      ++cell.failures;
      continue;
    }
    ++analyzed;
    rmse_sum += oc.rmse;
    if (oc.at_bound) ++cell.at_bound;
    bool all_g = true;
    for (int j = 0; j < dim; ++j) {
      if (oc.cover_gls[static_cast<std::size_t>(j)]) cell.gls.per_param[j] += 1.0;
      else all_g = false;
    }
    if (all_g && oc.gls_interval) ++gls_joint;
    if (oc.gls_interval) ++cell.gls.intervals;
    if (cfg.run_gls_b) {
      if (!oc.glsb_ok) {
        ++cell.boot_failures;
      } else {
        ++glsb_analyzed;
        bool all_b = true;
        for (int j = 0; j < dim; ++j) {
          if (oc.cover_glsb[static_cast<std::size_t>(j)]) cell.gls_b.per_param[j] += 1.0;
          else all_b = false;
        }
        if (all_b) ++glsb_joint;
      }
    }
  }
  if (analyzed > 0) {
    cell.rmse_mean = rmse_sum / analyzed;
    cell.gls.per_param /= static_cast<double>(analyzed);
    cell.gls.mean = cell.gls.per_param.mean();
    cell.gls.joint = static_cast<double>(gls_joint) / analyzed;
  }
  if (glsb_analyzed > 0) {
    cell.gls_b.per_param /= static_cast<double>(glsb_analyzed);
    cell.gls_b.mean = cell.gls_b.per_param.mean();
    cell.gls_b.joint = static_cast<double>(glsb_joint) / glsb_analyzed;
    cell.gls_b.intervals = glsb_analyzed;
  }
  return cell;
}

inline SimReport run_study(const SimScenario& sc, const std::vector<int>& n_list,
                           const StudyConfig& cfg) {
  SimReport report;
  for (int n : n_list) {
    SimScenario s = sc;
    s.n_per_arm = n;
    report.cells.push_back(run_cell(s, cfg));
  }
  return report;
}

inline std::vector<int> desk_sample_sizes() { return {30, 100, 300}; }
inline std::vector<int> full_paper_sample_sizes() { return {15, 30, 50, 100, 300, 1000}; }

struct PowerResult {
  double power = 0.0;
  int replicates = 0;
  int failures = 0;
};

// Simulated power of the endpoint-appropriate two-sample Wald test of the
// max-effect dose against placebo, one-sided at the given level.
inline PowerResult power_two_sample(const SimScenario& sc, int n_per_arm, int replicates,
                                    double alpha = 0.05, unsigned threads = 1) {
  const double x_star = sc.max_effect_dose();
  const double effect = sc.true_mean(x_star) - sc.true_mean(0.0);
  const double direction = effect >= 0.0 ? 1.0 : -1.0;
  const double crit = norm_quantile(1.0 - alpha);

  std::vector<int> verdict(static_cast<std::size_t>(replicates), -1);
  parallel_for_indexed(static_cast<std::size_t>(replicates), threads, [&](std::size_t rep) {
    SimScenario two = sc;
    two.name = sc.name + "-power";
    two.n_per_arm = n_per_arm;
    two.design = DoseDesign({0.0, x_star});
    try {
      const SubjectData data = generate(two, rep);
      const AnovaEstimate est = first_stage_for(data);
      double stat;
      if (est.plac_adj) {
        // Cox scale: the hazard moves against the mean
        stat = -direction * est.mu_hat[0] / std::sqrt(est.S(0, 0));
      } else {
        stat = direction * (est.mu_hat[1] - est.mu_hat[0]) /
               std::sqrt(est.S(0, 0) + est.S(1, 1) - 2.0 * est.S(0, 1));
      }
      verdict[rep] = stat > crit ? 1 : 0;
    } catch (const std::exception&) {
      verdict[rep] = -1;
    }
  });

  PowerResult out;
  out.replicates = replicates;
  int rejected = 0, valid = 0;
  for (int v : verdict) {
    if (v < 0) ++out.failures;
    else {
      ++valid;
      rejected += v;
    }
  }
  out.power = valid > 0 ? static_cast<double>(rejected) / valid : 0.0;
  return out;
}

}  // namespace dosekit
