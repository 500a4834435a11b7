// dosekit: dose-response signal testing and model fitting from first-stage
// summary statistics, with subject-level front ends and a simulation
// harness. Subcommands: contrasts, mctest, fit, mcpmod, firststage,
// simulate, crit.

#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "dosekit/dosekit.hpp"

namespace dk = dosekit;
using dk::json;

namespace {

std::uint64_t env_default_seed() {
  const char* env = std::getenv("DOSEKIT_SEED");
  if (env == nullptr) return 1;
  return static_cast<std::uint64_t>(std::strtoull(env, nullptr, 10));
}

struct EstimateInputs {
  std::string mu_path;
  std::string cov_path;
  std::string est_path;
  bool plac_adj = false;

  void add_options(CLI::App* cmd, bool with_placadj = true) {
    cmd->add_option("--mu", mu_path, "dose,mu CSV of first-stage estimates");
    cmd->add_option("--cov", cov_path, "dense covariance CSV (header of dose labels)");
    cmd->add_option("--est", est_path, "first-stage estimate JSON (alternative to --mu/--cov)");
    if (with_placadj)
      cmd->add_flag("--plac-adj", plac_adj, "estimates are placebo-adjusted (active doses only)");
  }

  dk::AnovaEstimate load() const {
    if (!est_path.empty()) {
      if (!mu_path.empty() || !cov_path.empty())
        throw dk::validation_error("give either --est or --mu/--cov, not both");
      return dk::read_estimate_json(est_path);
    }
    if (mu_path.empty() || cov_path.empty())
      throw dk::validation_error("need --mu and --cov (or --est)");
    const dk::MuTable mt = dk::read_mu_csv(mu_path);
    const dk::Matrix s = dk::read_cov_csv(cov_path);
    return dk::AnovaEstimate(dk::DoseDesign(mt.doses, plac_adj), mt.mu, s);
  }
};

struct QmcOptions {
  std::uint64_t seed = env_default_seed();
  double tol = 1e-5;

  void add_options(CLI::App* cmd) {
    cmd->add_option("--mvn-seed", seed, "seed for the multivariate-normal integration");
    cmd->add_option("--mvn-tol", tol, "target absolute error of the integration");
  }

  dk::QmcConfig config() const {
    dk::QmcConfig cfg;
    cfg.seed = seed;
    cfg.target_abs_error = tol;
    return cfg;
  }
};

std::string fmt(double v, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", prec, v);
  return buf;
}

std::string fmt_p(double p) {
  if (p < 0.001) return "<0.001";
  return fmt(p, 4);
}

json fitted_to_json(const dk::FittedModel& fit) {
  json j;
  j["family"] = dk::family_name(fit.family);
  j["placAdj"] = fit.plac_adj;
  j["theta"] = std::vector<double>(fit.theta.data(), fit.theta.data() + fit.theta.size());
  j["criterion"] = fit.criterion;
  j["gAIC"] = fit.gaic;
  j["atBound"] = fit.at_bound;
  j["covReliable"] = fit.cov_reliable;
  if (fit.theta_cov.size() > 0) {
    json cov = json::array();
    for (Eigen::Index i = 0; i < fit.theta_cov.rows(); ++i) {
      json row = json::array();
      for (Eigen::Index k = 0; k < fit.theta_cov.cols(); ++k) row.push_back(fit.theta_cov(i, k));
      cov.push_back(row);
    }
    j["thetaCov"] = cov;
  }
  return j;
}

json mct_to_json(const dk::MctResult& res) {
  json j;
  j["schema"] = dk::kSchemaTag;
  j["alpha"] = res.alpha;
  j["labels"] = res.contrasts.labels;
  j["z"] = std::vector<double>(res.z.data(), res.z.data() + res.z.size());
  j["zMax"] = res.z_max;
  j["critical"] = res.critical;
  j["adjP"] = std::vector<double>(res.adjusted_p.data(),
                                  res.adjusted_p.data() + res.adjusted_p.size());
  j["significant"] = res.significant;
  return j;
}

void print_mct_table(const dk::MctResult& res) {
  std::printf("Multiple Contrast Test:\n\n");
  std::printf("%-14s %8s %8s\n", "", "z-Stat", "adj-p");
  // display ordered by descending statistic
  std::vector<std::size_t> order(res.contrasts.labels.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return res.z[static_cast<Eigen::Index>(a)] > res.z[static_cast<Eigen::Index>(b)];
  });
  for (std::size_t i : order) {
    std::printf("%-14s %8s %8s\n", res.contrasts.labels[i].c_str(),
                fmt(res.z[static_cast<Eigen::Index>(i)], 3).c_str(),
                fmt_p(res.adjusted_p[static_cast<Eigen::Index>(i)]).c_str());
  }
  std::printf("\nCritical value: %s (alpha = %g, one-sided)\n", fmt(res.critical, 3).c_str(),
              res.alpha);
}

dk::ModelSet load_models(const std::string& path, const dk::AnovaEstimate& est) {
  dk::ModelSet set = dk::read_models_json(path);
  if (set.design.placebo_adjusted() != est.plac_adj) {
    // allow a full-design model file with placebo-adjusted estimates
    if (!est.plac_adj || set.design.placebo_adjusted())
      throw dk::validation_error("model set and estimate disagree on placebo adjustment");
    set.design = dk::DoseDesign(
        std::vector<double>(set.design.doses().begin() + 1, set.design.doses().end()), true);
  }
  if (!(set.design == est.design))
    throw dk::validation_error("model set doses do not match the estimate's doses");
  return set;
}

dk::AnovaEstimate apply_direction(const dk::AnovaEstimate& est, const std::string& direction) {
  if (direction == "inc") return est;
  if (direction == "dec") return dk::AnovaEstimate(est.design, -est.mu_hat, est.S);
  throw dk::validation_error("--direction must be inc or dec");
}

int cmd_contrasts(const std::string& models_path, const std::string& cov_path,
                  const std::string& out_csv, const std::string& plot_path, bool plac_adj) {
  const dk::Matrix s = dk::read_cov_csv(cov_path);
  dk::ModelSet set = dk::read_models_json(models_path);
  if (set.design.placebo_adjusted() != plac_adj) {
    if (plac_adj && !set.design.placebo_adjusted())
      set.design = dk::DoseDesign(
          std::vector<double>(set.design.doses().begin() + 1, set.design.doses().end()), true);
    else
      throw dk::validation_error("--plac-adj disagrees with the model set");
  }
  const dk::ContrastMatrix cm = dk::contrast_matrix(set.models, set.design, s, plac_adj);

  std::string csv = "dose";
  for (const auto& label : cm.labels) csv += "," + label;
  csv += "\n";
  for (Eigen::Index i = 0; i < cm.columns.rows(); ++i) {
    csv += dk::detail::format_double(set.design[static_cast<std::size_t>(i)]);
    for (Eigen::Index m = 0; m < cm.columns.cols(); ++m)
      csv += std::string(",") + dk::detail::format_double(cm.columns(i, m));
    csv += "\n";
  }
  if (out_csv.empty()) {
    std::fputs(csv.c_str(), stdout);
  } else {
    dk::write_text_file(out_csv, csv);
    std::printf("wrote %s (%lld x %lld contrast matrix)\n", out_csv.c_str(),
                static_cast<long long>(cm.columns.rows()),
                static_cast<long long>(cm.columns.cols()));
  }
  if (!plot_path.empty())
    dk::write_text_file(plot_path, dk::render_candidate_shapes_svg(set.models, set.design));
  return 0;
}

int cmd_crit(const std::string& corr_path, double alpha, const QmcOptions& qmc,
             const std::string& out_json) {
  const dk::Matrix r = dk::read_cov_csv(corr_path);
  const double crit = dk::critical_value(r, alpha, qmc.config());
  std::printf("Critical value: %.4f (alpha = %g, one-sided)\n", crit, alpha);
  if (!out_json.empty()) {
    json j;
    j["schema"] = dk::kSchemaTag;
    j["alpha"] = alpha;
    j["critical"] = crit;
    dk::write_json_file(out_json, j);
  }
  return 0;
}

int cmd_mctest(const EstimateInputs& inputs, const std::string& models_path, double alpha,
               const std::string& direction, const std::string& planned_cov_path,
               const QmcOptions& qmc, const std::string& out_json, bool emit_json) {
  const dk::AnovaEstimate est = apply_direction(inputs.load(), direction);
  const dk::ModelSet set = load_models(models_path, est);

  dk::MctResult res;
  if (!planned_cov_path.empty()) {
    const dk::Matrix planned = dk::read_cov_csv(planned_cov_path);
    res = dk::mct_test(est, set.models, alpha, dk::ContrastSource::Planned, &planned, qmc.config());
  } else {
    res = dk::mct_test(est, set.models, alpha, dk::ContrastSource::Observed, nullptr, qmc.config());
  }
  if (emit_json) {
    std::fputs((mct_to_json(res).dump(2) + "\n").c_str(), stdout);
  } else {
    print_mct_table(res);
  }
  if (!out_json.empty()) dk::write_json_file(out_json, mct_to_json(res));
  return 0;
}

int cmd_fit(const EstimateInputs& inputs, const std::string& family_str,
            const std::vector<double>& bounds_opt, const std::vector<double>& h_bounds_opt,
            int boot_draws, std::uint64_t seed, double delta, const std::string& direction,
            double tau, const std::string& out_json, const std::string& plot_path,
            bool emit_json) {
  const dk::AnovaEstimate est = inputs.load();
  const dk::ModelFamily family = dk::family_from_string(family_str);
  dk::FitBounds bounds = dk::default_fit_bounds(family, est.design);
  if (!bounds_opt.empty()) {
    if (bounds_opt.size() != 2 || bounds.nl.empty())
      throw dk::validation_error("--bounds expects lo,hi for the first nonlinear parameter");
    bounds.nl[0] = {bounds_opt[0], bounds_opt[1]};
  }
  if (!h_bounds_opt.empty()) {
    if (h_bounds_opt.size() != 2 || bounds.nl.size() < 2)
      throw dk::validation_error("--h-bounds applies to the sigEmax Hill parameter only");
    bounds.nl[1] = {h_bounds_opt[0], h_bounds_opt[1]};
  }
  const dk::FittedModel fit = dk::gls_fit(est, family, bounds);

  json j = fitted_to_json(fit);
  j["schema"] = dk::kSchemaTag;
  if (tau != 2.0) j["criterionIC"] = {{"tau", tau}, {"value", dk::gaic(fit, tau)}};
  if (delta > 0.0) {
    const auto dir = direction == "dec" ? dk::Direction::Decrease : dk::Direction::Increase;
    const auto td = dk::target_dose(fit, delta, dir, est.design);
    j["targetDose"] = td.dose ? json(*td.dose) : json(nullptr);
    j["delta"] = delta;
  }
  if (boot_draws > 0) {
    const dk::BootstrapResult boot = dk::bootstrap(est, family, bounds, boot_draws, seed);
    json bj;
    bj["draws"] = boot.n_requested;
    bj["failed"] = boot.n_failed;
    bj["quantiles"] = {0.05, 0.95};
    json ti = json::array();
    for (Eigen::Index i = 0; i < boot.theta_intervals.rows(); ++i)
      ti.push_back({boot.theta_intervals(i, 0), boot.theta_intervals(i, 1)});
    bj["thetaIntervals"] = ti;
    j["bootstrap"] = bj;
  }

  if (emit_json) {
    std::fputs((j.dump(2) + "\n").c_str(), stdout);
  } else {
    std::printf("Dose-response model fit\n\nModel: %s%s\n", dk::family_name(family),
                fit.plac_adj ? " (placebo-adjusted)" : "");
    std::printf("Coefficients:");
    for (Eigen::Index i = 0; i < fit.theta.size(); ++i)
      std::printf(" %s", fmt(fit.theta[i], 4).c_str());
    std::printf("\ngAIC: %s\n", fmt(fit.gaic, 3).c_str());
    if (fit.any_at_bound()) std::printf("note: a nonlinear parameter sits on its bound\n");
  }
  if (!out_json.empty()) dk::write_json_file(out_json, j);
  if (!plot_path.empty()) dk::write_text_file(plot_path, dk::render_fit_svg(fit, est));
  return 0;
}

int cmd_mcpmod(const EstimateInputs& inputs, const std::string& models_path, double alpha,
               double delta, const std::string& direction, const std::string& selection,
               int boot_draws, std::uint64_t seed, const QmcOptions& qmc,
               const std::string& out_json, const std::string& plot_path, bool emit_json) {
  const dk::AnovaEstimate est = inputs.load();
  const dk::AnovaEstimate test_est = apply_direction(est, direction);
  const dk::ModelSet set = load_models(models_path, est);

  const dk::MctResult res = dk::mct_test(test_est, set.models, alpha,
                                         dk::ContrastSource::Observed, nullptr, qmc.config());
  json j;
  j["schema"] = dk::kSchemaTag;
  j["mct"] = mct_to_json(res);

  if (!emit_json) print_mct_table(res);

  const auto ref_idx = dk::reference_set_indices(res);
  if (ref_idx.empty()) {
    j["signal"] = false;
    if (!emit_json) std::printf("\nNo dose-response signal established; stopping.\n");
    if (emit_json) std::fputs((j.dump(2) + "\n").c_str(), stdout);
    if (!out_json.empty()) dk::write_json_file(out_json, j);
    return 0;
  }
  j["signal"] = true;

  std::vector<dk::FittedModel> fits;
  std::vector<double> ref_z;
  json jfits = json::array();
  for (std::size_t idx : ref_idx) {
    const auto& model = set.models[idx];
    dk::FittedModel fit = dk::gls_fit(est, model.family,
                                      dk::default_fit_bounds(model.family, est.design));
    fit.label = res.contrasts.labels[idx];
    ref_z.push_back(res.z[static_cast<Eigen::Index>(idx)]);
    jfits.push_back(fitted_to_json(fit));
    fits.push_back(std::move(fit));
  }
  j["fits"] = jfits;

  if (selection != "gaic" && selection != "maxz" && selection != "average")
    throw dk::validation_error("--selection must be gaic, maxz or average");
  const bool average = selection == "average";
  const auto rule = selection == "maxz" ? dk::SelectionRule::MaxZ : dk::SelectionRule::MinGaic;
  const std::size_t best = dk::select_model(fits, rule, ref_z);
  const dk::ModelAverage avg(fits);
  j["selected"] = average ? std::string("average") : fits[best].label;

  json jw;
  for (std::size_t i = 0; i < fits.size(); ++i)
    jw[fits[i].label] = avg.weights[static_cast<Eigen::Index>(i)];
  j["gaicWeights"] = jw;

  if (delta > 0.0) {
    const auto dir = direction == "dec" ? dk::Direction::Decrease : dk::Direction::Increase;
    const auto td = average ? dk::target_dose(avg, delta, dir, est.design)
                            : dk::target_dose(fits[best], delta, dir, est.design);
    j["delta"] = delta;
    j["targetDose"] = td.dose ? json(*td.dose) : json(nullptr);
    if (!emit_json) {
      if (average)
        std::printf("\nModel averaging over %zu significant fits (gAIC weights)\n", fits.size());
      else
        std::printf("\nSelected model: %s (by %s)\n", fits[best].label.c_str(),
                    rule == dk::SelectionRule::MaxZ ? "max z" : "min gAIC");
      if (td.dose) std::printf("Target dose (Delta = %g): %s\n", delta, fmt(*td.dose, 3).c_str());
      else std::printf("Target dose (Delta = %g): not attained in the dose range\n", delta);
    }
  } else if (!emit_json) {
    std::printf("\nSelected model: %s\n", average ? "average" : fits[best].label.c_str());
  }

  if (boot_draws > 0) {
    const auto& sel = fits[best];
    const dk::FitBounds bounds = dk::default_fit_bounds(sel.family, est.design);
    const dk::BootstrapResult boot = dk::bootstrap(est, sel.family, bounds, boot_draws, seed);
    json ti = json::array();
    for (Eigen::Index i = 0; i < boot.theta_intervals.rows(); ++i)
      ti.push_back({boot.theta_intervals(i, 0), boot.theta_intervals(i, 1)});
    j["bootstrap"] = {{"draws", boot.n_requested}, {"failed", boot.n_failed},
                      {"thetaIntervals", ti}};
  }

  if (emit_json) std::fputs((j.dump(2) + "\n").c_str(), stdout);
  if (!out_json.empty()) dk::write_json_file(out_json, j);
  if (!plot_path.empty()) dk::write_text_file(plot_path, dk::render_fit_svg(fits[best], est));
  return 0;
}

int cmd_firststage(const std::string& type, const std::string& data_path,
                   const std::string& out_prefix, bool haldane, bool emit_json) {
  std::optional<dk::AnovaEstimate> est;
  if (type == "normal") est = dk::anova_normal(dk::read_normal_csv(data_path));
  else if (type == "binary") est = dk::logistic_saturated(dk::read_binary_csv(data_path), haldane);
  else if (type == "count") est = dk::negbin_saturated(dk::read_count_csv(data_path));
  else if (type == "tte") est = dk::coxph_factor(dk::read_tte_csv(data_path));
  else throw dk::validation_error("--type must be one of normal|binary|count|tte");

  const json j = dk::estimate_to_json(*est);
  if (emit_json) {
    std::fputs((j.dump(2) + "\n").c_str(), stdout);
  } else {
    std::printf("First-stage estimates (%s%s):\n", type.c_str(),
                est->plac_adj ? ", placebo-adjusted" : "");
    std::printf("%10s %12s %12s\n", "dose", "mu", "se");
    for (std::size_t i = 0; i < est->n_doses(); ++i)
      std::printf("%10g %12s %12s\n", est->design[i],
                  fmt(est->mu_hat[static_cast<Eigen::Index>(i)], 4).c_str(),
                  fmt(std::sqrt(est->S(static_cast<Eigen::Index>(i),
                                       static_cast<Eigen::Index>(i))), 4).c_str());
  }
  if (!out_prefix.empty()) {
    dk::write_mu_csv(out_prefix + "_mu.csv", est->design.doses(), est->mu_hat);
    dk::write_cov_csv(out_prefix + "_cov.csv", est->design.doses(), est->S);
    dk::write_json_file(out_prefix + ".json", j);
  }
  return 0;
}

int cmd_simulate(const std::string& scenario_name, int n, int reps, std::uint64_t seed,
                 int boot_draws, bool full_paper, unsigned threads, const std::string& out_json,
                 const std::string& plot_path, bool emit_json) {
  dk::SimScenario sc = dk::preset_scenario(scenario_name);
  sc.seed = seed;
  sc.replicates = full_paper ? 2000 : reps;
  dk::StudyConfig cfg;
  cfg.boot_draws = boot_draws;
  cfg.run_gls_b = boot_draws > 0;
  cfg.threads = threads;

  std::vector<int> ns;
  if (full_paper) ns = dk::full_paper_sample_sizes();
  else if (n > 0) ns = {n};
  else ns = dk::desk_sample_sizes();

  const dk::SimReport report = dk::run_study(sc, ns, cfg);

  json j;
  j["schema"] = dk::kSchemaTag;
  j["scenario"] = scenario_name;
  j["seed"] = seed;
  j["replicates"] = sc.replicates;
  j["bootDraws"] = cfg.run_gls_b ? cfg.boot_draws : 0;
  json cells = json::array();
  for (const auto& c : report.cells) {
    json jc;
    jc["n"] = c.n_per_arm;
    jc["replicates"] = c.replicates;
    jc["failures"] = c.failures;
    jc["atBound"] = c.at_bound;
    jc["rmseMean"] = c.rmse_mean;
    jc["ciLevel"] = c.ci_level;
    jc["gls"] = {{"coverPerParam", std::vector<double>(c.gls.per_param.data(),
                                                       c.gls.per_param.data() + c.gls.per_param.size())},
                 {"coverMean", c.gls.mean},
                 {"coverJoint", c.gls.joint},
                 {"intervals", c.gls.intervals}};
    if (c.gls_b.intervals > 0) {
      jc["glsB"] = {{"coverPerParam", std::vector<double>(c.gls_b.per_param.data(),
                                                          c.gls_b.per_param.data() + c.gls_b.per_param.size())},
                    {"coverMean", c.gls_b.mean},
                    {"coverJoint", c.gls_b.joint},
                    {"intervals", c.gls_b.intervals},
                    {"bootFailures", c.boot_failures}};
    }
    cells.push_back(jc);
  }
  j["cells"] = cells;

  if (emit_json) {
    std::fputs((j.dump(2) + "\n").c_str(), stdout);
  } else {
    std::printf("scenario %s, %d replicates\n", scenario_name.c_str(), sc.replicates);
    std::printf("%6s %10s %10s %10s %8s %8s\n", "n", "rmse", "GLS cov", "GLS-B cov", "atBound",
                "fail");
    for (const auto& c : report.cells)
      std::printf("%6d %10s %10s %10s %8d %8d\n", c.n_per_arm, fmt(c.rmse_mean, 4).c_str(),
                  fmt(c.gls.mean, 3).c_str(),
                  c.gls_b.intervals > 0 ? fmt(c.gls_b.mean, 3).c_str() : "-", c.at_bound,
                  c.failures);
  }
  if (!out_json.empty()) dk::write_json_file(out_json, j);
  if (!plot_path.empty()) dk::write_text_file(plot_path, dk::render_sim_report_svg(report));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dose-response signal testing, GLS model fitting and simulation"};
  app.require_subcommand(1);

  // contrasts
  auto* c_contr = app.add_subcommand("contrasts", "optimal contrast matrix for a candidate set");
  std::string contr_models, contr_cov, contr_out, contr_plot;
  bool contr_placadj = false;
  c_contr->add_option("--models", contr_models, "candidate model set JSON")->required();
  c_contr->add_option("--cov", contr_cov, "covariance CSV")->required();
  c_contr->add_option("--out", contr_out, "output CSV path (stdout if omitted)");
  c_contr->add_option("--plot", contr_plot, "write candidate-shape panels SVG");
  c_contr->add_flag("--plac-adj", contr_placadj, "placebo-adjusted contrasts");

  // crit
  auto* c_crit = app.add_subcommand("crit", "equicoordinate one-sided critical value");
  std::string crit_corr, crit_out;
  double crit_alpha = 0.025;
  QmcOptions crit_qmc;
  c_crit->add_option("--corr", crit_corr, "correlation matrix CSV")->required();
  c_crit->add_option("--alpha", crit_alpha, "one-sided level");
  c_crit->add_option("--out", crit_out, "output JSON path");
  crit_qmc.add_options(c_crit);

  // mctest
  auto* c_mct = app.add_subcommand("mctest", "multiple contrast test");
  EstimateInputs mct_in;
  std::string mct_models, mct_dir = "inc", mct_planned, mct_out;
  double mct_alpha = 0.025;
  bool mct_json = false;
  QmcOptions mct_qmc;
  mct_in.add_options(c_mct);
  c_mct->add_option("--models", mct_models, "candidate model set JSON")->required();
  c_mct->add_option("--alpha", mct_alpha, "one-sided level");
  c_mct->add_option("--direction", mct_dir, "inc or dec");
  c_mct->add_option("--contrast-cov", mct_planned,
                    "planned covariance CSV for design-stage contrasts");
  c_mct->add_option("--out", mct_out, "output JSON path");
  c_mct->add_flag("--json", mct_json, "print JSON instead of the table");
  mct_qmc.add_options(c_mct);

  // fit
  auto* c_fit = app.add_subcommand("fit", "GLS dose-response model fit");
  EstimateInputs fit_in;
  std::string fit_model, fit_out, fit_plot, fit_dir = "inc";
  std::vector<double> fit_bounds, fit_h_bounds;
  int fit_boot = 0;
  double fit_delta = 0.0;
  std::uint64_t fit_seed = env_default_seed();
  bool fit_json = false;
  fit_in.add_options(c_fit);
  c_fit->add_option("--model", fit_model, "model family")->required();
  c_fit->add_option("--bounds", fit_bounds, "lo,hi bounds for the nonlinear parameter")
      ->delimiter(',');
  c_fit->add_option("--h-bounds", fit_h_bounds, "lo,hi bounds for the sigEmax Hill parameter")
      ->delimiter(',');
  c_fit->add_option("--boot", fit_boot, "parametric bootstrap draws");
  c_fit->add_option("--seed", fit_seed, "bootstrap seed");
  c_fit->add_option("--delta", fit_delta, "clinically relevant effect for target-dose estimation");
  c_fit->add_option("--direction", fit_dir, "inc or dec");
  double fit_tau = 2.0;
  c_fit->add_option("--tau", fit_tau, "information-criterion penalty per parameter (default 2)");
  c_fit->add_option("--out", fit_out, "output JSON path");
  c_fit->add_option("--plot", fit_plot, "write fitted-curve SVG");
  c_fit->add_flag("--json", fit_json, "print JSON instead of the table");

  // mcpmod
  auto* c_mcp = app.add_subcommand("mcpmod", "test, select, fit and estimate the target dose");
  EstimateInputs mcp_in;
  std::string mcp_models, mcp_dir = "inc", mcp_sel = "gaic", mcp_out, mcp_plot;
  double mcp_alpha = 0.025, mcp_delta = 0.0;
  int mcp_boot = 0;
  std::uint64_t mcp_seed = env_default_seed();
  bool mcp_json = false;
  QmcOptions mcp_qmc;
  mcp_in.add_options(c_mcp);
  c_mcp->add_option("--models", mcp_models, "candidate model set JSON")->required();
  c_mcp->add_option("--alpha", mcp_alpha, "one-sided level");
  c_mcp->add_option("--delta", mcp_delta, "clinically relevant effect");
  c_mcp->add_option("--direction", mcp_dir, "inc or dec");
  c_mcp->add_option("--selection", mcp_sel, "gaic, maxz or average");
  c_mcp->add_option("--boot", mcp_boot, "bootstrap draws for the selected model");
  c_mcp->add_option("--seed", mcp_seed, "bootstrap seed");
  c_mcp->add_option("--out", mcp_out, "output JSON path");
  c_mcp->add_option("--plot", mcp_plot, "write fitted-curve SVG for the selected model");
  c_mcp->add_flag("--json", mcp_json, "print JSON instead of the table");
  mcp_qmc.add_options(c_mcp);

  // firststage
  auto* c_fs = app.add_subcommand("firststage", "first-stage estimates from subject-level data");
  std::string fs_type, fs_data, fs_prefix;
  bool fs_haldane = false, fs_json = false;
  c_fs->add_option("--type", fs_type, "normal|binary|count|tte")->required();
  c_fs->add_option("--data", fs_data, "subject-level CSV")->required();
  c_fs->add_option("--out-prefix", fs_prefix, "write <prefix>_mu.csv, <prefix>_cov.csv, <prefix>.json");
  c_fs->add_flag("--haldane", fs_haldane, "continuity correction for boundary proportions");
  c_fs->add_flag("--json", fs_json, "print the estimate JSON");

  // simulate
  auto* c_sim = app.add_subcommand("simulate", "operating-characteristics study");
  std::string sim_scenario, sim_out, sim_plot;
  int sim_n = 0, sim_reps = 500, sim_boot = 500;
  std::uint64_t sim_seed = env_default_seed();
  bool sim_full = false, sim_json = false;
  unsigned sim_threads = 1;
  c_sim->add_option("--scenario", sim_scenario, "preset name, e.g. table1-count-emax")->required();
  c_sim->add_option("--n", sim_n, "per-arm sample size (desk ladder if omitted)");
  c_sim->add_option("--reps", sim_reps, "replicates");
  c_sim->add_option("--seed", sim_seed, "study seed");
  c_sim->add_option("--boot", sim_boot, "bootstrap draws per replicate (0 disables GLS-B)");
  c_sim->add_flag("--full-paper", sim_full, "2000 replicates over the full sample-size ladder");
  c_sim->add_option("--threads", sim_threads, "worker threads");
  c_sim->add_option("--out", sim_out, "output JSON path");
  c_sim->add_option("--plot", sim_plot, "write coverage/RMSE SVG");
  c_sim->add_flag("--json", sim_json, "print JSON instead of the table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return 2;
  }

  try {
    if (c_contr->parsed())
      return cmd_contrasts(contr_models, contr_cov, contr_out, contr_plot, contr_placadj);
    if (c_crit->parsed()) return cmd_crit(crit_corr, crit_alpha, crit_qmc, crit_out);
    if (c_mct->parsed())
      return cmd_mctest(mct_in, mct_models, mct_alpha, mct_dir, mct_planned, mct_qmc, mct_out,
                        mct_json);
    if (c_fit->parsed())
      return cmd_fit(fit_in, fit_model, fit_bounds, fit_h_bounds, fit_boot, fit_seed, fit_delta,
                     fit_dir, fit_tau, fit_out, fit_plot, fit_json);
    if (c_mcp->parsed())
      return cmd_mcpmod(mcp_in, mcp_models, mcp_alpha, mcp_delta, mcp_dir, mcp_sel, mcp_boot,
                        mcp_seed, mcp_qmc, mcp_out, mcp_plot, mcp_json);
    if (c_fs->parsed()) return cmd_firststage(fs_type, fs_data, fs_prefix, fs_haldane, fs_json);
    if (c_sim->parsed())
      return cmd_simulate(sim_scenario, sim_n, sim_reps, sim_seed, sim_boot, sim_full, sim_threads,
                          sim_out, sim_plot, sim_json);
  } catch (const dk::validation_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const dk::numeric_error& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return 3;
  }
  return 0;
}
