#include <catch2/catch.hpp>
#include <cmath>

#include "dosekit/simulate.hpp"

using namespace dosekit;

TEST_CASE("preset scenarios match the simulation truth table") {
  const SimScenario ce = preset_scenario("table1-count-emax");
  CHECK(ce.endpoint == Endpoint::Count);
  CHECK(ce.family == ModelFamily::Emax);
  CHECK(ce.theta[0] == 2.0);
  CHECK(ce.theta[1] == -0.84);
  CHECK(ce.theta[2] == 0.05);
  CHECK(ce.design.size() == 6);
  CHECK(ce.design[1] == 0.05);
  CHECK(ce.design.max_dose() == 1.0);

  CHECK(preset_scenario("table1-binary-quadratic").theta[2] == -2.7094);
  CHECK(preset_scenario("table1-tte-exponential").theta[1] == -0.005122);
  CHECK(preset_scenario_names().size() == 12);
  CHECK_THROWS_AS(preset_scenario("table1-count-logistic"), validation_error);

  // binary truth at placebo: response rate about 15%
  const SimScenario bq = preset_scenario("table1-binary-emax");
  CHECK(1.0 / (1.0 + std::exp(-bq.true_mean(0.0))) == Approx(0.150).margin(0.001));

  // max-effect dose: boundary for monotone shapes, vertex for quadratic
  CHECK(preset_scenario("table1-count-emax").max_effect_dose() == 1.0);
  CHECK(preset_scenario("table1-count-quadratic").max_effect_dose() == Approx(0.8));
}

TEST_CASE("generate is deterministic per (seed, scenario, replicate)") {
  SimScenario sc = preset_scenario("table1-count-emax");
  sc.n_per_arm = 20;
  sc.seed = 42;
  const SubjectData a = generate(sc, 3);
  const SubjectData b = generate(sc, 3);
  REQUIRE(a.count.size() == b.count.size());
  for (std::size_t i = 0; i < a.count.size(); ++i) CHECK(a.count[i].count == b.count[i].count);
  const SubjectData c = generate(sc, 4);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.count.size(); ++i)
    if (a.count[i].count != c.count[i].count) any_diff = true;
  CHECK(any_diff);
}

TEST_CASE("generated data matches the scenario truth in the large-sample limit") {
  SimScenario sc = preset_scenario("table1-normal-emax");
  sc.n_per_arm = 1000;
  sc.seed = 7;
  const SubjectData data = generate(sc, 0);
  // group means within 3 sigma / sqrt(n) of f(x, theta)
  for (std::size_t d = 0; d < sc.design.size(); ++d) {
    double sum = 0.0;
    int n = 0;
    for (const auto& row : data.normal) {
      if (row.dose == sc.design[d]) {
        sum += row.resp;
        ++n;
      }
    }
    REQUIRE(n == 1000);
    CHECK(std::abs(sum / n - sc.true_mean(sc.design[d])) <= 3.0 / std::sqrt(1000.0));
  }

  // censoring fraction at the placebo arm is about exp(-10)
  SimScenario tte = preset_scenario("table1-tte-emax");
  tte.n_per_arm = 200000;
  tte.seed = 11;
  SimScenario placebo_only = tte;
  placebo_only.design = DoseDesign({0.0, 1.0});
  const SubjectData td = generate(placebo_only, 0);
  long censored = 0, total = 0;
  for (const auto& row : td.tte) {
    if (row.dose == 0.0) {
      ++total;
      if (!row.event) ++censored;
    }
  }
  REQUIRE(total == 200000);
  const double frac = static_cast<double>(censored) / total;
  CHECK(frac <= 1.5e-4);
  CHECK(frac == Approx(4.54e-5).margin(5e-5));
}

TEST_CASE("rmse of the fitted dose response") {
  const SimScenario sc = preset_scenario("table1-count-emax");
  // a fit equal to the truth has zero error
  FittedModel exact;
  exact.family = ModelFamily::Emax;
  exact.theta = Vector(3);
  exact.theta << 2.0, -0.84, 0.05;
  CHECK(rmse_dose_response(exact, sc) == Approx(0.0).margin(1e-14));

  // a constant offset c at all doses gives rmse |c|
  FittedModel off = exact;
  off.theta[0] += 0.37;
  CHECK(rmse_dose_response(off, sc) == Approx(0.37).epsilon(1e-12));
}

TEST_CASE("run_cell is reproducible and thread-count invariant") {
  SimScenario sc = preset_scenario("table1-count-quadratic");
  sc.n_per_arm = 40;
  sc.replicates = 60;
  sc.seed = 31;
  StudyConfig cfg;
  cfg.boot_draws = 120;
  cfg.threads = 1;
  const ScenarioCell a = run_cell(sc, cfg);
  const ScenarioCell b = run_cell(sc, cfg);
  StudyConfig cfg2 = cfg;
  cfg2.threads = 2;
  const ScenarioCell c = run_cell(sc, cfg2);

  CHECK(a.rmse_mean == b.rmse_mean);
  CHECK(a.rmse_mean == c.rmse_mean);
  CHECK(a.gls.mean == c.gls.mean);
  CHECK(a.gls_b.mean == c.gls_b.mean);
  CHECK(a.failures == c.failures);
  CHECK(a.replicates == a.failures + (a.replicates - a.failures));

  // coverage values are proportions
  for (int j = 0; j < a.gls.per_param.size(); ++j) {
    CHECK(a.gls.per_param[j] >= 0.0);
    CHECK(a.gls.per_param[j] <= 1.0);
  }
  CHECK(a.gls.joint <= a.gls.per_param.minCoeff() + 1e-12);
}

TEST_CASE("every endpoint runs through the coverage cell") {
  StudyConfig cfg;
  cfg.boot_draws = 120;
  for (const char* name : {"table1-tte-emax", "table1-binary-emax", "table1-normal-quadratic",
                           "table1-tte-quadratic"}) {
    SimScenario sc = preset_scenario(name);
    sc.n_per_arm = 60;
    sc.replicates = 40;
    sc.seed = 11;
    const ScenarioCell cell = run_cell(sc, cfg);
    INFO(name);
    CHECK(cell.failures < cell.replicates / 4);
    CHECK(cell.rmse_mean > 0.0);
    CHECK(cell.gls.per_param.size() == (sc.endpoint == Endpoint::TimeToEvent ? 2 : 3));
    for (int j = 0; j < cell.gls.per_param.size(); ++j) {
      CHECK(cell.gls.per_param[j] >= 0.0);
      CHECK(cell.gls.per_param[j] <= 1.0);
    }
    // bootstrap intervals cover the truth a nontrivial fraction of the time
    CHECK(cell.gls_b.mean > 0.5);
  }
}

TEST_CASE("rmse decreases with the sample size") {
  SimScenario sc = preset_scenario("table1-count-emax");
  sc.replicates = 150;
  sc.seed = 5;
  StudyConfig cfg;
  cfg.run_gls_b = false;
  const SimReport report = run_study(sc, {30, 100, 300}, cfg);
  REQUIRE(report.cells.size() == 3);
  CHECK(report.cells[0].rmse_mean > report.cells[1].rmse_mean);
  CHECK(report.cells[1].rmse_mean > report.cells[2].rmse_mean);
}

TEST_CASE("two-sample power simulation") {
  // strong effect: power near 1
  SimScenario strong = preset_scenario("table1-normal-emax");
  strong.seed = 17;
  const PowerResult pr = power_two_sample(strong, 30, 400);
  CHECK(pr.failures == 0);
  CHECK(pr.power > 0.9);

  // null effect: rejection rate near the nominal level
  SimScenario null_sc = strong;
  null_sc.name = "null-normal";
  null_sc.theta = {0.0, 1e-9, 0.05};
  const PowerResult p0 = power_two_sample(null_sc, 30, 1500);
  CHECK(p0.power == Approx(0.05).margin(0.02));
}
