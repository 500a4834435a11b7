#include <catch2/catch.hpp>
#include <cstdio>
#include <fstream>

#include "dosekit/io.hpp"
#include "dosekit/rng.hpp"
#include "dosekit/svg.hpp"

using namespace dosekit;

namespace {
std::string temp_path(const std::string& name) {
  return std::string("/tmp/dosekit_test_") + name;
}

std::size_t count_occurrences(const std::string& hay, const std::string& needle) {
  std::size_t n = 0, pos = 0;
  while ((pos = hay.find(needle, pos)) != std::string::npos) {
    ++n;
    pos += needle.size();
  }
  return n;
}

AnovaEstimate neurodeg_estimate() {
  Vector mu(5);
  mu << -5.099, -4.581, -3.220, -2.879, -3.520;
  Matrix s = Matrix::Constant(5, 5, 0.0094);
  s.diagonal().setConstant(0.149);
  return AnovaEstimate(DoseDesign({0.0, 1.0, 3.0, 10.0, 30.0}), mu, s);
}
}  // namespace

TEST_CASE("csv round trips are bit exact") {
  Rng rng(88);
  const std::vector<double> doses{0.0, 1.0, 3.0, 10.0, 30.0};
  Matrix s(5, 5);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j <= i; ++j) s(i, j) = s(j, i) = rng.normal(0, 1e-3);
  const std::string path = temp_path("cov.csv");
  write_cov_csv(path, doses, s);
  const Matrix back = read_cov_csv(path);
  REQUIRE(back.rows() == 5);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) CHECK(back(i, j) == s(i, j));

  Vector mu(5);
  for (int i = 0; i < 5; ++i) mu[i] = rng.normal(0, 3);
  const std::string mupath = temp_path("mu.csv");
  write_mu_csv(mupath, doses, mu);
  const MuTable mt = read_mu_csv(mupath);
  for (int i = 0; i < 5; ++i) {
    CHECK(mt.mu[i] == mu[i]);
    CHECK(mt.doses[static_cast<std::size_t>(i)] == doses[static_cast<std::size_t>(i)]);
  }
}

TEST_CASE("malformed csv reports the offending line") {
  const std::string path = temp_path("bad.csv");
  write_text_file(path, "dose,mu\n0,1.5\n1,oops\n");
  try {
    read_mu_csv(path);
    FAIL("expected parse error");
  } catch (const validation_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find(":3") != std::string::npos);
    CHECK(msg.find("oops") != std::string::npos);
  }
  CHECK_THROWS_AS(read_mu_csv(temp_path("missing_file.csv")), validation_error);

  // rows must match the header width
  const std::string ragged = temp_path("ragged.csv");
  write_text_file(ragged, "dose,mu\n0\n");
  try {
    read_mu_csv(ragged);
    FAIL("expected column-count error");
  } catch (const validation_error& e) {
    CHECK(std::string(e.what()).find(":2") != std::string::npos);
  }
}

TEST_CASE("model set json round trip") {
  const std::string path = temp_path("models.json");
  write_text_file(path,
                  R"({"models":[{"family":"emax","guesstimates":[1.11]},
                               {"family":"quadratic","guesstimates":[-0.022]},
                               {"family":"linear"}],
                      "doses":[0,1,3,10,30]})");
  const ModelSet set = read_models_json(path);
  REQUIRE(set.models.size() == 3);
  CHECK(set.models[0].family == ModelFamily::Emax);
  CHECK(set.models[0].guesstimates[0] == 1.11);
  CHECK(set.models[2].family == ModelFamily::Linear);
  CHECK(set.design.size() == 5);

  const json j = model_set_to_json(set);
  CHECK(j.at("schema") == kSchemaTag);
  const ModelSet back = model_set_from_json(j);
  CHECK(back.models.size() == set.models.size());
  CHECK(back.design == set.design);

  write_text_file(path, "{\"doses\":[0,1]}");
  CHECK_THROWS_AS(read_models_json(path), validation_error);
  write_text_file(path, "not json");
  CHECK_THROWS_AS(read_models_json(path), validation_error);
}

TEST_CASE("estimate json round trip") {
  const AnovaEstimate est = neurodeg_estimate();
  const json j = estimate_to_json(est);
  CHECK(j.at("schema") == kSchemaTag);
  const AnovaEstimate back = estimate_from_json(j);
  CHECK((back.mu_hat - est.mu_hat).norm() == 0.0);
  CHECK((back.S - est.S).norm() == 0.0);
  CHECK(back.design == est.design);
  CHECK(back.plac_adj == est.plac_adj);
}

TEST_CASE("subject-level csv readers") {
  const std::string n = temp_path("normal.csv");
  write_text_file(n, "dose,resp\n0,1.5\n0,2.5\n10,4.0\n10,5.0\n");
  const auto rows = read_normal_csv(n);
  REQUIRE(rows.size() == 4);
  CHECK(rows[3].resp == 5.0);

  const std::string b = temp_path("binary.csv");
  write_text_file(b, "dose,successes,trials\n0,13,133\n10,16,63\n");
  const auto groups = read_binary_csv(b);
  CHECK(groups[0].trials == 133);

  const std::string t = temp_path("tte.csv");
  write_text_file(t, "dose,time,event\n0,1.25,1\n5,10,0\n");
  const auto tte = read_tte_csv(t);
  CHECK(tte[0].event);
  CHECK_FALSE(tte[1].event);

  const std::string c = temp_path("count.csv");
  write_text_file(c, "dose,resp\n0,3\n0,1.5\n");
  CHECK_THROWS_AS(read_count_csv(c), validation_error);
}

TEST_CASE("fit plot structure and determinism") {
  const AnovaEstimate est = neurodeg_estimate();
  const FittedModel fit = gls_fit(est, ModelFamily::Emax, FitBounds{{{0.1, 10.0}}});
  const std::string svg = render_fit_svg(fit, est);
  CHECK(svg.rfind("<?xml", 0) == 0);
  CHECK(count_occurrences(svg, "<circle") == 5);   // one marker per estimate
  CHECK(count_occurrences(svg, "<polyline") >= 1); // fitted curve
  CHECK(svg.find("<path") != std::string::npos);   // confidence band
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(render_fit_svg(fit, est) == svg);          // byte identical re-render

  // the fitted emax curve is monotone: extract no NaNs, bounded size
  CHECK(svg.find("nan") == std::string::npos);
}

TEST_CASE("candidate shape panels") {
  const std::vector<CandidateModel> models{CandidateModel(ModelFamily::Emax, {1.11}),
                                           CandidateModel(ModelFamily::Quadratic, {-0.022}),
                                           CandidateModel(ModelFamily::Exponential, {8.867}),
                                           CandidateModel(ModelFamily::Linear, {})};
  const DoseDesign design({0.0, 1.0, 3.0, 10.0, 30.0});
  const std::string svg = render_candidate_shapes_svg(models, design);
  CHECK(count_occurrences(svg, "<polyline") == 4);
  CHECK(svg.find("emax") != std::string::npos);
  CHECK(svg.find("linear") != std::string::npos);
}

TEST_CASE("simulation report plot") {
  SimScenario sc = preset_scenario("table1-count-quadratic");
  sc.replicates = 40;
  sc.seed = 3;
  StudyConfig cfg;
  cfg.run_gls_b = false;
  const SimReport rep = run_study(sc, {30, 100}, cfg);
  const std::string svg = render_sim_report_svg(rep);
  CHECK(count_occurrences(svg, "<polyline") >= 3);  // nominal line, coverage, rmse
  CHECK(render_sim_report_svg(rep) == svg);

  CHECK_THROWS_AS(render_sim_report_svg(SimReport{}), validation_error);
}
