// End-to-end tests of the dosekit executable: every assertion here goes
// through the CLI surface (files in, files/stdout out, exit codes).

#include <catch2/catch.hpp>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>

#ifndef DOSEKIT_BIN
#error "DOSEKIT_BIN must point at the built executable"
#endif

namespace {

using nlohmann::json;

struct RunResult {
  int code;
  std::string out;
  std::string err;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

RunResult run(const std::string& args, const std::string& env = "") {
  const std::string out_path = "/tmp/dosekit_cli_out.txt";
  const std::string err_path = "/tmp/dosekit_cli_err.txt";
  const std::string cmd =
      env + (env.empty() ? "" : " ") + DOSEKIT_BIN + " " + args + " >" + out_path + " 2>" + err_path;
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.code = WEXITSTATUS(status);
  r.out = slurp(out_path);
  r.err = slurp(err_path);
  return r;
}

void write_neurodeg_inputs() {
  spit("/tmp/dk_mu.csv", "dose,mu\n0,-5.099\n1,-4.581\n3,-3.220\n10,-2.879\n30,-3.520\n");
  std::string cov = "0,1,3,10,30\n";
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) cov += std::string(j ? "," : "") + (i == j ? "0.149" : "0.0094");
    cov += "\n";
  }
  spit("/tmp/dk_cov.csv", cov);
  spit("/tmp/dk_models.json",
       R"({"models":[{"family":"emax","guesstimates":[1.11]},
                     {"family":"quadratic","guesstimates":[-0.022]},
                     {"family":"exponential","guesstimates":[8.867]},
                     {"family":"linear"}],
           "doses":[0,1,3,10,30]})");
}

}  // namespace

TEST_CASE("mcpmod runs the full pipeline on the summary statistics") {
  write_neurodeg_inputs();
  const RunResult r = run(
      "mcpmod --mu /tmp/dk_mu.csv --cov /tmp/dk_cov.csv --models /tmp/dk_models.json "
      "--alpha 0.025 --delta 1.4 --json");
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out);
  CHECK(j.at("schema") == "dosekit/v1");
  CHECK(j.at("signal") == true);
  CHECK(j.at("mct").at("critical").get<double>() == Approx(2.275).margin(0.01));
  CHECK(j.at("selected") == "emax");
  CHECK(j.at("targetDose").get<double>() == Approx(2.13).margin(0.02));
  const auto z = j.at("mct").at("z").get<std::vector<double>>();
  CHECK(z[0] == Approx(4.561).margin(0.02));
  CHECK(z[3] == Approx(2.274).margin(0.02));

  // table mode mirrors the analysis output block
  const RunResult t = run(
      "mcpmod --mu /tmp/dk_mu.csv --cov /tmp/dk_cov.csv --models /tmp/dk_models.json "
      "--alpha 0.025 --delta 1.4");
  CHECK(t.code == 0);
  CHECK(t.out.find("Multiple Contrast Test") != std::string::npos);
  CHECK(t.out.find("<0.001") != std::string::npos);
  CHECK(t.out.find("Critical value:") != std::string::npos);
  CHECK(t.out.find("one-sided") != std::string::npos);
}

TEST_CASE("crit computes the independence critical value") {
  std::string corr = "a,b,c,d\n";
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) corr += std::string(j ? "," : "") + (i == j ? "1" : "0");
    corr += "\n";
  }
  spit("/tmp/dk_corr.csv", corr);
  const RunResult r = run("crit --corr /tmp/dk_corr.csv --alpha 0.025 --out /tmp/dk_crit.json");
  REQUIRE(r.code == 0);
  const json j = json::parse(slurp("/tmp/dk_crit.json"));
  // independence quantile: Phi^-1(0.975^(1/4))
  CHECK(j.at("critical").get<double>() == Approx(2.49435).margin(5e-4));
}

TEST_CASE("exit codes distinguish validation from numerical failures") {
  const RunResult missing = run("mctest --mu /tmp/does_not_exist.csv --cov /tmp/dk_cov.csv "
                                "--models /tmp/dk_models.json");
  CHECK(missing.code == 2);
  CHECK(missing.err.find("/tmp/does_not_exist.csv") != std::string::npos);

  // emax needs three parameters; two doses cannot support it
  spit("/tmp/dk_mu2.csv", "dose,mu\n0,0\n10,1\n");
  spit("/tmp/dk_cov2.csv", "0,10\n0.1,0\n0,0.1\n");
  const RunResult numeric =
      run("fit --mu /tmp/dk_mu2.csv --cov /tmp/dk_cov2.csv --model emax");
  CHECK(numeric.code == 3);

  const RunResult badflag = run("mctest --nonsense");
  CHECK(badflag.code == 2);

  const RunResult help = run("--help");
  CHECK(help.code == 0);
}

TEST_CASE("fit bootstrap and plots") {
  write_neurodeg_inputs();
  const RunResult r = run(
      "fit --mu /tmp/dk_mu.csv --cov /tmp/dk_cov.csv --model emax --bounds 0.1,10 "
      "--boot 200 --seed 5 --delta 1.4 --json --plot /tmp/dk_fit.svg");
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out);
  const auto theta = j.at("theta").get<std::vector<double>>();
  CHECK(theta[0] == Approx(-5.181).margin(0.02));
  CHECK(theta[1] == Approx(2.180).margin(0.02));
  CHECK(theta[2] == Approx(1.187).margin(0.02));
  CHECK(j.at("gAIC").get<double>() == Approx(10.66).margin(0.1));
  CHECK(j.at("targetDose").get<double>() == Approx(2.13).margin(0.02));
  CHECK(j.at("bootstrap").at("failed").get<int>() == 0);
  const std::string svg = slurp("/tmp/dk_fit.svg");
  CHECK(svg.find("<svg") != std::string::npos);

  // identical seeds give identical bootstrap output
  const RunResult r2 = run(
      "fit --mu /tmp/dk_mu.csv --cov /tmp/dk_cov.csv --model emax --bounds 0.1,10 "
      "--boot 200 --seed 5 --delta 1.4 --json");
  CHECK(r2.out == r.out);
}

TEST_CASE("firststage emits estimates that feed back into fit") {
  std::string data = "dose,resp\n";
  // deterministic pseudo-data with a dose trend
  unsigned state = 12345;
  auto next = [&]() {
    state = state * 1103515245u + 12345u;
    return static_cast<double>((state >> 16) & 0x7fff) / 32768.0 - 0.5;
  };
  for (double dose : {0.0, 1.0, 3.0, 10.0}) {
    for (int i = 0; i < 12; ++i)
      data += std::to_string(dose) + "," +
              std::to_string(dose / (dose + 2.0) + next()) + "\n";
  }
  spit("/tmp/dk_subj.csv", data);
  const RunResult fs = run("firststage --type normal --data /tmp/dk_subj.csv "
                           "--out-prefix /tmp/dk_fs");
  REQUIRE(fs.code == 0);

  const RunResult via_json =
      run("fit --est /tmp/dk_fs.json --model emax --json");
  const RunResult via_csv =
      run("fit --mu /tmp/dk_fs_mu.csv --cov /tmp/dk_fs_cov.csv --model emax --json");
  REQUIRE(via_json.code == 0);
  CHECK(via_json.out == via_csv.out);  // byte-identical round trip
}

TEST_CASE("contrast matrix CSV has zero-sum unit-norm columns") {
  write_neurodeg_inputs();
  const RunResult r = run(
      "contrasts --models /tmp/dk_models.json --cov /tmp/dk_cov.csv --out /tmp/dk_contr.csv "
      "--plot /tmp/dk_shapes.svg");
  REQUIRE(r.code == 0);
  std::ifstream in("/tmp/dk_contr.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "dose,emax,quadratic,exponential,linear");
  double sums[4] = {0, 0, 0, 0};
  double norms[4] = {0, 0, 0, 0};
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    double dose, c0, c1, c2, c3;
    REQUIRE(std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf", &dose, &c0, &c1, &c2, &c3) == 5);
    const double cs[4] = {c0, c1, c2, c3};
    for (int m = 0; m < 4; ++m) {
      sums[m] += cs[m];
      norms[m] += cs[m] * cs[m];
    }
    ++rows;
  }
  CHECK(rows == 5);
  for (int m = 0; m < 4; ++m) {
    CHECK(sums[m] == Approx(0.0).margin(1e-10));
    CHECK(norms[m] == Approx(1.0).margin(1e-10));
  }
  CHECK(slurp("/tmp/dk_shapes.svg").find("</svg>") != std::string::npos);
}

TEST_CASE("simulate is deterministic across runs, threads and env seeding") {
  const std::string base =
      "simulate --scenario table1-count-quadratic --n 30 --reps 30 --boot 120 --json";
  const RunResult a = run(base + " --seed 7");
  REQUIRE(a.code == 0);
  const RunResult b = run(base + " --seed 7");
  CHECK(a.out == b.out);
  const RunResult c = run(base + " --seed 7 --threads 2");
  CHECK(a.out == c.out);
  const RunResult env = run(base, "DOSEKIT_SEED=7");
  CHECK(a.out == env.out);
  const RunResult other = run(base + " --seed 8");
  CHECK(a.out != other.out);

  const json j = json::parse(a.out);
  CHECK(j.at("cells").size() == 1);
  CHECK(j.at("cells")[0].at("replicates") == 30);

  const RunResult plotted = run(base + " --seed 7 --plot /tmp/dk_sim.svg --out /tmp/dk_sim.json");
  REQUIRE(plotted.code == 0);
  const std::string svg = slurp("/tmp/dk_sim.svg");
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("coverage") != std::string::npos);
  CHECK(json::parse(slurp("/tmp/dk_sim.json")).at("scenario") == "table1-count-quadratic");
}

TEST_CASE("placebo-adjusted analysis through the CLI") {
  write_neurodeg_inputs();
  // collapse the full estimates against placebo: muC = mu_i - mu_0,
  // SC = C0 S C0' (compound symmetry: diag 2(v - c), off-diag v - c... done
  // longhand below to stay independent of the library)
  const double mu[5] = {-5.099, -4.581, -3.220, -2.879, -3.520};
  const double v = 0.149, c = 0.0094;
  std::string mucsv = "dose,mu\n";
  const double doses[4] = {1, 3, 10, 30};
  for (int i = 0; i < 4; ++i)
    mucsv += std::to_string(doses[i]) + "," + std::to_string(mu[i + 1] - mu[0]) + "\n";
  spit("/tmp/dk_muC.csv", mucsv);
  std::string covcsv = "1,3,10,30\n";
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      const double entry = (i == j) ? 2.0 * (v - c) : (v - c);
      covcsv += std::string(j ? "," : "") + std::to_string(entry);
    }
    covcsv += "\n";
  }
  spit("/tmp/dk_covC.csv", covcsv);

  const RunResult full = run(
      "mctest --mu /tmp/dk_mu.csv --cov /tmp/dk_cov.csv --models /tmp/dk_models.json --json");
  const RunResult adj = run(
      "mctest --mu /tmp/dk_muC.csv --cov /tmp/dk_covC.csv --models /tmp/dk_models.json "
      "--plac-adj --json");
  REQUIRE(full.code == 0);
  REQUIRE(adj.code == 0);
  const auto zf = json::parse(full.out).at("z").get<std::vector<double>>();
  const auto za = json::parse(adj.out).at("z").get<std::vector<double>>();
  for (int m = 0; m < 4; ++m) CHECK(za[m] == Approx(zf[m]).margin(5e-4));

  // the placebo-adjusted fit reproduces the full fit's adjusted curve
  const RunResult fful = run(
      "fit --mu /tmp/dk_mu.csv --cov /tmp/dk_cov.csv --model emax --bounds 0.1,10 --json");
  const RunResult fadj = run(
      "fit --mu /tmp/dk_muC.csv --cov /tmp/dk_covC.csv --model emax --plac-adj "
      "--bounds 0.1,10 --json");
  REQUIRE(fadj.code == 0);
  const auto tf = json::parse(fful.out).at("theta").get<std::vector<double>>();
  const auto ta = json::parse(fadj.out).at("theta").get<std::vector<double>>();
  REQUIRE(ta.size() == 2);
  CHECK(ta[0] == Approx(tf[1]).margin(1e-4));  // scale
  CHECK(ta[1] == Approx(tf[2]).margin(1e-4));  // ED50

  // placebo-adjusted contrasts are emitted without the zero-sum constraint
  const RunResult contr = run(
      "contrasts --models /tmp/dk_models.json --cov /tmp/dk_covC.csv --plac-adj "
      "--out /tmp/dk_contrC.csv");
  REQUIRE(contr.code == 0);
  std::ifstream in("/tmp/dk_contrC.csv");
  std::string header, line;
  std::getline(in, header);
  int rows = 0;
  double norm0 = 0.0;
  while (std::getline(in, line)) {
    double d0, c0, c1, c2, c3;
    REQUIRE(std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf", &d0, &c0, &c1, &c2, &c3) == 5);
    norm0 += c0 * c0;
    ++rows;
  }
  CHECK(rows == 4);
  CHECK(norm0 == Approx(1.0).margin(1e-10));
}

TEST_CASE("selection rule flag") {
  write_neurodeg_inputs();
  const RunResult gaic = run(
      "mcpmod --mu /tmp/dk_mu.csv --cov /tmp/dk_cov.csv --models /tmp/dk_models.json "
      "--delta 1.4 --selection gaic --json");
  const RunResult maxz = run(
      "mcpmod --mu /tmp/dk_mu.csv --cov /tmp/dk_cov.csv --models /tmp/dk_models.json "
      "--delta 1.4 --selection maxz --json");
  REQUIRE(gaic.code == 0);
  REQUIRE(maxz.code == 0);
  CHECK(json::parse(gaic.out).at("selected") == "emax");
  CHECK(json::parse(maxz.out).at("selected") == "emax");  // emax has the max z too

  const RunResult avg = run(
      "mcpmod --mu /tmp/dk_mu.csv --cov /tmp/dk_cov.csv --models /tmp/dk_models.json "
      "--delta 1.4 --selection average --json");
  REQUIRE(avg.code == 0);
  const json ja = json::parse(avg.out);
  CHECK(ja.at("selected") == "average");
  // averaged target dose sits between the steep emax estimate and the
  // shallow quadratic one
  const double td_avg = ja.at("targetDose").get<double>();
  const double td_sel = json::parse(gaic.out).at("targetDose").get<double>();
  CHECK(td_avg > td_sel);
  CHECK(td_avg < 6.0);
  double wsum = 0.0;
  for (const auto& [k, v] : ja.at("gaicWeights").items()) wsum += v.get<double>();
  CHECK(wsum == Approx(1.0).margin(1e-9));
}

TEST_CASE("direction flag flips decreasing endpoints") {
  // decreasing profile: significant only when tested with --direction dec
  spit("/tmp/dk_mu_dec.csv", "dose,mu\n0,-5.099\n1,-5.617\n3,-6.978\n10,-7.319\n30,-6.678\n");
  const RunResult inc = run(
      "mctest --mu /tmp/dk_mu_dec.csv --cov /tmp/dk_cov.csv --models /tmp/dk_models.json --json");
  const RunResult dec = run(
      "mctest --mu /tmp/dk_mu_dec.csv --cov /tmp/dk_cov.csv --models /tmp/dk_models.json "
      "--direction dec --json");
  REQUIRE(inc.code == 0);
  REQUIRE(dec.code == 0);
  const json ji = json::parse(inc.out);
  const json jd = json::parse(dec.out);
  bool any_inc = false, any_dec = false;
  for (bool s : ji.at("significant").get<std::vector<bool>>()) any_inc = any_inc || s;
  for (bool s : jd.at("significant").get<std::vector<bool>>()) any_dec = any_dec || s;
  CHECK_FALSE(any_inc);
  CHECK(any_dec);
}
