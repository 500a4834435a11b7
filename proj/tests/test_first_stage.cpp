#include <catch2/catch.hpp>
#include <cmath>

#include "dosekit/first_stage.hpp"
#include "dosekit/rng.hpp"
#include "dosekit/simulate.hpp"
#include "dosekit/stats.hpp"

using namespace dosekit;

TEST_CASE("anova_normal on a hand-computed dataset") {
  const std::vector<NormalRow> rows{{0.0, 0.0}, {0.0, 2.0}, {1.0, 4.0}, {1.0, 6.0}};
  const AnovaEstimate est = anova_normal(rows);
  CHECK(est.mu_hat[0] == Approx(1.0));
  CHECK(est.mu_hat[1] == Approx(5.0));
  CHECK(est.S(0, 0) == Approx(1.0));
  CHECK(est.S(1, 1) == Approx(1.0));
  CHECK(est.S(0, 1) == 0.0);
  CHECK_FALSE(est.plac_adj);

  // constant responses give a zero covariance, rejected downstream
  const std::vector<NormalRow> flat{{0.0, 1.0}, {0.0, 1.0}, {1.0, 1.0}, {1.0, 1.0}};
  CHECK_THROWS_AS(anova_normal(flat), validation_error);
  const std::vector<NormalRow> tiny{{0.0, 1.0}, {1.0, 2.0}, {1.0, 3.0}};
  CHECK_THROWS_AS(anova_normal(tiny), validation_error);
}

TEST_CASE("saturated logistic closed form") {
  // placebo arm: 13 of 133 responders
  const std::vector<BinaryGroup> two{{0.0, 13, 133}, {10.0, 50, 100}};
  const AnovaEstimate est = logistic_saturated(two);
  CHECK(est.mu_hat[0] == Approx(std::log(13.0 / 120.0)).epsilon(1e-12));
  CHECK(est.mu_hat[0] == Approx(-2.2225).margin(5e-4));
  CHECK(est.S(0, 0) == Approx(133.0 / (13.0 * 120.0)).epsilon(1e-12));
  CHECK(est.S(0, 0) == Approx(0.08526).margin(5e-5));
  CHECK(est.S(1, 1) == Approx(0.04).epsilon(1e-12));  // p = 0.5, n = 100

  // boundary proportions need the Haldane correction
  const std::vector<BinaryGroup> bad{{0.0, 0, 50}, {10.0, 25, 50}};
  CHECK_THROWS_AS(logistic_saturated(bad), validation_error);
  const AnovaEstimate hal = logistic_saturated(bad, true);
  CHECK(hal.mu_hat[0] == Approx(std::log(0.5 / 50.5)).epsilon(1e-12));
}

TEST_CASE("saturated logistic equals an iterative GLM oracle") {
  // Newton iteration on the saturated binomial likelihood, one parameter
  // per dose; must match the closed form essentially exactly.
  const std::vector<BinaryGroup> groups{{0.0, 13, 133}, {2.5, 4, 32}, {10.0, 16, 63}};
  const AnovaEstimate est = logistic_saturated(groups);
  for (std::size_t i = 0; i < groups.size(); ++i) {
    double eta = 0.0;
    for (int it = 0; it < 60; ++it) {
      const double p = 1.0 / (1.0 + std::exp(-eta));
      const double score = static_cast<double>(groups[i].successes) -
                           static_cast<double>(groups[i].trials) * p;
      const double info = static_cast<double>(groups[i].trials) * p * (1.0 - p);
      eta += score / info;
    }
    CHECK(est.mu_hat[static_cast<Eigen::Index>(i)] == Approx(eta).margin(1e-10));
  }
}

TEST_CASE("negative binomial saturated fit") {
  Rng rng(314);
  // NB data, k = 1, two dose groups
  std::vector<CountRow> rows;
  const double mu0 = 7.0, mu1 = 3.0;
  const int n = 500;
  for (int i = 0; i < n; ++i) {
    rows.push_back({0.0, rng.negative_binomial(mu0, 1.0)});
    rows.push_back({1.0, rng.negative_binomial(mu1, 1.0)});
  }
  double k_hat = 0.0;
  const AnovaEstimate est = negbin_saturated(rows, 100, &k_hat);

  // log-mean estimates are the group log-means
  double s0 = 0.0, s1 = 0.0;
  for (const auto& r : rows) (r.dose == 0.0 ? s0 : s1) += static_cast<double>(r.count);
  CHECK(est.mu_hat[0] == Approx(std::log(s0 / n)).margin(1e-9));
  CHECK(est.mu_hat[1] == Approx(std::log(s1 / n)).margin(1e-9));
  CHECK(k_hat == Approx(1.0).margin(0.25));

  // profile-likelihood oracle for k: golden search on the profiled loglik
  auto profile_nll = [&](double k) {
    double ll = 0.0;
    const double m0 = s0 / n, m1 = s1 / n;
    for (const auto& r : rows) {
      const double m = r.dose == 0.0 ? m0 : m1;
      const double y = static_cast<double>(r.count);
      ll += std::lgamma(y + k) - std::lgamma(k) + k * std::log(k) + y * std::log(m) -
            (y + k) * std::log(m + k);
    }
    return -ll;
  };
  double lo = 0.05, hi = 20.0;
  for (int it = 0; it < 200; ++it) {
    const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
    if (profile_nll(m1) < profile_nll(m2)) hi = m2;
    else lo = m1;
  }
  const double k_oracle = 0.5 * (lo + hi);
  CHECK(k_hat == Approx(k_oracle).epsilon(1e-6));

  // S diagonal equals (1/mean + 1/k)/n at the estimate
  CHECK(est.S(0, 0) == Approx((1.0 / (s0 / n) + 1.0 / k_hat) / n).epsilon(1e-9));

  // Poisson data drives the overdispersion to the Poisson limit
  std::vector<CountRow> pois;
  for (int i = 0; i < 400; ++i) {
    pois.push_back({0.0, rng.poisson(5.0)});
    pois.push_back({1.0, rng.poisson(2.0)});
  }
  double k_pois = 0.0;
  const AnovaEstimate pe = negbin_saturated(pois, 100, &k_pois);
  double p0 = 0.0, p1 = 0.0;
  for (const auto& r : pois) (r.dose == 0.0 ? p0 : p1) += static_cast<double>(r.count);
  CHECK(pe.mu_hat[0] == Approx(std::log(p0 / 400)).margin(1e-8));
  CHECK(pe.mu_hat[1] == Approx(std::log(p1 / 400)).margin(1e-8));
  CHECK(k_pois > 20.0);

  const std::vector<CountRow> zeros{{0.0, 0}, {0.0, 0}, {1.0, 3}, {1.0, 4}};
  CHECK_THROWS_AS(negbin_saturated(zeros), validation_error);
}

TEST_CASE("negative binomial estimates track the count generator truth") {
  SimScenario sc = preset_scenario("table1-count-emax");
  sc.n_per_arm = 1000;
  sc.seed = 4242;
  const SubjectData data = generate(sc, 0);
  const AnovaEstimate est = negbin_saturated(data.count);
  REQUIRE(est.n_doses() == 6);
  for (std::size_t i = 0; i < 6; ++i) {
    const Eigen::Index ix = static_cast<Eigen::Index>(i);
    CHECK(std::abs(est.mu_hat[ix] - sc.true_mean(est.design[i])) <=
          3.0 * std::sqrt(est.S(ix, ix)));
  }
}

TEST_CASE("cox proportional hazards with dose as factor") {
  Rng rng(2718);

  SECTION("null case: both groups identical") {
    std::vector<TteRow> rows;
    for (int i = 0; i < 400; ++i) {
      const double t0 = rng.exponential(1.0);
      const double t1 = rng.exponential(1.0);
      rows.push_back({0.0, std::min(t0, 10.0), t0 <= 10.0});
      rows.push_back({5.0, std::min(t1, 10.0), t1 <= 10.0});
    }
    const AnovaEstimate est = coxph_factor(rows);
    CHECK(est.plac_adj);
    CHECK(est.design.placebo_adjusted());
    CHECK(std::abs(est.mu_hat[0]) <= 3.0 * std::sqrt(est.S(0, 0)));
  }

  SECTION("no censoring: agrees with the exponential log-rate-ratio") {
    std::vector<TteRow> rows;
    const double true_loghr = 0.7;
    double d0 = 0.0, t0sum = 0.0, d1 = 0.0, t1sum = 0.0;
    for (int i = 0; i < 1000; ++i) {
      const double t0 = rng.exponential(1.0);
      const double t1 = rng.exponential(std::exp(-true_loghr));
      rows.push_back({0.0, t0, true});
      rows.push_back({5.0, t1, true});
      d0 += 1.0;
      t0sum += t0;
      d1 += 1.0;
      t1sum += t1;
    }
    const AnovaEstimate est = coxph_factor(rows);
    const double exp_mle = std::log((d1 / t1sum) / (d0 / t0sum));
    CHECK(est.mu_hat[0] == Approx(exp_mle).margin(0.05));
    CHECK(est.mu_hat[0] == Approx(true_loghr).margin(3.0 * std::sqrt(est.S(0, 0))));
  }

  SECTION("table generator: estimates near the implied log hazard ratios") {
    SimScenario sc = preset_scenario("table1-tte-emax");
    sc.n_per_arm = 300;
    sc.seed = 99;
    const SubjectData data = generate(sc, 0);
    const AnovaEstimate est = coxph_factor(data.tte);
    REQUIRE(est.n_doses() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
      const double x = est.design[i];
      const double implied = -(sc.true_mean(x) - sc.true_mean(0.0));
      CHECK(std::abs(est.mu_hat[static_cast<Eigen::Index>(i)] - implied) <=
            3.0 * std::sqrt(est.S(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i))));
    }
  }

  SECTION("monotone likelihood: an event-free group is named") {
    std::vector<TteRow> rows;
    for (int i = 0; i < 30; ++i) {
      rows.push_back({0.0, 1.0 + 0.01 * i, true});
      rows.push_back({5.0, 10.0, false});  // all censored
    }
    try {
      coxph_factor(rows);
      FAIL("expected monotone-likelihood error");
    } catch (const numeric_error& e) {
      CHECK(std::string(e.what()).find("5.0") != std::string::npos);
    }
    CHECK_THROWS_AS(coxph_factor(std::vector<TteRow>{{0.0, 1.0, true}, {0.0, 2.0, true}}),
                    validation_error);
  }
}

TEST_CASE("first-stage estimates are asymptotically normal across replicates") {
  const int reps = 2000;
  const int n = 1000;
  std::vector<double> z_norm, z_bin, z_count, z_tte;
  z_norm.reserve(reps);
  z_bin.reserve(reps);
  z_count.reserve(reps);
  z_tte.reserve(reps);
  for (int r = 0; r < reps; ++r) {
    Rng rng(hash_combine(555, static_cast<std::uint64_t>(r)));
    {  // normal: standardized contrast of two group means
      double s0 = 0.0, s1 = 0.0, ss = 0.0;
      std::vector<double> g0(n), g1(n);
      for (int i = 0; i < n; ++i) {
        g0[i] = rng.normal(0.0, 1.0);
        g1[i] = rng.normal(0.5, 1.0);
        s0 += g0[i];
        s1 += g1[i];
      }
      const double m0 = s0 / n, m1 = s1 / n;
      for (int i = 0; i < n; ++i) ss += (g0[i] - m0) * (g0[i] - m0) + (g1[i] - m1) * (g1[i] - m1);
      const double s2 = ss / (2 * n - 2);
      z_norm.push_back((m1 - m0 - 0.5) / std::sqrt(2.0 * s2 / n));
    }
    {  // binary on the logit scale
      const double p = 0.3;
      long succ = 0;
      for (int i = 0; i < n; ++i) succ += rng.bernoulli(p) ? 1 : 0;
      const AnovaEstimate est =
          logistic_saturated({{0.0, succ, n}, {1.0, n / 2, n}}, true);
      z_bin.push_back((est.mu_hat[0] - std::log(p / (1 - p))) / std::sqrt(est.S(0, 0)));
    }
    {  // count
      std::vector<CountRow> rows;
      for (int i = 0; i < n; ++i) {
        rows.push_back({0.0, rng.negative_binomial(5.0, 1.0)});
        rows.push_back({1.0, rng.negative_binomial(3.0, 1.0)});
      }
      const AnovaEstimate est = negbin_saturated(rows);
      z_count.push_back((est.mu_hat[0] - std::log(5.0)) / std::sqrt(est.S(0, 0)));
    }
    {  // time-to-event
      std::vector<TteRow> rows;
      for (int i = 0; i < n; ++i) {
        const double t0 = rng.exponential(1.0);
        const double t1 = rng.exponential(0.5);
        rows.push_back({0.0, std::min(t0, 10.0), t0 <= 10.0});
        rows.push_back({1.0, std::min(t1, 10.0), t1 <= 10.0});
      }
      const AnovaEstimate est = coxph_factor(rows);
      z_tte.push_back((est.mu_hat[0] - std::log(2.0)) / std::sqrt(est.S(0, 0)));
    }
  }
  CHECK(std::abs(sample_skewness(z_norm)) <= 0.15);
  CHECK(std::abs(sample_skewness(z_bin)) <= 0.15);
  CHECK(std::abs(sample_skewness(z_count)) <= 0.15);
  CHECK(std::abs(sample_skewness(z_tte)) <= 0.15);
}
