#pragma once

// ANOVA-type first-stage estimators: each produces the (muHat, S) pair that
// drives all downstream testing and fitting.
//
//  normal  - group means with pooled residual variance
//  binary  - saturated logistic regression in closed form (logit scale)
//  count   - negative binomial with dose as factor and common overdispersion
//  tte     - Cox proportional hazards with dose as factor, placebo fixed at 0

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "dosekit/types.hpp"

namespace dosekit {

struct NormalRow {
  double dose;
  double resp;
};

struct CountRow {
  double dose;
  long count;
};

struct BinaryGroup {
  double dose;
  long successes;
  long trials;
};

struct TteRow {
  double dose;
  double time;
  bool event;
};

namespace detail {
template <typename Row>
std::map<double, std::vector<const Row*>> group_by_dose(const std::vector<Row>& rows) {
  std::map<double, std::vector<const Row*>> groups;
  for (const auto& r : rows) groups[r.dose].push_back(&r);
  return groups;
}
}  // namespace detail

inline AnovaEstimate anova_normal(const std::vector<NormalRow>& rows) {
  auto groups = detail::group_by_dose(rows);
  if (groups.size() < 2) throw validation_error("anova_normal: need at least two dose groups");
  std::vector<double> doses;
  std::vector<double> means;
  std::vector<std::size_t> sizes;
  double ss_resid = 0.0;
  std::size_t n_total = 0;
  for (const auto& [dose, obs] : groups) {
    if (obs.size() < 2) throw validation_error("anova_normal: need >= 2 observations per dose");
    double m = 0.0;
    for (const auto* r : obs) m += r->resp;
    m /= static_cast<double>(obs.size());
    for (const auto* r : obs) ss_resid += (r->resp - m) * (r->resp - m);
    doses.push_back(dose);
    means.push_back(m);
    sizes.push_back(obs.size());
    n_total += obs.size();
  }
  const double s2 = ss_resid / static_cast<double>(n_total - groups.size());
  const Eigen::Index k = static_cast<Eigen::Index>(doses.size());
  Vector mu(k);
  Matrix s = Matrix::Zero(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    mu[i] = means[static_cast<std::size_t>(i)];
    s(i, i) = s2 / static_cast<double>(sizes[static_cast<std::size_t>(i)]);
  }
  return AnovaEstimate(DoseDesign(doses), mu, s);
}

// Saturated binomial model: muHat_i = logit(p_i), Var = 1/s + 1/f per dose.
// The Haldane flag adds 1/2 to both cells, allowing boundary proportions.
inline AnovaEstimate logistic_saturated(const std::vector<BinaryGroup>& groups_in,
                                        bool haldane = false) {
  if (groups_in.size() < 2) throw validation_error("logistic_saturated: need >= 2 dose groups");
  std::vector<BinaryGroup> groups = groups_in;
  std::sort(groups.begin(), groups.end(),
            [](const BinaryGroup& a, const BinaryGroup& b) { return a.dose < b.dose; });
  const Eigen::Index k = static_cast<Eigen::Index>(groups.size());
  std::vector<double> doses;
  Vector mu(k);
  Matrix s = Matrix::Zero(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const auto& g = groups[static_cast<std::size_t>(i)];
    if (g.trials <= 0 || g.successes < 0 || g.successes > g.trials)
      throw validation_error("logistic_saturated: invalid success/trial counts");
    double succ = static_cast<double>(g.successes);
    double fail = static_cast<double>(g.trials - g.successes);
    if (succ == 0.0 || fail == 0.0) {
      if (!haldane)
        throw validation_error("logistic_saturated: boundary proportion at dose " +
                               std::to_string(g.dose) + " (enable the Haldane correction)");
      succ += 0.5;
      fail += 0.5;
    }
    mu[i] = std::log(succ / fail);
    s(i, i) = 1.0 / succ + 1.0 / fail;
    doses.push_back(g.dose);
  }
  return AnovaEstimate(DoseDesign(doses), mu, s);
}

// Negative binomial with log link, dose as factor and a common
// overdispersion k (Var = mu + mu^2/k), maximized jointly by Newton
// iteration with step halving. S is the inverse observed information
// restricted to the log-mean block.
inline AnovaEstimate negbin_saturated(const std::vector<CountRow>& rows, int max_iter = 100,
                                      double* k_out = nullptr) {
  auto groups = detail::group_by_dose(rows);
  if (groups.size() < 2) throw validation_error("negbin_saturated: need >= 2 dose groups");
  std::vector<double> doses;
  std::vector<std::vector<double>> y;
  for (const auto& [dose, obs] : groups) {
    if (obs.size() < 2) throw validation_error("negbin_saturated: need >= 2 subjects per dose");
    std::vector<double> g;
    for (const auto* r : obs) {
      if (r->count < 0) throw validation_error("negbin_saturated: negative count");
      g.push_back(static_cast<double>(r->count));
    }
    const double total = std::accumulate(g.begin(), g.end(), 0.0);
    if (total == 0.0)
      throw validation_error("negbin_saturated: all-zero group at dose " + std::to_string(dose));
    doses.push_back(dose);
    y.push_back(std::move(g));
  }
  const std::size_t kk = doses.size();

  // parameters: beta_g = log mean per dose, psi = log k
  Vector beta(static_cast<Eigen::Index>(kk));
  double grand_mean = 0.0, grand_var = 0.0;
  std::size_t n_total = 0;
  for (std::size_t g = 0; g < kk; ++g) {
    double m = std::accumulate(y[g].begin(), y[g].end(), 0.0) / static_cast<double>(y[g].size());
    beta[static_cast<Eigen::Index>(g)] = std::log(m);
    for (double v : y[g]) {
      grand_mean += v;
      ++n_total;
    }
  }
  grand_mean /= static_cast<double>(n_total);
  for (const auto& g : y)
    for (double v : g) grand_var += (v - grand_mean) * (v - grand_mean);
  grand_var /= static_cast<double>(n_total - 1);
  double psi = (grand_var > grand_mean)
                   ? std::log(grand_mean * grand_mean / (grand_var - grand_mean))
                   : std::log(100.0);
  const double psi_cap = std::log(1e8);
  psi = std::min(psi, psi_cap);

  auto loglik = [&](const Vector& b, double ps) {
    const double kpar = std::exp(ps);
    double ll = 0.0;
    for (std::size_t g = 0; g < kk; ++g) {
      const double m = std::exp(b[static_cast<Eigen::Index>(g)]);
      for (double v : y[g]) {
        ll += std::lgamma(v + kpar) - std::lgamma(kpar) - std::lgamma(v + 1.0) +
              kpar * std::log(kpar) + v * b[static_cast<Eigen::Index>(g)] -
              (v + kpar) * std::log(m + kpar);
      }
    }
    return ll;
  };

  double ll = loglik(beta, psi);
  bool converged = false;
  const Eigen::Index p = static_cast<Eigen::Index>(kk) + 1;
  Matrix info(p, p);
  for (int it = 0; it < max_iter; ++it) {
    const double kpar = std::exp(psi);
    Vector score = Vector::Zero(p);
    info.setZero();
    for (std::size_t g = 0; g < kk; ++g) {
      const Eigen::Index gi = static_cast<Eigen::Index>(g);
      const double m = std::exp(beta[gi]);
      double s_b = 0.0, i_bb = 0.0, i_bk = 0.0, s_k = 0.0, i_kk = 0.0;
      for (double v : y[g]) {
        const double denom = m + kpar;
        s_b += kpar * (v - m) / denom;
        i_bb += kpar * m * (v + kpar) / (denom * denom);
        i_bk += -(v - m) * m / (denom * denom);  // -d2l/(dbeta dk)
        s_k += boost::math::digamma(v + kpar) - boost::math::digamma(kpar) + std::log(kpar) +
               1.0 - std::log(denom) - (v + kpar) / denom;
        i_kk += -(boost::math::trigamma(v + kpar) - boost::math::trigamma(kpar) + 1.0 / kpar -
                  2.0 / denom + (v + kpar) / (denom * denom));
      }
      score[gi] = s_b;
      info(gi, gi) = i_bb;
      info(gi, p - 1) = kpar * i_bk;  // chain rule to psi = log k
      info(p - 1, gi) = kpar * i_bk;
      score[p - 1] += kpar * s_k;
      info(p - 1, p - 1) += kpar * kpar * i_kk;
    }
    info(p - 1, p - 1) -= score[p - 1];  // observed information in psi

    if (score.lpNorm<Eigen::Infinity>() < 1e-10 * (1.0 + std::abs(ll))) {
      converged = true;
      break;
    }
    Eigen::FullPivLU<Matrix> lu(info);
    Vector step;
    if (lu.isInvertible()) {
      step = lu.solve(score);
    } else {
      step = score / (1.0 + score.norm());  // gradient fallback
    }
    double scale = 1.0;
    bool improved = false;
    for (int half = 0; half < 40; ++half) {
      Vector beta_try = beta + scale * step.head(p - 1);
      double psi_try = std::min(psi + scale * step[p - 1], psi_cap);
      const double ll_try = loglik(beta_try, psi_try);
      if (ll_try >= ll - 1e-9 * (1.0 + std::abs(ll))) {
        beta = beta_try;
        psi = psi_try;
        if (psi >= psi_cap && score[p - 1] > 0.0) {
          // overdispersion ran to the Poisson limit; profile is flat there
          converged = std::abs(ll_try - ll) < 1e-10 * (1.0 + std::abs(ll));
        }
        ll = ll_try;
        improved = true;
        break;
      }
      scale *= 0.5;
    }
    if (!improved || converged) {
      converged = converged || !improved;
      break;
    }
  }
  if (!converged) {
    // final gradient check; tiny residual gradients are acceptable
    const double kpar = std::exp(psi);
    double gmax = 0.0;
    for (std::size_t g = 0; g < kk; ++g) {
      const double m = std::exp(beta[static_cast<Eigen::Index>(g)]);
      double s_b = 0.0;
      for (double v : y[g]) s_b += kpar * (v - m) / (m + kpar);
      gmax = std::max(gmax, std::abs(s_b));
    }
    if (gmax > 1e-6)
      throw numeric_error("negbin_saturated: Newton iteration failed to converge");
  }

  // S restricted to the log-mean block (cross information vanishes at the
  // MLE because the beta score is proportional to sum(y - ybar))
  const double kpar = std::exp(psi);
  if (k_out) *k_out = kpar;
  const Eigen::Index ke = static_cast<Eigen::Index>(kk);
  Vector mu(ke);
  Matrix s = Matrix::Zero(ke, ke);
  for (Eigen::Index g = 0; g < ke; ++g) {
    const double m = std::exp(beta[g]);
    double i_bb = 0.0;
    for (double v : y[static_cast<std::size_t>(g)])
      i_bb += kpar * m * (v + kpar) / ((m + kpar) * (m + kpar));
    mu[g] = beta[g];
    s(g, g) = 1.0 / i_bb;
  }
  return AnovaEstimate(DoseDesign(doses), mu, s);
}

// Cox proportional hazards with dose as factor and the placebo parameter
// fixed at 0. Breslow tie handling; Newton-Raphson with step halving until
// the score norm drops below 1e-8. Returns placebo-adjusted log hazard
// ratios with S the inverse observed information.
inline AnovaEstimate coxph_factor(const std::vector<TteRow>& rows, int max_iter = 100) {
  auto groups = detail::group_by_dose(rows);
  if (groups.size() < 2) throw validation_error("coxph_factor: need >= 2 dose groups");
  if (groups.begin()->first != 0.0)
    throw validation_error("coxph_factor: placebo group (dose 0) required");
  std::vector<double> active_doses;
  for (const auto& [dose, obs] : groups) {
    (void)obs;
    if (dose != 0.0) active_doses.push_back(dose);
  }
  const Eigen::Index p = static_cast<Eigen::Index>(active_doses.size());

  struct Obs {
    double time;
    bool event;
    Eigen::Index group;  // -1 placebo, else active index
  };
  std::vector<Obs> obs;
  obs.reserve(rows.size());
  long n_events = 0;
  std::map<double, long> events_per_dose;
  for (const auto& r : rows) {
    if (!(r.time > 0.0)) throw validation_error("coxph_factor: times must be > 0");
    Eigen::Index g = -1;
    for (Eigen::Index j = 0; j < p; ++j)
      if (active_doses[static_cast<std::size_t>(j)] == r.dose) g = j;
    obs.push_back({r.time, r.event, g});
    if (r.event) {
      ++n_events;
      ++events_per_dose[r.dose];
    }
  }
  if (n_events == 0) throw validation_error("coxph_factor: no events observed");
  for (const auto& [dose, obs_group] : groups) {
    (void)obs_group;
    if (events_per_dose[dose] == 0)
      throw numeric_error("coxph_factor: monotone likelihood; no events in dose group " +
                          std::to_string(dose));
  }

  std::sort(obs.begin(), obs.end(), [](const Obs& a, const Obs& b) { return a.time < b.time; });
  const std::size_t n = obs.size();

  Vector beta = Vector::Zero(p);
  auto partial_loglik = [&](const Vector& b) {
    // accumulate risk-set sums from the largest time downward
    double ll = 0.0;
    double s0 = 0.0;
    std::size_t i = n;
    while (i > 0) {
      // add all subjects tied at this time to the risk set first
      std::size_t j = i;
      while (j > 0 && obs[j - 1].time == obs[i - 1].time) {
        const Obs& o = obs[j - 1];
        s0 += (o.group < 0) ? 1.0 : std::exp(b[o.group]);
        --j;
      }
      for (std::size_t m = j; m < i; ++m) {
        const Obs& o = obs[m];
        if (o.event) ll += ((o.group < 0) ? 0.0 : b[o.group]) - std::log(s0);
      }
      i = j;
    }
    return ll;
  };

  // score and observed information in one sweep, risk set built from the
  // largest time downward; censored subjects tied with an event time enter
  // that risk set
  auto score_info = [&](const Vector& b, Vector& score, Matrix& neg_hess) {
    score.setZero();
    neg_hess.setZero();
    double s0 = 0.0;
    Vector s1 = Vector::Zero(p);
    std::size_t i = n;
    while (i > 0) {
      std::size_t j = i;
      while (j > 0 && obs[j - 1].time == obs[i - 1].time) {
        const Obs& o = obs[j - 1];
        const double w = (o.group < 0) ? 1.0 : std::exp(b[o.group]);
        s0 += w;
        if (o.group >= 0) s1[o.group] += w;
        --j;
      }
      for (std::size_t m = j; m < i; ++m) {
        const Obs& o = obs[m];
        if (!o.event) continue;
        const Vector pbar = s1 / s0;
        if (o.group >= 0) score[o.group] += 1.0;
        score -= pbar;
        // one-hot covariates: S2/S0 = diag(pbar)
        neg_hess += Matrix(pbar.asDiagonal());
        neg_hess -= pbar * pbar.transpose();
      }
      i = j;
    }
  };

  double ll = partial_loglik(beta);
  Vector score(p);
  Matrix neg_hess(p, p);
  bool converged = false;
  for (int it = 0; it < max_iter; ++it) {
    score_info(beta, score, neg_hess);
    if (score.norm() <= 1e-8) {
      converged = true;
      break;
    }
    Eigen::LLT<Matrix> step_llt(neg_hess);
    if (step_llt.info() != Eigen::Success)
      throw numeric_error("coxph_factor: singular information matrix");
    const Vector step = step_llt.solve(score);
    double scale = 1.0;
    bool improved = false;
    for (int half = 0; half < 40; ++half) {
      const Vector beta_try = beta + scale * step;
      const double ll_try = partial_loglik(beta_try);
      // accept within floating-point noise of the current value
      if (ll_try >= ll - 1e-9 * (1.0 + std::abs(ll))) {
        beta = beta_try;
        ll = ll_try;
        improved = true;
        break;
      }
      scale *= 0.5;
    }
    if (!improved) break;
    if (beta.lpNorm<Eigen::Infinity>() > 30.0)
      throw numeric_error("coxph_factor: monotone likelihood; estimates diverging");
  }
  score_info(beta, score, neg_hess);
  if (!converged && score.norm() > 1e-8)
    throw numeric_error("coxph_factor: Newton-Raphson failed to converge");

  Eigen::LLT<Matrix> llt(neg_hess);
  if (llt.info() != Eigen::Success)
    throw numeric_error("coxph_factor: singular information matrix at solution");
  const Matrix cov = llt.solve(Matrix::Identity(p, p));
  return AnovaEstimate(DoseDesign(active_doses, true), beta, cov);
}

}  // namespace dosekit
