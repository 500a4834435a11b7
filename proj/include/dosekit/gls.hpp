#pragma once

// The Mod step: two-stage generalized least squares dose-response fitting.
//
// The criterion Psi(theta) = (mu - f(x, theta))' S^{-1} (mu - f(x, theta))
// is minimized by exploiting the partially linear structure of every
// family: for fixed nonlinear parameters the optimal intercept and scale
// solve a closed-form GLS normal system, so only the nonlinear parameters
// are searched (deterministic log-spaced grid plus local refinement).

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "dosekit/models.hpp"
#include "dosekit/optimize.hpp"
#include "dosekit/rng.hpp"
#include "dosekit/stats.hpp"
#include "dosekit/types.hpp"

namespace dosekit {

struct FitBounds {
  // closed interval per nonlinear parameter
  std::vector<std::array<double, 2>> nl;

  void validate(ModelFamily family) const {
    if (nl.size() != nonlinear_param_count(family))
      throw validation_error("FitBounds: wrong number of intervals for family");
    for (const auto& b : nl)
      if (!(b[0] < b[1])) throw validation_error("FitBounds: lower bound must be below upper");
  }
};

// Defaults scale with the design: ED50 in [1e-3 xK, 1.5 xK], exponential
// delta in [0.05 xK, 5 xK], Hill coefficient in [0.25, 10]. The quadratic
// entry is structural only: that family is refit exactly in its polynomial
// parameterization and its delta is never clamped.
inline FitBounds default_fit_bounds(ModelFamily family, const DoseDesign& design) {
  const double xk = design.max_dose();
  switch (family) {
    case ModelFamily::Linear: return {{}};
    case ModelFamily::Emax: return {{{1e-3 * xk, 1.5 * xk}}};
    case ModelFamily::SigEmax: return {{{1e-3 * xk, 1.5 * xk}, {0.25, 10.0}}};
    case ModelFamily::Exponential: return {{{0.05 * xk, 5.0 * xk}}};
    case ModelFamily::Quadratic: return {{{-10.0 / xk, 10.0 / xk}}};
  }
  throw validation_error("default_fit_bounds: unknown family");
}

struct FittedModel {
  ModelFamily family = ModelFamily::Linear;
  bool plac_adj = false;
  Vector theta;              // (theta0, theta1, nl...) or (theta1, nl...) when plac_adj
  double criterion = 0.0;    // Psi at the minimizer
  double gaic = 0.0;         // criterion + 2 dim(theta)
  Matrix theta_cov;          // asymptotic covariance (F' S^{-1} F)^{-1}; empty if singular
  std::vector<bool> at_bound;
  bool cov_reliable = false;
  std::string label;

  std::size_t dim() const { return static_cast<std::size_t>(theta.size()); }
  bool any_at_bound() const {
    for (bool b : at_bound)
      if (b) return true;
    return false;
  }
  std::vector<double> nonlinear() const {
    const Eigen::Index off = plac_adj ? 1 : 2;
    return std::vector<double>(theta.data() + off, theta.data() + theta.size());
  }
  double predict(double x) const {
    const auto nl = nonlinear();
    const double f0 = eval_standardized(family, nl, x);
    return plac_adj ? theta[0] * f0 : theta[0] + theta[1] * f0;
  }
  // effect over placebo, f(x) - f(0)
  double effect(double x) const { return plac_adj ? predict(x) : predict(x) - theta[0]; }
  // gradient of predict in the stored parameterization
  Vector gradient(double x) const {
    const auto nl = nonlinear();
    const auto gnl = gradient_standardized_nl(family, nl, x);
    Vector g(theta.size());
    const double f0 = eval_standardized(family, nl, x);
    if (plac_adj) {
      g[0] = f0;
      for (std::size_t i = 0; i < gnl.size(); ++i) g[1 + static_cast<Eigen::Index>(i)] = theta[0] * gnl[i];
    } else {
      g[0] = 1.0;
      g[1] = f0;
      for (std::size_t i = 0; i < gnl.size(); ++i) g[2 + static_cast<Eigen::Index>(i)] = theta[1] * gnl[i];
    }
    return g;
  }
};

namespace detail {

struct ProfileSolver {
  const AnovaEstimate* est;
  ModelFamily family;
  Eigen::LLT<Matrix> llt;
  Vector w_mu;     // S^{-1} mu
  Vector w_one;    // S^{-1} 1 (full fits only)
  double mu_w_mu;  // mu' S^{-1} mu
  double one_w_one = 0.0;
  double mu_w_one = 0.0;

  explicit ProfileSolver(const AnovaEstimate& e, ModelFamily fam) : est(&e), family(fam), llt(e.S) {
    if (llt.info() != Eigen::Success)
      throw numeric_error("gls_fit: first-stage covariance is not positive definite");
    w_mu = llt.solve(e.mu_hat);
    mu_w_mu = e.mu_hat.dot(w_mu);
    if (!e.plac_adj) {
      w_one = llt.solve(Vector::Ones(e.mu_hat.size()));
      one_w_one = w_one.sum();
      mu_w_one = e.mu_hat.dot(w_one);
    }
  }

  Vector f0_vector(const std::vector<double>& nl) const {
    const auto& d = est->design;
    Vector f0(d.size());
    for (std::size_t i = 0; i < d.size(); ++i)
      f0[static_cast<Eigen::Index>(i)] = eval_standardized(family, nl, d[i]);
    return f0;
  }

  // Profiled criterion: solve the linear coefficients in closed form and
  // return Psi. Returns +inf when the profiled normal system is singular.
  double criterion(const std::vector<double>& nl, Vector* lin = nullptr) const {
    const Vector f0 = f0_vector(nl);
    const Vector wf = llt.solve(f0);
    const double fwf = f0.dot(wf);
    const double fwm = f0.dot(w_mu);
    if (est->plac_adj) {
      if (!(fwf > 1e-300)) return std::numeric_limits<double>::infinity();
      const double t1 = fwm / fwf;
      if (lin) {
        lin->resize(1);
        (*lin)[0] = t1;
      }
      return mu_w_mu - t1 * fwm;
    }
    const double fwo = f0.dot(w_one);
    const double det = one_w_one * fwf - fwo * fwo;
    if (!(det > 1e-14 * std::max(1.0, one_w_one * fwf)))
      return std::numeric_limits<double>::infinity();
    const double t0 = (fwf * mu_w_one - fwo * fwm) / det;
    const double t1 = (one_w_one * fwm - fwo * mu_w_one) / det;
    if (lin) {
      lin->resize(2);
      (*lin)[0] = t0;
      (*lin)[1] = t1;
    }
    // Psi = (mu - t0 1 - t1 f0)' W (mu - t0 1 - t1 f0), expanded in cached products
    return mu_w_mu - 2.0 * t0 * mu_w_one - 2.0 * t1 * fwm + t0 * t0 * one_w_one +
           2.0 * t0 * t1 * fwo + t1 * t1 * fwf;
  }
};

inline std::vector<double> log_grid(double lo, double hi, int n) {
  std::vector<double> g(static_cast<std::size_t>(n));
  if (lo > 0.0) {
    const double llo = std::log(lo), lhi = std::log(hi);
    for (int i = 0; i < n; ++i)
      g[static_cast<std::size_t>(i)] = std::exp(llo + (lhi - llo) * i / (n - 1.0));
  } else {
    for (int i = 0; i < n; ++i)
      g[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (n - 1.0);
  }
  return g;
}

constexpr int kGridPoints = 50;
constexpr double kBoundTol = 1e-6;

}  // namespace detail

// Covariance of theta per the simplified asymptotic form with A = S^{-1}:
// (F(theta)' S^{-1} F(theta))^{-1}, F the gradient at the design doses.
inline Matrix theta_covariance(const FittedModel& fit, const AnovaEstimate& est) {
  const auto& d = est.design;
  const Eigen::Index k = static_cast<Eigen::Index>(d.size());
  const Eigen::Index p = fit.theta.size();
  if (k < p) throw numeric_error("theta_covariance: fewer doses than parameters");
  Matrix f(k, p);
  for (Eigen::Index i = 0; i < k; ++i) f.row(i) = fit.gradient(d[static_cast<std::size_t>(i)]).transpose();
  Eigen::LLT<Matrix> llt(est.S);
  if (llt.info() != Eigen::Success) throw numeric_error("theta_covariance: S not positive definite");
  const Matrix info = f.transpose() * llt.solve(f);
  Eigen::FullPivLU<Matrix> lu(info);
  if (!lu.isInvertible())
    throw numeric_error("theta_covariance: singular information matrix");
  return lu.inverse();
}

inline FittedModel gls_fit(const AnovaEstimate& est, ModelFamily family, FitBounds bounds) {
  bounds.validate(family);
  const std::size_t n_nl = nonlinear_param_count(family);
  const std::size_t n_lin = est.plac_adj ? 1 : 2;
  if (est.n_doses() < n_lin + n_nl)
    throw numeric_error("gls_fit: fewer doses than model parameters");

  detail::ProfileSolver prof(est, family);
  FittedModel fit;
  fit.family = family;
  fit.plac_adj = est.plac_adj;
  fit.label = family_name(family);
  fit.at_bound.assign(n_nl, false);

  std::vector<double> nl_hat;

  if (family == ModelFamily::Quadratic) {
    // linear in the polynomial parameterization; solve exactly and convert
    const Eigen::Index k = static_cast<Eigen::Index>(est.n_doses());
    const Eigen::Index p = static_cast<Eigen::Index>(n_lin + 1);
    Matrix x(k, p);
    for (Eigen::Index i = 0; i < k; ++i) {
      const double dose = est.design[static_cast<std::size_t>(i)];
      Eigen::Index c = 0;
      if (!est.plac_adj) x(i, c++) = 1.0;
      x(i, c++) = dose;
      x(i, c) = dose * dose;
    }
    const Matrix wx = prof.llt.solve(x);
    const Matrix a = x.transpose() * wx;
    Eigen::FullPivLU<Matrix> lu(a);
    if (!lu.isInvertible()) throw numeric_error("gls_fit: singular profiled system");
    const Vector beta = lu.solve(x.transpose() * prof.w_mu);
    const Vector resid = est.mu_hat - x * beta;
    fit.criterion = resid.dot(prof.llt.solve(resid));
    const Eigen::Index off = est.plac_adj ? 0 : 1;
    if (beta[off] == 0.0) throw numeric_error("gls_fit: quadratic scale is zero; delta undefined");
    fit.theta.resize(p);
    if (est.plac_adj) fit.theta << beta[0], beta[1] / beta[0];
    else fit.theta << beta[0], beta[1], beta[2] / beta[1];
    nl_hat = {fit.theta[p - 1]};
  } else if (n_nl == 0) {
    Vector lin;
    const double psi = prof.criterion({}, &lin);
    if (!std::isfinite(psi)) throw numeric_error("gls_fit: singular profiled system");
    fit.criterion = psi;
    fit.theta = lin;
  } else if (n_nl == 1) {
    const auto& b = bounds.nl[0];
    const auto grid = detail::log_grid(b[0], b[1], detail::kGridPoints);
    double best_val = std::numeric_limits<double>::infinity();
    int best_i = 0;
    for (int i = 0; i < detail::kGridPoints; ++i) {
      const double v = prof.criterion({grid[static_cast<std::size_t>(i)]});
      if (v < best_val) {
        best_val = v;
        best_i = i;
      }
    }
    if (!std::isfinite(best_val)) throw numeric_error("gls_fit: singular profiled system");
    const double lo = grid[static_cast<std::size_t>(std::max(best_i - 1, 0))];
    const double hi = grid[static_cast<std::size_t>(std::min(best_i + 1, detail::kGridPoints - 1))];
    double x_hat = golden_section_min([&](double v) { return prof.criterion({v}); }, lo, hi, 1e-7);
    double f_hat = prof.criterion({x_hat});
    // the minimum may sit on a bound
    for (double edge : {b[0], b[1]}) {
      const double fe = prof.criterion({edge});
      if (fe < f_hat) {
        f_hat = fe;
        x_hat = edge;
      }
    }
    nl_hat = {x_hat};
    Vector lin;
    fit.criterion = prof.criterion(nl_hat, &lin);
    fit.theta.resize(static_cast<Eigen::Index>(n_lin + 1));
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n_lin); ++i) fit.theta[i] = lin[i];
    fit.theta[static_cast<Eigen::Index>(n_lin)] = x_hat;
    fit.at_bound[0] = (x_hat - b[0]) <= detail::kBoundTol * (b[1] - b[0]) ||
                      (b[1] - x_hat) <= detail::kBoundTol * (b[1] - b[0]);
  } else {
    // sigEmax: ED50 log-spaced, Hill linear, then Nelder-Mead refinement
    const auto& b0 = bounds.nl[0];
    const auto& b1 = bounds.nl[1];
    const auto g0 = detail::log_grid(b0[0], b0[1], detail::kGridPoints);
    const auto g1 = detail::log_grid(0.0, 1.0, detail::kGridPoints);
    double best_val = std::numeric_limits<double>::infinity();
    std::vector<double> best{g0[0], b1[0]};
    for (double e : g0) {
      for (double t : g1) {
        const double h = b1[0] + (b1[1] - b1[0]) * t;
        const double v = prof.criterion({e, h});
        if (v < best_val) {
          best_val = v;
          best = {e, h};
        }
      }
    }
    if (!std::isfinite(best_val)) throw numeric_error("gls_fit: singular profiled system");
    auto obj = [&](const std::vector<double>& v) { return prof.criterion(v); };
    nl_hat = nelder_mead_min(obj, best, {b0[0], b1[0]}, {b0[1], b1[1]}, 1e-9);
    Vector lin;
    fit.criterion = prof.criterion(nl_hat, &lin);
    fit.theta.resize(static_cast<Eigen::Index>(n_lin + 2));
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n_lin); ++i) fit.theta[i] = lin[i];
    fit.theta[static_cast<Eigen::Index>(n_lin)] = nl_hat[0];
    fit.theta[static_cast<Eigen::Index>(n_lin) + 1] = nl_hat[1];
    for (std::size_t i = 0; i < 2; ++i) {
      const auto& bi = bounds.nl[i];
      fit.at_bound[i] = (nl_hat[i] - bi[0]) <= detail::kBoundTol * (bi[1] - bi[0]) ||
                        (bi[1] - nl_hat[i]) <= detail::kBoundTol * (bi[1] - bi[0]);
    }
  }

  fit.gaic = fit.criterion + 2.0 * static_cast<double>(fit.dim());
  try {
    fit.theta_cov = theta_covariance(fit, est);
    fit.cov_reliable = !fit.any_at_bound();
  } catch (const numeric_error&) {
    fit.theta_cov = Matrix();
    fit.cov_reliable = false;
  }
  return fit;
}

inline FittedModel gls_fit(const AnovaEstimate& est, ModelFamily family) {
  return gls_fit(est, family, default_fit_bounds(family, est.design));
}

// Information criterion with user-chosen penalty; tau defaults to 2 (gAIC).
inline double gaic(const FittedModel& fit, double tau = 2.0) {
  return fit.criterion + tau * static_cast<double>(fit.dim());
}

enum class SelectionRule { MinGaic, MaxZ };

inline std::size_t select_model(const std::vector<FittedModel>& fits, SelectionRule rule,
                                const std::vector<double>& z = {}) {
  if (fits.empty()) throw validation_error("select_model: empty fit list");
  if (rule == SelectionRule::MaxZ && z.size() != fits.size())
    throw validation_error("select_model: max-z rule needs one statistic per fit");
  std::size_t best = 0;
  for (std::size_t i = 1; i < fits.size(); ++i) {
    if (rule == SelectionRule::MinGaic) {
      if (fits[i].gaic < fits[best].gaic) best = i;
    } else {
      if (z[i] > z[best]) best = i;
    }
  }
  return best;
}

// Buckland information-criterion weights: w_m proportional to exp(-gAIC_m/2).
inline Vector model_average_weights(const std::vector<FittedModel>& fits) {
  if (fits.empty()) throw validation_error("model_average_weights: empty fit list");
  double min_g = fits[0].gaic;
  for (const auto& f : fits) min_g = std::min(min_g, f.gaic);
  Vector w(static_cast<Eigen::Index>(fits.size()));
  double sum = 0.0;
  for (std::size_t i = 0; i < fits.size(); ++i) {
    w[static_cast<Eigen::Index>(i)] = std::exp(-(fits[i].gaic - min_g) / 2.0);
    sum += w[static_cast<Eigen::Index>(i)];
  }
  return w / sum;
}

struct ModelAverage {
  std::vector<FittedModel> fits;
  Vector weights;

  explicit ModelAverage(std::vector<FittedModel> f)
      : fits(std::move(f)), weights(model_average_weights(fits)) {}

  double predict(double x) const {
    double s = 0.0;
    for (std::size_t i = 0; i < fits.size(); ++i)
      s += weights[static_cast<Eigen::Index>(i)] * fits[i].predict(x);
    return s;
  }
  double effect(double x) const {
    double s = 0.0;
    for (std::size_t i = 0; i < fits.size(); ++i)
      s += weights[static_cast<Eigen::Index>(i)] * fits[i].effect(x);
    return s;
  }
};

enum class Direction { Increase, Decrease };

struct TargetDoseEstimate {
  std::optional<double> dose;
  double delta = 0.0;
  Direction direction = Direction::Increase;
  std::string source_label;
};

namespace detail {
// Smallest dose in (0, xk] whose signed effect reaches delta. A fine scan
// locates the first crossing, bisection sharpens it.
inline std::optional<double> first_crossing(const std::function<double(double)>& eff, double delta,
                                            double xk) {
  const int n_scan = 2048;
  double prev_x = 0.0, prev_v = 0.0;
  for (int i = 1; i <= n_scan; ++i) {
    const double x = xk * static_cast<double>(i) / n_scan;
    const double v = eff(x);
    if (v >= delta) {
      double lo = prev_x, hi = x;
      for (int it = 0; it < 200 && (hi - lo) > 1e-12 * xk; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (eff(mid) >= delta) hi = mid;
        else lo = mid;
      }
      return hi;
    }
    prev_x = x;
    prev_v = v;
  }
  (void)prev_v;
  return std::nullopt;
}
}  // namespace detail

template <typename Predictor>
TargetDoseEstimate target_dose(const Predictor& model, double delta, Direction direction,
                               const DoseDesign& design) {
  if (!(delta > 0.0)) throw validation_error("target_dose: Delta must be > 0");
  TargetDoseEstimate out;
  out.delta = delta;
  out.direction = direction;
  const double sign = direction == Direction::Increase ? 1.0 : -1.0;
  const double xk = design.max_dose();
  auto eff = [&](double x) { return sign * model.effect(x); };

  if constexpr (std::is_same_v<Predictor, FittedModel>) {
    out.source_label = model.label;
    // closed forms for strictly monotone one-parameter shapes
    if (model.family == ModelFamily::Linear) {
      const double slope = sign * (model.plac_adj ? model.theta[0] : model.theta[1]);
      if (slope > 0.0) {
        const double x = delta / slope;
        if (x <= xk) out.dose = x;
      }
      return out;
    }
    if (model.family == ModelFamily::Emax) {
      const double t1 = sign * (model.plac_adj ? model.theta[0] : model.theta[1]);
      const double ed50 = model.nonlinear()[0];
      if (t1 > delta) {
        const double x = delta * ed50 / (t1 - delta);
        if (x <= xk) out.dose = x;
      }
      return out;
    }
  }
  out.dose = detail::first_crossing(eff, delta, xk);
  return out;
}

struct BootstrapResult {
  Matrix theta_intervals;   // dim x 2, lower/upper quantiles
  Vector dose_grid;
  Matrix curve_intervals;   // grid x 2
  int n_requested = 0;
  int n_failed = 0;
  Matrix theta_draws;       // successful draws, one row each
};

// Parametric bootstrap: draw mu* ~ N(muHat, S), refit, report empirical
// quantile intervals for theta and the fitted curve. Each draw uses its own
// counter-derived stream, so results do not depend on evaluation order.
inline BootstrapResult bootstrap(const AnovaEstimate& est, ModelFamily family,
                                 const FitBounds& bounds, int n_draws, std::uint64_t seed,
                                 double q_lo = 0.05, double q_hi = 0.95, int grid_points = 51) {
  if (n_draws < 100) throw validation_error("bootstrap: need at least 100 draws");
  if (!(q_lo > 0.0 && q_lo < q_hi && q_hi < 1.0))
    throw validation_error("bootstrap: invalid quantile pair");
  Eigen::LLT<Matrix> llt(est.S);
  if (llt.info() != Eigen::Success) throw numeric_error("bootstrap: S not positive definite");
  const Matrix l = llt.matrixL();
  const Eigen::Index k = est.mu_hat.size();

  BootstrapResult out;
  out.n_requested = n_draws;
  std::vector<Vector> draws;
  draws.reserve(static_cast<std::size_t>(n_draws));
  for (int b = 0; b < n_draws; ++b) {
    Rng rng(seed, static_cast<std::uint64_t>(b), 0xB007ULL);
    Vector z(k);
    for (Eigen::Index i = 0; i < k; ++i) z[i] = rng.normal();
    const Vector mu_star = est.mu_hat + l * z;
    try {
      AnovaEstimate star(est.design, mu_star, est.S);
      draws.push_back(gls_fit(star, family, bounds).theta);
    } catch (const std::exception&) {
      ++out.n_failed;
    }
  }
  if (out.n_failed > n_draws / 20)
    throw numeric_error("bootstrap: more than 5% of refits failed (" +
                        std::to_string(out.n_failed) + "/" + std::to_string(n_draws) + ")");
  if (draws.empty()) throw numeric_error("bootstrap: no successful refits");

  const Eigen::Index dim = draws.front().size();
  out.theta_draws.resize(static_cast<Eigen::Index>(draws.size()), dim);
  for (std::size_t i = 0; i < draws.size(); ++i)
    out.theta_draws.row(static_cast<Eigen::Index>(i)) = draws[i].transpose();

  out.theta_intervals.resize(dim, 2);
  std::vector<double> col(draws.size());
  for (Eigen::Index j = 0; j < dim; ++j) {
    for (std::size_t i = 0; i < draws.size(); ++i) col[i] = out.theta_draws(static_cast<Eigen::Index>(i), j);
    out.theta_intervals(j, 0) = quantile_type7(col, q_lo);
    out.theta_intervals(j, 1) = quantile_type7(col, q_hi);
  }

  out.dose_grid.resize(grid_points);
  out.curve_intervals.resize(grid_points, 2);
  const double xk = est.design.max_dose();
  const bool plac_adj = est.plac_adj;
  std::vector<double> vals(draws.size());
  for (int g = 0; g < grid_points; ++g) {
    const double x = xk * static_cast<double>(g) / (grid_points - 1.0);
    out.dose_grid[g] = x;
    for (std::size_t i = 0; i < draws.size(); ++i) {
      FittedModel tmp;
      tmp.family = family;
      tmp.plac_adj = plac_adj;
      tmp.theta = draws[i];
      vals[i] = tmp.predict(x);
    }
    out.curve_intervals(g, 0) = quantile_type7(vals, q_lo);
    out.curve_intervals(g, 1) = quantile_type7(vals, q_hi);
  }
  return out;
}

struct PredictionBand {
  Vector doses;
  Vector fitted;
  Vector lower;
  Vector upper;
  bool cov_warning = false;  // set when the fit sits on a bound
};

// Delta-method pointwise intervals g(x)' Cov g(x) at the requested doses.
inline PredictionBand predict_with_ci(const FittedModel& fit, const Vector& doses,
                                      double level = 0.90) {
  if (!(level > 0.0 && level < 1.0)) throw validation_error("predict_with_ci: bad level");
  if (fit.theta_cov.size() == 0)
    throw numeric_error("predict_with_ci: covariance unavailable for this fit");
  PredictionBand band;
  band.doses = doses;
  band.fitted.resize(doses.size());
  band.lower.resize(doses.size());
  band.upper.resize(doses.size());
  band.cov_warning = !fit.cov_reliable;
  const double z = norm_quantile(0.5 + level / 2.0);
  for (Eigen::Index i = 0; i < doses.size(); ++i) {
    const double f = fit.predict(doses[i]);
    const Vector g = fit.gradient(doses[i]);
    const double v = g.dot(fit.theta_cov * g);
    const double half = z * std::sqrt(std::max(v, 0.0));
    band.fitted[i] = f;
    band.lower[i] = f - half;
    band.upper[i] = f + half;
  }
  return band;
}

}  // namespace dosekit
