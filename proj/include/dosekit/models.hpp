#pragma once

// Dose-response model families. Every family decomposes as
//   f(x, theta) = theta0 + theta1 * f0(x, theta0nl)
// with f0 the standardized model carrying the shape and f0(0) = 0.

#include <cmath>
#include <optional>
#include <vector>

#include "dosekit/optimize.hpp"
#include "dosekit/types.hpp"

namespace dosekit {

inline double eval_standardized(ModelFamily family, const std::vector<double>& theta0, double x) {
  validate_nonlinear_params(family, theta0);
  if (!(x >= 0.0)) throw validation_error("eval_standardized: dose must be >= 0");
  switch (family) {
    case ModelFamily::Linear:
      return x;
    case ModelFamily::Emax:
      return x / (x + theta0[0]);
    case ModelFamily::SigEmax: {
      if (x == 0.0) return 0.0;
      const double h = theta0[1];
      // work on log scale so large Hill coefficients do not overflow
      const double t = h * (std::log(x) - std::log(theta0[0]));
      if (t > 700.0) return 1.0;
      if (t < -700.0) return 0.0;
      const double r = std::exp(t);
      return r / (1.0 + r);
    }
    case ModelFamily::Quadratic:
      return x + theta0[0] * x * x;
    case ModelFamily::Exponential: {
      const double t = x / theta0[0];
      if (t > 700.0) throw numeric_error("exponential: exp(x/delta) overflows; delta too small");
      return std::expm1(t);
    }
  }
  throw validation_error("eval_standardized: unknown family");
}

inline double eval_full(const FullParams& p, double x) {
  return p.intercept() + p.scale() * eval_standardized(p.family, p.nonlinear(), x);
}

// Partial derivatives of f0 with respect to the nonlinear parameters.
inline std::vector<double> gradient_standardized_nl(ModelFamily family,
                                                    const std::vector<double>& theta0, double x) {
  validate_nonlinear_params(family, theta0);
  switch (family) {
    case ModelFamily::Linear:
      return {};
    case ModelFamily::Emax: {
      const double d = x + theta0[0];
      return {-x / (d * d)};
    }
    case ModelFamily::SigEmax: {
      if (x == 0.0) return {0.0, 0.0};
      const double e = theta0[0], h = theta0[1];
      const double t = h * (std::log(x) - std::log(e));
      if (std::abs(t) > 700.0) return {0.0, 0.0};
      const double r = std::exp(t);
      const double f = r / (1.0 + r);
      const double fq = f * (1.0 - f);  // u v / (u+v)^2
      return {-fq * h / e, fq * (std::log(x) - std::log(e))};
    }
    case ModelFamily::Quadratic:
      return {x * x};
    case ModelFamily::Exponential: {
      const double d = theta0[0];
      const double t = x / d;
      if (t > 700.0) throw numeric_error("exponential: exp(x/delta) overflows; delta too small");
      return {-std::exp(t) * x / (d * d)};
    }
  }
  throw validation_error("gradient_standardized_nl: unknown family");
}

// Gradient of eval_full with respect to (theta0, theta1, nonlinear...).
inline Vector gradient_full(const FullParams& p, double x) {
  const auto nl = p.nonlinear();
  Vector g(p.theta.size());
  g[0] = 1.0;
  g[1] = eval_standardized(p.family, nl, x);
  const auto gnl = gradient_standardized_nl(p.family, nl, x);
  for (std::size_t i = 0; i < gnl.size(); ++i) g[2 + static_cast<Eigen::Index>(i)] = p.scale() * gnl[i];
  return g;
}

// Standardized shape evaluated at the design doses.
inline Vector shape_vector(const CandidateModel& model, const DoseDesign& design) {
  Vector mu0(design.size());
  for (std::size_t i = 0; i < design.size(); ++i)
    mu0[static_cast<Eigen::Index>(i)] = eval_standardized(model.family, model.guesstimates, design[i]);
  return mu0;
}

// Largest standardized effect over [0, max dose] and the dose attaining it,
// computed analytically per family.
inline std::pair<double, double> standardized_max_on_range(ModelFamily family,
                                                           const std::vector<double>& theta0,
                                                           double max_dose) {
  validate_nonlinear_params(family, theta0);
  switch (family) {
    case ModelFamily::Linear:
    case ModelFamily::Emax:
    case ModelFamily::SigEmax:
    case ModelFamily::Exponential:
      return {eval_standardized(family, theta0, max_dose), max_dose};
    case ModelFamily::Quadratic: {
      const double delta = theta0[0];
      if (delta < 0.0) {
        const double vertex = -1.0 / (2.0 * delta);
        if (vertex < max_dose) return {vertex + delta * vertex * vertex, vertex};
      }
      return {eval_standardized(family, theta0, max_dose), max_dose};
    }
  }
  throw validation_error("standardized_max_on_range: unknown family");
}

// Solve for nonlinear parameters from an anchor (dose d, fraction p of the
// maximum effect). The Emax ED50 has the closed form d(1-p)/p against its
// asymptotic maximum; the other families are solved against the maximum
// over the dose range by bracketed root finding. For the quadratic, p = 1
// places the vertex at the anchor dose.
inline std::vector<double> guesstimate_from_anchor(ModelFamily family, double anchor_dose,
                                                   double anchor_fraction,
                                                   const DoseDesign& design) {
  const double xk = design.max_dose();
  if (!(anchor_dose > 0.0) || !(anchor_dose <= xk))
    throw validation_error("guesstimate_from_anchor: anchor dose outside (0, max dose]");
  const bool peak_anchor = (anchor_fraction == 1.0 && family == ModelFamily::Quadratic);
  if (!peak_anchor && !(anchor_fraction > 0.0 && anchor_fraction < 1.0))
    throw validation_error("guesstimate_from_anchor: fraction must lie in (0, 1)");

  switch (family) {
    case ModelFamily::Linear:
      return {};
    case ModelFamily::Emax:
      return {anchor_dose * (1.0 - anchor_fraction) / anchor_fraction};
    case ModelFamily::Exponential: {
      // fraction(delta) = (e^{d/delta}-1)/(e^{xk/delta}-1) increases from 0
      // to d/xk as delta grows, so a solution needs p < d/xk.
      if (!(anchor_fraction < anchor_dose / xk))
        throw numeric_error("guesstimate_from_anchor: anchor inconsistent with convex exponential shape");
      auto frac = [&](double delta) {
        return std::expm1(anchor_dose / delta) / std::expm1(xk / delta) - anchor_fraction;
      };
      double lo = 1e-3 * xk, hi = 1e4 * xk;
      while (frac(lo) > 0.0 && lo > 1e-12 * xk) lo *= 0.5;
      if (frac(lo) * frac(hi) > 0.0)
        throw numeric_error("guesstimate_from_anchor: no exponential solution in range");
      return {brent_root(frac, lo, hi, 1e-12)};
    }
    case ModelFamily::Quadratic: {
      if (peak_anchor) return {-1.0 / (2.0 * anchor_dose)};
      // anchored on the rising branch: fraction(s) with delta = -s increases
      // from d/xk at s=0 to 1 when the vertex reaches the anchor dose.
      if (!(anchor_fraction > anchor_dose / xk))
        throw numeric_error("guesstimate_from_anchor: anchor below the linear fraction; no unimodal solution");
      auto frac = [&](double s) {
        const std::vector<double> th{-s};
        const double m = standardized_max_on_range(ModelFamily::Quadratic, th, xk).first;
        return eval_standardized(ModelFamily::Quadratic, th, anchor_dose) / m - anchor_fraction;
      };
      const double s_hi = 1.0 / (2.0 * anchor_dose);
      return {-brent_root(frac, 1e-14, s_hi, 1e-14)};
    }
    case ModelFamily::SigEmax:
      throw validation_error(
          "guesstimate_from_anchor: a single anchor underdetermines sigEmax; supply (ED50, h)");
  }
  throw validation_error("guesstimate_from_anchor: unknown family");
}

// Choose (theta0, theta1) so that f(0) equals the placebo effect and the
// extremum of f(x) - f(0) over the dose range equals max_effect.
inline FullParams scale_to_effects(const CandidateModel& model, double placebo_effect,
                                   double max_effect, const DoseDesign& design) {
  if (max_effect == 0.0) throw validation_error("scale_to_effects: max_effect must be nonzero");
  const double m = standardized_max_on_range(model.family, model.guesstimates, design.max_dose()).first;
  if (std::abs(m) < 1e-14)
    throw numeric_error("scale_to_effects: standardized shape is degenerate over the design");
  Vector theta(2 + static_cast<Eigen::Index>(model.guesstimates.size()));
  theta[0] = placebo_effect;
  theta[1] = max_effect / m;
  for (std::size_t i = 0; i < model.guesstimates.size(); ++i)
    theta[2 + static_cast<Eigen::Index>(i)] = model.guesstimates[i];
  return FullParams(model.family, theta);
}

// Conversions between the standardized quadratic (theta0, theta1, delta)
// and the polynomial form (beta0, beta1, beta2) = (theta0, theta1, theta1*delta).
inline Vector quadratic_beta_from_full(const FullParams& p) {
  if (p.family != ModelFamily::Quadratic)
    throw validation_error("quadratic_beta_from_full: not a quadratic model");
  Vector beta(3);
  beta << p.intercept(), p.scale(), p.scale() * p.nonlinear()[0];
  return beta;
}

inline FullParams quadratic_full_from_beta(const Vector& beta) {
  if (beta.size() != 3) throw validation_error("quadratic_full_from_beta: need 3 coefficients");
  if (beta[1] == 0.0) throw numeric_error("quadratic_full_from_beta: zero linear coefficient; delta undefined");
  Vector theta(3);
  theta << beta[0], beta[1], beta[2] / beta[1];
  return FullParams(ModelFamily::Quadratic, theta);
}

}  // namespace dosekit
