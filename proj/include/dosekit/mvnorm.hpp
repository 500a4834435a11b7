#pragma once

// Multivariate normal rectangle probabilities P(Z <= b), equicoordinate
// critical values and multiplicity-adjusted p-values.
//
// The probability integral uses the separation-of-variables reduction of
// Genz (1992): after a Cholesky factorization with greedy variable
// reordering the integral becomes a product of conditional univariate
// probabilities over the unit cube, which is evaluated with a randomly
// shifted Richtmyer lattice. The reported error is the standard error
// across the random shifts.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "dosekit/optimize.hpp"
#include "dosekit/rng.hpp"
#include "dosekit/stats.hpp"
#include "dosekit/types.hpp"

namespace dosekit {

struct QmcConfig {
  int points = 8192;
  int shifts = 12;
  std::uint64_t seed = 1;
  double target_abs_error = 1e-5;

  void validate() const {
    if (points < 64) throw validation_error("QmcConfig: need at least 64 points per shift");
    if (shifts < 8) throw validation_error("QmcConfig: need at least 8 randomized shifts");
    if (!(target_abs_error > 0.0)) throw validation_error("QmcConfig: target error must be > 0");
  }
};

struct MvnResult {
  double prob = 0.0;
  double error = 0.0;            // standard error over shifts
  bool accuracy_reached = true;  // error <= target; a warning flag, not a failure
};

inline Matrix corr_from_cov(const Matrix& v) {
  if (v.rows() != v.cols()) throw validation_error("corr_from_cov: matrix not square");
  const Eigen::Index m = v.rows();
  Vector d(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!(v(i, i) > 0.0)) throw validation_error("corr_from_cov: nonpositive diagonal entry");
    d[i] = std::sqrt(v(i, i));
  }
  Matrix r(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) r(i, j) = v(i, j) / (d[i] * d[j]);
  return r;
}

namespace detail {

inline void validate_correlation(const Matrix& r) {
  if (r.rows() != r.cols()) throw validation_error("correlation matrix not square");
  for (Eigen::Index i = 0; i < r.rows(); ++i) {
    if (std::abs(r(i, i) - 1.0) > 1e-8)
      throw validation_error("correlation matrix must have unit diagonal");
    for (Eigen::Index j = 0; j < i; ++j)
      if (std::abs(r(i, j) - r(j, i)) > 1e-8)
        throw validation_error("correlation matrix not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(r);
  if (es.eigenvalues().minCoeff() < -1e-10)
    throw validation_error("correlation matrix not positive semidefinite");
}

// Remove coordinates that are perfectly correlated with an earlier one,
// keeping the smaller upper limit (the joint event collapses to it).
inline void dedup_perfect_correlation(Vector& upper, Matrix& r) {
  const Eigen::Index m = r.rows();
  std::vector<Eigen::Index> keep;
  std::vector<char> dropped(static_cast<std::size_t>(m), 0);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (dropped[static_cast<std::size_t>(i)]) continue;
    for (Eigen::Index j = i + 1; j < m; ++j) {
      if (!dropped[static_cast<std::size_t>(j)] && r(i, j) >= 1.0 - 1e-12) {
        upper[i] = std::min(upper[i], upper[j]);
        dropped[static_cast<std::size_t>(j)] = 1;
      }
    }
    keep.push_back(i);
  }
  if (keep.size() == static_cast<std::size_t>(m)) return;
  const Eigen::Index k = static_cast<Eigen::Index>(keep.size());
  Vector u2(k);
  Matrix r2(k, k);
  for (Eigen::Index a = 0; a < k; ++a) {
    u2[a] = upper[keep[static_cast<std::size_t>(a)]];
    for (Eigen::Index b = 0; b < k; ++b)
      r2(a, b) = r(keep[static_cast<std::size_t>(a)], keep[static_cast<std::size_t>(b)]);
  }
  upper.swap(u2);
  r.swap(r2);
}

// Cholesky with greedy reordering: at each step pick the remaining variable
// with the smallest conditional probability, using truncated-normal expected
// values for the conditioning (Gibson/Glasbey/Elston ordering). Handles
// semidefinite matrices by zeroing exhausted pivots.
struct OrderedChol {
  Matrix l;
  Vector b;
};

inline OrderedChol ordered_cholesky(Matrix r, Vector b) {
  const Eigen::Index m = r.rows();
  Matrix l = Matrix::Zero(m, m);
  Vector y = Vector::Zero(m);
  const double eps = 1e-12;
  for (Eigen::Index i = 0; i < m; ++i) {
    Eigen::Index best = i;
    double best_p = 2.0;
    for (Eigen::Index j = i; j < m; ++j) {
      double s = 0.0, v = r(j, j);
      for (Eigen::Index k = 0; k < i; ++k) {
        s += l(j, k) * y[k];
        v -= l(j, k) * l(j, k);
      }
      const double denom = std::sqrt(std::max(v, eps));
      const double p = norm_cdf((b[j] - s) / denom);
      if (p < best_p) {
        best_p = p;
        best = j;
      }
    }
    if (best != i) {
      std::swap(b[i], b[best]);
      r.row(i).swap(r.row(best));
      r.col(i).swap(r.col(best));
      l.row(i).swap(l.row(best));
    }
    double v = r(i, i);
    double s = 0.0;
    for (Eigen::Index k = 0; k < i; ++k) {
      v -= l(i, k) * l(i, k);
      s += l(i, k) * y[k];
    }
    if (v > eps) {
      l(i, i) = std::sqrt(v);
      for (Eigen::Index j = i + 1; j < m; ++j) {
        double c = r(j, i);
        for (Eigen::Index k = 0; k < i; ++k) c -= l(j, k) * l(i, k);
        l(j, i) = c / l(i, i);
      }
      const double t = (b[i] - s) / l(i, i);
      const double cdf = std::max(norm_cdf(t), 1e-300);
      y[i] = -norm_pdf(t) / cdf;  // E[Z | Z <= t]
    } else {
      l(i, i) = 0.0;  // degenerate direction; limit becomes deterministic
      y[i] = 0.0;
    }
  }
  return {l, b};
}

inline const double* richtmyer_generators() {
  // frac(sqrt(p)) for the first 32 primes
  static const double q[32] = {
      0.41421356237309515, 0.7320508075688772,  0.23606797749978969, 0.6457513110645907,
      0.3166247903553998,  0.6055512754639891,  0.12310562561766059, 0.358898943540674,
      0.7958315233127191,  0.38516480713450374, 0.5677643628300215,  0.08276253029821934,
      0.4031242374328485,  0.5574385243020004,  0.8556546004010439,  0.28010988928051805,
      0.681145747868608,   0.810249675906654,   0.18535277187245039, 0.426149773176359,
      0.54400374531753,    0.8881944173155887,  0.1104335791443274,  0.433981132056603,
      0.8488578017961039,  0.04987562112089027, 0.14889156509221993, 0.3440804327886599,
      0.44030650891055036, 0.6301458127346494,  0.26942766958464404, 0.44552314225959755};
  return q;
}

}  // namespace detail

inline MvnResult mvn_rect(Vector upper, Matrix correlation, const QmcConfig& cfg = {}) {
  cfg.validate();
  detail::validate_correlation(correlation);
  if (upper.size() != correlation.rows())
    throw validation_error("mvn_rect: limits do not match correlation dimension");
  for (Eigen::Index i = 0; i < upper.size(); ++i)
    if (std::isnan(upper[i])) throw validation_error("mvn_rect: NaN upper limit");

  detail::dedup_perfect_correlation(upper, correlation);
  const Eigen::Index m = correlation.rows();
  if (m > 32) throw validation_error("mvn_rect: dimensions above 32 unsupported");

  if (m == 1) return {norm_cdf(upper[0]), 0.0, true};
  for (Eigen::Index i = 0; i < m; ++i) {
    if (upper[i] == -std::numeric_limits<double>::infinity()) return {0.0, 0.0, true};
  }

  const auto oc = detail::ordered_cholesky(correlation, upper);
  const Matrix& l = oc.l;
  const Vector& b = oc.b;
  const double* q = detail::richtmyer_generators();

  const int npts = cfg.points;
  const int nshift = cfg.shifts;
  const double e1 = (l(0, 0) > 0.0) ? norm_cdf(b[0] / l(0, 0)) : (b[0] >= 0.0 ? 1.0 : 0.0);
  if (e1 <= 0.0) return {0.0, 0.0, true};

  std::vector<double> shift_means(static_cast<std::size_t>(nshift), 0.0);
  std::vector<double> y(static_cast<std::size_t>(m), 0.0);
  std::vector<double> delta(static_cast<std::size_t>(m - 1), 0.0);
  const double tiny = 1e-15;

  for (int s = 0; s < nshift; ++s) {
    Rng rng(cfg.seed, static_cast<std::uint64_t>(s) + 0x51AB1EULL);
    for (Eigen::Index k = 0; k < m - 1; ++k) delta[static_cast<std::size_t>(k)] = rng.uniform();
    double acc = 0.0;
    for (int j = 1; j <= npts; ++j) {
      double f = e1;
      {
        double w0 = std::fmod(static_cast<double>(j) * q[0] + delta[0], 1.0);
        w0 = std::abs(2.0 * w0 - 1.0);
        const double u = std::clamp(w0 * e1, tiny, 1.0 - tiny);
        y[0] = norm_quantile(u);
      }
      for (Eigen::Index i = 1; i < m; ++i) {
        double t = b[i];
        for (Eigen::Index k = 0; k < i; ++k) t -= l(i, k) * y[static_cast<std::size_t>(k)];
        double e;
        if (l(i, i) > 0.0) {
          e = norm_cdf(t / l(i, i));
        } else {
          e = (t >= 0.0) ? 1.0 : 0.0;
        }
        f *= e;
        if (i < m - 1) {
          double w = std::fmod(static_cast<double>(j) * q[i] + delta[static_cast<std::size_t>(i)], 1.0);
          w = std::abs(2.0 * w - 1.0);
          const double u = std::clamp(w * e, tiny, 1.0 - tiny);
          y[static_cast<std::size_t>(i)] = norm_quantile(u);
        }
      }
      acc += (f - acc) / static_cast<double>(j);
    }
    shift_means[static_cast<std::size_t>(s)] = acc;
  }

  double p = 0.0;
  for (double v : shift_means) p += v;
  p /= static_cast<double>(nshift);
  double var = 0.0;
  for (double v : shift_means) var += (v - p) * (v - p);
  var /= static_cast<double>(nshift) * static_cast<double>(nshift - 1);
  const double se = std::sqrt(var);
  return {std::clamp(p, 0.0, 1.0), se, se <= cfg.target_abs_error};
}

// Equicoordinate one-sided critical value: q with P(Z <= q 1) = 1 - alpha.
// Bracketed between the unadjusted and Bonferroni quantiles.
inline double critical_value(const Matrix& correlation, double alpha, const QmcConfig& cfg = {}) {
  if (!(alpha > 0.0 && alpha < 0.5))
    throw validation_error("critical_value: alpha must lie in (0, 0.5)");
  detail::validate_correlation(correlation);
  const Eigen::Index m = correlation.rows();
  if (m == 1) return norm_quantile(1.0 - alpha);
  auto g = [&](double qv) {
    return mvn_rect(Vector::Constant(m, qv), correlation, cfg).prob - (1.0 - alpha);
  };
  double lo = norm_quantile(1.0 - alpha) - 1e-3;
  double hi = norm_quantile(1.0 - alpha / static_cast<double>(m)) + 1e-3;
  while (g(lo) > 0.0) lo -= 0.25;
  while (g(hi) < 0.0) hi += 0.25;
  return brent_root(g, lo, hi, 1e-4);
}

// p_m = 1 - P(Z <= z_m 1) under N(0, R), clipped to [0, 1].
inline Vector adjusted_pvalues(const Vector& z, const Matrix& correlation,
                               const QmcConfig& cfg = {}) {
  detail::validate_correlation(correlation);
  if (z.size() != correlation.rows())
    throw validation_error("adjusted_pvalues: dimension mismatch");
  const Eigen::Index m = correlation.rows();
  Vector p(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    if (std::isnan(z[i])) throw validation_error("adjusted_pvalues: NaN statistic");
    if (z[i] == std::numeric_limits<double>::infinity()) { p[i] = 0.0; continue; }
    if (z[i] == -std::numeric_limits<double>::infinity()) { p[i] = 1.0; continue; }
    const double pr = mvn_rect(Vector::Constant(m, z[i]), correlation, cfg).prob;
    p[i] = std::clamp(1.0 - pr, 0.0, 1.0);
  }
  return p;
}

}  // namespace dosekit
