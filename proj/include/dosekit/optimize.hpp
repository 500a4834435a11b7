#pragma once

// Small deterministic optimizers: Brent root bracketing, golden-section
// minimization and a box-clamped Nelder-Mead. These are the only numeric
// search routines used by the fitting and critical-value code.

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace dosekit {

// Brent's method on [a, b]; requires f(a) and f(b) of opposite sign.
inline double brent_root(const std::function<double(double)>& f, double a, double b,
                         double xtol = 1e-10, int max_iter = 200) {
  double fa = f(a), fb = f(b);
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  if (fa * fb > 0.0) throw std::invalid_argument("brent_root: root not bracketed");
  double c = a, fc = fa, d = b - a, e = d;
  for (int it = 0; it < max_iter; ++it) {
    if (std::abs(fc) < std::abs(fb)) {
      a = b; b = c; c = a;
      fa = fb; fb = fc; fc = fa;
    }
    const double tol = 2.0 * std::numeric_limits<double>::epsilon() * std::abs(b) + 0.5 * xtol;
    const double m = 0.5 * (c - b);
    if (std::abs(m) <= tol || fb == 0.0) return b;
    if (std::abs(e) < tol || std::abs(fa) <= std::abs(fb)) {
      d = m; e = m;
    } else {
      double p, q, r;
      double s = fb / fa;
      if (a == c) {
        p = 2.0 * m * s;
        q = 1.0 - s;
      } else {
        q = fa / fc;
        r = fb / fc;
        p = s * (2.0 * m * q * (q - r) - (b - a) * (r - 1.0));
        q = (q - 1.0) * (r - 1.0) * (s - 1.0);
      }
      if (p > 0.0) q = -q; else p = -p;
      if (2.0 * p < std::min(3.0 * m * q - std::abs(tol * q), std::abs(e * q))) {
        e = d; d = p / q;
      } else {
        d = m; e = m;
      }
    }
    a = b; fa = fb;
    b += (std::abs(d) > tol) ? d : (m > 0 ? tol : -tol);
    fb = f(b);
    if ((fb > 0.0) == (fc > 0.0)) { c = a; fc = fa; d = b - a; e = d; }
  }
  return b;
}

// Expands outward from an initial guess until a sign change is found, then
// calls brent_root. Used by anchor solving where brackets are not known.
inline double find_root_expanding(const std::function<double(double)>& f, double lo, double hi,
                                  double xtol = 1e-12) {
  double flo = f(lo), fhi = f(hi);
  if (flo * fhi > 0.0) throw std::runtime_error("find_root_expanding: no sign change in range");
  return brent_root(f, lo, hi, xtol);
}

inline double golden_section_min(const std::function<double(double)>& f, double a, double b,
                                 double rel_tol = 1e-7, int max_iter = 200) {
  const double gr = 0.6180339887498949;
  double x1 = b - gr * (b - a);
  double x2 = a + gr * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < max_iter && (b - a) > rel_tol * (std::abs(a) + std::abs(b) + 1e-12); ++it) {
    if (f1 < f2) {
      b = x2; x2 = x1; f2 = f1;
      x1 = b - gr * (b - a); f1 = f(x1);
    } else {
      a = x1; x1 = x2; f1 = f2;
      x2 = a + gr * (b - a); f2 = f(x2);
    }
  }
  return f1 < f2 ? x1 : x2;
}

// Nelder-Mead with evaluation points clamped to [lo, hi] per coordinate.
inline std::vector<double> nelder_mead_min(
    const std::function<double(const std::vector<double>&)>& f, std::vector<double> start,
    const std::vector<double>& lo, const std::vector<double>& hi, double tol = 1e-9,
    int max_iter = 2000) {
  const std::size_t n = start.size();
  auto clamp = [&](std::vector<double> x) {
    for (std::size_t i = 0; i < n; ++i) x[i] = std::clamp(x[i], lo[i], hi[i]);
    return x;
  };
  std::vector<std::vector<double>> simplex(n + 1);
  std::vector<double> fvals(n + 1);
  simplex[0] = clamp(start);
  for (std::size_t i = 0; i < n; ++i) {
    auto p = simplex[0];
    const double step = 0.05 * (hi[i] - lo[i]);
    p[i] = (p[i] + step <= hi[i]) ? p[i] + step : p[i] - step;
    simplex[i + 1] = clamp(p);
  }
  for (std::size_t i = 0; i <= n; ++i) fvals[i] = f(simplex[i]);

  for (int it = 0; it < max_iter; ++it) {
    // order ascending by value
    std::vector<std::size_t> idx(n + 1);
    for (std::size_t i = 0; i <= n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return fvals[a] < fvals[b]; });
    std::vector<std::vector<double>> s2(n + 1);
    std::vector<double> f2(n + 1);
    for (std::size_t i = 0; i <= n; ++i) { s2[i] = simplex[idx[i]]; f2[i] = fvals[idx[i]]; }
    simplex.swap(s2); fvals.swap(f2);

    double spread = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      spread = std::max(spread, std::abs(simplex[n][i] - simplex[0][i]) /
                                    (std::abs(simplex[0][i]) + 1e-12));
    if (spread < tol && std::abs(fvals[n] - fvals[0]) < tol * (std::abs(fvals[0]) + 1e-300)) break;

    std::vector<double> centroid(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) centroid[j] += simplex[i][j];
    }
    for (double& c : centroid) c /= static_cast<double>(n);

    auto blend = [&](double coef) {
      std::vector<double> p(n);
      for (std::size_t j = 0; j < n; ++j) p[j] = centroid[j] + coef * (centroid[j] - simplex[n][j]);
      return clamp(p);
    };
    auto xr = blend(1.0);
    const double fr = f(xr);
    if (fr < fvals[0]) {
      auto xe = blend(2.0);
      const double fe = f(xe);
      if (fe < fr) { simplex[n] = xe; fvals[n] = fe; }
      else { simplex[n] = xr; fvals[n] = fr; }
    } else if (fr < fvals[n - 1]) {
      simplex[n] = xr; fvals[n] = fr;
    } else {
      auto xc = blend(fr < fvals[n] ? 0.5 : -0.5);
      const double fc = f(xc);
      if (fc < std::min(fr, fvals[n])) {
        simplex[n] = xc; fvals[n] = fc;
      } else {
        for (std::size_t i = 1; i <= n; ++i) {
          for (std::size_t j = 0; j < n; ++j)
            simplex[i][j] = simplex[0][j] + 0.5 * (simplex[i][j] - simplex[0][j]);
          simplex[i] = clamp(simplex[i]);
          fvals[i] = f(simplex[i]);
        }
      }
    }
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i <= n; ++i)
    if (fvals[i] < fvals[best]) best = i;
  return simplex[best];
}

}  // namespace dosekit
