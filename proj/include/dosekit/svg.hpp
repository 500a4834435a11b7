#pragma once

// Standalone SVG emission for the three plot artifacts: candidate-shape
// panels, fitted dose-response curves with pointwise intervals, and
// coverage/RMSE line charts from simulation reports. Output is plain
// deterministic text: two renders of the same artifact are byte-identical.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "dosekit/contrasts.hpp"
#include "dosekit/gls.hpp"
#include "dosekit/models.hpp"
#include "dosekit/simulate.hpp"
#include "dosekit/types.hpp"

namespace dosekit {

namespace svg_detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

struct Frame {
  double x0, y0, w, h;        // pixel rect
  double xmin, xmax, ymin, ymax;
  double px(double x) const { return x0 + (x - xmin) / (xmax - xmin) * w; }
  double py(double y) const { return y0 + h - (y - ymin) / (ymax - ymin) * h; }
};

inline void expand_range(double& lo, double& hi) {
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.06 * (hi - lo);
  lo -= pad;
  hi += pad;
}

inline std::string axes(const Frame& f, const std::string& title) {
  std::string s;
  s += "<rect x=\"" + num(f.x0) + "\" y=\"" + num(f.y0) + "\" width=\"" + num(f.w) +
       "\" height=\"" + num(f.h) + "\" fill=\"white\" stroke=\"#444444\" stroke-width=\"1\"/>\n";
  if (!title.empty())
    s += "<text x=\"" + num(f.x0 + f.w / 2) + "\" y=\"" + num(f.y0 - 6) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" + title +
         "</text>\n";
  return s;
}

inline std::string polyline(const Frame& f, const std::vector<double>& xs,
                            const std::vector<double>& ys, const std::string& color,
                            double width = 1.5, const std::string& dash = "") {
  std::string s = "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"" +
                  num(width) + "\"";
  if (!dash.empty()) s += " stroke-dasharray=\"" + dash + "\"";
  s += " points=\"";
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) s += " ";
    s += num(f.px(xs[i])) + "," + num(f.py(ys[i]));
  }
  s += "\"/>\n";
  return s;
}

inline std::string band(const Frame& f, const std::vector<double>& xs,
                        const std::vector<double>& lo, const std::vector<double>& hi,
                        const std::string& color) {
  std::string s = "<path fill=\"" + color + "\" fill-opacity=\"0.25\" stroke=\"none\" d=\"M";
  for (std::size_t i = 0; i < xs.size(); ++i)
    s += (i ? " L" : "") + num(f.px(xs[i])) + "," + num(f.py(hi[i]));
  for (std::size_t i = xs.size(); i-- > 0;)
    s += " L" + num(f.px(xs[i])) + "," + num(f.py(lo[i]));
  s += " Z\"/>\n";
  return s;
}

inline std::string document(double width, double height, const std::string& body) {
  std::string s = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" +
       num(height) + "\" viewBox=\"0 0 " + num(width) + " " + num(height) + "\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += body;
  s += "</svg>\n";
  return s;
}

}  // namespace svg_detail

// One panel per candidate shape (standardized scale).
inline std::string render_candidate_shapes_svg(const std::vector<CandidateModel>& models,
                                               const DoseDesign& design) {
  if (models.empty()) throw validation_error("render_candidate_shapes_svg: no models");
  using namespace svg_detail;
  const int cols = std::min<int>(2, static_cast<int>(models.size()));
  const int rows = (static_cast<int>(models.size()) + cols - 1) / cols;
  const double pw = 280, ph = 190, margin = 42;
  const double width = cols * (pw + margin) + margin;
  const double height = rows * (ph + margin) + margin;
  const auto labels = model_labels(models);
  std::string body;
  const int n_curve = 120;
  for (std::size_t m = 0; m < models.size(); ++m) {
    const int r = static_cast<int>(m) / cols, c = static_cast<int>(m) % cols;
    std::vector<double> xs, ys;
    double ylo = 0.0, yhi = 0.0;
    for (int i = 0; i <= n_curve; ++i) {
      const double x = design.max_dose() * i / static_cast<double>(n_curve);
      const double y = eval_standardized(models[m].family, models[m].guesstimates, x);
      xs.push_back(x);
      ys.push_back(y);
      ylo = std::min(ylo, y);
      yhi = std::max(yhi, y);
    }
    expand_range(ylo, yhi);
    Frame f{margin + c * (pw + margin), margin + r * (ph + margin), pw, ph,
            0.0, design.max_dose(), ylo, yhi};
    body += axes(f, labels[m]);
    body += polyline(f, xs, ys, "#1f6fb4", 2.0);
  }
  return document(width, height, body);
}

// Fitted curve with pointwise confidence band plus the first-stage
// estimates and their intervals.
inline std::string render_fit_svg(const FittedModel& fit, const AnovaEstimate& est,
                                  double level = 0.90) {
  using namespace svg_detail;
  const double width = 560, height = 400, margin = 56;
  const int n_curve = 160;
  Vector grid(n_curve + 1);
  for (int i = 0; i <= n_curve; ++i)
    grid[i] = est.design.max_dose() * i / static_cast<double>(n_curve);

  std::vector<double> xs, fitted, lo, hi;
  bool have_band = fit.theta_cov.size() > 0;
  if (have_band) {
    const PredictionBand b = predict_with_ci(fit, grid, level);
    for (int i = 0; i <= n_curve; ++i) {
      xs.push_back(b.doses[i]);
      fitted.push_back(b.fitted[i]);
      lo.push_back(b.lower[i]);
      hi.push_back(b.upper[i]);
    }
  } else {
    for (int i = 0; i <= n_curve; ++i) {
      xs.push_back(grid[i]);
      fitted.push_back(fit.predict(grid[i]));
    }
  }

  const double z = norm_quantile(0.5 + level / 2.0);
  std::vector<double> est_lo(est.n_doses()), est_hi(est.n_doses());
  double ymin = fitted.front(), ymax = fitted.front();
  for (double v : fitted) { ymin = std::min(ymin, v); ymax = std::max(ymax, v); }
  if (have_band)
    for (std::size_t i = 0; i < xs.size(); ++i) {
      ymin = std::min(ymin, lo[i]);
      ymax = std::max(ymax, hi[i]);
    }
  for (std::size_t i = 0; i < est.n_doses(); ++i) {
    const double se = std::sqrt(est.S(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)));
    est_lo[i] = est.mu_hat[static_cast<Eigen::Index>(i)] - z * se;
    est_hi[i] = est.mu_hat[static_cast<Eigen::Index>(i)] + z * se;
    ymin = std::min(ymin, est_lo[i]);
    ymax = std::max(ymax, est_hi[i]);
  }
  expand_range(ymin, ymax);

  Frame f{margin, margin, width - 2 * margin, height - 2 * margin,
          0.0, est.design.max_dose(), ymin, ymax};
  std::string body = axes(f, std::string(family_name(fit.family)) + " fit");
  if (have_band) body += band(f, xs, lo, hi, "#1f6fb4");
  body += polyline(f, xs, fitted, "#1f6fb4", 2.0);
  for (std::size_t i = 0; i < est.n_doses(); ++i) {
    const double px = f.px(est.design[i]);
    body += "<line x1=\"" + num(px) + "\" y1=\"" + num(f.py(est_lo[i])) + "\" x2=\"" + num(px) +
            "\" y2=\"" + num(f.py(est_hi[i])) + "\" stroke=\"#cc3311\" stroke-width=\"1.2\"/>\n";
    body += "<circle cx=\"" + num(px) + "\" cy=\"" +
            num(f.py(est.mu_hat[static_cast<Eigen::Index>(i)])) +
            "\" r=\"3.5\" fill=\"#cc3311\"/>\n";
  }
  return document(width, height, body);
}

// Coverage and RMSE against per-arm sample size, one polyline per method.
inline std::string render_sim_report_svg(const SimReport& report) {
  if (report.cells.empty()) throw validation_error("render_sim_report_svg: empty report");
  using namespace svg_detail;
  const double width = 640, height = 330, margin = 52;
  std::vector<double> ns, cov_g, cov_b, rmse;
  for (const auto& c : report.cells) {
    ns.push_back(static_cast<double>(c.n_per_arm));
    cov_g.push_back(c.gls.mean);
    cov_b.push_back(c.gls_b.intervals > 0 ? c.gls_b.mean : 0.0);
    rmse.push_back(c.rmse_mean);
  }
  const bool have_b = std::any_of(report.cells.begin(), report.cells.end(),
                                  [](const ScenarioCell& c) { return c.gls_b.intervals > 0; });
  double nlo = ns.front(), nhi = ns.back();
  if (nhi <= nlo) { nlo -= 1.0; nhi += 1.0; }
  Frame fc{margin, margin, width / 2 - 1.5 * margin, height - 2 * margin, nlo, nhi, 0.0, 1.0};
  std::string body = axes(fc, "coverage (" + report.cells.front().scenario + ")");
  const double nominal = report.cells.front().ci_level;
  body += polyline(fc, {nlo, nhi}, {nominal, nominal}, "#999999", 1.0, "4,3");
  body += polyline(fc, ns, cov_g, "#1f6fb4", 2.0);
  if (have_b) body += polyline(fc, ns, cov_b, "#cc3311", 2.0);

  double rlo = 0.0, rhi = *std::max_element(rmse.begin(), rmse.end());
  expand_range(rlo, rhi);
  Frame fr{width / 2 + 0.5 * margin, margin, width / 2 - 1.5 * margin, height - 2 * margin,
           nlo, nhi, 0.0, rhi};
  body += axes(fr, "rmse");
  body += polyline(fr, ns, rmse, "#1f6fb4", 2.0);
  return document(width, height, body);
}

}  // namespace dosekit
