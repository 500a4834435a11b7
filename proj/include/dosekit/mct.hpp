#pragma once

// The MCP step: optimal-contrast z statistics for each candidate shape, the
// maximum statistic, its multiplicity-adjusted critical value and p-values,
// and the reference set of significant models.

#include <algorithm>
#include <numeric>
#include <vector>

#include "dosekit/contrasts.hpp"
#include "dosekit/mvnorm.hpp"
#include "dosekit/types.hpp"

namespace dosekit {

enum class ContrastSource { Observed, Planned };

struct MctResult {
  ContrastMatrix contrasts;
  Vector z;
  double z_max = 0.0;
  double critical = 0.0;
  Vector adjusted_p;
  std::vector<bool> significant;
  double alpha = 0.0;
};

// Guesstimates fixed at design stage are never re-estimated here; only the
// covariance feeding the contrasts may be refreshed from the observed data.
inline MctResult mct_test(const AnovaEstimate& est, const std::vector<CandidateModel>& models,
                          double alpha = 0.025,
                          ContrastSource source = ContrastSource::Observed,
                          const Matrix* planned_S = nullptr, const QmcConfig& cfg = {}) {
  if (models.empty()) throw validation_error("mct_test: no candidate models");
  if (!(alpha > 0.0 && alpha < 0.5)) throw validation_error("mct_test: alpha must lie in (0, 0.5)");

  const Matrix* contrast_cov = &est.S;
  if (source == ContrastSource::Planned) {
    if (planned_S == nullptr)
      throw validation_error("mct_test: planned contrast source requires a planned covariance");
    if (planned_S->rows() != est.S.rows())
      throw validation_error("mct_test: planned covariance dimension mismatch");
    contrast_cov = planned_S;
  }

  MctResult out;
  out.alpha = alpha;
  out.contrasts = contrast_matrix(models, est.design, *contrast_cov, est.plac_adj);

  const Matrix& c = out.contrasts.columns;
  const Matrix cov_z = c.transpose() * est.S * c;  // observed covariance in the denominator
  const Eigen::Index m = c.cols();
  out.z.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double denom = std::sqrt(cov_z(i, i));
    if (!(denom > 0.0)) throw numeric_error("mct_test: degenerate contrast variance");
    out.z[i] = c.col(i).dot(est.mu_hat) / denom;
  }
  out.z_max = out.z.maxCoeff();

  const Matrix r = corr_from_cov(cov_z);
  out.critical = critical_value(r, alpha, cfg);
  out.adjusted_p = adjusted_pvalues(out.z, r, cfg);
  out.significant.resize(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i)
    out.significant[static_cast<std::size_t>(i)] = out.z[i] > out.critical;
  return out;
}

// Significant models ordered by descending z; ties keep input order.
// An empty result is meaningful: no dose-response signal, stop.
inline std::vector<CandidateModel> reference_set(const MctResult& result,
                                                 const std::vector<CandidateModel>& models) {
  if (static_cast<std::size_t>(result.z.size()) != models.size())
    throw validation_error("reference_set: result/models size mismatch");
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < models.size(); ++i)
    if (result.significant[i]) idx.push_back(i);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return result.z[static_cast<Eigen::Index>(a)] > result.z[static_cast<Eigen::Index>(b)];
  });
  std::vector<CandidateModel> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(models[i]);
  return out;
}

inline std::vector<std::size_t> reference_set_indices(const MctResult& result) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < result.significant.size(); ++i)
    if (result.significant[i]) idx.push_back(i);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return result.z[static_cast<Eigen::Index>(a)] > result.z[static_cast<Eigen::Index>(b)];
  });
  return idx;
}

}  // namespace dosekit
