#pragma once

// Optimal contrasts for trend tests against a flat dose-response profile:
//   c = const * S^{-1} (mu0 - (mu0' S^{-1} 1 / 1' S^{-1} 1) 1)
// normalized to unit length with sign fixed so c'mu0 > 0. The
// placebo-adjusted variant drops the zero-sum constraint: d = SC^{-1} muC.

#include <Eigen/Cholesky>
#include <string>
#include <vector>

#include "dosekit/models.hpp"
#include "dosekit/types.hpp"

namespace dosekit {

namespace detail {
inline Eigen::LLT<Matrix> spd_factor(const Matrix& s, const char* what) {
  if (s.rows() != s.cols()) throw validation_error(std::string(what) + ": matrix not square");
  for (Eigen::Index i = 0; i < s.rows(); ++i)
    for (Eigen::Index j = 0; j < i; ++j)
      if (std::abs(s(i, j) - s(j, i)) > 1e-8 * (1.0 + std::abs(s(i, j))))
        throw validation_error(std::string(what) + ": matrix not symmetric");
  Eigen::LLT<Matrix> llt(s);
  if (llt.info() != Eigen::Success)
    throw numeric_error(std::string(what) + ": covariance matrix is singular or indefinite");
  return llt;
}

inline void check_not_constant(const Vector& mu0) {
  const double range = mu0.maxCoeff() - mu0.minCoeff();
  if (range <= 1e-12 * (1.0 + mu0.norm()))
    throw numeric_error("optimal contrast undefined for a constant shape");
}
}  // namespace detail

inline Vector optimal_contrast(const Vector& mu0, const Matrix& S) {
  if (mu0.size() != S.rows()) throw validation_error("optimal_contrast: dimension mismatch");
  detail::check_not_constant(mu0);
  const auto llt = detail::spd_factor(S, "optimal_contrast");
  const Vector a = llt.solve(mu0);
  const Vector b = llt.solve(Vector::Ones(mu0.size()));
  Vector c = a - (mu0.dot(b) / b.sum()) * b;
  const double norm = c.norm();
  if (!(norm > 0.0)) throw numeric_error("optimal_contrast: degenerate contrast");
  c /= norm;
  if (c.dot(mu0) < 0.0) c = -c;
  return c;
}

inline Vector optimal_contrast_placadj(const Vector& mu0_active, const Matrix& S_active) {
  if (mu0_active.size() != S_active.rows())
    throw validation_error("optimal_contrast_placadj: dimension mismatch");
  if (mu0_active.norm() <= 1e-14)
    throw numeric_error("optimal contrast undefined for a null placebo-adjusted shape");
  const auto llt = detail::spd_factor(S_active, "optimal_contrast_placadj");
  Vector d = llt.solve(mu0_active);
  d /= d.norm();
  if (d.dot(mu0_active) < 0.0) d = -d;
  return d;
}

struct ContrastMatrix {
  Matrix columns;                    // K x M, one contrast per candidate model
  std::vector<std::string> labels;   // aligned to columns
  bool plac_adj = false;
};

inline std::vector<std::string> model_labels(const std::vector<CandidateModel>& models) {
  std::vector<std::string> labels;
  labels.reserve(models.size());
  for (std::size_t i = 0; i < models.size(); ++i) {
    std::string base = family_name(models[i].family);
    int same = 0, before = 0;
    for (std::size_t j = 0; j < models.size(); ++j) {
      if (models[j].family == models[i].family) {
        ++same;
        if (j < i) ++before;
      }
    }
    labels.push_back(same > 1 ? base + std::to_string(before + 1) : base);
  }
  return labels;
}

inline ContrastMatrix contrast_matrix(const std::vector<CandidateModel>& models,
                                      const DoseDesign& design, const Matrix& S, bool plac_adj) {
  if (models.empty()) throw validation_error("contrast_matrix: no candidate models");
  if (design.placebo_adjusted() != plac_adj)
    throw validation_error("contrast_matrix: design/placAdj flag mismatch");
  if (S.rows() != static_cast<Eigen::Index>(design.size()))
    throw validation_error("contrast_matrix: covariance does not match design");
  ContrastMatrix out;
  out.plac_adj = plac_adj;
  out.labels = model_labels(models);
  out.columns.resize(static_cast<Eigen::Index>(design.size()),
                     static_cast<Eigen::Index>(models.size()));
  for (std::size_t m = 0; m < models.size(); ++m) {
    const Vector mu0 = shape_vector(models[m], design);
    out.columns.col(static_cast<Eigen::Index>(m)) =
        plac_adj ? optimal_contrast_placadj(mu0, S) : optimal_contrast(mu0, S);
  }
  return out;
}

// Maximum noncentrality g(c) = c'mu / sqrt(c'Sc) over zero-sum contrasts;
// equals the placebo-collapsed value sqrt(muC' SC^{-1} muC).
inline double max_noncentrality(const Vector& mu, const Matrix& S) {
  const Vector c = optimal_contrast(mu, S);
  return c.dot(mu) / std::sqrt(c.dot(S * c));
}

inline double max_noncentrality_placadj(const Vector& mu_active, const Matrix& S_active) {
  const Vector d = optimal_contrast_placadj(mu_active, S_active);
  return d.dot(mu_active) / std::sqrt(d.dot(S_active * d));
}

}  // namespace dosekit
