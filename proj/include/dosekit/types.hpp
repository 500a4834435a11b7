#pragma once

// Core domain types: dose designs, candidate model descriptions and the
// first-stage estimate pair that every downstream analysis consumes.

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace dosekit {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Inputs that fail structural checks (dimensions, signs, orderings).
class validation_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Computations that fail numerically (singular systems, non-convergence).
class numeric_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Ordered dose grid. Placebo (dose 0) comes first unless the design is
// placebo-adjusted, in which case only active doses (> 0) are present.
class DoseDesign {
 public:
  explicit DoseDesign(std::vector<double> doses, bool placebo_adjusted = false)
      : doses_(std::move(doses)), plac_adj_(placebo_adjusted) {
    const std::size_t min_size = plac_adj_ ? 1 : 2;
    if (doses_.size() < min_size) throw validation_error("DoseDesign: too few doses");
    for (std::size_t i = 0; i < doses_.size(); ++i) {
      if (!std::isfinite(doses_[i])) throw validation_error("DoseDesign: non-finite dose");
      if (i > 0 && !(doses_[i] > doses_[i - 1]))
        throw validation_error("DoseDesign: doses must be strictly increasing");
    }
    if (plac_adj_) {
      if (!(doses_.front() > 0.0))
        throw validation_error("DoseDesign: placebo-adjusted design must contain active doses only");
    } else if (doses_.front() != 0.0) {
      throw validation_error("DoseDesign: first dose must be placebo (0)");
    }
  }

  std::size_t size() const { return doses_.size(); }
  double operator[](std::size_t i) const { return doses_[i]; }
  const std::vector<double>& doses() const { return doses_; }
  double max_dose() const { return doses_.back(); }
  bool placebo_adjusted() const { return plac_adj_; }

  // Active part of a full design, for collapsing against placebo.
  DoseDesign active_part() const {
    if (plac_adj_) return *this;
    return DoseDesign(std::vector<double>(doses_.begin() + 1, doses_.end()), true);
  }

  bool operator==(const DoseDesign& o) const {
    return plac_adj_ == o.plac_adj_ && doses_ == o.doses_;
  }

 private:
  std::vector<double> doses_;
  bool plac_adj_;
};

enum class ModelFamily { Linear, Emax, SigEmax, Quadratic, Exponential };

inline std::size_t nonlinear_param_count(ModelFamily f) {
  switch (f) {
    case ModelFamily::Linear: return 0;
    case ModelFamily::Emax:
    case ModelFamily::Quadratic:
    case ModelFamily::Exponential: return 1;
    case ModelFamily::SigEmax: return 2;
  }
  throw validation_error("nonlinear_param_count: unknown family");
}

inline const char* family_name(ModelFamily f) {
  switch (f) {
    case ModelFamily::Linear: return "linear";
    case ModelFamily::Emax: return "emax";
    case ModelFamily::SigEmax: return "sigEmax";
    case ModelFamily::Quadratic: return "quadratic";
    case ModelFamily::Exponential: return "exponential";
  }
  throw validation_error("family_name: unknown family");
}

inline ModelFamily family_from_string(const std::string& s) {
  if (s == "linear") return ModelFamily::Linear;
  if (s == "emax") return ModelFamily::Emax;
  if (s == "sigEmax" || s == "sigemax") return ModelFamily::SigEmax;
  if (s == "quadratic") return ModelFamily::Quadratic;
  if (s == "exponential") return ModelFamily::Exponential;
  throw validation_error("unknown model family: " + s);
}

inline void validate_nonlinear_params(ModelFamily family, const std::vector<double>& theta0) {
  if (theta0.size() != nonlinear_param_count(family))
    throw validation_error(std::string(family_name(family)) +
                           ": wrong number of nonlinear parameters");
  for (double v : theta0)
    if (!std::isfinite(v))
      throw validation_error(std::string(family_name(family)) + ": non-finite parameter");
  switch (family) {
    case ModelFamily::Emax:
      if (!(theta0[0] > 0.0)) throw validation_error("emax: ED50 must be > 0");
      break;
    case ModelFamily::SigEmax:
      if (!(theta0[0] > 0.0)) throw validation_error("sigEmax: ED50 must be > 0");
      if (!(theta0[1] > 0.0)) throw validation_error("sigEmax: Hill coefficient must be > 0");
      break;
    case ModelFamily::Exponential:
      if (!(theta0[0] > 0.0)) throw validation_error("exponential: delta must be > 0");
      break;
    default:
      break;
  }
}

// A model family plus guesstimates of its nonlinear parameters; fixes one
// candidate shape at the design stage.
struct CandidateModel {
  ModelFamily family;
  std::vector<double> guesstimates;

  CandidateModel(ModelFamily f, std::vector<double> g)
      : family(f), guesstimates(std::move(g)) {
    validate_nonlinear_params(family, guesstimates);
  }
};

// Full parameter vector (theta0, theta1, nonlinear params...) of a
// dose-response model. Placebo-adjusted fits drop the intercept.
struct FullParams {
  ModelFamily family;
  Vector theta;

  FullParams(ModelFamily f, Vector t) : family(f), theta(std::move(t)) {
    if (static_cast<std::size_t>(theta.size()) != 2 + nonlinear_param_count(family))
      throw validation_error("FullParams: wrong dimension for family");
    validate_nonlinear_params(family, nonlinear());
  }

  double intercept() const { return theta[0]; }
  double scale() const { return theta[1]; }
  std::vector<double> nonlinear() const {
    return std::vector<double>(theta.data() + 2, theta.data() + theta.size());
  }
};

// First-stage estimate pair (muHat, S). The sole interface between stage
// one and all downstream testing, fitting and simulation.
struct AnovaEstimate {
  DoseDesign design;
  Vector mu_hat;
  Matrix S;
  bool plac_adj;

  AnovaEstimate(DoseDesign d, Vector mu, Matrix cov)
      : design(std::move(d)), mu_hat(std::move(mu)), S(std::move(cov)),
        plac_adj(design.placebo_adjusted()) {
    const auto k = static_cast<Eigen::Index>(design.size());
    if (mu_hat.size() != k) throw validation_error("AnovaEstimate: mu length mismatch");
    if (S.rows() != k || S.cols() != k) throw validation_error("AnovaEstimate: S dimension mismatch");
    for (Eigen::Index i = 0; i < k; ++i) {
      if (!std::isfinite(mu_hat[i])) throw validation_error("AnovaEstimate: non-finite mu");
      for (Eigen::Index j = 0; j < k; ++j) {
        if (!std::isfinite(S(i, j))) throw validation_error("AnovaEstimate: non-finite S entry");
        if (std::abs(S(i, j) - S(j, i)) > 1e-8 * (1.0 + std::abs(S(i, j))))
          throw validation_error("AnovaEstimate: S is not symmetric");
      }
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(S);
    const double min_ev = es.eigenvalues().minCoeff();
    if (!(min_ev > 1e-12 * S.trace() / static_cast<double>(k)))
      throw validation_error("AnovaEstimate: S is not positive definite");
  }

  std::size_t n_doses() const { return design.size(); }

  // Collapse a full estimate against placebo: muC = C0 mu, SC = C0 S C0'.
  AnovaEstimate placebo_collapsed() const {
    if (plac_adj) return *this;
    const Eigen::Index k = mu_hat.size();
    Matrix c0 = Matrix::Zero(k - 1, k);
    c0.col(0).setConstant(-1.0);
    c0.block(0, 1, k - 1, k - 1).setIdentity();
    return AnovaEstimate(design.active_part(), c0 * mu_hat, c0 * S * c0.transpose());
  }
};

// Contrast matrix C0 = (-1 | I) mapping a full mean vector to
// placebo-adjusted differences.
inline Matrix placebo_collapse_matrix(Eigen::Index k) {
  if (k < 2) throw validation_error("placebo_collapse_matrix: need K >= 2");
  Matrix c0 = Matrix::Zero(k - 1, k);
  c0.col(0).setConstant(-1.0);
  c0.block(0, 1, k - 1, k - 1).setIdentity();
  return c0;
}

}  // namespace dosekit
