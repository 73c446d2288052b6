#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "rsc/core.hpp"

namespace rsc {

// Rank-revealing least squares for a fixed design matrix. Solves are by
// column-pivoted Householder QR; rank failures name the offending column.
// Normal equations are never formed.
class LeastSquaresSolver {
 public:
  // The design is taken as-is (prepend the intercept column yourself or use
  // with_intercept in ols_fit). `names` is optional; used in error messages.
  explicit LeastSquaresSolver(const Eigen::MatrixXd& design,
                              std::vector<std::string> names = {});

  Eigen::Index rows() const { return rows_; }
  Eigen::Index cols() const { return qr_.cols(); }

  Eigen::VectorXd solve(const Eigen::VectorXd& y) const;

  // Rows [first, first+count) of the pseudo-inverse: coefficient c_i of a
  // solve is row i applied to the response. Lets callers re-solve for many
  // responses at matvec cost.
  Eigen::MatrixXd coefficient_map(Eigen::Index first,
                                  Eigen::Index count) const;

  // diag((X'X)^-1); multiplied by sigma2_hat gives squared standard errors.
  Eigen::VectorXd unscaled_variance_diag() const;

 private:
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr_;
  Eigen::Index rows_ = 0;
  std::vector<std::string> names_;
};

// Classical OLS fit. Coefficients are ordered [intercept?, design columns].
// Inference fields (stderr/t/p) are filled only when dof >= 1.
struct OlsFit {
  Eigen::VectorXd coefficients;
  Eigen::VectorXd residuals;
  long dof = 0;
  double sigma2_hat = 0.0;
  Eigen::VectorXd stderrs;
  Eigen::VectorXd t_stats;
  Eigen::VectorXd p_values;
  bool with_intercept = true;
};

OlsFit ols_fit(const Eigen::VectorXd& y, const Eigen::MatrixXd& design,
               bool with_intercept,
               const std::vector<std::string>& names = {});

// Coefficients of x from regressing y on [intercept, x, w_S].
Eigen::VectorXd beta_hat_subset(const Dataset& data,
                                const std::vector<int>& subset);

enum class GammaMethod {
  uniform_average,
  s_aic,
  s_bic,
  ridge,
  single_subset,
  oracle
};

std::string to_string(GammaMethod method);

// Estimate of the background coefficient vector, with zeros outside the
// fitted support, plus the fitted intercept.
struct GammaEstimate {
  Eigen::VectorXd gamma;  // length q
  double intercept = 0.0;
  GammaMethod method = GammaMethod::single_subset;

  Eigen::VectorXd fitted(const Eigen::MatrixXd& w) const {
    return (w * gamma).array() + intercept;
  }
};

// OLS of y on [intercept, w_S]; coefficients placed at the subset indices.
GammaEstimate gamma_hat_submodel(const Eigen::VectorXd& y,
                                 const Eigen::MatrixXd& w,
                                 const std::vector<int>& subset);

// Weighted average of the submodel estimates. Empty weights = uniform.
// Weights must be nonnegative and sum to 1.
GammaEstimate model_average_gamma(const Eigen::VectorXd& y,
                                  const Eigen::MatrixXd& w,
                                  const SubsetFamily& family,
                                  const Eigen::VectorXd& weights =
                                      Eigen::VectorXd());

enum class XicKind { aic, bic };

// Smoothed information-criterion weights over the submodels:
// score_j = ell*log(sigma2_j) + 2*k_j (AIC) or + 2*k_j*log(ell) (BIC),
// weights proportional to exp(-score/2) after subtracting the minimum.
Eigen::VectorXd xic_weights(const Eigen::VectorXd& y, const Eigen::MatrixXd& w,
                            const SubsetFamily& family, XicKind kind);

// Simplex weights proportional to exp(-score/2); the minimum score is
// subtracted first so arbitrarily large scores cannot overflow.
Eigen::VectorXd xic_weights_from_scores(const Eigen::VectorXd& scores);

struct RidgeOptions {
  // log10 grid used when no penalty is given; spans 1e-3 .. 1e3.
  int grid_points = 25;
  double log10_min = -3.0;
  double log10_max = 3.0;
};

// Ridge regression of y on w with centered columns and an unpenalized
// intercept. With lambda = 0 the design must have full column rank.
GammaEstimate ridge_fit(const Eigen::VectorXd& y, const Eigen::MatrixXd& w,
                        double lambda);

// Penalty choice by generalized cross-validation over a log grid.
double ridge_gcv_lambda(const Eigen::VectorXd& y, const Eigen::MatrixXd& w,
                        const RidgeOptions& opts = {});

struct InferenceRow {
  std::string name;
  double coefficient = 0.0;
  double stderr_value = 0.0;
  double t_stat = 0.0;
  double p_value = 0.0;
};

struct InferenceTable {
  std::vector<InferenceRow> rows;  // intercept first
  long dof = 0;
  double sigma2_hat = 0.0;

  const InferenceRow& row(const std::string& name) const;
};

// Classical OLS summary of y on [intercept, x, w] with labeled rows.
InferenceTable ols_inference_table(const Dataset& data);

}  // namespace rsc
