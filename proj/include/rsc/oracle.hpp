#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include "rsc/core.hpp"
#include "rsc/sem.hpp"

namespace rsc {

// Exact second-moment structure of (X, W) implied by the model; the ground
// truth every finite-sample estimate and closed form is checked against.
// Layout of cov_xw: X block first (d), then W (q).
struct PopulationModel {
  SemParams params;
  Eigen::MatrixXd cov_xw;  // (d+q) x (d+q), symmetric positive definite

  // Cov((X, W), Y) for the stored beta/gamma (or an override).
  Eigen::VectorXd cov_with_y() const;
  Eigen::VectorXd cov_with_y(const Eigen::VectorXd& beta,
                             const Eigen::VectorXd& gamma) const;
};

PopulationModel population_covariance(const SemParams& params);

// Infinite-sample regression coefficient of X from regressing Y on
// (X, W_S): the top-d block of Var(X, W_S)^-1 Cov((X, W_S), Y).
// The subset may be empty (regression of Y on X alone).
Eigen::VectorXd population_beta_hat(const PopulationModel& model,
                                    const std::vector<int>& subset);
Eigen::VectorXd population_beta_hat(const SemParams& params,
                                    const std::vector<int>& subset);

// The linear map gamma -> population_beta_hat - beta. Columns indexed by
// the subset are exactly zero; the map is built one basis vector at a time
// from the covariance solve, so it is definitionally consistent with
// population_beta_hat.
struct ConfoundingMap {
  std::vector<int> subset;
  Eigen::MatrixXd c;  // d x q
};

ConfoundingMap confounding_matrix(const PopulationModel& model,
                                  const std::vector<int>& subset);
ConfoundingMap confounding_matrix(const SemParams& params,
                                  const std::vector<int>& subset);

// Closed form for r = 1 with precision-weighted norms:
//   C(S) gamma = [a_{S^c}' gamma_{S^c} / (1 + ||b||_x^2 + ||a_S||_S^2)]
//                 * Dx^-1 b,
// where ||b||_x^2 = sum b_i^2/sigma_x_i^2, ||a_S||_S^2 =
// sum_{i in S} a_i^2/sigma_w_i^2, and sigma_z is folded into a, b.
ConfoundingMap confounding_matrix_r1(const SemParams& params,
                                     const std::vector<int>& subset);

// m x m covariance shape of the per-subset bias coordinates (r = 1):
// Sigma_ij = ||a_{S_i^c ∩ S_j^c}||^2 / (denom_i * denom_j).
Eigen::MatrixXd sigma_matrix(const SemParams& params,
                             const SubsetFamily& family);

// v_j = a_{S_j^c}' gamma_{S_j^c} / denom_j for a given gamma (r = 1).
// For gamma ~ N(0, rho^2/q I) these are jointly normal with covariance
// (rho^2/q) * sigma_matrix.
Eigen::VectorXd bias_coordinates_r1(const SemParams& params,
                                    const SubsetFamily& family,
                                    const Eigen::VectorXd& gamma);

// Null limit of the stability statistic as q grows:
// 1 - tr(Cm' Cm)/tr(Ctilde_m) with Cm = mean C(S_j) and
// Ctilde_m = mean C(S_j)' C(S_j). Throws when there is no confounding.
double limit_constant_null(const SemParams& params, const SubsetFamily& family);

// Same limit through the r = 1 Sigma matrix: 1 - e' Sigma e / tr(Sigma).
double limit_constant_null_r1(const SemParams& params,
                              const SubsetFamily& family);

// Diagnostics for the averaging condition: first component is
// (1/m) sum_j tr(C(S_j)' C(S_j)); second is tr(Sigma)/m when r = 1 and NaN
// otherwise.
std::pair<double, double> condition_strength(const SemParams& params,
                                             const SubsetFamily& family);

// With beta = 0, the stability statistic of the population coefficients
// equals 1 - (gamma' Cm' Cm gamma)/(gamma' Ctilde_m gamma) exactly.
// Returns (statistic via population_beta_hat, closed form via C matrices).
std::pair<double, double> stability_identity(const SemParams& params,
                                             const SubsetFamily& family,
                                             const Eigen::VectorXd& gamma);

// Draws from the exact null law of the statistic for r = 1:
// 1 - |sum_i c_i sqrt(lambda_i) g_i|^2 / sum_i lambda_i g_i^2 with
// (lambda, P) the eigensystem of Sigma, c = P'e, g standard normal.
Eigen::VectorXd sample_null_v_r1(const SemParams& params,
                                 const SubsetFamily& family, int n_draws,
                                 std::uint64_t seed);

// Population residual cross-covariance E[R_Y R_X] after projecting Y and X
// on (intercept, W_C); d must be 1. Computed by Schur complement on the
// exact joint covariance.
double population_residual_cross_covariance(
    const SemParams& params, const std::vector<int>& conditioning_set);

}  // namespace rsc
