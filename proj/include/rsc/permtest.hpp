#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "rsc/core.hpp"
#include "rsc/regression.hpp"
#include "rsc/rng.hpp"

namespace rsc {

struct PermutationTestResult {
  double v_observed = 0.0;
  Eigen::VectorXd v_null;  // length M
  double p_value = 1.0;
  int m = 0;                    // number of subsets
  int num_permutations = 0;     // M
  std::uint64_t seed = 0;
};

// Which tail of the null distribution counts as evidence against the null.
// The stability statistic rejects in the lower tail (small values mean
// stable, hence causal, coefficients); correlation-style statistics reject
// in the upper tail.
enum class Tail { lower, upper };

// Lower: (#{v_null <= v_observed} + 1) / (M + 1); upper counts >=. Ties
// count toward the null either way, keeping the test conservative.
double permutation_p_value(double v_observed, const Eigen::VectorXd& v_null,
                           Tail tail);

// Uniform permutation of {0..n-1} via Fisher-Yates on the given stream.
std::vector<std::uint32_t> random_permutation(int n, RngStream& rng);

// W gamma_hat + permuted residuals, with the residual y - fitted computed
// once: the pseudo-response of the residual-permutation construction.
Eigen::VectorXd permute_residual_response(const Eigen::VectorXd& y,
                                          const Eigen::MatrixXd& w,
                                          const GammaEstimate& gamma_hat,
                                          const std::vector<std::uint32_t>& perm);

struct PermutationTestOptions {
  int num_permutations = 999;
  std::uint64_t seed = 0;
  int threads = 1;
};

// Algorithm: compute the observed stability statistic of the per-subset
// X-coefficients; for each replicate i, rebuild the pseudo-response from
// permutation substream (seed, "perm", i), refit all m subset regressions,
// and collect the null statistics. The per-subset designs depend only on
// (X, W_S), so their factorizations are computed once and replicates reduce
// to matrix-vector products over cached coefficient maps.
PermutationTestResult permutation_test(const Dataset& data,
                                       const SubsetFamily& family,
                                       const GammaEstimate& gamma_hat,
                                       const PermutationTestOptions& opts);

// Diagnostic alpha-inflation term of the type-I bound:
// sqrt(M) * ||W (gamma - gamma_hat)|| / (2 sigma_y). Meaningful on
// synthetic data where the true gamma is known.
double type1_bound_estimate(const Eigen::MatrixXd& w,
                            const Eigen::VectorXd& gamma,
                            const GammaEstimate& gamma_hat, double sigma_y,
                            int num_permutations);

}  // namespace rsc
