#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "rsc/core.hpp"

namespace rsc {

struct BaselineResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::string method;
  double lambda = 0.0;
  int num_permutations = 0;
  std::uint64_t seed = 0;
};

struct BaselineOptions {
  std::optional<double> lambda;  // empty = pick by GCV
  int num_permutations = 999;
  std::uint64_t seed = 0;
  int threads = 1;
};

// Freedman-Lane residual-permutation test with a ridge nuisance fit.
// Statistic: squared norm of the partial correlations between Y and each X
// column after ridge-residualizing on W. Null replicates rebuild the
// pseudo-response W*gamma_hat + permuted residuals and recompute the
// statistic identically.
BaselineResult freedman_lane_test(const Dataset& data,
                                  const BaselineOptions& opts);

// Double residualization: ridge-residualize both Y and each X column on W;
// statistic is the squared norm of the residual cross-correlations, and the
// null permutes the Y-residuals directly.
BaselineResult double_residualization_test(const Dataset& data,
                                           const BaselineOptions& opts);

}  // namespace rsc
