#include "rsc/permtest.hpp"

#include <cmath>

#include "rsc/kernels.hpp"
#include "rsc/parallel.hpp"

namespace rsc {

double permutation_p_value(double v_observed, const Eigen::VectorXd& v_null,
                           Tail tail) {
  long count = 0;
  for (Eigen::Index i = 0; i < v_null.size(); ++i) {
    if (tail == Tail::lower ? v_null(i) <= v_observed
                            : v_null(i) >= v_observed)
      ++count;
  }
  return static_cast<double>(count + 1) /
         static_cast<double>(v_null.size() + 1);
}

std::vector<std::uint32_t> random_permutation(int n, RngStream& rng) {
  std::vector<std::uint32_t> perm(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    perm[static_cast<std::size_t>(i)] = static_cast<std::uint32_t>(i);
  for (int i = n - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(
        rng.next_below(static_cast<std::uint64_t>(i) + 1));
    std::swap(perm[static_cast<std::size_t>(i)], perm[j]);
  }
  return perm;
}

Eigen::VectorXd permute_residual_response(
    const Eigen::VectorXd& y, const Eigen::MatrixXd& w,
    const GammaEstimate& gamma_hat, const std::vector<std::uint32_t>& perm) {
  if (static_cast<Eigen::Index>(perm.size()) != y.size())
    throw InvalidArgument("permute_residual_response: permutation length mismatch");
  const Eigen::VectorXd fitted = gamma_hat.fitted(w);
  const Eigen::VectorXd resid = y - fitted;
  Eigen::VectorXd out(y.size());
  kernels::permuted_add(fitted.data(), resid.data(), perm.data(),
                        static_cast<std::size_t>(y.size()), out.data());
  return out;
}

namespace {

// Stacked rows of the per-subset coefficient maps: block j holds the d rows
// that turn a response vector into the X-coefficients of the regression on
// [intercept, X, W_{S_j}].
RowMajorMatrix build_extractors(const Dataset& data,
                                const SubsetFamily& family) {
  const Eigen::Index ell = data.rows();
  const Eigen::Index d = data.d();
  const int m = family.count();
  RowMajorMatrix extractors(static_cast<Eigen::Index>(m) * d, ell);
  for (int j = 0; j < m; ++j) {
    const auto& subset = family.subsets[static_cast<std::size_t>(j)];
    Eigen::MatrixXd design(ell, 1 + d + static_cast<Eigen::Index>(subset.size()));
    design.col(0).setOnes();
    design.middleCols(1, d) = data.x;
    for (std::size_t c = 0; c < subset.size(); ++c)
      design.col(1 + d + static_cast<Eigen::Index>(c)) =
          data.w.col(subset[c]);
    if (ell <= design.cols())
      throw InvalidArgument(
          "permutation_test: subset " + std::to_string(j) +
          " leaves no residual degrees of freedom");
    LeastSquaresSolver solver(design);
    extractors.middleRows(static_cast<Eigen::Index>(j) * d, d) =
        solver.coefficient_map(1, d);
  }
  return extractors;
}

}  // namespace

PermutationTestResult permutation_test(const Dataset& data,
                                       const SubsetFamily& family,
                                       const GammaEstimate& gamma_hat,
                                       const PermutationTestOptions& opts) {
  if (opts.num_permutations < 1)
    throw InvalidArgument("permutation_test: need at least one permutation");
  if (family.q != data.q())
    throw InvalidArgument("permutation_test: family/background mismatch");
  if (gamma_hat.gamma.size() != data.q())
    throw InvalidArgument("permutation_test: gamma_hat length mismatch");
  const int m = family.count();
  if (m < 1) throw InvalidArgument("permutation_test: empty subset family");

  const Eigen::Index ell = data.rows();
  const int d = static_cast<int>(data.d());
  const RowMajorMatrix extractors = build_extractors(data, family);
  const std::size_t n_rows = static_cast<std::size_t>(extractors.rows());

  PermutationTestResult result;
  result.m = m;
  result.num_permutations = opts.num_permutations;
  result.seed = opts.seed;

  std::vector<double> coeffs0(n_rows);
  kernels::matvec_rows(extractors.data(), n_rows,
                       static_cast<std::size_t>(ell),
                       static_cast<std::size_t>(ell), data.y.data(),
                       coeffs0.data());
  result.v_observed = stability_statistic_rowmajor(coeffs0.data(), m, d);

  const Eigen::VectorXd fitted = gamma_hat.fitted(data.w);
  const Eigen::VectorXd resid = data.y - fitted;

  result.v_null.resize(opts.num_permutations);
  parallel_for(opts.num_permutations, opts.threads, [&](int i) {
    RngStream rng =
        substream(opts.seed, "perm", static_cast<std::uint64_t>(i) + 1);
    const std::vector<std::uint32_t> perm =
        random_permutation(static_cast<int>(ell), rng);
    Eigen::VectorXd pseudo(ell);
    kernels::permuted_add(fitted.data(), resid.data(), perm.data(),
                          static_cast<std::size_t>(ell), pseudo.data());
    std::vector<double> coeffs(n_rows);
    kernels::matvec_rows(extractors.data(), n_rows,
                         static_cast<std::size_t>(ell),
                         static_cast<std::size_t>(ell), pseudo.data(),
                         coeffs.data());
    try {
      result.v_null(i) = stability_statistic_rowmajor(coeffs.data(), m, d);
    } catch (const DegenerateStatistic&) {
      throw DegenerateStatistic(
          "permutation_test: all-zero coefficient set in replicate " +
          std::to_string(i + 1));
    }
  });

  result.p_value =
      permutation_p_value(result.v_observed, result.v_null, Tail::lower);
  return result;
}

double type1_bound_estimate(const Eigen::MatrixXd& w,
                            const Eigen::VectorXd& gamma,
                            const GammaEstimate& gamma_hat, double sigma_y,
                            int num_permutations) {
  if (!(sigma_y > 0.0))
    throw InvalidArgument("type1_bound_estimate: sigma_y must be positive");
  if (gamma.size() != w.cols() || gamma_hat.gamma.size() != w.cols())
    throw InvalidArgument("type1_bound_estimate: dimension mismatch");
  const double misfit = (w * (gamma - gamma_hat.gamma)).norm();
  return std::sqrt(static_cast<double>(num_permutations)) * misfit /
         (2.0 * sigma_y);
}

}  // namespace rsc
