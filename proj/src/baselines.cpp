#include "rsc/baselines.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "rsc/kernels.hpp"
#include "rsc/parallel.hpp"
#include "rsc/permtest.hpp"
#include "rsc/regression.hpp"

namespace rsc {

namespace {

constexpr double kResidualTolerance = 1e-8;

// Ridge smoother on centered columns: residualize(v) = v_c - U h U' v_c.
struct RidgeResidualizer {
  Eigen::MatrixXd u;       // ell x rank
  Eigen::VectorXd shrink;  // s^2 / (s^2 + lambda)

  Eigen::VectorXd residualize(const Eigen::VectorXd& v) const {
    Eigen::VectorXd vc = v.array() - v.mean();
    if (u.cols() == 0) return vc;
    const Eigen::VectorXd proj = u.transpose() * vc;
    return vc - u * (shrink.asDiagonal() * proj);
  }
};

RidgeResidualizer make_residualizer(const Eigen::MatrixXd& w, double lambda) {
  RidgeResidualizer r;
  if (w.cols() == 0) {
    r.u.resize(w.rows(), 0);
    return r;
  }
  Eigen::MatrixXd wc = w.rowwise() - w.colwise().mean();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(wc, Eigen::ComputeThinU);
  r.u = svd.matrixU();
  const Eigen::VectorXd& s = svd.singularValues();
  r.shrink.resize(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    const double denom = s(i) * s(i) + lambda;
    r.shrink(i) = denom > 0.0 ? s(i) * s(i) / denom : 0.0;
  }
  return r;
}

double checked_norm(const Eigen::VectorXd& resid, double reference,
                    const std::string& what) {
  const double norm = resid.norm();
  if (norm <= kResidualTolerance * std::max(reference, 1e-300))
    throw DegenerateStatistic(what + " residual has (near-)zero variance");
  return norm;
}

// Squared norm of correlations between yres and each pre-normalized column.
double correlation_statistic(const Eigen::VectorXd& yres,
                             const Eigen::MatrixXd& xres,
                             const Eigen::VectorXd& xnorms) {
  const double ynorm = yres.norm();
  if (ynorm == 0.0)
    throw DegenerateStatistic("zero-variance pseudo-response residual");
  double stat = 0.0;
  for (Eigen::Index j = 0; j < xres.cols(); ++j) {
    const double c = kernels::dot(yres.data(), xres.col(j).data(),
                                  static_cast<std::size_t>(yres.size())) /
                     (ynorm * xnorms(j));
    stat += c * c;
  }
  return stat;
}

struct Prepared {
  double lambda = 0.0;
  RidgeResidualizer residualizer;
  Eigen::MatrixXd xres;    // residualized X columns
  Eigen::VectorXd xnorms;  // their norms
  Eigen::VectorXd yres;    // residualized observed response
  Eigen::VectorXd fitted;  // ridge nuisance fit of y (intercept included)
  Eigen::VectorXd resid;   // y - fitted
};

Prepared prepare(const Dataset& data, const BaselineOptions& opts) {
  if (data.rows() <= data.d() + 2)
    throw InvalidArgument("baseline test: need ell > d + 2");
  Prepared p;
  p.lambda = opts.lambda ? *opts.lambda
                         : (data.q() > 0 ? ridge_gcv_lambda(data.y, data.w)
                                         : 0.0);
  if (p.lambda < 0.0) throw InvalidArgument("baseline test: negative lambda");
  p.residualizer = make_residualizer(data.w, p.lambda);

  p.xres.resize(data.rows(), data.d());
  p.xnorms.resize(data.d());
  for (Eigen::Index j = 0; j < data.d(); ++j) {
    const Eigen::VectorXd col = data.x.col(j);
    const Eigen::VectorXd colc = col.array() - col.mean();
    p.xres.col(j) = p.residualizer.residualize(col);
    p.xnorms(j) = checked_norm(p.xres.col(j), colc.norm(),
                               "cause column " + std::to_string(j + 1));
  }
  p.yres = p.residualizer.residualize(data.y);
  checked_norm(p.yres, (data.y.array() - data.y.mean()).matrix().norm(),
               "response");

  if (data.q() > 0) {
    GammaEstimate gamma = ridge_fit(data.y, data.w, p.lambda);
    p.fitted = gamma.fitted(data.w);
  } else {
    p.fitted = Eigen::VectorXd::Constant(data.rows(), data.y.mean());
  }
  p.resid = data.y - p.fitted;
  return p;
}

}  // namespace

BaselineResult freedman_lane_test(const Dataset& data,
                                  const BaselineOptions& opts) {
  if (opts.num_permutations < 1)
    throw InvalidArgument("freedman_lane_test: need at least one permutation");
  Prepared p = prepare(data, opts);
  const int ell = static_cast<int>(data.rows());

  BaselineResult result;
  result.method = "fl";
  result.lambda = p.lambda;
  result.num_permutations = opts.num_permutations;
  result.seed = opts.seed;
  result.statistic = correlation_statistic(p.yres, p.xres, p.xnorms);

  Eigen::VectorXd v_null(opts.num_permutations);
  parallel_for(opts.num_permutations, opts.threads, [&](int i) {
    RngStream rng =
        substream(opts.seed, "perm", static_cast<std::uint64_t>(i) + 1);
    const auto perm = random_permutation(ell, rng);
    Eigen::VectorXd pseudo(ell);
    kernels::permuted_add(p.fitted.data(), p.resid.data(), perm.data(),
                          static_cast<std::size_t>(ell), pseudo.data());
    v_null(i) = correlation_statistic(p.residualizer.residualize(pseudo),
                                      p.xres, p.xnorms);
  });
  result.p_value = permutation_p_value(result.statistic, v_null, Tail::upper);
  return result;
}

BaselineResult double_residualization_test(const Dataset& data,
                                           const BaselineOptions& opts) {
  if (opts.num_permutations < 1)
    throw InvalidArgument(
        "double_residualization_test: need at least one permutation");
  Prepared p = prepare(data, opts);
  const int ell = static_cast<int>(data.rows());

  BaselineResult result;
  result.method = "dr";
  result.lambda = p.lambda;
  result.num_permutations = opts.num_permutations;
  result.seed = opts.seed;
  result.statistic = correlation_statistic(p.yres, p.xres, p.xnorms);

  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(ell);
  Eigen::VectorXd v_null(opts.num_permutations);
  parallel_for(opts.num_permutations, opts.threads, [&](int i) {
    RngStream rng =
        substream(opts.seed, "perm", static_cast<std::uint64_t>(i) + 1);
    const auto perm = random_permutation(ell, rng);
    Eigen::VectorXd shuffled(ell);
    kernels::permuted_add(zero.data(), p.yres.data(), perm.data(),
                          static_cast<std::size_t>(ell), shuffled.data());
    v_null(i) = correlation_statistic(shuffled, p.xres, p.xnorms);
  });
  result.p_value = permutation_p_value(result.statistic, v_null, Tail::upper);
  return result;
}

}  // namespace rsc
