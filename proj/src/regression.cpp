#include "rsc/regression.hpp"

#include <cmath>
#include <limits>

#include "rsc/mathutil.hpp"

namespace rsc {

namespace {

constexpr double kRankTolerance = 1e-10;

Eigen::MatrixXd with_intercept_column(const Eigen::MatrixXd& design) {
  Eigen::MatrixXd full(design.rows(), design.cols() + 1);
  full.col(0).setOnes();
  full.rightCols(design.cols()) = design;
  return full;
}

std::string column_label(const std::vector<std::string>& names,
                         Eigen::Index j) {
  if (j < static_cast<Eigen::Index>(names.size()))
    return names[static_cast<std::size_t>(j)];
  return "column " + std::to_string(j);
}

}  // namespace

LeastSquaresSolver::LeastSquaresSolver(const Eigen::MatrixXd& design,
                                       std::vector<std::string> names)
    : rows_(design.rows()), names_(std::move(names)) {
  if (design.rows() < design.cols())
    throw InvalidArgument("least squares: more columns than rows");
  qr_.setThreshold(kRankTolerance);
  qr_.compute(design);
  if (qr_.rank() < design.cols()) {
    // Columns permuted past the numerical rank are the dependent ones.
    const auto& perm = qr_.colsPermutation().indices();
    const Eigen::Index offender = perm(qr_.rank());
    throw SingularDesign("singular design: " + column_label(names_, offender) +
                         " is linearly dependent on earlier columns");
  }
}

Eigen::VectorXd LeastSquaresSolver::solve(const Eigen::VectorXd& y) const {
  if (y.size() != rows_)
    throw InvalidArgument("least squares: response length mismatch");
  return qr_.solve(y);
}

Eigen::MatrixXd LeastSquaresSolver::coefficient_map(Eigen::Index first,
                                                    Eigen::Index count) const {
  const Eigen::Index p = cols();
  if (first < 0 || count < 0 || first + count > p)
    throw InvalidArgument("coefficient_map: row range out of bounds");
  // pinv = P R^-1 Q1'; we want rows [first, first+count) of it, i.e.
  // (R^-1 Q1')(P^-1 rows). Solve R' z = e_row instead of forming R^-1.
  Eigen::MatrixXd q1 = qr_.householderQ() * Eigen::MatrixXd::Identity(rows_, p);
  const auto r_top = qr_.matrixR().topLeftCorner(p, p).
      template triangularView<Eigen::Upper>();
  const auto& perm = qr_.colsPermutation();
  // Row i of pinv corresponds to row perm^-1(i) of R^-1 Q1'.
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(p, count);
  const Eigen::PermutationMatrix<Eigen::Dynamic> inv = perm.inverse();
  for (Eigen::Index j = 0; j < count; ++j)
    rhs(inv.indices()(first + j), j) = 1.0;
  Eigen::MatrixXd z = r_top.transpose().solve(rhs);  // p x count
  return z.transpose() * q1.transpose();             // count x rows
}

Eigen::VectorXd LeastSquaresSolver::unscaled_variance_diag() const {
  const Eigen::Index p = cols();
  const auto r_top = qr_.matrixR().topLeftCorner(p, p).
      template triangularView<Eigen::Upper>();
  Eigen::MatrixXd rinv =
      r_top.solve(Eigen::MatrixXd::Identity(p, p));  // R^-1
  Eigen::VectorXd diag_permuted = rinv.rowwise().squaredNorm();
  Eigen::VectorXd diag(p);
  const auto& perm = qr_.colsPermutation().indices();
  for (Eigen::Index i = 0; i < p; ++i) diag(perm(i)) = diag_permuted(i);
  return diag;
}

OlsFit ols_fit(const Eigen::VectorXd& y, const Eigen::MatrixXd& design,
               bool with_intercept, const std::vector<std::string>& names) {
  if (design.rows() != y.size())
    throw InvalidArgument("ols_fit: response/design row mismatch");
  Eigen::MatrixXd full =
      with_intercept ? with_intercept_column(design) : design;
  std::vector<std::string> labels;
  if (with_intercept) labels.push_back("intercept");
  for (Eigen::Index j = 0; j < design.cols(); ++j)
    labels.push_back(column_label(names, j));

  LeastSquaresSolver solver(full, labels);
  OlsFit fit;
  fit.with_intercept = with_intercept;
  fit.coefficients = solver.solve(y);
  fit.residuals = y - full * fit.coefficients;
  fit.dof = static_cast<long>(full.rows() - full.cols());
  if (fit.dof >= 1) {
    fit.sigma2_hat = fit.residuals.squaredNorm() / static_cast<double>(fit.dof);
    const Eigen::VectorXd var_diag = solver.unscaled_variance_diag();
    const Eigen::Index p = full.cols();
    fit.stderrs.resize(p);
    fit.t_stats.resize(p);
    fit.p_values.resize(p);
    for (Eigen::Index i = 0; i < p; ++i) {
      fit.stderrs(i) = std::sqrt(fit.sigma2_hat * var_diag(i));
      fit.t_stats(i) =
          fit.stderrs(i) > 0.0 ? fit.coefficients(i) / fit.stderrs(i) : 0.0;
      fit.p_values(i) = student_t_two_sided_p(fit.t_stats(i),
                                              static_cast<double>(fit.dof));
    }
  }
  return fit;
}

Eigen::VectorXd beta_hat_subset(const Dataset& data,
                                const std::vector<int>& subset) {
  const Eigen::Index d = data.d();
  Eigen::MatrixXd design(data.rows(),
                         d + static_cast<Eigen::Index>(subset.size()));
  design.leftCols(d) = data.x;
  for (std::size_t j = 0; j < subset.size(); ++j) {
    if (subset[j] < 0 || subset[j] >= data.q())
      throw InvalidArgument("beta_hat_subset: subset index out of range");
    design.col(d + static_cast<Eigen::Index>(j)) = data.w.col(subset[j]);
  }
  if (data.rows() <= design.cols() + 1)
    throw InvalidArgument("beta_hat_subset: not enough rows for the fit");
  OlsFit fit = ols_fit(data.y, design, /*with_intercept=*/true);
  return fit.coefficients.segment(1, d);
}

std::string to_string(GammaMethod method) {
  switch (method) {
    case GammaMethod::uniform_average: return "uniform-average";
    case GammaMethod::s_aic: return "s-aic";
    case GammaMethod::s_bic: return "s-bic";
    case GammaMethod::ridge: return "ridge";
    case GammaMethod::single_subset: return "single-subset";
    case GammaMethod::oracle: return "oracle";
  }
  throw InvalidArgument("bad GammaMethod");
}

GammaEstimate gamma_hat_submodel(const Eigen::VectorXd& y,
                                 const Eigen::MatrixXd& w,
                                 const std::vector<int>& subset) {
  if (subset.empty())
    throw InvalidArgument("gamma_hat_submodel: empty subset");
  Eigen::MatrixXd design(y.size(), static_cast<Eigen::Index>(subset.size()));
  for (std::size_t j = 0; j < subset.size(); ++j) {
    if (subset[j] < 0 || subset[j] >= w.cols())
      throw InvalidArgument("gamma_hat_submodel: subset index out of range");
    design.col(static_cast<Eigen::Index>(j)) = w.col(subset[j]);
  }
  if (y.size() <= design.cols() + 1)
    throw InvalidArgument("gamma_hat_submodel: not enough rows for the fit");
  OlsFit fit = ols_fit(y, design, /*with_intercept=*/true);
  GammaEstimate est;
  est.gamma = Eigen::VectorXd::Zero(w.cols());
  for (std::size_t j = 0; j < subset.size(); ++j)
    est.gamma(subset[j]) = fit.coefficients(1 + static_cast<Eigen::Index>(j));
  est.intercept = fit.coefficients(0);
  est.method = GammaMethod::single_subset;
  return est;
}

GammaEstimate model_average_gamma(const Eigen::VectorXd& y,
                                  const Eigen::MatrixXd& w,
                                  const SubsetFamily& family,
                                  const Eigen::VectorXd& weights) {
  const int m = family.count();
  if (m < 1) throw InvalidArgument("model_average_gamma: empty family");
  if (family.q != w.cols())
    throw InvalidArgument("model_average_gamma: family/W dimension mismatch");
  Eigen::VectorXd wts;
  if (weights.size() == 0) {
    wts = Eigen::VectorXd::Constant(m, 1.0 / m);
  } else {
    if (weights.size() != m)
      throw InvalidArgument("model_average_gamma: weight length mismatch");
    if ((weights.array() < 0.0).any())
      throw InvalidArgument("model_average_gamma: negative weight");
    if (std::abs(weights.sum() - 1.0) > 1e-8)
      throw InvalidArgument("model_average_gamma: weights must sum to 1");
    wts = weights;
  }
  GammaEstimate avg;
  avg.gamma = Eigen::VectorXd::Zero(w.cols());
  avg.intercept = 0.0;
  for (int j = 0; j < m; ++j) {
    GammaEstimate sub =
        gamma_hat_submodel(y, w, family.subsets[static_cast<std::size_t>(j)]);
    avg.gamma += wts(j) * sub.gamma;
    avg.intercept += wts(j) * sub.intercept;
  }
  avg.method = GammaMethod::uniform_average;
  return avg;
}

Eigen::VectorXd xic_weights(const Eigen::VectorXd& y, const Eigen::MatrixXd& w,
                            const SubsetFamily& family, XicKind kind) {
  const int m = family.count();
  if (m < 1) throw InvalidArgument("xic_weights: empty family");
  const double ell = static_cast<double>(y.size());
  const double y_scale = (y.array() - y.mean()).matrix().squaredNorm() / ell;
  Eigen::VectorXd scores(m);
  for (int j = 0; j < m; ++j) {
    const auto& subset = family.subsets[static_cast<std::size_t>(j)];
    GammaEstimate sub = gamma_hat_submodel(y, w, subset);
    const double rss = (y - sub.fitted(w)).squaredNorm();
    const double sigma2 = rss / ell;
    if (sigma2 <= 1e-24 * y_scale)
      throw DegenerateStatistic("xic_weights: submodel " + std::to_string(j) +
                                " achieves a perfect fit");
    const double k_j = static_cast<double>(subset.size());
    const double penalty =
        kind == XicKind::aic ? 2.0 * k_j : 2.0 * k_j * std::log(ell);
    scores(j) = ell * std::log(sigma2) + penalty;
  }
  return xic_weights_from_scores(scores);
}

Eigen::VectorXd xic_weights_from_scores(const Eigen::VectorXd& scores) {
  if (scores.size() < 1) throw InvalidArgument("xic weights: no scores");
  // Subtracting the minimum keeps exp() in range for any score magnitude.
  const double min_score = scores.minCoeff();
  Eigen::VectorXd weights = (-(scores.array() - min_score) / 2.0).exp();
  weights /= weights.sum();
  return weights;
}

namespace {

struct CenteredSvd {
  Eigen::BDCSVD<Eigen::MatrixXd> svd;
  Eigen::RowVectorXd col_means;
  double y_mean = 0.0;
  Eigen::VectorXd uty;  // U' (y - mean)
};

CenteredSvd centered_svd(const Eigen::VectorXd& y, const Eigen::MatrixXd& w) {
  if (w.rows() != y.size())
    throw InvalidArgument("ridge: response/design row mismatch");
  if (w.rows() < 2) throw InvalidArgument("ridge: need at least two rows");
  CenteredSvd out;
  out.col_means = w.colwise().mean();
  out.y_mean = y.mean();
  Eigen::MatrixXd wc = w.rowwise() - out.col_means;
  out.svd.compute(wc, Eigen::ComputeThinU | Eigen::ComputeThinV);
  out.uty = out.svd.matrixU().transpose() *
            (y.array() - out.y_mean).matrix();
  return out;
}

}  // namespace

GammaEstimate ridge_fit(const Eigen::VectorXd& y, const Eigen::MatrixXd& w,
                        double lambda) {
  if (lambda < 0.0) throw InvalidArgument("ridge_fit: negative penalty");
  if (w.cols() == 0) {
    GammaEstimate est;
    est.gamma = Eigen::VectorXd::Zero(0);
    est.intercept = y.mean();
    est.method = GammaMethod::ridge;
    return est;
  }
  CenteredSvd c = centered_svd(y, w);
  const Eigen::VectorXd& s = c.svd.singularValues();
  if (lambda == 0.0) {
    const double tol = kRankTolerance * s.size() * s.maxCoeff();
    if (s.minCoeff() <= tol)
      throw SingularDesign("ridge_fit: lambda = 0 needs a full-rank design");
  }
  Eigen::VectorXd shrink(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i)
    shrink(i) = s(i) / (s(i) * s(i) + lambda);
  GammaEstimate est;
  est.gamma = c.svd.matrixV() * shrink.asDiagonal() * c.uty;
  est.intercept = c.y_mean - c.col_means * est.gamma;
  est.method = GammaMethod::ridge;
  return est;
}

double ridge_gcv_lambda(const Eigen::VectorXd& y, const Eigen::MatrixXd& w,
                        const RidgeOptions& opts) {
  CenteredSvd c = centered_svd(y, w);
  const Eigen::VectorXd& s = c.svd.singularValues();
  const double ell = static_cast<double>(y.size());
  const double total_ss =
      (y.array() - c.y_mean).matrix().squaredNorm();
  double best_lambda = 0.0;
  double best_score = std::numeric_limits<double>::infinity();
  for (int g = 0; g < opts.grid_points; ++g) {
    const double t = opts.grid_points == 1
                         ? 0.0
                         : static_cast<double>(g) / (opts.grid_points - 1);
    const double lambda =
        std::pow(10.0, opts.log10_min + t * (opts.log10_max - opts.log10_min));
    double rss = total_ss;
    double df = 1.0;  // intercept
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      const double h = s(i) * s(i) / (s(i) * s(i) + lambda);
      rss += (h * h - 2.0 * h) * c.uty(i) * c.uty(i);
      df += h;
    }
    rss = std::max(rss, 0.0);
    const double denom = ell - df;
    if (denom <= 0.0) continue;
    const double score = ell * rss / (denom * denom);
    if (score < best_score) {
      best_score = score;
      best_lambda = lambda;
    }
  }
  if (!std::isfinite(best_score))
    throw DegenerateStatistic("ridge_gcv_lambda: no usable grid point");
  return best_lambda;
}

const InferenceRow& InferenceTable::row(const std::string& name) const {
  for (const auto& r : rows)
    if (r.name == name) return r;
  throw InvalidArgument("inference table: no row named " + name);
}

InferenceTable ols_inference_table(const Dataset& data) {
  Eigen::MatrixXd design(data.rows(), data.d() + data.q());
  design.leftCols(data.d()) = data.x;
  design.rightCols(data.q()) = data.w;
  std::vector<std::string> names;
  for (Eigen::Index j = 0; j < data.d(); ++j)
    names.push_back(!data.names_x.empty()
                        ? data.names_x[static_cast<std::size_t>(j)]
                        : "x" + std::to_string(j + 1));
  for (Eigen::Index j = 0; j < data.q(); ++j)
    names.push_back(!data.names_w.empty()
                        ? data.names_w[static_cast<std::size_t>(j)]
                        : "w" + std::to_string(j + 1));
  OlsFit fit = ols_fit(data.y, design, /*with_intercept=*/true, names);
  if (fit.dof < 1)
    throw InvalidArgument("ols_inference_table: no residual degrees of freedom");
  InferenceTable table;
  table.dof = fit.dof;
  table.sigma2_hat = fit.sigma2_hat;
  std::vector<std::string> labels;
  labels.push_back("intercept");
  labels.insert(labels.end(), names.begin(), names.end());
  for (Eigen::Index i = 0; i < fit.coefficients.size(); ++i) {
    InferenceRow row;
    row.name = labels[static_cast<std::size_t>(i)];
    row.coefficient = fit.coefficients(i);
    row.stderr_value = fit.stderrs(i);
    row.t_stat = fit.t_stats(i);
    row.p_value = fit.p_values(i);
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace rsc
