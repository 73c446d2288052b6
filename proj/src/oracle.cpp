#include "rsc/oracle.hpp"

#include <cmath>
#include <limits>

#include "rsc/rng.hpp"

namespace rsc {

namespace {

// Rescales so sigma_z = 1: A <- A diag(sigma_z), B <- B diag(sigma_z).
void fold_sigma_z(const SemParams& params, Eigen::MatrixXd& a,
                  Eigen::MatrixXd& b) {
  a = params.a * params.sigma_z.asDiagonal();
  b = params.b * params.sigma_z.asDiagonal();
}

Eigen::LLT<Eigen::MatrixXd> factor_subset_covariance(
    const PopulationModel& model, const std::vector<int>& subset,
    Eigen::VectorXi& idx_out) {
  const int d = model.params.d();
  const int q = model.params.q();
  const int k = static_cast<int>(subset.size());
  Eigen::VectorXi idx(d + k);
  for (int i = 0; i < d; ++i) idx(i) = i;
  for (int j = 0; j < k; ++j) {
    if (subset[static_cast<std::size_t>(j)] < 0 ||
        subset[static_cast<std::size_t>(j)] >= q)
      throw InvalidArgument("population oracle: subset index out of range");
    idx(d + j) = d + subset[static_cast<std::size_t>(j)];
  }
  Eigen::MatrixXd sub = model.cov_xw(idx, idx);
  Eigen::LLT<Eigen::MatrixXd> llt(sub);
  if (llt.info() != Eigen::Success)
    throw SingularDesign("population covariance block is not positive definite");
  idx_out = std::move(idx);
  return llt;
}

}  // namespace

Eigen::VectorXd PopulationModel::cov_with_y() const {
  return cov_with_y(params.beta, params.gamma);
}

Eigen::VectorXd PopulationModel::cov_with_y(const Eigen::VectorXd& beta,
                                            const Eigen::VectorXd& gamma) const {
  Eigen::VectorXd bg(params.d() + params.q());
  bg.head(params.d()) = beta;
  bg.tail(params.q()) = gamma;
  return cov_xw * bg;
}

PopulationModel population_covariance(const SemParams& params) {
  params.validate();
  const int d = params.d(), q = params.q();
  Eigen::MatrixXd a, b;
  fold_sigma_z(params, a, b);
  PopulationModel model;
  model.params = params;
  model.cov_xw.resize(d + q, d + q);
  model.cov_xw.topLeftCorner(d, d) =
      b * b.transpose() +
      Eigen::MatrixXd(params.sigma_x.array().square().matrix().asDiagonal());
  model.cov_xw.bottomRightCorner(q, q) =
      a * a.transpose() +
      Eigen::MatrixXd(params.sigma_w.array().square().matrix().asDiagonal());
  model.cov_xw.topRightCorner(d, q) = b * a.transpose();
  model.cov_xw.bottomLeftCorner(q, d) =
      model.cov_xw.topRightCorner(d, q).transpose();
  return model;
}

Eigen::VectorXd population_beta_hat(const PopulationModel& model,
                                    const std::vector<int>& subset) {
  Eigen::VectorXi idx;
  const auto llt = factor_subset_covariance(model, subset, idx);
  const Eigen::VectorXd cy = model.cov_with_y();
  Eigen::VectorXd rhs(idx.size());
  for (Eigen::Index i = 0; i < idx.size(); ++i) rhs(i) = cy(idx(i));
  return llt.solve(rhs).head(model.params.d());
}

Eigen::VectorXd population_beta_hat(const SemParams& params,
                                    const std::vector<int>& subset) {
  return population_beta_hat(population_covariance(params), subset);
}

ConfoundingMap confounding_matrix(const PopulationModel& model,
                                  const std::vector<int>& subset) {
  const int d = model.params.d();
  const int q = model.params.q();
  Eigen::VectorXi idx;
  const auto llt = factor_subset_covariance(model, subset, idx);
  // Column j of C(S) is the top-d block of the solve against
  // Cov((X, W_S), Y) evaluated at beta = 0, gamma = e_j; assembling all
  // basis vectors at once turns that into one multi-rhs solve.
  Eigen::MatrixXd rhs(idx.size(), q);
  for (Eigen::Index i = 0; i < idx.size(); ++i)
    rhs.row(i) = model.cov_xw.row(idx(i)).tail(q);
  Eigen::MatrixXd solved = llt.solve(rhs);
  ConfoundingMap map;
  map.subset = subset;
  map.c = solved.topRows(d);
  for (int j : subset) map.c.col(j).setZero();
  return map;
}

ConfoundingMap confounding_matrix(const SemParams& params,
                                  const std::vector<int>& subset) {
  return confounding_matrix(population_covariance(params), subset);
}

namespace {

struct R1Terms {
  Eigen::VectorXd a;       // q, sigma_z folded in
  Eigen::VectorXd b;       // d
  Eigen::VectorXd dir;     // Dx^-1 b
  double b_norm_sq = 0.0;  // ||b||_x^2

  double denom(const SemParams& params, const std::vector<int>& subset) const {
    double a_norm_sq = 0.0;
    for (int i : subset)
      a_norm_sq += a(i) * a(i) / (params.sigma_w(i) * params.sigma_w(i));
    return 1.0 + b_norm_sq + a_norm_sq;
  }
};

R1Terms r1_terms(const SemParams& params) {
  if (params.r() != 1)
    throw InvalidArgument("closed form requires r = 1");
  R1Terms t;
  Eigen::MatrixXd a, b;
  fold_sigma_z(params, a, b);
  t.a = a.col(0);
  t.b = b.col(0);
  t.dir = t.b.array() / params.sigma_x.array().square();
  t.b_norm_sq = t.b.dot(t.dir);
  return t;
}

}  // namespace

ConfoundingMap confounding_matrix_r1(const SemParams& params,
                                     const std::vector<int>& subset) {
  const R1Terms t = r1_terms(params);
  const double denom = t.denom(params, subset);
  ConfoundingMap map;
  map.subset = subset;
  map.c = Eigen::MatrixXd::Zero(params.d(), params.q());
  std::vector<char> in_subset(static_cast<std::size_t>(params.q()), 0);
  for (int i : subset) in_subset[static_cast<std::size_t>(i)] = 1;
  for (int j = 0; j < params.q(); ++j)
    if (!in_subset[static_cast<std::size_t>(j)])
      map.c.col(j) = (t.a(j) / denom) * t.dir;
  return map;
}

Eigen::MatrixXd sigma_matrix(const SemParams& params,
                             const SubsetFamily& family) {
  const R1Terms t = r1_terms(params);
  if (family.q != params.q())
    throw InvalidArgument("sigma_matrix: family/params dimension mismatch");
  const int m = family.count();
  const int q = params.q();
  std::vector<std::vector<char>> in_subset(
      static_cast<std::size_t>(m),
      std::vector<char>(static_cast<std::size_t>(q), 0));
  Eigen::VectorXd denom(m);
  for (int j = 0; j < m; ++j) {
    for (int i : family.subsets[static_cast<std::size_t>(j)])
      in_subset[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = 1;
    denom(j) = t.denom(params, family.subsets[static_cast<std::size_t>(j)]);
  }
  Eigen::MatrixXd sigma(m, m);
  for (int i = 0; i < m; ++i) {
    for (int j = i; j < m; ++j) {
      double common = 0.0;
      for (int kk = 0; kk < q; ++kk)
        if (!in_subset[static_cast<std::size_t>(i)][static_cast<std::size_t>(kk)] &&
            !in_subset[static_cast<std::size_t>(j)][static_cast<std::size_t>(kk)])
          common += t.a(kk) * t.a(kk);
      sigma(i, j) = common / (denom(i) * denom(j));
      sigma(j, i) = sigma(i, j);
    }
  }
  return sigma;
}

Eigen::VectorXd bias_coordinates_r1(const SemParams& params,
                                    const SubsetFamily& family,
                                    const Eigen::VectorXd& gamma) {
  const R1Terms t = r1_terms(params);
  if (gamma.size() != params.q())
    throw InvalidArgument("bias_coordinates_r1: gamma length mismatch");
  const int m = family.count();
  Eigen::VectorXd v(m);
  for (int j = 0; j < m; ++j) {
    const auto& subset = family.subsets[static_cast<std::size_t>(j)];
    std::vector<char> in_subset(static_cast<std::size_t>(params.q()), 0);
    for (int i : subset) in_subset[static_cast<std::size_t>(i)] = 1;
    double num = 0.0;
    for (int i = 0; i < params.q(); ++i)
      if (!in_subset[static_cast<std::size_t>(i)]) num += t.a(i) * gamma(i);
    v(j) = num / t.denom(params, subset);
  }
  return v;
}

namespace {

struct CmTerms {
  Eigen::MatrixXd cm;      // d x q, mean of C(S_j)
  double tr_ctilde = 0.0;  // mean of ||C(S_j)||_F^2
  std::vector<ConfoundingMap> maps;
};

CmTerms cm_terms(const SemParams& params, const SubsetFamily& family) {
  if (family.q != params.q())
    throw InvalidArgument("family/params dimension mismatch");
  if (family.count() < 1) throw InvalidArgument("empty subset family");
  PopulationModel model = population_covariance(params);
  CmTerms out;
  out.cm = Eigen::MatrixXd::Zero(params.d(), params.q());
  const int m = family.count();
  out.maps.reserve(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) {
    ConfoundingMap map =
        confounding_matrix(model, family.subsets[static_cast<std::size_t>(j)]);
    out.cm += map.c;
    out.tr_ctilde += map.c.squaredNorm();
    out.maps.push_back(std::move(map));
  }
  out.cm /= m;
  out.tr_ctilde /= m;
  return out;
}

}  // namespace

double limit_constant_null(const SemParams& params,
                           const SubsetFamily& family) {
  const CmTerms t = cm_terms(params, family);
  if (t.tr_ctilde <= 0.0)
    throw DegenerateStatistic(
        "limit_constant_null: no confounding (tr Ctilde_m = 0)");
  return 1.0 - t.cm.squaredNorm() / t.tr_ctilde;
}

double limit_constant_null_r1(const SemParams& params,
                              const SubsetFamily& family) {
  const Eigen::MatrixXd sigma = sigma_matrix(params, family);
  const double trace = sigma.trace();
  if (trace <= 0.0)
    throw DegenerateStatistic("limit_constant_null_r1: tr Sigma = 0");
  const int m = family.count();
  const Eigen::VectorXd e = Eigen::VectorXd::Constant(m, 1.0 / std::sqrt(m));
  return 1.0 - e.dot(sigma * e) / trace;
}

std::pair<double, double> condition_strength(const SemParams& params,
                                             const SubsetFamily& family) {
  const CmTerms t = cm_terms(params, family);
  double sigma_term = std::numeric_limits<double>::quiet_NaN();
  if (params.r() == 1)
    sigma_term = sigma_matrix(params, family).trace() / family.count();
  return {t.tr_ctilde, sigma_term};
}

std::pair<double, double> stability_identity(const SemParams& params,
                                             const SubsetFamily& family,
                                             const Eigen::VectorXd& gamma) {
  if (params.rho_beta() != 0.0)
    throw InvalidArgument("stability_identity: requires beta = 0");
  SemParams p = params;
  p.gamma = gamma;
  PopulationModel model = population_covariance(p);
  const int m = family.count();
  RowMajorMatrix coeffs(m, p.d());
  for (int j = 0; j < m; ++j)
    coeffs.row(j) =
        population_beta_hat(model, family.subsets[static_cast<std::size_t>(j)])
            .transpose();
  const double v_pop = stability_statistic(CoefficientSet(std::move(coeffs)));

  const CmTerms t = cm_terms(p, family);
  double denom = 0.0;
  for (const auto& map : t.maps) denom += (map.c * gamma).squaredNorm();
  denom /= m;
  if (denom <= 0.0)
    throw DegenerateStatistic(
        "stability_identity: gamma lies in the null space of every C(S_j)");
  const double closed_form = 1.0 - (t.cm * gamma).squaredNorm() / denom;
  return {v_pop, closed_form};
}

Eigen::VectorXd sample_null_v_r1(const SemParams& params,
                                 const SubsetFamily& family, int n_draws,
                                 std::uint64_t seed) {
  if (n_draws < 1) throw InvalidArgument("sample_null_v_r1: n_draws >= 1");
  const Eigen::MatrixXd sigma = sigma_matrix(params, family);
  const int m = family.count();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma);
  if (eig.info() != Eigen::Success)
    throw DegenerateStatistic("sample_null_v_r1: eigendecomposition failed");
  const Eigen::VectorXd lambda = eig.eigenvalues();
  if (lambda.minCoeff() <= 1e-12 * std::max(lambda.maxCoeff(), 1e-300))
    throw DegenerateStatistic("sample_null_v_r1: Sigma is rank deficient");
  const Eigen::VectorXd e = Eigen::VectorXd::Constant(m, 1.0 / std::sqrt(m));
  const Eigen::VectorXd c = eig.eigenvectors().transpose() * e;
  RngStream rng = substream(seed, "nullv");
  Eigen::VectorXd draws(n_draws);
  for (int i = 0; i < n_draws; ++i) {
    double num = 0.0, den = 0.0;
    for (int j = 0; j < m; ++j) {
      const double g = rng.next_gaussian();
      num += c(j) * std::sqrt(lambda(j)) * g;
      den += lambda(j) * g * g;
    }
    draws(i) = 1.0 - num * num / den;
  }
  return draws;
}

double population_residual_cross_covariance(
    const SemParams& params, const std::vector<int>& conditioning_set) {
  if (params.d() != 1)
    throw InvalidArgument(
        "population_residual_cross_covariance: requires d = 1");
  PopulationModel model = population_covariance(params);
  const int q = params.q();
  const int k = static_cast<int>(conditioning_set.size());
  const Eigen::VectorXd cy = model.cov_with_y();
  const double cov_xy = cy(0);
  if (k == 0) return cov_xy;
  Eigen::VectorXi idx(k);
  for (int j = 0; j < k; ++j) {
    const int col = conditioning_set[static_cast<std::size_t>(j)];
    if (col < 0 || col >= q)
      throw InvalidArgument("conditioning index out of range");
    idx(j) = 1 + col;
  }
  Eigen::MatrixXd var_wc = model.cov_xw(idx, idx);
  Eigen::VectorXd cov_x_wc = model.cov_xw(Eigen::VectorXi::Constant(1, 0), idx)
                                 .transpose();
  Eigen::VectorXd cov_wc_y(k);
  for (int j = 0; j < k; ++j) cov_wc_y(j) = cy(idx(j));
  Eigen::LLT<Eigen::MatrixXd> llt(var_wc);
  if (llt.info() != Eigen::Success)
    throw SingularDesign("conditioning covariance is not positive definite");
  return cov_xy - cov_x_wc.dot(llt.solve(cov_wc_y));
}

}  // namespace rsc
