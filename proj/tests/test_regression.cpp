#include <doctest.h>

#include <cmath>

#include "rsc/oracle.hpp"
#include "rsc/regression.hpp"
#include "rsc/rng.hpp"
#include "rsc/sem.hpp"

using namespace rsc;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> xs) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

}  // namespace

TEST_CASE("ols exact and hand-computed fits") {
  Eigen::MatrixXd x(3, 1);
  x << 1, 2, 3;
  const OlsFit exact = ols_fit(vec({1, 2, 3}), x, true);
  CHECK(exact.coefficients(0) == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(exact.coefficients(1) == doctest::Approx(1.0));
  CHECK(exact.residuals.norm() < 1e-10);

  const OlsFit constant = ols_fit(vec({2, 2, 2}), x, true);
  CHECK(constant.coefficients(0) == doctest::Approx(2.0));
  CHECK(constant.coefficients(1) == doctest::Approx(0.0).epsilon(1e-10));

  // Sxy = 3, Sxx = 2 -> slope 1.5, intercept 7/6
  Eigen::MatrixXd x2(3, 1);
  x2 << 0, 1, 2;
  const OlsFit hand = ols_fit(vec({1, 3, 4}), x2, true);
  CHECK(hand.coefficients(1) == doctest::Approx(1.5));
  CHECK(hand.coefficients(0) == doctest::Approx(7.0 / 6.0));
}

TEST_CASE("ols residuals are orthogonal to the design") {
  RngStream rng = substream(1, "ols.orth");
  Eigen::MatrixXd design(50, 3);
  Eigen::VectorXd y(50);
  for (int i = 0; i < 50; ++i) {
    for (int j = 0; j < 3; ++j) design(i, j) = rng.next_gaussian();
    y(i) = rng.next_gaussian();
  }
  const OlsFit fit = ols_fit(y, design, true);
  CHECK((design.transpose() * fit.residuals).norm() < 1e-8 * y.norm());
  CHECK(std::abs(fit.residuals.sum()) < 1e-8 * y.norm());
  CHECK(fit.dof == 50 - 4);
}

TEST_CASE("singular design names the offending column") {
  Eigen::MatrixXd design(6, 2);
  design.col(0) = vec({1, 2, 3, 4, 5, 6});
  design.col(1) = 2.0 * design.col(0);
  try {
    ols_fit(vec({1, 0, 1, 0, 1, 0}), design, true, {"first", "second"});
    FAIL("expected SingularDesign");
  } catch (const SingularDesign& e) {
    const std::string what = e.what();
    const bool names_one = what.find("first") != std::string::npos ||
                           what.find("second") != std::string::npos;
    CHECK(names_one);
  }
}

TEST_CASE("ols inference matches explicit normal-equation route") {
  RngStream rng = substream(2, "ols.inf");
  const int n = 40;
  Eigen::MatrixXd design(n, 2);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    design(i, 0) = rng.next_gaussian();
    design(i, 1) = rng.next_gaussian();
    y(i) = 1.0 + 0.5 * design(i, 0) + rng.next_gaussian();
  }
  const OlsFit fit = ols_fit(y, design, true);

  Eigen::MatrixXd full(n, 3);
  full.col(0).setOnes();
  full.rightCols(2) = design;
  const Eigen::MatrixXd xtx_inv = (full.transpose() * full).inverse();
  const Eigen::VectorXd coef = xtx_inv * full.transpose() * y;
  const double s2 = (y - full * coef).squaredNorm() / (n - 3);
  for (int j = 0; j < 3; ++j) {
    CHECK(fit.coefficients(j) == doctest::Approx(coef(j)).epsilon(1e-8));
    CHECK(fit.stderrs(j) ==
          doctest::Approx(std::sqrt(s2 * xtx_inv(j, j))).epsilon(1e-8));
  }
}

TEST_CASE("beta_hat_subset recovers beta on noiseless data") {
  RngStream rng = substream(3, "bhs");
  const int ell = 60, d = 2, q = 4;
  Eigen::MatrixXd x(ell, d), w(ell, q);
  for (int i = 0; i < ell; ++i) {
    for (int j = 0; j < d; ++j) x(i, j) = rng.next_gaussian();
    for (int j = 0; j < q; ++j) w(i, j) = rng.next_gaussian();
  }
  const Eigen::VectorXd beta = vec({1.5, -2.0});
  const Eigen::VectorXd gamma = vec({0.0, 1.0, 0.0, -0.5});
  const Eigen::VectorXd y = x * beta + w * gamma;
  // support(gamma) = {1, 3} is inside S
  const Eigen::VectorXd est = beta_hat_subset(Dataset(y, x, w), {1, 3});
  CHECK((est - beta).norm() < 1e-10);
}

TEST_CASE("beta_hat_subset equals the X block of ols_fit") {
  const SemParams p = generate_sem_params(2, 8, 2, 1.0, 2.0, 31);
  const Dataset data = sample_dataset(p, 120, 5);
  const std::vector<int> subset{1, 4, 6};
  const Eigen::VectorXd direct = beta_hat_subset(data, subset);

  Eigen::MatrixXd design(data.rows(), 2 + 3);
  design.leftCols(2) = data.x;
  for (int j = 0; j < 3; ++j)
    design.col(2 + j) = data.w.col(subset[static_cast<std::size_t>(j)]);
  const OlsFit fit = ols_fit(data.y, design, true);
  CHECK((direct - fit.coefficients.segment(1, 2)).norm() < 1e-10);
}

TEST_CASE("Frisch-Waugh: residualized regression gives the same beta") {
  const SemParams p = generate_sem_params(2, 6, 2, 1.0, 1.0, 37);
  const Dataset data = sample_dataset(p, 100, 9);
  const std::vector<int> subset{0, 2, 5};
  const Eigen::VectorXd direct = beta_hat_subset(data, subset);

  Eigen::MatrixXd ws(data.rows(), 3);
  for (int j = 0; j < 3; ++j)
    ws.col(j) = data.w.col(subset[static_cast<std::size_t>(j)]);
  auto residualize = [&](const Eigen::VectorXd& v) {
    const OlsFit fit = ols_fit(v, ws, true);
    return fit.residuals;
  };
  const Eigen::VectorXd y_res = residualize(data.y);
  Eigen::MatrixXd x_res(data.rows(), 2);
  for (int j = 0; j < 2; ++j) x_res.col(j) = residualize(data.x.col(j));
  const OlsFit reduced = ols_fit(y_res, x_res, true);
  CHECK((reduced.coefficients.segment(1, 2) - direct).norm() <
        1e-8 * (1.0 + direct.norm()));
}

TEST_CASE("beta_hat_subset approaches the population value") {
  // d=1, q=2, r=1, b=1, a=(1,1), gamma=(0,1), beta=0, S={0}: bias 1/3.
  SemParams p;
  p.a = Eigen::MatrixXd::Ones(2, 1);
  p.b = Eigen::MatrixXd::Ones(1, 1);
  p.beta = vec({0.0});
  p.gamma = vec({0.0, 1.0});
  p.sigma_z = Eigen::VectorXd::Ones(1);
  p.sigma_w = Eigen::VectorXd::Ones(2);
  p.sigma_x = Eigen::VectorXd::Ones(1);
  const Dataset data = sample_dataset(p, 200000, 17);
  const Eigen::VectorXd est = beta_hat_subset(data, {0});
  CHECK(est(0) == doctest::Approx(1.0 / 3.0).epsilon(0.06));

  // and the generic oracle agreement at moderate ell
  const SemParams p2 = generate_sem_params(1, 10, 2, 1.0, 2.0, 41);
  const Dataset data2 = sample_dataset(p2, 100000, 19);
  const std::vector<int> subset{1, 3, 8};
  const Eigen::VectorXd pop = population_beta_hat(p2, subset);
  const Eigen::VectorXd fin = beta_hat_subset(data2, subset);
  CHECK((fin - pop).norm() < 0.05);
}

TEST_CASE("gamma_hat_submodel") {
  RngStream rng = substream(4, "ghs");
  const int ell = 50, q = 5;
  Eigen::MatrixXd w(ell, q);
  for (int i = 0; i < ell; ++i)
    for (int j = 0; j < q; ++j) w(i, j) = rng.next_gaussian();
  const Eigen::VectorXd gamma = vec({0.0, 2.0, 0.0, -1.0, 0.0});
  const Eigen::VectorXd y = w * gamma;  // noiseless, support {1, 3}
  const GammaEstimate est = gamma_hat_submodel(y, w, {1, 3});
  CHECK((est.gamma - gamma).norm() < 1e-10);
  CHECK(est.gamma(0) == 0.0);
  CHECK(est.gamma(2) == 0.0);
  CHECK(est.gamma(4) == 0.0);

  // agrees with ols_fit on the restricted design
  Eigen::MatrixXd restricted(ell, 2);
  restricted.col(0) = w.col(1);
  restricted.col(1) = w.col(3);
  Eigen::VectorXd y2 = y + w.col(0);  // add misfit so the fit is nontrivial
  const GammaEstimate est2 = gamma_hat_submodel(y2, w, {1, 3});
  const OlsFit fit = ols_fit(y2, restricted, true);
  CHECK(est2.gamma(1) == doctest::Approx(fit.coefficients(1)).epsilon(1e-12));
  CHECK(est2.gamma(3) == doctest::Approx(fit.coefficients(2)).epsilon(1e-12));
  CHECK(est2.intercept == doctest::Approx(fit.coefficients(0)).epsilon(1e-12));
}

TEST_CASE("model_average_gamma") {
  const SemParams p = generate_sem_params(1, 6, 1, 0.0, 1.0, 51);
  const Dataset data = sample_dataset(p, 80, 3);

  const SubsetFamily single(6, {{0, 2}});
  const GammaEstimate avg1 = model_average_gamma(data.y, data.w, single);
  const GammaEstimate sub = gamma_hat_submodel(data.y, data.w, {0, 2});
  CHECK((avg1.gamma - sub.gamma).norm() < 1e-12);

  const SubsetFamily repeated(6, {{0, 2}, {0, 2}, {0, 2}});
  const GammaEstimate avg3 = model_average_gamma(data.y, data.w, repeated);
  CHECK((avg3.gamma - sub.gamma).norm() < 1e-12);

  // disjoint subsets: mean of padded fits
  const SubsetFamily disjoint(6, {{0, 1}, {3, 4}});
  const GammaEstimate avg = model_average_gamma(data.y, data.w, disjoint);
  const GammaEstimate s1 = gamma_hat_submodel(data.y, data.w, {0, 1});
  const GammaEstimate s2 = gamma_hat_submodel(data.y, data.w, {3, 4});
  CHECK((avg.gamma - 0.5 * (s1.gamma + s2.gamma)).norm() < 1e-12);

  // order invariance under uniform weights
  const SubsetFamily flipped(6, {{3, 4}, {0, 1}});
  const GammaEstimate avg_f = model_average_gamma(data.y, data.w, flipped);
  CHECK((avg.gamma - avg_f.gamma).norm() < 1e-12);

  // weight validation
  CHECK_THROWS_AS(model_average_gamma(data.y, data.w, disjoint, vec({0.5})),
                  InvalidArgument);
  CHECK_THROWS_AS(
      model_average_gamma(data.y, data.w, disjoint, vec({-0.2, 1.2})),
      InvalidArgument);
  CHECK_THROWS_AS(
      model_average_gamma(data.y, data.w, disjoint, vec({0.6, 0.6})),
      InvalidArgument);
}

TEST_CASE("xic weights") {
  // equal scores -> uniform
  CHECK((xic_weights_from_scores(vec({5.0, 5.0, 5.0})) -
         Eigen::VectorXd::Constant(3, 1.0 / 3))
            .norm() < 1e-12);
  // score gap d -> ratio exp(-d/2); huge scores must not overflow
  const Eigen::VectorXd w2 = xic_weights_from_scores(vec({1e6, 1e6 + 2.0}));
  CHECK(w2(0) == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))).epsilon(1e-9));
  CHECK(w2(1) == doctest::Approx(std::exp(-1.0) / (1.0 + std::exp(-1.0)))
                     .epsilon(1e-9));
  CHECK(w2.sum() == doctest::Approx(1.0).epsilon(1e-12));
  // shift invariance
  const Eigen::VectorXd base = xic_weights_from_scores(vec({1.0, 2.5, 4.0}));
  const Eigen::VectorXd shifted =
      xic_weights_from_scores(vec({101.0, 102.5, 104.0}));
  CHECK((base - shifted).norm() < 1e-12);

  // end-to-end: identical subsets get equal weight
  const SemParams p = generate_sem_params(1, 6, 1, 0.0, 1.0, 61);
  const Dataset data = sample_dataset(p, 70, 3);
  const SubsetFamily twice(6, {{1, 2}, {1, 2}});
  const Eigen::VectorXd w_aic =
      xic_weights(data.y, data.w, twice, XicKind::aic);
  CHECK(w_aic(0) == doctest::Approx(0.5).epsilon(1e-12));
  // BIC penalizes size more than AIC for ell > e^1: the smaller model
  // gains weight under BIC on equal fits.
  const SubsetFamily mixed(6, {{1}, {0, 2, 3, 4}});
  const Eigen::VectorXd wa = xic_weights(data.y, data.w, mixed, XicKind::aic);
  const Eigen::VectorXd wb = xic_weights(data.y, data.w, mixed, XicKind::bic);
  CHECK(wb(0) / wb(1) > wa(0) / wa(1));

  // perfect fit is degenerate
  Eigen::MatrixXd w_exact(8, 2);
  RngStream rng = substream(5, "xic");
  for (int i = 0; i < 8; ++i) {
    w_exact(i, 0) = rng.next_gaussian();
    w_exact(i, 1) = rng.next_gaussian();
  }
  const Eigen::VectorXd y_exact = 2.0 * w_exact.col(0);
  CHECK_THROWS_AS(
      xic_weights(y_exact, w_exact, SubsetFamily(2, {{0}}), XicKind::aic),
      DegenerateStatistic);
}

TEST_CASE("ridge closed form and limits") {
  // single centered column, x'x = 2, x'y = 4, lambda = 2 -> gamma = 1
  Eigen::MatrixXd w(4, 1);
  w << 1, -1, 0, 0;
  const Eigen::VectorXd y = vec({2, -2, 0, 0});
  const GammaEstimate fit = ridge_fit(y, w, 2.0);
  CHECK(fit.gamma(0) == doctest::Approx(1.0).epsilon(1e-10));

  // lambda = 0 equals OLS
  const SemParams p = generate_sem_params(1, 4, 1, 0.0, 1.0, 71);
  const Dataset data = sample_dataset(p, 60, 3);
  const GammaEstimate ridge0 = ridge_fit(data.y, data.w, 0.0);
  const GammaEstimate ols = gamma_hat_submodel(data.y, data.w, {0, 1, 2, 3});
  CHECK((ridge0.gamma - ols.gamma).norm() < 1e-8);
  CHECK(ridge0.intercept == doctest::Approx(ols.intercept).epsilon(1e-6));

  // norm is non-increasing in lambda, and huge lambda kills the fit
  double last = ridge_fit(data.y, data.w, 0.0).gamma.norm();
  for (double lambda : {0.1, 1.0, 10.0, 1e4, 1e8}) {
    const double norm = ridge_fit(data.y, data.w, lambda).gamma.norm();
    CHECK(norm <= last + 1e-12);
    last = norm;
  }
  CHECK(last < 1e-3);

  // continuity in lambda
  const double at1 = ridge_fit(data.y, data.w, 1.0).gamma.norm();
  const double at1eps = ridge_fit(data.y, data.w, 1.0 + 1e-9).gamma.norm();
  CHECK(at1 == doctest::Approx(at1eps).epsilon(1e-6));

  // lambda = 0 on a singular design fails loudly
  Eigen::MatrixXd w_sing(6, 2);
  w_sing.col(0) = vec({1, 2, 3, 4, 5, 6});
  w_sing.col(1) = 3.0 * w_sing.col(0);
  CHECK_THROWS_AS(ridge_fit(vec({1, 0, 1, 0, 1, 0}), w_sing, 0.0),
                  SingularDesign);
  CHECK_NOTHROW(ridge_fit(vec({1, 0, 1, 0, 1, 0}), w_sing, 0.5));
}

TEST_CASE("gcv picks a sensible penalty") {
  // pure-noise response: heavy shrinkage wins
  RngStream rng = substream(6, "gcv");
  const int ell = 100, q = 30;
  Eigen::MatrixXd w(ell, q);
  Eigen::VectorXd noise(ell);
  for (int i = 0; i < ell; ++i) {
    for (int j = 0; j < q; ++j) w(i, j) = rng.next_gaussian();
    noise(i) = rng.next_gaussian();
  }
  const double lambda_noise = ridge_gcv_lambda(noise, w);
  // strong-signal response: light shrinkage wins
  const Eigen::VectorXd y_signal = w.col(0) * 3.0 + 0.01 * noise;
  const double lambda_signal = ridge_gcv_lambda(y_signal, w);
  CHECK(lambda_noise > lambda_signal);
  CHECK(lambda_signal <= 1.0);
}

TEST_CASE("ols_inference_table") {
  RngStream rng = substream(7, "table");
  const int ell = 200;
  Eigen::MatrixXd x(ell, 1), w(ell, 2);
  Eigen::VectorXd y(ell);
  for (int i = 0; i < ell; ++i) {
    x(i, 0) = rng.next_gaussian();
    w(i, 0) = rng.next_gaussian();
    w(i, 1) = rng.next_gaussian();
    y(i) = 2.0 * x(i, 0) + 1.0 * w(i, 0) + 0.05 * rng.next_gaussian();
  }
  const Dataset data(y, x, w, {"cause"}, {"bg1", "bg2"});
  const InferenceTable table = ols_inference_table(data);
  REQUIRE(table.rows.size() == 4);
  CHECK(table.rows[0].name == "intercept");
  CHECK(table.row("cause").coefficient == doctest::Approx(2.0).epsilon(0.01));
  CHECK(table.row("cause").p_value < 1e-10);
  CHECK(table.row("bg1").p_value < 1e-10);
  CHECK(table.row("bg2").p_value > 1e-6);  // inactive regressor
  CHECK_THROWS_AS(table.row("missing"), InvalidArgument);
}

TEST_CASE("null-regressor p-values are roughly uniform") {
  // Under the null the t p-value is exactly U(0,1); check mean and spread
  // over independent replications.
  RngStream rng = substream(8, "pnull");
  const int reps = 200, ell = 60;
  double sum = 0.0;
  int below_half = 0;
  for (int repetition = 0; repetition < reps; ++repetition) {
    Eigen::MatrixXd x(ell, 1);
    Eigen::VectorXd y(ell);
    for (int i = 0; i < ell; ++i) {
      x(i, 0) = rng.next_gaussian();
      y(i) = rng.next_gaussian();
    }
    const OlsFit fit = ols_fit(y, x, true);
    const double p = fit.p_values(1);
    sum += p;
    if (p < 0.5) ++below_half;
  }
  CHECK(sum / reps == doctest::Approx(0.5).epsilon(0.15));
  CHECK(std::abs(below_half - reps / 2) < 5.0 * std::sqrt(reps * 0.25));
}
