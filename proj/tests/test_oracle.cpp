#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

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

SemParams scalar_chain(double a1, double a2, double b, double beta,
                       double g1, double g2) {
  SemParams p;
  p.a = Eigen::MatrixXd(2, 1);
  p.a << a1, a2;
  p.b = Eigen::MatrixXd::Constant(1, 1, b);
  p.beta = vec({beta});
  p.gamma = vec({g1, g2});
  p.sigma_z = Eigen::VectorXd::Ones(1);
  p.sigma_w = Eigen::VectorXd::Ones(2);
  p.sigma_x = Eigen::VectorXd::Ones(1);
  return p;
}

SemParams random_params(RngStream& rng, int d, int q, int r,
                        bool unit_sigmas, double rho_beta) {
  SemParams p;
  p.a.resize(q, r);
  p.b.resize(d, r);
  for (int i = 0; i < q; ++i)
    for (int j = 0; j < r; ++j) p.a(i, j) = rng.next_gaussian();
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < r; ++j) p.b(i, j) = rng.next_gaussian();
  p.beta = sample_sphere(d, rho_beta, rng);
  p.gamma = sample_sphere(q, 0.5 + 2.0 * rng.next_unit(), rng);
  auto sigmas = [&rng, unit_sigmas](int n) {
    Eigen::VectorXd s = Eigen::VectorXd::Ones(n);
    if (!unit_sigmas)
      for (int i = 0; i < n; ++i) s(i) = 0.5 + 1.5 * rng.next_unit();
    return s;
  };
  p.sigma_z = sigmas(r);
  p.sigma_w = sigmas(q);
  p.sigma_x = sigmas(d);
  p.sigma_y = unit_sigmas ? 1.0 : 0.5 + rng.next_unit();
  return p;
}

std::vector<int> random_subset(RngStream& rng, int q) {
  const int k = 1 + static_cast<int>(rng.next_below(
                        static_cast<std::uint64_t>(q - 1)));
  return random_selection(q, k, 1, rng.next_u64()).subsets[0];
}

}  // namespace

TEST_CASE("population covariance closed cases") {
  // d = q = r = 1, a = b = sigma = 1: Var(X) = 2, Var(W) = 2, Cov = 1
  SemParams p;
  p.a = Eigen::MatrixXd::Ones(1, 1);
  p.b = Eigen::MatrixXd::Ones(1, 1);
  p.beta = vec({0.0});
  p.gamma = vec({0.0});
  p.sigma_z = p.sigma_w = p.sigma_x = Eigen::VectorXd::Ones(1);
  const PopulationModel model = population_covariance(p);
  CHECK(model.cov_xw(0, 0) == doctest::Approx(2.0));
  CHECK(model.cov_xw(1, 1) == doctest::Approx(2.0));
  CHECK(model.cov_xw(0, 1) == doctest::Approx(1.0));

  // A = 0, B = 0: Var(X) = diag(sigma_x^2), Cov(X, W) = 0
  SemParams indep = p;
  indep.a.setZero();
  indep.b.setZero();
  indep.sigma_x(0) = 1.7;
  const PopulationModel m2 = population_covariance(indep);
  CHECK(m2.cov_xw(0, 0) == doctest::Approx(1.7 * 1.7));
  CHECK(m2.cov_xw(0, 1) == 0.0);
}

TEST_CASE("population covariance matches the sample covariance") {
  RngStream rng = substream(1, "oracle.cov");
  const SemParams p = random_params(rng, 2, 4, 2, /*unit_sigmas=*/false, 0.8);
  const PopulationModel model = population_covariance(p);
  const int ell = 100000;
  const Dataset data = sample_dataset(p, ell, 33);
  Eigen::MatrixXd joint(ell, 6);
  joint.leftCols(2) = data.x;
  joint.rightCols(4) = data.w;
  Eigen::MatrixXd centered = joint.rowwise() - joint.colwise().mean();
  Eigen::MatrixXd sample = centered.transpose() * centered / ell;
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) {
      const double se = std::sqrt((model.cov_xw(i, i) * model.cov_xw(j, j) +
                                   model.cov_xw(i, j) * model.cov_xw(i, j)) /
                                  ell);
      CHECK(std::abs(sample(i, j) - model.cov_xw(i, j)) < 5.0 * se);
    }
}

TEST_CASE("population beta hat closed cases") {
  // blocked confounding: gamma supported inside S returns beta exactly
  RngStream rng = substream(2, "oracle.bh");
  SemParams p = random_params(rng, 2, 5, 2, true, 1.3);
  p.gamma = vec({0.0, 1.4, 0.0, -0.7, 0.0});
  const Eigen::VectorXd bh = population_beta_hat(p, {1, 3});
  CHECK((bh - p.beta).norm() < 1e-10);

  // the 1/3 bias example
  const SemParams chain = scalar_chain(1.0, 1.0, 1.0, 0.0, 0.0, 1.0);
  CHECK(population_beta_hat(chain, {0})(0) == doctest::Approx(1.0 / 3.0));

  // q = 1, S empty: beta + gamma a b / (1 + b^2)
  SemParams q1;
  q1.a = Eigen::MatrixXd::Constant(1, 1, 0.8);
  q1.b = Eigen::MatrixXd::Constant(1, 1, 1.3);
  q1.beta = vec({0.4});
  q1.gamma = vec({0.9});
  q1.sigma_z = q1.sigma_w = q1.sigma_x = Eigen::VectorXd::Ones(1);
  const double expect = 0.4 + 0.9 * 0.8 * 1.3 / (1.0 + 1.3 * 1.3);
  CHECK(population_beta_hat(q1, {})(0) == doctest::Approx(expect));
}

TEST_CASE("confounding matrix structure and linearity") {
  RngStream rng = substream(3, "oracle.cm");
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 1 + static_cast<int>(rng.next_below(3));
    const int q = 3 + static_cast<int>(rng.next_below(6));
    const int r = 1 + static_cast<int>(rng.next_below(3));
    const SemParams p = random_params(rng, d, q, r, false, 0.9);
    const std::vector<int> s = random_subset(rng, q);
    const PopulationModel model = population_covariance(p);
    const ConfoundingMap map = confounding_matrix(model, s);

    for (int j : s) CHECK(map.c.col(j).norm() == 0.0);

    // beta_hat(S) = beta + C(S) gamma for arbitrary gamma
    for (int check = 0; check < 3; ++check) {
      SemParams pg = p;
      pg.gamma = sample_sphere(q, 1.0 + rng.next_unit(), rng);
      const Eigen::VectorXd bh =
          population_beta_hat(population_covariance(pg), s);
      CHECK((bh - (p.beta + map.c * pg.gamma)).norm() < 1e-10);
    }
  }
}

TEST_CASE("single unobserved feature isolates one column") {
  RngStream rng = substream(4, "oracle.one");
  const int q = 5;
  const SemParams p = random_params(rng, 2, q, 2, true, 0.0);
  for (int j = 0; j < q; ++j) {
    std::vector<int> s;
    for (int i = 0; i < q; ++i)
      if (i != j) s.push_back(i);
    const ConfoundingMap map = confounding_matrix(p, s);
    for (int i = 0; i < q; ++i) {
      if (i == j)
        CHECK(map.c.col(i).norm() > 1e-8);
      else
        CHECK(map.c.col(i).norm() == 0.0);
    }
  }
}

TEST_CASE("no latent channel means no confounding") {
  RngStream rng = substream(5, "oracle.zero");
  SemParams p = random_params(rng, 1, 4, 1, false, 1.0);
  p.a.setZero();
  const ConfoundingMap map = confounding_matrix(p, {0, 2});
  CHECK(map.c.norm() == 0.0);
}

TEST_CASE("r = 1 closed form agrees with the basis construction") {
  RngStream rng = substream(6, "oracle.r1");
  for (int trial = 0; trial < 40; ++trial) {
    const int d = 1 + static_cast<int>(rng.next_below(3));
    const int q = 3 + static_cast<int>(rng.next_below(8));
    const SemParams p = random_params(rng, d, q, 1, false, 0.5);
    const std::vector<int> s = random_subset(rng, q);
    const ConfoundingMap basis = confounding_matrix(p, s);
    const ConfoundingMap closed = confounding_matrix_r1(p, s);
    CHECK((basis.c - closed.c).cwiseAbs().maxCoeff() < 1e-10);
  }
  const SemParams p2 = random_params(rng, 1, 4, 2, true, 0.0);
  CHECK_THROWS_AS(confounding_matrix_r1(p2, {0}), InvalidArgument);
}

TEST_CASE("sigma matrix worked example and structure") {
  // q=2, S1={0}, S2={1}, a=(1,1), b=1, unit sigmas -> diag(1/9, 1/9)
  const SemParams p = scalar_chain(1.0, 1.0, 1.0, 0.0, 0.0, 0.0);
  const SubsetFamily family(2, {{0}, {1}});
  const Eigen::MatrixXd sigma = sigma_matrix(p, family);
  CHECK(sigma(0, 0) == doctest::Approx(1.0 / 9.0));
  CHECK(sigma(1, 1) == doctest::Approx(1.0 / 9.0));
  CHECK(sigma(0, 1) == doctest::Approx(0.0));

  // identical subsets give identical entries; PSD
  RngStream rng = substream(7, "oracle.sig");
  const SemParams pr = random_params(rng, 1, 6, 1, true, 0.0);
  const SubsetFamily fam2(6, {{0, 1}, {0, 1}, {2, 4}});
  const Eigen::MatrixXd s2 = sigma_matrix(pr, fam2);
  CHECK(s2(0, 1) == doctest::Approx(s2(0, 0)));
  CHECK((s2 - s2.transpose()).norm() == 0.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s2);
  CHECK(eig.eigenvalues().minCoeff() > -1e-12);
}

TEST_CASE("bias coordinates have covariance (rho^2/q) Sigma") {
  RngStream rng = substream(8, "oracle.vcov");
  const int q = 12, m = 4;
  const SemParams p = random_params(rng, 1, q, 1, true, 0.0);
  const SubsetFamily family = random_selection(q, 4, m, 55);
  const Eigen::MatrixXd sigma = sigma_matrix(p, family);
  const double rho = 1.8;
  const int n = 4000;
  Eigen::MatrixXd second = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd gamma = sample_gaussian_prior(q, rho, rng);
    const Eigen::VectorXd v = bias_coordinates_r1(p, family, gamma);
    second += v * v.transpose();
  }
  second /= n;
  const Eigen::MatrixXd target = (rho * rho / q) * sigma;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      const double se = std::sqrt(
          (target(i, i) * target(j, j) + target(i, j) * target(i, j)) / n);
      CHECK(std::abs(second(i, j) - target(i, j)) < 5.0 * se);
    }
}

TEST_CASE("bias coordinates match the confounding map") {
  // beta_hat(S) - beta = v_j * Dx^-1 b for r = 1
  RngStream rng = substream(9, "oracle.vmap");
  const SemParams p = random_params(rng, 1, 8, 1, false, 0.0);
  const SubsetFamily family = random_selection(8, 3, 3, 77);
  const Eigen::VectorXd v = bias_coordinates_r1(p, family, p.gamma);
  // direction Dx^-1 b~ with b~ = b * sigma_z
  const double dir =
      p.b(0, 0) * p.sigma_z(0) / (p.sigma_x(0) * p.sigma_x(0));
  for (int j = 0; j < 3; ++j) {
    const Eigen::VectorXd bh = population_beta_hat(
        p, family.subsets[static_cast<std::size_t>(j)]);
    CHECK(bh(0) == doctest::Approx(v(j) * dir).epsilon(1e-10));
  }
}

TEST_CASE("limit constant trivial and worked cases") {
  const SemParams p = scalar_chain(1.0, 1.0, 1.0, 0.0, 0.0, 0.0);
  // identical subsets: Cm'Cm = Ctilde -> 0
  const SubsetFamily same(2, {{0}, {0}});
  CHECK(limit_constant_null(p, same) == doctest::Approx(0.0).epsilon(1e-12));
  // the disjoint two-subset example: 1 - (1/9)/(2/9) = 1/2
  const SubsetFamily disjoint(2, {{0}, {1}});
  CHECK(limit_constant_null(p, disjoint) == doctest::Approx(0.5));
  // no confounding channel
  SemParams zero = p;
  zero.a.setZero();
  CHECK_THROWS_AS(limit_constant_null(zero, disjoint), DegenerateStatistic);
}

TEST_CASE("limit constant: C route equals Sigma route at r = 1") {
  RngStream rng = substream(10, "oracle.limit");
  for (int trial = 0; trial < 20; ++trial) {
    const int q = 4 + static_cast<int>(rng.next_below(8));
    const SemParams p = random_params(rng, 1, q, 1, false, 0.0);
    const int k = 1 + static_cast<int>(rng.next_below(
                          static_cast<std::uint64_t>(q - 1)));
    const SubsetFamily family = random_selection(q, k, 4, rng.next_u64());
    const double via_c = limit_constant_null(p, family);
    const double via_sigma = limit_constant_null_r1(p, family);
    CHECK(std::abs(via_c - via_sigma) < 1e-10);
  }
}

TEST_CASE("condition strength diagnostics") {
  RngStream rng = substream(11, "oracle.cond");
  SemParams p = random_params(rng, 1, 6, 1, true, 0.0);
  const SubsetFamily family(6, {{0, 1}, {2, 3}});

  SemParams zero = p;
  zero.a.setZero();
  const auto z = condition_strength(zero, family);
  CHECK(z.first == doctest::Approx(0.0));
  CHECK(z.second == doctest::Approx(0.0));

  // r=1 scaling: mean ||C_j||_F^2 = (tr Sigma / m) * ||Dx^-1 b~||^2
  const auto val = condition_strength(p, family);
  const double dir_sq = std::pow(
      p.b(0, 0) * p.sigma_z(0) / (p.sigma_x(0) * p.sigma_x(0)), 2.0);
  CHECK(val.first == doctest::Approx(val.second * dir_sq).epsilon(1e-10));

  // partition regime: with ||a|| fixed the strength stays bounded in q
  double last = 0.0;
  for (int q : {20, 80, 320}) {
    SemParams grown;
    grown.a = Eigen::MatrixXd::Zero(q, 1);
    RngStream arng = substream(13, "oracle.a", static_cast<std::uint64_t>(q));
    grown.a.col(0) = sample_sphere(q, std::sqrt(5.0), arng);
    grown.b = Eigen::MatrixXd::Ones(1, 1);
    grown.beta = vec({0.0});
    grown.gamma = Eigen::VectorXd::Zero(q);
    grown.sigma_z = Eigen::VectorXd::Ones(1);
    grown.sigma_w = Eigen::VectorXd::Ones(q);
    grown.sigma_x = Eigen::VectorXd::Ones(1);
    const auto strength =
        condition_strength(grown, partition_selection(q, 10));
    CHECK(strength.first < 5.0);  // bounded regardless of q
    last = strength.first;
  }
  CHECK(last < 5.0);
}

TEST_CASE("stability identity is exact") {
  RngStream rng = substream(12, "oracle.id");
  for (int trial = 0; trial < 25; ++trial) {
    const int d = 1 + static_cast<int>(rng.next_below(2));
    const int q = 4 + static_cast<int>(rng.next_below(6));
    const int r = 1 + static_cast<int>(rng.next_below(2));
    SemParams p = random_params(rng, d, q, r, false, 0.0);
    const int k = 1 + static_cast<int>(rng.next_below(
                          static_cast<std::uint64_t>(q - 1)));
    const SubsetFamily family =
        random_selection(q, k, 2 + static_cast<int>(rng.next_below(4)),
                         rng.next_u64());
    const Eigen::VectorXd gamma = sample_sphere(q, 1.5, rng);
    const auto [v_pop, closed] = stability_identity(p, family, gamma);
    CHECK(std::abs(v_pop - closed) < 1e-10);
  }

  // m = 1: both sides zero
  SemParams p1 = random_params(rng, 1, 5, 1, true, 0.0);
  const auto [v1, c1] =
      stability_identity(p1, SubsetFamily(5, {{0, 1}}), p1.gamma);
  CHECK(v1 == doctest::Approx(0.0));
  CHECK(c1 == doctest::Approx(0.0));

  // gamma in the null space of every C(S_j): a = 0 kills all maps
  SemParams pz = random_params(rng, 1, 5, 1, true, 0.0);
  pz.a.setZero();
  CHECK_THROWS_AS(
      stability_identity(pz, SubsetFamily(5, {{0}, {1}}), pz.gamma),
      DegenerateStatistic);

  // beta != 0 is rejected
  SemParams pb = random_params(rng, 1, 5, 1, true, 1.0);
  CHECK_THROWS_AS(
      stability_identity(pb, SubsetFamily(5, {{0}, {1}}), pb.gamma),
      InvalidArgument);
}

TEST_CASE("null law sampler") {
  RngStream rng = substream(14, "oracle.null");
  // Sigma = c I: complements disjoint with equal norms -> mean 1 - 1/m
  SemParams p;
  const int q = 4;
  p.a = Eigen::MatrixXd::Ones(q, 1);
  p.b = Eigen::MatrixXd::Ones(1, 1);
  p.beta = vec({0.0});
  p.gamma = Eigen::VectorXd::Zero(q);
  p.sigma_z = Eigen::VectorXd::Ones(1);
  p.sigma_w = Eigen::VectorXd::Ones(q);
  p.sigma_x = Eigen::VectorXd::Ones(1);
  const SubsetFamily family(q, {{0, 1}, {2, 3}});
  const Eigen::VectorXd draws = sample_null_v_r1(p, family, 20000, 99);
  CHECK(draws.minCoeff() >= 0.0);
  CHECK(draws.maxCoeff() <= 1.0);
  CHECK(draws.mean() == doctest::Approx(0.5).epsilon(0.02));

  // route equivalence: same law as the gamma-route statistic
  const SemParams pr = random_params(rng, 1, 10, 1, true, 0.0);
  const SubsetFamily fam = random_selection(10, 3, 4, 11);
  const int n = 8000;
  const Eigen::VectorXd g_route = sample_null_v_r1(pr, fam, n, 7);
  std::vector<double> gamma_route;
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd gamma = sample_gaussian_prior(10, 1.0, rng);
    const Eigen::VectorXd v = bias_coordinates_r1(pr, fam, gamma);
    const double vsum = v.sum();
    gamma_route.push_back(1.0 - vsum * vsum / (v.squaredNorm() * fam.count()));
  }
  // two-sample Kolmogorov distance
  std::vector<double> a(g_route.data(), g_route.data() + n);
  std::sort(a.begin(), a.end());
  std::sort(gamma_route.begin(), gamma_route.end());
  double ks = 0.0;
  std::size_t ia = 0, ib = 0;
  while (ia < a.size() && ib < gamma_route.size()) {
    if (a[ia] <= gamma_route[ib])
      ++ia;
    else
      ++ib;
    ks = std::max(ks, std::abs(static_cast<double>(ia) / n -
                               static_cast<double>(ib) / n));
  }
  CHECK(ks < 0.035);  // 1.36 sqrt(2/n) ~ 0.0215 at the 5% level

  // rank-deficient Sigma is rejected
  const SubsetFamily repeat(q, {{0, 1}, {0, 1}});
  CHECK_THROWS_AS(sample_null_v_r1(p, repeat, 10, 1), DegenerateStatistic);
}

TEST_CASE("population residual cross covariance") {
  // Proposition-2 style setup: only W_1 loads on Z, condition on the rest.
  const int q = 6;
  SemParams p;
  p.a = Eigen::MatrixXd::Zero(q, 1);
  p.a(0, 0) = 2.0;
  p.b = Eigen::MatrixXd::Ones(1, 1);
  p.beta = vec({0.0});
  p.gamma = Eigen::VectorXd::Zero(q);
  p.gamma(0) = 0.5;
  p.sigma_z = Eigen::VectorXd::Ones(1);
  p.sigma_w = Eigen::VectorXd::Ones(q);
  p.sigma_x = Eigen::VectorXd::Ones(1);
  std::vector<int> rest;
  for (int i = 1; i < q; ++i) rest.push_back(i);
  CHECK(population_residual_cross_covariance(p, rest) ==
        doctest::Approx(1.0).epsilon(1e-12));

  SemParams pz = p;
  pz.a(0, 0) = 0.0;
  CHECK(population_residual_cross_covariance(pz, rest) ==
        doctest::Approx(0.0).epsilon(1e-12));
  SemParams pg = p;
  pg.gamma(0) = 0.0;
  CHECK(population_residual_cross_covariance(pg, rest) ==
        doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("residual cross covariance matches Monte Carlo") {
  RngStream rng = substream(15, "oracle.resmc");
  const SemParams p = random_params(rng, 1, 5, 1, true, 0.0);
  std::vector<int> conditioning{1, 2, 3, 4};
  const double exact = population_residual_cross_covariance(p, conditioning);

  const int ell = 200000;
  const Dataset data = sample_dataset(p, ell, 21);
  Eigen::MatrixXd wc(ell, 4);
  for (int j = 0; j < 4; ++j)
    wc.col(j) = data.w.col(conditioning[static_cast<std::size_t>(j)]);
  const Eigen::VectorXd ry = ols_fit(data.y, wc, true).residuals;
  const Eigen::VectorXd rx = ols_fit(data.x.col(0), wc, true).residuals;
  const double sample_cov = ry.dot(rx) / ell;
  CHECK(sample_cov == doctest::Approx(exact).epsilon(0.05));
}
