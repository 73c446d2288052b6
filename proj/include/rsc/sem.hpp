#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>

#include "rsc/core.hpp"
#include "rsc/rng.hpp"

namespace rsc {

// How beta / gamma directions are drawn.
enum class PriorKind { sphere, gaussian, student_t };

PriorKind prior_kind_from_string(const std::string& s);
std::string to_string(PriorKind kind);

// Full generative description of the linear model
//   z ~ N(0, diag(sigma_z^2))          in R^r
//   w = A z + n_w,   n_w ~ N(0, diag(sigma_w^2))
//   x = B z + n_x,   n_x ~ N(0, diag(sigma_x^2))
//   y = beta'x + gamma'w + n_y,  n_y ~ N(0, sigma_y^2).
struct SemParams {
  Eigen::MatrixXd a;        // q x r
  Eigen::MatrixXd b;        // d x r
  Eigen::VectorXd beta;     // d
  Eigen::VectorXd gamma;    // q
  Eigen::VectorXd sigma_z;  // r, > 0
  Eigen::VectorXd sigma_w;  // q, > 0
  Eigen::VectorXd sigma_x;  // d, > 0
  double sigma_y = 1.0;

  int d() const { return static_cast<int>(b.rows()); }
  int q() const { return static_cast<int>(a.rows()); }
  int r() const { return static_cast<int>(a.cols()); }
  double rho_beta() const { return beta.norm(); }
  double rho_gamma() const { return gamma.norm(); }

  void validate() const;
};

// Uniform draw on the sphere of the given radius (normalized Gaussian);
// radius 0 gives the zero vector.
Eigen::VectorXd sample_sphere(int dim, double radius, RngStream& rng);

// i.i.d. N(0, radius^2 / dim) entries, so E||v||^2 = radius^2.
Eigen::VectorXd sample_gaussian_prior(int dim, double radius, RngStream& rng);

// i.i.d. Student-t(df) entries rescaled to the exact radius: a heavy-tailed
// direction with a fixed norm. Requires df > 2.
Eigen::VectorXd sample_student_prior(int dim, double df, double radius,
                                     RngStream& rng);

Eigen::VectorXd sample_prior(PriorKind kind, int dim, double radius,
                             RngStream& rng, double student_df = 2.2);

struct SemGenOptions {
  PriorKind beta_prior = PriorKind::sphere;
  PriorKind gamma_prior = PriorKind::sphere;
  double student_df = 2.2;
  // Entry variances for the loading matrices; the defaults follow the
  // convention var(A_ij) = 1/d, var(B_ij) = 1/q. Negative means default.
  double var_a = -1.0;
  double var_b = -1.0;
};

// Draws loadings and coefficient vectors; all noise scales are set to 1.
// Substreams: (seed, "sem.a"), (seed, "sem.b"), (seed, "sem.beta"),
// (seed, "sem.gamma").
SemParams generate_sem_params(int d, int q, int r, double rho_beta,
                              double rho_gamma, std::uint64_t seed,
                              const SemGenOptions& opts = {});

// ell i.i.d. rows from the model. Matrices are filled column by column from
// the substreams (seed, "noise.z"/"noise.w"/"noise.x"/"noise.y"); the
// mapping is frozen, identical (params, ell, seed) gives identical bits.
Dataset sample_dataset(const SemParams& params, int ell, std::uint64_t seed);

// JSON form: {"a": [[row]...], "b": [[row]...], "beta": [...],
// "gamma": [...], "sigma_z": [...], "sigma_w": [...], "sigma_x": [...],
// "sigma_y": number}.
std::string sem_params_to_json(const SemParams& params);
SemParams sem_params_from_json(const std::string& text);
SemParams sem_params_from_json_file(const std::string& path);

}  // namespace rsc
