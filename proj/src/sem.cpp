#include "rsc/sem.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace rsc {

PriorKind prior_kind_from_string(const std::string& s) {
  if (s == "sphere") return PriorKind::sphere;
  if (s == "gaussian") return PriorKind::gaussian;
  if (s == "student_t") return PriorKind::student_t;
  throw InvalidArgument("unknown prior kind: " + s);
}

std::string to_string(PriorKind kind) {
  switch (kind) {
    case PriorKind::sphere: return "sphere";
    case PriorKind::gaussian: return "gaussian";
    case PriorKind::student_t: return "student_t";
  }
  throw InvalidArgument("bad PriorKind");
}

void SemParams::validate() const {
  if (d() < 1 || q() < 1 || r() < 1)
    throw InvalidArgument("SemParams: d, q, r must be >= 1");
  if (b.cols() != a.cols())
    throw InvalidArgument("SemParams: A and B column counts differ");
  if (beta.size() != d() || gamma.size() != q())
    throw InvalidArgument("SemParams: beta/gamma length mismatch");
  if (sigma_z.size() != r() || sigma_w.size() != q() || sigma_x.size() != d())
    throw InvalidArgument("SemParams: sigma length mismatch");
  if (!(sigma_y > 0.0) || (sigma_z.array() <= 0.0).any() ||
      (sigma_w.array() <= 0.0).any() || (sigma_x.array() <= 0.0).any())
    throw InvalidArgument("SemParams: noise scales must be positive");
  if (!a.allFinite() || !b.allFinite() || !beta.allFinite() ||
      !gamma.allFinite())
    throw InvalidArgument("SemParams: non-finite entry");
}

namespace {

Eigen::VectorXd gaussian_vector(int dim, RngStream& rng) {
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v(i) = rng.next_gaussian();
  return v;
}

Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols,
                                double sd, RngStream& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = sd * rng.next_gaussian();
  return m;
}

}  // namespace

Eigen::VectorXd sample_sphere(int dim, double radius, RngStream& rng) {
  if (dim < 1) throw InvalidArgument("sample_sphere: dim must be >= 1");
  if (radius < 0.0) throw InvalidArgument("sample_sphere: negative radius");
  if (radius == 0.0) return Eigen::VectorXd::Zero(dim);
  for (;;) {
    Eigen::VectorXd v = gaussian_vector(dim, rng);
    const double norm = v.norm();
    if (norm > 0.0) return v * (radius / norm);
  }
}

Eigen::VectorXd sample_gaussian_prior(int dim, double radius, RngStream& rng) {
  if (dim < 1)
    throw InvalidArgument("sample_gaussian_prior: dim must be >= 1");
  const double sd = radius / std::sqrt(static_cast<double>(dim));
  return sd * gaussian_vector(dim, rng);
}

Eigen::VectorXd sample_student_prior(int dim, double df, double radius,
                                     RngStream& rng) {
  if (dim < 1) throw InvalidArgument("sample_student_prior: dim must be >= 1");
  if (!(df > 2.0)) throw InvalidArgument("sample_student_prior: need df > 2");
  if (radius == 0.0) return Eigen::VectorXd::Zero(dim);
  for (;;) {
    Eigen::VectorXd v(dim);
    for (int i = 0; i < dim; ++i) {
      const double g = rng.next_gaussian();
      const double chi2 = 2.0 * rng.next_gamma(df / 2.0);
      v(i) = g / std::sqrt(chi2 / df);
    }
    const double norm = v.norm();
    if (norm > 0.0) return v * (radius / norm);
  }
}

Eigen::VectorXd sample_prior(PriorKind kind, int dim, double radius,
                             RngStream& rng, double student_df) {
  switch (kind) {
    case PriorKind::sphere: return sample_sphere(dim, radius, rng);
    case PriorKind::gaussian: return sample_gaussian_prior(dim, radius, rng);
    case PriorKind::student_t:
      return sample_student_prior(dim, student_df, radius, rng);
  }
  throw InvalidArgument("bad PriorKind");
}

SemParams generate_sem_params(int d, int q, int r, double rho_beta,
                              double rho_gamma, std::uint64_t seed,
                              const SemGenOptions& opts) {
  if (d < 1 || q < 1 || r < 1)
    throw InvalidArgument("generate_sem_params: d, q, r must be >= 1");
  const double var_a = opts.var_a >= 0.0 ? opts.var_a : 1.0 / d;
  const double var_b = opts.var_b >= 0.0 ? opts.var_b : 1.0 / q;
  SemParams p;
  {
    RngStream rng = substream(seed, "sem.a");
    p.a = gaussian_matrix(q, r, std::sqrt(var_a), rng);
  }
  {
    RngStream rng = substream(seed, "sem.b");
    p.b = gaussian_matrix(d, r, std::sqrt(var_b), rng);
  }
  {
    RngStream rng = substream(seed, "sem.beta");
    p.beta = sample_prior(opts.beta_prior, d, rho_beta, rng, opts.student_df);
  }
  {
    RngStream rng = substream(seed, "sem.gamma");
    p.gamma =
        sample_prior(opts.gamma_prior, q, rho_gamma, rng, opts.student_df);
  }
  p.sigma_z = Eigen::VectorXd::Ones(r);
  p.sigma_w = Eigen::VectorXd::Ones(q);
  p.sigma_x = Eigen::VectorXd::Ones(d);
  p.sigma_y = 1.0;
  p.validate();
  return p;
}

Dataset sample_dataset(const SemParams& params, int ell, std::uint64_t seed) {
  params.validate();
  if (ell < 1) throw InvalidArgument("sample_dataset: need ell >= 1");
  const int d = params.d(), q = params.q(), r = params.r();

  Eigen::MatrixXd z;
  {
    RngStream rng = substream(seed, "noise.z");
    z = gaussian_matrix(ell, r, 1.0, rng);
    z = z * params.sigma_z.asDiagonal();
  }
  Eigen::MatrixXd w;
  {
    RngStream rng = substream(seed, "noise.w");
    w = gaussian_matrix(ell, q, 1.0, rng);
    w = w * params.sigma_w.asDiagonal();
    w.noalias() += z * params.a.transpose();
  }
  Eigen::MatrixXd x;
  {
    RngStream rng = substream(seed, "noise.x");
    x = gaussian_matrix(ell, d, 1.0, rng);
    x = x * params.sigma_x.asDiagonal();
    x.noalias() += z * params.b.transpose();
  }
  Eigen::VectorXd y;
  {
    RngStream rng = substream(seed, "noise.y");
    y = params.sigma_y * gaussian_vector(ell, rng);
    y.noalias() += x * params.beta + w * params.gamma;
  }
  return Dataset(std::move(y), std::move(x), std::move(w));
}

namespace {

using nlohmann::json;

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j, const char* what) {
  if (!j.is_array() || j.empty())
    throw ParseError(std::string("params JSON: ") + what +
                     " must be a nonempty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (static_cast<Eigen::Index>(j[r].size()) != cols)
      throw ParseError(std::string("params JSON: ragged rows in ") + what);
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

Eigen::VectorXd vector_from_json(const json& j, const char* what) {
  if (!j.is_array())
    throw ParseError(std::string("params JSON: ") + what + " must be an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = j[i].get<double>();
  return v;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

}  // namespace

std::string sem_params_to_json(const SemParams& params) {
  params.validate();
  json j;
  j["a"] = matrix_to_json(params.a);
  j["b"] = matrix_to_json(params.b);
  j["beta"] = vector_to_json(params.beta);
  j["gamma"] = vector_to_json(params.gamma);
  j["sigma_z"] = vector_to_json(params.sigma_z);
  j["sigma_w"] = vector_to_json(params.sigma_w);
  j["sigma_x"] = vector_to_json(params.sigma_x);
  j["sigma_y"] = params.sigma_y;
  return j.dump(2);
}

SemParams sem_params_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("params JSON: ") + e.what());
  }
  SemParams p;
  try {
    p.a = matrix_from_json(j.at("a"), "a");
    p.b = matrix_from_json(j.at("b"), "b");
    p.beta = vector_from_json(j.at("beta"), "beta");
    p.gamma = vector_from_json(j.at("gamma"), "gamma");
    p.sigma_z = j.contains("sigma_z")
                    ? vector_from_json(j["sigma_z"], "sigma_z")
                    : Eigen::VectorXd::Ones(p.a.cols()).eval();
    p.sigma_w = j.contains("sigma_w")
                    ? vector_from_json(j["sigma_w"], "sigma_w")
                    : Eigen::VectorXd::Ones(p.a.rows()).eval();
    p.sigma_x = j.contains("sigma_x")
                    ? vector_from_json(j["sigma_x"], "sigma_x")
                    : Eigen::VectorXd::Ones(p.b.rows()).eval();
    p.sigma_y = j.value("sigma_y", 1.0);
  } catch (const json::exception& e) {
    throw ParseError(std::string("params JSON: ") + e.what());
  }
  p.validate();
  return p;
}

SemParams sem_params_from_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open params file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return sem_params_from_json(buf.str());
}

}  // namespace rsc
