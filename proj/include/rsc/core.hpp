#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "rsc/errors.hpp"

namespace rsc {

using RowMajorMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// One sample set: target y (length ell), candidate causes x (ell x d) and
// background features w (ell x q, q may be zero). Column labels are optional
// but, when present, must match the column counts. Construction validates
// shapes and finiteness.
struct Dataset {
  Eigen::VectorXd y;
  Eigen::MatrixXd x;
  Eigen::MatrixXd w;
  std::vector<std::string> names_x;
  std::vector<std::string> names_w;

  Dataset() = default;
  Dataset(Eigen::VectorXd y_in, Eigen::MatrixXd x_in, Eigen::MatrixXd w_in,
          std::vector<std::string> names_x_in = {},
          std::vector<std::string> names_w_in = {});

  Eigen::Index rows() const { return y.size(); }
  Eigen::Index d() const { return x.cols(); }
  Eigen::Index q() const { return w.cols(); }

  // Keeps only the w columns in `keep` (0-based, strictly increasing).
  Dataset select_background(const std::vector<int>& keep) const;
};

// m index sets over {0, ..., q-1}. Every subset is nonempty, strictly
// increasing, and a proper subset of the ambient index range; repeats
// across j are allowed.
struct SubsetFamily {
  int q = 0;
  std::vector<std::vector<int>> subsets;

  SubsetFamily() = default;
  SubsetFamily(int q_in, std::vector<std::vector<int>> subsets_in);

  int count() const { return static_cast<int>(subsets.size()); }
};

// m coefficient vectors of common length d, stored one per row.
struct CoefficientSet {
  RowMajorMatrix vectors;  // m x d

  CoefficientSet() = default;
  explicit CoefficientSet(RowMajorMatrix v);
  static CoefficientSet from_rows(const std::vector<Eigen::VectorXd>& rows);

  int count() const { return static_cast<int>(vectors.rows()); }
  int dim() const { return static_cast<int>(vectors.cols()); }
};

// 1 - ||mean of vectors||^2 / (mean of squared norms), clamped to [0, 1].
// Zero iff all vectors coincide; throws DegenerateStatistic when every
// vector is zero (the ratio is 0/0 there).
double stability_statistic(const CoefficientSet& coeffs);

// Same statistic on a raw row-major (m x d) block; hot-path entry used by
// the permutation engine.
double stability_statistic_rowmajor(const double* coeffs, int m, int d);

// Draws m subsets of {0..q-1}, each of size exactly k, uniformly at random
// (without replacement within a subset; repeats across subsets allowed).
// Subset j is drawn from substream (seed, "subset", j), so the family is
// bit-reproducible and prefix-stable in m.
SubsetFamily random_selection(int q, int k, int m, std::uint64_t seed);

// Splits {0..q-1} into q/k consecutive disjoint blocks of size k.
// Requires k to divide q and k < q.
SubsetFamily partition_selection(int q, int k);

}  // namespace rsc
