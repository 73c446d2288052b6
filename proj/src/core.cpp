#include "rsc/core.hpp"

#include <algorithm>
#include <cmath>

#include "rsc/kernels.hpp"
#include "rsc/rng.hpp"

namespace rsc {

namespace {

void require_finite(const Eigen::Ref<const Eigen::MatrixXd>& m,
                    const char* what) {
  if (!m.allFinite())
    throw InvalidArgument(std::string(what) + ": non-finite entry");
}

}  // namespace

Dataset::Dataset(Eigen::VectorXd y_in, Eigen::MatrixXd x_in,
                 Eigen::MatrixXd w_in, std::vector<std::string> names_x_in,
                 std::vector<std::string> names_w_in)
    : y(std::move(y_in)),
      x(std::move(x_in)),
      w(std::move(w_in)),
      names_x(std::move(names_x_in)),
      names_w(std::move(names_w_in)) {
  if (y.size() < 1) throw InvalidArgument("Dataset: need at least one row");
  if (x.rows() != y.size() || (w.size() > 0 && w.rows() != y.size()))
    throw InvalidArgument("Dataset: y, x, w row counts differ");
  if (w.size() == 0) w.resize(y.size(), 0);
  if (x.cols() < 1) throw InvalidArgument("Dataset: need at least one cause");
  if (!names_x.empty() && static_cast<Eigen::Index>(names_x.size()) != x.cols())
    throw InvalidArgument("Dataset: names_x length mismatch");
  if (!names_w.empty() && static_cast<Eigen::Index>(names_w.size()) != w.cols())
    throw InvalidArgument("Dataset: names_w length mismatch");
  require_finite(y, "Dataset.y");
  require_finite(x, "Dataset.x");
  require_finite(w, "Dataset.w");
}

Dataset Dataset::select_background(const std::vector<int>& keep) const {
  Eigen::MatrixXd w_sel(rows(), static_cast<Eigen::Index>(keep.size()));
  std::vector<std::string> names_sel;
  for (std::size_t j = 0; j < keep.size(); ++j) {
    if (keep[j] < 0 || keep[j] >= q())
      throw InvalidArgument("select_background: index out of range");
    if (j > 0 && keep[j] <= keep[j - 1])
      throw InvalidArgument("select_background: indices must increase");
    w_sel.col(static_cast<Eigen::Index>(j)) = w.col(keep[j]);
    if (!names_w.empty()) names_sel.push_back(names_w[keep[j]]);
  }
  return Dataset(y, x, std::move(w_sel), names_x, std::move(names_sel));
}

SubsetFamily::SubsetFamily(int q_in, std::vector<std::vector<int>> subsets_in)
    : q(q_in), subsets(std::move(subsets_in)) {
  if (q < 1) throw InvalidArgument("SubsetFamily: q must be positive");
  for (const auto& s : subsets) {
    if (s.empty()) throw InvalidArgument("SubsetFamily: empty subset");
    if (static_cast<int>(s.size()) >= q)
      throw InvalidArgument("SubsetFamily: subsets must be proper");
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] < 0 || s[i] >= q)
        throw InvalidArgument("SubsetFamily: index out of range");
      if (i > 0 && s[i] <= s[i - 1])
        throw InvalidArgument("SubsetFamily: indices must strictly increase");
    }
  }
}

CoefficientSet::CoefficientSet(RowMajorMatrix v) : vectors(std::move(v)) {
  if (vectors.rows() < 1 || vectors.cols() < 1)
    throw InvalidArgument("CoefficientSet: need m >= 1 vectors of dim >= 1");
  if (!vectors.allFinite())
    throw InvalidArgument("CoefficientSet: non-finite entry");
}

CoefficientSet CoefficientSet::from_rows(
    const std::vector<Eigen::VectorXd>& rows) {
  if (rows.empty()) throw InvalidArgument("CoefficientSet: no vectors");
  RowMajorMatrix m(static_cast<Eigen::Index>(rows.size()), rows[0].size());
  for (std::size_t j = 0; j < rows.size(); ++j) {
    if (rows[j].size() != rows[0].size())
      throw InvalidArgument("CoefficientSet: vector lengths differ");
    m.row(static_cast<Eigen::Index>(j)) = rows[j].transpose();
  }
  return CoefficientSet(std::move(m));
}

double stability_statistic_rowmajor(const double* coeffs, int m, int d) {
  const double total_sq =
      kernels::sumsq(coeffs, static_cast<std::size_t>(m) * d);
  if (total_sq == 0.0)
    throw DegenerateStatistic(
        "stability_statistic: all coefficient vectors are zero");
  double mean_norm_sq = 0.0;
  for (int c = 0; c < d; ++c) {
    double col_sum = 0.0;
    for (int r = 0; r < m; ++r) col_sum += coeffs[r * d + c];
    const double mean_c = col_sum / m;
    mean_norm_sq += mean_c * mean_c;
  }
  const double v = 1.0 - mean_norm_sq / (total_sq / m);
  return std::clamp(v, 0.0, 1.0);
}

double stability_statistic(const CoefficientSet& coeffs) {
  return stability_statistic_rowmajor(coeffs.vectors.data(), coeffs.count(),
                                      coeffs.dim());
}

SubsetFamily random_selection(int q, int k, int m, std::uint64_t seed) {
  if (q < 2 || k < 1 || k >= q)
    throw InvalidArgument("random_selection: need 1 <= k < q");
  if (m < 1) throw InvalidArgument("random_selection: need m >= 1");
  std::vector<std::vector<int>> subsets;
  subsets.reserve(static_cast<std::size_t>(m));
  std::vector<char> member(static_cast<std::size_t>(q));
  for (int j = 0; j < m; ++j) {
    RngStream rng = substream(seed, "subset", static_cast<std::uint64_t>(j));
    std::fill(member.begin(), member.end(), 0);
    std::vector<int> s;
    s.reserve(static_cast<std::size_t>(k));
    // Floyd's algorithm: uniform over k-subsets without building a pool.
    for (int i = q - k; i < q; ++i) {
      const int t =
          static_cast<int>(rng.next_below(static_cast<std::uint64_t>(i) + 1));
      if (member[static_cast<std::size_t>(t)]) {
        member[static_cast<std::size_t>(i)] = 1;
        s.push_back(i);
      } else {
        member[static_cast<std::size_t>(t)] = 1;
        s.push_back(t);
      }
    }
    std::sort(s.begin(), s.end());
    subsets.push_back(std::move(s));
  }
  return SubsetFamily(q, std::move(subsets));
}

SubsetFamily partition_selection(int q, int k) {
  if (q < 1 || k < 1) throw InvalidArgument("partition_selection: bad sizes");
  if (k >= q)
    throw InvalidArgument(
        "partition_selection: blocks must be proper subsets (k < q)");
  if (q % k != 0)
    throw InvalidArgument("partition_selection: k must divide q");
  std::vector<std::vector<int>> subsets;
  subsets.reserve(static_cast<std::size_t>(q / k));
  for (int start = 0; start < q; start += k) {
    std::vector<int> s(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) s[static_cast<std::size_t>(i)] = start + i;
    subsets.push_back(std::move(s));
  }
  return SubsetFamily(q, std::move(subsets));
}

}  // namespace rsc
