#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rsc/core.hpp"
#include "rsc/permtest.hpp"

namespace rsc {

// Column roles for CSV ingestion. Roles must be disjoint; `background`
// left empty means "every column not assigned another role". All role
// columns must parse as numbers (categoricals arrive pre-encoded).
struct ColumnSchema {
  std::string target;
  std::vector<std::string> causes;
  std::optional<std::string> environment;
  std::vector<std::string> background;
  std::vector<std::string> drop;
  int min_env_size = 70;

  void validate() const;
  std::string to_json() const;
  static ColumnSchema from_json(const std::string& text);
  static ColumnSchema from_json_file(const std::string& path);
};

struct Environment {
  std::string label;
  Dataset data;
};

// Sub-datasets sharing column roles; each retained group has at least
// min_env_size rows, and all groups have identical d and q.
struct EnvironmentCollection {
  std::vector<Environment> groups;

  int count() const { return static_cast<int>(groups.size()); }
  Eigen::Index total_rows() const;
};

// Loads a CSV (UTF-8, comma separated, one header row), groups rows by the
// environment column (file order preserved within groups, groups ordered by
// first appearance), and drops groups smaller than min_env_size. Without an
// environment column the whole file is one group.
EnvironmentCollection load_csv(const std::string& path,
                               const ColumnSchema& schema);

// Same parse but ignoring the environment column and the size filter:
// one Dataset holding every row. Used for whole-sample OLS baselines.
Dataset load_csv_pooled(const std::string& path, const ColumnSchema& schema);

// Stacks all groups into one Dataset (group order, file order within).
Dataset pool_environments(const EnvironmentCollection& collection);

struct RealAnalysisOptions {
  int num_permutations = 999;
  std::uint64_t seed = 0;
  int threads = 1;
};

struct RealAnalysisResult {
  PermutationTestResult test;
  std::vector<std::string> warnings;
};

// Environments-as-subsets workflow: each environment contributes one
// regression of its rows of Y on [intercept, X, W], the stability statistic
// ranges over the per-environment X-coefficients, the nuisance estimate is
// the uniform average of the per-environment background fits, and the
// permutation shuffles the pooled residuals across all environments.
RealAnalysisResult run_real_analysis(const EnvironmentCollection& collection,
                                     const RealAnalysisOptions& opts);

}  // namespace rsc
