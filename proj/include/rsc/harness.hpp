#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "rsc/core.hpp"
#include "rsc/permtest.hpp"
#include "rsc/sem.hpp"

namespace rsc {

// All knobs of a type-I/power experiment. JSON form uses exactly these
// field names (snake_case); hidden_mask entries are 1-based column indices
// into W.
struct ExperimentConfig {
  int d = 1;
  int q = 100;
  int r = 1;
  int ell = 100;
  double rho_beta = 0.0;
  double rho_gamma = 1.0;
  PriorKind beta_prior = PriorKind::sphere;
  PriorKind gamma_prior = PriorKind::sphere;
  double student_df = 2.2;
  int m = 100;
  int k = 10;
  int num_permutations = 199;
  std::vector<double> alphas{0.05, 0.01};
  int reps = 100;
  std::vector<int> hidden_mask;  // 0-based internally
  std::vector<std::string> methods{"rs"};
  std::uint64_t seed = 1;
  int threads = 1;
  std::optional<double> ridge_lambda;
  // Entry variances of the loading matrices; empty = the printed defaults
  // (var(A) = 1/d, var(B) = 1/q). The pairing that reproduces the paper's
  // reported operating characteristics is var_a = 1/q, var_b = 1/d.
  std::optional<double> var_a;
  std::optional<double> var_b;

  void validate() const;
  std::string to_json() const;
  static ExperimentConfig from_json(const std::string& text);
};

struct ArmResult {
  std::string method;
  std::string setting;  // "type1" or "power"; sweeps prefix "q=<q>:"
  std::vector<int> rep_index;    // reps that completed
  std::vector<double> p_values;  // aligned with rep_index
  int failures = 0;
  std::vector<std::string> failure_messages;

  double rejection_rate(double alpha) const;
};

struct OracleDiagnostics {
  double condition_c = std::numeric_limits<double>::quiet_NaN();
  double condition_sigma = std::numeric_limits<double>::quiet_NaN();
  double limit_constant = std::numeric_limits<double>::quiet_NaN();
  double type1_bound_mean = std::numeric_limits<double>::quiet_NaN();
};

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<ArmResult> results;
  OracleDiagnostics diagnostics;
  double wall_seconds = 0.0;

  const ArmResult& arm(const std::string& method,
                       const std::string& setting) const;
  std::string to_json() const;
  static ExperimentReport from_json(const std::string& text);
};

// Drops the masked W columns (the paper's latent settings): the columns
// exist in the generative process but are invisible to every method.
Dataset apply_hidden_mask(const Dataset& data,
                          const std::vector<int>& hidden_mask);

struct RsRunResult {
  PermutationTestResult test;
  GammaEstimate gamma_hat;
};

struct RsOptions {
  int m = 100;
  int k = 10;
  int num_permutations = 999;
  std::uint64_t seed = 0;
  int threads = 1;
};

// Random selection + uniform model averaging + permutation test on the
// background columns of `data` (apply_hidden_mask first for latent
// settings). Substreams: (seed, "subsets") for selection, (seed, "test")
// for the permutation draws.
RsRunResult run_rs_pipeline(const Dataset& data, const RsOptions& opts);

// Runs the null arm (beta = 0) and, when rho_beta > 0, the power arm.
// Loadings and gamma are drawn once and shared across arms; beta is drawn
// once for the power arm; each rep redraws all model noises from substream
// (seed, "rep.<arm>", rep). Failed reps are quarantined, not fatal.
ExperimentReport run_type1_power_experiment(const ExperimentConfig& config);

// Repeats the experiment for each q (ascending); settings are prefixed
// with "q=<q>:". A singleton list reproduces run_type1_power_experiment.
std::vector<ExperimentReport> run_q_sweep(const ExperimentConfig& config,
                                          const std::vector<int>& q_list);

enum class ReportFormat { csv, json };

// CSV schema: "method,setting,alpha,rejection_rate,reps,seed" plus a
// sidecar "<stem>_pvalues.csv" with the raw per-rep p-values; JSON mirrors
// the full report.
void emit_report(const ExperimentReport& report, const std::string& path,
                 ReportFormat format);
void emit_report(const std::vector<ExperimentReport>& series,
                 const std::string& path, ReportFormat format);

}  // namespace rsc
