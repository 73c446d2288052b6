// rsc: causal-driver testing via regression-coefficient stability under
// random selection of background variables.
//
// Subcommands: simulate, rs-test, fl-test, dr-test, bench, sweep, real,
// oracle. Exit codes: 0 success, 2 usage error, 1 runtime error. Test
// p-values go to stdout as "p=<value>".

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rsc/baselines.hpp"
#include "rsc/csv.hpp"
#include "rsc/harness.hpp"
#include "rsc/oracle.hpp"
#include "rsc/regression.hpp"
#include "rsc/sem.hpp"

namespace {

std::string format_p(double p) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "p=%.10g", p);
  return buf;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw rsc::IoError("cannot open for writing: " + path);
  out << content;
  if (!out) throw rsc::IoError("write failed: " + path);
}

void write_dataset_csv(const rsc::Dataset& data, const std::string& path) {
  std::ostringstream os;
  os << "y";
  for (Eigen::Index j = 0; j < data.d(); ++j) os << ",x" << (j + 1);
  for (Eigen::Index j = 0; j < data.q(); ++j) os << ",w" << (j + 1);
  os << "\n";
  char buf[64];
  auto put = [&os, &buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    os << buf;
  };
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    put(data.y(i));
    for (Eigen::Index j = 0; j < data.d(); ++j) {
      os << ",";
      put(data.x(i, j));
    }
    for (Eigen::Index j = 0; j < data.q(); ++j) {
      os << ",";
      put(data.w(i, j));
    }
    os << "\n";
  }
  write_text_file(path, os.str());
}

rsc::ColumnSchema simulated_schema(const rsc::Dataset& data) {
  rsc::ColumnSchema schema;
  schema.target = "y";
  for (Eigen::Index j = 0; j < data.d(); ++j)
    schema.causes.push_back("x" + std::to_string(j + 1));
  for (Eigen::Index j = 0; j < data.q(); ++j)
    schema.background.push_back("w" + std::to_string(j + 1));
  schema.min_env_size = 1;
  return schema;
}

void print_inference_table(const rsc::InferenceTable& table) {
  std::printf("%-14s %12s %12s %9s %12s\n", "term", "coef", "stderr", "t",
              "p");
  for (const auto& row : table.rows)
    std::printf("%-14s %12.4f %12.4f %9.3f %12.4g\n", row.name.c_str(),
                row.coefficient, row.stderr_value, row.t_stat, row.p_value);
}

std::vector<int> parse_q_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      const int q = std::stoi(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(q);
    } catch (const std::exception&) {
      throw rsc::ConfigError("--q-list: bad value '" + item + "'");
    }
  }
  if (out.empty()) throw rsc::ConfigError("--q-list: no values given");
  return out;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw rsc::IoError("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

int run(int argc, char** argv) {
  CLI::App app{"regression-stability causal testing"};
  app.require_subcommand(1);

  // simulate
  auto* simulate = app.add_subcommand(
      "simulate", "draw a synthetic dataset from the linear model");
  int sim_d = 1, sim_q = 100, sim_r = 1, sim_ell = 100;
  double sim_rho_beta = 0.0, sim_rho_gamma = 1.0, sim_df = 2.2;
  std::string sim_beta_prior = "sphere", sim_gamma_prior = "sphere";
  std::uint64_t sim_seed = 1;
  std::string sim_out, sim_params_out, sim_schema_out;
  simulate->add_option("--d", sim_d, "number of candidate causes");
  simulate->add_option("--q", sim_q, "number of background features");
  simulate->add_option("--r", sim_r, "latent dimension");
  simulate->add_option("--ell", sim_ell, "sample size");
  simulate->add_option("--rho-beta", sim_rho_beta, "norm of beta");
  simulate->add_option("--rho-gamma", sim_rho_gamma, "norm of gamma");
  simulate->add_option("--beta-prior", sim_beta_prior,
                       "sphere|gaussian|student_t");
  simulate->add_option("--gamma-prior", sim_gamma_prior,
                       "sphere|gaussian|student_t");
  simulate->add_option("--student-df", sim_df, "Student-t degrees of freedom");
  simulate->add_option("--seed", sim_seed, "master seed");
  simulate->add_option("--out", sim_out, "output CSV path")->required();
  simulate->add_option("--params-out", sim_params_out,
                       "also write the drawn model parameters (JSON)");
  simulate->add_option("--schema-out", sim_schema_out,
                       "also write a matching column schema (JSON)");

  // shared test flags
  struct TestArgs {
    std::string data_path;
    std::string schema_path;
    int m = 100, k = 10, num_permutations = 999, threads = 1;
    std::uint64_t seed = 0;
    double lambda = -1.0;
    double alpha = -1.0;
  };
  TestArgs rs_args, fl_args, dr_args;
  auto add_test_flags = [](CLI::App* cmd, TestArgs& args, bool rs) {
    cmd->add_option("data", args.data_path, "input CSV")->required();
    cmd->add_option("--schema", args.schema_path, "column schema JSON")
        ->required();
    if (rs) {
      cmd->add_option("--m", args.m, "number of random subsets");
      cmd->add_option("--k", args.k, "subset size");
    } else {
      cmd->add_option("--lambda", args.lambda,
                      "ridge penalty (default: GCV)");
    }
    cmd->add_option("--M", args.num_permutations, "permutation count");
    cmd->add_option("--alpha", args.alpha,
                    "also print the reject decision at this level");
    cmd->add_option("--seed", args.seed, "master seed");
    cmd->add_option("--threads", args.threads, "worker threads");
  };
  auto print_p = [](double p, double alpha) {
    std::cout << format_p(p) << "\n";
    if (alpha > 0.0)
      std::cout << "reject=" << (p <= alpha ? 1 : 0) << "\n";
  };
  auto* rs_test = app.add_subcommand(
      "rs-test", "random-selection stability test on a CSV");
  add_test_flags(rs_test, rs_args, true);
  auto* fl_test =
      app.add_subcommand("fl-test", "Freedman-Lane baseline on a CSV");
  add_test_flags(fl_test, fl_args, false);
  auto* dr_test = app.add_subcommand(
      "dr-test", "double-residualization baseline on a CSV");
  add_test_flags(dr_test, dr_args, false);

  // bench / sweep
  std::string bench_config, bench_out, bench_format = "csv";
  int bench_threads = 0;
  std::uint64_t bench_seed = 0;
  bool bench_seed_set = false;
  auto* bench = app.add_subcommand(
      "bench", "type-I/power experiment from a JSON config");
  bench->add_option("--config", bench_config, "experiment config JSON")
      ->required();
  bench->add_option("--out", bench_out, "report output path");
  bench->add_option("--format", bench_format, "csv|json")
      ->check(CLI::IsMember({"csv", "json"}));
  bench->add_option("--threads", bench_threads, "override config threads");
  bench->add_option("--seed", bench_seed, "override config seed")
      ->each([&bench_seed_set](const std::string&) { bench_seed_set = true; });

  std::string sweep_config, sweep_out, sweep_format = "csv", sweep_qlist;
  int sweep_threads = 0;
  auto* sweep = app.add_subcommand(
      "sweep", "repeat the experiment over a list of q values");
  sweep->add_option("--config", sweep_config, "experiment config JSON")
      ->required();
  sweep->add_option("--q-list", sweep_qlist, "comma-separated q values")
      ->required();
  sweep->add_option("--out", sweep_out, "report output path");
  sweep->add_option("--format", sweep_format, "csv|json")
      ->check(CLI::IsMember({"csv", "json"}));
  sweep->add_option("--threads", sweep_threads, "override config threads");

  // real
  std::string real_data, real_schema;
  int real_M = 999, real_threads = 1, real_m = 100, real_k = 10;
  std::uint64_t real_seed = 0;
  bool real_random_subsets = false, real_ols = false;
  auto* real = app.add_subcommand(
      "real", "environment-split analysis of a real dataset");
  real->add_option("data", real_data, "input CSV")->required();
  real->add_option("--schema", real_schema, "column schema JSON")->required();
  real->add_option("--M", real_M, "permutation count");
  real->add_option("--seed", real_seed, "master seed");
  real->add_option("--threads", real_threads, "worker threads");
  real->add_flag("--random-subsets", real_random_subsets,
                 "pool rows and use random background subsets instead of "
                 "environments");
  real->add_option("--m", real_m, "subset count for --random-subsets");
  real->add_option("--k", real_k, "subset size for --random-subsets");
  real->add_flag("--ols", real_ols,
                 "also print the whole-sample OLS inference table");

  // oracle
  std::string oracle_params;
  int oracle_m = 100, oracle_k = 10, oracle_partition = 0;
  std::uint64_t oracle_seed = 0;
  auto* oracle = app.add_subcommand(
      "oracle", "population diagnostics for a model parameter file");
  oracle->add_option("--params", oracle_params, "model parameters JSON")
      ->required();
  oracle->add_option("--m", oracle_m, "number of random subsets");
  oracle->add_option("--k", oracle_k, "subset size");
  oracle->add_option("--partition", oracle_partition,
                     "use disjoint blocks of this size instead");
  oracle->add_option("--seed", oracle_seed, "selection seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;  // usage error
  }

  if (*simulate) {
    rsc::SemGenOptions gen;
    gen.beta_prior = rsc::prior_kind_from_string(sim_beta_prior);
    gen.gamma_prior = rsc::prior_kind_from_string(sim_gamma_prior);
    gen.student_df = sim_df;
    rsc::SemParams params = rsc::generate_sem_params(
        sim_d, sim_q, sim_r, sim_rho_beta, sim_rho_gamma, sim_seed, gen);
    rsc::Dataset data = rsc::sample_dataset(
        params, sim_ell, rsc::stream_key(sim_seed, "dataset"));
    write_dataset_csv(data, sim_out);
    if (!sim_params_out.empty())
      write_text_file(sim_params_out, rsc::sem_params_to_json(params) + "\n");
    if (!sim_schema_out.empty())
      write_text_file(sim_schema_out,
                      simulated_schema(data).to_json() + "\n");
    std::cerr << "wrote " << data.rows() << " rows to " << sim_out << "\n";
    return 0;
  }

  if (*rs_test) {
    const auto schema = rsc::ColumnSchema::from_json_file(rs_args.schema_path);
    const rsc::Dataset data =
        rsc::load_csv_pooled(rs_args.data_path, schema);
    rsc::RsOptions opts;
    opts.m = rs_args.m;
    opts.k = rs_args.k;
    opts.num_permutations = rs_args.num_permutations;
    opts.seed = rs_args.seed;
    opts.threads = rs_args.threads;
    const rsc::RsRunResult result = rsc::run_rs_pipeline(data, opts);
    print_p(result.test.p_value, rs_args.alpha);
    return 0;
  }

  if (*fl_test || *dr_test) {
    TestArgs& args = *fl_test ? fl_args : dr_args;
    const auto schema = rsc::ColumnSchema::from_json_file(args.schema_path);
    const rsc::Dataset data = rsc::load_csv_pooled(args.data_path, schema);
    rsc::BaselineOptions opts;
    if (args.lambda >= 0.0) opts.lambda = args.lambda;
    opts.num_permutations = args.num_permutations;
    opts.seed = args.seed;
    opts.threads = args.threads;
    const rsc::BaselineResult result =
        *fl_test ? rsc::freedman_lane_test(data, opts)
                 : rsc::double_residualization_test(data, opts);
    std::cerr << result.method << ": lambda=" << result.lambda
              << " statistic=" << result.statistic << "\n";
    print_p(result.p_value, args.alpha);
    return 0;
  }

  if (*bench) {
    rsc::ExperimentConfig config =
        rsc::ExperimentConfig::from_json(read_text_file(bench_config));
    if (bench_threads > 0) config.threads = bench_threads;
    if (bench_seed_set) config.seed = bench_seed;
    const rsc::ExperimentReport report =
        rsc::run_type1_power_experiment(config);
    if (bench_out.empty()) {
      std::cout << report.to_json() << "\n";
    } else {
      rsc::emit_report(report, bench_out,
                       bench_format == "json" ? rsc::ReportFormat::json
                                              : rsc::ReportFormat::csv);
      std::cerr << "wrote report to " << bench_out << "\n";
    }
    return 0;
  }

  if (*sweep) {
    rsc::ExperimentConfig config =
        rsc::ExperimentConfig::from_json(read_text_file(sweep_config));
    if (sweep_threads > 0) config.threads = sweep_threads;
    const std::vector<int> q_list = parse_q_list(sweep_qlist);
    const auto series = rsc::run_q_sweep(config, q_list);
    if (sweep_out.empty()) {
      for (const auto& report : series) std::cout << report.to_json() << "\n";
    } else {
      rsc::emit_report(series, sweep_out,
                       sweep_format == "json" ? rsc::ReportFormat::json
                                              : rsc::ReportFormat::csv);
      std::cerr << "wrote report to " << sweep_out << "\n";
    }
    return 0;
  }

  if (*real) {
    const auto schema = rsc::ColumnSchema::from_json_file(real_schema);
    if (real_ols) {
      // Whole-sample comparator: every row, environment column included
      // among the regressors.
      rsc::ColumnSchema ols_schema = schema;
      if (ols_schema.environment) {
        if (!ols_schema.background.empty())
          ols_schema.background.push_back(*ols_schema.environment);
        ols_schema.environment.reset();
      }
      const rsc::Dataset pooled =
          rsc::load_csv_pooled(real_data, ols_schema);
      print_inference_table(rsc::ols_inference_table(pooled));
    }
    const rsc::EnvironmentCollection collection =
        rsc::load_csv(real_data, schema);
    std::cerr << collection.count() << " environments, "
              << collection.total_rows() << " rows retained\n";
    if (real_random_subsets) {
      rsc::RsOptions opts;
      opts.m = real_m;
      opts.k = real_k;
      opts.num_permutations = real_M;
      opts.seed = real_seed;
      opts.threads = real_threads;
      const rsc::RsRunResult result =
          rsc::run_rs_pipeline(rsc::pool_environments(collection), opts);
      std::cout << format_p(result.test.p_value) << "\n";
    } else {
      rsc::RealAnalysisOptions opts;
      opts.num_permutations = real_M;
      opts.seed = real_seed;
      opts.threads = real_threads;
      const rsc::RealAnalysisResult result =
          rsc::run_real_analysis(collection, opts);
      for (const auto& warning : result.warnings)
        std::cerr << "warning: " << warning << "\n";
      std::cout << format_p(result.test.p_value) << "\n";
    }
    return 0;
  }

  if (*oracle) {
    const rsc::SemParams params =
        rsc::sem_params_from_json_file(oracle_params);
    const rsc::SubsetFamily family =
        oracle_partition > 0
            ? rsc::partition_selection(params.q(), oracle_partition)
            : rsc::random_selection(params.q(), oracle_k, oracle_m,
                                    oracle_seed);
    const auto strength = rsc::condition_strength(params, family);
    std::printf("condition_strength=%.10g\n", strength.first);
    if (params.r() == 1)
      std::printf("condition_strength_sigma=%.10g\n", strength.second);
    try {
      std::printf("limit_constant_null=%.10g\n",
                  rsc::limit_constant_null(params, family));
    } catch (const rsc::DegenerateStatistic&) {
      std::printf("limit_constant_null=undefined (no confounding)\n");
    }
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const rsc::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
