#include "rsc/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rsc/baselines.hpp"
#include "rsc/oracle.hpp"
#include "rsc/parallel.hpp"
#include "rsc/regression.hpp"

namespace rsc {

using nlohmann::json;

namespace {

double json_number_or_nan(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN()
                     : j.get<double>();
}

json nan_to_null(double v) {
  if (std::isnan(v)) return nullptr;
  return v;
}

std::vector<int> visible_columns(int q, const std::vector<int>& hidden_mask) {
  std::vector<char> hidden(static_cast<std::size_t>(q), 0);
  for (int i : hidden_mask) {
    if (i < 0 || i >= q)
      throw ConfigError("hidden_mask index out of range");
    hidden[static_cast<std::size_t>(i)] = 1;
  }
  std::vector<int> visible;
  for (int i = 0; i < q; ++i)
    if (!hidden[static_cast<std::size_t>(i)]) visible.push_back(i);
  return visible;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (d < 1 || q < 1 || r < 1 || ell < 1)
    throw ConfigError("config: d, q, r, ell must be >= 1");
  if (rho_beta < 0.0 || rho_gamma < 0.0)
    throw ConfigError("config: radii must be nonnegative");
  if (reps < 1) throw ConfigError("config: reps must be >= 1");
  if (num_permutations < 1)
    throw ConfigError("config: num_permutations must be >= 1");
  if (alphas.empty()) throw ConfigError("config: alphas must be nonempty");
  for (double a : alphas)
    if (!(a > 0.0 && a < 1.0))
      throw ConfigError("config: alphas must lie in (0, 1)");
  if (methods.empty()) throw ConfigError("config: methods must be nonempty");
  for (const auto& method : methods)
    if (method != "rs" && method != "fl" && method != "dr" &&
        method != "js" && method != "bm")
      throw ConfigError("config: unknown method " + method);
  visible_columns(q, hidden_mask);  // range check
  if (threads < 1) throw ConfigError("config: threads must be >= 1");
}

std::string ExperimentConfig::to_json() const {
  json j;
  j["d"] = d;
  j["q"] = q;
  j["r"] = r;
  j["ell"] = ell;
  j["rho_beta"] = rho_beta;
  j["rho_gamma"] = rho_gamma;
  j["beta_prior"] = to_string(beta_prior);
  j["gamma_prior"] = to_string(gamma_prior);
  j["student_df"] = student_df;
  j["m"] = m;
  j["k"] = k;
  j["num_permutations"] = num_permutations;
  j["alphas"] = alphas;
  j["reps"] = reps;
  json mask = json::array();
  for (int i : hidden_mask) mask.push_back(i + 1);  // 1-based externally
  j["hidden_mask"] = mask;
  j["methods"] = methods;
  j["seed"] = seed;
  j["threads"] = threads;
  j["ridge_lambda"] = ridge_lambda ? json(*ridge_lambda) : json(nullptr);
  j["var_a"] = var_a ? json(*var_a) : json(nullptr);
  j["var_b"] = var_b ? json(*var_b) : json(nullptr);
  return j.dump(2);
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("config JSON: ") + e.what());
  }
  ExperimentConfig c;
  try {
    c.d = j.at("d").get<int>();
    c.q = j.at("q").get<int>();
    c.r = j.value("r", 1);
    c.ell = j.at("ell").get<int>();
    c.rho_beta = j.value("rho_beta", 0.0);
    c.rho_gamma = j.value("rho_gamma", 1.0);
    c.beta_prior = prior_kind_from_string(j.value("beta_prior", "sphere"));
    c.gamma_prior = prior_kind_from_string(j.value("gamma_prior", "sphere"));
    c.student_df = j.value("student_df", 2.2);
    c.m = j.at("m").get<int>();
    c.k = j.at("k").get<int>();
    c.num_permutations = j.at("num_permutations").get<int>();
    if (j.contains("alphas")) c.alphas = j["alphas"].get<std::vector<double>>();
    c.reps = j.at("reps").get<int>();
    c.hidden_mask.clear();
    if (j.contains("hidden_mask"))
      for (const auto& v : j["hidden_mask"])
        c.hidden_mask.push_back(v.get<int>() - 1);  // to 0-based
    if (j.contains("methods"))
      c.methods = j["methods"].get<std::vector<std::string>>();
    c.seed = j.value("seed", std::uint64_t{1});
    c.threads = j.value("threads", 1);
    if (j.contains("ridge_lambda") && !j["ridge_lambda"].is_null())
      c.ridge_lambda = j["ridge_lambda"].get<double>();
    if (j.contains("var_a") && !j["var_a"].is_null())
      c.var_a = j["var_a"].get<double>();
    if (j.contains("var_b") && !j["var_b"].is_null())
      c.var_b = j["var_b"].get<double>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("config JSON: ") + e.what());
  }
  c.validate();
  return c;
}

double ArmResult::rejection_rate(double alpha) const {
  if (p_values.empty()) return std::numeric_limits<double>::quiet_NaN();
  long count = 0;
  for (double p : p_values)
    if (p <= alpha) ++count;
  return static_cast<double>(count) / static_cast<double>(p_values.size());
}

const ArmResult& ExperimentReport::arm(const std::string& method,
                                       const std::string& setting) const {
  for (const auto& r : results)
    if (r.method == method && r.setting == setting) return r;
  throw InvalidArgument("report: no result for " + method + "/" + setting);
}

std::string ExperimentReport::to_json() const {
  json j;
  j["config"] = json::parse(config.to_json());
  json results_json = json::array();
  for (const auto& r : results) {
    json rj;
    rj["method"] = r.method;
    rj["setting"] = r.setting;
    rj["rep_index"] = r.rep_index;
    rj["p_values"] = r.p_values;
    rj["failures"] = r.failures;
    rj["failure_messages"] = r.failure_messages;
    json rates = json::object();
    for (double a : config.alphas) {
      std::ostringstream key;
      key << a;
      rates[key.str()] = nan_to_null(r.rejection_rate(a));
    }
    rj["rejection_rates"] = rates;
    results_json.push_back(std::move(rj));
  }
  j["results"] = results_json;
  j["diagnostics"] = {
      {"condition_c", nan_to_null(diagnostics.condition_c)},
      {"condition_sigma", nan_to_null(diagnostics.condition_sigma)},
      {"limit_constant", nan_to_null(diagnostics.limit_constant)},
      {"type1_bound_mean", nan_to_null(diagnostics.type1_bound_mean)}};
  j["wall_seconds"] = wall_seconds;
  return j.dump(2);
}

ExperimentReport ExperimentReport::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("report JSON: ") + e.what());
  }
  ExperimentReport report;
  try {
    report.config = ExperimentConfig::from_json(j.at("config").dump());
    for (const auto& rj : j.at("results")) {
      ArmResult r;
      r.method = rj.at("method").get<std::string>();
      r.setting = rj.at("setting").get<std::string>();
      r.rep_index = rj.at("rep_index").get<std::vector<int>>();
      r.p_values = rj.at("p_values").get<std::vector<double>>();
      r.failures = rj.at("failures").get<int>();
      r.failure_messages =
          rj.at("failure_messages").get<std::vector<std::string>>();
      report.results.push_back(std::move(r));
    }
    const auto& dj = j.at("diagnostics");
    report.diagnostics.condition_c = json_number_or_nan(dj.at("condition_c"));
    report.diagnostics.condition_sigma =
        json_number_or_nan(dj.at("condition_sigma"));
    report.diagnostics.limit_constant =
        json_number_or_nan(dj.at("limit_constant"));
    report.diagnostics.type1_bound_mean =
        json_number_or_nan(dj.at("type1_bound_mean"));
    report.wall_seconds = j.at("wall_seconds").get<double>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("report JSON: ") + e.what());
  }
  return report;
}

Dataset apply_hidden_mask(const Dataset& data,
                          const std::vector<int>& hidden_mask) {
  if (hidden_mask.empty()) return data;
  return data.select_background(
      visible_columns(static_cast<int>(data.q()), hidden_mask));
}

RsRunResult run_rs_pipeline(const Dataset& data, const RsOptions& opts) {
  const int q_obs = static_cast<int>(data.q());
  if (q_obs < 2)
    throw ConfigError(
        "rs pipeline: need at least two visible background columns");
  if (opts.k < 1 || opts.k >= q_obs)
    throw ConfigError("rs pipeline: need 1 <= k < visible q");
  const SubsetFamily family = random_selection(
      q_obs, opts.k, opts.m, stream_key(opts.seed, "subsets"));
  RsRunResult out;
  out.gamma_hat = model_average_gamma(data.y, data.w, family);
  PermutationTestOptions test_opts;
  test_opts.num_permutations = opts.num_permutations;
  test_opts.seed = stream_key(opts.seed, "test");
  test_opts.threads = opts.threads;
  out.test = permutation_test(data, family, out.gamma_hat, test_opts);
  return out;
}

namespace {

struct RepOutcome {
  bool ok = false;
  double p_value = 1.0;
  double type1_bound = std::numeric_limits<double>::quiet_NaN();
  std::string error;
};

void fill_arm_diag_bound(const std::vector<RepOutcome>& outcomes,
                         OracleDiagnostics& diag) {
  double sum = 0.0;
  int n = 0;
  for (const auto& o : outcomes)
    if (o.ok && std::isfinite(o.type1_bound)) {
      sum += o.type1_bound;
      ++n;
    }
  if (n > 0) diag.type1_bound_mean = sum / n;
}

ArmResult collect_arm(const std::string& method, const std::string& setting,
                      const std::vector<RepOutcome>& outcomes) {
  ArmResult r;
  r.method = method;
  r.setting = setting;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (outcomes[i].ok) {
      r.rep_index.push_back(static_cast<int>(i));
      r.p_values.push_back(outcomes[i].p_value);
    } else {
      ++r.failures;
      if (r.failure_messages.size() < 10)
        r.failure_messages.push_back("rep " + std::to_string(i) + ": " +
                                     outcomes[i].error);
    }
  }
  return r;
}

}  // namespace

ExperimentReport run_type1_power_experiment(const ExperimentConfig& config) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();

  SemGenOptions gen;
  gen.beta_prior = config.beta_prior;
  gen.gamma_prior = config.gamma_prior;
  gen.student_df = config.student_df;
  if (config.var_a) gen.var_a = *config.var_a;
  if (config.var_b) gen.var_b = *config.var_b;
  SemParams params_power =
      generate_sem_params(config.d, config.q, config.r, config.rho_beta,
                          config.rho_gamma, config.seed, gen);
  SemParams params_null = params_power;
  params_null.beta.setZero();

  const std::vector<int> visible =
      visible_columns(config.q, config.hidden_mask);
  const bool uses_rs = std::find(config.methods.begin(), config.methods.end(),
                                 "rs") != config.methods.end();
  if (uses_rs && static_cast<int>(visible.size()) < 2)
    throw ConfigError(
        "rs pipeline: need at least two visible background columns");

  ExperimentReport report;
  report.config = config;

  std::vector<std::pair<std::string, const SemParams*>> arms;
  arms.emplace_back("type1", &params_null);
  if (config.rho_beta > 0.0) arms.emplace_back("power", &params_power);

  for (const auto& [arm_name, params] : arms) {
    for (const auto& method : config.methods) {
      if (method == "js" || method == "bm") {
        // External reference methods; reported as unavailable.
        ArmResult marker;
        marker.method = method;
        marker.setting = arm_name;
        marker.failure_messages.push_back(
            "method unavailable: external implementation not included");
        report.results.push_back(std::move(marker));
        continue;
      }
      std::vector<RepOutcome> outcomes(
          static_cast<std::size_t>(config.reps));
      // Reps are independent and write disjoint slots; permutation loops
      // inside a rep stay serial when reps run in parallel.
      const int rep_threads = config.reps > 1 ? config.threads : 1;
      const int inner_threads = config.reps > 1 ? 1 : config.threads;
      parallel_for(config.reps, rep_threads, [&](int rep) {
        RepOutcome& out = outcomes[static_cast<std::size_t>(rep)];
        try {
          const std::uint64_t rep_seed =
              stream_key(config.seed, "rep." + arm_name,
                         static_cast<std::uint64_t>(rep));
          const Dataset data_full =
              sample_dataset(*params, config.ell, rep_seed);
          const Dataset data = apply_hidden_mask(data_full,
                                                 config.hidden_mask);
          if (method == "rs") {
            RsOptions rs_opts;
            rs_opts.m = config.m;
            rs_opts.k = config.k;
            rs_opts.num_permutations = config.num_permutations;
            rs_opts.seed = stream_key(rep_seed, "rs");
            rs_opts.threads = inner_threads;
            RsRunResult rs = run_rs_pipeline(data, rs_opts);
            out.p_value = rs.test.p_value;
            // Theorem-2 misfit diagnostic against the full W and true gamma.
            Eigen::VectorXd gamma_hat_full =
                Eigen::VectorXd::Zero(config.q);
            for (std::size_t c = 0; c < visible.size(); ++c)
              gamma_hat_full(visible[c]) =
                  rs.gamma_hat.gamma(static_cast<Eigen::Index>(c));
            GammaEstimate padded;
            padded.gamma = gamma_hat_full;
            padded.intercept = rs.gamma_hat.intercept;
            padded.method = rs.gamma_hat.method;
            out.type1_bound = type1_bound_estimate(
                data_full.w, params->gamma, padded, params->sigma_y,
                config.num_permutations);
          } else {
            BaselineOptions opts;
            opts.lambda = config.ridge_lambda;
            opts.num_permutations = config.num_permutations;
            opts.threads = inner_threads;
            opts.seed = stream_key(rep_seed, method);
            const BaselineResult res =
                method == "fl" ? freedman_lane_test(data, opts)
                               : double_residualization_test(data, opts);
            out.p_value = res.p_value;
          }
          out.ok = true;
        } catch (const std::exception& e) {
          out.error = e.what();
        }
      });
      if (method == "rs" && arm_name == "type1")
        fill_arm_diag_bound(outcomes, report.diagnostics);
      report.results.push_back(collect_arm(method, arm_name, outcomes));
    }
  }

  // Population diagnostics on the visible part of the model.
  try {
    if (static_cast<int>(visible.size()) >= 2 &&
        config.k < static_cast<int>(visible.size())) {
      SemParams vis = params_null;
      Eigen::VectorXi idx(static_cast<Eigen::Index>(visible.size()));
      for (std::size_t i = 0; i < visible.size(); ++i)
        idx(static_cast<Eigen::Index>(i)) = visible[i];
      vis.a = params_null.a(idx, Eigen::all);
      vis.gamma = params_null.gamma(idx);
      vis.sigma_w = params_null.sigma_w(idx);
      const int m_diag = std::min(config.m, 200);
      const SubsetFamily family =
          random_selection(static_cast<int>(visible.size()), config.k, m_diag,
                           stream_key(config.seed, "diag"));
      const auto strength = condition_strength(vis, family);
      report.diagnostics.condition_c = strength.first;
      report.diagnostics.condition_sigma = strength.second;
      report.diagnostics.limit_constant = limit_constant_null(vis, family);
    }
  } catch (const Error&) {
    // Diagnostics are best-effort; a degenerate model leaves them NaN.
  }

  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return report;
}

std::vector<ExperimentReport> run_q_sweep(const ExperimentConfig& config,
                                          const std::vector<int>& q_list) {
  if (q_list.empty()) throw ConfigError("q sweep: empty q list");
  for (std::size_t i = 1; i < q_list.size(); ++i)
    if (q_list[i] <= q_list[i - 1])
      throw ConfigError("q sweep: q list must be strictly ascending");
  std::vector<ExperimentReport> series;
  for (int q : q_list) {
    ExperimentConfig c = config;
    c.q = q;
    ExperimentReport report = run_type1_power_experiment(c);
    for (auto& r : report.results)
      r.setting = "q=" + std::to_string(q) + ":" + r.setting;
    series.push_back(std::move(report));
  }
  return series;
}

namespace {

std::string sidecar_path(const std::string& path) {
  const auto dot = path.find_last_of('.');
  const auto slash = path.find_last_of('/');
  const bool has_ext =
      dot != std::string::npos && (slash == std::string::npos || dot > slash);
  const std::string stem = has_ext ? path.substr(0, dot) : path;
  return stem + "_pvalues.csv";
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << content;
  if (!out) throw IoError("write failed: " + path);
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

void emit_series(const std::vector<ExperimentReport>& series,
                 const std::string& path, ReportFormat format) {
  if (series.empty()) throw InvalidArgument("emit_report: empty series");
  if (format == ReportFormat::json) {
    if (series.size() == 1) {
      write_file(path, series[0].to_json() + "\n");
      return;
    }
    std::string out = "[\n";
    for (std::size_t i = 0; i < series.size(); ++i) {
      out += series[i].to_json();
      if (i + 1 < series.size()) out += ",";
      out += "\n";
    }
    out += "]\n";
    write_file(path, out);
    return;
  }
  std::string main_csv = "method,setting,alpha,rejection_rate,reps,seed\n";
  std::string sidecar = "method,setting,rep,p_value\n";
  for (const auto& report : series) {
    for (const auto& r : report.results) {
      for (double a : report.config.alphas) {
        main_csv += r.method + "," + r.setting + "," + format_double(a) + "," +
                    format_double(r.rejection_rate(a)) + "," +
                    std::to_string(r.p_values.size()) + "," +
                    std::to_string(report.config.seed) + "\n";
      }
      for (std::size_t i = 0; i < r.p_values.size(); ++i)
        sidecar += r.method + "," + r.setting + "," +
                   std::to_string(r.rep_index[i]) + "," +
                   format_double(r.p_values[i]) + "\n";
    }
  }
  write_file(path, main_csv);
  write_file(sidecar_path(path), sidecar);
}

}  // namespace

void emit_report(const ExperimentReport& report, const std::string& path,
                 ReportFormat format) {
  emit_series({report}, path, format);
}

void emit_report(const std::vector<ExperimentReport>& series,
                 const std::string& path, ReportFormat format) {
  emit_series(series, path, format);
}

}  // namespace rsc
