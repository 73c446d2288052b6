#include "rsc/csv.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "rsc/kernels.hpp"
#include "rsc/parallel.hpp"
#include "rsc/regression.hpp"

namespace rsc {

using nlohmann::json;

void ColumnSchema::validate() const {
  if (target.empty()) throw ConfigError("schema: target column is required");
  if (causes.empty()) throw ConfigError("schema: at least one cause column");
  if (min_env_size < 1) throw ConfigError("schema: min_env_size must be >= 1");
  std::set<std::string> seen;
  auto add = [&seen](const std::string& name, const char* role) {
    if (name.empty()) throw ConfigError("schema: empty column name");
    if (!seen.insert(name).second)
      throw ConfigError("schema: column " + name + " assigned twice (" +
                        role + ")");
  };
  add(target, "target");
  for (const auto& c : causes) add(c, "cause");
  if (environment) add(*environment, "environment");
  for (const auto& c : background) add(c, "background");
  for (const auto& c : drop) add(c, "drop");
}

std::string ColumnSchema::to_json() const {
  json j;
  j["target"] = target;
  j["causes"] = causes;
  j["environment"] = environment ? json(*environment) : json(nullptr);
  j["background"] = background;
  j["drop"] = drop;
  j["min_env_size"] = min_env_size;
  return j.dump(2);
}

ColumnSchema ColumnSchema::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("schema JSON: ") + e.what());
  }
  ColumnSchema s;
  try {
    s.target = j.at("target").get<std::string>();
    s.causes = j.at("causes").get<std::vector<std::string>>();
    if (j.contains("environment") && !j["environment"].is_null())
      s.environment = j["environment"].get<std::string>();
    if (j.contains("background"))
      s.background = j["background"].get<std::vector<std::string>>();
    if (j.contains("drop")) s.drop = j["drop"].get<std::vector<std::string>>();
    s.min_env_size = j.value("min_env_size", 70);
  } catch (const json::exception& e) {
    throw ParseError(std::string("schema JSON: ") + e.what());
  }
  s.validate();
  return s;
}

ColumnSchema ColumnSchema::from_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open schema file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

Eigen::Index EnvironmentCollection::total_rows() const {
  Eigen::Index total = 0;
  for (const auto& g : groups) total += g.data.rows();
  return total;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  bool in_quotes = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else {
      field += c;
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

double parse_cell(const std::string& cell, std::size_t line_number,
                  const std::string& column) {
  const std::string t = trim(cell);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc{} || ptr != t.data() + t.size())
    throw ParseError("non-numeric cell '" + t + "' at line " +
                     std::to_string(line_number) + ", column " + column);
  return value;
}

struct ParsedCsv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;  // raw cells
  std::vector<std::size_t> line_numbers;
};

ParsedCsv read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open data file: " + path);
  ParsedCsv out;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (out.header.empty()) {
      for (auto& f : fields) f = trim(f);
      out.header = std::move(fields);
      continue;
    }
    if (fields.size() != out.header.size())
      throw ParseError("line " + std::to_string(line_number) + " has " +
                       std::to_string(fields.size()) + " fields, expected " +
                       std::to_string(out.header.size()));
    out.rows.push_back(std::move(fields));
    out.line_numbers.push_back(line_number);
  }
  if (out.header.empty()) throw ParseError("empty CSV: " + path);
  return out;
}

struct ResolvedColumns {
  std::size_t target = 0;
  std::vector<std::size_t> causes;
  std::optional<std::size_t> environment;
  std::vector<std::size_t> background;
  std::vector<std::string> background_names;
};

ResolvedColumns resolve_columns(const ParsedCsv& csv,
                                const ColumnSchema& schema) {
  schema.validate();
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < csv.header.size(); ++i)
    index[csv.header[i]] = i;
  auto find = [&index](const std::string& name) {
    const auto it = index.find(name);
    if (it == index.end()) throw ParseError("missing column: " + name);
    return it->second;
  };
  ResolvedColumns cols;
  cols.target = find(schema.target);
  for (const auto& c : schema.causes) cols.causes.push_back(find(c));
  if (schema.environment) cols.environment = find(*schema.environment);
  if (!schema.background.empty()) {
    for (const auto& c : schema.background) {
      cols.background.push_back(find(c));
      cols.background_names.push_back(c);
    }
  } else {
    std::set<std::string> taken{schema.target};
    for (const auto& c : schema.causes) taken.insert(c);
    if (schema.environment) taken.insert(*schema.environment);
    for (const auto& c : schema.drop) taken.insert(c);
    for (std::size_t i = 0; i < csv.header.size(); ++i) {
      if (!taken.count(csv.header[i])) {
        cols.background.push_back(i);
        cols.background_names.push_back(csv.header[i]);
      }
    }
  }
  return cols;
}

Dataset rows_to_dataset(const ParsedCsv& csv, const ResolvedColumns& cols,
                        const ColumnSchema& schema,
                        const std::vector<std::size_t>& row_ids) {
  const Eigen::Index n = static_cast<Eigen::Index>(row_ids.size());
  Eigen::VectorXd y(n);
  Eigen::MatrixXd x(n, static_cast<Eigen::Index>(cols.causes.size()));
  Eigen::MatrixXd w(n, static_cast<Eigen::Index>(cols.background.size()));
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& cells = csv.rows[row_ids[static_cast<std::size_t>(r)]];
    const std::size_t line =
        csv.line_numbers[row_ids[static_cast<std::size_t>(r)]];
    y(r) = parse_cell(cells[cols.target], line, schema.target);
    for (std::size_t j = 0; j < cols.causes.size(); ++j)
      x(r, static_cast<Eigen::Index>(j)) =
          parse_cell(cells[cols.causes[j]], line, schema.causes[j]);
    for (std::size_t j = 0; j < cols.background.size(); ++j)
      w(r, static_cast<Eigen::Index>(j)) = parse_cell(
          cells[cols.background[j]], line, cols.background_names[j]);
  }
  return Dataset(std::move(y), std::move(x), std::move(w), schema.causes,
                 cols.background_names);
}

}  // namespace

EnvironmentCollection load_csv(const std::string& path,
                               const ColumnSchema& schema) {
  const ParsedCsv csv = read_csv(path);
  const ResolvedColumns cols = resolve_columns(csv, schema);

  // Group row ids by environment value, first-appearance order.
  std::vector<std::string> labels;
  std::vector<std::vector<std::size_t>> groups;
  std::map<std::string, std::size_t> group_of;
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    std::string label = "all";
    if (cols.environment) label = trim(csv.rows[r][*cols.environment]);
    auto it = group_of.find(label);
    if (it == group_of.end()) {
      it = group_of.emplace(label, labels.size()).first;
      labels.push_back(label);
      groups.emplace_back();
    }
    groups[it->second].push_back(r);
  }

  EnvironmentCollection out;
  for (std::size_t g = 0; g < labels.size(); ++g) {
    if (static_cast<int>(groups[g].size()) < schema.min_env_size) continue;
    Environment env;
    env.label = labels[g];
    env.data = rows_to_dataset(csv, cols, schema, groups[g]);
    out.groups.push_back(std::move(env));
  }
  if (out.groups.empty())
    throw ParseError("no environment group reaches min_env_size = " +
                     std::to_string(schema.min_env_size) + " in " + path);
  return out;
}

Dataset load_csv_pooled(const std::string& path, const ColumnSchema& schema) {
  const ParsedCsv csv = read_csv(path);
  const ResolvedColumns cols = resolve_columns(csv, schema);
  std::vector<std::size_t> all(csv.rows.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  if (all.empty()) throw ParseError("no data rows in " + path);
  return rows_to_dataset(csv, cols, schema, all);
}

Dataset pool_environments(const EnvironmentCollection& collection) {
  if (collection.groups.empty())
    throw InvalidArgument("pool_environments: empty collection");
  const Eigen::Index total = collection.total_rows();
  const auto& first = collection.groups.front().data;
  Eigen::VectorXd y(total);
  Eigen::MatrixXd x(total, first.d());
  Eigen::MatrixXd w(total, first.q());
  Eigen::Index at = 0;
  for (const auto& g : collection.groups) {
    if (g.data.d() != first.d() || g.data.q() != first.q())
      throw InvalidArgument("pool_environments: group dimensions differ");
    y.segment(at, g.data.rows()) = g.data.y;
    x.middleRows(at, g.data.rows()) = g.data.x;
    w.middleRows(at, g.data.rows()) = g.data.w;
    at += g.data.rows();
  }
  return Dataset(std::move(y), std::move(x), std::move(w), first.names_x,
                 first.names_w);
}

RealAnalysisResult run_real_analysis(const EnvironmentCollection& collection,
                                     const RealAnalysisOptions& opts) {
  if (collection.groups.empty())
    throw InvalidArgument("run_real_analysis: empty collection");
  if (opts.num_permutations < 1)
    throw InvalidArgument("run_real_analysis: need at least one permutation");
  const int m = collection.count();
  const auto& first = collection.groups.front().data;
  const int d = static_cast<int>(first.d());
  const Eigen::Index q = first.q();

  RealAnalysisResult out;
  if (m == 1)
    out.warnings.push_back(
        "single environment: the stability statistic over one coefficient "
        "vector is identically zero, the test has no power");

  // Per-environment regressions of Y on [1, X, W_env]; the coefficient maps
  // let every permutation replicate reuse the factorizations.
  std::vector<RowMajorMatrix> extractors;
  std::vector<Eigen::Index> offsets;
  Eigen::Index total = 0;
  GammaEstimate gamma_avg;
  gamma_avg.gamma = Eigen::VectorXd::Zero(q);
  gamma_avg.method = GammaMethod::uniform_average;
  std::vector<int> all_cols(static_cast<std::size_t>(q));
  for (Eigen::Index j = 0; j < q; ++j)
    all_cols[static_cast<std::size_t>(j)] = static_cast<int>(j);

  for (const auto& g : collection.groups) {
    if (g.data.d() != first.d() || g.data.q() != first.q())
      throw InvalidArgument("run_real_analysis: group dimensions differ");
    Eigen::MatrixXd design(g.data.rows(), 1 + d + q);
    design.col(0).setOnes();
    design.middleCols(1, d) = g.data.x;
    design.rightCols(q) = g.data.w;
    if (g.data.rows() <= design.cols())
      throw InvalidArgument("run_real_analysis: environment " + g.label +
                            " has too few rows for the regression");
    LeastSquaresSolver solver(design);
    extractors.push_back(RowMajorMatrix(solver.coefficient_map(1, d)));
    offsets.push_back(total);
    total += g.data.rows();

    GammaEstimate sub = q > 0 ? gamma_hat_submodel(g.data.y, g.data.w,
                                                   all_cols)
                              : GammaEstimate{Eigen::VectorXd::Zero(0),
                                              g.data.y.mean(),
                                              GammaMethod::single_subset};
    gamma_avg.gamma += sub.gamma / m;
    gamma_avg.intercept += sub.intercept / m;
  }

  // Pooled response, fitted nuisance, and residuals.
  Eigen::VectorXd y(total), fitted(total);
  for (int g = 0; g < m; ++g) {
    const auto& data = collection.groups[static_cast<std::size_t>(g)].data;
    y.segment(offsets[static_cast<std::size_t>(g)], data.rows()) = data.y;
    fitted.segment(offsets[static_cast<std::size_t>(g)], data.rows()) =
        gamma_avg.fitted(data.w);
  }
  const Eigen::VectorXd resid = y - fitted;

  auto statistic_for = [&](const Eigen::VectorXd& response) {
    RowMajorMatrix coeffs(m, d);
    for (int g = 0; g < m; ++g) {
      const auto& ex = extractors[static_cast<std::size_t>(g)];
      const Eigen::Index rows_g = ex.cols();
      Eigen::VectorXd beta_g(d);
      kernels::matvec_rows(
          ex.data(), static_cast<std::size_t>(d),
          static_cast<std::size_t>(rows_g), static_cast<std::size_t>(rows_g),
          response.segment(offsets[static_cast<std::size_t>(g)], rows_g)
              .data(),
          beta_g.data());
      coeffs.row(g) = beta_g.transpose();
    }
    return stability_statistic_rowmajor(coeffs.data(), m, d);
  };

  PermutationTestResult result;
  result.m = m;
  result.num_permutations = opts.num_permutations;
  result.seed = opts.seed;
  result.v_observed = statistic_for(y);
  result.v_null.resize(opts.num_permutations);
  parallel_for(opts.num_permutations, opts.threads, [&](int i) {
    RngStream rng =
        substream(opts.seed, "perm", static_cast<std::uint64_t>(i) + 1);
    const auto perm = random_permutation(static_cast<int>(total), rng);
    Eigen::VectorXd pseudo(total);
    kernels::permuted_add(fitted.data(), resid.data(), perm.data(),
                          static_cast<std::size_t>(total), pseudo.data());
    result.v_null(i) = statistic_for(pseudo);
  });
  result.p_value =
      permutation_p_value(result.v_observed, result.v_null, Tail::lower);
  out.test = result;
  return out;
}

}  // namespace rsc
