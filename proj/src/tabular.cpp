#include "watch/tabular.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace watch {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool is_missing_token(const std::string& tok) {
  return tok.empty() || tok == "NA";
}

bool parse_number(const std::string& tok, double* out) {
  if (tok.empty()) return false;
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end != tok.c_str() + tok.size() || errno == ERANGE) return false;
  *out = v;
  return true;
}

/// Splits CSV text into records of fields.  Handles quoted fields with
/// doubled-quote escapes and both LF and CRLF line ends.
std::vector<std::vector<std::string>> split_records(const std::string& text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;

  auto end_field = [&]() {
    record.push_back(field);
    field.clear();
    field_started = false;
  };
  auto end_record = [&]() {
    end_field();
    records.push_back(std::move(record));
    record.clear();
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field_started && field.empty()) {
          in_quotes = true;
          field_started = true;
        } else {
          field += c;  // stray quote inside an unquoted field
        }
        break;
      case ',':
        end_field();
        break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
        end_record();
        break;
      case '\n':
        end_record();
        break;
      default:
        field += c;
        field_started = true;
        break;
    }
  }
  if (in_quotes) throw DataError("unterminated quoted field in CSV input");
  if (field_started || !field.empty() || !record.empty()) end_record();
  return records;
}

Column build_continuous(const std::string& name,
                        const std::vector<std::string>& tokens) {
  Column col;
  col.name = name;
  col.kind = ColumnKind::Continuous;
  col.values.resize(static_cast<Eigen::Index>(tokens.size()));
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (is_missing_token(tokens[i])) {
      col.values[static_cast<Eigen::Index>(i)] = kNaN;
    } else {
      double v = 0;
      parse_number(tokens[i], &v);
      col.values[static_cast<Eigen::Index>(i)] = v;
    }
  }
  return col;
}

Column build_categorical(const std::string& name,
                         const std::vector<std::string>& tokens) {
  Column col;
  col.name = name;
  col.kind = ColumnKind::Categorical;
  std::map<std::string, int> index;
  col.values.resize(static_cast<Eigen::Index>(tokens.size()));
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (is_missing_token(tokens[i])) {
      col.values[static_cast<Eigen::Index>(i)] = kNaN;
      continue;
    }
    auto it = index.find(tokens[i]);
    if (it == index.end()) {
      it = index.emplace(tokens[i], static_cast<int>(col.levels.size())).first;
      col.levels.push_back(tokens[i]);
    }
    col.values[static_cast<Eigen::Index>(i)] = it->second;
  }
  return col;
}

bool all_numeric(const std::vector<std::string>& tokens) {
  bool any = false;
  for (const auto& tok : tokens) {
    if (is_missing_token(tok)) continue;
    double v;
    if (!parse_number(tok, &v)) return false;
    any = true;
  }
  return any;  // a fully missing column is treated as categorical
}

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

bool needs_quoting(const std::string& s) {
  return s.find_first_of(",\"\n\r") != std::string::npos;
}

std::string csv_escape(const std::string& s) {
  if (!needs_quoting(s)) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

}  // namespace

std::string to_string(Evidence e) {
  switch (e) {
    case Evidence::None: return "none";
    case Evidence::Low: return "low";
    case Evidence::Moderate: return "moderate";
    case Evidence::High: return "high";
  }
  return "none";
}

std::string to_string(Direction d) {
  switch (d) {
    case Direction::Positive: return "positive";
    case Direction::Negative: return "negative";
    case Direction::Unspecified: return "unspecified";
  }
  return "unspecified";
}

Evidence evidence_from_string(const std::string& s) {
  if (s == "none") return Evidence::None;
  if (s == "low") return Evidence::Low;
  if (s == "moderate") return Evidence::Moderate;
  if (s == "high") return Evidence::High;
  throw ConfigError("unknown evidence level '" + s +
                    "' (expected none|low|moderate|high)");
}

Direction direction_from_string(const std::string& s) {
  if (s == "positive") return Direction::Positive;
  if (s == "negative") return Direction::Negative;
  if (s == "unspecified") return Direction::Unspecified;
  throw ConfigError("unknown direction '" + s +
                    "' (expected positive|negative|unspecified)");
}

AnalysisPlan plan_from_json(const nlohmann::json& j) {
  AnalysisPlan plan;
  try {
    if (!j.is_object()) throw ConfigError("plan must be a JSON object");
    if (!j.contains("outcome") || !j.contains("treatment") ||
        !j.contains("covariates")) {
      throw ConfigError("plan requires 'outcome', 'treatment', 'covariates'");
    }
    plan.outcome = j.at("outcome").get<std::string>();
    plan.treatment = j.at("treatment").get<std::string>();
    if (!j.at("covariates").is_array() || j.at("covariates").empty()) {
      throw ConfigError("plan 'covariates' must be a non-empty array");
    }
    for (const auto& cj : j.at("covariates")) {
      PlanCovariate c;
      if (cj.is_string()) {
        c.name = cj.get<std::string>();
      } else {
        c.name = cj.at("name").get<std::string>();
        if (cj.contains("evidence")) {
          c.evidence = evidence_from_string(cj.at("evidence").get<std::string>());
        }
        if (cj.contains("direction")) {
          c.direction =
              direction_from_string(cj.at("direction").get<std::string>());
        }
        if (cj.contains("source")) c.source = cj.at("source").get<std::string>();
      }
      plan.covariates.push_back(std::move(c));
    }
    if (j.contains("seed")) plan.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("k_folds")) plan.k_folds = j.at("k_folds").get<int>();
    if (j.contains("n_permutations")) {
      plan.n_permutations = j.at("n_permutations").get<int>();
    }
    if (j.contains("n_trees")) plan.n_trees = j.at("n_trees").get<int>();
    if (j.contains("bootstrap_reps")) {
      plan.bootstrap_reps = j.at("bootstrap_reps").get<int>();
    }
    if (j.contains("top_k")) plan.top_k = j.at("top_k").get<int>();
    if (j.contains("min_level_frac")) {
      plan.min_level_frac = j.at("min_level_frac").get<double>();
    }
    if (j.contains("max_dominance")) {
      plan.max_dominance = j.at("max_dominance").get<double>();
    }
    if (j.contains("propensity")) {
      const auto& pj = j.at("propensity");
      const std::string type = pj.at("type").get<std::string>();
      if (type == "known") {
        plan.propensity.known = true;
        plan.propensity.value = pj.at("value").get<double>();
        if (!(plan.propensity.value > 0.0 && plan.propensity.value < 1.0)) {
          throw ConfigError("known propensity must lie strictly in (0,1)");
        }
      } else if (type == "estimated") {
        plan.propensity.known = false;
      } else {
        throw ConfigError("propensity.type must be 'known' or 'estimated'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed analysis plan: ") + e.what());
  }

  if (plan.outcome.empty() || plan.treatment.empty()) {
    throw ConfigError("plan outcome/treatment names must be non-empty");
  }
  if (plan.outcome == plan.treatment) {
    throw ConfigError("outcome and treatment must be different columns");
  }
  std::set<std::string> seen;
  for (const auto& c : plan.covariates) {
    if (c.name == plan.outcome || c.name == plan.treatment) {
      throw ConfigError("covariate '" + c.name +
                        "' collides with a role column");
    }
    if (!seen.insert(c.name).second) {
      throw ConfigError("duplicate covariate '" + c.name + "' in plan");
    }
    if ((c.evidence == Evidence::Moderate || c.evidence == Evidence::High) &&
        c.source.empty()) {
      throw ConfigError("covariate '" + c.name +
                        "' declares moderate/high evidence but no source");
    }
  }
  if (plan.k_folds < 2) throw ConfigError("k_folds must be at least 2");
  if (plan.n_permutations < 99) {
    throw ConfigError("n_permutations must be at least 99");
  }
  if (plan.n_trees < 1) throw ConfigError("n_trees must be positive");
  if (plan.bootstrap_reps < 0) {
    throw ConfigError("bootstrap_reps must be non-negative");
  }
  if (plan.top_k < 1) throw ConfigError("top_k must be positive");
  if (!(plan.min_level_frac >= 0.0 && plan.min_level_frac < 0.5)) {
    throw ConfigError("min_level_frac must lie in [0, 0.5)");
  }
  if (!(plan.max_dominance > 0.5 && plan.max_dominance <= 1.0)) {
    throw ConfigError("max_dominance must lie in (0.5, 1]");
  }
  return plan;
}

nlohmann::json plan_to_json(const AnalysisPlan& plan) {
  nlohmann::ordered_json j;
  j["outcome"] = plan.outcome;
  j["treatment"] = plan.treatment;
  auto covs = nlohmann::ordered_json::array();
  for (const auto& c : plan.covariates) {
    nlohmann::ordered_json cj;
    cj["name"] = c.name;
    cj["evidence"] = to_string(c.evidence);
    cj["direction"] = to_string(c.direction);
    if (!c.source.empty()) cj["source"] = c.source;
    covs.push_back(cj);
  }
  j["covariates"] = covs;
  j["seed"] = plan.seed;
  j["k_folds"] = plan.k_folds;
  j["n_permutations"] = plan.n_permutations;
  j["n_trees"] = plan.n_trees;
  j["bootstrap_reps"] = plan.bootstrap_reps;
  j["top_k"] = plan.top_k;
  j["min_level_frac"] = plan.min_level_frac;
  j["max_dominance"] = plan.max_dominance;
  j["propensity"] = plan.propensity.known
                        ? nlohmann::ordered_json{{"type", "known"},
                                                 {"value", plan.propensity.value}}
                        : nlohmann::ordered_json{{"type", "estimated"}};
  return j;
}

Dataset parse_csv_text(const std::string& text, const AnalysisPlan& plan) {
  auto records = split_records(text);
  if (records.empty()) throw DataError("CSV input is empty");
  const auto& header = records.front();
  const std::size_t n_cols = header.size();
  if (n_cols == 0) throw DataError("CSV header has no columns");
  {
    std::set<std::string> names;
    for (const auto& h : header) {
      if (h.empty()) throw DataError("CSV header contains an empty name");
      if (!names.insert(h).second) {
        throw DataError("duplicate column '" + h + "' in CSV header");
      }
    }
  }
  const std::size_t n_rows = records.size() - 1;
  if (n_rows == 0) throw DataError("CSV has a header but no data rows");

  std::vector<std::vector<std::string>> cols(n_cols);
  for (auto& c : cols) c.reserve(n_rows);
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != n_cols) {
      throw DataError("CSV row " + std::to_string(r) + " has " +
                      std::to_string(records[r].size()) + " fields, expected " +
                      std::to_string(n_cols));
    }
    for (std::size_t c = 0; c < n_cols; ++c) {
      cols[c].push_back(std::move(records[r][c]));
    }
  }

  Dataset ds;
  ds.roles.outcome = plan.outcome;
  ds.roles.treatment = plan.treatment;
  ds.roles.covariates = plan.covariate_names();

  for (std::size_t c = 0; c < n_cols; ++c) {
    const std::string& name = header[c];
    if (name == plan.treatment) {
      // Role forces the type: binary categorical coded 0/1.
      Column col;
      col.name = name;
      col.kind = ColumnKind::Categorical;
      col.levels = {"0", "1"};
      col.values.resize(static_cast<Eigen::Index>(n_rows));
      bool saw[2] = {false, false};
      for (std::size_t i = 0; i < n_rows; ++i) {
        const std::string& tok = cols[c][i];
        if (is_missing_token(tok)) {
          throw DataError("treatment column '" + name +
                          "' contains missing values");
        }
        double v;
        if (!parse_number(tok, &v) || (v != 0.0 && v != 1.0)) {
          throw DataError("treatment not binary: column '" + name +
                          "' has value '" + tok + "' (expected 0 or 1)");
        }
        col.values[static_cast<Eigen::Index>(i)] = v;
        saw[static_cast<int>(v)] = true;
      }
      if (!saw[0] || !saw[1]) {
        throw DataError("treatment not binary: column '" + name +
                        "' must contain both arms");
      }
      ds.columns.push_back(std::move(col));
    } else if (name == plan.outcome) {
      if (!all_numeric(cols[c])) {
        throw DataError("outcome column '" + name + "' must be numeric");
      }
      Column col = build_continuous(name, cols[c]);
      if (col.missing_count() > 0) {
        throw DataError("outcome column '" + name +
                        "' contains missing values");
      }
      ds.columns.push_back(std::move(col));
    } else if (all_numeric(cols[c])) {
      ds.columns.push_back(build_continuous(name, cols[c]));
    } else {
      ds.columns.push_back(build_categorical(name, cols[c]));
    }
  }

  if (!ds.has_column(plan.outcome)) {
    throw DataError("outcome column '" + plan.outcome + "' not found in CSV");
  }
  if (!ds.has_column(plan.treatment)) {
    throw DataError("treatment column '" + plan.treatment +
                    "' not found in CSV");
  }
  for (const auto& name : ds.roles.covariates) {
    if (!ds.has_column(name)) {
      throw DataError("covariate column '" + name + "' not found in CSV");
    }
  }
  return ds;
}

Dataset load_csv(const std::string& path, const AnalysisPlan& plan) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open data file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv_text(buf.str(), plan);
}

void write_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write data file '" + path + "'");
  for (std::size_t j = 0; j < ds.columns.size(); ++j) {
    if (j) out << ',';
    out << csv_escape(ds.columns[j].name);
  }
  out << '\n';
  const Eigen::Index n = ds.n_rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < ds.columns.size(); ++j) {
      if (j) out << ',';
      const Column& col = ds.columns[j];
      if (col.is_missing(i)) continue;  // empty field
      if (col.kind == ColumnKind::Categorical) {
        out << csv_escape(col.level_name(i));
      } else {
        out << format_value(col.values[i]);
      }
    }
    out << '\n';
  }
}

Dataset impute_baseline(const Dataset& ds) {
  Dataset out = ds;
  for (const auto& name : ds.roles.covariates) {
    Column& col = out.column(name);
    const Eigen::Index n = col.size();
    std::vector<double> observed;
    observed.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!col.is_missing(i)) observed.push_back(col.values[i]);
    }
    if (observed.empty()) {
      throw DataError("covariate '" + name +
                      "' has no observed values to impute from");
    }
    double fill = 0;
    if (col.kind == ColumnKind::Continuous) {
      std::sort(observed.begin(), observed.end());
      const std::size_t m = observed.size();
      fill = (m % 2 == 1) ? observed[m / 2]
                          : 0.5 * (observed[m / 2 - 1] + observed[m / 2]);
    } else {
      std::vector<Eigen::Index> counts(col.levels.size(), 0);
      for (double v : observed) ++counts[static_cast<std::size_t>(v)];
      std::size_t best = 0;
      for (std::size_t l = 1; l < counts.size(); ++l) {
        if (counts[l] > counts[best]) best = l;  // ties keep the earlier level
      }
      fill = static_cast<double>(best);
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      if (col.is_missing(i)) col.values[i] = fill;
    }
  }
  return out;
}

Dataset merge_sparse_levels(const Dataset& ds, double min_frac) {
  if (!(min_frac > 0.0 && min_frac < 0.5)) {
    throw std::invalid_argument("min_frac must lie in (0, 0.5)");
  }
  Dataset out = ds;
  const double threshold = min_frac * static_cast<double>(ds.n_rows());
  for (const auto& name : ds.roles.covariates) {
    Column& col = out.column(name);
    if (col.kind != ColumnKind::Categorical) continue;
    std::vector<Eigen::Index> counts(col.levels.size(), 0);
    for (Eigen::Index i = 0; i < col.size(); ++i) {
      if (!col.is_missing(i)) ++counts[static_cast<std::size_t>(col.values[i])];
    }
    std::vector<bool> sparse(col.levels.size(), false);
    bool any_sparse = false;
    for (std::size_t l = 0; l < counts.size(); ++l) {
      if (static_cast<double>(counts[l]) < threshold) {
        sparse[l] = true;
        any_sparse = true;
      }
    }
    if (!any_sparse) continue;

    std::vector<std::string> new_levels;
    std::vector<double> remap(col.levels.size(), -1);
    for (std::size_t l = 0; l < col.levels.size(); ++l) {
      if (!sparse[l] && col.levels[l] != "OTHER") {
        remap[l] = static_cast<double>(new_levels.size());
        new_levels.push_back(col.levels[l]);
      }
    }
    const double other_idx = static_cast<double>(new_levels.size());
    new_levels.push_back("OTHER");
    for (std::size_t l = 0; l < col.levels.size(); ++l) {
      if (remap[l] < 0) remap[l] = other_idx;
    }
    for (Eigen::Index i = 0; i < col.size(); ++i) {
      if (!col.is_missing(i)) {
        col.values[i] = remap[static_cast<std::size_t>(col.values[i])];
      }
    }
    col.levels = std::move(new_levels);
  }
  return out;
}

std::pair<Dataset, std::vector<std::string>> drop_noninformative(
    const Dataset& ds, double max_dominance) {
  if (!(max_dominance > 0.0 && max_dominance <= 1.0)) {
    throw std::invalid_argument("max_dominance must lie in (0, 1]");
  }
  std::vector<std::string> dropped;
  const double n = static_cast<double>(ds.n_rows());
  for (const auto& name : ds.roles.covariates) {
    const Column& col = ds.column(name);
    std::map<double, Eigen::Index> counts;
    for (Eigen::Index i = 0; i < col.size(); ++i) {
      if (!col.is_missing(i)) ++counts[col.values[i]];
    }
    Eigen::Index top = 0;
    for (const auto& [value, count] : counts) top = std::max(top, count);
    if (static_cast<double>(top) > max_dominance * n) dropped.push_back(name);
  }
  if (dropped.empty()) return {ds, dropped};

  Dataset out;
  out.roles.outcome = ds.roles.outcome;
  out.roles.treatment = ds.roles.treatment;
  auto is_dropped = [&](const std::string& name) {
    return std::find(dropped.begin(), dropped.end(), name) != dropped.end();
  };
  for (const auto& col : ds.columns) {
    if (!is_dropped(col.name)) out.columns.push_back(col);
  }
  for (const auto& name : ds.roles.covariates) {
    if (!is_dropped(name)) out.roles.covariates.push_back(name);
  }
  return {out, dropped};
}

FeatureMatrix FeatureMatrix::rows(const std::vector<int>& idx) const {
  FeatureMatrix out;
  out.names = names;
  out.kinds = kinds;
  out.levels = levels;
  out.values.resize(static_cast<Eigen::Index>(idx.size()), values.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out.values.row(static_cast<Eigen::Index>(i)) = values.row(idx[i]);
  }
  return out;
}

FeatureMatrix make_features(const Dataset& ds,
                            const std::vector<std::string>& names) {
  FeatureMatrix fm;
  fm.values.resize(ds.n_rows(), static_cast<Eigen::Index>(names.size()));
  for (std::size_t j = 0; j < names.size(); ++j) {
    const Column& col = ds.column(names[j]);
    fm.names.push_back(col.name);
    fm.kinds.push_back(col.kind);
    fm.levels.push_back(col.levels);
    fm.values.col(static_cast<Eigen::Index>(j)) = col.values;
  }
  return fm;
}

DesignMatrix one_hot(const FeatureMatrix& features) {
  DesignMatrix dm;
  Eigen::Index width = 0;
  for (Eigen::Index j = 0; j < features.n_cols(); ++j) {
    width += features.is_categorical(j)
                 ? std::max<Eigen::Index>(features.n_levels(j) - 1, 0)
                 : 1;
  }
  dm.X.resize(features.n_rows(), width);
  Eigen::Index at = 0;
  for (Eigen::Index j = 0; j < features.n_cols(); ++j) {
    const auto sj = static_cast<std::size_t>(j);
    if (!features.is_categorical(j)) {
      dm.X.col(at) = features.values.col(j);
      dm.labels.push_back(features.names[sj]);
      ++at;
      continue;
    }
    const auto& levels = features.levels[sj];
    for (std::size_t l = 1; l < levels.size(); ++l) {
      for (Eigen::Index i = 0; i < features.n_rows(); ++i) {
        const double v = features.values(i, j);
        dm.X(i, at) = std::isnan(v)
                          ? kNaN
                          : (static_cast<std::size_t>(v) == l ? 1.0 : 0.0);
      }
      dm.labels.push_back(features.names[sj] + "=" + levels[l]);
      ++at;
    }
  }
  return dm;
}

DesignMatrix one_hot(const Dataset& ds, const std::vector<std::string>& names) {
  return one_hot(make_features(ds, names));
}

}  // namespace watch
