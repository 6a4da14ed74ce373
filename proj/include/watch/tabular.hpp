#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "watch/error.hpp"

namespace watch {

enum class ColumnKind { Continuous, Categorical };

/// One column of a trial table.  Values are stored as doubles either
/// way: continuous columns hold the measurements, categorical columns
/// hold 0-based indices into `levels`.  Missing cells are NaN.
struct Column {
  std::string name;
  ColumnKind kind = ColumnKind::Continuous;
  std::vector<std::string> levels;  // empty for continuous columns
  Eigen::VectorXd values;

  Eigen::Index size() const { return values.size(); }
  bool is_missing(Eigen::Index i) const { return std::isnan(values[i]); }
  Eigen::Index missing_count() const {
    Eigen::Index m = 0;
    for (Eigen::Index i = 0; i < values.size(); ++i) m += is_missing(i);
    return m;
  }
  const std::string& level_name(Eigen::Index i) const {
    return levels[static_cast<std::size_t>(values[i])];
  }
};

struct RoleBindings {
  std::string outcome;
  std::string treatment;
  std::vector<std::string> covariates;
};

struct Dataset {
  std::vector<Column> columns;
  RoleBindings roles;

  Eigen::Index n_rows() const {
    return columns.empty() ? 0 : columns.front().size();
  }
  int column_index(const std::string& name) const {
    for (std::size_t j = 0; j < columns.size(); ++j) {
      if (columns[j].name == name) return static_cast<int>(j);
    }
    return -1;
  }
  bool has_column(const std::string& name) const {
    return column_index(name) >= 0;
  }
  const Column& column(const std::string& name) const {
    int j = column_index(name);
    if (j < 0) throw DataError("column '" + name + "' not found");
    return columns[static_cast<std::size_t>(j)];
  }
  Column& column(const std::string& name) {
    int j = column_index(name);
    if (j < 0) throw DataError("column '" + name + "' not found");
    return columns[static_cast<std::size_t>(j)];
  }
  const Column& outcome() const { return column(roles.outcome); }
  const Column& treatment() const { return column(roles.treatment); }
};

enum class Evidence { None, Low, Moderate, High };
enum class Direction { Positive, Negative, Unspecified };

std::string to_string(Evidence e);
std::string to_string(Direction d);
Evidence evidence_from_string(const std::string& s);
Direction direction_from_string(const std::string& s);

/// Prior expectation for one covariate, declared before unblinding.
struct PlanCovariate {
  std::string name;
  Evidence evidence = Evidence::None;
  Direction direction = Direction::Unspecified;
  std::string source;  // required when evidence is moderate or high
};

struct PropensitySpec {
  bool known = true;
  double value = 0.5;  // used when known
};

/// The pre-declared analysis plan: roles, per-covariate expectations,
/// and the analysis settings that must be fixed before looking at
/// outcomes.
struct AnalysisPlan {
  std::string outcome;
  std::string treatment;
  std::vector<PlanCovariate> covariates;
  std::uint64_t seed = 20240101;
  int k_folds = 5;
  int n_permutations = 9999;
  int n_trees = 500;
  int bootstrap_reps = 100;
  int top_k = 10;
  double min_level_frac = 0.05;  // sparse-level merge threshold
  double max_dominance = 0.99;   // non-informative column cutoff
  PropensitySpec propensity;

  std::vector<std::string> covariate_names() const {
    std::vector<std::string> out;
    out.reserve(covariates.size());
    for (const auto& c : covariates) out.push_back(c.name);
    return out;
  }
  const PlanCovariate* find(const std::string& name) const {
    for (const auto& c : covariates) {
      if (c.name == name) return &c;
    }
    return nullptr;
  }
};

/// Parses and validates a plan.  Throws ConfigError on violations:
/// unknown keys are tolerated, missing roles, bad enum strings,
/// k_folds < 2, n_permutations < 99, or moderate/high evidence without
/// a source are not.
AnalysisPlan plan_from_json(const nlohmann::json& j);
nlohmann::json plan_to_json(const AnalysisPlan& plan);

/// Reads a CSV (RFC-4180 quoting, '.' decimal, "" or "NA" missing) and
/// binds roles.  Columns where every observed token parses as a number
/// are continuous; all others are categorical with levels in order of
/// first appearance.  The treatment column must code exactly {0,1} and
/// the outcome must be numeric with no missing values; both throw
/// DataError otherwise.
Dataset load_csv(const std::string& path, const AnalysisPlan& plan);
Dataset parse_csv_text(const std::string& text, const AnalysisPlan& plan);

void write_csv(const Dataset& ds, const std::string& path);

/// Fills missing covariate cells: median for continuous columns, most
/// frequent level (ties to the earlier level) for categorical ones.
/// Never reads the outcome or treatment column.  A covariate with no
/// observed values throws DataError naming it.
Dataset impute_baseline(const Dataset& ds);

/// Pools levels rarer than min_frac of rows into "OTHER".  Applies to
/// categorical covariates only; the treatment column is exempt.
Dataset merge_sparse_levels(const Dataset& ds, double min_frac = 0.05);

/// Drops covariates where one value accounts for more than
/// max_dominance of the rows.  Returns the reduced dataset and the
/// dropped names.
std::pair<Dataset, std::vector<std::string>> drop_noninformative(
    const Dataset& ds, double max_dominance = 0.99);

/// Feature table handed to the learners: one numeric matrix plus the
/// per-column metadata needed to interpret categorical codes.
struct FeatureMatrix {
  std::vector<std::string> names;
  std::vector<ColumnKind> kinds;
  std::vector<std::vector<std::string>> levels;  // empty for continuous
  Eigen::MatrixXd values;  // n x p, categorical cells hold level indices

  Eigen::Index n_rows() const { return values.rows(); }
  Eigen::Index n_cols() const { return values.cols(); }
  bool is_categorical(Eigen::Index j) const {
    return kinds[static_cast<std::size_t>(j)] == ColumnKind::Categorical;
  }
  Eigen::Index n_levels(Eigen::Index j) const {
    return static_cast<Eigen::Index>(levels[static_cast<std::size_t>(j)].size());
  }
  /// Row-gathered copy (bootstrap resamples, fold splits).
  FeatureMatrix rows(const std::vector<int>& idx) const;
};

/// Assembles the named columns into a FeatureMatrix, in the given order.
FeatureMatrix make_features(const Dataset& ds,
                            const std::vector<std::string>& names);

/// Dummy-coded design: continuous columns pass through, a categorical
/// column with L levels becomes L-1 indicators (first level is the
/// reference), labeled "name=level".
struct DesignMatrix {
  Eigen::MatrixXd X;
  std::vector<std::string> labels;
};
DesignMatrix one_hot(const FeatureMatrix& features);
DesignMatrix one_hot(const Dataset& ds, const std::vector<std::string>& names);

}  // namespace watch
