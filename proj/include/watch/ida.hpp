#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "watch/tabular.hpp"

namespace watch {

struct ContinuousStats {
  Eigen::Index count = 0;  // observed values
  double mean = 0, sd = 0, min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
};

struct LevelCount {
  std::string level;
  Eigen::Index count = 0;
};

struct ColumnSummary {
  std::string name;
  ColumnKind kind = ColumnKind::Continuous;
  Eigen::Index n = 0;
  Eigen::Index missing = 0;
  std::optional<ContinuousStats> stats;  // continuous columns
  std::vector<LevelCount> freqs;         // categorical columns
};

/// Per-column descriptive statistics over every column in the table.
std::vector<ColumnSummary> univariate_summary(const Dataset& ds);

struct StratumSummary {
  std::string level;
  Eigen::Index n = 0;
  std::vector<ColumnSummary> columns;
};

struct StratifiedSummary {
  std::string by;
  std::vector<StratumSummary> strata;     // empty strata omitted
  std::vector<std::string> warnings;      // one entry per omitted stratum
};

/// univariate_summary within each level of a categorical column.
StratifiedSummary stratified_summary(const Dataset& ds, const std::string& by);

struct MissingnessReport {
  std::vector<std::string> names;      // covariates, plan order
  Eigen::VectorXd fractions;           // per-covariate missing share
  struct Pattern {
    std::string mask;  // one char per covariate: '1' missing, '0' observed
    Eigen::Index count = 0;
  };
  std::vector<Pattern> patterns;       // sorted by count desc, then mask
};

MissingnessReport missingness_report(const Dataset& ds);

/// Association between two columns on pairwise-complete rows, in [0,1]:
/// |Pearson| for two continuous columns, the correlation ratio for a
/// mixed pair, Cramer's V for two categorical columns.  Degenerate
/// input (zero variance, single level) yields 0.
double association(const Dataset& ds, const std::string& a,
                   const std::string& b);

struct AssociationMatrix {
  std::vector<std::string> names;       // covariates, plan order
  Eigen::MatrixXd values;               // symmetric, unit diagonal
  std::vector<std::string> warnings;    // degenerate pairs
};

AssociationMatrix association_matrix(const Dataset& ds);

/// Agglomerative average-linkage clustering at distance 1 - association.
/// Leaves are 0..p-1; merge m creates cluster p+m.  Heights are
/// nondecreasing.
struct Dendrogram {
  struct Merge {
    int left = 0, right = 0;  // cluster ids, left < right
    double height = 0;
    int size = 0;             // rows under the new cluster
  };
  std::vector<std::string> names;
  std::vector<Merge> merges;
};

Dendrogram cluster_covariates(const AssociationMatrix& assoc);

/// The full pre-modeling data review as one JSON document.
nlohmann::ordered_json ida_report(const Dataset& ds);

}  // namespace watch
