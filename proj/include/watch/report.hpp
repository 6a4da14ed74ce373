#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "watch/cate.hpp"
#include "watch/hettest.hpp"
#include "watch/tabular.hpp"

namespace watch {

enum class DirectionMatch { Match, Mismatch, Unspecified };
enum class CredibilityNote {
  HighCredibility,
  Notable,
  LowCredibility,
  Unsupported
};

std::string to_string(DirectionMatch m);
std::string to_string(CredibilityNote n);

/// Deterministic annotation for a covariate that landed in the
/// importance top-k (rank is 1-based).  The rule table:
///   evidence Moderate/High + direction match + at least noteworthy
///   global evidence                      -> HighCredibility
///   evidence Moderate/High otherwise     -> Notable
///   evidence None/Low + weak global
///   evidence (low/moderate category)     -> LowCredibility
///   everything else in the top-k         -> Unsupported
/// Outside the top-k no note is issued (callers list those covariates
/// in a consistency section instead).
CredibilityNote credibility_note(Evidence evidence, int rank, int top_k,
                                 DirectionMatch direction, Verbal verbal);

struct CredibilityEntry {
  std::string name;
  Evidence evidence = Evidence::None;
  std::string source;                       // from the plan, may be empty
  Direction declared = Direction::Unspecified;
  DirectionMatch match = DirectionMatch::Unspecified;
  double signed_association = 0;            // NaN when undefined
  int rank = 0;                             // 1-based importance rank; 0 if absent
  bool in_top_k = false;
  std::optional<CredibilityNote> note;
};

/// One entry per plan covariate, in plan order.  Covariates dropped in
/// preprocessing keep rank 0 and stay in the consistency section.
std::vector<CredibilityEntry> credibility_entries(
    const AnalysisPlan& plan, const std::vector<std::string>& ranked_names,
    const std::vector<double>& signed_stats, Verbal verbal, int top_k);

struct FigureEntry {
  std::string id;
  std::string title;
  std::string svg_path;   // relative to the output directory
  std::string data_path;
};

/// Everything the two findings documents are built from.
struct FindingsData {
  nlohmann::ordered_json config;  // resolved plan + run settings
  std::string data_path;
  Eigen::Index n_rows = 0;
  std::vector<std::string> covariates;  // analysis covariates, in order
  std::vector<std::string> dropped;     // removed as non-informative
  AteSummary ate;
  HetTestResult het;
  Eigen::VectorXd vimp;          // aligned with covariates
  std::vector<int> ranking;      // covariate indices, best first
  std::vector<std::string> vint_names;
  Eigen::MatrixXd vint;          // diagonal carries vimp
  Eigen::MatrixXd bootstrap_vimp;
  double stability = 0;
  bool stability_defined = false;
  int top_k = 10;
  std::vector<FigureEntry> figures;
  std::vector<CredibilityEntry> credibility;
};

/// Section order: config, dataset, ate, het_test, importance,
/// displays, credibility, sensitivity.
nlohmann::ordered_json findings_json(const FindingsData& d);

/// Markdown twin: opens with the global test and its verbal category,
/// rankings and displays only after that; no test-decision language.
std::string findings_markdown(const FindingsData& d);

}  // namespace watch
