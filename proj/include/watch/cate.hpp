#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "watch/learners.hpp"
#include "watch/tabular.hpp"

namespace watch {

/// Arm-stratified fold assignment: each fold holds an equal share of
/// each arm (within one row).
struct CrossFitPlan {
  std::vector<int> fold_of;  // per row, 0..k-1
  int k = 0;
};

/// Throws DataError when an arm has fewer than k rows.
CrossFitPlan assign_folds(const Dataset& ds, int k, std::uint64_t seed);

struct LearnerConfig {
  std::vector<LearnerSpec> specs = default_learners();
  int stack_cv_folds = 5;
};

/// Nuisance models fit with one fold held out: outcome means for each
/// arm and, when the design calls for it, the treatment probability.
struct FoldModels {
  Model mu0;
  Model mu1;
  std::optional<Model> pi;  // absent when the propensity is known
};

FoldModels fit_nuisances(const Dataset& ds, const CrossFitPlan& folds,
                         int fold, const AnalysisPlan& plan,
                         const LearnerConfig& config);

/// Known nuisance functions, for calibration studies on synthetic data
/// where the generator can hand over the truth.
struct NuisanceTruth {
  Eigen::VectorXd mu0;
  Eigen::VectorXd mu1;
  Eigen::VectorXd pi;
};

/// Cross-fitted doubly robust effect scores.  For row i with arm a,
/// propensity e and outcome means m0/m1 predicted by models that never
/// saw row i:
///   phi_i = (a - e) / (e (1 - e)) * (y_i - m_a(x_i)) + m1(x_i) - m0(x_i)
/// with e clipped into [clip_epsilon, 1 - clip_epsilon] first.
struct PseudoOutcomes {
  Eigen::VectorXd phi;
  Eigen::VectorXd mu0_hat;
  Eigen::VectorXd mu1_hat;
  Eigen::VectorXd pi_hat;  // clipped values actually used
  std::vector<int> fold_of;
  double clip_epsilon = 0.025;
  /// Per fold: the rows its models were trained on (for audit).
  std::vector<std::vector<int>> fold_train_rows;
};

PseudoOutcomes pseudo_outcomes(const Dataset& ds, const AnalysisPlan& plan,
                               const LearnerConfig& config,
                               double clip_epsilon = 0.025,
                               const NuisanceTruth* truth = nullptr);

/// Mean of phi with a normal-approximation confidence interval.
struct AteSummary {
  double estimate = 0;
  double se = 0;
  double lo = 0;
  double hi = 0;
};

AteSummary ate_summary(const PseudoOutcomes& po);

/// Per-row export: row, fold, arm, outcome, clipped propensity, both
/// outcome-mean predictions, and the effect score.
void write_pseudo_csv(const Dataset& ds, const PseudoOutcomes& po,
                      const std::string& path);

}  // namespace watch
