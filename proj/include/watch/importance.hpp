#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "watch/tabular.hpp"
#include "watch/tree.hpp"

namespace watch {

/// Forest of association-guided trees on the effect scores.  At each
/// node, mtry candidate covariates are scored by the normal
/// approximation to the standardized linear statistic; the smallest
/// p-value picks the split variable, and growth stops when the
/// Bonferroni-adjusted minimum exceeds alpha.  This keeps variable
/// choice honest: a covariate with many levels gets no free advantage.
struct CiForestOptions {
  int n_trees = 500;
  int mtry = 0;        // 0 means ceil(sqrt(p))
  double alpha = 0.05; // stop threshold for the adjusted association p
  int min_leaf = 10;
  int max_depth = 30;  // safety cap; the alpha rule usually stops first
};

struct CiForest {
  std::vector<Tree> trees;
  std::vector<std::vector<std::uint8_t>> in_bag;  // per tree, per row count
  int mtry_used = 0;
  CiForestOptions options;
};

CiForest fit_ciforest(const FeatureMatrix& x, const Eigen::VectorXd& phi,
                      const CiForestOptions& opt, std::uint64_t seed);

Eigen::VectorXd ciforest_predict(const CiForest& forest,
                                 const FeatureMatrix& x);

/// Out-of-bag permutation importance: per tree, the rise in mean
/// squared error on its out-of-bag rows when covariate j is shuffled
/// among them, averaged over trees and n_repeats shuffles.  A covariate
/// no tree splits on scores exactly 0.
Eigen::VectorXd permutation_importance(const CiForest& forest,
                                       const FeatureMatrix& x,
                                       const Eigen::VectorXd& phi,
                                       int n_repeats, std::uint64_t seed);

/// Indices sorted by importance, descending; exact ties order by name.
std::vector<int> importance_ranking(const Eigen::VectorXd& vimp,
                                    const std::vector<std::string>& names);

/// Evaluation grid for one covariate: every level of a categorical
/// column, or n_points equally spaced quantiles of a continuous one.
struct PdGrid {
  bool categorical = false;
  Eigen::VectorXd values;           // ascending for continuous columns
  std::vector<std::string> labels;  // level names (categorical only)
};

PdGrid pd_grid(const FeatureMatrix& x, int j, int n_points = 20);

/// Partial dependence of the forest prediction on covariate j (and k):
/// the mean prediction over all rows with the forced column(s)
/// overwritten by each grid value.  Returns grid_j x grid_k (one
/// column when k < 0).
Eigen::MatrixXd partial_dependence(const CiForest& forest,
                                   const FeatureMatrix& x, int j, int k,
                                   const PdGrid& grid_j,
                                   const PdGrid* grid_k);

/// Interaction strength from a joint partial-dependence table: the
/// spread (sd) across one axis of the conditional profiles' spreads
/// along the other, averaged over both orientations.  Additive
/// surfaces score 0.
double interaction_statistic(const Eigen::MatrixXd& pd);

/// Pairwise interaction statistics for the given covariates.  The
/// diagonal carries the per-variable importances (the display layout),
/// taken from vimp at the selected indices; pass an empty vector for a
/// zero diagonal.
Eigen::MatrixXd interaction_importance(const CiForest& forest,
                                       const FeatureMatrix& x,
                                       const std::vector<int>& vars,
                                       const Eigen::VectorXd& vimp,
                                       int n_grid = 20);

/// Selection-frequency stability of the top_k set across bootstrap
/// refits of the forest and its importance ranking.
struct StabilityResult {
  Eigen::MatrixXd selections;    // n_boot x p, 0/1
  Eigen::MatrixXd vimp_samples;  // n_boot x p
  double stability = 0;          // NaN when undefined
  bool defined = false;
};

StabilityResult bootstrap_stability(const FeatureMatrix& x,
                                    const Eigen::VectorXd& phi,
                                    const CiForestOptions& opt, int top_k,
                                    int n_boot, int n_repeats,
                                    std::uint64_t seed);

/// The selection-overlap index on a 0/1 selection matrix: 1 when every
/// run picks the same set, 0 on average for random picks of the same
/// size, negative for systematic disagreement.  NaN (defined=false)
/// when every column is constant across runs with k equal to 0 or p.
double nogueira_stability(const Eigen::MatrixXd& selections);

}  // namespace watch
