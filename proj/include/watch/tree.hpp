#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "watch/tabular.hpp"

namespace watch {

/// One node of a binary regression tree in a flat array.  Continuous
/// splits send x <= threshold left; categorical splits send levels in
/// level_mask left (so categorical features are capped at 64 levels).
/// NaN feature values route right.
struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  bool categorical = false;
  double threshold = 0.0;
  std::uint64_t level_mask = 0;
  int left = -1;
  int right = -1;
  double value = 0.0;  // node mean of the response
  int n_samples = 0;   // training rows that reached the node
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root; empty => predicts 0

  double predict_row(const FeatureMatrix& x, Eigen::Index row) const;
  /// Prediction with feature j replaced by value for this row only.
  double predict_row_override(const FeatureMatrix& x, Eigen::Index row,
                              Eigen::Index j, double value) const;
  Eigen::VectorXd predict(const FeatureMatrix& x) const;
  bool uses_feature(int j) const;
  int n_leaves() const;
  int depth() const;
};

/// Controls for greedy variance-reduction growth.
struct TreeGrowth {
  int max_depth = 6;
  int min_leaf = 10;
  int mtry = 0;            // candidate features per node; 0 means all
  std::uint64_t seed = 0;  // stream for mtry draws (unused when mtry == 0)
};

/// Grows a CART-style regression tree on the given rows (duplicates
/// allowed, as in a bootstrap resample).  Splits maximize the variance
/// reduction; ties break toward the lowest feature index and then the
/// lowest threshold.  Categorical splits order levels by node mean and
/// scan contiguous prefixes.
Tree grow_tree(const FeatureMatrix& x, const Eigen::VectorXd& y,
               const std::vector<int>& rows, const TreeGrowth& opt);

}  // namespace watch
