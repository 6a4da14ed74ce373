#include "watch/tree.hpp"

#include <algorithm>
#include <cmath>

#include "watch/rng.hpp"

namespace watch {

namespace {

int descend(const TreeNode& node, double v) {
  if (node.categorical) {
    if (std::isnan(v)) return node.right;
    const auto level = static_cast<std::uint64_t>(v);
    return (node.level_mask >> level) & 1u ? node.left : node.right;
  }
  return v <= node.threshold ? node.left : node.right;  // NaN goes right
}

struct SplitChoice {
  double reduction = 0.0;  // decrease in total sum of squares
  int feature = -1;
  bool categorical = false;
  double threshold = 0.0;
  std::uint64_t level_mask = 0;
};

class TreeBuilder {
 public:
  TreeBuilder(const FeatureMatrix& x, const Eigen::VectorXd& y,
              const TreeGrowth& opt)
      : x_(x), y_(y), opt_(opt), rng_(opt.seed) {}

  Tree build(const std::vector<int>& rows) {
    Tree tree;
    if (rows.empty()) return tree;
    grow(rows, 0, tree);
    return tree;
  }

 private:
  int grow(const std::vector<int>& rows, int depth, Tree& tree) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    double sum = 0;
    for (int r : rows) sum += y_[r];
    const auto n = static_cast<double>(rows.size());
    tree.nodes[id].value = sum / n;
    tree.nodes[id].n_samples = static_cast<int>(rows.size());

    if (depth >= opt_.max_depth ||
        rows.size() < 2 * static_cast<std::size_t>(opt_.min_leaf)) {
      return id;
    }
    const SplitChoice split = best_split(rows, sum);
    if (split.feature < 0) return id;

    std::vector<int> left_rows, right_rows;
    left_rows.reserve(rows.size());
    right_rows.reserve(rows.size());
    for (int r : rows) {
      const double v = x_.values(r, split.feature);
      bool go_left;
      if (split.categorical) {
        go_left = (split.level_mask >> static_cast<std::uint64_t>(v)) & 1u;
      } else {
        go_left = v <= split.threshold;
      }
      (go_left ? left_rows : right_rows).push_back(r);
    }
    tree.nodes[id].feature = split.feature;
    tree.nodes[id].categorical = split.categorical;
    tree.nodes[id].threshold = split.threshold;
    tree.nodes[id].level_mask = split.level_mask;
    const int left = grow(left_rows, depth + 1, tree);
    tree.nodes[id].left = left;
    const int right = grow(right_rows, depth + 1, tree);
    tree.nodes[id].right = right;
    return id;
  }

  std::vector<int> candidate_features() {
    const auto p = static_cast<int>(x_.n_cols());
    if (opt_.mtry <= 0 || opt_.mtry >= p) {
      std::vector<int> all(static_cast<std::size_t>(p));
      for (int j = 0; j < p; ++j) all[static_cast<std::size_t>(j)] = j;
      return all;
    }
    std::vector<int> picked = rng_.sample_without_replacement(p, opt_.mtry);
    std::sort(picked.begin(), picked.end());
    return picked;
  }

  SplitChoice best_split(const std::vector<int>& rows, double sum) {
    SplitChoice best;
    const auto n = static_cast<double>(rows.size());
    const double parent_term = sum * sum / n;
    const int min_leaf = opt_.min_leaf;

    for (int j : candidate_features()) {
      if (x_.is_categorical(j)) {
        scan_categorical(rows, j, sum, parent_term, min_leaf, &best);
      } else {
        scan_continuous(rows, j, sum, parent_term, min_leaf, &best);
      }
    }
    return best;
  }

  void scan_continuous(const std::vector<int>& rows, int j, double sum,
                       double parent_term, int min_leaf, SplitChoice* best) {
    auto& pairs = scratch_pairs_;
    pairs.clear();
    pairs.reserve(rows.size());
    for (int r : rows) pairs.emplace_back(x_.values(r, j), y_[r]);
    std::sort(pairs.begin(), pairs.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    const auto m = static_cast<int>(pairs.size());
    double left_sum = 0;
    for (int k = 0; k + 1 < m; ++k) {
      left_sum += pairs[static_cast<std::size_t>(k)].second;
      const int n_left = k + 1;
      const int n_right = m - n_left;
      if (n_left < min_leaf) continue;
      if (n_right < min_leaf) break;
      const double xk = pairs[static_cast<std::size_t>(k)].first;
      const double xnext = pairs[static_cast<std::size_t>(k + 1)].first;
      if (xk == xnext) continue;
      const double right_sum = sum - left_sum;
      const double reduction = left_sum * left_sum / n_left +
                               right_sum * right_sum / n_right - parent_term;
      if (reduction > best->reduction) {
        best->reduction = reduction;
        best->feature = j;
        best->categorical = false;
        best->threshold = xk + 0.5 * (xnext - xk);
        best->level_mask = 0;
      }
    }
  }

  void scan_categorical(const std::vector<int>& rows, int j, double sum,
                        double parent_term, int min_leaf, SplitChoice* best) {
    const auto n_levels = static_cast<std::size_t>(x_.n_levels(j));
    std::vector<double> level_sum(n_levels, 0);
    std::vector<int> level_count(n_levels, 0);
    for (int r : rows) {
      const auto l = static_cast<std::size_t>(x_.values(r, j));
      level_sum[l] += y_[r];
      ++level_count[l];
    }
    // Present levels ordered by mean response (level index breaks ties),
    // then contiguous prefixes are the candidate left groups.
    std::vector<std::size_t> order;
    for (std::size_t l = 0; l < n_levels; ++l) {
      if (level_count[l] > 0) order.push_back(l);
    }
    if (order.size() < 2) return;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const double ma = level_sum[a] / level_count[a];
      const double mb = level_sum[b] / level_count[b];
      if (ma != mb) return ma < mb;
      return a < b;
    });
    const auto m = static_cast<int>(rows.size());
    double left_sum = 0;
    int n_left = 0;
    std::uint64_t mask = 0;
    for (std::size_t k = 0; k + 1 < order.size(); ++k) {
      left_sum += level_sum[order[k]];
      n_left += level_count[order[k]];
      mask |= 1ull << order[k];
      const int n_right = m - n_left;
      if (n_left < min_leaf) continue;
      if (n_right < min_leaf) break;
      const double right_sum = sum - left_sum;
      const double reduction = left_sum * left_sum / n_left +
                               right_sum * right_sum / n_right - parent_term;
      if (reduction > best->reduction) {
        best->reduction = reduction;
        best->feature = j;
        best->categorical = true;
        best->threshold = 0;
        best->level_mask = mask;
      }
    }
  }

  const FeatureMatrix& x_;
  const Eigen::VectorXd& y_;
  TreeGrowth opt_;
  Rng rng_;
  std::vector<std::pair<double, double>> scratch_pairs_;
};

}  // namespace

double Tree::predict_row(const FeatureMatrix& x, Eigen::Index row) const {
  if (nodes.empty()) return 0;
  int at = 0;
  while (nodes[static_cast<std::size_t>(at)].feature >= 0) {
    const TreeNode& node = nodes[static_cast<std::size_t>(at)];
    at = descend(node, x.values(row, node.feature));
  }
  return nodes[static_cast<std::size_t>(at)].value;
}

double Tree::predict_row_override(const FeatureMatrix& x, Eigen::Index row,
                                  Eigen::Index j, double value) const {
  if (nodes.empty()) return 0;
  int at = 0;
  while (nodes[static_cast<std::size_t>(at)].feature >= 0) {
    const TreeNode& node = nodes[static_cast<std::size_t>(at)];
    const double v =
        node.feature == j ? value : x.values(row, node.feature);
    at = descend(node, v);
  }
  return nodes[static_cast<std::size_t>(at)].value;
}

Eigen::VectorXd Tree::predict(const FeatureMatrix& x) const {
  Eigen::VectorXd out(x.n_rows());
  for (Eigen::Index i = 0; i < x.n_rows(); ++i) out[i] = predict_row(x, i);
  return out;
}

bool Tree::uses_feature(int j) const {
  for (const auto& node : nodes) {
    if (node.feature == j) return true;
  }
  return false;
}

int Tree::n_leaves() const {
  int count = 0;
  for (const auto& node : nodes) count += node.feature < 0;
  return count;
}

int Tree::depth() const {
  if (nodes.empty()) return 0;
  std::vector<int> level(nodes.size(), 0);
  int deepest = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& node = nodes[i];
    if (node.feature >= 0) {
      level[static_cast<std::size_t>(node.left)] = level[i] + 1;
      level[static_cast<std::size_t>(node.right)] = level[i] + 1;
    } else {
      deepest = std::max(deepest, level[i]);
    }
  }
  return deepest;
}

Tree grow_tree(const FeatureMatrix& x, const Eigen::VectorXd& y,
               const std::vector<int>& rows, const TreeGrowth& opt) {
  TreeBuilder builder(x, y, opt);
  return builder.build(rows);
}

}  // namespace watch
