#include "watch/importance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "watch/error.hpp"
#include "watch/parallel.hpp"
#include "watch/rng.hpp"

namespace watch {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Two-sided tail of the standard normal for a |T| statistic.
double normal_two_sided_p(double t) { return std::erfc(t / std::sqrt(2.0)); }

struct NodeMoments {
  double mean = 0;
  double var = 0;  // population variance
};

NodeMoments moments(const Eigen::VectorXd& phi, const std::vector<int>& rows) {
  NodeMoments m;
  const auto n = static_cast<double>(rows.size());
  for (int r : rows) m.mean += phi[r];
  m.mean /= n;
  for (int r : rows) m.var += (phi[r] - m.mean) * (phi[r] - m.mean);
  m.var /= n;
  return m;
}

/// Association p-value between covariate j and the scores within a
/// node: the normal tail of the standardized linear statistic, with
/// categorical columns scored by the per-level max (binary columns
/// reduce to the usual two-sample statistic).  Multiplicity is handled
/// once, by the Bonferroni factor over candidates at the stop rule.
double association_p(const FeatureMatrix& x, const Eigen::VectorXd& phi,
                     const std::vector<int>& rows, int j,
                     const NodeMoments& m) {
  const auto n = static_cast<double>(rows.size());
  if (m.var <= 0 || rows.size() < 2) return 1.0;
  const double scale = n / (n - 1.0) * m.var;

  if (!x.is_categorical(j)) {
    double x_mean = 0;
    for (int r : rows) x_mean += x.values(r, j);
    x_mean /= n;
    double num = 0, ssx = 0;
    for (int r : rows) {
      const double c = x.values(r, j) - x_mean;
      num += c * phi[r];
      ssx += c * c;
    }
    if (ssx <= 0) return 1.0;
    const double t = std::abs(num) / std::sqrt(scale * ssx);
    return normal_two_sided_p(t);
  }

  const auto n_levels = static_cast<std::size_t>(x.n_levels(j));
  std::vector<double> sum(n_levels, 0);
  std::vector<int> count(n_levels, 0);
  for (int r : rows) {
    const auto l = static_cast<std::size_t>(x.values(r, j));
    sum[l] += phi[r];
    ++count[l];
  }
  double t_max = -1;
  int present = 0;
  for (std::size_t l = 0; l < n_levels; ++l) {
    if (count[l] == 0) continue;
    ++present;
    if (count[l] == static_cast<int>(rows.size())) continue;
    const double nl = count[l];
    const double ssg = nl * (n - nl) / n;
    const double t = std::abs(sum[l] - nl * m.mean) / std::sqrt(scale * ssg);
    t_max = std::max(t_max, t);
  }
  if (present < 2 || t_max < 0) return 1.0;
  return normal_two_sided_p(t_max);
}

struct CiSplit {
  bool found = false;
  bool categorical = false;
  double threshold = 0;
  std::uint64_t level_mask = 0;
};

/// Best binary split of the chosen covariate: the cut whose two-sample
/// standardized statistic is largest, both sides >= min_leaf.
CiSplit best_split(const FeatureMatrix& x, const Eigen::VectorXd& phi,
                   const std::vector<int>& rows, int j, const NodeMoments& m,
                   int min_leaf) {
  CiSplit split;
  const auto n = static_cast<double>(rows.size());
  const double scale = n / (n - 1.0) * m.var;
  if (scale <= 0) return split;
  const auto total = static_cast<int>(rows.size());
  double best_stat = 0;

  auto cut_statistic = [&](double left_sum, int n_left) {
    const double nl = n_left;
    const double ssg = nl * (n - nl) / n;
    return std::abs(left_sum - nl * m.mean) / std::sqrt(scale * ssg);
  };

  if (!x.is_categorical(j)) {
    std::vector<std::pair<double, double>> pairs;  // (x, phi)
    pairs.reserve(rows.size());
    for (int r : rows) pairs.emplace_back(x.values(r, j), phi[r]);
    std::sort(pairs.begin(), pairs.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    double left_sum = 0;
    for (int k = 0; k + 1 < total; ++k) {
      left_sum += pairs[static_cast<std::size_t>(k)].second;
      const int n_left = k + 1;
      if (n_left < min_leaf) continue;
      if (total - n_left < min_leaf) break;
      const double xk = pairs[static_cast<std::size_t>(k)].first;
      const double xn = pairs[static_cast<std::size_t>(k + 1)].first;
      if (xk == xn) continue;
      const double stat = cut_statistic(left_sum, n_left);
      if (stat > best_stat) {
        best_stat = stat;
        split.found = true;
        split.categorical = false;
        split.threshold = xk + 0.5 * (xn - xk);
      }
    }
    return split;
  }

  const auto n_levels = static_cast<std::size_t>(x.n_levels(j));
  std::vector<double> sum(n_levels, 0);
  std::vector<int> count(n_levels, 0);
  for (int r : rows) {
    const auto l = static_cast<std::size_t>(x.values(r, j));
    sum[l] += phi[r];
    ++count[l];
  }
  std::vector<std::size_t> order;
  for (std::size_t l = 0; l < n_levels; ++l) {
    if (count[l] > 0) order.push_back(l);
  }
  if (order.size() < 2) return split;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double ma = sum[a] / count[a];
    const double mb = sum[b] / count[b];
    if (ma != mb) return ma < mb;
    return a < b;
  });
  double left_sum = 0;
  int n_left = 0;
  std::uint64_t mask = 0;
  for (std::size_t k = 0; k + 1 < order.size(); ++k) {
    left_sum += sum[order[k]];
    n_left += count[order[k]];
    mask |= 1ull << order[k];
    if (n_left < min_leaf) continue;
    if (total - n_left < min_leaf) break;
    const double stat = cut_statistic(left_sum, n_left);
    if (stat > best_stat) {
      best_stat = stat;
      split.found = true;
      split.categorical = true;
      split.level_mask = mask;
    }
  }
  return split;
}

class CiTreeBuilder {
 public:
  CiTreeBuilder(const FeatureMatrix& x, const Eigen::VectorXd& phi,
                const CiForestOptions& opt, int mtry, std::uint64_t seed)
      : x_(x), phi_(phi), opt_(opt), mtry_(mtry), rng_(seed) {}

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
    const NodeMoments m = moments(phi_, rows);
    tree.nodes[id].value = m.mean;
    tree.nodes[id].n_samples = static_cast<int>(rows.size());

    if (depth >= opt_.max_depth ||
        rows.size() < 2 * static_cast<std::size_t>(opt_.min_leaf)) {
      return id;
    }

    // Draw candidates even when the node is degenerate so the stream
    // stays aligned with the tree's structure decisions only.
    const auto p = static_cast<int>(x_.n_cols());
    std::vector<int> candidates =
        mtry_ >= p ? all_features(p)
                   : rng_.sample_without_replacement(p, mtry_);
    std::sort(candidates.begin(), candidates.end());

    double p_min = 2.0;
    int chosen = -1;
    for (int j : candidates) {
      const double pj = association_p(x_, phi_, rows, j, m);
      if (pj < p_min) {
        p_min = pj;
        chosen = j;
      }
    }
    const double p_adj =
        std::min(1.0, p_min * static_cast<double>(candidates.size()));
    if (chosen < 0 || p_adj > opt_.alpha) return id;

    const CiSplit split =
        best_split(x_, phi_, rows, chosen, m, opt_.min_leaf);
    if (!split.found) return id;

    std::vector<int> left_rows, right_rows;
    left_rows.reserve(rows.size());
    right_rows.reserve(rows.size());
    for (int r : rows) {
      const double v = x_.values(r, chosen);
      const bool go_left =
          split.categorical
              ? ((split.level_mask >> static_cast<std::uint64_t>(v)) & 1u)
              : v <= split.threshold;
      (go_left ? left_rows : right_rows).push_back(r);
    }
    tree.nodes[id].feature = chosen;
    tree.nodes[id].categorical = split.categorical;
    tree.nodes[id].threshold = split.threshold;
    tree.nodes[id].level_mask = split.level_mask;
    const int left = grow(left_rows, depth + 1, tree);
    tree.nodes[id].left = left;
    const int right = grow(right_rows, depth + 1, tree);
    tree.nodes[id].right = right;
    return id;
  }

  static std::vector<int> all_features(int p) {
    std::vector<int> out(static_cast<std::size_t>(p));
    std::iota(out.begin(), out.end(), 0);
    return out;
  }

  const FeatureMatrix& x_;
  const Eigen::VectorXd& phi_;
  CiForestOptions opt_;
  int mtry_;
  Rng rng_;
};

}  // namespace

CiForest fit_ciforest(const FeatureMatrix& x, const Eigen::VectorXd& phi,
                      const CiForestOptions& opt, std::uint64_t seed) {
  if (x.n_rows() != phi.size()) {
    throw DataError("forest: covariates and scores differ in length");
  }
  if (!x.values.allFinite() || !phi.allFinite()) {
    throw DataError("forest: non-finite inputs");
  }
  if (opt.n_trees < 1) throw ConfigError("forest: n_trees must be positive");
  if (!(opt.alpha > 0 && opt.alpha <= 1)) {
    throw ConfigError("forest: alpha must lie in (0, 1]");
  }
  const auto n = static_cast<int>(x.n_rows());
  if (n < 2 * opt.min_leaf) {
    throw DataError("forest: too few rows for the leaf size");
  }

  CiForest forest;
  forest.options = opt;
  forest.mtry_used =
      opt.mtry > 0 ? opt.mtry
                   : static_cast<int>(std::ceil(
                         std::sqrt(static_cast<double>(x.n_cols()))));
  forest.trees.resize(static_cast<std::size_t>(opt.n_trees));
  forest.in_bag.assign(static_cast<std::size_t>(opt.n_trees),
                       std::vector<std::uint8_t>(static_cast<std::size_t>(n), 0));

  parallel_for(opt.n_trees, [&](std::int64_t t) {
    const auto ut = static_cast<std::uint64_t>(t);
    Rng boot(derive_seed(seed, streams::kCiForest, ut, 0));
    const std::vector<int> rows = boot.bootstrap(n);
    auto& bag = forest.in_bag[static_cast<std::size_t>(t)];
    for (int r : rows) {
      auto& cell = bag[static_cast<std::size_t>(r)];
      if (cell < 255) ++cell;
    }
    CiTreeBuilder builder(x, phi, opt, forest.mtry_used,
                          derive_seed(seed, streams::kCiForest, ut, 1));
    forest.trees[static_cast<std::size_t>(t)] = builder.build(rows);
  });
  return forest;
}

Eigen::VectorXd ciforest_predict(const CiForest& forest,
                                 const FeatureMatrix& x) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(x.n_rows());
  for (const auto& tree : forest.trees) out += tree.predict(x);
  return out / static_cast<double>(forest.trees.size());
}

Eigen::VectorXd permutation_importance(const CiForest& forest,
                                       const FeatureMatrix& x,
                                       const Eigen::VectorXd& phi,
                                       int n_repeats, std::uint64_t seed) {
  if (n_repeats < 1) throw ConfigError("n_repeats must be positive");
  const auto p = static_cast<int>(x.n_cols());
  const auto n_trees = static_cast<int>(forest.trees.size());
  Eigen::MatrixXd per_tree = Eigen::MatrixXd::Zero(n_trees, p);
  std::vector<std::uint8_t> tree_counted(static_cast<std::size_t>(n_trees), 0);

  parallel_for(n_trees, [&](std::int64_t t) {
    const Tree& tree = forest.trees[static_cast<std::size_t>(t)];
    const auto& bag = forest.in_bag[static_cast<std::size_t>(t)];
    std::vector<int> oob;
    for (std::size_t r = 0; r < bag.size(); ++r) {
      if (bag[r] == 0) oob.push_back(static_cast<int>(r));
    }
    if (oob.empty()) return;
    tree_counted[static_cast<std::size_t>(t)] = 1;
    const auto m = static_cast<double>(oob.size());

    std::vector<double> base_pred(oob.size());
    double base_err = 0;
    for (std::size_t i = 0; i < oob.size(); ++i) {
      base_pred[i] = tree.predict_row(x, oob[i]);
      const double d = base_pred[i] - phi[oob[i]];
      base_err += d * d;
    }
    base_err /= m;

    for (int j = 0; j < p; ++j) {
      if (!tree.uses_feature(j)) continue;  // shuffling j cannot matter
      double delta_sum = 0;
      for (int rep = 0; rep < n_repeats; ++rep) {
        Rng rng(derive_seed(seed, streams::kImportance,
                            static_cast<std::uint64_t>(t),
                            static_cast<std::uint64_t>(j) *
                                    static_cast<std::uint64_t>(n_repeats) +
                                static_cast<std::uint64_t>(rep)));
        const std::vector<int> perm =
            rng.permutation(static_cast<int>(oob.size()));
        double err = 0;
        for (std::size_t i = 0; i < oob.size(); ++i) {
          const double forced = x.values(oob[static_cast<std::size_t>(
                                             perm[i])], j);
          const double pred =
              tree.predict_row_override(x, oob[i], j, forced);
          const double d = pred - phi[oob[i]];
          err += d * d;
        }
        err /= m;
        delta_sum += err - base_err;
      }
      per_tree(static_cast<Eigen::Index>(t), j) =
          delta_sum / static_cast<double>(n_repeats);
    }
  });

  int counted = 0;
  for (std::uint8_t c : tree_counted) counted += c;
  Eigen::VectorXd vimp = Eigen::VectorXd::Zero(p);
  if (counted == 0) return vimp;
  for (int t = 0; t < n_trees; ++t) {  // fixed order: thread-count neutral
    vimp += per_tree.row(t).transpose();
  }
  return vimp / static_cast<double>(counted);
}

std::vector<int> importance_ranking(const Eigen::VectorXd& vimp,
                                    const std::vector<std::string>& names) {
  std::vector<int> order(static_cast<std::size_t>(vimp.size()));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (vimp[a] != vimp[b]) return vimp[a] > vimp[b];
    return names[static_cast<std::size_t>(a)] <
           names[static_cast<std::size_t>(b)];
  });
  return order;
}

PdGrid pd_grid(const FeatureMatrix& x, int j, int n_points) {
  PdGrid grid;
  if (x.is_categorical(j)) {
    grid.categorical = true;
    const auto& levels = x.levels[static_cast<std::size_t>(j)];
    grid.values.resize(static_cast<Eigen::Index>(levels.size()));
    for (std::size_t l = 0; l < levels.size(); ++l) {
      grid.values[static_cast<Eigen::Index>(l)] = static_cast<double>(l);
      grid.labels.push_back(levels[l]);
    }
    return grid;
  }
  if (n_points < 2) throw ConfigError("a continuous grid needs >= 2 points");
  std::vector<double> sorted(x.values.col(j).data(),
                             x.values.col(j).data() + x.n_rows());
  std::sort(sorted.begin(), sorted.end());
  grid.values.resize(n_points);
  const auto m = sorted.size();
  for (int i = 0; i < n_points; ++i) {
    const double h = static_cast<double>(m - 1) * static_cast<double>(i) /
                     static_cast<double>(n_points - 1);
    const auto lo = static_cast<std::size_t>(h);
    const double frac = h - static_cast<double>(lo);
    grid.values[i] = lo + 1 >= m ? sorted[m - 1]
                                 : sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
  }
  return grid;
}

namespace {

/// Alive set of grid positions for one forced dimension while walking
/// a tree: a contiguous index range for continuous grids (ascending
/// values), a bitmask for categorical ones.
struct AliveSet {
  int lo = 0, hi = 0;          // continuous: [lo, hi)
  std::uint64_t mask = 0;      // categorical
  bool categorical = false;

  bool empty() const { return categorical ? mask == 0 : lo >= hi; }
};

AliveSet full_set(const PdGrid& grid) {
  AliveSet s;
  s.categorical = grid.categorical;
  if (grid.categorical) {
    const auto g = static_cast<std::uint64_t>(grid.values.size());
    s.mask = g >= 64 ? ~0ull : ((1ull << g) - 1);
  } else {
    s.lo = 0;
    s.hi = static_cast<int>(grid.values.size());
  }
  return s;
}

/// Splits an alive set by a tree node's condition on its own feature.
void split_alive(const AliveSet& s, const PdGrid& grid, const TreeNode& node,
                 AliveSet* left, AliveSet* right) {
  *left = s;
  *right = s;
  if (s.categorical) {
    left->mask = s.mask & node.level_mask;
    right->mask = s.mask & ~node.level_mask;
    return;
  }
  // Grid values ascending: positions with value <= threshold go left.
  const double* begin = grid.values.data() + s.lo;
  const double* end = grid.values.data() + s.hi;
  const auto cut = static_cast<int>(
      std::upper_bound(begin, end, node.threshold) - grid.values.data());
  left->hi = cut;
  right->lo = cut;
}

class PdAccumulator {
 public:
  PdAccumulator(const CiForest& forest, const FeatureMatrix& x, int ja, int jb,
                const PdGrid& ga, const PdGrid* gb)
      : forest_(forest), x_(x), ja_(ja), jb_(jb), ga_(ga), gb_(gb) {
    rows_a_ = static_cast<int>(ga.values.size());
    cols_b_ = gb ? static_cast<int>(gb->values.size()) : 1;
  }

  Eigen::MatrixXd run() {
    const Eigen::Index n = x_.n_rows();
    const auto n_trees = static_cast<double>(forest_.trees.size());
    Eigen::MatrixXd total = Eigen::MatrixXd::Zero(rows_a_, cols_b_);
    Eigen::MatrixXd acc(rows_a_, cols_b_);
    for (Eigen::Index row = 0; row < n; ++row) {
      acc.setZero();
      for (const auto& tree : forest_.trees) {
        if (tree.nodes.empty()) continue;
        walk(tree, 0, row, full_set(ga_),
             gb_ ? full_set(*gb_) : scalar_set(), acc);
      }
      total += acc / n_trees;
    }
    return total / static_cast<double>(n);
  }

 private:
  static AliveSet scalar_set() {
    AliveSet s;
    s.lo = 0;
    s.hi = 1;
    return s;
  }

  void walk(const Tree& tree, int at, Eigen::Index row, AliveSet a,
            AliveSet b, Eigen::MatrixXd& acc) {
    const TreeNode& node = tree.nodes[static_cast<std::size_t>(at)];
    if (node.feature < 0) {
      deposit(a, b, node.value, acc);
      return;
    }
    if (node.feature == ja_) {
      AliveSet left, right;
      split_alive(a, ga_, node, &left, &right);
      if (!left.empty()) walk(tree, node.left, row, left, b, acc);
      if (!right.empty()) walk(tree, node.right, row, right, b, acc);
      return;
    }
    if (gb_ && node.feature == jb_) {
      AliveSet left, right;
      split_alive(b, *gb_, node, &left, &right);
      if (!left.empty()) walk(tree, node.left, row, a, left, acc);
      if (!right.empty()) walk(tree, node.right, row, a, right, acc);
      return;
    }
    const double v = x_.values(row, node.feature);
    int next;
    if (node.categorical) {
      next = ((node.level_mask >> static_cast<std::uint64_t>(v)) & 1u)
                 ? node.left
                 : node.right;
    } else {
      next = v <= node.threshold ? node.left : node.right;
    }
    walk(tree, next, row, a, b, acc);
  }

  void deposit(const AliveSet& a, const AliveSet& b, double value,
               Eigen::MatrixXd& acc) {
    const auto each_b = [&](int ib) {
      if (a.categorical) {
        for (int ia = 0; ia < rows_a_; ++ia) {
          if ((a.mask >> static_cast<std::uint64_t>(ia)) & 1u) {
            acc(ia, ib) += value;
          }
        }
      } else {
        for (int ia = a.lo; ia < a.hi; ++ia) acc(ia, ib) += value;
      }
    };
    if (b.categorical) {
      for (int ib = 0; ib < cols_b_; ++ib) {
        if ((b.mask >> static_cast<std::uint64_t>(ib)) & 1u) each_b(ib);
      }
    } else {
      for (int ib = b.lo; ib < b.hi; ++ib) each_b(ib);
    }
  }

  const CiForest& forest_;
  const FeatureMatrix& x_;
  int ja_, jb_;
  const PdGrid& ga_;
  const PdGrid* gb_;
  int rows_a_ = 0, cols_b_ = 0;
};

double sd_of(const Eigen::VectorXd& v) {
  if (v.size() < 2) return 0;
  const double mean = v.mean();
  return std::sqrt((v.array() - mean).square().sum() /
                   static_cast<double>(v.size() - 1));
}

}  // namespace

Eigen::MatrixXd partial_dependence(const CiForest& forest,
                                   const FeatureMatrix& x, int j, int k,
                                   const PdGrid& grid_j,
                                   const PdGrid* grid_k) {
  if (grid_j.values.size() == 0) throw ConfigError("empty grid");
  if (k >= 0 && (!grid_k || grid_k->values.size() == 0)) {
    throw ConfigError("a second grid is required for a joint table");
  }
  PdAccumulator acc(forest, x, j, k, grid_j, k >= 0 ? grid_k : nullptr);
  return acc.run();
}

double interaction_statistic(const Eigen::MatrixXd& pd) {
  const Eigen::Index a = pd.rows(), b = pd.cols();
  if (a < 2 || b < 2) return 0;
  Eigen::VectorXd sd_rows_per_col(b), sd_cols_per_row(a);
  for (Eigen::Index jb = 0; jb < b; ++jb) {
    sd_rows_per_col[jb] = sd_of(pd.col(jb));
  }
  for (Eigen::Index ja = 0; ja < a; ++ja) {
    sd_cols_per_row[ja] = sd_of(pd.row(ja).transpose());
  }
  return 0.5 * (sd_of(sd_rows_per_col) + sd_of(sd_cols_per_row));
}

Eigen::MatrixXd interaction_importance(const CiForest& forest,
                                       const FeatureMatrix& x,
                                       const std::vector<int>& vars,
                                       const Eigen::VectorXd& vimp,
                                       int n_grid) {
  const auto m = static_cast<Eigen::Index>(vars.size());
  Eigen::MatrixXd vint = Eigen::MatrixXd::Zero(m, m);
  if (vimp.size() > 0) {
    for (Eigen::Index a = 0; a < m; ++a)
      vint(a, a) = vimp[vars[static_cast<std::size_t>(a)]];
  }
  std::vector<PdGrid> grids;
  grids.reserve(vars.size());
  for (int v : vars) grids.push_back(pd_grid(x, v, n_grid));
  for (Eigen::Index a = 0; a < m; ++a) {
    for (Eigen::Index c = a + 1; c < m; ++c) {
      const Eigen::MatrixXd pd = partial_dependence(
          forest, x, vars[static_cast<std::size_t>(a)],
          vars[static_cast<std::size_t>(c)], grids[static_cast<std::size_t>(a)],
          &grids[static_cast<std::size_t>(c)]);
      const double stat = interaction_statistic(pd);
      vint(a, c) = stat;
      vint(c, a) = stat;
    }
  }
  return vint;
}

double nogueira_stability(const Eigen::MatrixXd& selections) {
  const Eigen::Index b = selections.rows(), p = selections.cols();
  if (b < 2 || p < 1) return kNaN;
  const double k_bar = selections.sum() / static_cast<double>(b);
  const double frac = k_bar / static_cast<double>(p);
  const double denom = frac * (1.0 - frac);
  if (denom <= 0) return kNaN;
  double mean_var = 0;
  for (Eigen::Index f = 0; f < p; ++f) {
    const double m = selections.col(f).mean();
    const double var = (selections.col(f).array() - m).square().sum() /
                       static_cast<double>(b - 1);
    mean_var += var;
  }
  mean_var /= static_cast<double>(p);
  return 1.0 - mean_var / denom;
}

StabilityResult bootstrap_stability(const FeatureMatrix& x,
                                    const Eigen::VectorXd& phi,
                                    const CiForestOptions& opt, int top_k,
                                    int n_boot, int n_repeats,
                                    std::uint64_t seed) {
  if (n_boot < 2) throw ConfigError("stability needs at least two resamples");
  if (top_k < 1) throw ConfigError("top_k must be positive");
  const auto n = static_cast<int>(x.n_rows());
  const auto p = static_cast<Eigen::Index>(x.n_cols());
  const int k_effective = std::min<int>(top_k, static_cast<int>(p));

  StabilityResult out;
  out.selections = Eigen::MatrixXd::Zero(n_boot, p);
  out.vimp_samples = Eigen::MatrixXd::Zero(n_boot, p);

  parallel_for(n_boot, [&](std::int64_t b) {
    const auto ub = static_cast<std::uint64_t>(b);
    Rng rng(derive_seed(seed, streams::kBootstrap, ub, 0));
    const std::vector<int> rows = rng.bootstrap(n);
    const FeatureMatrix xb = x.rows(rows);
    Eigen::VectorXd phib(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      phib[static_cast<Eigen::Index>(i)] = phi[rows[i]];
    }
    const CiForest forest =
        fit_ciforest(xb, phib, opt, derive_seed(seed, streams::kBootstrap, ub, 1));
    const Eigen::VectorXd vimp = permutation_importance(
        forest, xb, phib, n_repeats,
        derive_seed(seed, streams::kBootstrap, ub, 2));
    out.vimp_samples.row(static_cast<Eigen::Index>(b)) = vimp.transpose();
    const std::vector<int> order = importance_ranking(vimp, x.names);
    for (int r = 0; r < k_effective; ++r) {
      out.selections(static_cast<Eigen::Index>(b), order[static_cast<std::size_t>(r)]) = 1.0;
    }
  });

  out.stability = nogueira_stability(out.selections);
  out.defined = std::isfinite(out.stability);
  return out;
}

}  // namespace watch
