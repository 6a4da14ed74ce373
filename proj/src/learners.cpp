#include "watch/learners.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <set>

#include "watch/error.hpp"
#include "watch/parallel.hpp"
#include "watch/rng.hpp"

namespace watch {

namespace {

constexpr double kProbLo = 0.01;
constexpr double kProbHi = 0.99;

void require_finite(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                    const char* who) {
  if (!x.allFinite()) {
    throw DataError(std::string(who) + ": design contains non-finite values");
  }
  if (!y.allFinite()) {
    throw DataError(std::string(who) + ": response contains non-finite values");
  }
  if (x.rows() != y.size()) {
    throw DataError(std::string(who) + ": design rows do not match response");
  }
}

double soft_threshold(double z, double lambda) {
  if (z > lambda) return z - lambda;
  if (z < -lambda) return z + lambda;
  return 0.0;
}

struct Standardized {
  Eigen::MatrixXd x;          // active columns only, mean 0 / sd 1
  Eigen::VectorXd y;          // centered
  Eigen::VectorXd mean, sd;   // all columns
  std::vector<int> active;    // columns with positive spread
  double y_mean = 0;
};

Standardized standardize(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  Standardized s;
  const Eigen::Index n = x.rows(), p = x.cols();
  s.mean = x.colwise().mean();
  s.sd.resize(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double var =
        (x.col(j).array() - s.mean[j]).square().sum() / static_cast<double>(n);
    s.sd[j] = std::sqrt(var);
    if (s.sd[j] > 0) s.active.push_back(static_cast<int>(j));
  }
  s.x.resize(n, static_cast<Eigen::Index>(s.active.size()));
  for (std::size_t k = 0; k < s.active.size(); ++k) {
    const int j = s.active[k];
    s.x.col(static_cast<Eigen::Index>(k)) =
        (x.col(j).array() - s.mean[j]) / s.sd[j];
  }
  s.y_mean = y.mean();
  s.y = y.array() - s.y_mean;
  return s;
}

/// Cyclic coordinate descent for (1/2n)||y - Xb||^2 + lambda ||b||_1 on
/// standardized columns.  b and r (= y - Xb) are updated in place.
void cd_solve(const Eigen::MatrixXd& x, double lambda, double tol,
              int max_sweeps, Eigen::VectorXd& b, Eigen::VectorXd& r) {
  const auto n = static_cast<double>(x.rows());
  const Eigen::Index p = x.cols();
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double delta = 0;
    for (Eigen::Index j = 0; j < p; ++j) {
      const double old = b[j];
      const double z = old + x.col(j).dot(r) / n;
      const double next = soft_threshold(z, lambda);
      if (next != old) {
        r += x.col(j) * (old - next);
        b[j] = next;
        delta = std::max(delta, std::abs(next - old));
      }
    }
    if (delta < tol) break;
  }
}

struct PathPoint {
  double intercept = 0;
  Eigen::VectorXd coef;  // original scale, full width
};

/// Solves the whole grid, warm-starting each point from the previous.
std::vector<PathPoint> solve_path(const Eigen::MatrixXd& x,
                                  const Eigen::VectorXd& y,
                                  const Eigen::VectorXd& grid,
                                  const LassoOptions& opt) {
  Standardized s = standardize(x, y);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(s.x.cols());
  Eigen::VectorXd r = s.y;
  std::vector<PathPoint> out;
  out.reserve(static_cast<std::size_t>(grid.size()));
  for (Eigen::Index g = 0; g < grid.size(); ++g) {
    cd_solve(s.x, grid[g], opt.tol, opt.max_sweeps, b, r);
    PathPoint pt;
    pt.coef = Eigen::VectorXd::Zero(x.cols());
    double shift = 0;
    for (std::size_t k = 0; k < s.active.size(); ++k) {
      const int j = s.active[k];
      const double cj = b[static_cast<Eigen::Index>(k)] / s.sd[j];
      pt.coef[j] = cj;
      shift += cj * s.mean[j];
    }
    pt.intercept = s.y_mean - shift;
    out.push_back(std::move(pt));
  }
  return out;
}

Eigen::VectorXd make_grid(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                          const LassoOptions& opt) {
  if (!opt.lambda.empty()) {
    std::vector<double> grid = opt.lambda;
    std::sort(grid.begin(), grid.end(), std::greater<double>());
    return Eigen::Map<Eigen::VectorXd>(grid.data(),
                                       static_cast<Eigen::Index>(grid.size()));
  }
  Standardized s = standardize(x, y);
  double lambda_max = 0;
  const auto n = static_cast<double>(x.rows());
  for (Eigen::Index k = 0; k < s.x.cols(); ++k) {
    lambda_max = std::max(lambda_max, std::abs(s.x.col(k).dot(s.y)) / n);
  }
  if (lambda_max <= 0) {
    // Degenerate: nothing to shrink; a single point is enough.
    return Eigen::VectorXd::Constant(1, 0.0);
  }
  const int g = std::max(opt.n_lambda, 2);
  Eigen::VectorXd grid(g);
  const double log_max = std::log(lambda_max);
  const double log_min = std::log(lambda_max * opt.lambda_min_ratio);
  for (int i = 0; i < g; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(g - 1);
    grid[i] = std::exp(log_max + t * (log_min - log_max));
  }
  return grid;
}

}  // namespace

LassoFit lasso_path_fit(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                        const LassoOptions& opt, std::uint64_t seed) {
  require_finite(design, y, "lasso");
  const Eigen::Index n = design.rows();
  if (n < 2) throw DataError("lasso: needs at least two rows");

  const Eigen::VectorXd grid = make_grid(design, y, opt);
  const std::vector<PathPoint> path = solve_path(design, y, grid, opt);

  LassoFit fit;
  fit.lambda_grid = grid;
  Eigen::Index chosen = 0;

  if (grid.size() > 1) {
    const int k_folds = static_cast<int>(
        std::min<Eigen::Index>(std::max(opt.cv_folds, 2), n));
    std::vector<int> fold_of(static_cast<std::size_t>(n));
    {
      Rng rng(derive_seed(seed, streams::kLassoCv));
      const std::vector<int> perm = rng.permutation(static_cast<int>(n));
      for (std::size_t i = 0; i < perm.size(); ++i) {
        fold_of[static_cast<std::size_t>(perm[i])] =
            static_cast<int>(i) % k_folds;
      }
    }
    Eigen::MatrixXd fold_mse(k_folds, grid.size());
    for (int k = 0; k < k_folds; ++k) {
      std::vector<int> train, test;
      for (Eigen::Index i = 0; i < n; ++i) {
        (fold_of[static_cast<std::size_t>(i)] == k ? test : train)
            .push_back(static_cast<int>(i));
      }
      Eigen::MatrixXd xt(static_cast<Eigen::Index>(train.size()), design.cols());
      Eigen::VectorXd yt(static_cast<Eigen::Index>(train.size()));
      for (std::size_t i = 0; i < train.size(); ++i) {
        xt.row(static_cast<Eigen::Index>(i)) = design.row(train[i]);
        yt[static_cast<Eigen::Index>(i)] = y[train[i]];
      }
      const std::vector<PathPoint> fold_path = solve_path(xt, yt, grid, opt);
      for (Eigen::Index g = 0; g < grid.size(); ++g) {
        double sse = 0;
        for (int r : test) {
          const double pred =
              fold_path[static_cast<std::size_t>(g)].intercept +
              design.row(r).dot(fold_path[static_cast<std::size_t>(g)].coef);
          sse += (y[r] - pred) * (y[r] - pred);
        }
        fold_mse(k, g) = sse / static_cast<double>(test.size());
      }
    }
    fit.cv_mean = fold_mse.colwise().mean();
    fit.cv_se.resize(grid.size());
    for (Eigen::Index g = 0; g < grid.size(); ++g) {
      const double m = fit.cv_mean[g];
      const double var =
          (fold_mse.col(g).array() - m).square().sum() /
          static_cast<double>(k_folds - 1);
      fit.cv_se[g] = std::sqrt(var / static_cast<double>(k_folds));
    }
    Eigen::Index best = 0;
    for (Eigen::Index g = 1; g < grid.size(); ++g) {
      if (fit.cv_mean[g] < fit.cv_mean[best]) best = g;
    }
    const double limit = fit.cv_mean[best] + fit.cv_se[best];
    chosen = best;
    for (Eigen::Index g = 0; g <= best; ++g) {
      if (fit.cv_mean[g] <= limit) {
        chosen = g;  // grid is descending: first hit is the largest lambda
        break;
      }
    }
  }

  fit.lambda = grid[chosen];
  fit.intercept = path[static_cast<std::size_t>(chosen)].intercept;
  fit.coef = path[static_cast<std::size_t>(chosen)].coef;
  return fit;
}

Eigen::VectorXd lasso_predict(const LassoFit& fit,
                              const Eigen::MatrixXd& design) {
  return (design * fit.coef).array() + fit.intercept;
}

// ---------------------------------------------------------------------------
// Model implementations.

class ModelImpl {
 public:
  explicit ModelImpl(Task task) : task_(task) {}
  virtual ~ModelImpl() = default;
  Task task() const { return task_; }
  virtual std::string kind() const = 0;
  virtual Eigen::VectorXd raw_predict(const FeatureMatrix& x) const = 0;
  virtual nlohmann::json to_json() const = 0;

  virtual const LassoFit* as_lasso() const { return nullptr; }
  virtual const Tree* as_cart() const { return nullptr; }
  virtual const ForestFit* as_forest() const { return nullptr; }
  virtual const BoostFit* as_boost() const { return nullptr; }
  virtual const Eigen::VectorXd* as_stack_weights() const { return nullptr; }
  virtual std::vector<Model> stack_base() const { return {}; }

 private:
  Task task_;
};

namespace {

nlohmann::json tree_to_json(const Tree& tree) {
  auto nodes = nlohmann::json::array();
  for (const auto& n : tree.nodes) {
    nodes.push_back({{"feature", n.feature},
                     {"categorical", n.categorical},
                     {"threshold", n.threshold},
                     {"level_mask", n.level_mask},
                     {"left", n.left},
                     {"right", n.right},
                     {"value", n.value},
                     {"n", n.n_samples}});
  }
  return nodes;
}

class LassoModel final : public ModelImpl {
 public:
  LassoModel(Task task, LassoFit fit, std::vector<std::string> labels)
      : ModelImpl(task), fit_(std::move(fit)), labels_(std::move(labels)) {}

  std::string kind() const override { return "lasso"; }

  Eigen::VectorXd raw_predict(const FeatureMatrix& x) const override {
    const DesignMatrix dm = one_hot(x);
    if (dm.labels != labels_) {
      throw DataError("lasso: prediction features do not match training");
    }
    return lasso_predict(fit_, dm.X);
  }

  nlohmann::json to_json() const override {
    auto coefs = nlohmann::json::array();
    for (Eigen::Index j = 0; j < fit_.coef.size(); ++j) {
      coefs.push_back({{"term", labels_[static_cast<std::size_t>(j)]},
                       {"coef", fit_.coef[j]}});
    }
    return {{"kind", "lasso"},
            {"intercept", fit_.intercept},
            {"lambda", fit_.lambda},
            {"coefficients", coefs}};
  }

  const LassoFit* as_lasso() const override { return &fit_; }

 private:
  LassoFit fit_;
  std::vector<std::string> labels_;
};

class CartModel final : public ModelImpl {
 public:
  CartModel(Task task, Tree tree) : ModelImpl(task), tree_(std::move(tree)) {}
  std::string kind() const override { return "cart"; }
  Eigen::VectorXd raw_predict(const FeatureMatrix& x) const override {
    return tree_.predict(x);
  }
  nlohmann::json to_json() const override {
    return {{"kind", "cart"}, {"nodes", tree_to_json(tree_)}};
  }
  const Tree* as_cart() const override { return &tree_; }

 private:
  Tree tree_;
};

class ForestModel final : public ModelImpl {
 public:
  ForestModel(Task task, ForestFit fit)
      : ModelImpl(task), fit_(std::move(fit)) {}
  std::string kind() const override { return "forest"; }
  Eigen::VectorXd raw_predict(const FeatureMatrix& x) const override {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(x.n_rows());
    for (const auto& tree : fit_.trees) out += tree.predict(x);
    return out / static_cast<double>(fit_.trees.size());
  }
  nlohmann::json to_json() const override {
    auto trees = nlohmann::json::array();
    for (const auto& t : fit_.trees) trees.push_back(tree_to_json(t));
    return {{"kind", "forest"}, {"trees", trees}};
  }
  const ForestFit* as_forest() const override { return &fit_; }

 private:
  ForestFit fit_;
};

class BoostModel final : public ModelImpl {
 public:
  BoostModel(Task task, BoostFit fit)
      : ModelImpl(task), fit_(std::move(fit)) {}
  std::string kind() const override { return "boosting"; }
  Eigen::VectorXd raw_predict(const FeatureMatrix& x) const override {
    Eigen::VectorXd out = Eigen::VectorXd::Constant(x.n_rows(), fit_.init);
    for (const auto& tree : fit_.trees) {
      out += fit_.learning_rate * tree.predict(x);
    }
    return out;
  }
  nlohmann::json to_json() const override {
    auto trees = nlohmann::json::array();
    for (const auto& t : fit_.trees) trees.push_back(tree_to_json(t));
    return {{"kind", "boosting"},
            {"init", fit_.init},
            {"learning_rate", fit_.learning_rate},
            {"trees", trees}};
  }
  const BoostFit* as_boost() const override { return &fit_; }

 private:
  BoostFit fit_;
};

class StackModel final : public ModelImpl {
 public:
  StackModel(Task task, std::vector<Model> base, Eigen::VectorXd weights)
      : ModelImpl(task), base_(std::move(base)), weights_(std::move(weights)) {}
  std::string kind() const override { return "stack"; }
  Eigen::VectorXd raw_predict(const FeatureMatrix& x) const override {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(x.n_rows());
    for (std::size_t j = 0; j < base_.size(); ++j) {
      out += weights_[static_cast<Eigen::Index>(j)] * base_[j].predict(x);
    }
    return out;
  }
  nlohmann::json to_json() const override {
    auto base = nlohmann::json::array();
    for (std::size_t j = 0; j < base_.size(); ++j) {
      base.push_back({{"weight", weights_[static_cast<Eigen::Index>(j)]},
                      {"model", base_[j].to_json()}});
    }
    return {{"kind", "stack"}, {"base", base}};
  }
  const Eigen::VectorXd* as_stack_weights() const override {
    return &weights_;
  }
  std::vector<Model> stack_base() const override { return base_; }

 private:
  std::vector<Model> base_;
  Eigen::VectorXd weights_;
};

void require_features_finite(const FeatureMatrix& x, const Eigen::VectorXd& y,
                             const char* who) {
  require_finite(x.values, y, who);
}

}  // namespace

Model::Model(std::shared_ptr<const ModelImpl> impl) : impl_(std::move(impl)) {}

Task Model::task() const { return impl_->task(); }
std::string Model::kind() const { return impl_->kind(); }

Eigen::VectorXd Model::predict(const FeatureMatrix& x) const {
  Eigen::VectorXd out = impl_->raw_predict(x);
  if (impl_->task() == Task::Probability) {
    out = out.cwiseMax(kProbLo).cwiseMin(kProbHi);
  }
  return out;
}

nlohmann::json Model::to_json() const { return impl_->to_json(); }
const LassoFit* Model::lasso_fit() const { return impl_->as_lasso(); }
const Tree* Model::cart_tree() const { return impl_->as_cart(); }
const ForestFit* Model::forest_fit() const { return impl_->as_forest(); }
const BoostFit* Model::boost_fit() const { return impl_->as_boost(); }
const Eigen::VectorXd* Model::stack_weights() const {
  return impl_->as_stack_weights();
}
std::vector<Model> Model::stack_base() const { return impl_->stack_base(); }

Model fit_lasso(const FeatureMatrix& x, const Eigen::VectorXd& y, Task task,
                const LassoOptions& opt, std::uint64_t seed) {
  require_features_finite(x, y, "lasso");
  DesignMatrix dm = one_hot(x);
  LassoFit fit = lasso_path_fit(dm.X, y, opt, seed);
  return Model(std::make_shared<LassoModel>(task, std::move(fit),
                                            std::move(dm.labels)));
}

Model fit_cart(const FeatureMatrix& x, const Eigen::VectorXd& y, Task task,
               const CartOptions& opt, std::uint64_t seed) {
  (void)seed;  // growth is deterministic when every feature is a candidate
  require_features_finite(x, y, "cart");
  if (x.n_rows() < 1) throw DataError("cart: empty training set");
  std::vector<int> rows(static_cast<std::size_t>(x.n_rows()));
  std::iota(rows.begin(), rows.end(), 0);
  TreeGrowth growth;
  growth.max_depth = opt.max_depth;
  growth.min_leaf = opt.min_leaf;
  Tree tree = grow_tree(x, y, rows, growth);
  return Model(std::make_shared<CartModel>(task, std::move(tree)));
}

Model fit_forest(const FeatureMatrix& x, const Eigen::VectorXd& y, Task task,
                 const ForestOptions& opt, std::uint64_t seed) {
  require_features_finite(x, y, "forest");
  const auto n = static_cast<int>(x.n_rows());
  if (n < opt.min_leaf) {
    throw DataError("forest: fewer rows than min_leaf");
  }
  if (opt.n_trees < 1) throw DataError("forest: n_trees must be positive");
  const int mtry =
      opt.mtry > 0
          ? opt.mtry
          : static_cast<int>(
                std::ceil(std::sqrt(static_cast<double>(x.n_cols()))));

  ForestFit fit;
  fit.trees.resize(static_cast<std::size_t>(opt.n_trees));
  fit.in_bag.assign(static_cast<std::size_t>(opt.n_trees),
                    std::vector<std::uint8_t>(static_cast<std::size_t>(n), 0));
  parallel_for(opt.n_trees, [&](std::int64_t t) {
    const auto ut = static_cast<std::uint64_t>(t);
    std::vector<int> rows;
    if (opt.bootstrap) {
      Rng rng(derive_seed(seed, streams::kTree, ut));
      rows = rng.bootstrap(n);
    } else {
      rows.resize(static_cast<std::size_t>(n));
      std::iota(rows.begin(), rows.end(), 0);
    }
    auto& bag = fit.in_bag[static_cast<std::size_t>(t)];
    for (int r : rows) {
      if (bag[static_cast<std::size_t>(r)] < 255) ++bag[static_cast<std::size_t>(r)];
    }
    TreeGrowth growth;
    growth.max_depth = opt.max_depth;
    growth.min_leaf = opt.min_leaf;
    growth.mtry = mtry;
    growth.seed = derive_seed(seed, streams::kTree, ut, 1);
    fit.trees[static_cast<std::size_t>(t)] = grow_tree(x, y, rows, growth);
  });
  return Model(std::make_shared<ForestModel>(task, std::move(fit)));
}

Eigen::VectorXd oob_predict(const ForestFit& fit, const FeatureMatrix& x) {
  const Eigen::Index n = x.n_rows();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd count = Eigen::VectorXd::Zero(n);
  for (std::size_t t = 0; t < fit.trees.size(); ++t) {
    const auto& bag = fit.in_bag[t];
    for (Eigen::Index i = 0; i < n; ++i) {
      if (bag[static_cast<std::size_t>(i)] == 0) {
        sum[i] += fit.trees[t].predict_row(x, i);
        count[i] += 1;
      }
    }
  }
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out[i] = count[i] > 0 ? sum[i] / count[i]
                          : std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

Model fit_boosting(const FeatureMatrix& x, const Eigen::VectorXd& y, Task task,
                   const BoostOptions& opt, std::uint64_t seed) {
  (void)seed;  // no subsampling: the fit is deterministic
  require_features_finite(x, y, "boosting");
  const Eigen::Index n = x.n_rows();
  if (n < 1) throw DataError("boosting: empty training set");
  if (opt.n_rounds < 0) throw DataError("boosting: n_rounds must be >= 0");

  BoostFit fit;
  fit.init = y.mean();
  fit.learning_rate = opt.learning_rate;
  std::vector<int> rows(static_cast<std::size_t>(n));
  std::iota(rows.begin(), rows.end(), 0);
  Eigen::VectorXd residual = y.array() - fit.init;
  TreeGrowth growth;
  growth.max_depth = opt.max_depth;
  growth.min_leaf = opt.min_leaf;
  for (int round = 0; round < opt.n_rounds; ++round) {
    Tree tree = grow_tree(x, residual, rows, growth);
    for (Eigen::Index i = 0; i < n; ++i) {
      residual[i] -= opt.learning_rate * tree.predict_row(x, i);
    }
    fit.trees.push_back(std::move(tree));
  }
  return Model(std::make_shared<BoostModel>(task, std::move(fit)));
}

std::string LearnerSpec::name() const {
  switch (kind) {
    case Kind::Lasso: return "lasso";
    case Kind::Cart: return "cart";
    case Kind::Forest: return "forest";
    case Kind::Boosting: return "boosting";
  }
  return "unknown";
}

std::vector<LearnerSpec> default_learners() {
  return {LearnerSpec::make_lasso(), LearnerSpec::make_forest(),
          LearnerSpec::make_boosting()};
}

Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v) {
  const Eigen::Index m = v.size();
  std::vector<double> u(v.data(), v.data() + m);
  std::sort(u.begin(), u.end(), std::greater<double>());
  double css = 0;
  double theta = 0;
  int rho = -1;
  for (Eigen::Index j = 0; j < m; ++j) {
    css += u[static_cast<std::size_t>(j)];
    const double candidate =
        (css - 1.0) / static_cast<double>(j + 1);
    if (u[static_cast<std::size_t>(j)] - candidate > 0) {
      rho = static_cast<int>(j);
      theta = candidate;
    }
  }
  Eigen::VectorXd w(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    w[j] = std::max(v[j] - theta, 0.0);
  }
  (void)rho;
  return w;
}

Eigen::VectorXd simplex_weights(const Eigen::MatrixXd& z,
                                const Eigen::VectorXd& y) {
  const Eigen::Index m = z.cols();
  if (m == 0) throw DataError("stacking: no base predictions to blend");
  Eigen::VectorXd w = Eigen::VectorXd::Constant(m, 1.0 / static_cast<double>(m));
  if (m == 1) return w;

  const Eigen::MatrixXd gram = z.transpose() * z;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  const double lipschitz = eig.eigenvalues().maxCoeff();
  if (!(lipschitz > 0)) return w;  // all-zero predictions: keep uniform

  const Eigen::VectorXd zty = z.transpose() * y;
  const double step = 1.0 / lipschitz;
  for (int it = 0; it < 200000; ++it) {
    const Eigen::VectorXd grad = gram * w - zty;
    const Eigen::VectorXd next = project_to_simplex(w - step * grad);
    const double change = (next - w).cwiseAbs().maxCoeff();
    w = next;
    if (change < 1e-12) break;
  }

  // Identical prediction columns are interchangeable: share their
  // weight equally so duplicated learners tie exactly.
  std::vector<bool> grouped(static_cast<std::size_t>(m), false);
  for (Eigen::Index j = 0; j < m; ++j) {
    if (grouped[static_cast<std::size_t>(j)]) continue;
    std::vector<Eigen::Index> group{j};
    for (Eigen::Index k = j + 1; k < m; ++k) {
      if (!grouped[static_cast<std::size_t>(k)] && z.col(j) == z.col(k)) {
        group.push_back(k);
        grouped[static_cast<std::size_t>(k)] = true;
      }
    }
    if (group.size() > 1) {
      double total = 0;
      for (Eigen::Index g : group) total += w[g];
      const double share = total / static_cast<double>(group.size());
      for (Eigen::Index g : group) w[g] = share;
    }
  }
  return w;
}

namespace {

Model fit_one(const LearnerSpec& spec, const FeatureMatrix& x,
              const Eigen::VectorXd& y, Task task, std::uint64_t seed) {
  switch (spec.kind) {
    case LearnerSpec::Kind::Lasso:
      return fit_lasso(x, y, task, spec.lasso, seed);
    case LearnerSpec::Kind::Cart:
      return fit_cart(x, y, task, spec.cart, seed);
    case LearnerSpec::Kind::Forest:
      return fit_forest(x, y, task, spec.forest, seed);
    case LearnerSpec::Kind::Boosting:
      return fit_boosting(x, y, task, spec.boost, seed);
  }
  throw DataError("unknown learner kind");
}

}  // namespace

Model fit_stacked(const std::vector<LearnerSpec>& specs,
                  const FeatureMatrix& x, const Eigen::VectorXd& y, Task task,
                  const StackOptions& opt, std::uint64_t seed,
                  StackDiagnostics* diag) {
  if (specs.empty()) throw DataError("stacking: no learners configured");
  require_features_finite(x, y, "stacking");
  const auto n = static_cast<int>(x.n_rows());
  if (n < 4) throw DataError("stacking: needs at least four rows");
  const int k_folds = std::max(2, std::min(opt.cv_folds, n / 2));

  std::vector<int> fold_of(static_cast<std::size_t>(n));
  {
    Rng rng(derive_seed(seed, streams::kStack, 0));
    const std::vector<int> perm = rng.permutation(n);
    for (std::size_t i = 0; i < perm.size(); ++i) {
      fold_of[static_cast<std::size_t>(perm[i])] =
          static_cast<int>(i) % k_folds;
    }
  }

  const auto m = specs.size();
  Eigen::MatrixXd oof = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(m));
  std::vector<bool> failed(m, false);

  for (int k = 0; k < k_folds; ++k) {
    std::vector<int> train, test;
    for (int i = 0; i < n; ++i) {
      (fold_of[static_cast<std::size_t>(i)] == k ? test : train).push_back(i);
    }
    const FeatureMatrix x_train = x.rows(train);
    const FeatureMatrix x_test = x.rows(test);
    Eigen::VectorXd y_train(static_cast<Eigen::Index>(train.size()));
    for (std::size_t i = 0; i < train.size(); ++i) {
      y_train[static_cast<Eigen::Index>(i)] = y[train[i]];
    }
    for (std::size_t s = 0; s < m; ++s) {
      if (failed[s]) continue;
      try {
        const Model model =
            fit_one(specs[s], x_train, y_train, task,
                    derive_seed(seed, streams::kStack,
                                static_cast<std::uint64_t>(k) + 1,
                                static_cast<std::uint64_t>(s)));
        const Eigen::VectorXd pred = model.predict(x_test);
        for (std::size_t i = 0; i < test.size(); ++i) {
          oof(test[i], static_cast<Eigen::Index>(s)) =
              pred[static_cast<Eigen::Index>(i)];
        }
      } catch (const std::exception&) {
        failed[s] = true;
      }
    }
  }

  std::vector<Model> base;
  std::vector<std::size_t> kept;
  for (std::size_t s = 0; s < m; ++s) {
    if (failed[s]) continue;
    try {
      base.push_back(fit_one(specs[s], x, y, task,
                             derive_seed(seed, streams::kStack, 9999,
                                         static_cast<std::uint64_t>(s))));
      kept.push_back(s);
    } catch (const std::exception&) {
      failed[s] = true;
    }
  }
  if (base.empty()) {
    throw DataError("stacking: every base learner failed to train");
  }

  Eigen::MatrixXd z(n, static_cast<Eigen::Index>(kept.size()));
  for (std::size_t j = 0; j < kept.size(); ++j) {
    z.col(static_cast<Eigen::Index>(j)) =
        oof.col(static_cast<Eigen::Index>(kept[j]));
  }
  const Eigen::VectorXd weights = simplex_weights(z, y);

  if (diag) {
    diag->learner_names.clear();
    diag->failed.clear();
    for (std::size_t j = 0; j < kept.size(); ++j) {
      diag->learner_names.push_back(specs[kept[j]].name());
    }
    for (std::size_t s = 0; s < m; ++s) {
      if (failed[s]) diag->failed.push_back(specs[s].name());
    }
    diag->weights = weights;
    diag->oof = z;
    diag->base_cv_loss.resize(static_cast<Eigen::Index>(kept.size()));
    for (Eigen::Index j = 0; j < diag->base_cv_loss.size(); ++j) {
      diag->base_cv_loss[j] =
          (y - z.col(j)).squaredNorm() / static_cast<double>(n);
    }
    diag->stack_cv_loss =
        (y - z * weights).squaredNorm() / static_cast<double>(n);
  }
  return Model(std::make_shared<StackModel>(task, std::move(base), weights));
}

}  // namespace watch
