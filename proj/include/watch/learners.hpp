#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "watch/tabular.hpp"
#include "watch/tree.hpp"

namespace watch {

/// Regression predicts a conditional mean; Probability fits a {0,1}
/// response by least squares and clips predictions to [0.01, 0.99].
enum class Task { Regression, Probability };

struct LassoOptions {
  int n_lambda = 50;
  double lambda_min_ratio = 1e-3;
  std::vector<double> lambda;  // explicit grid; overrides the two above
  int cv_folds = 5;
  double tol = 1e-7;      // max coefficient change, standardized scale
  int max_sweeps = 10000;
};

/// L1-penalized least squares fit via coordinate descent on
/// standardized columns, reported on the original scale.  The penalty
/// is chosen by k-fold cross-validation with the one-standard-error
/// rule (largest lambda whose CV error is within one SE of the
/// minimum); a single-value grid skips CV.
struct LassoFit {
  double intercept = 0;
  Eigen::VectorXd coef;
  double lambda = 0;
  Eigen::VectorXd lambda_grid;  // descending
  Eigen::VectorXd cv_mean;      // empty when CV was skipped
  Eigen::VectorXd cv_se;
};

LassoFit lasso_path_fit(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                        const LassoOptions& opt, std::uint64_t seed);
Eigen::VectorXd lasso_predict(const LassoFit& fit,
                              const Eigen::MatrixXd& design);

struct CartOptions {
  int max_depth = 6;
  int min_leaf = 10;
};

struct ForestOptions {
  int n_trees = 200;
  int mtry = 0;  // 0 means ceil(sqrt(p))
  int max_depth = 6;
  int min_leaf = 10;
  bool bootstrap = true;  // off: every tree sees all rows
};

struct BoostOptions {
  int n_rounds = 200;
  double learning_rate = 0.05;
  int max_depth = 3;
  int min_leaf = 10;
};

struct ForestFit {
  std::vector<Tree> trees;
  std::vector<std::vector<std::uint8_t>> in_bag;  // per tree, per row count
};

struct BoostFit {
  double init = 0;
  double learning_rate = 0.05;
  std::vector<Tree> trees;
};

class ModelImpl;

/// Value-semantics handle on a fitted learner.  Prediction is pure and
/// thread-safe; the handle is cheap to copy.
class Model {
 public:
  Model() = default;
  explicit Model(std::shared_ptr<const ModelImpl> impl);

  bool valid() const { return impl_ != nullptr; }
  Task task() const;
  std::string kind() const;
  Eigen::VectorXd predict(const FeatureMatrix& x) const;
  nlohmann::json to_json() const;

  // Introspection for diagnostics; null when the kind does not match.
  const LassoFit* lasso_fit() const;
  const Tree* cart_tree() const;
  const ForestFit* forest_fit() const;
  const BoostFit* boost_fit() const;
  const Eigen::VectorXd* stack_weights() const;
  std::vector<Model> stack_base() const;  // empty when not a stack

 private:
  std::shared_ptr<const ModelImpl> impl_;
};

Model fit_lasso(const FeatureMatrix& x, const Eigen::VectorXd& y, Task task,
                const LassoOptions& opt, std::uint64_t seed);
Model fit_cart(const FeatureMatrix& x, const Eigen::VectorXd& y, Task task,
               const CartOptions& opt, std::uint64_t seed);
Model fit_forest(const FeatureMatrix& x, const Eigen::VectorXd& y, Task task,
                 const ForestOptions& opt, std::uint64_t seed);
Model fit_boosting(const FeatureMatrix& x, const Eigen::VectorXd& y, Task task,
                   const BoostOptions& opt, std::uint64_t seed);

/// Out-of-bag forest prediction; rows that were in-bag for every tree
/// come back NaN.
Eigen::VectorXd oob_predict(const ForestFit& fit, const FeatureMatrix& x);

struct LearnerSpec {
  enum class Kind { Lasso, Cart, Forest, Boosting };
  Kind kind = Kind::Lasso;
  LassoOptions lasso;
  CartOptions cart;
  ForestOptions forest;
  BoostOptions boost;

  static LearnerSpec make_lasso() { return {}; }
  static LearnerSpec make_cart() {
    LearnerSpec s;
    s.kind = Kind::Cart;
    return s;
  }
  static LearnerSpec make_forest(int n_trees = 200) {
    LearnerSpec s;
    s.kind = Kind::Forest;
    s.forest.n_trees = n_trees;
    return s;
  }
  static LearnerSpec make_boosting() {
    LearnerSpec s;
    s.kind = Kind::Boosting;
    return s;
  }
  std::string name() const;
};

/// The default nuisance library: lasso, random forest, boosting.
std::vector<LearnerSpec> default_learners();

struct StackOptions {
  int cv_folds = 5;
};

/// Projects v onto the probability simplex (Euclidean projection).
Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v);

/// argmin_w ||y - Z w||^2 over the simplex, by projected gradient from
/// the uniform start.  Exactly duplicated columns receive equal weight.
Eigen::VectorXd simplex_weights(const Eigen::MatrixXd& z,
                                const Eigen::VectorXd& y);

struct StackDiagnostics {
  std::vector<std::string> learner_names;  // kept learners, spec order
  std::vector<std::string> failed;         // learners that threw during CV
  Eigen::VectorXd weights;                 // aligned with learner_names
  Eigen::MatrixXd oof;                     // out-of-fold predictions
  Eigen::VectorXd base_cv_loss;            // mean squared OOF error per base
  double stack_cv_loss = 0;                // same metric for the blend
};

/// Stacked generalization: out-of-fold predictions from each base
/// learner, simplex-constrained least-squares blend weights, then each
/// base refit on all rows.  Base learners that throw are dropped with
/// a note; if every learner fails, throws DataError.
Model fit_stacked(const std::vector<LearnerSpec>& specs,
                  const FeatureMatrix& x, const Eigen::VectorXd& y, Task task,
                  const StackOptions& opt, std::uint64_t seed,
                  StackDiagnostics* diag = nullptr);

}  // namespace watch
