#include "watch/cate.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "watch/error.hpp"
#include "watch/rng.hpp"

namespace watch {

namespace {

void require_imputed(const Dataset& ds) {
  for (const auto& name : ds.roles.covariates) {
    if (ds.column(name).missing_count() > 0) {
      throw DataError("covariate '" + name +
                      "' still has missing values; impute before modeling");
    }
  }
}

Eigen::VectorXd gather(const Eigen::VectorXd& v, const std::vector<int>& idx) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out[static_cast<Eigen::Index>(i)] = v[idx[i]];
  }
  return out;
}

}  // namespace

CrossFitPlan assign_folds(const Dataset& ds, int k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("cross-fitting needs k >= 2");
  const Column& trt = ds.treatment();
  const Eigen::Index n = ds.n_rows();
  CrossFitPlan plan;
  plan.k = k;
  plan.fold_of.assign(static_cast<std::size_t>(n), -1);
  for (int arm = 0; arm <= 1; ++arm) {
    std::vector<int> rows;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (static_cast<int>(trt.values[i]) == arm) {
        rows.push_back(static_cast<int>(i));
      }
    }
    if (rows.size() < static_cast<std::size_t>(k)) {
      throw DataError("arm " + std::to_string(arm) + " has " +
                      std::to_string(rows.size()) +
                      " rows; cannot spread across " + std::to_string(k) +
                      " folds");
    }
    Rng rng(derive_seed(seed, streams::kFolds, static_cast<std::uint64_t>(arm)));
    rng.shuffle(rows);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      plan.fold_of[static_cast<std::size_t>(rows[i])] =
          static_cast<int>(i) % k;
    }
  }
  return plan;
}

FoldModels fit_nuisances(const Dataset& ds, const CrossFitPlan& folds,
                         int fold, const AnalysisPlan& plan,
                         const LearnerConfig& config) {
  require_imputed(ds);
  const Column& trt = ds.treatment();
  const Column& outcome = ds.outcome();
  const Eigen::Index n = ds.n_rows();

  std::vector<int> train, treated, control;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (folds.fold_of[static_cast<std::size_t>(i)] == fold) continue;
    const int r = static_cast<int>(i);
    train.push_back(r);
    (static_cast<int>(trt.values[i]) == 1 ? treated : control).push_back(r);
  }
  if (treated.empty() || control.empty()) {
    throw DataError("an arm is absent from the training split of fold " +
                    std::to_string(fold));
  }

  const FeatureMatrix features = make_features(ds, ds.roles.covariates);
  StackOptions stack;
  stack.cv_folds = config.stack_cv_folds;

  FoldModels out;
  const auto ufold = static_cast<std::uint64_t>(fold);
  {
    const FeatureMatrix x1 = features.rows(treated);
    const Eigen::VectorXd y1 = gather(outcome.values, treated);
    out.mu1 = fit_stacked(config.specs, x1, y1, Task::Regression, stack,
                          derive_seed(plan.seed, streams::kFolds, ufold, 1));
  }
  {
    const FeatureMatrix x0 = features.rows(control);
    const Eigen::VectorXd y0 = gather(outcome.values, control);
    out.mu0 = fit_stacked(config.specs, x0, y0, Task::Regression, stack,
                          derive_seed(plan.seed, streams::kFolds, ufold, 2));
  }
  if (!plan.propensity.known) {
    const FeatureMatrix xa = features.rows(train);
    Eigen::VectorXd a(static_cast<Eigen::Index>(train.size()));
    for (std::size_t i = 0; i < train.size(); ++i) {
      a[static_cast<Eigen::Index>(i)] = trt.values[train[i]];
    }
    out.pi = fit_stacked(config.specs, xa, a, Task::Probability, stack,
                         derive_seed(plan.seed, streams::kFolds, ufold, 3));
  }
  return out;
}

PseudoOutcomes pseudo_outcomes(const Dataset& ds, const AnalysisPlan& plan,
                               const LearnerConfig& config,
                               double clip_epsilon,
                               const NuisanceTruth* truth) {
  if (!(clip_epsilon > 0 && clip_epsilon < 0.5)) {
    throw ConfigError("clip_epsilon must lie in (0, 0.5)");
  }
  require_imputed(ds);
  const Eigen::Index n = ds.n_rows();
  const Column& trt = ds.treatment();
  const Column& outcome = ds.outcome();
  if (truth && (truth->mu0.size() != n || truth->mu1.size() != n ||
                truth->pi.size() != n)) {
    throw DataError("injected nuisance truth does not match the data size");
  }

  const CrossFitPlan folds =
      assign_folds(ds, plan.k_folds, plan.seed);

  PseudoOutcomes po;
  po.clip_epsilon = clip_epsilon;
  po.fold_of = folds.fold_of;
  po.phi.resize(n);
  po.mu0_hat.resize(n);
  po.mu1_hat.resize(n);
  po.pi_hat.resize(n);
  po.fold_train_rows.resize(static_cast<std::size_t>(folds.k));

  const FeatureMatrix features = make_features(ds, ds.roles.covariates);

  for (int k = 0; k < folds.k; ++k) {
    std::vector<int> held, train;
    for (Eigen::Index i = 0; i < n; ++i) {
      (folds.fold_of[static_cast<std::size_t>(i)] == k ? held : train)
          .push_back(static_cast<int>(i));
    }
    po.fold_train_rows[static_cast<std::size_t>(k)] = train;
    if (held.empty()) continue;

    if (truth) {
      for (int r : held) {
        po.mu0_hat[r] = truth->mu0[r];
        po.mu1_hat[r] = truth->mu1[r];
        po.pi_hat[r] = truth->pi[r];
      }
    } else {
      const FoldModels models = fit_nuisances(ds, folds, k, plan, config);
      const FeatureMatrix x_held = features.rows(held);
      const Eigen::VectorXd m0 = models.mu0.predict(x_held);
      const Eigen::VectorXd m1 = models.mu1.predict(x_held);
      Eigen::VectorXd pi;
      if (models.pi) {
        pi = models.pi->predict(x_held);
      } else {
        pi = Eigen::VectorXd::Constant(
            static_cast<Eigen::Index>(held.size()), plan.propensity.value);
      }
      for (std::size_t i = 0; i < held.size(); ++i) {
        const int r = held[i];
        po.mu0_hat[r] = m0[static_cast<Eigen::Index>(i)];
        po.mu1_hat[r] = m1[static_cast<Eigen::Index>(i)];
        po.pi_hat[r] = pi[static_cast<Eigen::Index>(i)];
      }
    }
  }

  const double lo = clip_epsilon, hi = 1.0 - clip_epsilon;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double e = std::min(std::max(po.pi_hat[i], lo), hi);
    po.pi_hat[i] = e;
    const double a = trt.values[i];
    const double fitted = a == 1.0 ? po.mu1_hat[i] : po.mu0_hat[i];
    po.phi[i] = (a - e) / (e * (1.0 - e)) * (outcome.values[i] - fitted) +
                po.mu1_hat[i] - po.mu0_hat[i];
  }
  return po;
}

AteSummary ate_summary(const PseudoOutcomes& po) {
  const Eigen::Index n = po.phi.size();
  AteSummary s;
  s.estimate = po.phi.mean();
  if (n > 1) {
    const double var = (po.phi.array() - s.estimate).square().sum() /
                       static_cast<double>(n - 1);
    s.se = std::sqrt(var / static_cast<double>(n));
  }
  s.lo = s.estimate - 1.96 * s.se;
  s.hi = s.estimate + 1.96 * s.se;
  return s;
}

void write_pseudo_csv(const Dataset& ds, const PseudoOutcomes& po,
                      const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  const Column& trt = ds.treatment();
  const Column& outcome = ds.outcome();
  out << "row,fold,arm,outcome,pi_hat,mu0_hat,mu1_hat,phi\n";
  char buf[256];
  for (Eigen::Index i = 0; i < po.phi.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%lld,%d,%d,%.12g,%.12g,%.12g,%.12g,%.12g\n",
                  static_cast<long long>(i),
                  po.fold_of[static_cast<std::size_t>(i)],
                  static_cast<int>(trt.values[i]), outcome.values[i],
                  po.pi_hat[i], po.mu0_hat[i], po.mu1_hat[i], po.phi[i]);
    out << buf;
  }
}

}  // namespace watch
