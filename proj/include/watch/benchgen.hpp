#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "watch/tabular.hpp"

namespace watch {

/// Marginal law of one synthetic covariate.
struct Marginal {
  enum class Kind { Normal, Categorical };
  Kind kind = Kind::Normal;
  double mu = 0.0;
  double sigma = 1.0;
  std::vector<std::string> levels;  // categorical only
  std::vector<double> probs;        // same length as levels, sums to 1

  static Marginal normal(double mu = 0.0, double sigma = 1.0) {
    Marginal m;
    m.kind = Kind::Normal;
    m.mu = mu;
    m.sigma = sigma;
    return m;
  }
  static Marginal categorical(std::vector<std::string> levels,
                              std::vector<double> probs) {
    Marginal m;
    m.kind = Kind::Categorical;
    m.levels = std::move(levels);
    m.probs = std::move(probs);
    return m;
  }
};

/// Synthetic-trial recipe.  Covariates are drawn from a Gaussian copula
/// (latent multivariate normal pushed through each marginal), treatment
/// is a fair coin independent of everything, and the outcome is
///   y = 1.38 * (1{X1 == "N"} - 0.5 * X17) + a * tau(x) + eps
/// with eps ~ N(0,1) shared between the two potential outcomes.  In
/// Heterogeneous mode tau(x) = -0.105 + 0.725 * 1{X14 > 0.25} * 1{X1 == "N"},
/// so the true effect takes exactly two values; Homogeneous mode sets
/// tau(x) = tau0 everywhere.
struct ScenarioSpec {
  enum class EffectKind { Heterogeneous, Homogeneous };

  Eigen::Index n = 500;
  int p = 30;
  std::uint64_t seed = 1;
  EffectKind effect = EffectKind::Heterogeneous;
  double tau0 = 0.0;                 // Homogeneous mode only
  std::vector<Marginal> marginals;   // defaults to default_marginals(p)
  Eigen::MatrixXd correlation;       // defaults to exchangeable(p, 0.2)

  /// X1 ~ {Y,N} with equal probability, X2..Xp standard normal.
  static std::vector<Marginal> default_marginals(int p);
  static Eigen::MatrixXd exchangeable(int p, double rho);
};

ScenarioSpec scenario_from_json(const nlohmann::json& j);
nlohmann::json scenario_to_json(const ScenarioSpec& spec);

/// A generated trial: the observable table plus the ground truth the
/// generator knows (per-row effect, both potential outcomes, and the
/// noiseless arms of the outcome model).
struct GeneratedTrial {
  Dataset dataset;
  Eigen::VectorXd tau_true;
  Eigen::VectorXd y0;
  Eigen::VectorXd y1;
  Eigen::VectorXd mu0_true;
  Eigen::VectorXd mu1_true;
};

/// Deterministic in spec.seed; rows are generated from independent
/// per-row streams, so any row block can be reproduced in isolation.
GeneratedTrial generate_trial(const ScenarioSpec& spec);

/// True effect for one generated row.
double true_cate(const ScenarioSpec& spec, const Dataset& ds, Eigen::Index row);

/// Writes <dir>/trial.csv (covariates, trt, y) and <dir>/truth.csv
/// (tau_true, y0, y1).
void write_trial(const GeneratedTrial& trial, const std::string& dir);

}  // namespace watch
