#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "watch/tabular.hpp"

namespace watch {

/// Verbal label for a p-value, smallest evidence first.
enum class Verbal { Low, Moderate, Noteworthy, Strong, VeryStrong };

std::string to_string(Verbal v);

/// Intervals: [0.25, 1] low, [0.063, 0.25) moderate, [0.008, 0.063)
/// noteworthy, [0.001, 0.008) strong, below that very strong.  Throws
/// std::invalid_argument outside (0, 1].
Verbal verbal_category(double p);

/// -log2(p): bits of surprise under the null.
double surprise_value(double p);

/// Standardized association between one covariate and the effect
/// scores.  Continuous: |sum x phi - n xbar phibar| over its
/// permutation standard deviation.  Categorical: the max of the same
/// statistic over per-level indicators.  Zero spread on either side
/// gives 0.
double linear_statistic(const Column& x, const Eigen::VectorXd& phi);

/// Signed version used for direction checks: the correlation sign for
/// a continuous covariate, the phi-mean difference (second level minus
/// first) for a binary categorical one, NaN otherwise.
double signed_association(const Column& x, const Eigen::VectorXd& phi);

struct CovariateStatistic {
  std::string name;
  double statistic = 0;
};

struct HetTestResult {
  double statistic = 0;  // max over covariates, observed
  std::vector<CovariateStatistic> per_covariate;
  double p_value = 1;
  double surprise = 0;
  Verbal verbal = Verbal::Low;
  int n_permutations = 0;
  int n_exceeding = 0;  // permuted statistics >= observed
  std::uint64_t seed = 0;
};

/// Global max-type permutation test of effect homogeneity: the effect
/// scores are permuted jointly against the intact covariate rows, and
/// the add-one p-value (1 + #{perm >= obs}) / (1 + B) is reported.
/// This is the single confirmatory p-value of the workflow; everything
/// downstream is descriptive.
HetTestResult homogeneity_test(const Dataset& ds, const Eigen::VectorXd& phi,
                               int n_permutations, std::uint64_t seed);

}  // namespace watch
