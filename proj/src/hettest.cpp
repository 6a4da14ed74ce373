#include "watch/hettest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "watch/error.hpp"
#include "watch/parallel.hpp"
#include "watch/rng.hpp"

namespace watch {

namespace {

/// Permutation moments shared by every covariate: the mean and the
/// population variance of the scores are invariant when phi is
/// shuffled.
struct PhiMoments {
  double mean = 0;
  double var = 0;  // population (divide by n)
};

PhiMoments phi_moments(const Eigen::VectorXd& phi) {
  PhiMoments m;
  m.mean = phi.mean();
  m.var = (phi.array() - m.mean).square().sum() /
          static_cast<double>(phi.size());
  return m;
}

/// Precomputed evaluator for one covariate.  For a permuted score
/// vector it returns the standardized linear statistic; the
/// normalization is fixed because the permutation distribution's
/// moments do not depend on the permutation.
struct Evaluator {
  // Continuous: statistic = |centered_x . phi| / denom.
  Eigen::VectorXd centered;
  double denom = 0;
  // Categorical: per level, member rows and expected sum under
  // permutation; statistic = max over levels.
  bool categorical = false;
  std::vector<std::vector<int>> level_rows;
  std::vector<double> level_expected;
  std::vector<double> level_denom;

  double operator()(const Eigen::VectorXd& phi) const {
    if (!categorical) {
      if (denom <= 0) return 0;
      return std::abs(centered.dot(phi)) / denom;
    }
    double best = 0;
    for (std::size_t l = 0; l < level_rows.size(); ++l) {
      double sum = 0;
      for (int r : level_rows[l]) sum += phi[r];
      const double t = std::abs(sum - level_expected[l]) / level_denom[l];
      best = std::max(best, t);
    }
    return best;
  }
};

Evaluator make_evaluator(const Column& x, const PhiMoments& m,
                         Eigen::Index n) {
  Evaluator ev;
  const double scale =
      static_cast<double>(n) / static_cast<double>(n - 1) * m.var;
  if (x.kind == ColumnKind::Continuous) {
    const double x_mean = x.values.mean();
    ev.centered = x.values.array() - x_mean;
    const double ssx = ev.centered.squaredNorm();
    ev.denom = std::sqrt(scale * ssx);
    return ev;
  }
  ev.categorical = true;
  const auto n_levels = x.levels.size();
  std::vector<std::vector<int>> rows(n_levels);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    rows[static_cast<std::size_t>(x.values[i])].push_back(static_cast<int>(i));
  }
  for (std::size_t l = 0; l < n_levels; ++l) {
    const auto nl = static_cast<double>(rows[l].size());
    if (nl == 0 || nl == static_cast<double>(n)) continue;  // no spread
    const double ssg = nl * (static_cast<double>(n) - nl) /
                       static_cast<double>(n);
    const double denom = std::sqrt(scale * ssg);
    if (denom <= 0) continue;
    ev.level_rows.push_back(rows[l]);
    ev.level_expected.push_back(nl * m.mean);
    ev.level_denom.push_back(denom);
  }
  return ev;
}

void require_clean(const Dataset& ds, const Eigen::VectorXd& phi) {
  if (phi.size() != ds.n_rows()) {
    throw DataError("effect scores do not match the table size");
  }
  if (!phi.allFinite()) {
    throw DataError("effect scores contain non-finite values");
  }
  for (const auto& name : ds.roles.covariates) {
    if (ds.column(name).missing_count() > 0) {
      throw DataError("covariate '" + name +
                      "' has missing values; impute before testing");
    }
  }
}

}  // namespace

std::string to_string(Verbal v) {
  switch (v) {
    case Verbal::Low: return "low";
    case Verbal::Moderate: return "moderate";
    case Verbal::Noteworthy: return "noteworthy";
    case Verbal::Strong: return "strong";
    case Verbal::VeryStrong: return "very strong";
  }
  return "low";
}

Verbal verbal_category(double p) {
  if (!(p > 0.0) || p > 1.0) {
    throw std::invalid_argument("p-value must lie in (0, 1]");
  }
  if (p >= 0.25) return Verbal::Low;
  if (p >= 0.063) return Verbal::Moderate;
  if (p >= 0.008) return Verbal::Noteworthy;
  if (p >= 0.001) return Verbal::Strong;
  return Verbal::VeryStrong;
}

double surprise_value(double p) {
  if (!(p > 0.0) || p > 1.0) {
    throw std::invalid_argument("p-value must lie in (0, 1]");
  }
  return -std::log2(p);
}

double linear_statistic(const Column& x, const Eigen::VectorXd& phi) {
  if (x.size() != phi.size()) {
    throw DataError("covariate and scores differ in length");
  }
  if (x.missing_count() > 0) {
    throw DataError("covariate '" + x.name + "' has missing values");
  }
  const Eigen::Index n = phi.size();
  if (n < 2) return 0;
  const PhiMoments m = phi_moments(phi);
  if (m.var <= 0) return 0;
  return make_evaluator(x, m, n)(phi);
}

double signed_association(const Column& x, const Eigen::VectorXd& phi) {
  const Eigen::Index n = phi.size();
  if (x.kind == ColumnKind::Continuous) {
    const double xm = x.values.mean();
    const double pm = phi.mean();
    return ((x.values.array() - xm) * (phi.array() - pm)).sum();
  }
  if (x.levels.size() != 2) return std::numeric_limits<double>::quiet_NaN();
  double sum[2] = {0, 0};
  Eigen::Index count[2] = {0, 0};
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto l = static_cast<int>(x.values[i]);
    sum[l] += phi[i];
    ++count[l];
  }
  if (count[0] == 0 || count[1] == 0) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  return sum[1] / static_cast<double>(count[1]) -
         sum[0] / static_cast<double>(count[0]);
}

HetTestResult homogeneity_test(const Dataset& ds, const Eigen::VectorXd& phi,
                               int n_permutations, std::uint64_t seed) {
  if (n_permutations < 1) {
    throw ConfigError("n_permutations must be positive");
  }
  require_clean(ds, phi);
  const Eigen::Index n = ds.n_rows();
  if (n < 2) throw DataError("homogeneity test needs at least two rows");

  HetTestResult result;
  result.n_permutations = n_permutations;
  result.seed = seed;

  const PhiMoments moments = phi_moments(phi);
  std::vector<Evaluator> evals;
  evals.reserve(ds.roles.covariates.size());
  for (const auto& name : ds.roles.covariates) {
    const Column& col = ds.column(name);
    Evaluator ev;
    if (moments.var > 0) ev = make_evaluator(col, moments, n);
    const double stat = moments.var > 0 ? ev(phi) : 0.0;
    result.per_covariate.push_back({name, stat});
    result.statistic = std::max(result.statistic, stat);
    evals.push_back(std::move(ev));
  }

  std::vector<std::uint8_t> exceeds(static_cast<std::size_t>(n_permutations), 0);
  if (moments.var > 0) {
    const double observed = result.statistic;
    parallel_for(n_permutations, [&](std::int64_t b) {
      Rng rng(derive_seed(seed, streams::kPermutation,
                          static_cast<std::uint64_t>(b)));
      const std::vector<int> perm = rng.permutation(static_cast<int>(n));
      Eigen::VectorXd shuffled(n);
      for (Eigen::Index i = 0; i < n; ++i) shuffled[i] = phi[perm[i]];
      double best = 0;
      for (const auto& ev : evals) best = std::max(best, ev(shuffled));
      exceeds[static_cast<std::size_t>(b)] = best >= observed ? 1 : 0;
    });
  } else {
    // Constant scores: every permutation ties the observed zero.
    std::fill(exceeds.begin(), exceeds.end(), std::uint8_t{1});
  }

  int count = 0;
  for (std::uint8_t e : exceeds) count += e;
  result.n_exceeding = count;
  result.p_value = (1.0 + count) / (1.0 + n_permutations);
  result.surprise = surprise_value(result.p_value);
  result.verbal = verbal_category(result.p_value);
  return result;
}

}  // namespace watch
