// Acceptance suite: one printed pass/fail line per criterion.
//
// Each criterion re-derives its expected values from scratch (Monte
// Carlo oracles, exhaustive enumerations, closed-form solutions) so a
// pass certifies the pipeline against independent computations, not
// against itself.  Tolerances are pinned next to each check.  The
// binary exits with the number of failed criteria; pass `--only k`
// style integer arguments to run a subset (dependencies are computed
// on demand).
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "watch/benchgen.hpp"
#include "watch/cate.hpp"
#include "watch/displays.hpp"
#include "watch/hettest.hpp"
#include "watch/importance.hpp"
#include "watch/learners.hpp"
#include "watch/rng.hpp"
#include "watch/runner.hpp"
#include "watch/tabular.hpp"

using namespace watch;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof buf, f, args);
  va_end(args);
  return buf;
}

int g_failures = 0;

void report(int id, bool pass, const std::string& detail) {
  std::printf("criterion %d: %s — %s\n", id, pass ? "PASS" : "FAIL",
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

// ---------------------------------------------------------------- fixtures

ScenarioSpec scenario(Eigen::Index n, std::uint64_t seed, bool heterogeneous,
                      double tau0 = 0.2) {
  nlohmann::json j;
  j["n"] = n;
  j["seed"] = seed;
  j["effect"] = heterogeneous ? "heterogeneous" : "homogeneous";
  if (!heterogeneous) j["tau0"] = tau0;
  return scenario_from_json(j);
}

AnalysisPlan full_plan(std::uint64_t seed, int n_permutations = 999) {
  nlohmann::json pj;
  pj["outcome"] = "y";
  pj["treatment"] = "trt";
  auto covs = nlohmann::json::array();
  for (int j = 1; j <= 30; ++j) covs.push_back("X" + std::to_string(j));
  pj["covariates"] = covs;
  pj["seed"] = seed;
  pj["n_permutations"] = n_permutations;
  return plan_from_json(pj);
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) /
         static_cast<double>(v.size());
}

double median_of(std::vector<double> v) {
  std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
  return v[v.size() / 2];
}

// Shared expensive products, computed at most once per run.

struct TruthRun {
  // truth-injected pseudo-outcomes on one large heterogeneous trial
  double mean_hi = 0, se_hi = 0;  // stratum X1='N' and X14>0.25
  double mean_lo = 0, se_lo = 0;  // complement
  Eigen::Index n_hi = 0;
  AteSummary ate;
  double seconds = 0;
};

struct HetRep {
  double p = 1;
  int rank_x1 = 0;   // 1-based importance rank of X1
  int rank_x14 = 0;  // 1-based importance rank of X14
  int rank1_idx = 0; // covariate index holding rank 1
  bool vint_win = false;
};

std::optional<TruthRun> g_truth;
std::vector<double> g_homog_ps;
std::vector<HetRep> g_het;

const TruthRun& ensure_truth_run() {
  if (g_truth) return *g_truth;
  const auto t0 = Clock::now();
  const Eigen::Index n = 100000;
  const GeneratedTrial trial = generate_trial(scenario(n, 501, true));
  const AnalysisPlan plan = full_plan(501);
  NuisanceTruth truth;
  truth.mu0 = trial.mu0_true;
  truth.mu1 = trial.mu1_true;
  truth.pi = Eigen::VectorXd::Constant(n, 0.5);
  const PseudoOutcomes po =
      pseudo_outcomes(trial.dataset, plan, LearnerConfig{}, 0.025, &truth);

  const Column& x1 = trial.dataset.column("X1");
  const Column& x14 = trial.dataset.column("X14");
  Eigen::Index n_level = -1;
  for (std::size_t l = 0; l < x1.levels.size(); ++l)
    if (x1.levels[l] == "N") n_level = static_cast<Eigen::Index>(l);

  double s_hi = 0, s2_hi = 0, s_lo = 0, s2_lo = 0;
  Eigen::Index n_hi = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool hi = static_cast<Eigen::Index>(x1.values[i]) == n_level &&
                    x14.values[i] > 0.25;
    const double v = po.phi[i];
    if (hi) {
      ++n_hi;
      s_hi += v;
      s2_hi += v * v;
    } else {
      s_lo += v;
      s2_lo += v * v;
    }
  }
  const auto n_lo = n - n_hi;
  TruthRun out;
  out.n_hi = n_hi;
  out.mean_hi = s_hi / static_cast<double>(n_hi);
  out.mean_lo = s_lo / static_cast<double>(n_lo);
  out.se_hi = std::sqrt((s2_hi / n_hi - out.mean_hi * out.mean_hi) /
                        static_cast<double>(n_hi));
  out.se_lo = std::sqrt((s2_lo / n_lo - out.mean_lo * out.mean_lo) /
                        static_cast<double>(n_lo));
  out.ate = ate_summary(po);
  out.seconds = seconds_since(t0);
  g_truth = out;
  return *g_truth;
}

const std::vector<double>& ensure_homog_ps() {
  if (!g_homog_ps.empty()) return g_homog_ps;
  const int reps = 200;
  for (int r = 1; r <= reps; ++r) {
    const std::uint64_t seed = 3000 + static_cast<std::uint64_t>(r);
    const GeneratedTrial trial =
        generate_trial(scenario(500, seed, false, 0.2));
    const AnalysisPlan plan = full_plan(seed);
    const PseudoOutcomes po =
        pseudo_outcomes(trial.dataset, plan, LearnerConfig{});
    const HetTestResult het =
        homogeneity_test(trial.dataset, po.phi, plan.n_permutations, seed);
    g_homog_ps.push_back(het.p_value);
    if (r % 10 == 0)
      std::fprintf(stderr, "[homogeneous batch] %d/%d\n", r, reps);
  }
  return g_homog_ps;
}

const std::vector<HetRep>& ensure_het_reps() {
  if (!g_het.empty()) return g_het;
  const int reps = 100;
  for (int r = 1; r <= reps; ++r) {
    const std::uint64_t seed = 1000 + static_cast<std::uint64_t>(r);
    const GeneratedTrial trial = generate_trial(scenario(500, seed, true));
    const AnalysisPlan plan = full_plan(seed);
    const PseudoOutcomes po =
        pseudo_outcomes(trial.dataset, plan, LearnerConfig{});
    HetRep rep;
    rep.p = homogeneity_test(trial.dataset, po.phi, plan.n_permutations, seed)
                .p_value;

    const FeatureMatrix x =
        make_features(trial.dataset, trial.dataset.roles.covariates);
    const CiForest forest = fit_ciforest(x, po.phi, CiForestOptions{}, seed);
    const Eigen::VectorXd vimp = permutation_importance(forest, x, po.phi, 5, seed);
    const std::vector<int> ranking = importance_ranking(vimp, x.names);
    rep.rank1_idx = ranking[0];
    for (std::size_t i = 0; i < ranking.size(); ++i) {
      if (ranking[i] == 0) rep.rank_x1 = static_cast<int>(i) + 1;
      if (ranking[i] == 13) rep.rank_x14 = static_cast<int>(i) + 1;
    }

    // interaction scores over the top ten plus the two scenario drivers
    std::vector<int> vars(ranking.begin(), ranking.begin() + 10);
    for (int idx : {0, 13})
      if (std::find(vars.begin(), vars.end(), idx) == vars.end())
        vars.push_back(idx);
    const Eigen::MatrixXd vint =
        interaction_importance(forest, x, vars, vimp, 20);
    int a = -1, b = -1;
    for (std::size_t i = 0; i < vars.size(); ++i) {
      if (vars[i] == 0) a = static_cast<int>(i);
      if (vars[i] == 13) b = static_cast<int>(i);
    }
    std::vector<double> off;
    for (Eigen::Index i = 0; i < vint.rows(); ++i)
      for (Eigen::Index j = i + 1; j < vint.cols(); ++j)
        off.push_back(vint(i, j));
    std::nth_element(off.begin(), off.begin() + off.size() / 2, off.end());
    rep.vint_win = vint(a, b) > off[off.size() / 2];

    g_het.push_back(rep);
    if (r % 10 == 0)
      std::fprintf(stderr, "[heterogeneous batch] %d/%d\n", r, reps);
  }
  return g_het;
}

// ---------------------------------------------------------- criteria 1-2

void criterion_1() {
  const TruthRun& run = ensure_truth_run();
  const double tol_hi = 3.0 * run.se_hi, tol_lo = 3.0 * run.se_lo;
  const bool pass = std::abs(run.mean_hi - 0.620) <= tol_hi &&
                    std::abs(run.mean_lo - (-0.105)) <= tol_lo &&
                    run.seconds < 60.0;
  report(1, pass,
         fmt("stratum phi mean %.4f (target 0.620 +/- %.4f, n=%lld), "
             "complement %.4f (target -0.105 +/- %.4f); %.1f s (budget 60 s)",
             run.mean_hi, tol_hi, static_cast<long long>(run.n_hi),
             run.mean_lo, tol_lo, run.seconds));
}

void criterion_2() {
  const TruthRun& run = ensure_truth_run();
  // Monte Carlo oracle for the average effect, recomputed from the
  // generator itself at one million rows (ten independent chunks).
  // The generator's default correlated covariates put ~23% of patients
  // in the boosted stratum, so the oracle sits near 0.063 rather than
  // the ~0.0405 an independent-covariate design would give.
  double sum = 0;
  Eigen::Index count = 0;
  for (int c = 0; c < 10; ++c) {
    const GeneratedTrial chunk = generate_trial(
        scenario(100000, 52001 + static_cast<std::uint64_t>(c), true));
    sum += chunk.tau_true.sum();
    count += chunk.tau_true.size();
  }
  const double oracle = sum / static_cast<double>(count);
  const double tol = 3.0 * run.ate.se;
  const bool pass = std::abs(run.ate.estimate - oracle) <= tol;
  report(2, pass,
         fmt("ate %.4f (se %.4f) vs Monte Carlo oracle %.4f at n=10^6; "
             "|diff| %.4f <= %.4f",
             run.ate.estimate, run.ate.se, oracle,
             std::abs(run.ate.estimate - oracle), tol));
}

// ---------------------------------------------------------- criteria 3-6

void criterion_3() {
  const auto t0 = Clock::now();
  const std::vector<double>& ps = ensure_homog_ps();
  int rejections = 0;
  for (double p : ps) rejections += p <= 0.05;
  const double rate = static_cast<double>(rejections) /
                      static_cast<double>(ps.size());
  const double mins = seconds_since(t0) / 60.0;
  const bool pass = rate >= 0.02 && rate <= 0.10;
  report(3, pass,
         fmt("null rejection rate %.3f (%d/%zu) at 0.05, target [0.02, "
             "0.10]; %.1f min (desk scale 20 min)",
             rate, rejections, ps.size(), mins));
}

void criterion_4() {
  const std::vector<double>& homog = ensure_homog_ps();
  const std::vector<HetRep>& het = ensure_het_reps();
  std::vector<double> het_ps;
  for (const HetRep& r : het) het_ps.push_back(r.p);
  const double med_het = median_of(het_ps);
  const double med_homog = median_of(homog);

  const std::pair<double, Verbal> probes[] = {
      {1.0, Verbal::Low},          {0.25, Verbal::Low},
      {0.084, Verbal::Moderate},   {0.063, Verbal::Moderate},
      {0.008, Verbal::Noteworthy}, {0.001, Verbal::Strong},
      {0.0005, Verbal::VeryStrong}};
  std::string bad;
  for (const auto& [p, want] : probes) {
    if (verbal_category(p) != want)
      bad += fmt(" %.4g->%s", p, to_string(verbal_category(p)).c_str());
  }
  const bool pass = med_het < med_homog && bad.empty();
  report(4, pass,
         fmt("median p %.4f (heterogeneous) vs %.4f (homogeneous); verbal "
             "probes%s",
             med_het, med_homog,
             bad.empty() ? " all match the category table" : bad.c_str()));
}

void criterion_5() {
  const std::vector<HetRep>& het = ensure_het_reps();
  std::vector<int> rank1_of(30, 0);
  int x1_top2 = 0, x14_top5 = 0;
  for (const HetRep& r : het) {
    ++rank1_of[static_cast<std::size_t>(r.rank1_idx)];
    x1_top2 += r.rank_x1 <= 2;
    x14_top5 += r.rank_x14 <= 5;
  }
  int max_other = 0;
  for (int j = 1; j < 30; ++j) max_other = std::max(max_other, rank1_of[static_cast<std::size_t>(j)]);
  const auto n = static_cast<int>(het.size());
  const bool plurality = rank1_of[0] > max_other;
  const bool top2_ok = x1_top2 * 10 >= n * 6;   // >= 60%
  const bool top5_ok = x14_top5 * 10 >= n * 5;  // >= 50%
  report(5, plurality && top2_ok && top5_ok,
         fmt("X1 rank-1 in %d reps (best other covariate %d), top-2 rate "
             "%d/%d (need >= 60%%), X14 top-5 rate %d/%d (need >= 50%%)",
             rank1_of[0], max_other, x1_top2, n, x14_top5, n));
}

void criterion_6() {
  const std::vector<HetRep>& het = ensure_het_reps();
  int wins = 0;
  for (const HetRep& r : het) wins += r.vint_win;
  const auto n = static_cast<int>(het.size());
  const bool pass = wins * 10 >= n * 6;  // >= 60%
  report(6, pass,
         fmt("vint(X1, X14) above the median off-diagonal in %d/%d reps "
             "(need >= 60%%)",
             wins, n));
}

// ------------------------------------------------------------ criterion 7

// CART: best achievable SSE reduction by exhaustive enumeration.
double oracle_best_reduction(const FeatureMatrix& x, const Eigen::VectorXd& y,
                             int min_leaf) {
  const auto n = static_cast<int>(x.n_rows());
  const double mean = y.mean();
  double parent = 0;
  for (int i = 0; i < n; ++i) parent += (y[i] - mean) * (y[i] - mean);
  double best = 0;
  auto eval_mask = [&](const std::vector<bool>& left) {
    int nl = 0;
    double sl = 0;
    for (int i = 0; i < n; ++i)
      if (left[static_cast<std::size_t>(i)]) {
        ++nl;
        sl += y[i];
      }
    const int nr = n - nl;
    if (nl < min_leaf || nr < min_leaf) return;
    const double ml = sl / nl, mr = (y.sum() - sl) / nr;
    double sse = 0;
    for (int i = 0; i < n; ++i) {
      const double m = left[static_cast<std::size_t>(i)] ? ml : mr;
      sse += (y[i] - m) * (y[i] - m);
    }
    best = std::max(best, parent - sse);
  };
  for (Eigen::Index j = 0; j < x.n_cols(); ++j) {
    if (x.is_categorical(j)) {
      const auto L = static_cast<unsigned>(x.n_levels(j));
      for (unsigned mask = 1; mask + 1 < (1u << L); ++mask) {
        std::vector<bool> left(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i)
          left[static_cast<std::size_t>(i)] =
              (mask >> static_cast<unsigned>(x.values(i, j))) & 1u;
        eval_mask(left);
      }
    } else {
      for (int c = 0; c < n; ++c) {
        std::vector<bool> left(static_cast<std::size_t>(n));
        bool nontrivial = false;
        for (int i = 0; i < n; ++i) {
          left[static_cast<std::size_t>(i)] = x.values(i, j) <= x.values(c, j);
          if (!left[static_cast<std::size_t>(i)]) nontrivial = true;
        }
        if (nontrivial) eval_mask(left);
      }
    }
  }
  return best;
}

bool check_cart_oracle() {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    Rng rng(seed);
    FeatureMatrix x;
    x.names = {"a", "b", "c"};
    x.kinds = {ColumnKind::Continuous, ColumnKind::Categorical,
               ColumnKind::Continuous};
    x.levels = {{}, {"u", "v", "w"}, {}};
    x.values.resize(8, 3);
    Eigen::VectorXd y(8);
    for (int i = 0; i < 8; ++i) {
      x.values(i, 0) = rng.normal();
      x.values(i, 1) = static_cast<double>(rng.below(3));
      x.values(i, 2) = rng.normal();
      y[i] = rng.normal();
    }
    CartOptions opt;
    opt.max_depth = 1;
    opt.min_leaf = 2;
    const Model m = fit_cart(x, y, Task::Regression, opt, 1);
    const Tree& tree = *m.cart_tree();
    double sse = 0, parent = 0;
    const double mean = y.mean();
    for (int i = 0; i < 8; ++i) {
      parent += (y[i] - mean) * (y[i] - mean);
      const double pred = tree.predict_row(x, i);
      sse += (y[i] - pred) * (y[i] - pred);
    }
    const double got = parent - sse;
    const double want = oracle_best_reduction(x, y, 2);
    if (std::abs(got - want) > 1e-10 * std::max(1.0, std::abs(want)))
      return false;
  }
  return true;
}

bool check_stack_oracle() {
  Eigen::MatrixXd z(6, 3);
  z << 1.0, 0.9, 0.2, 2.0, 1.7, 0.5, 3.0, 3.2, 1.0, 4.0, 3.9, 1.1, 5.0, 5.2,
      2.0, 6.0, 5.8, 2.2;
  Eigen::VectorXd y(6);
  y << 1.1, 1.8, 3.1, 4.2, 4.9, 6.1;
  const Eigen::VectorXd got = simplex_weights(z, y);
  double best_loss = 1e300;
  Eigen::VectorXd best = Eigen::VectorXd::Zero(3);
  for (int a = 0; a <= 100; ++a)
    for (int b = 0; a + b <= 100; ++b) {
      Eigen::VectorXd w(3);
      w << a / 100.0, b / 100.0, 1.0 - (a + b) / 100.0;
      const double loss = (y - z * w).squaredNorm();
      if (loss < best_loss) {
        best_loss = loss;
        best = w;
      }
    }
  for (int j = 0; j < 3; ++j)
    if (std::abs(got[j] - best[j]) > 0.02) return false;
  return (y - z * got).squaredNorm() <= best_loss + 1e-9;
}

bool check_spline_oracle() {
  Eigen::VectorXd x(30), y(30);
  Rng rng(9);
  for (int i = 0; i < 30; ++i) {
    x[i] = rng.normal();
    y[i] = std::sin(1.3 * x[i]) + 0.3 * rng.normal();
  }
  const SplineModel m = fit_spline(x, y);
  Eigen::MatrixXd b(30, m.beta.size());
  for (int i = 0; i < 30; ++i) b.row(i) = m.basis_row(x[i]);
  const Eigen::VectorXd oracle =
      (b.transpose() * b).ldlt().solve(b.transpose() * y);
  return (m.beta - oracle).cwiseAbs().maxCoeff() < 1e-8;
}

bool check_loess_oracle() {
  const int n = 40;
  Eigen::VectorXd x(n), y(n);
  Rng rng(11);
  for (int i = 0; i < n; ++i) {
    x[i] = rng.normal();
    y[i] = 0.5 * x[i] * x[i] + rng.normal() * 0.2;
  }
  const double q = 0.3, span = 0.75;
  Eigen::VectorXd grid(1);
  grid << q;
  const Eigen::VectorXd got = local_linear(x, y, grid, span);

  const int k = static_cast<int>(std::ceil(span * n));
  std::vector<double> dist(n);
  for (int i = 0; i < n; ++i) dist[static_cast<std::size_t>(i)] = std::abs(x[i] - q);
  std::nth_element(dist.begin(), dist.begin() + (k - 1), dist.end());
  const double h = dist[static_cast<std::size_t>(k - 1)];
  Eigen::Matrix2d xtwx = Eigen::Matrix2d::Zero();
  Eigen::Vector2d xtwy = Eigen::Vector2d::Zero();
  for (int i = 0; i < n; ++i) {
    const double u = h > 0 ? std::abs(x[i] - q) / h : 0.0;
    if (u > 1.0) continue;
    const double w = std::pow(1.0 - u * u * u, 3);
    const Eigen::Vector2d row(1.0, x[i] - q);
    xtwx += w * row * row.transpose();
    xtwy += w * row * y[i];
  }
  const Eigen::Vector2d beta = xtwx.ldlt().solve(xtwy);
  return std::abs(got[0] - beta[0]) <= 1e-10 * std::max(1.0, std::abs(beta[0]));
}

bool check_linear_statistic_oracle() {
  // brute force: moments of sum(x_i phi_perm(i)) over all 7! pairings
  for (std::uint64_t seed : {3ULL, 8ULL}) {
    Rng rng(seed);
    const int n = 7;
    Eigen::VectorXd xv(n), phi(n);
    for (int i = 0; i < n; ++i) {
      xv[i] = seed == 8 && i < 6 ? static_cast<double>(i / 2) : rng.normal();
      phi[i] = rng.normal();
    }
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    double s = 0, s2 = 0;
    long count = 0;
    std::sort(idx.begin(), idx.end());
    do {
      double L = 0;
      for (int i = 0; i < n; ++i) L += xv[i] * phi[idx[static_cast<std::size_t>(i)]];
      s += L;
      s2 += L * L;
      ++count;
    } while (std::next_permutation(idx.begin(), idx.end()));
    const double mean = s / static_cast<double>(count);
    const double var = s2 / static_cast<double>(count) - mean * mean;
    double obs = 0;
    for (int i = 0; i < n; ++i) obs += xv[i] * phi[i];
    const double want = var > 0 ? std::abs(obs - mean) / std::sqrt(var) : 0.0;

    Column cx;
    cx.name = "x";
    cx.values = xv;
    const double got = linear_statistic(cx, phi);
    if (std::abs(got - want) > 1e-10 * std::max(1.0, want)) return false;
  }
  return true;
}

bool check_nogueira_oracle() {
  Eigen::MatrixXd flip(2, 2);
  flip << 1, 0, 0, 1;
  Eigen::MatrixXd same(3, 2);
  same << 1, 0, 1, 0, 1, 0;
  return std::abs(nogueira_stability(flip) - (-1.0)) <= 1e-12 &&
         std::abs(nogueira_stability(same) - 1.0) <= 1e-12;
}

void criterion_7() {
  std::string bad;
  if (!check_cart_oracle()) bad += " cart";
  if (!check_stack_oracle()) bad += " stack-weights";
  if (!check_spline_oracle()) bad += " spline";
  if (!check_loess_oracle()) bad += " local-linear";
  if (!check_linear_statistic_oracle()) bad += " linear-statistic";
  if (!check_nogueira_oracle()) bad += " stability-index";
  report(7, bad.empty(),
         bad.empty()
             ? "cart, stack weights, spline, local linear, linear statistic "
               "and stability index all match their independent oracles"
             : "oracle mismatches:" + bad);
}

// ------------------------------------------------------------ criterion 8

bool check_leakage() {
  const GeneratedTrial trial = generate_trial(scenario(200, 88, true));
  const AnalysisPlan plan = full_plan(88);
  const PseudoOutcomes po =
      pseudo_outcomes(trial.dataset, plan, LearnerConfig{});
  for (int i = 0; i < 200; ++i) {
    const int own = po.fold_of[static_cast<std::size_t>(i)];
    for (std::size_t f = 0; f < po.fold_train_rows.size(); ++f) {
      const auto& rows = po.fold_train_rows[f];
      const bool present = std::find(rows.begin(), rows.end(), i) != rows.end();
      if (static_cast<int>(f) == own ? present : !present) return false;
    }
  }
  return true;
}

bool check_vint_structure() {
  const GeneratedTrial trial = generate_trial(scenario(300, 99, true));
  NuisanceTruth truth{trial.mu0_true, trial.mu1_true,
                      Eigen::VectorXd::Constant(300, 0.5)};
  const PseudoOutcomes po = pseudo_outcomes(trial.dataset, full_plan(99),
                                            LearnerConfig{}, 0.025, &truth);
  const FeatureMatrix x =
      make_features(trial.dataset, trial.dataset.roles.covariates);
  const CiForest forest = fit_ciforest(x, po.phi, CiForestOptions{}, 99);
  const Eigen::VectorXd vimp = permutation_importance(forest, x, po.phi, 5, 99);
  const std::vector<int> vars = {0, 5, 13, 20};
  const Eigen::MatrixXd vint = interaction_importance(forest, x, vars, vimp, 20);
  if ((vint - vint.transpose()).cwiseAbs().maxCoeff() > 1e-12) return false;
  for (std::size_t i = 0; i < vars.size(); ++i)
    if (vint(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) !=
        vimp[vars[i]])
      return false;
  return true;
}

bool check_affine_invariance() {
  const GeneratedTrial trial = generate_trial(scenario(400, 77, true));
  NuisanceTruth truth{trial.mu0_true, trial.mu1_true,
                      Eigen::VectorXd::Constant(400, 0.5)};
  const PseudoOutcomes po = pseudo_outcomes(trial.dataset, full_plan(77),
                                            LearnerConfig{}, 0.025, &truth);

  Dataset moved = trial.dataset;
  for (const std::string& name : moved.roles.covariates) {
    Column& col = moved.column(name);
    if (col.kind == ColumnKind::Continuous)
      col.values = (col.values.array() * 3.0 - 7.0).matrix();
  }

  const HetTestResult a = homogeneity_test(trial.dataset, po.phi, 999, 7);
  const HetTestResult b = homogeneity_test(moved, po.phi, 999, 7);
  if (a.n_exceeding != b.n_exceeding || a.p_value != b.p_value) return false;

  const FeatureMatrix xa =
      make_features(trial.dataset, trial.dataset.roles.covariates);
  const FeatureMatrix xb = make_features(moved, moved.roles.covariates);
  const CiForest fa = fit_ciforest(xa, po.phi, CiForestOptions{}, 7);
  const CiForest fb = fit_ciforest(xb, po.phi, CiForestOptions{}, 7);
  const std::vector<int> ra =
      importance_ranking(permutation_importance(fa, xa, po.phi, 5, 7), xa.names);
  const std::vector<int> rb =
      importance_ranking(permutation_importance(fb, xb, po.phi, 5, 7), xb.names);
  return ra == rb;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

bool check_thread_determinism() {
  const fs::path dir = fs::temp_directory_path() / "watch_acceptance_threads";
  fs::remove_all(dir);
  fs::create_directories(dir);
  {
    std::ofstream s(dir / "scenario.json");
    s << R"({"n": 400, "seed": 505, "effect": "heterogeneous"})";
  }
  RunOptions sim;
  sim.config_path = (dir / "scenario.json").string();
  sim.out_dir = dir.string();
  if (run_simulate(sim) != 0) return false;

  nlohmann::json plan;
  plan["outcome"] = "y";
  plan["treatment"] = "trt";
  auto covs = nlohmann::json::array();
  for (int j = 1; j <= 10; ++j) covs.push_back("X" + std::to_string(j));
  plan["covariates"] = covs;
  plan["seed"] = 505;
  plan["n_permutations"] = 999;
  plan["n_trees"] = 200;
  plan["bootstrap_reps"] = 30;
  plan["top_k"] = 5;
  {
    std::ofstream c(dir / "config.json");
    c << nlohmann::json{{"data", "trial.csv"}, {"plan", plan}}.dump();
  }
  RunOptions an;
  an.config_path = (dir / "config.json").string();
  an.out_dir = (dir / "t1").string();
  an.threads = 1;
  if (run_analyze(an) != 0) return false;
  an.out_dir = (dir / "t4").string();
  an.threads = 4;
  if (run_analyze(an) != 0) return false;
  return slurp(dir / "t1" / "findings.json") ==
             slurp(dir / "t4" / "findings.json") &&
         slurp(dir / "t1" / "pseudo_outcomes.csv") ==
             slurp(dir / "t4" / "pseudo_outcomes.csv");
}

void criterion_8() {
  std::string bad;
  if (!check_leakage()) bad += " cross-fit-leakage";
  if (!check_vint_structure()) bad += " vint-structure";
  if (!check_affine_invariance()) bad += " affine-invariance";
  if (!check_thread_determinism()) bad += " thread-determinism";
  report(8, bad.empty(),
         bad.empty() ? "no training-fold leakage; vint symmetric with "
                       "vimp diagonal; p-value and ranking invariant under "
                       "x -> 3x - 7; findings byte-identical across 1 and 4 "
                       "threads"
                     : "violated:" + bad);
}

// ------------------------------------------------------------ criterion 9

void criterion_9() {
  const auto t0 = Clock::now();
  const fs::path dir = fs::temp_directory_path() / "watch_acceptance_e2e";
  fs::remove_all(dir);
  fs::create_directories(dir);
  {
    std::ofstream s(dir / "scenario.json");
    s << R"({"n": 500, "seed": 999000, "effect": "heterogeneous"})";
  }
  RunOptions sim;
  sim.config_path = (dir / "scenario.json").string();
  sim.out_dir = (dir / "sim").string();
  const int sim_rc = run_simulate(sim);

  nlohmann::json plan;
  plan["outcome"] = "y";
  plan["treatment"] = "trt";
  auto covs = nlohmann::json::array();
  for (int j = 1; j <= 30; ++j) covs.push_back("X" + std::to_string(j));
  plan["covariates"] = covs;
  plan["seed"] = 424242;
  {
    std::ofstream c(dir / "config.json");
    c << nlohmann::json{{"data", "sim/trial.csv"}, {"plan", plan}}.dump();
  }
  RunOptions an;
  an.config_path = (dir / "config.json").string();
  an.out_dir = (dir / "out").string();
  const int an_rc = run_analyze(an);
  const double secs = seconds_since(t0);

  std::string bad;
  if (sim_rc != 0) bad += " simulate-rc";
  if (an_rc != 0) bad += " analyze-rc";
  for (const char* f : {"sim/trial.csv", "sim/truth.csv", "out/findings.json",
                        "out/findings.md", "out/pseudo_outcomes.csv"})
    if (!fs::exists(dir / f)) bad += std::string(" missing-") + f;

  if (bad.empty()) {
    const auto j = nlohmann::json::parse(slurp(dir / "out" / "findings.json"),
                                         nullptr, false);
    if (j.is_discarded()) {
      bad += " findings-not-json";
    } else {
      for (const char* key : {"config", "dataset", "ate", "het_test",
                              "importance", "displays", "credibility",
                              "sensitivity"})
        if (!j.contains(key)) bad += std::string(" findings-missing-") + key;
      if (j.contains("credibility") && j["credibility"].size() != 30)
        bad += " credibility-size";
      if (j.contains("displays")) {
        for (const auto& f : j["displays"]) {
          const fs::path svg = dir / "out" / f.at("svg").get<std::string>();
          const fs::path data = dir / "out" / f.at("data").get<std::string>();
          if (!fs::exists(svg) || !fs::exists(data)) {
            bad += " missing-figure-file";
            break;
          }
          if (nlohmann::json::parse(slurp(data), nullptr, false)
                  .is_discarded()) {
            bad += " figure-data-not-json";
            break;
          }
        }
      }
    }
  }
  if (secs >= 600.0) bad += " over-10-min";
  report(9, bad.empty(),
         bad.empty()
             ? fmt("simulate + analyze at n=500 in %.1f s (budget 600 s) "
                   "with all declared outputs and parseable JSON",
                   secs)
             : fmt("%.1f s;%s", secs, bad.c_str()));
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const int k = std::atoi(argv[i]);
    if (k >= 1 && k <= 9) only.insert(k);
  }
  auto wanted = [&](int k) { return only.empty() || only.count(k) > 0; };

  const auto t0 = Clock::now();
  if (wanted(1)) criterion_1();
  if (wanted(2)) criterion_2();
  if (wanted(3)) criterion_3();
  if (wanted(4)) criterion_4();
  if (wanted(5)) criterion_5();
  if (wanted(6)) criterion_6();
  if (wanted(7)) criterion_7();
  if (wanted(8)) criterion_8();
  if (wanted(9)) criterion_9();

  const int ran = only.empty() ? 9 : static_cast<int>(only.size());
  std::printf("acceptance: %d/%d criteria pass (%.1f min)\n", ran - g_failures,
              ran, seconds_since(t0) / 60.0);
  return g_failures;
}
