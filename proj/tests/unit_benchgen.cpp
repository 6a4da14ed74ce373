#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "watch/benchgen.hpp"

using namespace watch;

namespace {

ScenarioSpec het_spec(Eigen::Index n, std::uint64_t seed) {
  ScenarioSpec s;
  s.effect = ScenarioSpec::EffectKind::Heterogeneous;
  s.n = n;
  s.p = 30;
  s.seed = seed;
  s.marginals = ScenarioSpec::default_marginals(s.p);
  s.correlation = ScenarioSpec::exchangeable(s.p, 0.2);
  return s;
}

}  // namespace

TEST_CASE("effect anchors: the two possible values and their conditions") {
  ScenarioSpec spec = het_spec(2000, 7);
  GeneratedTrial t = generate_trial(spec);
  const Column& x1 = t.dataset.column("X1");
  const Column& x14 = t.dataset.column("X14");

  std::set<double> seen;
  for (Eigen::Index i = 0; i < spec.n; ++i) {
    seen.insert(t.tau_true[i]);
    const bool in_stratum =
        x1.level_name(i) == "N" && x14.values[i] > 0.25;
    CHECK(t.tau_true[i] == doctest::Approx(in_stratum ? 0.620 : -0.105));
    CHECK(true_cate(spec, t.dataset, i) == t.tau_true[i]);
  }
  CHECK(seen.size() == 2);  // exactly two effect values
}

TEST_CASE("potential outcomes: shared noise and exact consistency") {
  ScenarioSpec spec = het_spec(500, 3);
  GeneratedTrial t = generate_trial(spec);
  const Column& a = t.dataset.treatment();
  const Column& y = t.dataset.outcome();
  for (Eigen::Index i = 0; i < 500; ++i) {
    // the same noise draw enters both arms, so the difference is exact
    CHECK(t.y1[i] - t.y0[i] == doctest::Approx(t.tau_true[i]).epsilon(1e-12));
    const double expected = a.values[i] == 1.0 ? t.y1[i] : t.y0[i];
    CHECK(y.values[i] == expected);
    // noiseless arms differ by the same amount
    CHECK(t.mu1_true[i] - t.mu0_true[i] ==
          doctest::Approx(t.tau_true[i]).epsilon(1e-12));
    // observed = noiseless + eps, same eps both arms
    CHECK(t.y0[i] - t.mu0_true[i] ==
          doctest::Approx(t.y1[i] - t.mu1_true[i]).epsilon(1e-12));
  }
  CHECK((t.y1 - t.y0).mean() == doctest::Approx(t.tau_true.mean()));
}

TEST_CASE("homogeneous mode: constant effect") {
  ScenarioSpec spec = het_spec(300, 11);
  spec.effect = ScenarioSpec::EffectKind::Homogeneous;
  spec.tau0 = 0.2;
  GeneratedTrial t = generate_trial(spec);
  for (Eigen::Index i = 0; i < 300; ++i) {
    CHECK(t.tau_true[i] == 0.2);
    CHECK(true_cate(spec, t.dataset, i) == 0.2);
  }
}

TEST_CASE("determinism: same spec and seed reproduce the trial") {
  ScenarioSpec spec = het_spec(200, 42);
  GeneratedTrial a = generate_trial(spec);
  GeneratedTrial b = generate_trial(spec);
  for (std::size_t c = 0; c < a.dataset.columns.size(); ++c) {
    CHECK(a.dataset.columns[c].values == b.dataset.columns[c].values);
  }
  CHECK(a.tau_true == b.tau_true);

  spec.seed = 43;
  GeneratedTrial c = generate_trial(spec);
  CHECK(a.dataset.column("X2").values != c.dataset.column("X2").values);
}

TEST_CASE("marginals: large-sample moments match the recipe") {
  ScenarioSpec spec = het_spec(40000, 19);
  GeneratedTrial t = generate_trial(spec);

  // X1 ~ {Y, N} with equal probability
  const Column& x1 = t.dataset.column("X1");
  REQUIRE(x1.kind == ColumnKind::Categorical);
  double n_count = 0;
  for (Eigen::Index i = 0; i < spec.n; ++i)
    n_count += x1.level_name(i) == "N";
  CHECK(n_count / (double)spec.n == doctest::Approx(0.5).epsilon(0.03));

  // continuous covariates standard normal
  for (const char* name : {"X2", "X14", "X17"}) {
    const Column& c = t.dataset.column(name);
    REQUIRE(c.kind == ColumnKind::Continuous);
    CHECK(c.values.mean() == doctest::Approx(0.0).epsilon(0.03));
    const double sd = std::sqrt(
        (c.values.array() - c.values.mean()).square().sum() / (spec.n - 1.0));
    CHECK(sd == doctest::Approx(1.0).epsilon(0.03));
  }

  // copula correlation shows up between continuous covariates
  const auto& u = t.dataset.column("X5").values;
  const auto& v = t.dataset.column("X23").values;
  const double r =
      ((u.array() - u.mean()) * (v.array() - v.mean())).sum() /
      std::sqrt((u.array() - u.mean()).square().sum() *
                (v.array() - v.mean()).square().sum());
  CHECK(r == doctest::Approx(0.2).epsilon(0.15));

  // treatment is a fair coin
  const Column& a = t.dataset.treatment();
  CHECK(a.values.mean() == doctest::Approx(0.5).epsilon(0.05));

  // outcome recipe: noise variance near 1 around the noiseless arm
  double sse = 0;
  const Column& y = t.dataset.outcome();
  for (Eigen::Index i = 0; i < spec.n; ++i) {
    const double mu = a.values[i] == 1.0 ? t.mu1_true[i] : t.mu0_true[i];
    sse += (y.values[i] - mu) * (y.values[i] - mu);
  }
  CHECK(sse / (double)spec.n == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("scenario json: round trip preserves the recipe") {
  ScenarioSpec spec = het_spec(500, 9);
  spec.effect = ScenarioSpec::EffectKind::Homogeneous;
  spec.tau0 = 0.31;
  nlohmann::json j = scenario_to_json(spec);
  ScenarioSpec back = scenario_from_json(j);
  CHECK(back.n == 500);
  CHECK(back.p == 30);
  CHECK(back.seed == 9);
  CHECK(back.effect == ScenarioSpec::EffectKind::Homogeneous);
  CHECK(back.tau0 == doctest::Approx(0.31));
  REQUIRE(back.marginals.size() == 30);
  CHECK(back.marginals[0].kind == Marginal::Kind::Categorical);
  CHECK(back.marginals[0].levels == std::vector<std::string>{"Y", "N"});
  CHECK(back.marginals[1].kind == Marginal::Kind::Normal);
  CHECK((back.correlation - spec.correlation).cwiseAbs().maxCoeff() == 0.0);

  GeneratedTrial a = generate_trial(spec);
  GeneratedTrial b = generate_trial(back);
  CHECK(a.dataset.column("X7").values == b.dataset.column("X7").values);
}

TEST_CASE("validation: bad specs are rejected") {
  ScenarioSpec empty;  // marginals/correlation left unset
  empty.n = 100;
  CHECK_THROWS_AS((void)generate_trial(empty), ConfigError);

  ScenarioSpec bad = het_spec(100, 1);
  bad.correlation(0, 1) = 0.9;  // asymmetric now
  CHECK_THROWS_AS((void)generate_trial(bad), ConfigError);

  ScenarioSpec notpsd = het_spec(100, 1);
  notpsd.correlation.setIdentity();
  notpsd.correlation(0, 1) = notpsd.correlation(1, 0) = 1.5;
  CHECK_THROWS_AS((void)generate_trial(notpsd), ConfigError);

  ScenarioSpec short_probs = het_spec(100, 1);
  short_probs.marginals[0].probs = {0.4, 0.7};  // sums past 1
  CHECK_THROWS_AS((void)generate_trial(short_probs), ConfigError);
}

TEST_CASE("trial files: csv pair loads back consistently") {
  ScenarioSpec spec = het_spec(120, 5);
  GeneratedTrial t = generate_trial(spec);
  const std::string dir = "/tmp/unit_benchgen_out";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  write_trial(t, dir);

  std::ifstream trial(dir + "/trial.csv");
  REQUIRE(trial.good());
  std::string header;
  std::getline(trial, header);
  CHECK(header.find("X1") == 0);
  CHECK(header.find("trt") != std::string::npos);
  CHECK(header.find("y") != std::string::npos);
  int rows = 0;
  for (std::string line; std::getline(trial, line);) ++rows;
  CHECK(rows == 120);

  std::ifstream truth(dir + "/truth.csv");
  REQUIRE(truth.good());
  std::getline(truth, header);
  CHECK(header == "tau_true,y0,y1");
  std::string first;
  std::getline(truth, first);
  const double tau0 = std::stod(first.substr(0, first.find(',')));
  CHECK(tau0 == doctest::Approx(t.tau_true[0]).epsilon(1e-9));
  std::filesystem::remove_all(dir);
}

TEST_CASE("stratum share: copula correlation lifts the joint probability") {
  // With rho = 0.2 the {X1='N', X14>0.25} share exceeds the independent
  // product 0.5 * P(Z > 0.25) ~ 0.2007; with rho = 0 it matches it.
  ScenarioSpec dep = het_spec(60000, 33);
  GeneratedTrial td = generate_trial(dep);
  ScenarioSpec ind = het_spec(60000, 33);
  ind.correlation = Eigen::MatrixXd::Identity(30, 30);
  GeneratedTrial ti = generate_trial(ind);

  auto share = [](const GeneratedTrial& t, Eigen::Index n) {
    const Column& x1 = t.dataset.column("X1");
    const Column& x14 = t.dataset.column("X14");
    double c = 0;
    for (Eigen::Index i = 0; i < n; ++i)
      c += x1.level_name(i) == "N" && x14.values[i] > 0.25;
    return c / (double)n;
  };
  const double s_dep = share(td, dep.n);
  const double s_ind = share(ti, ind.n);
  CHECK(s_ind == doctest::Approx(0.2007).epsilon(0.05));
  CHECK(s_dep == doctest::Approx(0.2315).epsilon(0.05));
  CHECK(s_dep > s_ind);
}
