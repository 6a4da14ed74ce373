#include "watch/benchgen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "watch/error.hpp"
#include "watch/parallel.hpp"
#include "watch/rng.hpp"

namespace watch {

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

void validate(const ScenarioSpec& spec) {
  if (spec.n < 1) throw ConfigError("scenario n must be positive");
  if (spec.p < 1) throw ConfigError("scenario p must be positive");
  if (spec.marginals.size() != static_cast<std::size_t>(spec.p)) {
    throw ConfigError("scenario declares " + std::to_string(spec.marginals.size()) +
                      " marginals for p=" + std::to_string(spec.p));
  }
  for (std::size_t j = 0; j < spec.marginals.size(); ++j) {
    const Marginal& m = spec.marginals[j];
    if (m.kind == Marginal::Kind::Normal) {
      if (!(m.sigma > 0)) {
        throw ConfigError("marginal " + std::to_string(j + 1) +
                          ": sigma must be positive");
      }
      continue;
    }
    if (m.levels.size() < 2 || m.levels.size() != m.probs.size()) {
      throw ConfigError("marginal " + std::to_string(j + 1) +
                        ": categorical needs >= 2 levels with matching probs");
    }
    std::set<std::string> uniq(m.levels.begin(), m.levels.end());
    if (uniq.size() != m.levels.size()) {
      throw ConfigError("marginal " + std::to_string(j + 1) +
                        ": duplicate level names");
    }
    double total = 0;
    for (double pr : m.probs) {
      if (!(pr > 0)) {
        throw ConfigError("marginal " + std::to_string(j + 1) +
                          ": level probabilities must be positive");
      }
      total += pr;
    }
    if (std::abs(total - 1.0) > 1e-9) {
      throw ConfigError("marginal " + std::to_string(j + 1) +
                        ": level probabilities must sum to 1");
    }
  }
  if (spec.correlation.rows() != spec.p || spec.correlation.cols() != spec.p) {
    throw ConfigError("correlation matrix must be p x p");
  }
  for (int i = 0; i < spec.p; ++i) {
    if (std::abs(spec.correlation(i, i) - 1.0) > 1e-12) {
      throw ConfigError("correlation matrix must have unit diagonal");
    }
    for (int j = 0; j < i; ++j) {
      if (std::abs(spec.correlation(i, j) - spec.correlation(j, i)) > 1e-12) {
        throw ConfigError("correlation matrix must be symmetric");
      }
    }
  }
  // The outcome model reads X1, X14 and X17.
  if (spec.p < 17) {
    throw ConfigError("the outcome model needs p >= 17 (reads X1, X14, X17)");
  }
  const Marginal& x1 = spec.marginals[0];
  if (x1.kind != Marginal::Kind::Categorical ||
      std::find(x1.levels.begin(), x1.levels.end(), "N") == x1.levels.end()) {
    throw ConfigError("X1 must be categorical with a level named 'N'");
  }
  if (spec.marginals[13].kind != Marginal::Kind::Normal ||
      spec.marginals[16].kind != Marginal::Kind::Normal) {
    throw ConfigError("X14 and X17 must be continuous");
  }
}

/// Symmetric square root of the correlation matrix; rejects non-PSD input.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& corr) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(corr);
  if (eig.info() != Eigen::Success) {
    throw ConfigError("correlation matrix eigendecomposition failed");
  }
  Eigen::VectorXd lam = eig.eigenvalues();
  for (Eigen::Index i = 0; i < lam.size(); ++i) {
    if (lam[i] < -1e-8) {
      throw ConfigError("correlation matrix is not positive semidefinite");
    }
    lam[i] = std::sqrt(std::max(lam[i], 0.0));
  }
  return eig.eigenvectors() * lam.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

std::vector<Marginal> ScenarioSpec::default_marginals(int p) {
  std::vector<Marginal> out;
  out.reserve(static_cast<std::size_t>(p));
  out.push_back(Marginal::categorical({"Y", "N"}, {0.5, 0.5}));
  for (int j = 1; j < p; ++j) out.push_back(Marginal::normal());
  return out;
}

Eigen::MatrixXd ScenarioSpec::exchangeable(int p, double rho) {
  Eigen::MatrixXd corr = Eigen::MatrixXd::Constant(p, p, rho);
  corr.diagonal().setOnes();
  return corr;
}

ScenarioSpec scenario_from_json(const nlohmann::json& j) {
  ScenarioSpec spec;
  double rho = 0.2;
  try {
    if (!j.is_object()) throw ConfigError("scenario must be a JSON object");
    if (j.contains("n")) spec.n = j.at("n").get<Eigen::Index>();
    if (j.contains("p")) spec.p = j.at("p").get<int>();
    if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("rho")) rho = j.at("rho").get<double>();
    if (j.contains("effect")) {
      const std::string e = j.at("effect").get<std::string>();
      if (e == "heterogeneous") {
        spec.effect = ScenarioSpec::EffectKind::Heterogeneous;
      } else if (e == "homogeneous") {
        spec.effect = ScenarioSpec::EffectKind::Homogeneous;
      } else {
        throw ConfigError("effect must be 'heterogeneous' or 'homogeneous'");
      }
    }
    if (j.contains("tau0")) spec.tau0 = j.at("tau0").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed scenario: ") + e.what());
  }
  if (std::abs(rho) >= 1.0) throw ConfigError("rho must lie in (-1, 1)");
  spec.marginals = ScenarioSpec::default_marginals(spec.p);
  spec.correlation = ScenarioSpec::exchangeable(spec.p, rho);
  return spec;
}

nlohmann::json scenario_to_json(const ScenarioSpec& spec) {
  nlohmann::ordered_json j;
  j["n"] = spec.n;
  j["p"] = spec.p;
  j["seed"] = spec.seed;
  j["effect"] = spec.effect == ScenarioSpec::EffectKind::Heterogeneous
                    ? "heterogeneous"
                    : "homogeneous";
  if (spec.effect == ScenarioSpec::EffectKind::Homogeneous) {
    j["tau0"] = spec.tau0;
  }
  return j;
}

GeneratedTrial generate_trial(const ScenarioSpec& spec) {
  validate(spec);
  const Eigen::Index n = spec.n;
  const int p = spec.p;
  const Eigen::MatrixXd root = psd_sqrt(spec.correlation);

  // Cumulative level probabilities for the categorical marginals.
  std::vector<std::vector<double>> cum(static_cast<std::size_t>(p));
  for (int j = 0; j < p; ++j) {
    const Marginal& m = spec.marginals[static_cast<std::size_t>(j)];
    if (m.kind == Marginal::Kind::Categorical) {
      double acc = 0;
      for (double pr : m.probs) {
        acc += pr;
        cum[static_cast<std::size_t>(j)].push_back(acc);
      }
      cum[static_cast<std::size_t>(j)].back() = 1.0;
    }
  }

  Eigen::MatrixXd x(n, p);
  Eigen::VectorXd trt(n), tau(n), y0(n), y1(n), mu0(n), mu1(n), y(n);

  const std::size_t x1_n_index = [&] {
    const auto& levels = spec.marginals[0].levels;
    return static_cast<std::size_t>(
        std::find(levels.begin(), levels.end(), "N") - levels.begin());
  }();

  parallel_for(n, [&](std::int64_t i) {
    Rng rng(derive_seed(spec.seed, streams::kRow, static_cast<std::uint64_t>(i)));
    Eigen::VectorXd g(p);
    for (int j = 0; j < p; ++j) g[j] = rng.normal();
    const Eigen::VectorXd z = root * g;
    for (int j = 0; j < p; ++j) {
      const Marginal& m = spec.marginals[static_cast<std::size_t>(j)];
      if (m.kind == Marginal::Kind::Normal) {
        x(i, j) = m.mu + m.sigma * z[j];
      } else {
        const double u = normal_cdf(z[j]);
        const auto& c = cum[static_cast<std::size_t>(j)];
        std::size_t level = 0;
        while (level + 1 < c.size() && u >= c[level]) ++level;
        x(i, j) = static_cast<double>(level);
      }
    }
    const double a = rng.uniform01() < 0.5 ? 1.0 : 0.0;
    const double eps = rng.normal();

    const bool x1_is_n = static_cast<std::size_t>(x(i, 0)) == x1_n_index;
    const double base = 1.38 * ((x1_is_n ? 1.0 : 0.0) - 0.5 * x(i, 16));
    double t;
    if (spec.effect == ScenarioSpec::EffectKind::Homogeneous) {
      t = spec.tau0;
    } else {
      t = -0.105 + 0.725 * ((x(i, 13) > 0.25 && x1_is_n) ? 1.0 : 0.0);
    }
    trt[i] = a;
    tau[i] = t;
    mu0[i] = base;
    mu1[i] = base + t;
    y0[i] = base + eps;
    y1[i] = base + t + eps;
    y[i] = a == 1.0 ? y1[i] : y0[i];
  });

  GeneratedTrial trial;
  trial.tau_true = std::move(tau);
  trial.y0 = std::move(y0);
  trial.y1 = std::move(y1);
  trial.mu0_true = std::move(mu0);
  trial.mu1_true = std::move(mu1);

  Dataset& ds = trial.dataset;
  for (int j = 0; j < p; ++j) {
    Column col;
    col.name = "X" + std::to_string(j + 1);
    const Marginal& m = spec.marginals[static_cast<std::size_t>(j)];
    if (m.kind == Marginal::Kind::Normal) {
      col.kind = ColumnKind::Continuous;
    } else {
      col.kind = ColumnKind::Categorical;
      col.levels = m.levels;
    }
    col.values = x.col(j);
    ds.columns.push_back(std::move(col));
  }
  {
    Column col;
    col.name = "trt";
    col.kind = ColumnKind::Categorical;
    col.levels = {"0", "1"};
    col.values = trt;
    ds.columns.push_back(std::move(col));
  }
  {
    Column col;
    col.name = "y";
    col.kind = ColumnKind::Continuous;
    col.values = y;
    ds.columns.push_back(std::move(col));
  }
  ds.roles.outcome = "y";
  ds.roles.treatment = "trt";
  for (int j = 0; j < p; ++j) {
    ds.roles.covariates.push_back("X" + std::to_string(j + 1));
  }
  return trial;
}

double true_cate(const ScenarioSpec& spec, const Dataset& ds,
                 Eigen::Index row) {
  if (spec.effect == ScenarioSpec::EffectKind::Homogeneous) return spec.tau0;
  const Column& x1 = ds.column("X1");
  const Column& x14 = ds.column("X14");
  const bool x1_is_n = x1.level_name(row) == "N";
  return -0.105 + 0.725 * ((x14.values[row] > 0.25 && x1_is_n) ? 1.0 : 0.0);
}

void write_trial(const GeneratedTrial& trial, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  write_csv(trial.dataset, (fs::path(dir) / "trial.csv").string());

  std::ofstream out(fs::path(dir) / "truth.csv", std::ios::binary);
  if (!out) throw DataError("cannot write truth.csv under '" + dir + "'");
  out << "tau_true,y0,y1\n";
  char buf[128];
  for (Eigen::Index i = 0; i < trial.tau_true.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.12g,%.12g,%.12g\n", trial.tau_true[i],
                  trial.y0[i], trial.y1[i]);
    out << buf;
  }
}

}  // namespace watch
