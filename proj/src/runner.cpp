#include "watch/runner.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "watch/benchgen.hpp"
#include "watch/cate.hpp"
#include "watch/displays.hpp"
#include "watch/error.hpp"
#include "watch/hettest.hpp"
#include "watch/ida.hpp"
#include "watch/importance.hpp"
#include "watch/parallel.hpp"
#include "watch/report.hpp"
#include "watch/tabular.hpp"

namespace watch {

namespace fs = std::filesystem;

namespace {

int guard(const std::function<void()>& body) {
  try {
    body();
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

std::string read_file(const std::string& path, bool config) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    const std::string msg = "cannot open " + path;
    if (config) throw ConfigError(msg);
    throw DataError(msg);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

nlohmann::json parse_config(const std::string& path) {
  const std::string text = read_file(path, true);
  nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded())
    throw ConfigError("config is not valid JSON: " + path);
  return j;
}

/// Relative paths in a config are taken relative to the config file.
std::string resolve_path(const std::string& raw,
                         const std::string& config_path) {
  fs::path p(raw);
  if (p.is_absolute()) return raw;
  return (fs::path(config_path).parent_path() / p).string();
}

struct LoadedAnalysis {
  AnalysisPlan plan;
  Dataset ds;
  std::string data_path;
};

LoadedAnalysis load_analysis(const RunOptions& opt) {
  const nlohmann::json cfg = parse_config(opt.config_path);
  if (!cfg.is_object() || !cfg.contains("data") || !cfg.contains("plan"))
    throw ConfigError("config needs 'data' (CSV path) and 'plan'");
  LoadedAnalysis out;
  nlohmann::json plan_json;
  if (cfg.at("plan").is_string()) {
    const std::string plan_path =
        resolve_path(cfg.at("plan").get<std::string>(), opt.config_path);
    plan_json = nlohmann::json::parse(read_file(plan_path, true), nullptr,
                                      false);
    if (plan_json.is_discarded())
      throw ConfigError("plan is not valid JSON: " + plan_path);
  } else {
    plan_json = cfg.at("plan");
  }
  out.plan = plan_from_json(plan_json);
  if (opt.seed) out.plan.seed = *opt.seed;
  out.data_path =
      resolve_path(cfg.at("data").get<std::string>(), opt.config_path);
  out.ds = load_csv(out.data_path, out.plan);
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

void write_json(const fs::path& path, const nlohmann::ordered_json& j) {
  write_text(path, j.dump(2) + "\n");
}

FigureEntry emit(const Figure& fig, const std::string& out_dir) {
  const auto paths = write_figure(fig, (fs::path(out_dir) / "figures").string());
  FigureEntry e;
  e.id = fig.id;
  e.title = fig.title;
  e.svg_path = "figures/" + fig.id + ".svg";
  e.data_path = "figures/" + fig.id + ".json";
  (void)paths;
  return e;
}

/// First covariate of the wanted kind in ranking order, or -1.
int first_of_kind(const std::vector<int>& ranking,
                  const std::vector<ColumnKind>& kinds, ColumnKind want) {
  for (int idx : ranking)
    if (kinds[static_cast<size_t>(idx)] == want) return idx;
  return -1;
}

/// Rows split by the levels of a categorical column, labels attached.
std::vector<std::pair<std::string, std::vector<Eigen::Index>>> level_strata(
    const Column& col) {
  std::vector<std::pair<std::string, std::vector<Eigen::Index>>> out;
  for (const auto& level : col.levels) out.emplace_back(level, std::vector<Eigen::Index>{});
  for (Eigen::Index i = 0; i < col.size(); ++i) {
    if (col.is_missing(i)) continue;
    out[static_cast<size_t>(col.values[i])].second.push_back(i);
  }
  return out;
}

/// Rows split at the tertiles of a continuous column.
std::vector<std::pair<std::string, std::vector<Eigen::Index>>> tertile_strata(
    const Column& col) {
  std::vector<double> obs;
  for (Eigen::Index i = 0; i < col.size(); ++i)
    if (!col.is_missing(i)) obs.push_back(col.values[i]);
  std::sort(obs.begin(), obs.end());
  if (obs.empty()) return {};
  auto quant = [&](double p) {
    const double h = static_cast<double>(obs.size() - 1) * p;
    const auto lo = static_cast<size_t>(h);
    if (lo + 1 >= obs.size()) return obs.back();
    return obs[lo] + (h - static_cast<double>(lo)) * (obs[lo + 1] - obs[lo]);
  };
  const double q1 = quant(1.0 / 3.0), q2 = quant(2.0 / 3.0);
  std::vector<std::pair<std::string, std::vector<Eigen::Index>>> out{
      {col.name + " low tertile", {}},
      {col.name + " mid tertile", {}},
      {col.name + " high tertile", {}}};
  for (Eigen::Index i = 0; i < col.size(); ++i) {
    if (col.is_missing(i)) continue;
    const double v = col.values[i];
    out[v <= q1 ? 0 : v <= q2 ? 1 : 2].second.push_back(i);
  }
  return out;
}

Figure bivariate_figure(const Dataset& ds, const Eigen::VectorXd& phi,
                        const std::string& a, const std::string& b) {
  const Column& ca = ds.column(a);
  const Column& cb = ds.column(b);
  const std::string title = "Effect by " + a + " and " + b;
  if (ca.kind == ColumnKind::Categorical &&
      cb.kind == ColumnKind::Categorical) {
    auto groups = group_effects(ds, phi, a, &b);
    return render_group_effects("fig_bivariate", title, groups);
  }
  // Put the continuous covariate on the x axis and stratify by the
  // other one (levels, or tertiles when it is also continuous).
  const std::string& curve_var = ca.kind == ColumnKind::Continuous ? a : b;
  const Column& strat_col = ca.kind == ColumnKind::Continuous ? cb : ca;
  auto strata = strat_col.kind == ColumnKind::Categorical
                    ? level_strata(strat_col)
                    : tertile_strata(strat_col);
  std::vector<std::pair<std::string, EffectCurve>> curves;
  for (auto& [label, rows] : strata) {
    const std::string name = strat_col.kind == ColumnKind::Categorical
                                 ? strat_col.name + " = " + label
                                 : label;
    try {
      curves.emplace_back(name, effect_curve_rows(ds, phi, curve_var, rows));
    } catch (const DataError&) {
      // stratum too small or degenerate; leave it out
    }
  }
  return render_curve_effects_stratified("fig_bivariate", title, curve_var,
                                         curves);
}

}  // namespace

int run_ida(const RunOptions& opt) {
  return guard([&] {
    set_max_threads(opt.threads);
    const LoadedAnalysis in = load_analysis(opt);
    fs::create_directories(opt.out_dir);

    write_json(fs::path(opt.out_dir) / "ida_report.json",
               ida_report(in.ds));

    std::vector<FigureEntry> figures;
    figures.push_back(
        emit(render_outcome_by_arm("fig_outcome_by_arm", in.ds), opt.out_dir));
    const MissingnessReport miss = missingness_report(in.ds);
    figures.push_back(emit(
        render_missingness("fig_missingness", miss.names, miss.fractions),
        opt.out_dir));
    const AssociationMatrix assoc = association_matrix(in.ds);
    figures.push_back(
        emit(render_association_heatmap("fig_association", assoc.names,
                                        assoc.values),
             opt.out_dir));
    figures.push_back(emit(
        render_dendrogram("fig_clustering", cluster_covariates(assoc)),
        opt.out_dir));
  });
}

int run_simulate(const RunOptions& opt) {
  return guard([&] {
    const nlohmann::json cfg = parse_config(opt.config_path);
    ScenarioSpec spec = scenario_from_json(cfg);
    if (opt.seed) spec.seed = *opt.seed;
    const GeneratedTrial trial = generate_trial(spec);
    fs::create_directories(opt.out_dir);
    write_trial(trial, opt.out_dir);
  });
}

int run_analyze(const RunOptions& opt) {
  return guard([&] {
    set_max_threads(opt.threads);
    const LoadedAnalysis in = load_analysis(opt);
    const AnalysisPlan& plan = in.plan;
    fs::create_directories(opt.out_dir);

    // analysis dataset: impute, merge rare levels, drop near-constants
    Dataset ds = impute_baseline(in.ds);
    if (plan.min_level_frac > 0)
      ds = merge_sparse_levels(ds, plan.min_level_frac);
    std::vector<std::string> dropped;
    if (plan.max_dominance < 1.0) {
      auto [kept, gone] = drop_noninformative(ds, plan.max_dominance);
      ds = std::move(kept);
      dropped = std::move(gone);
    }
    if (ds.roles.covariates.empty())
      throw DataError("no informative covariates left after preprocessing");

    // effect scores
    const PseudoOutcomes po =
        pseudo_outcomes(ds, plan, LearnerConfig{}, 0.025);
    write_pseudo_csv(ds, po,
                     (fs::path(opt.out_dir) / "pseudo_outcomes.csv").string());
    const AteSummary ate = ate_summary(po);

    // the single confirmatory quantity
    const HetTestResult het =
        homogeneity_test(ds, po.phi, plan.n_permutations, plan.seed);

    // importance on the effect scores
    const FeatureMatrix features = make_features(ds, ds.roles.covariates);
    CiForestOptions fopt;
    fopt.n_trees = plan.n_trees;
    const CiForest forest = fit_ciforest(features, po.phi, fopt, plan.seed);
    const Eigen::VectorXd vimp =
        permutation_importance(forest, features, po.phi, 5, plan.seed);
    const std::vector<int> ranking = importance_ranking(vimp, features.names);

    const auto k_top =
        std::min<size_t>(static_cast<size_t>(plan.top_k), ranking.size());
    std::vector<int> top_vars(ranking.begin(),
                              ranking.begin() + static_cast<long>(k_top));
    std::vector<std::string> vint_names;
    for (int v : top_vars)
      vint_names.push_back(features.names[static_cast<size_t>(v)]);
    const Eigen::MatrixXd vint =
        interaction_importance(forest, features, top_vars, vimp, 20);

    StabilityResult stab;
    if (plan.bootstrap_reps >= 2)
      stab = bootstrap_stability(features, po.phi, fopt, plan.top_k,
                                 plan.bootstrap_reps, 5, plan.seed);

    // descriptive displays
    std::vector<FigureEntry> figures;
    const int cat_idx =
        first_of_kind(ranking, features.kinds, ColumnKind::Categorical);
    if (cat_idx >= 0) {
      const std::string& name = features.names[static_cast<size_t>(cat_idx)];
      const auto groups = group_effects(ds, po.phi, name);
      figures.push_back(
          emit(render_group_outcomes("fig_group_outcomes",
                                     "Outcome by arm and " + name, groups),
               opt.out_dir));
      figures.push_back(
          emit(render_group_effects("fig_group_effects",
                                    "Effect by " + name, groups),
               opt.out_dir));
    } else {
      figures.push_back(emit(
          render_placeholder("fig_group_outcomes", "Outcome by arm and group",
                             "no categorical covariate"),
          opt.out_dir));
      figures.push_back(
          emit(render_placeholder("fig_group_effects", "Effect by group",
                                  "no categorical covariate"),
               opt.out_dir));
    }
    const int cont_idx =
        first_of_kind(ranking, features.kinds, ColumnKind::Continuous);
    if (cont_idx >= 0) {
      const std::string& name = features.names[static_cast<size_t>(cont_idx)];
      try {
        const EffectCurve curve = effect_curve(ds, po.phi, name);
        figures.push_back(
            emit(render_curve_outcomes("fig_curve_outcomes",
                                       "Outcome by arm over " + name, name,
                                       curve),
                 opt.out_dir));
        figures.push_back(emit(
            render_curve_effects("fig_curve_effects", "Effect over " + name,
                                 name, curve),
            opt.out_dir));
      } catch (const DataError& e) {
        figures.push_back(
            emit(render_placeholder("fig_curve_outcomes",
                                    "Outcome by arm over " + name, e.what()),
                 opt.out_dir));
        figures.push_back(emit(
            render_placeholder("fig_curve_effects", "Effect over " + name,
                               e.what()),
            opt.out_dir));
      }
    } else {
      figures.push_back(
          emit(render_placeholder("fig_curve_outcomes",
                                  "Outcome by arm over a covariate",
                                  "no continuous covariate"),
               opt.out_dir));
      figures.push_back(
          emit(render_placeholder("fig_curve_effects", "Effect curve",
                                  "no continuous covariate"),
               opt.out_dir));
    }
    if (top_vars.size() >= 2) {
      // strongest interaction pair among the top covariates
      Eigen::Index best_a = 0, best_b = 1;
      double best = -1;
      for (Eigen::Index a = 0; a < vint.rows(); ++a)
        for (Eigen::Index b = a + 1; b < vint.cols(); ++b)
          if (vint(a, b) > best) {
            best = vint(a, b);
            best_a = a;
            best_b = b;
          }
      figures.push_back(
          emit(bivariate_figure(ds, po.phi,
                                vint_names[static_cast<size_t>(best_a)],
                                vint_names[static_cast<size_t>(best_b)]),
               opt.out_dir));
    } else {
      figures.push_back(
          emit(render_placeholder("fig_bivariate", "Effect by covariate pair",
                                  "fewer than two covariates"),
               opt.out_dir));
    }
    figures.push_back(
        emit(render_importance_bars("fig_importance", features.names, vimp,
                                    ranking, plan.top_k),
             opt.out_dir));
    if (stab.vimp_samples.rows() >= 2) {
      figures.push_back(
          emit(render_stability_box("fig_stability", features.names,
                                    stab.vimp_samples, ranking, plan.top_k),
               opt.out_dir));
    } else {
      figures.push_back(
          emit(render_placeholder("fig_stability",
                                  "Importance across bootstrap refits",
                                  "bootstrap disabled"),
               opt.out_dir));
    }

    // credibility annotations against the pre-declared plan
    std::vector<std::string> ranked_names;
    std::vector<double> signed_stats;
    for (int idx : ranking) {
      const std::string& name = features.names[static_cast<size_t>(idx)];
      ranked_names.push_back(name);
      signed_stats.push_back(signed_association(ds.column(name), po.phi));
    }
    FindingsData data;
    {
      nlohmann::ordered_json cfg;
      cfg["data"] = in.data_path;
      cfg["plan"] = plan_to_json(plan);
      cfg["clip_epsilon"] = po.clip_epsilon;
      data.config = cfg;
    }
    data.data_path = in.data_path;
    data.n_rows = ds.n_rows();
    data.covariates = features.names;
    data.dropped = dropped;
    data.ate = ate;
    data.het = het;
    data.vimp = vimp;
    data.ranking = ranking;
    data.vint_names = vint_names;
    data.vint = vint;
    data.bootstrap_vimp = stab.vimp_samples;
    data.stability = stab.stability;
    data.stability_defined = stab.defined;
    data.top_k = plan.top_k;
    data.figures = figures;
    data.credibility = credibility_entries(plan, ranked_names, signed_stats,
                                           het.verbal, plan.top_k);

    write_json(fs::path(opt.out_dir) / "findings.json", findings_json(data));
    write_text(fs::path(opt.out_dir) / "findings.md",
               findings_markdown(data));
  });
}

}  // namespace watch
