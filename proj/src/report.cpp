#include "watch/report.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

namespace watch {

namespace {

std::string fmt(double v, int digits = 4) {
  if (std::isnan(v)) return "undefined";
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

const char* verbal_phrase(Verbal v) {
  switch (v) {
    case Verbal::Low: return "low";
    case Verbal::Moderate: return "moderate";
    case Verbal::Noteworthy: return "noteworthy";
    case Verbal::Strong: return "strong";
    case Verbal::VeryStrong: return "very strong";
  }
  return "";
}

}  // namespace

std::string to_string(DirectionMatch m) {
  switch (m) {
    case DirectionMatch::Match: return "Match";
    case DirectionMatch::Mismatch: return "Mismatch";
    case DirectionMatch::Unspecified: return "Unspecified";
  }
  return "";
}

std::string to_string(CredibilityNote n) {
  switch (n) {
    case CredibilityNote::HighCredibility: return "HighCredibility";
    case CredibilityNote::Notable: return "Notable";
    case CredibilityNote::LowCredibility: return "LowCredibility";
    case CredibilityNote::Unsupported: return "Unsupported";
  }
  return "";
}

CredibilityNote credibility_note(Evidence evidence, int rank, int top_k,
                                 DirectionMatch direction, Verbal verbal) {
  if (rank < 1 || rank > top_k)
    throw std::invalid_argument("credibility notes exist only for top-ranked covariates");
  const bool backed =
      evidence == Evidence::Moderate || evidence == Evidence::High;
  const bool global_noteworthy = verbal >= Verbal::Noteworthy;
  if (backed && direction == DirectionMatch::Match && global_noteworthy)
    return CredibilityNote::HighCredibility;
  if (backed) return CredibilityNote::Notable;
  if (verbal == Verbal::Low || verbal == Verbal::Moderate)
    return CredibilityNote::LowCredibility;
  return CredibilityNote::Unsupported;
}

std::vector<CredibilityEntry> credibility_entries(
    const AnalysisPlan& plan, const std::vector<std::string>& ranked_names,
    const std::vector<double>& signed_stats, Verbal verbal, int top_k) {
  if (ranked_names.size() != signed_stats.size())
    throw std::invalid_argument("credibility: rank/stat size mismatch");
  std::map<std::string, int> rank_of;  // 1-based
  for (size_t i = 0; i < ranked_names.size(); ++i)
    rank_of[ranked_names[i]] = static_cast<int>(i) + 1;

  std::vector<CredibilityEntry> out;
  out.reserve(plan.covariates.size());
  for (const PlanCovariate& pc : plan.covariates) {
    CredibilityEntry e;
    e.name = pc.name;
    e.evidence = pc.evidence;
    e.source = pc.source;
    e.declared = pc.direction;
    auto it = rank_of.find(pc.name);
    e.rank = it == rank_of.end() ? 0 : it->second;
    e.in_top_k = e.rank >= 1 && e.rank <= top_k;
    e.signed_association =
        e.rank >= 1 ? signed_stats[static_cast<size_t>(e.rank - 1)]
                    : std::numeric_limits<double>::quiet_NaN();
    if (pc.direction == Direction::Unspecified ||
        !std::isfinite(e.signed_association) || e.signed_association == 0) {
      e.match = DirectionMatch::Unspecified;
    } else {
      const bool positive = e.signed_association > 0;
      const bool wanted = pc.direction == Direction::Positive;
      e.match = positive == wanted ? DirectionMatch::Match
                                   : DirectionMatch::Mismatch;
    }
    if (e.in_top_k)
      e.note = credibility_note(e.evidence, e.rank, top_k, e.match, verbal);
    out.push_back(std::move(e));
  }
  return out;
}

namespace {

nlohmann::ordered_json het_json(const HetTestResult& het) {
  nlohmann::ordered_json j;
  j["statistic"] = het.statistic;
  j["p_value"] = het.p_value;
  j["surprise"] = het.surprise;
  j["verbal"] = to_string(het.verbal);
  j["n_permutations"] = het.n_permutations;
  j["n_exceeding"] = het.n_exceeding;
  j["seed"] = het.seed;
  auto per = nlohmann::ordered_json::array();
  for (const auto& c : het.per_covariate) {
    nlohmann::ordered_json e;
    e["name"] = c.name;
    e["statistic"] = c.statistic;
    per.push_back(e);
  }
  j["per_covariate"] = per;
  return j;
}

nlohmann::ordered_json matrix_json(const Eigen::MatrixXd& m) {
  auto rows = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    auto row = nlohmann::ordered_json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

nlohmann::ordered_json findings_json(const FindingsData& d) {
  nlohmann::ordered_json j;
  j["config"] = d.config;
  {
    nlohmann::ordered_json ds;
    ds["data"] = d.data_path;
    ds["n_rows"] = d.n_rows;
    ds["covariates"] = d.covariates;
    ds["dropped_columns"] = d.dropped;
    j["dataset"] = ds;
  }
  {
    nlohmann::ordered_json a;
    a["estimate"] = d.ate.estimate;
    a["se"] = d.ate.se;
    a["ci_lower"] = d.ate.lo;
    a["ci_upper"] = d.ate.hi;
    j["ate"] = a;
  }
  j["het_test"] = het_json(d.het);
  {
    nlohmann::ordered_json imp;
    auto vimp = nlohmann::ordered_json::array();
    for (size_t i = 0; i < d.covariates.size(); ++i) {
      nlohmann::ordered_json e;
      e["name"] = d.covariates[i];
      e["importance"] = d.vimp[static_cast<Eigen::Index>(i)];
      vimp.push_back(e);
    }
    imp["vimp"] = vimp;
    auto ranking = nlohmann::ordered_json::array();
    for (int idx : d.ranking)
      ranking.push_back(d.covariates[static_cast<size_t>(idx)]);
    imp["ranking"] = ranking;
    imp["top_k"] = d.top_k;
    {
      nlohmann::ordered_json vint;
      vint["names"] = d.vint_names;
      vint["matrix"] = matrix_json(d.vint);
      imp["vint"] = vint;
    }
    {
      nlohmann::ordered_json boot;
      boot["n_boot"] = d.bootstrap_vimp.rows();
      boot["vimp"] = matrix_json(d.bootstrap_vimp);
      boot["stability"] = d.stability_defined
                              ? nlohmann::ordered_json(d.stability)
                              : nlohmann::ordered_json(nullptr);
      imp["bootstrap"] = boot;
    }
    j["importance"] = imp;
  }
  {
    auto figs = nlohmann::ordered_json::array();
    for (const auto& f : d.figures) {
      nlohmann::ordered_json e;
      e["id"] = f.id;
      e["title"] = f.title;
      e["svg"] = f.svg_path;
      e["data"] = f.data_path;
      figs.push_back(e);
    }
    j["displays"] = figs;
  }
  {
    auto cred = nlohmann::ordered_json::array();
    for (const auto& e : d.credibility) {
      nlohmann::ordered_json c;
      c["name"] = e.name;
      c["evidence"] = to_string(e.evidence);
      if (!e.source.empty()) c["source"] = e.source;
      c["declared_direction"] = to_string(e.declared);
      c["direction_match"] = to_string(e.match);
      c["rank"] = e.rank > 0 ? nlohmann::ordered_json(e.rank)
                             : nlohmann::ordered_json(nullptr);
      c["in_top_k"] = e.in_top_k;
      c["note"] = e.note ? nlohmann::ordered_json(to_string(*e.note))
                         : nlohmann::ordered_json(nullptr);
      c["section"] = e.in_top_k ? "findings" : "consistency";
      cred.push_back(c);
    }
    j["credibility"] = cred;
  }
  j["sensitivity"] = nlohmann::ordered_json::array();
  return j;
}

std::string findings_markdown(const FindingsData& d) {
  std::ostringstream md;
  md << "# Treatment-effect heterogeneity report\n\n";

  // The global test leads; everything after it is descriptive.
  md << "## Evidence against a uniform treatment effect\n\n";
  md << "The pre-declared permutation test of effect homogeneity gives "
     << "p = " << fmt(d.het.p_value) << " (surprise value "
     << fmt(d.het.surprise, 3) << " bits, " << d.het.n_permutations
     << " permutations). On the verbal scale this is **"
     << verbal_phrase(d.het.verbal)
     << "** evidence against a uniform effect.\n\n";
  md << "The p-value is read on a continuum; no accept/reject decision is "
        "attached to it.\n\n";
  if (d.het.verbal == Verbal::Low || d.het.verbal == Verbal::Moderate) {
    md << "> **Caution.** The global evidence for effect heterogeneity is "
       << verbal_phrase(d.het.verbal)
       << ". Everything below is exploratory structure on top of a weak "
          "global signal: rankings and displays describe this sample, and "
          "data-driven findings without prior external support should be "
          "treated as low-credibility observations, not conclusions.\n\n";
  }

  md << "## Average treatment effect\n\n";
  md << "Mean of the doubly robust effect scores: " << fmt(d.ate.estimate)
     << " (se " << fmt(d.ate.se) << ", 95% CI [" << fmt(d.ate.lo) << ", "
     << fmt(d.ate.hi) << "]).\n\n";

  md << "## Which covariates drive the signal\n\n";
  md << "Permutation importance from a conditional-inference forest fit to "
        "the effect scores (top "
     << d.top_k << " of " << d.covariates.size() << " covariates):\n\n";
  md << "| rank | covariate | importance | test statistic |\n";
  md << "|-----:|-----------|-----------:|---------------:|\n";
  const auto k =
      std::min<size_t>(static_cast<size_t>(d.top_k), d.ranking.size());
  for (size_t i = 0; i < k; ++i) {
    const auto idx = static_cast<size_t>(d.ranking[i]);
    double stat = 0;
    for (const auto& c : d.het.per_covariate)
      if (c.name == d.covariates[idx]) stat = c.statistic;
    md << "| " << (i + 1) << " | " << d.covariates[idx] << " | "
       << fmt(d.vimp[static_cast<Eigen::Index>(idx)]) << " | " << fmt(stat)
       << " |\n";
  }
  md << "\n";
  if (d.stability_defined) {
    md << "Top-" << d.top_k << " selection stability across "
       << d.bootstrap_vimp.rows() << " bootstrap refits: " << fmt(d.stability, 3)
       << " (1 = identical selection every time, 0 = chance overlap).\n\n";
  } else {
    md << "Selection stability across bootstrap refits is undefined for "
          "this run (degenerate selections).\n\n";
  }

  // strongest interaction pairs
  if (d.vint.rows() >= 2) {
    std::vector<std::tuple<double, size_t, size_t>> pairs;
    for (Eigen::Index a = 0; a < d.vint.rows(); ++a)
      for (Eigen::Index b = a + 1; b < d.vint.cols(); ++b)
        pairs.emplace_back(d.vint(a, b), static_cast<size_t>(a),
                           static_cast<size_t>(b));
    std::sort(pairs.begin(), pairs.end(), [](const auto& l, const auto& r) {
      return std::get<0>(l) > std::get<0>(r);
    });
    md << "## Interaction structure\n\n";
    md << "Strongest pairwise interaction scores (partial-dependence "
          "based) among the top covariates:\n\n";
    md << "| pair | interaction |\n|------|------------:|\n";
    for (size_t i = 0; i < std::min<size_t>(5, pairs.size()); ++i) {
      const auto& [v, a, b] = pairs[i];
      md << "| " << d.vint_names[a] << " x " << d.vint_names[b] << " | "
         << fmt(v) << " |\n";
    }
    md << "\n";
  }

  if (!d.figures.empty()) {
    md << "## Descriptive displays\n\n";
    md << "All displays show observed data or simple summaries; bands are "
          "pointwise 95% normal-theory intervals from homoscedastic "
          "linear-model variance.\n\n";
    for (const auto& f : d.figures)
      md << "- " << f.title << ": `" << f.svg_path << "` (data: `"
         << f.data_path << "`)\n";
    md << "\n";
  }

  md << "## Pre-declared covariates\n\n";
  bool any_finding = false;
  for (const auto& e : d.credibility) any_finding |= e.in_top_k;
  if (any_finding) {
    md << "| covariate | prior evidence | declared direction | observed "
          "direction | rank | note |\n";
    md << "|-----------|----------------|--------------------|-------------"
          "-------|-----:|------|\n";
    for (const auto& e : d.credibility) {
      if (!e.in_top_k) continue;
      std::string observed = "n/a";
      if (std::isfinite(e.signed_association) && e.signed_association != 0)
        observed = e.signed_association > 0 ? "Positive" : "Negative";
      md << "| " << e.name << " | " << to_string(e.evidence) << " | "
         << to_string(e.declared) << " | " << observed << " | " << e.rank
         << " | " << (e.note ? to_string(*e.note) : std::string("-"))
         << " |\n";
    }
    md << "\n";
  } else {
    md << "No pre-declared covariate reached the importance top-" << d.top_k
       << ".\n\n";
  }
  std::vector<const CredibilityEntry*> rest;
  for (const auto& e : d.credibility)
    if (!e.in_top_k) rest.push_back(&e);
  if (!rest.empty()) {
    md << "### Consistency check (pre-declared, not in the top-" << d.top_k
       << ")\n\n";
    for (const auto* e : rest) {
      md << "- " << e->name << " (evidence " << to_string(e->evidence)
         << "): observed rank "
         << (e->rank > 0 ? std::to_string(e->rank) : std::string("none"))
         << "; no credibility note is issued outside the top-" << d.top_k
         << ".\n";
    }
    md << "\n";
  }

  md << "---\n\n";
  md << "**Annotation rules.** A covariate in the importance top-" << d.top_k
     << " is annotated HighCredibility when its pre-declared evidence is "
        "Moderate or High, its observed direction matches the declared one, "
        "and the global verbal category is at least noteworthy; Notable when "
        "the evidence is Moderate or High otherwise; LowCredibility when the "
        "evidence is None or Low while the global category is low or "
        "moderate; Unsupported in the remaining top-"
     << d.top_k
     << " cases. Covariates outside the top-"
     << d.top_k
     << " receive no note and are listed in the consistency section.\n";
  return md.str();
}

}  // namespace watch
