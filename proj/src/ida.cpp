#include "watch/ida.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace watch {

namespace {

/// Linear-interpolation quantile on a sorted vector (the common
/// "type 7" rule: q(p) sits at index (m-1)p).
double quantile_sorted(const std::vector<double>& sorted, double p) {
  const std::size_t m = sorted.size();
  if (m == 1) return sorted[0];
  const double h = static_cast<double>(m - 1) * p;
  const auto lo = static_cast<std::size_t>(h);
  if (lo + 1 >= m) return sorted[m - 1];
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

ColumnSummary summarize_column(const Column& col) {
  ColumnSummary s;
  s.name = col.name;
  s.kind = col.kind;
  s.n = col.size();
  s.missing = col.missing_count();
  if (col.kind == ColumnKind::Continuous) {
    std::vector<double> obs;
    obs.reserve(static_cast<std::size_t>(s.n));
    for (Eigen::Index i = 0; i < col.size(); ++i) {
      if (!col.is_missing(i)) obs.push_back(col.values[i]);
    }
    if (!obs.empty()) {
      ContinuousStats st;
      st.count = static_cast<Eigen::Index>(obs.size());
      double sum = 0;
      for (double v : obs) sum += v;
      st.mean = sum / static_cast<double>(obs.size());
      double ss = 0;
      for (double v : obs) ss += (v - st.mean) * (v - st.mean);
      st.sd = obs.size() > 1
                  ? std::sqrt(ss / static_cast<double>(obs.size() - 1))
                  : 0.0;
      std::sort(obs.begin(), obs.end());
      st.min = obs.front();
      st.max = obs.back();
      st.q1 = quantile_sorted(obs, 0.25);
      st.median = quantile_sorted(obs, 0.5);
      st.q3 = quantile_sorted(obs, 0.75);
      s.stats = st;
    }
  } else {
    std::vector<Eigen::Index> counts(col.levels.size(), 0);
    for (Eigen::Index i = 0; i < col.size(); ++i) {
      if (!col.is_missing(i)) ++counts[static_cast<std::size_t>(col.values[i])];
    }
    for (std::size_t l = 0; l < col.levels.size(); ++l) {
      s.freqs.push_back({col.levels[l], counts[l]});
    }
  }
  return s;
}

Dataset subset_rows(const Dataset& ds, const std::vector<Eigen::Index>& rows) {
  Dataset out;
  out.roles = ds.roles;
  for (const auto& col : ds.columns) {
    Column c;
    c.name = col.name;
    c.kind = col.kind;
    c.levels = col.levels;
    c.values.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      c.values[static_cast<Eigen::Index>(i)] = col.values[rows[i]];
    }
    out.columns.push_back(std::move(c));
  }
  return out;
}

struct PairData {
  std::vector<double> a, b;  // pairwise-complete values
};

PairData complete_pairs(const Column& a, const Column& b) {
  PairData out;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (!a.is_missing(i) && !b.is_missing(i)) {
      out.a.push_back(a.values[i]);
      out.b.push_back(b.values[i]);
    }
  }
  return out;
}

double abs_pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2) return 0;
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0 || syy <= 0) return 0;
  return std::abs(sxy / std::sqrt(sxx * syy));
}

/// Correlation ratio: sqrt of the between-group share of the total sum
/// of squares of the continuous variable across the category's groups.
double correlation_ratio(const std::vector<double>& groups,
                         const std::vector<double>& values) {
  const std::size_t n = values.size();
  if (n < 2) return 0;
  std::map<double, std::pair<double, Eigen::Index>> acc;  // sum, count
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    auto& slot = acc[groups[i]];
    slot.first += values[i];
    ++slot.second;
    total += values[i];
  }
  if (acc.size() < 2) return 0;
  const double grand = total / static_cast<double>(n);
  double ss_total = 0;
  for (double v : values) ss_total += (v - grand) * (v - grand);
  if (ss_total <= 0) return 0;
  double ss_between = 0;
  for (const auto& [level, slot] : acc) {
    const double mean = slot.first / static_cast<double>(slot.second);
    ss_between += static_cast<double>(slot.second) * (mean - grand) * (mean - grand);
  }
  const double ratio = ss_between / ss_total;
  return std::sqrt(std::min(std::max(ratio, 0.0), 1.0));
}

double cramers_v(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = a.size();
  if (n < 2) return 0;
  std::map<double, int> la, lb;
  for (double v : a) la.emplace(v, 0);
  for (double v : b) lb.emplace(v, 0);
  {
    int k = 0;
    for (auto& [v, idx] : la) idx = k++;
    k = 0;
    for (auto& [v, idx] : lb) idx = k++;
  }
  const std::size_t r = la.size(), c = lb.size();
  if (r < 2 || c < 2) return 0;
  Eigen::MatrixXd table = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(r),
                                                static_cast<Eigen::Index>(c));
  for (std::size_t i = 0; i < n; ++i) {
    table(la[a[i]], lb[b[i]]) += 1.0;
  }
  const Eigen::VectorXd row_sum = table.rowwise().sum();
  const Eigen::VectorXd col_sum = table.colwise().sum();
  double chi2 = 0;
  for (Eigen::Index i = 0; i < table.rows(); ++i) {
    for (Eigen::Index j = 0; j < table.cols(); ++j) {
      const double expected =
          row_sum[i] * col_sum[j] / static_cast<double>(n);
      if (expected > 0) {
        const double d = table(i, j) - expected;
        chi2 += d * d / expected;
      }
    }
  }
  const double denom = static_cast<double>(n) *
                       static_cast<double>(std::min(r, c) - 1);
  const double v2 = chi2 / denom;
  return std::sqrt(std::min(std::max(v2, 0.0), 1.0));
}

nlohmann::ordered_json summary_to_json(const ColumnSummary& s) {
  nlohmann::ordered_json j;
  j["name"] = s.name;
  j["kind"] = s.kind == ColumnKind::Continuous ? "continuous" : "categorical";
  j["n"] = s.n;
  j["missing"] = s.missing;
  if (s.stats) {
    j["stats"] = {{"count", s.stats->count}, {"mean", s.stats->mean},
                  {"sd", s.stats->sd},       {"min", s.stats->min},
                  {"q1", s.stats->q1},       {"median", s.stats->median},
                  {"q3", s.stats->q3},       {"max", s.stats->max}};
  }
  if (!s.freqs.empty()) {
    auto freqs = nlohmann::ordered_json::array();
    for (const auto& f : s.freqs) {
      freqs.push_back({{"level", f.level}, {"count", f.count}});
    }
    j["levels"] = freqs;
  }
  return j;
}

}  // namespace

std::vector<ColumnSummary> univariate_summary(const Dataset& ds) {
  std::vector<ColumnSummary> out;
  out.reserve(ds.columns.size());
  for (const auto& col : ds.columns) out.push_back(summarize_column(col));
  return out;
}

StratifiedSummary stratified_summary(const Dataset& ds, const std::string& by) {
  const Column& strat = ds.column(by);
  if (strat.kind != ColumnKind::Categorical) {
    throw DataError("stratifying column '" + by + "' must be categorical");
  }
  StratifiedSummary out;
  out.by = by;
  for (std::size_t l = 0; l < strat.levels.size(); ++l) {
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < strat.size(); ++i) {
      if (!strat.is_missing(i) &&
          static_cast<std::size_t>(strat.values[i]) == l) {
        rows.push_back(i);
      }
    }
    if (rows.empty()) {
      out.warnings.push_back("stratum '" + strat.levels[l] + "' of '" + by +
                             "' has no rows and was omitted");
      continue;
    }
    StratumSummary stratum;
    stratum.level = strat.levels[l];
    stratum.n = static_cast<Eigen::Index>(rows.size());
    Dataset sub = subset_rows(ds, rows);
    for (const auto& col : sub.columns) {
      if (col.name == by) continue;
      stratum.columns.push_back(summarize_column(col));
    }
    out.strata.push_back(std::move(stratum));
  }
  return out;
}

MissingnessReport missingness_report(const Dataset& ds) {
  MissingnessReport rep;
  rep.names = ds.roles.covariates;
  const Eigen::Index n = ds.n_rows();
  rep.fractions.resize(static_cast<Eigen::Index>(rep.names.size()));
  std::vector<const Column*> cols;
  for (std::size_t j = 0; j < rep.names.size(); ++j) {
    const Column& col = ds.column(rep.names[j]);
    cols.push_back(&col);
    rep.fractions[static_cast<Eigen::Index>(j)] =
        n == 0 ? 0.0
               : static_cast<double>(col.missing_count()) /
                     static_cast<double>(n);
  }
  std::map<std::string, Eigen::Index> patterns;
  std::string mask(rep.names.size(), '0');
  for (Eigen::Index i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      mask[j] = cols[j]->is_missing(i) ? '1' : '0';
    }
    ++patterns[mask];
  }
  for (const auto& [m, count] : patterns) rep.patterns.push_back({m, count});
  std::stable_sort(rep.patterns.begin(), rep.patterns.end(),
                   [](const auto& a, const auto& b) {
                     if (a.count != b.count) return a.count > b.count;
                     return a.mask < b.mask;
                   });
  return rep;
}

double association(const Dataset& ds, const std::string& a,
                   const std::string& b) {
  const Column& ca = ds.column(a);
  const Column& cb = ds.column(b);
  if (a == b) return 1.0;
  PairData pd = complete_pairs(ca, cb);
  const bool cat_a = ca.kind == ColumnKind::Categorical;
  const bool cat_b = cb.kind == ColumnKind::Categorical;
  if (!cat_a && !cat_b) return abs_pearson(pd.a, pd.b);
  if (cat_a && cat_b) return cramers_v(pd.a, pd.b);
  return cat_a ? correlation_ratio(pd.a, pd.b)
               : correlation_ratio(pd.b, pd.a);
}

AssociationMatrix association_matrix(const Dataset& ds) {
  AssociationMatrix out;
  out.names = ds.roles.covariates;
  const auto p = static_cast<Eigen::Index>(out.names.size());
  out.values = Eigen::MatrixXd::Identity(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = i + 1; j < p; ++j) {
      const double v = association(ds, out.names[static_cast<std::size_t>(i)],
                                   out.names[static_cast<std::size_t>(j)]);
      out.values(i, j) = v;
      out.values(j, i) = v;
    }
  }
  // Degenerate columns produce a row of zeros off-diagonal; report once.
  for (Eigen::Index i = 0; i < p; ++i) {
    const Column& col = ds.column(out.names[static_cast<std::size_t>(i)]);
    bool degenerate = false;
    if (col.kind == ColumnKind::Continuous) {
      double mn = 0, mx = 0;
      bool first = true;
      for (Eigen::Index r = 0; r < col.size(); ++r) {
        if (col.is_missing(r)) continue;
        if (first) {
          mn = mx = col.values[r];
          first = false;
        } else {
          mn = std::min(mn, col.values[r]);
          mx = std::max(mx, col.values[r]);
        }
      }
      degenerate = first || mn == mx;
    } else {
      std::set<double> seen;
      for (Eigen::Index r = 0; r < col.size(); ++r) {
        if (!col.is_missing(r)) seen.insert(col.values[r]);
      }
      degenerate = seen.size() < 2;
    }
    if (degenerate) {
      out.warnings.push_back("covariate '" +
                             out.names[static_cast<std::size_t>(i)] +
                             "' has no variation; associations set to 0");
    }
  }
  return out;
}

Dendrogram cluster_covariates(const AssociationMatrix& assoc) {
  const auto p = static_cast<int>(assoc.names.size());
  if (p < 2) throw DataError("clustering needs at least two covariates");
  Dendrogram out;
  out.names = assoc.names;

  struct Cluster {
    int id;
    int size;
  };
  std::vector<Cluster> active;
  for (int i = 0; i < p; ++i) active.push_back({i, 1});
  // Distances between active clusters, indexed by position in `active`.
  std::vector<std::vector<double>> dist(static_cast<std::size_t>(p),
                                        std::vector<double>(static_cast<std::size_t>(p), 0));
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < p; ++j) {
      dist[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
          1.0 - assoc.values(i, j);
    }
  }

  int next_id = p;
  while (active.size() > 1) {
    std::size_t bi = 0, bj = 1;
    double best = dist[0][1];
    for (std::size_t i = 0; i < active.size(); ++i) {
      for (std::size_t j = i + 1; j < active.size(); ++j) {
        if (dist[i][j] < best) {
          best = dist[i][j];
          bi = i;
          bj = j;
        }
      }
    }
    const Cluster a = active[bi];
    const Cluster b = active[bj];
    Dendrogram::Merge m;
    m.left = std::min(a.id, b.id);
    m.right = std::max(a.id, b.id);
    m.height = best;
    m.size = a.size + b.size;
    out.merges.push_back(m);

    // Average-linkage update against every other active cluster.
    std::vector<double> merged_row(active.size(), 0);
    for (std::size_t k = 0; k < active.size(); ++k) {
      if (k == bi || k == bj) continue;
      merged_row[k] = (static_cast<double>(a.size) * dist[bi][k] +
                       static_cast<double>(b.size) * dist[bj][k]) /
                      static_cast<double>(a.size + b.size);
    }
    // Replace position bi with the merged cluster, drop bj.
    active[bi] = {next_id++, m.size};
    for (std::size_t k = 0; k < active.size(); ++k) {
      dist[bi][k] = merged_row[k];
      dist[k][bi] = merged_row[k];
    }
    dist[bi][bi] = 0;
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(bj));
    for (auto& row : dist) {
      row.erase(row.begin() + static_cast<std::ptrdiff_t>(bj));
    }
    dist.erase(dist.begin() + static_cast<std::ptrdiff_t>(bj));
  }
  return out;
}

nlohmann::ordered_json ida_report(const Dataset& ds) {
  nlohmann::ordered_json j;
  j["n_rows"] = ds.n_rows();
  j["roles"] = {{"outcome", ds.roles.outcome},
                {"treatment", ds.roles.treatment},
                {"covariates", ds.roles.covariates}};

  auto summaries = nlohmann::ordered_json::array();
  for (const auto& s : univariate_summary(ds)) {
    summaries.push_back(summary_to_json(s));
  }
  j["summaries"] = summaries;

  const StratifiedSummary strat = stratified_summary(ds, ds.roles.treatment);
  nlohmann::ordered_json sj;
  sj["by"] = strat.by;
  auto strata = nlohmann::ordered_json::array();
  for (const auto& s : strat.strata) {
    nlohmann::ordered_json stratum;
    stratum["level"] = s.level;
    stratum["n"] = s.n;
    auto cols = nlohmann::ordered_json::array();
    for (const auto& c : s.columns) cols.push_back(summary_to_json(c));
    stratum["columns"] = cols;
    strata.push_back(stratum);
  }
  sj["strata"] = strata;
  sj["warnings"] = strat.warnings;
  j["stratified"] = sj;

  const MissingnessReport miss = missingness_report(ds);
  nlohmann::ordered_json mj;
  mj["covariates"] = miss.names;
  auto fractions = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < miss.fractions.size(); ++i) {
    fractions.push_back(miss.fractions[i]);
  }
  mj["fractions"] = fractions;
  auto patterns = nlohmann::ordered_json::array();
  for (const auto& pat : miss.patterns) {
    patterns.push_back({{"mask", pat.mask}, {"count", pat.count}});
  }
  mj["patterns"] = patterns;
  j["missingness"] = mj;

  const AssociationMatrix assoc = association_matrix(ds);
  nlohmann::ordered_json aj;
  aj["names"] = assoc.names;
  auto rows = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < assoc.values.rows(); ++i) {
    auto row = nlohmann::ordered_json::array();
    for (Eigen::Index k = 0; k < assoc.values.cols(); ++k) {
      row.push_back(assoc.values(i, k));
    }
    rows.push_back(row);
  }
  aj["matrix"] = rows;
  aj["warnings"] = assoc.warnings;
  j["association"] = aj;

  if (assoc.names.size() >= 2) {
    const Dendrogram dendro = cluster_covariates(assoc);
    nlohmann::ordered_json dj;
    dj["names"] = dendro.names;
    auto merges = nlohmann::ordered_json::array();
    for (const auto& m : dendro.merges) {
      merges.push_back({{"left", m.left},
                        {"right", m.right},
                        {"height", m.height},
                        {"size", m.size}});
    }
    dj["merges"] = merges;
    j["clustering"] = dj;
  }
  return j;
}

}  // namespace watch
