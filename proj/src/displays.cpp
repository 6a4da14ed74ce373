#include "watch/displays.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stack>

#include "watch/error.hpp"
#include "watch/svg.hpp"

namespace watch {

namespace {

constexpr const char* kTreatedColor = "#1a4a9e";
constexpr const char* kControlColor = "#c45127";
constexpr const char* kEffectColor = "#333333";
constexpr const char* kScoreColor = "#2e7d32";

double quantile_sorted(const std::vector<double>& sorted, double p) {
  const std::size_t m = sorted.size();
  if (m == 1) return sorted[0];
  const double h = static_cast<double>(m - 1) * p;
  const auto lo = static_cast<std::size_t>(h);
  if (lo + 1 >= m) return sorted[m - 1];
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

ArmCell summarize_cell(const std::vector<double>& ys) {
  ArmCell c;
  c.n = static_cast<Eigen::Index>(ys.size());
  if (ys.empty()) {
    c.mean = c.sd = c.lo = c.hi = std::numeric_limits<double>::quiet_NaN();
    return c;
  }
  double sum = 0;
  for (double v : ys) sum += v;
  c.mean = sum / static_cast<double>(ys.size());
  double ss = 0;
  for (double v : ys) ss += (v - c.mean) * (v - c.mean);
  c.sd = ys.size() > 1 ? std::sqrt(ss / static_cast<double>(ys.size() - 1)) : 0.0;
  double half = 1.96 * c.sd / std::sqrt(static_cast<double>(ys.size()));
  c.lo = c.mean - half;
  c.hi = c.mean + half;
  return c;
}

nlohmann::ordered_json maybe(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

nlohmann::ordered_json cell_json(const ArmCell& c) {
  nlohmann::ordered_json j;
  j["n"] = c.n;
  j["mean"] = maybe(c.mean);
  j["sd"] = maybe(c.sd);
  j["ci_lower"] = maybe(c.lo);
  j["ci_upper"] = maybe(c.hi);
  return j;
}

std::vector<double> to_vec(const Eigen::VectorXd& v) {
  return {v.data(), v.data() + v.size()};
}

nlohmann::ordered_json group_json(const GroupEffect& g) {
  nlohmann::ordered_json j;
  j["labels"] = g.labels;
  j["n"] = g.n;
  j["treated"] = cell_json(g.treated);
  j["control"] = cell_json(g.control);
  if (g.effect_defined) {
    j["effect"] = g.effect;
    j["effect_ci_lower"] = g.lo;
    j["effect_ci_upper"] = g.hi;
  } else {
    j["effect"] = nullptr;
    j["effect_ci_lower"] = nullptr;
    j["effect_ci_upper"] = nullptr;
  }
  j["score_mean"] = maybe(g.phi_mean);
  return j;
}

std::string joined_label(const std::vector<std::string>& labels) {
  std::string out;
  for (size_t i = 0; i < labels.size(); ++i) {
    if (i) out += " / ";
    out += labels[i];
  }
  return out;
}

}  // namespace

std::vector<GroupEffect> group_effects(const Dataset& ds,
                                       const Eigen::VectorXd& phi,
                                       const std::string& covariate,
                                       const std::string* second) {
  const Column& trt = ds.column(ds.roles.treatment);
  const Column& a = ds.column(covariate);
  if (a.kind != ColumnKind::Categorical)
    throw DataError("group display needs a categorical covariate: " +
                    covariate);
  const Column* b = nullptr;
  if (second != nullptr) {
    b = &ds.column(*second);
    if (b->kind != ColumnKind::Categorical)
      throw DataError("group display needs a categorical covariate: " +
                      *second);
  }
  const Eigen::Index n = a.size();
  if (phi.size() != n) throw DataError("effect scores do not match the table");

  const auto la = static_cast<Eigen::Index>(a.levels.size());
  const auto lb = b ? static_cast<Eigen::Index>(b->levels.size())
                    : Eigen::Index{1};
  const Eigen::Index n_groups = la * lb;

  std::vector<std::vector<double>> y1(n_groups), y0(n_groups);
  std::vector<std::vector<double>> scores(n_groups);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (a.is_missing(i)) continue;
    if (b != nullptr && b->is_missing(i)) continue;
    auto ga = static_cast<Eigen::Index>(a.values[i]);
    Eigen::Index g = ga;
    if (b != nullptr) g = ga * lb + static_cast<Eigen::Index>(b->values[i]);
    const double y = ds.column(ds.roles.outcome).values[i];
    if (trt.values[i] > 0.5)
      y1[g].push_back(y);
    else
      y0[g].push_back(y);
    scores[g].push_back(phi[i]);
  }

  std::vector<GroupEffect> out(n_groups);
  for (Eigen::Index g = 0; g < n_groups; ++g) {
    GroupEffect& e = out[g];
    if (b != nullptr)
      e.labels = {a.levels[static_cast<size_t>(g / lb)],
                  b->levels[static_cast<size_t>(g % lb)]};
    else
      e.labels = {a.levels[static_cast<size_t>(g)]};
    e.treated = summarize_cell(y1[g]);
    e.control = summarize_cell(y0[g]);
    e.n = e.treated.n + e.control.n;
    e.effect_defined = e.treated.n > 0 && e.control.n > 0;
    if (e.effect_defined) {
      e.effect = e.treated.mean - e.control.mean;
      double v1 = e.treated.sd * e.treated.sd / static_cast<double>(e.treated.n);
      double v0 = e.control.sd * e.control.sd / static_cast<double>(e.control.n);
      double half = 1.96 * std::sqrt(v1 + v0);
      e.lo = e.effect - half;
      e.hi = e.effect + half;
    } else {
      e.effect = e.lo = e.hi = std::numeric_limits<double>::quiet_NaN();
    }
    if (scores[g].empty()) {
      e.phi_mean = std::numeric_limits<double>::quiet_NaN();
    } else {
      double s = 0;
      for (double v : scores[g]) s += v;
      e.phi_mean = s / static_cast<double>(scores[g].size());
    }
  }
  return out;
}

Eigen::RowVectorXd SplineModel::basis_row(double x) const {
  const auto K = knots.size();
  Eigen::RowVectorXd row(beta.size());
  row[0] = 1.0;
  row[1] = x;
  auto cube_pos = [](double v) { return v > 0 ? v * v * v : 0.0; };
  auto d = [&](Eigen::Index k) {
    return (cube_pos(x - knots[k]) - cube_pos(x - knots[K - 1])) /
           (knots[K - 1] - knots[k]);
  };
  for (Eigen::Index j = 0; j + 2 < K; ++j) row[2 + j] = d(j) - d(K - 2);
  return row;
}

double SplineModel::value(double x) const {
  return basis_row(x).dot(beta.transpose());
}

double SplineModel::se(double x) const {
  Eigen::RowVectorXd b = basis_row(x);
  double v = b * cov * b.transpose();
  return std::sqrt(std::max(0.0, v));
}

SplineModel fit_spline(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                       int df) {
  if (df < 1) throw ConfigError("spline df must be at least 1");
  if (x.size() != y.size()) throw DataError("spline: size mismatch");
  const Eigen::Index n = x.size();

  std::vector<double> sorted = to_vec(x);
  std::sort(sorted.begin(), sorted.end());
  if (sorted.empty() || !std::isfinite(sorted.front()) ||
      !std::isfinite(sorted.back()))
    throw DataError("spline: non-finite x");

  // df + 1 knots at equispaced quantiles, boundaries included.
  std::vector<double> knots;
  for (int i = 0; i <= df; ++i)
    knots.push_back(quantile_sorted(sorted, static_cast<double>(i) / df));
  knots.erase(std::unique(knots.begin(), knots.end()), knots.end());
  const auto K = static_cast<Eigen::Index>(knots.size());
  if (K < 2) throw DataError("spline: x has no spread");

  const Eigen::Index cols = K;  // intercept + x + (K-2) curvature terms
  if (n < cols + 1) throw DataError("spline: too few points");

  SplineModel m;
  m.knots = Eigen::Map<const Eigen::VectorXd>(knots.data(), K);
  m.beta = Eigen::VectorXd::Zero(cols);

  Eigen::MatrixXd B(n, cols);
  for (Eigen::Index i = 0; i < n; ++i) B.row(i) = m.basis_row(x[i]);
  m.beta = B.colPivHouseholderQr().solve(y);

  Eigen::VectorXd resid = y - B * m.beta;
  m.sigma2 = resid.squaredNorm() / static_cast<double>(n - cols);
  Eigen::MatrixXd gram = B.transpose() * B;
  m.cov = m.sigma2 *
          gram.completeOrthogonalDecomposition().pseudoInverse();
  return m;
}

Eigen::VectorXd local_linear(const Eigen::VectorXd& x,
                             const Eigen::VectorXd& y,
                             const Eigen::VectorXd& grid, double span) {
  if (x.size() != y.size()) throw DataError("local fit: size mismatch");
  if (!(span > 0.0 && span <= 1.0))
    throw ConfigError("local fit span must be in (0, 1]");
  const Eigen::Index n = x.size();
  if (n == 0) throw DataError("local fit: empty input");

  const auto m = std::min<Eigen::Index>(
      n, std::max<Eigen::Index>(
             2, static_cast<Eigen::Index>(
                    std::ceil(span * static_cast<double>(n)))));

  Eigen::VectorXd out(grid.size());
  std::vector<double> dist(static_cast<size_t>(n));
  for (Eigen::Index g = 0; g < grid.size(); ++g) {
    const double c = grid[g];
    for (Eigen::Index i = 0; i < n; ++i)
      dist[static_cast<size_t>(i)] = std::abs(x[i] - c);
    std::vector<double> tmp = dist;
    std::nth_element(tmp.begin(), tmp.begin() + (m - 1), tmp.end());
    const double h = tmp[static_cast<size_t>(m - 1)];

    double s0 = 0, s1 = 0, s2 = 0, t0 = 0, t1 = 0;
    if (h <= 0) {
      // everything in the window sits exactly at the grid point
      double sum = 0;
      Eigen::Index k = 0;
      for (Eigen::Index i = 0; i < n; ++i)
        if (dist[static_cast<size_t>(i)] == 0) {
          sum += y[i];
          ++k;
        }
      out[g] = sum / static_cast<double>(k);
      continue;
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      const double u = dist[static_cast<size_t>(i)] / h;
      if (u >= 1.0) continue;
      const double t = 1.0 - u * u * u;
      const double w = t * t * t;
      const double dx = x[i] - c;
      s0 += w;
      s1 += w * dx;
      s2 += w * dx * dx;
      t0 += w * y[i];
      t1 += w * dx * y[i];
    }
    const double det = s0 * s2 - s1 * s1;
    if (s0 <= 0) {
      out[g] = std::numeric_limits<double>::quiet_NaN();
    } else if (det <= 1e-12 * std::max(1.0, s0 * s2)) {
      out[g] = t0 / s0;  // weighted mean when the window is degenerate
    } else {
      out[g] = (s2 * t0 - s1 * t1) / det;  // intercept at dx = 0
    }
  }
  return out;
}

EffectCurve effect_curve_rows(const Dataset& ds, const Eigen::VectorXd& phi,
                              const std::string& covariate,
                              const std::vector<Eigen::Index>& rows, int df,
                              double span, int grid_size) {
  const Column& xc = ds.column(covariate);
  if (xc.kind != ColumnKind::Continuous)
    throw DataError("effect curve needs a continuous covariate: " + covariate);
  if (grid_size < 2) throw ConfigError("effect curve grid needs >= 2 points");
  const Column& trt = ds.column(ds.roles.treatment);
  const Column& yc = ds.column(ds.roles.outcome);
  const Eigen::Index n = xc.size();
  if (phi.size() != n) throw DataError("effect scores do not match the table");

  std::vector<double> x1, y1, x0, y0, xa, pa;
  for (Eigen::Index i : rows) {
    if (xc.is_missing(i)) continue;
    xa.push_back(xc.values[i]);
    pa.push_back(phi[i]);
    if (trt.values[i] > 0.5) {
      x1.push_back(xc.values[i]);
      y1.push_back(yc.values[i]);
    } else {
      x0.push_back(xc.values[i]);
      y0.push_back(yc.values[i]);
    }
  }
  if (xa.empty()) throw DataError("effect curve: no observed values");
  auto [lo_it, hi_it] = std::minmax_element(xa.begin(), xa.end());
  if (!(*hi_it > *lo_it)) throw DataError("effect curve: x has no spread");

  EffectCurve c;
  c.grid = Eigen::VectorXd::LinSpaced(grid_size, *lo_it, *hi_it);

  auto fit_arm = [&](const std::vector<double>& xs,
                     const std::vector<double>& ys, Eigen::VectorXd& fit,
                     Eigen::VectorXd& se) {
    SplineModel mdl = fit_spline(
        Eigen::Map<const Eigen::VectorXd>(xs.data(),
                                          static_cast<Eigen::Index>(xs.size())),
        Eigen::Map<const Eigen::VectorXd>(ys.data(),
                                          static_cast<Eigen::Index>(ys.size())),
        df);
    fit.resize(c.grid.size());
    se.resize(c.grid.size());
    for (Eigen::Index g = 0; g < c.grid.size(); ++g) {
      fit[g] = mdl.value(c.grid[g]);
      se[g] = mdl.se(c.grid[g]);
    }
  };
  fit_arm(x1, y1, c.fit1, c.se1);
  fit_arm(x0, y0, c.fit0, c.se0);

  c.effect = c.fit1 - c.fit0;
  c.effect_se =
      (c.se1.array().square() + c.se0.array().square()).sqrt().matrix();
  c.phi_smooth = local_linear(
      Eigen::Map<const Eigen::VectorXd>(xa.data(),
                                        static_cast<Eigen::Index>(xa.size())),
      Eigen::Map<const Eigen::VectorXd>(pa.data(),
                                        static_cast<Eigen::Index>(pa.size())),
      c.grid, span);
  return c;
}

EffectCurve effect_curve(const Dataset& ds, const Eigen::VectorXd& phi,
                         const std::string& covariate, int df, double span,
                         int grid_size) {
  std::vector<Eigen::Index> rows(static_cast<size_t>(phi.size()));
  for (size_t i = 0; i < rows.size(); ++i)
    rows[i] = static_cast<Eigen::Index>(i);
  return effect_curve_rows(ds, phi, covariate, rows, df, span, grid_size);
}

std::vector<std::string> write_figure(const Figure& fig,
                                      const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const std::string svg_path = (fs::path(dir) / (fig.id + ".svg")).string();
  const std::string json_path = (fs::path(dir) / (fig.id + ".json")).string();
  {
    std::ofstream out(svg_path, std::ios::binary);
    if (!out) throw DataError("cannot write " + svg_path);
    out << fig.svg;
  }
  {
    std::ofstream out(json_path, std::ios::binary);
    if (!out) throw DataError("cannot write " + json_path);
    out << fig.data.dump(2) << '\n';
  }
  return {svg_path, json_path};
}

Figure render_group_outcomes(const std::string& id, const std::string& title,
                             const std::vector<GroupEffect>& groups) {
  if (groups.empty()) return render_placeholder(id, title, "empty group list");
  svg::Plot plot(840, 480, title, "group", "outcome");
  std::vector<std::string> labels;
  for (const auto& g : groups) labels.push_back(joined_label(g.labels));
  plot.set_x_categories(labels);
  for (const auto& g : groups) {
    for (const ArmCell* cell : {&g.treated, &g.control}) {
      if (cell->n == 0) continue;
      plot.include_y(cell->lo);
      plot.include_y(cell->hi);
    }
  }
  for (size_t i = 0; i < groups.size(); ++i) {
    const auto x = static_cast<double>(i);
    const GroupEffect& g = groups[i];
    if (g.treated.n > 0) {
      plot.add_errorbar(x - 0.15, g.treated.lo, g.treated.hi, kTreatedColor);
      plot.add_point(x - 0.15, g.treated.mean, 4, kTreatedColor);
    }
    if (g.control.n > 0) {
      plot.add_errorbar(x + 0.15, g.control.lo, g.control.hi, kControlColor);
      plot.add_point(x + 0.15, g.control.mean, 4, kControlColor, false);
    }
  }
  plot.add_legend({{"treated", kTreatedColor}, {"control", kControlColor}});

  Figure fig;
  fig.id = id;
  fig.title = title;
  fig.svg = plot.finish();
  fig.data["kind"] = "group_outcomes";
  fig.data["title"] = title;
  auto arr = nlohmann::ordered_json::array();
  for (const auto& g : groups) arr.push_back(group_json(g));
  fig.data["groups"] = arr;
  return fig;
}

Figure render_group_effects(const std::string& id, const std::string& title,
                            const std::vector<GroupEffect>& groups) {
  if (groups.empty()) return render_placeholder(id, title, "empty group list");
  svg::Plot plot(840, 480, title, "group", "treatment effect");
  std::vector<std::string> labels;
  for (const auto& g : groups) labels.push_back(joined_label(g.labels));
  plot.set_x_categories(labels);
  plot.include_y(0.0);
  for (const auto& g : groups) {
    if (g.effect_defined) {
      plot.include_y(g.lo);
      plot.include_y(g.hi);
    }
    if (std::isfinite(g.phi_mean)) plot.include_y(g.phi_mean);
  }
  plot.add_hline(0.0, "#999999");
  for (size_t i = 0; i < groups.size(); ++i) {
    const auto x = static_cast<double>(i);
    const GroupEffect& g = groups[i];
    if (g.effect_defined) {
      plot.add_errorbar(x, g.lo, g.hi, kEffectColor);
      plot.add_point(x, g.effect, 4, kEffectColor);
    }
    plot.add_marker_x(x, g.phi_mean, 5, kScoreColor);
  }
  plot.add_legend({{"outcome difference", kEffectColor},
                   {"mean effect score", kScoreColor}});

  Figure fig;
  fig.id = id;
  fig.title = title;
  fig.svg = plot.finish();
  fig.data["kind"] = "group_effects";
  fig.data["title"] = title;
  auto arr = nlohmann::ordered_json::array();
  for (const auto& g : groups) arr.push_back(group_json(g));
  fig.data["groups"] = arr;
  return fig;
}

Figure render_curve_outcomes(const std::string& id, const std::string& title,
                             const std::string& x_label,
                             const EffectCurve& curve) {
  if (curve.grid.size() == 0)
    return render_placeholder(id, title, "empty curve");
  svg::Plot plot(840, 480, title, x_label, "outcome");
  plot.set_x_range(curve.grid.minCoeff(), curve.grid.maxCoeff());
  for (Eigen::Index i = 0; i < curve.grid.size(); ++i) {
    plot.include_y(curve.fit1[i] + 1.96 * curve.se1[i]);
    plot.include_y(curve.fit1[i] - 1.96 * curve.se1[i]);
    plot.include_y(curve.fit0[i] + 1.96 * curve.se0[i]);
    plot.include_y(curve.fit0[i] - 1.96 * curve.se0[i]);
  }
  auto band = [&](const Eigen::VectorXd& fit, const Eigen::VectorXd& se,
                  const char* color, bool dashed) {
    Eigen::VectorXd lo = fit - 1.96 * se, hi = fit + 1.96 * se;
    plot.add_band(curve.grid, lo, hi, color);
    plot.add_line(curve.grid, fit, color, 1.8, dashed);
  };
  band(curve.fit1, curve.se1, kTreatedColor, false);
  band(curve.fit0, curve.se0, kControlColor, true);
  plot.add_legend({{"treated", kTreatedColor}, {"control", kControlColor}});

  Figure fig;
  fig.id = id;
  fig.title = title;
  fig.svg = plot.finish();
  fig.data["kind"] = "curve_outcomes";
  fig.data["title"] = title;
  fig.data["x_label"] = x_label;
  fig.data["grid"] = to_vec(curve.grid);
  fig.data["treated_fit"] = to_vec(curve.fit1);
  fig.data["treated_se"] = to_vec(curve.se1);
  fig.data["control_fit"] = to_vec(curve.fit0);
  fig.data["control_se"] = to_vec(curve.se0);
  return fig;
}

Figure render_curve_effects(const std::string& id, const std::string& title,
                            const std::string& x_label,
                            const EffectCurve& curve) {
  if (curve.grid.size() == 0)
    return render_placeholder(id, title, "empty curve");
  svg::Plot plot(840, 480, title, x_label, "treatment effect");
  plot.set_x_range(curve.grid.minCoeff(), curve.grid.maxCoeff());
  plot.include_y(0.0);
  for (Eigen::Index i = 0; i < curve.grid.size(); ++i) {
    plot.include_y(curve.effect[i] + 1.96 * curve.effect_se[i]);
    plot.include_y(curve.effect[i] - 1.96 * curve.effect_se[i]);
    if (std::isfinite(curve.phi_smooth[i])) plot.include_y(curve.phi_smooth[i]);
  }
  Eigen::VectorXd lo = curve.effect - 1.96 * curve.effect_se;
  Eigen::VectorXd hi = curve.effect + 1.96 * curve.effect_se;
  plot.add_hline(0.0, "#999999");
  plot.add_band(curve.grid, lo, hi, kEffectColor);
  plot.add_line(curve.grid, curve.effect, kEffectColor, 1.8);
  plot.add_line(curve.grid, curve.phi_smooth, kScoreColor, 1.8, true);
  plot.add_legend({{"outcome difference", kEffectColor},
                   {"smoothed effect score", kScoreColor}});

  Figure fig;
  fig.id = id;
  fig.title = title;
  fig.svg = plot.finish();
  fig.data["kind"] = "curve_effects";
  fig.data["title"] = title;
  fig.data["x_label"] = x_label;
  fig.data["grid"] = to_vec(curve.grid);
  fig.data["effect"] = to_vec(curve.effect);
  fig.data["effect_se"] = to_vec(curve.effect_se);
  auto smooth = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < curve.phi_smooth.size(); ++i)
    smooth.push_back(maybe(curve.phi_smooth[i]));
  fig.data["score_smooth"] = smooth;
  return fig;
}

Figure render_curve_effects_stratified(
    const std::string& id, const std::string& title,
    const std::string& x_label,
    const std::vector<std::pair<std::string, EffectCurve>>& strata) {
  if (strata.empty())
    return render_placeholder(id, title, "no stratum had enough data");
  static const char* palette[] = {"#1a4a9e", "#c45127", "#2e7d32",
                                  "#7b3fa0", "#a08a00", "#006b76"};
  svg::Plot plot(840, 480, title, x_label, "treatment effect");
  for (const auto& [label, c] : strata) {
    plot.include_x(c.grid.minCoeff());
    plot.include_x(c.grid.maxCoeff());
    plot.include_y(0.0);
    for (Eigen::Index i = 0; i < c.grid.size(); ++i) {
      plot.include_y(c.effect[i] + 1.96 * c.effect_se[i]);
      plot.include_y(c.effect[i] - 1.96 * c.effect_se[i]);
    }
  }
  plot.add_hline(0.0, "#999999");
  std::vector<std::pair<std::string, std::string>> legend;
  for (size_t s = 0; s < strata.size(); ++s) {
    const auto& [label, c] = strata[s];
    const char* color = palette[s % 6];
    Eigen::VectorXd lo = c.effect - 1.96 * c.effect_se;
    Eigen::VectorXd hi = c.effect + 1.96 * c.effect_se;
    plot.add_band(c.grid, lo, hi, color, 0.10);
    plot.add_line(c.grid, c.effect, color, 1.8);
    legend.emplace_back(label, color);
  }
  plot.add_legend(legend);

  Figure fig;
  fig.id = id;
  fig.title = title;
  fig.svg = plot.finish();
  fig.data["kind"] = "curve_effects_stratified";
  fig.data["title"] = title;
  fig.data["x_label"] = x_label;
  auto arr = nlohmann::ordered_json::array();
  for (const auto& [label, c] : strata) {
    nlohmann::ordered_json j;
    j["stratum"] = label;
    j["grid"] = to_vec(c.grid);
    j["effect"] = to_vec(c.effect);
    j["effect_se"] = to_vec(c.effect_se);
    arr.push_back(j);
  }
  fig.data["strata"] = arr;
  return fig;
}

Figure render_placeholder(const std::string& id, const std::string& title,
                          const std::string& note) {
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"520\" "
         "height=\"240\" viewBox=\"0 0 520 240\" "
         "font-family=\"Helvetica, Arial, sans-serif\">\n"
      << "<rect width=\"520\" height=\"240\" fill=\"white\"/>\n"
      << "<text x=\"260\" y=\"30\" font-size=\"14\" text-anchor=\"middle\" "
         "font-weight=\"bold\">"
      << svg::escape(title) << "</text>\n"
      << "<text x=\"260\" y=\"130\" font-size=\"12\" text-anchor=\"middle\" "
         "fill=\"#777777\">no data: "
      << svg::escape(note) << "</text>\n</svg>\n";
  Figure fig;
  fig.id = id;
  fig.title = title;
  fig.svg = out.str();
  fig.data["kind"] = "placeholder";
  fig.data["title"] = title;
  fig.data["note"] = note;
  return fig;
}

Figure render_outcome_by_arm(const std::string& id, const Dataset& ds) {
  const Column& trt = ds.column(ds.roles.treatment);
  const Column& yc = ds.column(ds.roles.outcome);
  std::vector<std::vector<double>> arms(2);
  for (Eigen::Index i = 0; i < yc.size(); ++i)
    arms[trt.values[i] > 0.5 ? 1 : 0].push_back(yc.values[i]);

  svg::Plot plot(520, 420, "Outcome by arm", "arm", "outcome");
  plot.set_x_categories({"control", "treated"});

  Figure fig;
  fig.id = id;
  fig.title = "Outcome by arm";
  fig.data["kind"] = "outcome_by_arm";
  auto arr = nlohmann::ordered_json::array();

  struct Box {
    double lo, q1, med, q3, hi;
    Eigen::Index n;
  };
  std::vector<Box> boxes;
  for (auto& ys : arms) {
    std::sort(ys.begin(), ys.end());
    Box b{};
    b.n = static_cast<Eigen::Index>(ys.size());
    if (!ys.empty()) {
      b.lo = ys.front();
      b.hi = ys.back();
      b.q1 = quantile_sorted(ys, 0.25);
      b.med = quantile_sorted(ys, 0.5);
      b.q3 = quantile_sorted(ys, 0.75);
      plot.include_y(b.lo);
      plot.include_y(b.hi);
    }
    boxes.push_back(b);
  }
  for (size_t a = 0; a < boxes.size(); ++a) {
    const Box& b = boxes[a];
    nlohmann::ordered_json j;
    j["arm"] = a == 1 ? "treated" : "control";
    j["n"] = b.n;
    if (b.n > 0) {
      j["min"] = b.lo;
      j["q1"] = b.q1;
      j["median"] = b.med;
      j["q3"] = b.q3;
      j["max"] = b.hi;
    }
    arr.push_back(j);
    if (b.n == 0) continue;
    const auto x = static_cast<double>(a);
    const char* color = a == 1 ? kTreatedColor : kControlColor;
    plot.add_cell(x - 0.22, x + 0.22, b.q1, b.q3, "#e8edf6");
    plot.add_segment(x - 0.22, b.q1, x + 0.22, b.q1, color);
    plot.add_segment(x - 0.22, b.q3, x + 0.22, b.q3, color);
    plot.add_segment(x - 0.22, b.q1, x - 0.22, b.q3, color);
    plot.add_segment(x + 0.22, b.q1, x + 0.22, b.q3, color);
    plot.add_segment(x - 0.22, b.med, x + 0.22, b.med, color, 2.0);
    plot.add_segment(x, b.q3, x, b.hi, color);
    plot.add_segment(x, b.lo, x, b.q1, color);
  }
  fig.data["arms"] = arr;
  fig.svg = plot.finish();
  return fig;
}

Figure render_missingness(const std::string& id,
                          const std::vector<std::string>& names,
                          const Eigen::VectorXd& fractions) {
  svg::Plot plot(std::max<double>(520, 28.0 * static_cast<double>(names.size()) + 120),
                 420, "Missing data by covariate", "covariate",
                 "fraction missing");
  plot.set_x_categories(names);
  double top = fractions.size() ? fractions.maxCoeff() : 0.0;
  plot.set_y_range(0.0, std::max(0.05, top * 1.15));
  for (Eigen::Index i = 0; i < fractions.size(); ++i) {
    if (fractions[i] <= 0) continue;
    const auto x = static_cast<double>(i);
    plot.add_cell(x - 0.35, x + 0.35, 0.0, fractions[i], "#7a9cd4");
  }

  Figure fig;
  fig.id = id;
  fig.title = "Missing data by covariate";
  fig.svg = plot.finish();
  fig.data["kind"] = "missingness";
  fig.data["names"] = names;
  fig.data["fractions"] = to_vec(fractions);
  return fig;
}

Figure render_association_heatmap(const std::string& id,
                                  const std::vector<std::string>& names,
                                  const Eigen::MatrixXd& values) {
  const auto p = static_cast<Eigen::Index>(names.size());
  const double side = std::max<double>(420, 22.0 * static_cast<double>(p) + 160);
  svg::Plot plot(side, side, "Covariate association", "", "");
  plot.set_x_categories(names);
  std::vector<std::string> rev(names.rbegin(), names.rend());
  plot.set_y_categories(rev);
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) {
      const auto x = static_cast<double>(j);
      const double y = static_cast<double>(p - 1 - i);  // row 0 on top
      plot.add_cell(x - 0.5, x + 0.5, y - 0.5, y + 0.5,
                    svg::heat_color(values(i, j)));
    }
  }

  Figure fig;
  fig.id = id;
  fig.title = "Covariate association";
  fig.svg = plot.finish();
  fig.data["kind"] = "association";
  fig.data["names"] = names;
  auto rows = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < p; ++i) {
    auto row = nlohmann::ordered_json::array();
    for (Eigen::Index j = 0; j < p; ++j) row.push_back(values(i, j));
    rows.push_back(row);
  }
  fig.data["values"] = rows;
  return fig;
}

Figure render_dendrogram(const std::string& id, const Dendrogram& tree) {
  const auto p = static_cast<int>(tree.names.size());
  const auto m = static_cast<int>(tree.merges.size());

  // Leaf display order from a left-first walk of the merge tree.
  std::vector<int> order;
  if (m == 0) {
    for (int i = 0; i < p; ++i) order.push_back(i);
  } else {
    std::stack<int> work;
    work.push(p + m - 1);
    while (!work.empty()) {
      int c = work.top();
      work.pop();
      if (c < p) {
        order.push_back(c);
      } else {
        const auto& mg = tree.merges[static_cast<size_t>(c - p)];
        work.push(mg.right);  // right popped second
        work.push(mg.left);
      }
    }
  }
  std::vector<double> xpos(static_cast<size_t>(p + m), 0.0);
  std::vector<double> ypos(static_cast<size_t>(p + m), 0.0);
  for (size_t i = 0; i < order.size(); ++i)
    xpos[static_cast<size_t>(order[i])] = static_cast<double>(i);
  for (int k = 0; k < m; ++k) {
    const auto& mg = tree.merges[static_cast<size_t>(k)];
    xpos[static_cast<size_t>(p + k)] =
        0.5 * (xpos[static_cast<size_t>(mg.left)] +
               xpos[static_cast<size_t>(mg.right)]);
    ypos[static_cast<size_t>(p + k)] = mg.height;
  }

  std::vector<std::string> labels;
  for (int c : order) labels.push_back(tree.names[static_cast<size_t>(c)]);
  const double width =
      std::max<double>(520, 26.0 * static_cast<double>(p) + 140);
  svg::Plot plot(width, 460, "Covariate clustering", "", "distance");
  plot.set_x_categories(labels);
  double top = 0;
  for (const auto& mg : tree.merges) top = std::max(top, mg.height);
  plot.set_y_range(0.0, std::max(0.1, top * 1.08));
  for (const auto& mg : tree.merges) {
    const double xl = xpos[static_cast<size_t>(mg.left)];
    const double xr = xpos[static_cast<size_t>(mg.right)];
    const double yl = ypos[static_cast<size_t>(mg.left)];
    const double yr = ypos[static_cast<size_t>(mg.right)];
    plot.add_segment(xl, yl, xl, mg.height, "#1a4a9e", 1.4);
    plot.add_segment(xr, yr, xr, mg.height, "#1a4a9e", 1.4);
    plot.add_segment(xl, mg.height, xr, mg.height, "#1a4a9e", 1.4);
  }

  Figure fig;
  fig.id = id;
  fig.title = "Covariate clustering";
  fig.svg = plot.finish();
  fig.data["kind"] = "dendrogram";
  fig.data["leaf_order"] = labels;
  auto merges = nlohmann::ordered_json::array();
  for (const auto& mg : tree.merges) {
    nlohmann::ordered_json j;
    j["left"] = mg.left;
    j["right"] = mg.right;
    j["height"] = mg.height;
    j["size"] = mg.size;
    merges.push_back(j);
  }
  fig.data["merges"] = merges;
  return fig;
}

Figure render_importance_bars(const std::string& id,
                              const std::vector<std::string>& names,
                              const Eigen::VectorXd& vimp,
                              const std::vector<int>& order, int top_k) {
  const auto k = std::min<size_t>(static_cast<size_t>(top_k), order.size());
  std::vector<std::string> labels;
  for (size_t i = 0; i < k; ++i)
    labels.push_back(names[static_cast<size_t>(order[i])]);

  svg::Plot plot(std::max<double>(520, 46.0 * static_cast<double>(k) + 140),
                 420, "Effect-score importance", "covariate",
                 "importance (loss increase)");
  plot.set_x_categories(labels);
  plot.include_y(0.0);
  for (size_t i = 0; i < k; ++i)
    plot.include_y(vimp[order[i]]);
  plot.add_hline(0.0, "#999999");
  for (size_t i = 0; i < k; ++i) {
    const auto x = static_cast<double>(i);
    const double v = vimp[order[i]];
    plot.add_cell(x - 0.32, x + 0.32, std::min(0.0, v), std::max(0.0, v),
                  "#7a9cd4");
  }

  Figure fig;
  fig.id = id;
  fig.title = "Effect-score importance";
  fig.svg = plot.finish();
  fig.data["kind"] = "importance";
  fig.data["names"] = labels;
  auto vals = nlohmann::ordered_json::array();
  for (size_t i = 0; i < k; ++i) vals.push_back(vimp[order[i]]);
  fig.data["importance"] = vals;
  return fig;
}

Figure render_stability_box(const std::string& id,
                            const std::vector<std::string>& names,
                            const Eigen::MatrixXd& vimp_samples,
                            const std::vector<int>& order, int top_k) {
  const auto k = std::min<size_t>(static_cast<size_t>(top_k), order.size());
  std::vector<std::string> labels;
  for (size_t i = 0; i < k; ++i)
    labels.push_back(names[static_cast<size_t>(order[i])]);

  svg::Plot plot(std::max<double>(520, 46.0 * static_cast<double>(k) + 140),
                 420, "Importance across bootstrap refits", "covariate",
                 "importance (loss increase)");
  plot.set_x_categories(labels);
  plot.include_y(0.0);
  plot.add_hline(0.0, "#999999");

  Figure fig;
  fig.id = id;
  fig.title = "Importance across bootstrap refits";
  fig.data["kind"] = "importance_stability";
  fig.data["names"] = labels;
  auto arr = nlohmann::ordered_json::array();
  for (size_t i = 0; i < k; ++i) {
    std::vector<double> col;
    for (Eigen::Index b = 0; b < vimp_samples.rows(); ++b)
      col.push_back(vimp_samples(b, order[i]));
    std::sort(col.begin(), col.end());
    const double q1 = quantile_sorted(col, 0.25);
    const double med = quantile_sorted(col, 0.5);
    const double q3 = quantile_sorted(col, 0.75);
    plot.include_y(col.front());
    plot.include_y(col.back());
    const auto x = static_cast<double>(i);
    plot.add_cell(x - 0.26, x + 0.26, q1, q3, "#e8edf6");
    plot.add_segment(x - 0.26, q1, x + 0.26, q1, "#1a4a9e");
    plot.add_segment(x - 0.26, q3, x + 0.26, q3, "#1a4a9e");
    plot.add_segment(x - 0.26, q1, x - 0.26, q3, "#1a4a9e");
    plot.add_segment(x + 0.26, q1, x + 0.26, q3, "#1a4a9e");
    plot.add_segment(x - 0.26, med, x + 0.26, med, "#1a4a9e", 2.0);
    plot.add_segment(x, q3, x, col.back(), "#1a4a9e");
    plot.add_segment(x, col.front(), x, q1, "#1a4a9e");

    nlohmann::ordered_json j;
    j["name"] = labels[i];
    j["min"] = col.front();
    j["q1"] = q1;
    j["median"] = med;
    j["q3"] = q3;
    j["max"] = col.back();
    arr.push_back(j);
  }
  fig.data["boxes"] = arr;
  fig.svg = plot.finish();
  return fig;
}

}  // namespace watch
