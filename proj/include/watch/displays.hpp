#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "watch/cate.hpp"
#include "watch/ida.hpp"
#include "watch/tabular.hpp"

namespace watch {

/// Summary of one arm inside one covariate group.
struct ArmCell {
  Eigen::Index n = 0;
  double mean = 0;
  double sd = 0;
  double lo = 0, hi = 0;  // mean +- 1.96 sd/sqrt(n)
};

/// Unadjusted within-group contrast plus the group's mean effect
/// score.  Cells missing an arm keep effect_defined false.
struct GroupEffect {
  std::vector<std::string> labels;  // one label per grouping covariate
  Eigen::Index n = 0;               // all rows in the group
  ArmCell treated, control;
  double effect = 0;
  double lo = 0, hi = 0;  // effect +- 1.96 sqrt(sd1^2/n1 + sd0^2/n0)
  bool effect_defined = false;
  double phi_mean = 0;  // NaN for an empty group
};

/// Groups are the level combinations of one or two categorical
/// covariates, in level order; they partition the rows.
std::vector<GroupEffect> group_effects(const Dataset& ds,
                                       const Eigen::VectorXd& phi,
                                       const std::string& covariate,
                                       const std::string* second = nullptr);

/// Natural cubic regression spline (linear beyond the boundary knots)
/// fit by least squares, with a pointwise normal-theory band.
struct SplineModel {
  Eigen::VectorXd knots;  // ascending, boundary knots included
  Eigen::VectorXd beta;   // intercept, x, curvature terms
  Eigen::MatrixXd cov;    // sigma2 * (B'B)^{-1}
  double sigma2 = 0;

  Eigen::RowVectorXd basis_row(double x) const;
  double value(double x) const;
  double se(double x) const;
};

/// df = 4 places 3 interior knots at the quartiles.  Throws DataError
/// when there are fewer than df + 2 points or the x spread collapses.
SplineModel fit_spline(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                       int df = 4);

/// Local linear regression with tricube weights; the bandwidth at each
/// grid point covers a `span` share of the data.
Eigen::VectorXd local_linear(const Eigen::VectorXd& x,
                             const Eigen::VectorXd& y,
                             const Eigen::VectorXd& grid, double span = 0.75);

/// Per-arm outcome splines along one continuous covariate, their
/// difference with a combined band, and a smoothed effect-score curve.
struct EffectCurve {
  Eigen::VectorXd grid;
  Eigen::VectorXd fit1, se1;  // treated arm
  Eigen::VectorXd fit0, se0;  // control arm
  Eigen::VectorXd effect, effect_se;
  Eigen::VectorXd phi_smooth;
};

EffectCurve effect_curve(const Dataset& ds, const Eigen::VectorXd& phi,
                         const std::string& covariate, int df = 4,
                         double span = 0.75, int grid_size = 100);

/// Same, restricted to a row subset (used for stratified panels).
EffectCurve effect_curve_rows(const Dataset& ds, const Eigen::VectorXd& phi,
                              const std::string& covariate,
                              const std::vector<Eigen::Index>& rows,
                              int df = 4, double span = 0.75,
                              int grid_size = 100);

/// A rendered figure: a standalone SVG plus the numbers behind it.
struct Figure {
  std::string id;
  std::string title;
  std::string svg;
  nlohmann::ordered_json data;
};

/// Writes <dir>/<id>.svg and <dir>/<id>.json; returns the two paths.
std::vector<std::string> write_figure(const Figure& fig,
                                      const std::string& dir);

Figure render_group_outcomes(const std::string& id, const std::string& title,
                             const std::vector<GroupEffect>& groups);
Figure render_group_effects(const std::string& id, const std::string& title,
                            const std::vector<GroupEffect>& groups);
Figure render_curve_outcomes(const std::string& id, const std::string& title,
                             const std::string& x_label,
                             const EffectCurve& curve);
Figure render_curve_effects(const std::string& id, const std::string& title,
                            const std::string& x_label,
                            const EffectCurve& curve);

/// One effect curve per stratum of a second covariate, on one panel.
Figure render_curve_effects_stratified(
    const std::string& id, const std::string& title,
    const std::string& x_label,
    const std::vector<std::pair<std::string, EffectCurve>>& strata);

/// Degenerate-input stand-in so the figure manifest stays complete.
Figure render_placeholder(const std::string& id, const std::string& title,
                          const std::string& note);

/// Data-review figures.
Figure render_outcome_by_arm(const std::string& id, const Dataset& ds);
Figure render_missingness(const std::string& id,
                          const std::vector<std::string>& names,
                          const Eigen::VectorXd& fractions);
Figure render_association_heatmap(const std::string& id,
                                  const std::vector<std::string>& names,
                                  const Eigen::MatrixXd& values);
Figure render_dendrogram(const std::string& id, const Dendrogram& tree);

/// Importance figures.
Figure render_importance_bars(const std::string& id,
                              const std::vector<std::string>& names,
                              const Eigen::VectorXd& vimp,
                              const std::vector<int>& order, int top_k);
Figure render_stability_box(const std::string& id,
                            const std::vector<std::string>& names,
                            const Eigen::MatrixXd& vimp_samples,
                            const std::vector<int>& order, int top_k);

}  // namespace watch
