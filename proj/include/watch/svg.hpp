#pragma once

#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace watch::svg {

/// Fixed-precision number formatting so rendered output is identical
/// across platforms and runs.
std::string fmt(double v);

std::string escape(const std::string& text);

/// "Nice" tick positions covering [lo, hi] (1/2/5 ladder).
std::vector<double> nice_ticks(double lo, double hi, int target = 5);

/// A single x/y panel with margins, linear scales, and primitive
/// shapes.  Categorical axes map level i to coordinate i.
class Plot {
 public:
  Plot(double width, double height, std::string title,
       std::string x_label, std::string y_label);

  void set_x_range(double lo, double hi);
  void set_y_range(double lo, double hi);
  void set_x_categories(const std::vector<std::string>& labels);
  void set_y_categories(const std::vector<std::string>& labels);

  // Expand a range to cover data, keeping any previous extent.
  void include_x(double v);
  void include_y(double v);

  double px(double x) const;  // data -> pixel
  double py(double y) const;

  void add_line(const Eigen::VectorXd& xs, const Eigen::VectorXd& ys,
                const std::string& color, double width = 1.5,
                bool dashed = false);
  void add_band(const Eigen::VectorXd& xs, const Eigen::VectorXd& lo,
                const Eigen::VectorXd& hi, const std::string& color,
                double opacity = 0.18);
  void add_point(double x, double y, double r, const std::string& color,
                 bool filled = true);
  void add_errorbar(double x, double lo, double hi, const std::string& color,
                    double cap = 4);
  void add_marker_x(double x, double y, double size,
                    const std::string& color);
  void add_hline(double y, const std::string& color, bool dashed = true);
  void add_cell(double x0, double x1, double y0, double y1,
                const std::string& fill);
  void add_cell_text(double x, double y, const std::string& text,
                     const std::string& color);
  void add_segment(double x0, double y0, double x1, double y1,
                   const std::string& color, double width = 1.0);
  void add_legend(const std::vector<std::pair<std::string, std::string>>&
                      entries);  // (label, color)

  /// Serialize; draws axes, ticks, and labels around the content.
  std::string finish();

 private:
  double width_, height_;
  std::string title_, x_label_, y_label_;
  double ml_ = 64, mr_ = 18, mt_ = 40, mb_ = 52;
  double x_lo_ = 0, x_hi_ = 1, y_lo_ = 0, y_hi_ = 1;
  bool x_set_ = false, y_set_ = false;
  std::vector<std::string> x_categories_;
  std::vector<std::string> y_categories_;
  std::ostringstream body_;
  std::vector<std::pair<std::string, std::string>> legend_;
};

/// Linear grey -> blue ramp for heatmap cells, v in [0,1].
std::string heat_color(double v);

}  // namespace watch::svg
