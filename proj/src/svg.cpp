#include "watch/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <utility>

namespace watch::svg {

std::string fmt(double v) {
  if (!std::isfinite(v)) return "0";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string escape(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::vector<double> nice_ticks(double lo, double hi, int target) {
  if (!(hi > lo)) return {lo};
  double raw = (hi - lo) / std::max(1, target);
  double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double norm = raw / mag;
  double step = (norm < 1.5 ? 1.0 : norm < 3.5 ? 2.0 : norm < 7.5 ? 5.0 : 10.0) * mag;
  double first = std::ceil(lo / step) * step;
  std::vector<double> ticks;
  for (double t = first; t <= hi + step * 1e-9; t += step) {
    double v = (std::abs(t) < step * 1e-9) ? 0.0 : t;
    ticks.push_back(v);
  }
  return ticks;
}

std::string heat_color(double v) {
  v = std::clamp(v, 0.0, 1.0);
  // grey (240,240,244) -> blue (26,74,158)
  int r = static_cast<int>(std::lround(240 + (26 - 240) * v));
  int g = static_cast<int>(std::lround(240 + (74 - 240) * v));
  int b = static_cast<int>(std::lround(244 + (158 - 244) * v));
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}

Plot::Plot(double width, double height, std::string title,
           std::string x_label, std::string y_label)
    : width_(width),
      height_(height),
      title_(std::move(title)),
      x_label_(std::move(x_label)),
      y_label_(std::move(y_label)) {}

void Plot::set_x_range(double lo, double hi) {
  if (!(hi > lo)) {
    double pad = (lo == 0) ? 1.0 : std::abs(lo) * 0.1;
    lo -= pad;
    hi += pad;
  }
  x_lo_ = lo;
  x_hi_ = hi;
  x_set_ = true;
}

void Plot::set_y_range(double lo, double hi) {
  if (!(hi > lo)) {
    double pad = (lo == 0) ? 1.0 : std::abs(lo) * 0.1;
    lo -= pad;
    hi += pad;
  }
  y_lo_ = lo;
  y_hi_ = hi;
  y_set_ = true;
}

void Plot::set_x_categories(const std::vector<std::string>& labels) {
  x_categories_ = labels;
  set_x_range(-0.6, static_cast<double>(labels.size()) - 0.4);
}

void Plot::set_y_categories(const std::vector<std::string>& labels) {
  y_categories_ = labels;
  set_y_range(-0.6, static_cast<double>(labels.size()) - 0.4);
}

void Plot::include_x(double v) {
  if (!std::isfinite(v)) return;
  if (!x_set_) {
    x_lo_ = x_hi_ = v;
    x_set_ = true;
  } else {
    x_lo_ = std::min(x_lo_, v);
    x_hi_ = std::max(x_hi_, v);
  }
}

void Plot::include_y(double v) {
  if (!std::isfinite(v)) return;
  if (!y_set_) {
    y_lo_ = y_hi_ = v;
    y_set_ = true;
  } else {
    y_lo_ = std::min(y_lo_, v);
    y_hi_ = std::max(y_hi_, v);
  }
}

double Plot::px(double x) const {
  double span = x_hi_ - x_lo_;
  if (span <= 0) span = 1;
  return ml_ + (x - x_lo_) / span * (width_ - ml_ - mr_);
}

double Plot::py(double y) const {
  double span = y_hi_ - y_lo_;
  if (span <= 0) span = 1;
  return height_ - mb_ - (y - y_lo_) / span * (height_ - mt_ - mb_);
}

void Plot::add_line(const Eigen::VectorXd& xs, const Eigen::VectorXd& ys,
                    const std::string& color, double width, bool dashed) {
  body_ << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\""
        << fmt(width) << "\"";
  if (dashed) body_ << " stroke-dasharray=\"6 4\"";
  body_ << " points=\"";
  for (Eigen::Index i = 0; i < xs.size(); ++i) {
    if (!std::isfinite(ys[i])) continue;
    body_ << fmt(px(xs[i])) << ',' << fmt(py(ys[i])) << ' ';
  }
  body_ << "\"/>\n";
}

void Plot::add_band(const Eigen::VectorXd& xs, const Eigen::VectorXd& lo,
                    const Eigen::VectorXd& hi, const std::string& color,
                    double opacity) {
  body_ << "<polygon fill=\"" << color << "\" fill-opacity=\"" << fmt(opacity)
        << "\" stroke=\"none\" points=\"";
  for (Eigen::Index i = 0; i < xs.size(); ++i)
    body_ << fmt(px(xs[i])) << ',' << fmt(py(hi[i])) << ' ';
  for (Eigen::Index i = xs.size(); i-- > 0;)
    body_ << fmt(px(xs[i])) << ',' << fmt(py(lo[i])) << ' ';
  body_ << "\"/>\n";
}

void Plot::add_point(double x, double y, double r, const std::string& color,
                     bool filled) {
  if (!std::isfinite(y)) return;
  body_ << "<circle cx=\"" << fmt(px(x)) << "\" cy=\"" << fmt(py(y))
        << "\" r=\"" << fmt(r) << "\" stroke=\"" << color << "\" fill=\""
        << (filled ? color : std::string("white")) << "\"/>\n";
}

void Plot::add_errorbar(double x, double lo, double hi,
                        const std::string& color, double cap) {
  if (!std::isfinite(lo) || !std::isfinite(hi)) return;
  double cx = px(x);
  body_ << "<line x1=\"" << fmt(cx) << "\" y1=\"" << fmt(py(lo)) << "\" x2=\""
        << fmt(cx) << "\" y2=\"" << fmt(py(hi)) << "\" stroke=\"" << color
        << "\" stroke-width=\"1.2\"/>\n";
  for (double v : {lo, hi}) {
    body_ << "<line x1=\"" << fmt(cx - cap) << "\" y1=\"" << fmt(py(v))
          << "\" x2=\"" << fmt(cx + cap) << "\" y2=\"" << fmt(py(v))
          << "\" stroke=\"" << color << "\" stroke-width=\"1.2\"/>\n";
  }
}

void Plot::add_marker_x(double x, double y, double size,
                        const std::string& color) {
  if (!std::isfinite(y)) return;
  double cx = px(x), cy = py(y), s = size;
  body_ << "<line x1=\"" << fmt(cx - s) << "\" y1=\"" << fmt(cy - s)
        << "\" x2=\"" << fmt(cx + s) << "\" y2=\"" << fmt(cy + s)
        << "\" stroke=\"" << color << "\" stroke-width=\"1.6\"/>\n"
        << "<line x1=\"" << fmt(cx - s) << "\" y1=\"" << fmt(cy + s)
        << "\" x2=\"" << fmt(cx + s) << "\" y2=\"" << fmt(cy - s)
        << "\" stroke=\"" << color << "\" stroke-width=\"1.6\"/>\n";
}

void Plot::add_hline(double y, const std::string& color, bool dashed) {
  body_ << "<line x1=\"" << fmt(ml_) << "\" y1=\"" << fmt(py(y)) << "\" x2=\""
        << fmt(width_ - mr_) << "\" y2=\"" << fmt(py(y)) << "\" stroke=\""
        << color << "\" stroke-width=\"1\"";
  if (dashed) body_ << " stroke-dasharray=\"4 4\"";
  body_ << "/>\n";
}

void Plot::add_cell(double x0, double x1, double y0, double y1,
                    const std::string& fill) {
  double X0 = px(x0), X1 = px(x1), Y0 = py(y1), Y1 = py(y0);
  body_ << "<rect x=\"" << fmt(X0) << "\" y=\"" << fmt(Y0) << "\" width=\""
        << fmt(X1 - X0) << "\" height=\"" << fmt(Y1 - Y0) << "\" fill=\""
        << fill << "\"/>\n";
}

void Plot::add_cell_text(double x, double y, const std::string& text,
                         const std::string& color) {
  body_ << "<text x=\"" << fmt(px(x)) << "\" y=\"" << fmt(py(y) + 3)
        << "\" font-size=\"9\" text-anchor=\"middle\" fill=\"" << color
        << "\">" << escape(text) << "</text>\n";
}

void Plot::add_segment(double x0, double y0, double x1, double y1,
                       const std::string& color, double width) {
  body_ << "<line x1=\"" << fmt(px(x0)) << "\" y1=\"" << fmt(py(y0))
        << "\" x2=\"" << fmt(px(x1)) << "\" y2=\"" << fmt(py(y1))
        << "\" stroke=\"" << color << "\" stroke-width=\"" << fmt(width)
        << "\"/>\n";
}

void Plot::add_legend(
    const std::vector<std::pair<std::string, std::string>>& entries) {
  legend_ = entries;
}

std::string Plot::finish() {
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(width_)
      << "\" height=\"" << fmt(height_) << "\" viewBox=\"0 0 " << fmt(width_)
      << ' ' << fmt(height_) << "\" font-family=\"Helvetica, Arial, sans-serif\">\n";
  out << "<rect width=\"" << fmt(width_) << "\" height=\"" << fmt(height_)
      << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << fmt(width_ / 2) << "\" y=\"22\" font-size=\"14\" "
         "text-anchor=\"middle\" font-weight=\"bold\">"
      << escape(title_) << "</text>\n";

  // frame
  out << "<rect x=\"" << fmt(ml_) << "\" y=\"" << fmt(mt_) << "\" width=\""
      << fmt(width_ - ml_ - mr_) << "\" height=\"" << fmt(height_ - mt_ - mb_)
      << "\" fill=\"none\" stroke=\"#444444\" stroke-width=\"1\"/>\n";

  // x axis
  if (!x_categories_.empty()) {
    for (size_t i = 0; i < x_categories_.size(); ++i) {
      double cx = px(static_cast<double>(i));
      out << "<text x=\"" << fmt(cx) << "\" y=\"" << fmt(height_ - mb_ + 16)
          << "\" font-size=\"10\" text-anchor=\"middle\">"
          << escape(x_categories_[i]) << "</text>\n";
    }
  } else {
    for (double t : nice_ticks(x_lo_, x_hi_)) {
      double cx = px(t);
      out << "<line x1=\"" << fmt(cx) << "\" y1=\"" << fmt(height_ - mb_)
          << "\" x2=\"" << fmt(cx) << "\" y2=\"" << fmt(height_ - mb_ + 4)
          << "\" stroke=\"#444444\"/>\n";
      out << "<text x=\"" << fmt(cx) << "\" y=\"" << fmt(height_ - mb_ + 16)
          << "\" font-size=\"10\" text-anchor=\"middle\">" << fmt(t)
          << "</text>\n";
    }
  }
  // y axis
  if (!y_categories_.empty()) {
    for (size_t i = 0; i < y_categories_.size(); ++i) {
      double cy = py(static_cast<double>(i));
      out << "<text x=\"" << fmt(ml_ - 7) << "\" y=\"" << fmt(cy + 3)
          << "\" font-size=\"10\" text-anchor=\"end\">"
          << escape(y_categories_[i]) << "</text>\n";
    }
  } else {
    for (double t : nice_ticks(y_lo_, y_hi_)) {
      double cy = py(t);
      out << "<line x1=\"" << fmt(ml_ - 4) << "\" y1=\"" << fmt(cy)
          << "\" x2=\"" << fmt(ml_) << "\" y2=\"" << fmt(cy)
          << "\" stroke=\"#444444\"/>\n";
      out << "<text x=\"" << fmt(ml_ - 7) << "\" y=\"" << fmt(cy + 3)
          << "\" font-size=\"10\" text-anchor=\"end\">" << fmt(t)
          << "</text>\n";
    }
  }
  out << "<text x=\"" << fmt((ml_ + width_ - mr_) / 2) << "\" y=\""
      << fmt(height_ - 12) << "\" font-size=\"11\" text-anchor=\"middle\">"
      << escape(x_label_) << "</text>\n";
  out << "<text x=\"16\" y=\"" << fmt((mt_ + height_ - mb_) / 2)
      << "\" font-size=\"11\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << fmt((mt_ + height_ - mb_) / 2) << ")\">" << escape(y_label_)
      << "</text>\n";

  // clip content to the frame
  out << "<clipPath id=\"area\"><rect x=\"" << fmt(ml_) << "\" y=\""
      << fmt(mt_) << "\" width=\"" << fmt(width_ - ml_ - mr_)
      << "\" height=\"" << fmt(height_ - mt_ - mb_)
      << "\"/></clipPath>\n<g clip-path=\"url(#area)\">\n"
      << body_.str() << "</g>\n";

  if (!legend_.empty()) {
    double lx = width_ - mr_ - 150, ly = mt_ + 10;
    for (size_t i = 0; i < legend_.size(); ++i) {
      double y = ly + 16 * static_cast<double>(i);
      out << "<rect x=\"" << fmt(lx) << "\" y=\"" << fmt(y - 8)
          << "\" width=\"12\" height=\"12\" fill=\"" << legend_[i].second
          << "\"/>\n";
      out << "<text x=\"" << fmt(lx + 18) << "\" y=\"" << fmt(y + 2)
          << "\" font-size=\"10\">" << escape(legend_[i].first)
          << "</text>\n";
    }
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace watch::svg
