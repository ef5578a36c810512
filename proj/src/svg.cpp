#include "sflex/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "sflex/error.hpp"

namespace sflex {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

struct Axis {
  bool log;
  double lo, hi;
  double map(double v) const {
    const double t = log ? std::log10(v) : v;
    return (t - lo) / (hi - lo);
  }
};

Axis make_axis(const std::vector<double>& values, bool log) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double v : values) {
    require(!log || v > 0, ErrorKind::invalid_input, "log axis needs positive values");
    const double t = log ? std::log10(v) : v;
    lo = std::min(lo, t);
    hi = std::max(hi, t);
  }
  require(std::isfinite(lo), ErrorKind::invalid_input, "nothing to plot");
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  return {log, lo - pad, hi + pad};
}

std::vector<double> ticks(const Axis& a) {
  std::vector<double> t;
  if (a.log) {
    for (double e = std::ceil(a.lo); e <= a.hi; e += 1) {
      for (int m = 1; m < 10; ++m) {
        const double v = m * std::pow(10.0, e - 1);
        if (std::log10(v) >= a.lo && std::log10(v) <= a.hi && (m == 1 || a.hi - a.lo < 1.5)) t.push_back(v);
      }
      t.push_back(std::pow(10.0, e));
    }
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end()), t.end());
    t.erase(std::remove_if(t.begin(), t.end(),
                           [&](double v) { return std::log10(v) < a.lo || std::log10(v) > a.hi; }),
            t.end());
  } else {
    const double span = a.hi - a.lo;
    const double step = std::pow(10.0, std::floor(std::log10(span / 5)));
    for (double v = std::ceil(a.lo / step) * step; v <= a.hi; v += step) t.push_back(v);
  }
  return t;
}

}  // namespace

void write_svg_plot(std::ostream& os, const std::vector<PlotSeries>& series, const PlotOptions& opt) {
  std::vector<double> xs, ys;
  for (const auto& s : series) {
    require(s.x.size() == s.y.size(), ErrorKind::invalid_input, "series x and y differ in length");
    xs.insert(xs.end(), s.x.begin(), s.x.end());
    ys.insert(ys.end(), s.y.begin(), s.y.end());
  }
  const Axis ax = make_axis(xs, opt.log_x), ay = make_axis(ys, opt.log_y);
  const double left = 70, right = 20, top = 40, bottom = 55;
  const double pw = opt.width - left - right, ph = opt.height - top - bottom;
  auto px = [&](double v) { return left + pw * ax.map(v); };
  auto py = [&](double v) { return top + ph * (1 - ay.map(v)); };

  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opt.width << "\" height=\""
     << opt.height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << opt.width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
     << escape(opt.title) << "</text>\n";
  os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double t : ticks(ax)) {
    const double x = px(t);
    os << "<line x1=\"" << x << "\" y1=\"" << top + ph << "\" x2=\"" << x << "\" y2=\"" << top + ph + 5
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << x << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">" << num(t)
       << "</text>\n";
  }
  for (double t : ticks(ay)) {
    const double y = py(t);
    os << "<line x1=\"" << left - 5 << "\" y1=\"" << y << "\" x2=\"" << left << "\" y2=\"" << y
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << left - 8 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">" << num(t)
       << "</text>\n";
  }
  os << "<text x=\"" << left + pw / 2 << "\" y=\"" << opt.height - 12 << "\" text-anchor=\"middle\">"
     << escape(opt.x_label) << "</text>\n";
  os << "<text x=\"16\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << top + ph / 2 << ")\">" << escape(opt.y_label) << "</text>\n";

  double legend_y = top + 16;
  for (const auto& s : series) {
    os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) os << (i ? " " : "") << px(s.x[i]) << ',' << py(s.y[i]);
    os << "\"/>\n";
    if (s.markers)
      for (std::size_t i = 0; i < s.x.size(); ++i)
        os << "<circle cx=\"" << px(s.x[i]) << "\" cy=\"" << py(s.y[i]) << "\" r=\"3\" fill=\""
           << s.color << "\"/>\n";
    if (!s.label.empty()) {
      os << "<line x1=\"" << left + pw - 150 << "\" y1=\"" << legend_y - 4 << "\" x2=\""
         << left + pw - 130 << "\" y2=\"" << legend_y - 4 << "\" stroke=\"" << s.color
         << "\" stroke-width=\"2\"/>\n";
      os << "<text x=\"" << left + pw - 125 << "\" y=\"" << legend_y << "\">" << escape(s.label)
         << "</text>\n";
      legend_y += 16;
    }
  }
  os << "</svg>\n";
}

}  // namespace sflex
