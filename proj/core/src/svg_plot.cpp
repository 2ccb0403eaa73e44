#include "decoupler/svg_plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "decoupler/experiment.hpp"

namespace decoupler {

namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 440.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 170.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 50.0;
constexpr double kFloor = 1e-10;

constexpr std::array<const char*, 6> kColors = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
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

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

struct Axes {
  double x_max = 1.0;
  double log_min = -10.0;
  double log_max = 0.0;

  double x(double it) const { return kLeft + (kWidth - kLeft - kRight) * it / x_max; }
  double y(double infidelity) const {
    const double l = std::log10(std::clamp(infidelity, kFloor, 1.0));
    return kTop + (kHeight - kTop - kBottom) * (log_max - l) / (log_max - log_min);
  }
};

}  // namespace

std::string render_training_svg(const std::vector<TraceGroup>& groups, const std::string& title) {
  struct Prepared {
    QuartileBand band;
    std::vector<double> switches;
  };
  std::vector<Prepared> prepared;
  Axes axes;
  double lowest = 1.0;
  std::size_t longest = 1;
  for (const auto& g : groups) {
    std::vector<std::vector<double>> series;
    std::vector<std::vector<double>> switch_points;
    for (const auto& t : g.traces) {
      std::vector<double> s;
      for (const auto& row : t.rows()) s.push_back(std::clamp(1.0 - row.fidelity, kFloor, 1.0));
      if (s.empty()) continue;
      lowest = std::min(lowest, *std::min_element(s.begin(), s.end()));
      longest = std::max(longest, s.size());
      series.push_back(std::move(s));
      const auto segs = t.segments();
      for (std::size_t k = 1; k < segs.size(); ++k) {
        if (switch_points.size() < k) switch_points.resize(k);
        switch_points[k - 1].push_back(static_cast<double>(segs[k].first));
      }
    }
    Prepared p;
    if (!series.empty()) p.band = quartile_band(series);
    for (const auto& pts : switch_points) p.switches.push_back(quantile(pts, 0.5));
    prepared.push_back(std::move(p));
  }
  axes.x_max = static_cast<double>(longest - 1 > 0 ? longest - 1 : 1);
  axes.log_min = std::floor(std::log10(lowest));
  if (axes.log_min >= axes.log_max) axes.log_min = axes.log_max - 1.0;

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << num(kWidth / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
      << "</text>\n";

  const double x0 = kLeft;
  const double x1 = kWidth - kRight;
  const double y0 = kTop;
  const double y1 = kHeight - kBottom;
  out << "<rect x=\"" << num(x0) << "\" y=\"" << num(y0) << "\" width=\"" << num(x1 - x0) << "\" height=\""
      << num(y1 - y0) << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int e = static_cast<int>(axes.log_min); e <= static_cast<int>(axes.log_max); ++e) {
    const double y = axes.y(std::pow(10.0, e));
    out << "<line x1=\"" << num(x0) << "\" y1=\"" << num(y) << "\" x2=\"" << num(x1) << "\" y2=\"" << num(y)
        << "\" stroke=\"#ddd\"/>\n";
    out << "<text x=\"" << num(x0 - 6) << "\" y=\"" << num(y + 4) << "\" text-anchor=\"end\">1e" << e << "</text>\n";
  }
  for (int k = 0; k <= 4; ++k) {
    const double it = axes.x_max * k / 4.0;
    out << "<text x=\"" << num(axes.x(it)) << "\" y=\"" << num(y1 + 18) << "\" text-anchor=\"middle\">"
        << static_cast<long>(std::lround(it)) << "</text>\n";
  }
  out << "<text x=\"" << num((x0 + x1) / 2) << "\" y=\"" << num(kHeight - 10)
      << "\" text-anchor=\"middle\">iteration</text>\n";
  out << "<text x=\"16\" y=\"" << num((y0 + y1) / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << num((y0 + y1) / 2) << ")\">1 - F</text>\n";

  for (std::size_t gi = 0; gi < prepared.size(); ++gi) {
    const auto& band = prepared[gi].band;
    const char* color = kColors[gi % kColors.size()];
    if (!band.median.empty()) {
      std::ostringstream area;
      for (std::size_t i = 0; i < band.q3.size(); ++i) {
        area << (i ? " L" : "M") << num(axes.x(static_cast<double>(i))) << ',' << num(axes.y(band.q3[i]));
      }
      for (std::size_t i = band.q1.size(); i-- > 0;) {
        area << " L" << num(axes.x(static_cast<double>(i))) << ',' << num(axes.y(band.q1[i]));
      }
      out << "<path d=\"" << area.str() << " Z\" fill=\"" << color << "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
      out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t i = 0; i < band.median.size(); ++i) {
        out << num(axes.x(static_cast<double>(i))) << ',' << num(axes.y(band.median[i])) << ' ';
      }
      out << "\"/>\n";
    }
    for (double s : prepared[gi].switches) {
      out << "<line x1=\"" << num(axes.x(s)) << "\" y1=\"" << num(y0) << "\" x2=\"" << num(axes.x(s)) << "\" y2=\""
          << num(y1) << "\" stroke=\"" << color << "\" stroke-dasharray=\"5,4\"/>\n";
    }
    const double ly = y0 + 16.0 + 18.0 * static_cast<double>(gi);
    out << "<line x1=\"" << num(x1 + 12) << "\" y1=\"" << num(ly - 4) << "\" x2=\"" << num(x1 + 32) << "\" y2=\""
        << num(ly - 4) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << num(x1 + 38) << "\" y=\"" << num(ly) << "\">" << escape(groups[gi].label) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace decoupler
