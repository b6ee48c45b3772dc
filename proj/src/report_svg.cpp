#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

#include "topopred/errors.hpp"
#include "topopred/eval.hpp"

namespace topopred {

namespace {

constexpr int kPanelWidth = 640;
constexpr int kPanelHeight = 200;
constexpr int kMarginLeft = 64;
constexpr int kMarginRight = 16;
constexpr int kMarginTop = 28;
constexpr int kMarginBottom = 34;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

struct Series {
  std::vector<double> fractions, median, q25, q75;
};

void draw_panel(std::ostringstream& svg, const std::string& metric,
                const std::map<std::string, Series>& systems, int y_offset) {
  double fmin = 1e300, fmax = -1e300, vmax = 0.0;
  for (const auto& [system, s] : systems) {
    for (double f : s.fractions) {
      fmin = std::min(fmin, f);
      fmax = std::max(fmax, f);
    }
    for (double v : s.q75) vmax = std::max(vmax, v);
  }
  if (fmax <= fmin) fmax = fmin + 1.0;
  if (vmax <= 0.0) vmax = 1.0;
  vmax *= 1.05;

  const double plot_w = kPanelWidth - kMarginLeft - kMarginRight;
  const double plot_h = kPanelHeight - kMarginTop - kMarginBottom;
  const auto sx = [&](double f) {
    return kMarginLeft + plot_w * (f - fmin) / (fmax - fmin);
  };
  const auto sy = [&](double v) {
    return y_offset + kMarginTop + plot_h * (1.0 - v / vmax);
  };

  svg << "<rect x='" << kMarginLeft << "' y='" << (y_offset + kMarginTop) << "' width='"
      << num(plot_w) << "' height='" << num(plot_h)
      << "' fill='none' stroke='#888' stroke-width='1'/>\n";
  svg << "<text x='" << kMarginLeft << "' y='" << (y_offset + kMarginTop - 8)
      << "' font-size='13' font-family='sans-serif'>" << metric
      << " (lower is better)</text>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = vmax * i / 4.0;
    svg << "<text x='" << (kMarginLeft - 6) << "' y='" << num(sy(v) + 4)
        << "' font-size='10' text-anchor='end' font-family='sans-serif'>" << num(v)
        << "</text>\n";
  }
  for (const auto& [system, s] : systems) {
    const std::string color = system == "topology" ? "#2a8c2a" : "#c23a3a";
    const double dx = system == "topology" ? 3.0 : -3.0;  // unclutter overlaps
    std::ostringstream points;
    for (std::size_t i = 0; i < s.fractions.size(); ++i)
      points << num(sx(s.fractions[i]) + dx) << ',' << num(sy(s.median[i])) << ' ';
    svg << "<polyline points='" << points.str() << "' fill='none' stroke='" << color
        << "' stroke-width='1.5'/>\n";
    for (std::size_t i = 0; i < s.fractions.size(); ++i) {
      const double x = sx(s.fractions[i]) + dx;
      svg << "<line x1='" << num(x) << "' y1='" << num(sy(s.q25[i])) << "' x2='" << num(x)
          << "' y2='" << num(sy(s.q75[i])) << "' stroke='" << color
          << "' stroke-width='1'/>\n";
      svg << "<circle cx='" << num(x) << "' cy='" << num(sy(s.median[i]))
          << "' r='2.5' fill='" << color << "'/>\n";
    }
  }
  svg << "<text x='" << (kMarginLeft + plot_w / 2) << "' y='"
      << (y_offset + kPanelHeight - 8)
      << "' font-size='11' text-anchor='middle' font-family='sans-serif'>observed "
         "fraction</text>\n";
}

}  // namespace

std::string report_to_svg(const MetricReport& report) {
  const std::vector<std::string> metrics = {"ade", "amd", "kld"};
  std::ostringstream svg;
  const int height = kPanelHeight * static_cast<int>(metrics.size()) + 24;
  svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kPanelWidth << "' height='"
      << height << "'>\n";
  svg << "<text x='" << kMarginLeft << "' y='16' font-size='12' font-family='sans-serif'>"
      << "<tspan fill='#2a8c2a'>topology-informed</tspan>  vs  "
      << "<tspan fill='#c23a3a'>naive</tspan>, median with 25/75% bars</text>\n";
  for (std::size_t m = 0; m < metrics.size(); ++m) {
    std::map<std::string, Series> systems;
    for (const AggregateRow& row : report.aggregates) {
      if (row.metric != metrics[m]) continue;
      Series& s = systems[row.system];
      s.fractions.push_back(row.fraction);
      s.median.push_back(row.median);
      s.q25.push_back(row.q25);
      s.q75.push_back(row.q75);
    }
    draw_panel(svg, metrics[m], systems, 24 + static_cast<int>(m) * kPanelHeight);
  }
  svg << "</svg>\n";
  return svg.str();
}

void write_report_svg(const MetricReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write svg file: " + path);
  out << report_to_svg(report);
}

}  // namespace topopred
