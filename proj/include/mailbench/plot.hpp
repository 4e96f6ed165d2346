#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "mailbench/records.hpp"

namespace mailbench {

// Byte-deterministic SVG line plots: x = expert queries on a log scale,
// y = mean Nash gap with a +-1 std band per algorithm. No plotting
// dependency, no randomness, fixed number formatting.

namespace plot_detail {

struct SeriesPoint {
  double queries = 0.0;
  double mean = 0.0;
  double stddev = 0.0;
};

using Series = std::map<std::string, std::vector<SeriesPoint>>;  // algorithm -> points

inline std::string coord(double v) { return format_double(v, "%.2f"); }

inline const char* series_color(size_t index) {
  static constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c",
                                             "#9467bd", "#ff7f0e", "#8c564b"};
  return kPalette[index % (sizeof(kPalette) / sizeof(kPalette[0]))];
}

}  // namespace plot_detail

inline std::string render_plot_svg(const std::string& env,
                                   const plot_detail::Series& series) {
  const double width = 720, height = 480;
  const double ml = 70, mr = 160, mt = 40, mb = 55;
  const double pw = width - ml - mr, ph = height - mt - mb;

  double qmin = kInf, qmax = -kInf, ymax = 0.0;
  for (const auto& [name, points] : series)
    for (const auto& p : points) {
      qmin = std::min(qmin, p.queries);
      qmax = std::max(qmax, p.queries);
      ymax = std::max(ymax, p.mean + p.stddev);
    }
  const bool empty = series.empty();
  if (empty) {
    qmin = 1.0;
    qmax = 10.0;
  }
  qmin = std::max(qmin, 1.0);
  qmax = std::max(qmax, qmin * 1.0000001);
  if (ymax <= 0.0) ymax = 1.0;
  ymax *= 1.05;

  const double lx0 = std::log10(qmin), lx1 = std::log10(qmax);
  auto sx = [&](double q) { return ml + (std::log10(std::max(q, 1.0)) - lx0) / (lx1 - lx0) * pw; };
  auto sy = [&](double y) { return mt + ph - std::clamp(y, 0.0, ymax) / ymax * ph; };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"720\" height=\"480\" "
         "viewBox=\"0 0 720 480\">\n";
  svg += "<rect width=\"720\" height=\"480\" fill=\"white\"/>\n";
  svg += "<text x=\"" + plot_detail::coord(ml + pw / 2) + "\" y=\"22\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"15\">" + env + "</text>\n";

  // axes
  svg += "<line x1=\"" + plot_detail::coord(ml) + "\" y1=\"" + plot_detail::coord(mt + ph) +
         "\" x2=\"" + plot_detail::coord(ml + pw) + "\" y2=\"" + plot_detail::coord(mt + ph) +
         "\" stroke=\"black\"/>\n";
  svg += "<line x1=\"" + plot_detail::coord(ml) + "\" y1=\"" + plot_detail::coord(mt) +
         "\" x2=\"" + plot_detail::coord(ml) + "\" y2=\"" + plot_detail::coord(mt + ph) +
         "\" stroke=\"black\"/>\n";

  // x ticks at powers of ten
  for (int e = static_cast<int>(std::floor(lx0)); e <= static_cast<int>(std::ceil(lx1)); ++e) {
    const double q = std::pow(10.0, e);
    if (q < qmin / 1.001 || q > qmax * 1.001) continue;
    const double x = sx(q);
    svg += "<line x1=\"" + plot_detail::coord(x) + "\" y1=\"" + plot_detail::coord(mt + ph) +
           "\" x2=\"" + plot_detail::coord(x) + "\" y2=\"" + plot_detail::coord(mt + ph + 5) +
           "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + plot_detail::coord(x) + "\" y=\"" + plot_detail::coord(mt + ph + 20) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">1e" +
           std::to_string(e) + "</text>\n";
  }
  // y ticks
  for (int i = 0; i <= 5; ++i) {
    const double y = ymax * i / 5.0;
    svg += "<line x1=\"" + plot_detail::coord(ml - 5) + "\" y1=\"" + plot_detail::coord(sy(y)) +
           "\" x2=\"" + plot_detail::coord(ml) + "\" y2=\"" + plot_detail::coord(sy(y)) +
           "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + plot_detail::coord(ml - 9) + "\" y=\"" +
           plot_detail::coord(sy(y) + 4) + "\" text-anchor=\"end\" font-family=\"sans-serif\" "
           "font-size=\"11\">" + format_double(y, "%.3g") + "</text>\n";
  }
  svg += "<text x=\"" + plot_detail::coord(ml + pw / 2) + "\" y=\"" +
         plot_detail::coord(height - 12) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">expert queries"
         "</text>\n";
  svg += "<text x=\"18\" y=\"" + plot_detail::coord(mt + ph / 2) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
         "transform=\"rotate(-90 18 " + plot_detail::coord(mt + ph / 2) + ")\">Nash gap</text>\n";

  size_t color_index = 0;
  for (const auto& [name, points] : series) {
    const std::string color = plot_detail::series_color(color_index++);
    if (points.size() >= 2) {
      std::string band = "M";
      for (const auto& p : points)
        band += " " + plot_detail::coord(sx(p.queries)) + " " +
                plot_detail::coord(sy(p.mean + p.stddev));
      for (auto it = points.rbegin(); it != points.rend(); ++it)
        band += " L " + plot_detail::coord(sx(it->queries)) + " " +
                plot_detail::coord(sy(std::max(0.0, it->mean - it->stddev)));
      band += " Z";
      svg += "<path d=\"" + band + "\" fill=\"" + color + "\" fill-opacity=\"0.15\" "
             "stroke=\"none\"/>\n";
    }
    std::string line;
    for (const auto& p : points)
      line += (line.empty() ? "" : " ") + plot_detail::coord(sx(p.queries)) + "," +
              plot_detail::coord(sy(p.mean));
    svg += "<polyline points=\"" + line + "\" fill=\"none\" stroke=\"" + color +
           "\" stroke-width=\"2\"/>\n";
    for (const auto& p : points)
      svg += "<circle cx=\"" + plot_detail::coord(sx(p.queries)) + "\" cy=\"" +
             plot_detail::coord(sy(p.mean)) + "\" r=\"2.5\" fill=\"" + color + "\"/>\n";
  }

  // legend
  double ly = mt + 10;
  color_index = 0;
  for (const auto& [name, points] : series) {
    const std::string color = plot_detail::series_color(color_index++);
    const double lx = ml + pw + 12;
    svg += "<line x1=\"" + plot_detail::coord(lx) + "\" y1=\"" + plot_detail::coord(ly) +
           "\" x2=\"" + plot_detail::coord(lx + 22) + "\" y2=\"" + plot_detail::coord(ly) +
           "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    svg += "<text x=\"" + plot_detail::coord(lx + 28) + "\" y=\"" + plot_detail::coord(ly + 4) +
           "\" font-family=\"sans-serif\" font-size=\"12\">" + name + "</text>\n";
    ly += 18;
  }
  svg += "</svg>\n";
  return svg;
}

// Groups the records per environment and renders one SVG each; an empty
// record list yields one empty-axes SVG keyed by "empty".
inline std::vector<std::pair<std::string, std::string>> render_plots(
    const std::vector<ExperimentRecord>& records) {
  std::map<std::string, std::map<std::string, std::map<uint64_t, Vec>>> grouped;
  for (const auto& r : records) grouped[r.env][r.algorithm][r.expert_queries].push_back(r.nash_gap);

  std::vector<std::pair<std::string, std::string>> out;
  if (grouped.empty()) {
    out.emplace_back("empty", render_plot_svg("empty", {}));
    return out;
  }
  for (const auto& [env, algos] : grouped) {
    plot_detail::Series series;
    for (const auto& [algo, by_queries] : algos) {
      std::vector<plot_detail::SeriesPoint> points;
      for (const auto& [queries, gaps] : by_queries) {
        double mean = 0.0;
        for (double g : gaps) mean += g;
        mean /= static_cast<double>(gaps.size());
        double var = 0.0;
        for (double g : gaps) var += (g - mean) * (g - mean);
        var /= static_cast<double>(gaps.size());
        points.push_back({static_cast<double>(queries), mean, std::sqrt(var)});
      }
      series[algo] = std::move(points);
    }
    out.emplace_back(env, render_plot_svg(env, series));
  }
  return out;
}

}  // namespace mailbench
