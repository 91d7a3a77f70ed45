#pragma once
// Plot-ready data (x,y,series CSV) and static SVG renderings of sweep results.

#include <iosfwd>
#include <string>
#include <vector>

#include "waterjudge/analysis.hpp"
#include "waterjudge/harness.hpp"

namespace waterjudge {

struct PlotSeries {
  enum class Style { scatter, line };
  std::string name;
  Style style = Style::scatter;
  std::vector<Point2D> points;
};

struct PlotLabels {
  std::string title;
  std::string x = "F0.5";
  std::string y = "s_q";
};

// One scatter series of (f05, s_q) per distinct g, in ascending g.
std::vector<PlotSeries> frontier_series(const std::vector<SweepRow>& rows);
// (delta, mean_len) per distinct g.
std::vector<PlotSeries> length_series(const std::vector<SweepRow>& rows);
PlotSeries polyline_series(std::string name, std::vector<Point2D> points);
// Curve sampled at kTransferSamples points over [x_lo, x_hi].
PlotSeries curve_series(std::string name, const TanhCurve& curve, double x_lo, double x_hi);

void write_plot_csv(std::ostream& out, const std::vector<PlotSeries>& series);
void write_svg(std::ostream& out, const std::vector<PlotSeries>& series, const PlotLabels& labels);

}  // namespace waterjudge
