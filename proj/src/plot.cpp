#include "waterjudge/plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "waterjudge/errors.hpp"

namespace waterjudge {

namespace {

std::string g_label(double g) { return fmt::format("g={}", g); }

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

constexpr std::array<const char*, 10> kPalette{"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                               "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

}  // namespace

std::vector<PlotSeries> frontier_series(const std::vector<SweepRow>& rows) {
  std::map<double, PlotSeries> by_g;
  for (const auto& r : rows) {
    auto& s = by_g[r.point.g];
    s.name = g_label(r.point.g);
    s.points.push_back({r.f05, r.s_q});
  }
  std::vector<PlotSeries> out;
  for (auto& [g, s] : by_g) out.push_back(std::move(s));
  return out;
}

std::vector<PlotSeries> length_series(const std::vector<SweepRow>& rows) {
  std::map<double, PlotSeries> by_g;
  for (const auto& r : rows) {
    auto& s = by_g[r.point.g];
    s.name = g_label(r.point.g);
    s.style = PlotSeries::Style::line;
    s.points.push_back({r.point.delta, r.mean_len});
  }
  std::vector<PlotSeries> out;
  for (auto& [g, s] : by_g) {
    std::stable_sort(s.points.begin(), s.points.end(), [](Point2D a, Point2D b) { return a.x < b.x; });
    out.push_back(std::move(s));
  }
  return out;
}

PlotSeries polyline_series(std::string name, std::vector<Point2D> points) {
  return {std::move(name), PlotSeries::Style::line, std::move(points)};
}

PlotSeries curve_series(std::string name, const TanhCurve& curve, double x_lo, double x_hi) {
  if (!(x_hi > x_lo)) throw DomainError("curve_series: empty x-range");
  std::vector<Point2D> pts;
  pts.reserve(kTransferSamples);
  for (std::size_t k = 0; k < kTransferSamples; ++k) {
    const double x = x_lo + (x_hi - x_lo) * static_cast<double>(k) / (kTransferSamples - 1);
    pts.push_back({x, curve(x)});
  }
  return polyline_series(std::move(name), std::move(pts));
}

void write_plot_csv(std::ostream& out, const std::vector<PlotSeries>& series) {
  out << "x,y,series\n";
  for (const auto& s : series) {
    const auto name = csv_field(s.name);
    for (const auto& p : s.points) fmt::print(out, "{},{},{}\n", p.x, p.y, name);
  }
}

void write_svg(std::ostream& out, const std::vector<PlotSeries>& series, const PlotLabels& labels) {
  constexpr double kW = 640;
  constexpr double kH = 480;
  constexpr double kLeft = 70;
  constexpr double kRight = 150;
  constexpr double kTop = 40;
  constexpr double kBottom = 60;

  double x0 = std::numeric_limits<double>::infinity();
  double x1 = -x0;
  double y0 = x0;
  double y1 = -x0;
  for (const auto& s : series) {
    for (const auto& p : s.points) {
      if (!std::isfinite(p.x) || !std::isfinite(p.y)) continue;
      x0 = std::min(x0, p.x);
      x1 = std::max(x1, p.x);
      y0 = std::min(y0, p.y);
      y1 = std::max(y1, p.y);
    }
  }
  if (!std::isfinite(x0)) {
    x0 = y0 = 0.0;
    x1 = y1 = 1.0;
  }
  if (x1 - x0 < 1e-12) {
    x0 -= 0.5;
    x1 += 0.5;
  }
  if (y1 - y0 < 1e-12) {
    y0 -= 0.5;
    y1 += 0.5;
  }
  const double padx = 0.05 * (x1 - x0);
  const double pady = 0.05 * (y1 - y0);
  x0 -= padx;
  x1 += padx;
  y0 -= pady;
  y1 += pady;

  const double pw = kW - kLeft - kRight;
  const double ph = kH - kTop - kBottom;
  auto sx = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
  auto sy = [&](double y) { return kTop + (y1 - y) / (y1 - y0) * ph; };

  fmt::print(out, "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n",
             kW, kH, kW, kH);
  fmt::print(out, "<rect width=\"{}\" height=\"{}\" fill=\"white\"/>\n", kW, kH);
  fmt::print(out, "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n", kLeft, kTop,
             pw, ph);
  for (int i = 0; i <= 4; ++i) {
    const double fx = x0 + (x1 - x0) * i / 4.0;
    const double fy = y0 + (y1 - y0) * i / 4.0;
    fmt::print(out, "<text x=\"{:.1f}\" y=\"{:.1f}\" font-size=\"11\" text-anchor=\"middle\">{:.3g}</text>\n", sx(fx),
               kTop + ph + 16, fx);
    fmt::print(out, "<text x=\"{:.1f}\" y=\"{:.1f}\" font-size=\"11\" text-anchor=\"end\">{:.3g}</text>\n", kLeft - 6,
               sy(fy) + 4, fy);
  }
  fmt::print(out, "<text x=\"{:.1f}\" y=\"{:.1f}\" font-size=\"13\" text-anchor=\"middle\">{}</text>\n", kLeft + pw / 2,
             kH - 18, escape_xml(labels.x));
  fmt::print(out,
             "<text x=\"18\" y=\"{:.1f}\" font-size=\"13\" text-anchor=\"middle\" "
             "transform=\"rotate(-90 18 {:.1f})\">{}</text>\n",
             kTop + ph / 2, kTop + ph / 2, escape_xml(labels.y));
  if (!labels.title.empty()) {
    fmt::print(out, "<text x=\"{:.1f}\" y=\"24\" font-size=\"15\" text-anchor=\"middle\">{}</text>\n", kLeft + pw / 2,
               escape_xml(labels.title));
  }

  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const char* color = kPalette[i % kPalette.size()];
    if (s.style == PlotSeries::Style::line) {
      std::string path;
      for (const auto& p : s.points) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) continue;
        path += fmt::format("{}{:.2f},{:.2f}", path.empty() ? "M" : " L", sx(p.x), sy(p.y));
      }
      fmt::print(out, "<path d=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>\n", path, color);
    } else {
      for (const auto& p : s.points) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) continue;
        fmt::print(out, "<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"3\" fill=\"{}\"/>\n", sx(p.x), sy(p.y), color);
      }
    }
    const double ly = kTop + 14 + 16.0 * static_cast<double>(i);
    fmt::print(out, "<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"10\" height=\"10\" fill=\"{}\"/>\n", kLeft + pw + 12,
               ly - 9, color);
    fmt::print(out, "<text x=\"{:.1f}\" y=\"{:.1f}\" font-size=\"11\">{}</text>\n", kLeft + pw + 28, ly,
               escape_xml(s.name));
  }
  out << "</svg>\n";
}

}  // namespace waterjudge
