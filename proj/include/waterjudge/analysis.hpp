#pragma once
// Post-hoc numerics for trade-off curves: correlations, whitening, tanh frontier
// fitting by perpendicular distance, truncated-linear cross-model maps, transfer.

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include <json.hpp>

namespace waterjudge {

struct Point2D {
  double x = 0.0;  // detectability (F0.5)
  double y = 0.0;  // quality (s_q)
};

// y = a * tanh(b * (x - c)) + d
struct TanhCurve {
  double a = 0.0;
  double b = 1.0;
  double c = 0.0;
  double d = 0.0;

  double operator()(double x) const noexcept;
  double derivative(double x) const noexcept;
};

// y = min(cap, slope * x + intercept)
struct TruncatedLinear {
  double slope = 1.0;
  double intercept = 0.0;
  double cap = 0.0;

  double operator()(double x) const noexcept;
};

struct WhitenTransform {
  double mean_x = 0.0;
  double mean_y = 0.0;
  double scale_x = 1.0;
  double scale_y = 1.0;

  Point2D apply(Point2D p) const noexcept;
  Point2D invert(Point2D p) const noexcept;
};

double pearson(std::span<const double> xs, std::span<const double> ys);
// Pearson of average ranks (ties share the mean of their positions, 1-based).
double spearman(std::span<const double> xs, std::span<const double> ys);
std::vector<double> fractional_ranks(std::span<const double> v);

// Per-axis zero mean, unit sample variance (n - 1).
std::pair<std::vector<Point2D>, WhitenTransform> whiten(std::span<const Point2D> points);

struct CurveProjection {
  double t = 0.0;         // x of the nearest curve point
  double distance = 0.0;  // in whitened units
};

// Nearest point of the curve to p in whitened coordinates, searching x in [t_lo, t_hi]:
// 512-sample grid, then 40 bisection steps on the derivative of the squared distance.
CurveProjection project_onto_curve(const TanhCurve& curve, Point2D p, const WhitenTransform& w, double t_lo,
                                   double t_hi);

double mean_perpendicular_distance(const TanhCurve& curve, std::span<const Point2D> points, const WhitenTransform& w,
                                   double t_lo, double t_hi);

struct TanhFit {
  TanhCurve curve;
  WhitenTransform transform;
  double t_lo = 0.0;  // projection range: data x-range widened 20% each side
  double t_hi = 1.0;
  double residual = 0.0;  // mean perpendicular distance, whitened
  bool converged = false;
  int iterations = 0;
};

inline constexpr int kTanhMaxIterations = 2000;
inline constexpr int kTanhRestarts = 4;
inline constexpr double kTanhSpreadTolerance = 1e-9;

// Minimizes the mean whitened perpendicular distance with Nelder-Mead from a
// moment-based start plus restarts. Needs >= 4 points. The result has b > 0.
TanhFit fit_tanh_curve(std::span<const Point2D> points);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
};

LinearFit ordinary_least_squares(std::span<const double> xs, std::span<const double> ys);
double sum_squared_error(const TruncatedLinear& f, std::span<const double> xs, std::span<const double> ys);

// Least squares over (slope, intercept, cap), scanning caps over each distinct y and
// the midpoints between them, plus the untruncated OLS line. Ties go to the smallest cap.
TruncatedLinear fit_truncated_linear(std::span<const double> xs, std::span<const double> ys);

inline constexpr std::size_t kTransferSamples = 256;

// Samples the base curve at evenly spaced x in [x_lo, x_hi] and maps each point through
// (detect_map, quality_map).
std::vector<Point2D> transfer_curve(const TanhCurve& base, const TruncatedLinear& quality_map,
                                    const TruncatedLinear& detect_map, double x_lo, double x_hi,
                                    std::size_t samples = kTransferSamples);

double distance_to_polyline(std::span<const Point2D> polyline, Point2D p);

void to_json(nlohmann::json& j, const TanhCurve& c);
void to_json(nlohmann::json& j, const TruncatedLinear& f);
void to_json(nlohmann::json& j, const WhitenTransform& w);
void to_json(nlohmann::json& j, const TanhFit& f);
TanhCurve tanh_curve_from_json(const nlohmann::json& j);
TruncatedLinear truncated_linear_from_json(const nlohmann::json& j);

}  // namespace waterjudge
