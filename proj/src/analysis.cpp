#include "waterjudge/analysis.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "waterjudge/errors.hpp"
#include "waterjudge/log.hpp"
#include "waterjudge/rng.hpp"

namespace waterjudge {

double TanhCurve::operator()(double x) const noexcept { return a * std::tanh(b * (x - c)) + d; }

double TanhCurve::derivative(double x) const noexcept {
  const double t = std::tanh(b * (x - c));
  return a * b * (1.0 - t * t);
}

double TruncatedLinear::operator()(double x) const noexcept { return std::min(cap, slope * x + intercept); }

Point2D WhitenTransform::apply(Point2D p) const noexcept {
  return {(p.x - mean_x) / scale_x, (p.y - mean_y) / scale_y};
}

Point2D WhitenTransform::invert(Point2D p) const noexcept {
  return {p.x * scale_x + mean_x, p.y * scale_y + mean_y};
}

namespace {

void check_pair(std::span<const double> xs, std::span<const double> ys, const char* what) {
  if (xs.size() != ys.size()) throw DomainError(std::string(what) + ": length mismatch");
  if (xs.size() < 2) throw DomainError(std::string(what) + ": need at least 2 points");
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!std::isfinite(xs[i]) || !std::isfinite(ys[i])) throw DomainError(std::string(what) + ": non-finite input");
  }
}

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_sd(std::span<const double> v, double mean) {
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

double pearson(std::span<const double> xs, std::span<const double> ys) {
  check_pair(xs, ys, "pearson");
  const double mx = mean_of(xs);
  const double my = mean_of(ys);
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw DomainError("pearson: zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> fractional_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> xs, std::span<const double> ys) {
  check_pair(xs, ys, "spearman");
  const auto rx = fractional_ranks(xs);
  const auto ry = fractional_ranks(ys);
  return pearson(rx, ry);
}

std::pair<std::vector<Point2D>, WhitenTransform> whiten(std::span<const Point2D> points) {
  if (points.size() < 2) throw DomainError("whiten: need at least 2 points");
  std::vector<double> xs;
  std::vector<double> ys;
  for (const auto& p : points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw DomainError("whiten: non-finite point");
    xs.push_back(p.x);
    ys.push_back(p.y);
  }
  WhitenTransform w;
  w.mean_x = mean_of(xs);
  w.mean_y = mean_of(ys);
  w.scale_x = sample_sd(xs, w.mean_x);
  w.scale_y = sample_sd(ys, w.mean_y);
  if (!(w.scale_x > 0.0) || !(w.scale_y > 0.0)) throw DomainError("whiten: degenerate variance on an axis");
  std::vector<Point2D> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(w.apply(p));
  return {out, w};
}

CurveProjection project_onto_curve(const TanhCurve& curve, Point2D p, const WhitenTransform& w, double t_lo,
                                   double t_hi) {
  constexpr int kGrid = 512;
  constexpr int kBisect = 40;
  const double isx = 1.0 / w.scale_x;
  const double isy = 1.0 / w.scale_y;
  const Point2D q = w.apply(p);
  auto dist2 = [&](double t) {
    const double dx = (t - w.mean_x) * isx - q.x;
    const double dy = (curve(t) - w.mean_y) * isy - q.y;
    return dx * dx + dy * dy;
  };
  auto slope2 = [&](double t) {  // d/dt of dist2, halved
    const double dx = (t - w.mean_x) * isx - q.x;
    const double dy = (curve(t) - w.mean_y) * isy - q.y;
    return dx * isx + dy * curve.derivative(t) * isy;
  };

  const double step = (t_hi - t_lo) / (kGrid - 1);
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int i = 0; i < kGrid; ++i) {
    const double d = dist2(t_lo + step * i);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  double lo = t_lo + step * std::max(0, best - 1);
  double hi = t_lo + step * std::min(kGrid - 1, best + 1);
  for (int k = 0; k < kBisect; ++k) {
    const double mid = 0.5 * (lo + hi);
    if (slope2(mid) > 0.0) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  double t = 0.5 * (lo + hi);
  double d = dist2(t);
  const double t_grid = t_lo + step * best;
  if (best_d < d) {
    t = t_grid;
    d = best_d;
  }
  return {t, std::sqrt(d)};
}

double mean_perpendicular_distance(const TanhCurve& curve, std::span<const Point2D> points, const WhitenTransform& w,
                                   double t_lo, double t_hi) {
  double sum = 0.0;
  for (const auto& p : points) sum += project_onto_curve(curve, p, w, t_lo, t_hi).distance;
  return sum / static_cast<double>(points.size());
}

namespace {

struct NelderMeadResult {
  std::array<double, 4> x{};
  double fx = 0.0;
  int iterations = 0;
  bool converged = false;
};

NelderMeadResult nelder_mead(const std::function<double(const std::array<double, 4>&)>& f,
                             const std::array<double, 4>& x0, const std::array<double, 4>& steps, int max_iter,
                             double tol) {
  constexpr int kN = 4;
  std::array<std::array<double, 4>, kN + 1> simplex{};
  std::array<double, kN + 1> fv{};
  simplex[0] = x0;
  for (int i = 0; i < kN; ++i) {
    simplex[i + 1] = x0;
    simplex[i + 1][i] += steps[i];
  }
  for (int i = 0; i <= kN; ++i) fv[i] = f(simplex[i]);

  NelderMeadResult res;
  std::array<int, kN + 1> order{};
  for (res.iterations = 0; res.iterations < max_iter; ++res.iterations) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return fv[a] < fv[b]; });
    const int best = order[0];
    const int worst = order[kN];
    const int second = order[kN - 1];

    double spread = 0.0;
    for (int i = 0; i <= kN; ++i) {
      for (int k = 0; k < kN; ++k) spread = std::max(spread, std::abs(simplex[i][k] - simplex[best][k]));
    }
    if (spread < tol) {
      res.converged = true;
      break;
    }

    std::array<double, 4> centroid{};
    for (int i = 0; i <= kN; ++i) {
      if (i == worst) continue;
      for (int k = 0; k < kN; ++k) centroid[k] += simplex[i][k] / kN;
    }
    auto along = [&](double coef) {
      std::array<double, 4> p{};
      for (int k = 0; k < kN; ++k) p[k] = centroid[k] + coef * (simplex[worst][k] - centroid[k]);
      return p;
    };

    const auto xr = along(-1.0);
    const double fr = f(xr);
    if (fr < fv[best]) {
      const auto xe = along(-2.0);
      const double fe = f(xe);
      if (fe < fr) {
        simplex[worst] = xe;
        fv[worst] = fe;
      } else {
        simplex[worst] = xr;
        fv[worst] = fr;
      }
      continue;
    }
    if (fr < fv[second]) {
      simplex[worst] = xr;
      fv[worst] = fr;
      continue;
    }
    const bool outside = fr < fv[worst];
    const auto xc = along(outside ? -0.5 : 0.5);
    const double fc = f(xc);
    if (fc < (outside ? fr : fv[worst])) {
      simplex[worst] = xc;
      fv[worst] = fc;
      continue;
    }
    for (int i = 0; i <= kN; ++i) {
      if (i == best) continue;
      for (int k = 0; k < kN; ++k) simplex[i][k] = simplex[best][k] + 0.5 * (simplex[i][k] - simplex[best][k]);
      fv[i] = f(simplex[i]);
    }
  }
  int best = 0;
  for (int i = 1; i <= kN; ++i) {
    if (fv[i] < fv[best]) best = i;
  }
  res.x = simplex[best];
  res.fx = fv[best];
  return res;
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

TanhFit fit_tanh_curve(std::span<const Point2D> points) {
  if (points.size() < 4) throw DomainError("fit_tanh_curve: need at least 4 points");
  std::vector<double> xs;
  std::vector<double> ys;
  for (const auto& p : points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw DomainError("fit_tanh_curve: non-finite point");
    xs.push_back(p.x);
    ys.push_back(p.y);
  }
  const auto [xmin, xmax] = std::minmax_element(xs.begin(), xs.end());
  const auto [ymin, ymax] = std::minmax_element(ys.begin(), ys.end());
  const double xr = *xmax - *xmin;
  const double yr = *ymax - *ymin;
  if (!(xr > 0.0)) throw DomainError("fit_tanh_curve: x values have zero range");

  TanhFit fit;
  fit.transform.mean_x = mean_of(xs);
  fit.transform.mean_y = mean_of(ys);
  fit.transform.scale_x = sample_sd(xs, fit.transform.mean_x);
  fit.transform.scale_y = sample_sd(ys, fit.transform.mean_y);
  // A flat quality axis is a valid (degenerate) frontier; keep it in raw units.
  if (!(fit.transform.scale_y > 0.0)) fit.transform.scale_y = 1.0;
  fit.t_lo = *xmin - 0.2 * xr;
  fit.t_hi = *xmax + 0.2 * xr;

  auto objective = [&](const std::array<double, 4>& p) {
    const TanhCurve c{p[0], p[1], p[2], p[3]};
    const double v = mean_perpendicular_distance(c, points, fit.transform, fit.t_lo, fit.t_hi);
    return std::isfinite(v) ? v : std::numeric_limits<double>::max();
  };

  const std::array<double, 4> start{0.5 * yr, 4.0 / xr, median_of(xs), mean_of(ys)};
  const double ystep = yr > 0.0 ? 0.1 * yr : 0.05;
  const std::array<double, 4> steps{ystep, 0.5 * start[1], 0.1 * xr, ystep};

  auto best = nelder_mead(objective, start, steps, kTanhMaxIterations, kTanhSpreadTolerance);
  int total_iter = best.iterations;
  bool converged = best.converged;
  SplitMix64 jitter(0x7A11C0DEULL);
  for (int r = 0; r < kTanhRestarts; ++r) {
    // Restart around the incumbent with a jittered, shrinking simplex.
    const double shrink = std::pow(0.25, r);
    std::array<double, 4> x0 = best.x;
    std::array<double, 4> st{};
    for (int k = 0; k < 4; ++k) {
      const double u = jitter.uniform() - 0.5;
      x0[k] += u * steps[k] * shrink;
      st[k] = steps[k] * shrink;
    }
    auto res = nelder_mead(objective, x0, st, kTanhMaxIterations, kTanhSpreadTolerance);
    total_iter += res.iterations;
    if (res.fx <= best.fx) {
      best = res;
      converged = res.converged;
    }
  }

  fit.curve = {best.x[0], best.x[1], best.x[2], best.x[3]};
  // a*tanh(b*u) == (-a)*tanh(-b*u); report the b > 0 form.
  if (fit.curve.b < 0.0) {
    fit.curve.a = -fit.curve.a;
    fit.curve.b = -fit.curve.b;
  }
  if (fit.curve.b == 0.0) fit.curve.b = std::numeric_limits<double>::min();
  fit.residual = best.fx;
  fit.converged = converged;
  fit.iterations = total_iter;
  if (!converged) logger()->warn("tanh fit did not reach simplex spread {} in {} iterations", kTanhSpreadTolerance,
                                 kTanhMaxIterations);
  return fit;
}

LinearFit ordinary_least_squares(std::span<const double> xs, std::span<const double> ys) {
  check_pair(xs, ys, "ordinary_least_squares");
  const double mx = mean_of(xs);
  const double my = mean_of(ys);
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  if (sxx == 0.0) throw DomainError("ordinary_least_squares: x has zero variance");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  return f;
}

double sum_squared_error(const TruncatedLinear& f, std::span<const double> xs, std::span<const double> ys) {
  double s = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double e = f(xs[i]) - ys[i];
    s += e * e;
  }
  return s;
}

TruncatedLinear fit_truncated_linear(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw DomainError("fit_truncated_linear: length mismatch");
  if (xs.size() < 3) throw DomainError("fit_truncated_linear: need at least 3 points");
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!std::isfinite(xs[i]) || !std::isfinite(ys[i])) throw DomainError("fit_truncated_linear: non-finite input");
  }

  struct Candidate {
    TruncatedLinear f;
    double sse;
  };
  std::vector<Candidate> cands;

  const auto ols = ordinary_least_squares(xs, ys);
  double top = -std::numeric_limits<double>::infinity();
  for (double x : xs) top = std::max(top, ols.slope * x + ols.intercept);
  {
    const TruncatedLinear f{ols.slope, ols.intercept, top};
    cands.push_back({f, sum_squared_error(f, xs, ys)});
  }

  std::vector<double> levels(ys.begin(), ys.end());
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  std::vector<double> caps = levels;
  for (std::size_t i = 0; i + 1 < levels.size(); ++i) caps.push_back(0.5 * (levels[i] + levels[i + 1]));

  for (double cap : caps) {
    std::vector<double> sx;
    std::vector<double> sy;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (ys[i] < cap) {
        sx.push_back(xs[i]);
        sy.push_back(ys[i]);
      }
    }
    if (sx.size() < 2) continue;
    if (std::all_of(sx.begin(), sx.end(), [&](double v) { return v == sx.front(); })) continue;
    const auto lf = ordinary_least_squares(sx, sy);
    const TruncatedLinear f{lf.slope, lf.intercept, cap};
    cands.push_back({f, sum_squared_error(f, xs, ys)});
  }

  double ys_scale = 0.0;
  for (double y : ys) ys_scale += y * y;
  const double tie_tol = 1e-12 * (1.0 + ys_scale);
  const Candidate* best = &cands.front();
  for (const auto& c : cands) {
    if (c.sse < best->sse - tie_tol || (std::abs(c.sse - best->sse) <= tie_tol && c.f.cap < best->f.cap)) best = &c;
  }
  return best->f;
}

std::vector<Point2D> transfer_curve(const TanhCurve& base, const TruncatedLinear& quality_map,
                                    const TruncatedLinear& detect_map, double x_lo, double x_hi, std::size_t samples) {
  if (samples < 2) throw DomainError("transfer_curve: need at least 2 samples");
  if (!(x_hi > x_lo)) throw DomainError("transfer_curve: empty x-range");
  std::vector<Point2D> out;
  out.reserve(samples);
  for (std::size_t k = 0; k < samples; ++k) {
    const double x = x_lo + (x_hi - x_lo) * static_cast<double>(k) / static_cast<double>(samples - 1);
    out.push_back({detect_map(x), quality_map(base(x))});
  }
  return out;
}

double distance_to_polyline(std::span<const Point2D> polyline, Point2D p) {
  if (polyline.empty()) throw DomainError("distance_to_polyline: empty polyline");
  double best = std::hypot(p.x - polyline[0].x, p.y - polyline[0].y);
  for (std::size_t i = 0; i + 1 < polyline.size(); ++i) {
    const auto a = polyline[i];
    const auto b = polyline[i + 1];
    const double vx = b.x - a.x;
    const double vy = b.y - a.y;
    const double len2 = vx * vx + vy * vy;
    double t = len2 > 0.0 ? ((p.x - a.x) * vx + (p.y - a.y) * vy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    best = std::min(best, std::hypot(p.x - (a.x + t * vx), p.y - (a.y + t * vy)));
  }
  return best;
}

void to_json(nlohmann::json& j, const TanhCurve& c) { j = {{"a", c.a}, {"b", c.b}, {"c", c.c}, {"d", c.d}}; }

void to_json(nlohmann::json& j, const TruncatedLinear& f) {
  j = {{"slope", f.slope}, {"intercept", f.intercept}, {"cap", f.cap}};
}

void to_json(nlohmann::json& j, const WhitenTransform& w) {
  j = {{"mean", {w.mean_x, w.mean_y}}, {"scale", {w.scale_x, w.scale_y}}};
}

void to_json(nlohmann::json& j, const TanhFit& f) {
  j = {{"curve", f.curve},       {"whiten", f.transform},   {"x_range", {f.t_lo, f.t_hi}},
       {"residual", f.residual}, {"converged", f.converged}, {"iterations", f.iterations}};
}

TanhCurve tanh_curve_from_json(const nlohmann::json& j) {
  try {
    const auto& c = j.contains("curve") ? j.at("curve") : j;
    return {c.at("a").get<double>(), c.at("b").get<double>(), c.at("c").get<double>(), c.at("d").get<double>()};
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("malformed tanh curve: ") + e.what());
  }
}

TruncatedLinear truncated_linear_from_json(const nlohmann::json& j) {
  try {
    return {j.at("slope").get<double>(), j.at("intercept").get<double>(), j.at("cap").get<double>()};
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("malformed truncated-linear map: ") + e.what());
  }
}

}  // namespace waterjudge
