#include "waterjudge/detection.hpp"

#include <algorithm>
#include <cmath>

#include "waterjudge/errors.hpp"

namespace waterjudge {

double f_beta(double precision, double recall, double beta) {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw DomainError("f_beta: beta must be > 0");
  if (!(precision >= 0.0 && precision <= 1.0) || !(recall >= 0.0 && recall <= 1.0)) {
    throw DomainError("f_beta: precision and recall must lie in [0, 1]");
  }
  const double b2 = beta * beta;
  const double denom = b2 * precision + recall;
  if (denom == 0.0) return 0.0;
  return (1.0 + b2) * precision * recall / denom;
}

namespace {

void validate(std::span<const ScoredSample> samples) {
  if (samples.empty()) throw DomainError("detection: empty sample set");
  bool pos = false;
  bool neg = false;
  for (const auto& s : samples) {
    if (!(s.score >= 0.0 && s.score <= 1.0)) throw DomainError("detection: score outside [0, 1]");
    (s.is_watermarked ? pos : neg) = true;
  }
  if (!pos || !neg) throw DomainError("detection: both watermarked and unwatermarked samples are required");
}

DetectionReport report_from(const ConfusionCounts& c, double threshold, double beta) {
  DetectionReport r;
  r.threshold = threshold;
  r.beta = beta;
  r.counts = c;
  r.precision = (c.tp + c.fp) == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  r.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  r.f_beta = f_beta(r.precision, r.recall, beta);
  return r;
}

}  // namespace

DetectionReport confusion_at(std::span<const ScoredSample> samples, double threshold, double beta) {
  validate(samples);
  ConfusionCounts c;
  for (const auto& s : samples) {
    const bool flagged = s.score >= threshold;
    if (s.is_watermarked) {
      ++(flagged ? c.tp : c.fn);
    } else {
      ++(flagged ? c.fp : c.tn);
    }
  }
  return report_from(c, threshold, beta);
}

namespace {
constexpr double kTieTolerance = 1e-12;
}  // namespace

DetectionReport best_threshold(std::span<const ScoredSample> samples, double beta) {
  validate(samples);
  if (!(beta > 0.0)) throw DomainError("best_threshold: beta must be > 0");

  // Sweep thresholds from high to low; each distinct score moves its samples into the flagged set.
  std::vector<ScoredSample> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.score > b.score; });

  ConfusionCounts c;
  for (const auto& s : sorted) ++(s.is_watermarked ? c.fn : c.tn);

  DetectionReport best = report_from(c, kAboveAllThreshold, beta);
  std::size_t i = 0;
  while (i < sorted.size()) {
    const double t = sorted[i].score;
    for (; i < sorted.size() && sorted[i].score == t; ++i) {
      if (sorted[i].is_watermarked) {
        --c.fn;
        ++c.tp;
      } else {
        --c.tn;
        ++c.fp;
      }
    }
    const auto r = report_from(c, t, beta);
    // Mathematically equal F values from different counts can differ in the last bits;
    // anything within kTieTolerance is a tie and keeps the earlier (larger) threshold.
    if (r.f_beta > best.f_beta + kTieTolerance) best = r;
  }
  return best;
}

void to_json(nlohmann::json& j, const DetectionReport& r) {
  j = nlohmann::json{{"threshold", r.threshold},
                     {"precision", r.precision},
                     {"recall", r.recall},
                     {"f_beta", r.f_beta},
                     {"beta", r.beta},
                     {"counts", {{"tp", r.counts.tp}, {"fp", r.counts.fp}, {"tn", r.counts.tn}, {"fn", r.counts.fn}}}};
}

}  // namespace waterjudge
