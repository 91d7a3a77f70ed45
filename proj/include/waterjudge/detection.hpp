#pragma once
// Watermark-score samples to detectability metrics (precision, recall, F-beta).

#include <cstddef>
#include <span>
#include <vector>

#include <json.hpp>

namespace waterjudge {

struct ScoredSample {
  double score = 0.0;
  bool is_watermarked = false;
};

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;
};

struct DetectionReport {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f_beta = 0.0;
  double beta = 0.5;
  ConfusionCounts counts;
};

// Threshold strictly above any valid score; flags nothing.
inline constexpr double kAboveAllThreshold = 1.0 + 1e-9;

double f_beta(double precision, double recall, double beta);

// Predicted watermarked iff score >= threshold.
DetectionReport confusion_at(std::span<const ScoredSample> samples, double threshold, double beta = 0.5);

// Max F-beta over thresholds {distinct scores} U {1 + eps}; ties go to the larger threshold.
DetectionReport best_threshold(std::span<const ScoredSample> samples, double beta = 0.5);

void to_json(nlohmann::json& j, const DetectionReport& r);

}  // namespace waterjudge
