#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "apifreq/trace_corpus.hpp"

namespace apifreq {

/// Positive class is benign.
struct ConfusionMatrix {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  std::uint64_t total() const noexcept { return tp + fp + fn + tn; }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

ConfusionMatrix confusion(std::span<const SampleLabel> predicted, std::span<const SampleLabel> actual);

/// Zero denominators yield 0 and set the matching *_undefined flag.
struct ClassificationMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f1_undefined = false;
};

ClassificationMetrics compute_metrics(const ConfusionMatrix& cm);

/// Mann-Whitney statistic: P(score of a benign > score of a malware), ties
/// counted as one half. Exact: computed from integer pair counts.
double roc_auc(std::span<const double> scores, std::span<const SampleLabel> actual);

struct CurvePoints {
  enum class Kind { roc, pr };
  Kind kind = Kind::roc;
  std::vector<double> x;  // roc: FPR, pr: recall
  std::vector<double> y;  // roc: TPR, pr: precision
  std::vector<double> thresholds;

  std::size_t size() const noexcept { return x.size(); }
};

std::string_view to_string(CurvePoints::Kind kind) noexcept;

/// (FPR, TPR) with "score >= threshold" as benign, one point per distinct
/// score in descending order, preceded by (0, 0) at threshold +inf.
CurvePoints roc_curve(std::span<const double> scores, std::span<const SampleLabel> actual);

/// (recall, precision) per distinct score, descending thresholds. The last
/// point has recall 1 and precision equal to the benign fraction.
CurvePoints pr_curve(std::span<const double> scores, std::span<const SampleLabel> actual);

double trapezoid_area(const CurvePoints& curve);

/// CSV `threshold,x,y` preceded by a `# ...` comment line.
std::string curve_csv(const CurvePoints& curve, std::string_view comment);

struct MetricsReport {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double roc_auc = 0.0;
  ConfusionMatrix confusion;
  std::size_t n_samples = 0;
  double decision_threshold = 0.5;
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f1_undefined = false;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

/// Hard labels at `decision_threshold` (benign iff score >= threshold) plus
/// AUC on the raw scores.
MetricsReport evaluate(std::span<const double> scores, std::span<const SampleLabel> actual,
                       double decision_threshold = 0.5);

}  // namespace apifreq
