#include "apifreq/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include "apifreq/error.hpp"
#include "int128.hpp"

namespace apifreq {

namespace {

void check_inputs(std::size_t a, std::size_t b, std::string_view what) {
  if (a != b) {
    throw Error(ErrorCode::LengthMismatch, std::string(what) + ": " + std::to_string(a) + " vs " +
                                               std::to_string(b) + " entries");
  }
  if (a == 0) throw Error(ErrorCode::EmptyInput, std::string(what) + ": no samples");
}

std::pair<std::uint64_t, std::uint64_t> class_sizes(std::span<const SampleLabel> actual) {
  std::uint64_t pos = 0;
  for (SampleLabel l : actual) pos += l == SampleLabel::benign ? 1 : 0;
  return {pos, actual.size() - pos};
}

// Indices sorted by descending score; ties keep input order.
std::vector<std::size_t> descending_order(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

ConfusionMatrix confusion(std::span<const SampleLabel> predicted, std::span<const SampleLabel> actual) {
  check_inputs(predicted.size(), actual.size(), "confusion");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const bool pred_pos = predicted[i] == SampleLabel::benign;
    const bool act_pos = actual[i] == SampleLabel::benign;
    if (pred_pos && act_pos) ++cm.tp;
    else if (pred_pos) ++cm.fp;
    else if (act_pos) ++cm.fn;
    else ++cm.tn;
  }
  return cm;
}

ClassificationMetrics compute_metrics(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw Error(ErrorCode::EmptyInput, "confusion matrix is empty");
  ClassificationMetrics m;
  m.accuracy = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
  if (cm.tp + cm.fp == 0) {
    m.precision_undefined = true;
  } else {
    m.precision = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp);
  }
  if (cm.tp + cm.fn == 0) {
    m.recall_undefined = true;
  } else {
    m.recall = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
  }
  if (m.precision + m.recall == 0.0) {
    m.f1_undefined = true;
  } else {
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  }
  return m;
}

double roc_auc(std::span<const double> scores, std::span<const SampleLabel> actual) {
  check_inputs(scores.size(), actual.size(), "roc_auc");
  const auto [pos, neg] = class_sizes(actual);
  if (pos == 0 || neg == 0) {
    throw Error(ErrorCode::SingleClass, "roc_auc needs both benign and malware samples");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Twice the Mann-Whitney U, so half credits stay integral.
  detail::u128 twice_u = 0;
  std::uint64_t neg_below = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::uint64_t p = 0, q = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (actual[order[j]] == SampleLabel::benign ? p : q) += 1;
      ++j;
    }
    twice_u += static_cast<detail::u128>(p) * (2 * neg_below + q);
    neg_below += q;
    i = j;
  }
  return static_cast<double>(twice_u) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

std::string_view to_string(CurvePoints::Kind kind) noexcept {
  return kind == CurvePoints::Kind::roc ? "roc" : "pr";
}

CurvePoints roc_curve(std::span<const double> scores, std::span<const SampleLabel> actual) {
  check_inputs(scores.size(), actual.size(), "roc_curve");
  const auto [pos, neg] = class_sizes(actual);
  if (pos == 0 || neg == 0) {
    throw Error(ErrorCode::SingleClass, "roc_curve needs both benign and malware samples");
  }
  CurvePoints c;
  c.kind = CurvePoints::Kind::roc;
  c.x.push_back(0.0);
  c.y.push_back(0.0);
  c.thresholds.push_back(std::numeric_limits<double>::infinity());
  const auto order = descending_order(scores);
  std::uint64_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    while (i < order.size() && scores[order[i]] == s) {
      (actual[order[i]] == SampleLabel::benign ? tp : fp) += 1;
      ++i;
    }
    c.x.push_back(static_cast<double>(fp) / static_cast<double>(neg));
    c.y.push_back(static_cast<double>(tp) / static_cast<double>(pos));
    c.thresholds.push_back(s);
  }
  return c;
}

CurvePoints pr_curve(std::span<const double> scores, std::span<const SampleLabel> actual) {
  check_inputs(scores.size(), actual.size(), "pr_curve");
  const auto [pos, neg] = class_sizes(actual);
  if (pos == 0) throw Error(ErrorCode::NoPositives, "pr_curve needs at least one benign sample");
  CurvePoints c;
  c.kind = CurvePoints::Kind::pr;
  const auto order = descending_order(scores);
  std::uint64_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    while (i < order.size() && scores[order[i]] == s) {
      (actual[order[i]] == SampleLabel::benign ? tp : fp) += 1;
      ++i;
    }
    c.x.push_back(static_cast<double>(tp) / static_cast<double>(pos));
    c.y.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
    c.thresholds.push_back(s);
  }
  return c;
}

double trapezoid_area(const CurvePoints& curve) {
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    area += (curve.x[i] - curve.x[i - 1]) * (curve.y[i] + curve.y[i - 1]) / 2.0;
  }
  return area;
}

std::string curve_csv(const CurvePoints& curve, std::string_view comment) {
  std::string out = "# ";
  out += comment;
  out += "\nthreshold,x,y\n";
  for (std::size_t i = 0; i < curve.size(); ++i) {
    out += format_double(curve.thresholds[i]);
    out += ',';
    out += format_double(curve.x[i]);
    out += ',';
    out += format_double(curve.y[i]);
    out += '\n';
  }
  return out;
}

MetricsReport evaluate(std::span<const double> scores, std::span<const SampleLabel> actual,
                       double decision_threshold) {
  check_inputs(scores.size(), actual.size(), "evaluate");
  std::vector<SampleLabel> predicted(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    predicted[i] = scores[i] >= decision_threshold ? SampleLabel::benign : SampleLabel::malware;
  }
  MetricsReport r;
  r.confusion = confusion(predicted, actual);
  const auto m = compute_metrics(r.confusion);
  r.accuracy = m.accuracy;
  r.precision = m.precision;
  r.recall = m.recall;
  r.f1 = m.f1;
  r.precision_undefined = m.precision_undefined;
  r.recall_undefined = m.recall_undefined;
  r.f1_undefined = m.f1_undefined;
  r.roc_auc = roc_auc(scores, actual);
  r.n_samples = scores.size();
  r.decision_threshold = decision_threshold;
  return r;
}

}  // namespace apifreq
