#include <cmath>
#include <string>

#include "apifreq/error.hpp"
#include "apifreq/forest.hpp"
#include "split_scan.hpp"

namespace apifreq {

std::size_t FeaturesPerSplit::resolve(std::size_t dimension) const noexcept {
  if (dimension == 0) return 0;
  std::size_t k = 0;
  switch (rule) {
    case Rule::sqrt: k = static_cast<std::size_t>(std::sqrt(static_cast<double>(dimension))); break;
    case Rule::log2: k = static_cast<std::size_t>(std::log2(static_cast<double>(dimension))); break;
    case Rule::all: k = dimension; break;
    case Rule::fixed: k = count; break;
  }
  return std::clamp<std::size_t>(k, 1, dimension);
}

std::string FeaturesPerSplit::to_string() const {
  switch (rule) {
    case Rule::sqrt: return "sqrt";
    case Rule::log2: return "log2";
    case Rule::all: return "all";
    case Rule::fixed: return std::to_string(count);
  }
  return "sqrt";
}

std::optional<FeaturesPerSplit> FeaturesPerSplit::parse(std::string_view text) {
  if (text == "sqrt") return FeaturesPerSplit{Rule::sqrt, 0};
  if (text == "log2") return FeaturesPerSplit{Rule::log2, 0};
  if (text == "all") return FeaturesPerSplit{Rule::all, 0};
  std::size_t n = 0;
  if (text.empty()) return std::nullopt;
  for (char c : text) {
    if (c < '0' || c > '9') return std::nullopt;
    n = n * 10 + static_cast<std::size_t>(c - '0');
  }
  if (n == 0) return std::nullopt;
  return FeaturesPerSplit{Rule::fixed, n};
}

void ForestParams::validate() const {
  if (n_trees < 1) throw Error(ErrorCode::InvalidConfig, "n_trees must be >= 1");
  if (min_samples_split < 2) throw Error(ErrorCode::InvalidConfig, "min_samples_split must be >= 2");
  if (max_depth && *max_depth < 1) throw Error(ErrorCode::InvalidConfig, "max_depth must be >= 1");
  if (features_per_split.rule == FeaturesPerSplit::Rule::fixed && features_per_split.count < 1) {
    throw Error(ErrorCode::InvalidConfig, "features_per_split must select at least one feature");
  }
}

double gini_impurity(const ClassCounts& counts) {
  const std::uint64_t n = counts.total();
  if (n == 0) throw Error(ErrorCode::EmptyNode, "gini impurity of an empty node");
  const double pm = static_cast<double>(counts.malware) / static_cast<double>(n);
  const double pb = static_cast<double>(counts.benign) / static_cast<double>(n);
  return 1.0 - (pm * pm + pb * pb);
}

std::optional<Split> best_split(std::span<const std::vector<double>> rows,
                                std::span<const SampleLabel> labels,
                                std::span<const std::size_t> candidate_features) {
  if (rows.size() != labels.size()) {
    throw Error(ErrorCode::DimensionMismatch, std::to_string(rows.size()) + " rows but " +
                                                  std::to_string(labels.size()) + " labels");
  }
  if (rows.size() < 2) return std::nullopt;

  ClassCounts totals;
  for (SampleLabel l : labels) (l == SampleLabel::benign ? totals.benign : totals.malware) += 1;

  std::optional<Split> best;
  detail::SplitScore best_score;
  std::vector<detail::ValueMass> values;
  for (std::size_t f : candidate_features) {
    values.clear();
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (f >= rows[r].size()) {
        throw Error(ErrorCode::DimensionMismatch, "candidate feature " + std::to_string(f) +
                                                      " outside row " + std::to_string(r));
      }
      const bool benign = labels[r] == SampleLabel::benign;
      values.push_back({rows[r][f], benign ? 0u : 1u, benign ? 1u : 0u});
    }
    const auto scan = detail::scan_feature(values);
    if (scan.constant) continue;
    const bool better = !best || scan.score > best_score ||
                        (scan.score == best_score && f < best->feature);
    if (better) {
      best = Split{f, scan.threshold, 0.0};
      best_score = scan.score;
    }
  }
  if (!best || !(best_score > detail::parent_score(totals))) return std::nullopt;
  best->impurity_decrease = detail::impurity_decrease(best_score, totals);
  return best;
}

}  // namespace apifreq
