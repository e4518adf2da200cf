#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "apifreq/featurization.hpp"
#include "apifreq/trace_corpus.hpp"

namespace apifreq {

/// How many features a node samples before picking its split.
struct FeaturesPerSplit {
  enum class Rule : std::uint8_t { sqrt = 0, log2 = 1, all = 2, fixed = 3 };
  Rule rule = Rule::sqrt;
  std::size_t count = 0;  // Rule::fixed only

  /// At least 1, at most `dimension`.
  std::size_t resolve(std::size_t dimension) const noexcept;
  std::string to_string() const;
  static std::optional<FeaturesPerSplit> parse(std::string_view text);

  friend bool operator==(const FeaturesPerSplit&, const FeaturesPerSplit&) = default;
};

struct ForestParams {
  std::size_t n_trees = 100;
  std::optional<std::size_t> max_depth;  // unlimited when empty
  std::size_t min_samples_split = 2;
  FeaturesPerSplit features_per_split;
  bool bootstrap = true;
  std::uint64_t seed = 0;
  std::size_t workers = 0;  // tree-level parallelism; not part of the model

  void validate() const;
};

struct ClassCounts {
  std::uint64_t malware = 0;
  std::uint64_t benign = 0;

  std::uint64_t total() const noexcept { return malware + benign; }
  friend bool operator==(const ClassCounts&, const ClassCounts&) = default;
};

/// 1 - sum_c (n_c / N)^2. Throws EmptyNode when N = 0.
double gini_impurity(const ClassCounts& counts);

struct Split {
  std::size_t feature = 0;
  double threshold = 0.0;  // rows with value <= threshold go left
  double impurity_decrease = 0.0;
};

/// Exhaustive split search over `candidate_features` of a dense row-major
/// sample. Thresholds sit at midpoints between consecutive distinct values.
/// Returns nothing unless some split strictly lowers the weighted Gini
/// impurity; ties go to the lowest feature index, then the lowest threshold.
std::optional<Split> best_split(std::span<const std::vector<double>> rows,
                                std::span<const SampleLabel> labels,
                                std::span<const std::size_t> candidate_features);

/// Flat preorder node. The left child of an internal node is the next node.
struct TreeNode {
  static constexpr std::uint32_t kLeaf = std::numeric_limits<std::uint32_t>::max();

  std::uint32_t feature = kLeaf;
  double threshold = 0.0;
  std::uint32_t right = 0;
  ClassCounts counts;  // leaves only; bootstrap-weighted

  bool is_leaf() const noexcept { return feature == kLeaf; }
};

class DecisionTree {
 public:
  DecisionTree() = default;
  explicit DecisionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
  const TreeNode& leaf_for(std::span<const SparseEntry> row) const;
  /// Benign fraction of the leaf reached by `row`.
  double benign_fraction(std::span<const SparseEntry> row) const;
  std::size_t depth() const;

 private:
  std::vector<TreeNode> nodes_;
};

struct TrainingMetadata {
  std::uint64_t seed = 0;
  std::string seed_derivation;
  std::uint64_t n_rows = 0;
  ClassCounts class_counts;
};

struct ForestModel {
  std::vector<DecisionTree> trees;
  ForestParams params;
  std::array<SampleLabel, 2> class_order{SampleLabel::malware, SampleLabel::benign};
  std::size_t feature_dimension = 0;
  std::vector<std::string> vocab_fingerprints;
  TrainingMetadata metadata;
};

/// Bagged Gini trees. Tree t bootstraps with a generator seeded by
/// derive_seed(params.seed, t), so the result does not depend on how many
/// workers build it.
ForestModel train_forest(const FeatureMatrix& matrix, const ForestParams& params);

/// Mean over trees of the reached leaf's benign fraction.
double predict_proba(const ForestModel& model, const FeatureVector& row);
double predict_proba(const ForestModel& model, std::span<const SparseEntry> row);
std::vector<double> predict_proba(const ForestModel& model, const FeatureMatrix& matrix,
                                  std::size_t workers = 0);

/// benign iff P(benign) >= threshold.
SampleLabel predict(const ForestModel& model, const FeatureVector& row, double threshold = 0.5);

// Model file (little-endian):
//   magic "APRF" | u32 version | 32-byte SHA-256 of everything that follows
//   | params | class order | u64 feature dimension | fingerprints | metadata
//   | u32 n_trees, per tree: u32 node count, nodes in preorder
//     (u8 kind; internal: u32 feature, f64 threshold; leaf: u64 malware, u64 benign)
inline constexpr std::uint32_t kModelFormatVersion = 1;

std::string encode_model(const ForestModel& model);
ForestModel decode_model(std::string_view bytes);
void save_model(const ForestModel& model, const std::filesystem::path& path);
ForestModel load_model(const std::filesystem::path& path);

}  // namespace apifreq
