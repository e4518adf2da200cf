#include "apifreq/forest.hpp"

#include <algorithm>
#include <bit>
#include <iostream>
#include <numeric>

#include "apifreq/error.hpp"
#include "apifreq/parallel.hpp"
#include "apifreq/rng.hpp"
#include "split_scan.hpp"

namespace apifreq {

namespace {

std::uint32_t value_at(std::span<const SparseEntry> row, std::uint32_t feature) {
  auto it = std::lower_bound(row.begin(), row.end(), feature,
                             [](const SparseEntry& e, std::uint32_t f) { return e.index < f; });
  return it != row.end() && it->index == feature ? it->count : 0;
}

// Column view of the training matrix for sparse split evaluation.
struct ColumnIndex {
  std::vector<std::size_t> start;  // dimension + 1
  std::vector<std::uint32_t> row;
  std::vector<std::uint32_t> value;

  explicit ColumnIndex(const FeatureMatrix& m) : start(m.dimension + 1, 0) {
    for (const auto& r : m.rows) {
      for (const auto& e : r) ++start[e.index + 1];
    }
    std::partial_sum(start.begin(), start.end(), start.begin());
    row.resize(start.back());
    value.resize(start.back());
    std::vector<std::size_t> fill(start.begin(), start.end() - 1);
    for (std::size_t i = 0; i < m.rows.size(); ++i) {
      for (const auto& e : m.rows[i]) {
        const std::size_t at = fill[e.index]++;
        row[at] = static_cast<std::uint32_t>(i);
        value[at] = e.count;
      }
    }
  }

  std::size_t nnz(std::uint32_t f) const { return start[f + 1] - start[f]; }
};

class TreeBuilder {
 public:
  TreeBuilder(const FeatureMatrix& m, const ColumnIndex& cols, const ForestParams& p,
              std::uint64_t seed)
      : m_(m),
        cols_(cols),
        params_(p),
        rng_(seed),
        weight_(m.rows.size(), 0),
        stamp_(m.rows.size(), 0),
        perm_(m.dimension) {
    std::iota(perm_.begin(), perm_.end(), 0u);
  }

  DecisionTree build() {
    const std::size_t n = m_.rows.size();
    if (params_.bootstrap) {
      for (std::size_t i = 0; i < n; ++i) ++weight_[rng_.uniform_index(n)];
    } else {
      std::fill(weight_.begin(), weight_.end(), 1u);
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (weight_[i] > 0) samples_.push_back(static_cast<std::uint32_t>(i));
    }

    struct Pending {
      std::size_t begin, end, depth;
      std::optional<std::size_t> parent;  // set when this is a right child
    };
    std::vector<Pending> stack{{0, samples_.size(), 0, std::nullopt}};
    while (!stack.empty()) {
      const Pending job = stack.back();
      stack.pop_back();
      const auto index = static_cast<std::uint32_t>(nodes_.size());
      if (job.parent) nodes_[*job.parent].right = index;
      nodes_.emplace_back();

      const std::span<std::uint32_t> node(samples_.data() + job.begin, job.end - job.begin);
      ClassCounts counts;
      for (std::uint32_t r : node) {
        (m_.labels[r] == SampleLabel::benign ? counts.benign : counts.malware) += weight_[r];
      }
      nodes_[index].counts = counts;

      const bool pure = counts.malware == 0 || counts.benign == 0;
      const bool too_small = node.size() < params_.min_samples_split;
      const bool too_deep = params_.max_depth && job.depth >= *params_.max_depth;
      if (pure || too_small || too_deep) continue;

      const auto split = choose_split(node, counts);
      if (!split) continue;

      auto mid = std::stable_partition(node.begin(), node.end(), [&](std::uint32_t r) {
        return static_cast<double>(value_at(m_.rows[r], split->first)) <= split->second;
      });
      const std::size_t cut = job.begin + static_cast<std::size_t>(mid - node.begin());
      nodes_[index].feature = split->first;
      nodes_[index].threshold = split->second;
      nodes_[index].counts = {};
      stack.push_back({cut, job.end, job.depth + 1, index});
      stack.push_back({job.begin, cut, job.depth + 1, std::nullopt});
    }
    return DecisionTree(std::move(nodes_));
  }

 private:
  // Draws features without replacement until `quota` have been visited and
  // at least one of them varies inside the node. The best split among the
  // varying ones is taken even if it does not lower impurity, so growth only
  // stops at pure nodes, size or depth limits, or rows that are identical on
  // every feature.
  std::optional<std::pair<std::uint32_t, double>> choose_split(std::span<const std::uint32_t> node,
                                                               const ClassCounts& counts) {
    ++current_stamp_;
    for (std::uint32_t r : node) stamp_[r] = current_stamp_;

    const std::size_t dim = perm_.size();
    const std::size_t quota = params_.features_per_split.resolve(dim);
    const double row_cost = static_cast<double>(node.size()) *
                            (1.0 + std::log2(1.0 + average_row_nnz()));

    std::optional<std::pair<std::uint32_t, double>> best;
    detail::SplitScore best_score;
    std::size_t visited = 0, varying = 0;
    for (std::size_t i = 0; i < dim && (visited < quota || varying == 0); ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng_.uniform_index(dim - i));
      std::swap(perm_[i], perm_[j]);
      const std::uint32_t f = perm_[i];
      ++visited;

      gather(f, node, counts, static_cast<double>(cols_.nnz(f)) < row_cost);
      const auto scan = detail::scan_feature(values_);
      if (scan.constant) continue;
      ++varying;
      if (!best || scan.score > best_score || (scan.score == best_score && f < best->first)) {
        best = {f, scan.threshold};
        best_score = scan.score;
      }
    }
    return best;
  }

  void gather(std::uint32_t f, std::span<const std::uint32_t> node, const ClassCounts& counts,
              bool by_column) {
    values_.clear();
    ClassCounts nonzero;
    auto add = [&](std::uint32_t r, std::uint32_t v) {
      const std::uint64_t w = weight_[r];
      const bool benign = m_.labels[r] == SampleLabel::benign;
      values_.push_back({static_cast<double>(v), benign ? 0 : w, benign ? w : 0});
      (benign ? nonzero.benign : nonzero.malware) += w;
    };
    if (by_column) {
      for (std::size_t k = cols_.start[f]; k < cols_.start[f + 1]; ++k) {
        const std::uint32_t r = cols_.row[k];
        if (stamp_[r] == current_stamp_) add(r, cols_.value[k]);
      }
    } else {
      for (std::uint32_t r : node) {
        if (const std::uint32_t v = value_at(m_.rows[r], f); v != 0) add(r, v);
      }
    }
    values_.push_back({0.0, counts.malware - nonzero.malware, counts.benign - nonzero.benign});
  }

  double average_row_nnz() const {
    return m_.rows.empty() ? 0.0
                           : static_cast<double>(cols_.row.size()) / static_cast<double>(m_.rows.size());
  }

  const FeatureMatrix& m_;
  const ColumnIndex& cols_;
  const ForestParams& params_;
  Rng rng_;
  std::vector<std::uint32_t> weight_;
  std::vector<std::uint64_t> stamp_;
  std::uint64_t current_stamp_ = 0;
  std::vector<std::uint32_t> perm_;
  std::vector<std::uint32_t> samples_;
  std::vector<detail::ValueMass> values_;
  std::vector<TreeNode> nodes_;
};

}  // namespace

const TreeNode& DecisionTree::leaf_for(std::span<const SparseEntry> row) const {
  std::size_t i = 0;
  while (!nodes_[i].is_leaf()) {
    const auto v = static_cast<double>(value_at(row, nodes_[i].feature));
    i = v <= nodes_[i].threshold ? i + 1 : nodes_[i].right;
  }
  return nodes_[i];
}

double DecisionTree::benign_fraction(std::span<const SparseEntry> row) const {
  const auto& leaf = leaf_for(row);
  return static_cast<double>(leaf.counts.benign) / static_cast<double>(leaf.counts.total());
}

std::size_t DecisionTree::depth() const {
  // Preorder walk with an explicit depth stack.
  std::size_t deepest = 0;
  std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
  while (!stack.empty()) {
    auto [i, d] = stack.back();
    stack.pop_back();
    deepest = std::max(deepest, d);
    if (!nodes_[i].is_leaf()) {
      stack.push_back({nodes_[i].right, d + 1});
      stack.push_back({i + 1, d + 1});
    }
  }
  return deepest;
}

ForestModel train_forest(const FeatureMatrix& matrix, const ForestParams& params) {
  params.validate();
  if (matrix.rows.empty() || matrix.dimension == 0) {
    throw Error(ErrorCode::EmptyMatrix, "cannot train on an empty feature matrix");
  }
  if (matrix.labels.size() != matrix.rows.size()) {
    throw Error(ErrorCode::DimensionMismatch, std::to_string(matrix.labels.size()) +
                                                  " labels for " + std::to_string(matrix.rows.size()) +
                                                  " rows");
  }
  for (std::size_t i = 0; i < matrix.rows.size(); ++i) {
    for (const auto& e : matrix.rows[i]) {
      if (e.index >= matrix.dimension) {
        throw Error(ErrorCode::DimensionMismatch, "row " + std::to_string(i) + " has feature " +
                                                      std::to_string(e.index) + " >= dimension " +
                                                      std::to_string(matrix.dimension));
      }
    }
  }

  ForestModel model;
  model.params = params;
  model.feature_dimension = matrix.dimension;
  model.vocab_fingerprints = matrix.vocab_fingerprints;
  model.metadata.seed = params.seed;
  model.metadata.seed_derivation = "derive_seed(seed, tree_index); " + std::string(kRngAlgorithm);
  model.metadata.n_rows = matrix.rows.size();
  for (SampleLabel l : matrix.labels) {
    (l == SampleLabel::benign ? model.metadata.class_counts.benign
                              : model.metadata.class_counts.malware) += 1;
  }
  if (model.metadata.class_counts.benign == 0 || model.metadata.class_counts.malware == 0) {
    std::clog << "warning: training data contains a single class\n";
  }

  const ColumnIndex cols(matrix);
  model.trees.resize(params.n_trees);
  parallel_for(params.n_trees, params.workers, [&](std::size_t t) {
    TreeBuilder builder(matrix, cols, params, derive_seed(params.seed, t));
    model.trees[t] = builder.build();
  });
  return model;
}

double predict_proba(const ForestModel& model, std::span<const SparseEntry> row) {
  double sum = 0.0;
  for (const auto& tree : model.trees) sum += tree.benign_fraction(row);
  return sum / static_cast<double>(model.trees.size());
}

double predict_proba(const ForestModel& model, const FeatureVector& row) {
  if (row.dimension != model.feature_dimension) {
    throw Error(ErrorCode::DimensionMismatch, "row has dimension " + std::to_string(row.dimension) +
                                                  ", model expects " +
                                                  std::to_string(model.feature_dimension));
  }
  return predict_proba(model, std::span<const SparseEntry>(row.entries));
}

std::vector<double> predict_proba(const ForestModel& model, const FeatureMatrix& matrix,
                                  std::size_t workers) {
  if (matrix.dimension != model.feature_dimension) {
    throw Error(ErrorCode::DimensionMismatch, "matrix has dimension " +
                                                  std::to_string(matrix.dimension) +
                                                  ", model expects " +
                                                  std::to_string(model.feature_dimension));
  }
  std::vector<double> out(matrix.rows.size());
  parallel_for(matrix.rows.size(), workers,
               [&](std::size_t i) { out[i] = predict_proba(model, std::span<const SparseEntry>(matrix.rows[i])); });
  return out;
}

SampleLabel predict(const ForestModel& model, const FeatureVector& row, double threshold) {
  return predict_proba(model, row) >= threshold ? SampleLabel::benign : SampleLabel::malware;
}

}  // namespace apifreq
