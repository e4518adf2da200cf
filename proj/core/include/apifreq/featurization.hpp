#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "apifreq/trace_corpus.hpp"

namespace apifreq {

enum class Variant : std::uint8_t { unigram = 0, bigram = 1, trigram = 2, combined = 3 };

std::string_view to_string(Variant variant) noexcept;
std::optional<Variant> parse_variant(std::string_view text) noexcept;
/// n-gram orders concatenated by a variant, e.g. {1, 2, 3} for combined.
std::vector<int> variant_orders(Variant variant);

/// Number of leading API calls considered when featurizing a trace.
class LengthThreshold {
 public:
  explicit LengthThreshold(std::size_t calls);
  static constexpr LengthThreshold unlimited() noexcept { return LengthThreshold(kUnlimited, 0); }

  std::size_t value() const noexcept { return value_; }
  bool is_unlimited() const noexcept { return value_ == kUnlimited; }
  std::string to_string() const;

  friend bool operator==(LengthThreshold, LengthThreshold) = default;
  friend auto operator<=>(LengthThreshold, LengthThreshold) = default;

 private:
  static constexpr std::size_t kUnlimited = std::numeric_limits<std::size_t>::max();
  constexpr LengthThreshold(std::size_t v, int) noexcept : value_(v) {}
  std::size_t value_;
};

/// First min(limit, |trace|) calls.
std::span<const std::string> truncate_trace(const ApiTrace& trace, LengthThreshold limit) noexcept;

/// Maps each distinct n-gram to a feature index. Indices follow the
/// lexicographic order of the n-gram tuples, so two vocabularies built from
/// the same grams are identical, including their fingerprint.
class NGramVocabulary {
 public:
  using Gram = std::vector<std::string>;

  /// Deduplicates and sorts. Every gram must have exactly n names.
  static NGramVocabulary from_grams(int n, std::vector<Gram> grams);

  int order() const noexcept { return n_; }
  std::size_t size() const noexcept { return size_; }
  const std::string& fingerprint() const noexcept { return fingerprint_; }

  std::optional<std::size_t> index_of(std::span<const std::string> gram) const;
  Gram gram(std::size_t index) const;

  /// Calls the sink with the feature index of every in-vocabulary n-gram
  /// window of `calls`, left to right.
  template <typename Sink>
  void for_each_window(std::span<const std::string> calls, Sink&& sink) const;

  std::string to_json() const;
  static NGramVocabulary from_json(std::string_view text);

 private:
  static constexpr std::uint32_t kNoName = std::numeric_limits<std::uint32_t>::max();

  std::uint32_t name_id(const std::string& name) const;
  std::uint64_t key_of(const std::uint32_t* ids) const noexcept;

  int n_ = 1;
  std::size_t size_ = 0;
  std::vector<std::string> names_;            // sorted distinct names
  std::vector<std::uint32_t> gram_ids_;       // size_ * n_, row per index
  std::unordered_map<std::string, std::uint32_t> name_ids_;
  std::unordered_map<std::uint64_t, std::uint32_t> index_by_key_;
  std::string fingerprint_;
};

/// Builds the vocabulary of order n over the given traces, each truncated to
/// `limit`. Partial sets are collected in parallel and merged.
NGramVocabulary build_ngram_vocab(std::span<const ApiTrace> traces, int n,
                                  LengthThreshold limit = LengthThreshold::unlimited(),
                                  std::size_t workers = 0);

struct SparseEntry {
  std::uint32_t index;
  std::uint32_t count;

  friend bool operator==(const SparseEntry&, const SparseEntry&) = default;
};

/// Count vector, stored sparsely: entries sorted by index, counts > 0.
struct FeatureVector {
  Variant variant = Variant::unigram;
  std::size_t dimension = 0;
  std::vector<SparseEntry> entries;

  std::uint32_t operator[](std::size_t index) const noexcept;
  std::vector<std::uint32_t> dense() const;
  std::uint64_t total() const noexcept;

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

struct VocabularySet {
  std::optional<NGramVocabulary> unigram;
  std::optional<NGramVocabulary> bigram;
  std::optional<NGramVocabulary> trigram;

  const NGramVocabulary& order(int n) const;
  /// Feature dimension of a variant over these vocabularies.
  std::size_t dimension(Variant variant) const;
  std::vector<std::string> fingerprints(Variant variant) const;
};

VocabularySet build_vocabularies(std::span<const ApiTrace> traces, Variant variant,
                                 LengthThreshold limit = LengthThreshold::unlimited(),
                                 std::size_t workers = 0);

FeatureVector featurize_ngram(const ApiTrace& trace, LengthThreshold limit,
                              const NGramVocabulary& vocab);

/// [unigram counts | bigram counts | trigram counts].
FeatureVector featurize_combined(const ApiTrace& trace, LengthThreshold limit,
                                 const NGramVocabulary& uni, const NGramVocabulary& bi,
                                 const NGramVocabulary& tri);

FeatureVector featurize(const ApiTrace& trace, LengthThreshold limit, Variant variant,
                        const VocabularySet& vocabs);

/// Row-per-sample sparse count matrix.
struct FeatureMatrix {
  Variant variant = Variant::unigram;
  LengthThreshold threshold = LengthThreshold::unlimited();
  std::size_t dimension = 0;
  std::vector<std::vector<SparseEntry>> rows;
  std::vector<SampleLabel> labels;           // parallel to rows; may be empty when loaded from cache
  std::vector<std::string> sample_ids;       // parallel to rows; may be empty when loaded from cache
  std::vector<std::string> vocab_fingerprints;

  std::size_t row_count() const noexcept { return rows.size(); }
  FeatureVector row(std::size_t i) const;
};

/// Featurizes every trace; row order is input order for any worker count.
/// Traces must carry labels.
FeatureMatrix featurize_corpus(std::span<const ApiTrace> traces, LengthThreshold limit,
                               Variant variant, const VocabularySet& vocabs,
                               std::size_t workers = 0);

// Feature cache (binary, little-endian):
//   magic "APFM" | u32 version | u8 variant | u64 threshold (0 = unlimited)
//   | u64 dimension | u64 rows | u32 n_fingerprints, each u32 length + bytes
//   then per row: u32 nnz, nnz x (u32 index, u32 count), indices ascending.
inline constexpr std::uint32_t kFeatureCacheVersion = 1;

std::string encode_feature_matrix(const FeatureMatrix& matrix);
FeatureMatrix decode_feature_matrix(std::string_view bytes);
void save_feature_matrix(const FeatureMatrix& matrix, const std::filesystem::path& path);
FeatureMatrix load_feature_matrix(const std::filesystem::path& path);

/// Long-form CSV export: row,feature,count for every non-zero entry.
std::string feature_matrix_csv(const FeatureMatrix& matrix);

/// Labels file: CSV `sample_id,label`, one row per matrix row.
std::string labels_csv(const FeatureMatrix& matrix);
void attach_labels(FeatureMatrix& matrix, std::string_view labels_csv_text);

void save_vocabulary(const NGramVocabulary& vocab, const std::filesystem::path& path);
NGramVocabulary load_vocabulary(const std::filesystem::path& path);

template <typename Sink>
void NGramVocabulary::for_each_window(std::span<const std::string> calls, Sink&& sink) const {
  if (calls.size() < static_cast<std::size_t>(n_)) return;
  std::vector<std::uint32_t> ids(calls.size());
  for (std::size_t i = 0; i < calls.size(); ++i) ids[i] = name_id(calls[i]);
  const std::size_t windows = calls.size() - static_cast<std::size_t>(n_) + 1;
  for (std::size_t p = 0; p < windows; ++p) {
    bool known = true;
    for (int k = 0; k < n_; ++k) known = known && ids[p + static_cast<std::size_t>(k)] != kNoName;
    if (!known) continue;
    if (auto it = index_by_key_.find(key_of(&ids[p])); it != index_by_key_.end()) sink(it->second);
  }
}

}  // namespace apifreq
