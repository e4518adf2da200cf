#include "apifreq/featurization.hpp"

#include <algorithm>
#include <iterator>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "apifreq/error.hpp"
#include "apifreq/hash.hpp"
#include "apifreq/parallel.hpp"

namespace apifreq {

using nlohmann::json;

std::string_view to_string(Variant variant) noexcept {
  switch (variant) {
    case Variant::unigram: return "unigram";
    case Variant::bigram: return "bigram";
    case Variant::trigram: return "trigram";
    case Variant::combined: return "combined";
  }
  return "unknown";
}

std::optional<Variant> parse_variant(std::string_view text) noexcept {
  for (Variant v : {Variant::unigram, Variant::bigram, Variant::trigram, Variant::combined}) {
    if (text == to_string(v)) return v;
  }
  return std::nullopt;
}

std::vector<int> variant_orders(Variant variant) {
  switch (variant) {
    case Variant::unigram: return {1};
    case Variant::bigram: return {2};
    case Variant::trigram: return {3};
    case Variant::combined: return {1, 2, 3};
  }
  return {};
}

LengthThreshold::LengthThreshold(std::size_t calls) : value_(calls) {
  if (calls == 0) throw Error(ErrorCode::InvalidConfig, "length threshold must be >= 1");
}

std::string LengthThreshold::to_string() const {
  return is_unlimited() ? std::string("unlimited") : std::to_string(value_);
}

std::span<const std::string> truncate_trace(const ApiTrace& trace, LengthThreshold limit) noexcept {
  const std::size_t n = std::min(limit.value(), trace.calls.size());
  return std::span<const std::string>(trace.calls.data(), n);
}

// --- vocabulary --------------------------------------------------------------

NGramVocabulary NGramVocabulary::from_grams(int n, std::vector<Gram> grams) {
  if (n < 1 || n > 3) throw Error(ErrorCode::InvalidConfig, "n-gram order must be 1, 2 or 3");
  for (const auto& g : grams) {
    if (g.size() != static_cast<std::size_t>(n)) {
      throw Error(ErrorCode::SchemaMismatch, "gram of length " + std::to_string(g.size()) +
                                                 " in order-" + std::to_string(n) + " vocabulary");
    }
  }
  std::sort(grams.begin(), grams.end());
  grams.erase(std::unique(grams.begin(), grams.end()), grams.end());

  NGramVocabulary vocab;
  vocab.n_ = n;
  vocab.size_ = grams.size();

  std::vector<std::string> names;
  for (const auto& g : grams) names.insert(names.end(), g.begin(), g.end());
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  if (names.size() >= (std::size_t{1} << 21)) {
    throw Error(ErrorCode::InvalidConfig, "too many distinct API names for n-gram keys");
  }
  vocab.names_ = std::move(names);
  for (std::size_t i = 0; i < vocab.names_.size(); ++i) {
    vocab.name_ids_.emplace(vocab.names_[i], static_cast<std::uint32_t>(i));
  }

  Sha256 digest;
  digest.update("apifreq-vocab\nn=" + std::to_string(n) + "\n");
  vocab.gram_ids_.reserve(grams.size() * static_cast<std::size_t>(n));
  vocab.index_by_key_.reserve(grams.size());
  for (std::size_t i = 0; i < grams.size(); ++i) {
    std::string line = std::to_string(i) + "\t";
    for (int k = 0; k < n; ++k) {
      vocab.gram_ids_.push_back(vocab.name_ids_.at(grams[i][static_cast<std::size_t>(k)]));
      if (k != 0) line += ' ';
      line += grams[i][static_cast<std::size_t>(k)];
    }
    line += '\n';
    digest.update(line);
    vocab.index_by_key_.emplace(vocab.key_of(&vocab.gram_ids_[i * static_cast<std::size_t>(n)]),
                                static_cast<std::uint32_t>(i));
  }
  vocab.fingerprint_ = to_hex(digest.finish());
  return vocab;
}

std::uint32_t NGramVocabulary::name_id(const std::string& name) const {
  auto it = name_ids_.find(name);
  return it == name_ids_.end() ? kNoName : it->second;
}

std::uint64_t NGramVocabulary::key_of(const std::uint32_t* ids) const noexcept {
  const std::uint64_t base = names_.size();
  std::uint64_t key = 0;
  for (int k = 0; k < n_; ++k) key = key * base + ids[k];
  return key;
}

std::optional<std::size_t> NGramVocabulary::index_of(std::span<const std::string> gram) const {
  if (gram.size() != static_cast<std::size_t>(n_)) return std::nullopt;
  std::uint32_t ids[3];
  for (int k = 0; k < n_; ++k) {
    ids[k] = name_id(gram[static_cast<std::size_t>(k)]);
    if (ids[k] == kNoName) return std::nullopt;
  }
  auto it = index_by_key_.find(key_of(ids));
  if (it == index_by_key_.end()) return std::nullopt;
  return it->second;
}

NGramVocabulary::Gram NGramVocabulary::gram(std::size_t index) const {
  Gram g;
  for (int k = 0; k < n_; ++k) {
    g.push_back(names_[gram_ids_[index * static_cast<std::size_t>(n_) + static_cast<std::size_t>(k)]]);
  }
  return g;
}

std::string NGramVocabulary::to_json() const {
  json entries = json::array();
  for (std::size_t i = 0; i < size_; ++i) {
    entries.push_back({{"gram", gram(i)}, {"index", i}});
  }
  json doc = {{"n", n_}, {"entries", std::move(entries)}, {"fingerprint", fingerprint_}};
  return doc.dump(1) + "\n";
}

NGramVocabulary NGramVocabulary::from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::MalformedJson, std::string("vocabulary: ") + e.what());
  }
  try {
    const int n = doc.at("n").get<int>();
    const auto& entries = doc.at("entries");
    std::vector<Gram> grams(entries.size());
    std::vector<bool> used(entries.size(), false);
    for (const auto& e : entries) {
      const auto index = e.at("index").get<std::size_t>();
      if (index >= grams.size() || used[index]) {
        throw Error(ErrorCode::SchemaMismatch, "vocabulary indices are not 0..size-1");
      }
      used[index] = true;
      grams[index] = e.at("gram").get<Gram>();
    }
    NGramVocabulary vocab = from_grams(n, grams);
    if (vocab.size() != grams.size()) {
      throw Error(ErrorCode::SchemaMismatch, "vocabulary contains duplicate grams");
    }
    for (std::size_t i = 0; i < grams.size(); ++i) {
      if (vocab.index_of(grams[i]) != i) {
        throw Error(ErrorCode::SchemaMismatch, "vocabulary indices are not in lexicographic order");
      }
    }
    if (auto it = doc.find("fingerprint"); it != doc.end() && it->get<std::string>() != vocab.fingerprint()) {
      throw Error(ErrorCode::SchemaMismatch, "vocabulary fingerprint does not match its entries");
    }
    return vocab;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaMismatch, std::string("vocabulary: ") + e.what());
  }
}

void save_vocabulary(const NGramVocabulary& vocab, const std::filesystem::path& path) {
  write_file(path, vocab.to_json());
}

NGramVocabulary load_vocabulary(const std::filesystem::path& path) {
  return NGramVocabulary::from_json(read_file(path));
}

NGramVocabulary build_ngram_vocab(std::span<const ApiTrace> traces, int n, LengthThreshold limit,
                                  std::size_t workers) {
  if (n < 1 || n > 3) throw Error(ErrorCode::InvalidConfig, "n-gram order must be 1, 2 or 3");
  // Each chunk interns names locally and packs a gram into one integer
  // (21 bits per position), so only distinct grams are ever spelled out.
  constexpr std::uint64_t kBits = 21;
  constexpr std::uint64_t kMaxNames = std::uint64_t{1} << kBits;
  const std::size_t width = static_cast<std::size_t>(n);
  const std::size_t chunks = std::min<std::size_t>(traces.size(), resolve_workers(workers) * 4);
  std::vector<std::vector<NGramVocabulary::Gram>> partial(chunks);
  parallel_for(chunks, workers, [&](std::size_t c) {
    const std::size_t begin = traces.size() * c / chunks;
    const std::size_t end = traces.size() * (c + 1) / chunks;
    std::unordered_map<std::string_view, std::uint32_t> ids;
    std::vector<std::string_view> names;
    std::unordered_set<std::uint64_t> keys;
    std::vector<std::uint64_t> window(width);
    for (std::size_t t = begin; t < end; ++t) {
      const auto calls = truncate_trace(traces[t], limit);
      if (calls.size() < width) continue;
      for (std::size_t p = 0; p < calls.size(); ++p) {
        auto [it, fresh] = ids.try_emplace(calls[p], static_cast<std::uint32_t>(names.size()));
        if (fresh) {
          if (names.size() == kMaxNames) {
            throw Error(ErrorCode::InvalidConfig, "more than 2^21 distinct call names");
          }
          names.push_back(calls[p]);
        }
        window[p % width] = it->second;
        if (p + 1 < width) continue;
        std::uint64_t key = 0;
        for (std::size_t k = 0; k < width; ++k) key = (key << kBits) | window[(p + 1 + k) % width];
        keys.insert(key);
      }
    }
    auto& out = partial[c];
    out.reserve(keys.size());
    for (std::uint64_t key : keys) {
      NGramVocabulary::Gram g(width);
      for (std::size_t k = width; k-- > 0; key >>= kBits) g[k] = std::string(names[key & (kMaxNames - 1)]);
      out.push_back(std::move(g));
    }
  });

  std::vector<NGramVocabulary::Gram> grams;
  for (auto& part : partial) {
    std::move(part.begin(), part.end(), std::back_inserter(grams));
  }
  if (grams.empty()) {
    throw Error(ErrorCode::EmptyVocabulary, "no trace contains an " + std::to_string(n) +
                                                "-gram (" + std::to_string(traces.size()) +
                                                " traces)");
  }
  return NGramVocabulary::from_grams(n, std::move(grams));
}

// --- feature vectors -----------------------------------------------------------

std::uint32_t FeatureVector::operator[](std::size_t index) const noexcept {
  auto it = std::lower_bound(entries.begin(), entries.end(), index,
                             [](const SparseEntry& e, std::size_t i) { return e.index < i; });
  return it != entries.end() && it->index == index ? it->count : 0;
}

std::vector<std::uint32_t> FeatureVector::dense() const {
  std::vector<std::uint32_t> out(dimension, 0);
  for (const auto& e : entries) out[e.index] = e.count;
  return out;
}

std::uint64_t FeatureVector::total() const noexcept {
  std::uint64_t sum = 0;
  for (const auto& e : entries) sum += e.count;
  return sum;
}

namespace {

Variant variant_for_order(int n) {
  return n == 1 ? Variant::unigram : n == 2 ? Variant::bigram : Variant::trigram;
}

// Appends the run-length encoding of `indices` (shifted by offset) to `out`.
void append_counts(std::vector<std::uint32_t>& indices, std::uint32_t offset,
                   std::vector<SparseEntry>& out) {
  std::sort(indices.begin(), indices.end());
  for (std::size_t i = 0; i < indices.size();) {
    std::size_t j = i;
    while (j < indices.size() && indices[j] == indices[i]) ++j;
    out.push_back({indices[i] + offset, static_cast<std::uint32_t>(j - i)});
    i = j;
  }
}

void count_into(const ApiTrace& trace, LengthThreshold limit, const NGramVocabulary& vocab,
                std::uint32_t offset, std::vector<SparseEntry>& out) {
  std::vector<std::uint32_t> hits;
  vocab.for_each_window(truncate_trace(trace, limit),
                        [&](std::uint32_t index) { hits.push_back(index); });
  append_counts(hits, offset, out);
}

}  // namespace

FeatureVector featurize_ngram(const ApiTrace& trace, LengthThreshold limit,
                              const NGramVocabulary& vocab) {
  FeatureVector v;
  v.variant = variant_for_order(vocab.order());
  v.dimension = vocab.size();
  count_into(trace, limit, vocab, 0, v.entries);
  return v;
}

FeatureVector featurize_combined(const ApiTrace& trace, LengthThreshold limit,
                                 const NGramVocabulary& uni, const NGramVocabulary& bi,
                                 const NGramVocabulary& tri) {
  if (uni.order() != 1 || bi.order() != 2 || tri.order() != 3) {
    throw Error(ErrorCode::DimensionMismatch, "combined features need vocabularies of order 1, 2, 3");
  }
  FeatureVector v;
  v.variant = Variant::combined;
  v.dimension = uni.size() + bi.size() + tri.size();
  count_into(trace, limit, uni, 0, v.entries);
  count_into(trace, limit, bi, static_cast<std::uint32_t>(uni.size()), v.entries);
  count_into(trace, limit, tri, static_cast<std::uint32_t>(uni.size() + bi.size()), v.entries);
  return v;
}

const NGramVocabulary& VocabularySet::order(int n) const {
  const auto& slot = n == 1 ? unigram : n == 2 ? bigram : trigram;
  if (!slot) {
    throw Error(ErrorCode::InvalidConfig, "missing order-" + std::to_string(n) + " vocabulary");
  }
  return *slot;
}

std::size_t VocabularySet::dimension(Variant variant) const {
  std::size_t d = 0;
  for (int n : variant_orders(variant)) d += order(n).size();
  return d;
}

std::vector<std::string> VocabularySet::fingerprints(Variant variant) const {
  std::vector<std::string> out;
  for (int n : variant_orders(variant)) out.push_back(order(n).fingerprint());
  return out;
}

VocabularySet build_vocabularies(std::span<const ApiTrace> traces, Variant variant,
                                 LengthThreshold limit, std::size_t workers) {
  VocabularySet set;
  for (int n : variant_orders(variant)) {
    auto vocab = build_ngram_vocab(traces, n, limit, workers);
    (n == 1 ? set.unigram : n == 2 ? set.bigram : set.trigram) = std::move(vocab);
  }
  return set;
}

FeatureVector featurize(const ApiTrace& trace, LengthThreshold limit, Variant variant,
                        const VocabularySet& vocabs) {
  if (variant == Variant::combined) {
    return featurize_combined(trace, limit, vocabs.order(1), vocabs.order(2), vocabs.order(3));
  }
  return featurize_ngram(trace, limit, vocabs.order(variant_orders(variant).front()));
}

FeatureVector FeatureMatrix::row(std::size_t i) const {
  return FeatureVector{variant, dimension, rows.at(i)};
}

FeatureMatrix featurize_corpus(std::span<const ApiTrace> traces, LengthThreshold limit,
                               Variant variant, const VocabularySet& vocabs, std::size_t workers) {
  FeatureMatrix m;
  m.variant = variant;
  m.threshold = limit;
  m.dimension = vocabs.dimension(variant);
  m.vocab_fingerprints = vocabs.fingerprints(variant);
  m.rows.resize(traces.size());
  m.labels.resize(traces.size());
  m.sample_ids.resize(traces.size());
  parallel_for(traces.size(), workers, [&](std::size_t i) {
    const auto& trace = traces[i];
    if (!trace.label) {
      throw Error(ErrorCode::SchemaMismatch, "sample " + trace.sample_id + ": trace has no label");
    }
    m.rows[i] = featurize(trace, limit, variant, vocabs).entries;
    m.labels[i] = *trace.label;
    m.sample_ids[i] = trace.sample_id;
  });
  return m;
}

}  // namespace apifreq
