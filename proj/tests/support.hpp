#pragma once

// Independent reference implementations and fixtures shared by the unit
// tests and the acceptance runner. Nothing here calls into the code under
// test except to read its outputs.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "apifreq/error.hpp"
#include "apifreq/evaluation.hpp"
#include "apifreq/featurization.hpp"
#include "apifreq/forest.hpp"
#include "apifreq/trace_corpus.hpp"

namespace apifreq::testing {

inline std::optional<ErrorCode> code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

inline std::vector<std::string> names(std::size_t k) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back("Nt" + std::string(1, char('A' + i / 26)) + char('a' + i % 26));
  return out;
}

inline std::string hex_id(std::uint64_t n) {
  static const char* digits = "0123456789abcdef";
  std::string s(64, '0');
  for (int i = 63; i >= 0 && n; --i, n >>= 4) s[static_cast<std::size_t>(i)] = digits[n & 15];
  return s;
}

inline ApiTrace random_trace(std::mt19937_64& gen, const std::vector<std::string>& alphabet,
                             std::size_t max_len, std::uint64_t id = 0) {
  ApiTrace t;
  t.sample_id = hex_id(id);
  std::uniform_int_distribution<std::size_t> len(0, max_len);
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  const std::size_t n = len(gen);
  for (std::size_t i = 0; i < n; ++i) t.calls.push_back(alphabet[pick(gen)]);
  return t;
}

// Every distinct window of order n in the truncated traces, sorted.
inline std::vector<std::vector<std::string>> naive_vocab(const std::vector<ApiTrace>& traces, int n,
                                                         std::size_t limit) {
  std::set<std::vector<std::string>> grams;
  for (const auto& t : traces) {
    const std::size_t len = std::min(limit, t.calls.size());
    for (std::size_t p = 0; p + static_cast<std::size_t>(n) <= len; ++p)
      grams.insert(std::vector<std::string>(t.calls.begin() + p, t.calls.begin() + p + n));
  }
  return {grams.begin(), grams.end()};
}

// Counts by brute-force window comparison against each vocabulary entry.
inline std::vector<std::uint32_t> naive_counts(const ApiTrace& trace, std::size_t limit,
                                               const NGramVocabulary& vocab) {
  const std::size_t len = std::min(limit, trace.calls.size());
  const std::size_t n = static_cast<std::size_t>(vocab.order());
  std::vector<std::uint32_t> counts(vocab.size(), 0);
  std::map<std::vector<std::string>, std::uint32_t> seen;
  for (std::size_t p = 0; p + n <= len; ++p) {
    std::vector<std::string> w;
    for (std::size_t k = 0; k < n; ++k) w.push_back(trace.calls[p + k]);
    ++seen[w];
  }
  for (std::size_t j = 0; j < vocab.size(); ++j) {
    const auto g = vocab.gram(j);
    auto it = seen.find(std::vector<std::string>(g.begin(), g.end()));
    if (it != seen.end()) counts[j] = it->second;
  }
  return counts;
}

struct OracleSplit {
  std::size_t feature;
  double threshold;
  double decrease;
};

// Every (feature, midpoint) pair, scored exactly as sum over children of
// (m^2 + b^2) / n, compared by cross-multiplication.
inline std::optional<OracleSplit> exhaustive_split(const std::vector<std::vector<double>>& rows,
                                                   const std::vector<SampleLabel>& labels,
                                                   const std::vector<std::size_t>& features) {
  const std::int64_t n = static_cast<std::int64_t>(rows.size());
  std::int64_t m = 0, b = 0;
  for (auto l : labels) (l == SampleLabel::benign ? b : m)++;
  // best as fraction num/den
  std::int64_t best_num = m * m + b * b, best_den = n;
  std::optional<OracleSplit> best;
  for (std::size_t f : features) {
    std::vector<double> vals;
    for (const auto& r : rows) vals.push_back(r[f]);
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
      const double thr = vals[i] + (vals[i + 1] - vals[i]) / 2;
      std::int64_t ml = 0, bl = 0, mr = 0, br = 0;
      for (std::size_t r = 0; r < rows.size(); ++r) {
        const bool benign = labels[r] == SampleLabel::benign;
        if (rows[r][f] <= thr)
          (benign ? bl : ml)++;
        else
          (benign ? br : mr)++;
      }
      const std::int64_t nl = ml + bl, nr = mr + br;
      const std::int64_t num = (ml * ml + bl * bl) * nr + (mr * mr + br * br) * nl;
      const std::int64_t den = nl * nr;
      if (num * best_den > best_num * den) {
        best_num = num;
        best_den = den;
        const double parent = 1.0 - (double(m) * m + double(b) * b) / (double(n) * n);
        const double gl = 1.0 - (double(ml) * ml + double(bl) * bl) / (double(nl) * nl);
        const double gr = 1.0 - (double(mr) * mr + double(br) * br) / (double(nr) * nr);
        best = OracleSplit{f, thr, parent - (double(nl) / n) * gl - (double(nr) / n) * gr};
      }
    }
  }
  return best;
}

// Walks every tree on the dense row and averages leaf benign fractions.
inline double traversal_proba(const ForestModel& model, const std::vector<std::uint32_t>& dense) {
  double sum = 0.0;
  for (const auto& tree : model.trees) {
    const auto& nodes = tree.nodes();
    std::size_t i = 0;
    while (!nodes[i].is_leaf()) {
      i = static_cast<double>(dense[nodes[i].feature]) <= nodes[i].threshold ? i + 1 : nodes[i].right;
    }
    const auto& c = nodes[i].counts;
    sum += static_cast<double>(c.benign) / static_cast<double>(c.benign + c.malware);
  }
  return sum / static_cast<double>(model.trees.size());
}

// (2 * concordant + ties) / (2 * P * N) over every benign x malware pair.
inline double pairwise_auc(const std::vector<double>& scores, const std::vector<SampleLabel>& actual) {
  std::uint64_t twice = 0, pos = 0, neg = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (actual[i] != SampleLabel::benign) continue;
    ++pos;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (actual[j] != SampleLabel::malware) continue;
      if (scores[i] > scores[j]) twice += 2;
      else if (scores[i] == scores[j]) twice += 1;
    }
  }
  for (auto a : actual) neg += a == SampleLabel::malware;
  return static_cast<double>(twice) / static_cast<double>(2 * pos * neg);
}

inline ConfusionMatrix confusion_at(const std::vector<double>& scores, const std::vector<SampleLabel>& actual,
                                    double threshold) {
  ConfusionMatrix cm{};
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= threshold;
    const bool pos = actual[i] == SampleLabel::benign;
    if (pred && pos) ++cm.tp;
    else if (pred) ++cm.fp;
    else if (pos) ++cm.fn;
    else ++cm.tn;
  }
  return cm;
}

struct ScratchDir {
  std::filesystem::path path;
  explicit ScratchDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("apifreq-" + tag + "-" + std::to_string(std::random_device{}()));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;
};

inline std::vector<std::vector<std::string>> read_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::size_t c = 0;
    while (true) {
      std::size_t comma = line.find(',', c);
      cells.push_back(line.substr(c, comma - c));
      if (comma == std::string::npos) break;
      c = comma + 1;
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

}  // namespace apifreq::testing
