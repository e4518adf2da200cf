#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <vector>

#include "apifreq/forest.hpp"
#include "int128.hpp"

namespace apifreq::detail {



/// One observed feature value in a node with the class weights carrying it.
struct ValueMass {
  double value;
  std::uint64_t malware;
  std::uint64_t benign;
};

/// Split quality as an exact fraction: S = a/nl + b/nr with a, b the sums of
/// squared class weights on each side. Maximizing S minimizes the weighted
/// child Gini impurity; comparing with integers makes ties exact.
struct SplitScore {
  u128 num = 0;
  u128 den = 1;

  friend bool operator>(const SplitScore& x, const SplitScore& y) { return x.num * y.den > y.num * x.den; }
  friend bool operator==(const SplitScore& x, const SplitScore& y) { return x.num * y.den == y.num * x.den; }
};

struct FeatureScan {
  bool constant = true;
  double threshold = 0.0;
  SplitScore score;
};

inline std::uint64_t sum_sq(std::uint64_t m, std::uint64_t b) { return m * m + b * b; }

/// Sorts and merges `values` in place, then evaluates every midpoint
/// threshold. Keeps the lowest threshold among equal scores.
inline FeatureScan scan_feature(std::vector<ValueMass>& values) {
  FeatureScan out;
  std::sort(values.begin(), values.end(),
            [](const ValueMass& a, const ValueMass& b) { return a.value < b.value; });
  std::size_t w = 0;
  for (std::size_t r = 0; r < values.size(); ++r) {
    if (w > 0 && values[w - 1].value == values[r].value) {
      values[w - 1].malware += values[r].malware;
      values[w - 1].benign += values[r].benign;
    } else if (values[r].malware + values[r].benign > 0) {
      values[w++] = values[r];
    }
  }
  values.resize(w);
  if (values.size() < 2) return out;

  std::uint64_t tot_m = 0, tot_b = 0;
  for (const auto& v : values) {
    tot_m += v.malware;
    tot_b += v.benign;
  }
  out.constant = false;
  bool have = false;
  std::uint64_t lm = 0, lb = 0;
  for (std::size_t i = 0; i + 1 < values.size(); ++i) {
    lm += values[i].malware;
    lb += values[i].benign;
    const std::uint64_t rm = tot_m - lm, rb = tot_b - lb;
    const std::uint64_t nl = lm + lb, nr = rm + rb;
    SplitScore s;
    s.num = static_cast<u128>(sum_sq(lm, lb)) * nr + static_cast<u128>(sum_sq(rm, rb)) * nl;
    s.den = static_cast<u128>(nl) * nr;
    if (!have || s > out.score) {
      have = true;
      out.score = s;
      const double lo = values[i].value, hi = values[i + 1].value;
      double mid = lo + (hi - lo) / 2.0;
      if (!(mid < hi)) mid = lo;
      out.threshold = mid;
    }
  }
  return out;
}

/// Parent score sq/N expressed as a SplitScore for gain comparisons.
inline SplitScore parent_score(const ClassCounts& c) {
  return SplitScore{static_cast<u128>(sum_sq(c.malware, c.benign)), static_cast<u128>(c.total())};
}

/// (S - sq/N) / N as a double, computed from the exact integer difference.
inline double impurity_decrease(const SplitScore& s, const ClassCounts& c) {
  const u128 n = c.total();
  const u128 sq = sum_sq(c.malware, c.benign);
  const u128 lhs = s.num * n, rhs = sq * s.den;
  if (lhs <= rhs) return 0.0;
  return static_cast<double>(static_cast<long double>(lhs - rhs) /
                             (static_cast<long double>(s.den) * static_cast<long double>(n) *
                              static_cast<long double>(n)));
}

}  // namespace apifreq::detail
