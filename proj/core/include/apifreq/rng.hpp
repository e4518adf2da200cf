#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace apifreq {

/// Name recorded in split artifacts and provenance.
inline constexpr std::string_view kRngAlgorithm = "mt19937_64+lemire-bounded";

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Mixes a base seed with a stream index (tree index, class id, ...).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) noexcept;

/// Portable seeded generator. The engine sequence is fixed by the standard;
/// bounded integers and doubles are derived here instead of through
/// <random> distributions, whose outputs vary between standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, bound). bound must be > 0.
  std::uint64_t uniform_index(std::uint64_t bound);

  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform01();

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform_index(i));
      using std::swap;
      swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace apifreq
