#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "apifreq/trace_corpus.hpp"

namespace apifreq {

/// Desk-scale stand-in for the real trace corpus. Each class draws its calls
/// i.i.d. from its own profile:
///   profile_c = (1 - divergence) * shared + divergence * specific_c
/// where `shared` is a Dirichlet(1) draw over the whole alphabet and the
/// class-specific parts are Dirichlet(1) draws over disjoint halves of it.
/// divergence 0 gives identical classes, 1 gives disjoint call alphabets.
struct SyntheticSpec {
  std::size_t n_samples = 1000;
  double benign_fraction = 0.03;
  std::size_t alphabet_size = 59;
  std::size_t min_length = 50;  // trace lengths are uniform in [min, max]
  std::size_t max_length = 3000;
  double divergence = 0.5;
  double ambiguous_fraction = 0.0;  // entries written with both labels
  std::uint64_t seed = 42;

  void validate() const;
};

struct ClassProfiles {
  std::vector<std::string> names;
  std::vector<double> malware;
  std::vector<double> benign;
};

ClassProfiles class_profiles(const SyntheticSpec& spec);

struct SyntheticCorpus {
  std::vector<ApiTrace> traces;  // labeled, generation order
  CorpusManifest manifest;
  ClassProfiles profiles;
};

SyntheticCorpus generate_synthetic_corpus(const SyntheticSpec& spec);

/// Writes <dir>/manifest.csv and <dir>/traces/<sample_id>.json.
void write_corpus(const SyntheticCorpus& corpus, const std::filesystem::path& dir);

/// Names used for the first entries of the alphabet; larger alphabets are
/// padded with generated names.
std::vector<std::string> api_alphabet(std::size_t size);

}  // namespace apifreq
