#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "apifreq/featurization.hpp"
#include "apifreq/forest.hpp"
#include "apifreq/trace_corpus.hpp"

namespace apifreq {

inline constexpr std::string_view kConfigEnvVar = "APIFREQ_CONFIG";

/// Every knob of a sweep. Text form is one `key = value` per line, `#`
/// starts a comment, lists are comma-separated:
///
///   corpus_dir = data/traces
///   manifest = data/manifest.csv
///   report_dir = reports
///   cache_dir = reports/cache
///   variants = unigram,bigram,trigram,combined
///   lengths = 50,100,150,200,250,500,750,1000,2500,5000,7500,10000,20000,100000
///   seeds = 42,21,63
///   train_fraction = 0.75
///   n_trees = 100
///   max_depth = none
///   min_samples_split = 2
///   features_per_split = sqrt        # sqrt | log2 | all | <count>
///   bootstrap = true
///   vocab_scope = train              # train | dataset
///   decision_threshold = 0.5
///   strict = true
///   calls_pointer = /api_calls
///   threads = 0                      # 0 = all cores
struct ExperimentConfig {
  std::vector<Variant> variants{Variant::unigram, Variant::bigram, Variant::trigram, Variant::combined};
  std::vector<std::size_t> lengths{50,   100,  150,  200,   250,   500,   750,
                                   1000, 2500, 5000, 7500, 10000, 20000, 100000};
  std::vector<std::uint64_t> seeds{42, 21, 63};
  double train_fraction = 0.75;
  ForestParams forest;
  bool vocab_dataset_wide = false;
  double decision_threshold = 0.5;
  bool strict = true;
  TraceSchema schema;
  std::size_t threads = 0;

  std::filesystem::path corpus_dir;
  std::filesystem::path manifest;
  std::filesystem::path report_dir = "reports";
  std::filesystem::path cache_dir;  // empty = <report_dir>/cache

  void validate() const;
  std::filesystem::path effective_cache_dir() const;
  /// Everything that influences cell values, in a stable textual form.
  std::string canonical() const;
};

/// Applies one `key = value` setting; throws InvalidConfig for unknown keys
/// or bad values.
void apply_setting(ExperimentConfig& config, std::string_view key, std::string_view value);

ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string config_to_text(const ExperimentConfig& config);

}  // namespace apifreq
