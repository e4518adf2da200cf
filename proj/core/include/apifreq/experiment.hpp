#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "apifreq/config.hpp"
#include "apifreq/evaluation.hpp"
#include "apifreq/featurization.hpp"
#include "apifreq/trace_corpus.hpp"

namespace apifreq {

inline constexpr std::string_view kSoftwareVersion = APIFREQ_VERSION_STRING;

/// Filtered, loaded corpus shared by every cell of a sweep.
struct Corpus {
  std::vector<ApiTrace> traces;       // labeled, manifest order
  std::vector<LabeledSample> samples;  // parallel to traces
  std::size_t dropped_ambiguous = 0;
  std::size_t missing = 0;
  std::string digest;  // identifies the sample set and labels
};

Corpus load_corpus(const ExperimentConfig& config);
Corpus make_corpus(std::vector<ApiTrace> labeled_traces);

struct CellKey {
  Variant variant;
  std::size_t length;
  std::uint64_t seed;

  friend auto operator<=>(const CellKey&, const CellKey&) = default;
  std::string to_string() const;
};

struct CellResult {
  MetricsReport metrics;
  std::vector<double> scores;       // P(benign) per test sample, sorted test id order
  std::vector<SampleLabel> actual;  // parallel to scores
  std::vector<std::string> vocab_fingerprints;

  friend bool operator==(const CellResult&, const CellResult&) = default;
};

struct Provenance {
  std::string config_hash;
  std::string config_canonical;
  std::string software_version{kSoftwareVersion};
  std::string rng_algorithm;
  std::string vocab_scope;
  std::map<std::uint64_t, std::vector<std::string>> vocab_fingerprints;  // per seed, orders 1..3 built
};

struct SweepResult {
  std::map<CellKey, CellResult> cells;
  std::vector<std::pair<CellKey, std::string>> failures;
  Provenance provenance;
  bool interrupted = false;  // stopped early via SweepOptions::max_new_cells

  bool complete() const noexcept { return failures.empty() && !interrupted; }
};

/// Forest seed for one cell; split and vocabulary depend on `seed` alone.
std::uint64_t cell_forest_seed(const CellKey& key) noexcept;

struct SweepOptions {
  bool use_cache = true;
  /// Stop after computing this many cells (cached cells do not count).
  /// Used to exercise interruption and resume.
  std::optional<std::size_t> max_new_cells;
  std::function<void(const CellKey&, bool cached)> on_cell;
};

/// Runs the protocol split(seed) -> vocabulary(train, unlimited length) ->
/// featurize(length, variant) -> forest -> test metrics. Per-seed splits and
/// vocabularies are prepared once and shared by that seed's cells.
class Experiment {
 public:
  Experiment(ExperimentConfig config, std::shared_ptr<const Corpus> corpus);

  const ExperimentConfig& config() const noexcept { return config_; }
  std::string config_hash() const;

  CellResult run_cell(Variant variant, LengthThreshold length, std::uint64_t seed,
                      std::size_t workers = 0);
  SweepResult run_sweep(const SweepOptions& options = {});

  std::filesystem::path cell_cache_path(const CellKey& key) const;

 private:
  struct SeedState {
    DatasetSplit split;
    std::vector<ApiTrace> train;
    std::vector<ApiTrace> test;
    VocabularySet vocabs;
  };
  const SeedState& seed_state(std::uint64_t seed, Variant variant, std::size_t workers);

  ExperimentConfig config_;
  std::shared_ptr<const Corpus> corpus_;
  std::mutex mutex_;
  std::map<std::uint64_t, std::unique_ptr<SeedState>> seeds_;
};

/// One cell computed from scratch, with no shared state.
CellResult run_cell(const ExperimentConfig& config, const Corpus& corpus, Variant variant,
                    LengthThreshold length, std::uint64_t seed);

std::string cell_to_json(const CellKey& key, const CellResult& cell);
std::pair<CellKey, CellResult> cell_from_json(std::string_view text);

std::string sweep_to_json(const SweepResult& result);
SweepResult sweep_from_json(std::string_view text);

// --- aggregation ---------------------------------------------------------------

inline constexpr std::array<std::string_view, 5> kMetricNames{"accuracy", "precision", "recall",
                                                              "f1", "roc_auc"};

std::array<double, 5> metric_values(const MetricsReport& m) noexcept;

struct MetricSummary {
  double mean = 0.0;
  double stddev = 0.0;      // sample standard deviation (n - 1)
  double cv_percent = 0.0;  // 100 * stddev / mean
  bool stddev_defined = true;  // false for a single run
  bool cv_defined = true;      // false when mean is 0 or stddev undefined
};

MetricSummary summarize(std::span<const double> values);

struct AggregateRow {
  Variant variant;
  std::size_t length;
  std::size_t n_seeds;
  std::array<MetricSummary, 5> metrics;  // kMetricNames order
};

struct AggregateResult {
  std::vector<AggregateRow> rows;  // ordered by (variant, length)
};

AggregateResult aggregate_runs(const SweepResult& sweep);

// --- reports -------------------------------------------------------------------

/// Writes <dir>/cells.csv, <dir>/aggregate.csv, <dir>/curves/*.csv,
/// <dir>/provenance.json and <dir>/sweep.json.
void emit_report(const SweepResult& sweep, const std::filesystem::path& dir);

std::string cells_csv(const SweepResult& sweep);
std::string aggregate_csv(const AggregateResult& aggregate);
std::string provenance_json(const SweepResult& sweep);

}  // namespace apifreq
