#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace apifreq {

/// benign is the positive class (1), malware the negative class (0).
enum class SampleLabel : std::uint8_t { malware = 0, benign = 1 };

constexpr int label_value(SampleLabel label) noexcept {
  return label == SampleLabel::benign ? 1 : 0;
}
std::string_view to_string(SampleLabel label) noexcept;
std::optional<SampleLabel> parse_label(std::string_view token) noexcept;

bool is_valid_sample_id(std::string_view id) noexcept;
bool is_valid_call_name(std::string_view name) noexcept;

struct ApiTrace {
  std::string sample_id;
  std::vector<std::string> calls;
  std::optional<SampleLabel> label;  // set once joined with the manifest
};

/// Where to find things inside a trace file. The canonical layout is
/// {"sha256": "<hex>", "api_calls": ["NtOpenFile", ...]}; other dataset
/// dumps only need a different JSON pointer to the call array.
struct TraceSchema {
  std::string calls_pointer = "/api_calls";
  std::string id_key = "sha256";
};

ApiTrace parse_trace(std::string_view bytes, std::string_view expected_id,
                     const TraceSchema& schema = {});
std::string serialize_trace(const ApiTrace& trace);

struct ManifestEntry {
  std::string sample_id;
  std::vector<std::string> raw_labels;
};

/// CSV with header `sample_id,labels`; labels is a pipe-separated list.
struct CorpusManifest {
  std::vector<ManifestEntry> entries;
  std::string source_path;
};

CorpusManifest parse_manifest(std::string_view text, std::string source_path = {});
CorpusManifest load_manifest(const std::filesystem::path& path);
std::string serialize_manifest(const CorpusManifest& manifest);

struct LabeledSample {
  std::string sample_id;
  SampleLabel label;

  friend bool operator==(const LabeledSample&, const LabeledSample&) = default;
};

struct FilterResult {
  std::vector<LabeledSample> samples;  // manifest order
  std::size_t dropped = 0;
};

/// Keeps entries whose de-duplicated labels name exactly one class.
/// In strict mode an unrecognized label token is an error; otherwise such
/// tokens are ignored.
FilterResult apply_single_label_filter(const CorpusManifest& manifest, bool strict = false);

struct DatasetSplit {
  std::vector<std::string> train_ids;  // sorted
  std::vector<std::string> test_ids;   // sorted
  std::uint64_t seed = 0;
  double train_fraction = 0.75;
  std::string rng_algorithm;
};

/// Per class: sort ids, shuffle with a class-specific stream derived from
/// `seed`, and send the first floor(fraction * n + 0.5) to train.
DatasetSplit stratified_split(std::span<const LabeledSample> samples, double train_fraction,
                              std::uint64_t seed);

std::string split_to_json(const DatasetSplit& split);
DatasetSplit split_from_json(std::string_view text);
void save_split(const DatasetSplit& split, const std::filesystem::path& path);
DatasetSplit load_split(const std::filesystem::path& path);

struct CorpusStats {
  std::size_t malware = 0;
  std::size_t benign = 0;

  std::size_t total() const noexcept { return malware + benign; }
  double malware_fraction() const noexcept;
  double benign_fraction() const noexcept;
};

CorpusStats corpus_stats(std::span<const LabeledSample> samples) noexcept;

struct LoadOptions {
  TraceSchema schema;
  bool strict = true;       // missing trace file is an error
  std::size_t workers = 0;  // 0 = global default
};

struct LoadedCorpus {
  std::vector<ApiTrace> traces;  // same order as the requested samples, minus missing ones
  std::vector<std::string> missing_ids;
};

/// Reads <dir>/<sample_id>.json for every sample, in parallel.
LoadedCorpus load_traces(const std::filesystem::path& dir, std::span<const LabeledSample> samples,
                         const LoadOptions& options = {});

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace apifreq
