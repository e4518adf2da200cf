#include "apifreq/trace_corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "apifreq/error.hpp"
#include "apifreq/parallel.hpp"
#include "apifreq/rng.hpp"

namespace apifreq {

using nlohmann::json;

std::string_view to_string(SampleLabel label) noexcept {
  return label == SampleLabel::benign ? "benign" : "malware";
}

std::optional<SampleLabel> parse_label(std::string_view token) noexcept {
  if (token == "benign") return SampleLabel::benign;
  if (token == "malware") return SampleLabel::malware;
  return std::nullopt;
}

bool is_valid_sample_id(std::string_view id) noexcept {
  return id.size() == 64 && std::all_of(id.begin(), id.end(), [](char c) {
           return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
         });
}

bool is_valid_call_name(std::string_view name) noexcept {
  if (name.empty()) return false;
  return std::none_of(name.begin(), name.end(), [](char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f' ||
           c == '/' || c == '\\';
  });
}

ApiTrace parse_trace(std::string_view bytes, std::string_view expected_id,
                     const TraceSchema& schema) {
  if (!is_valid_sample_id(expected_id)) {
    throw Error(ErrorCode::SchemaMismatch, "invalid sample id '" + std::string(expected_id) + "'");
  }
  json doc;
  try {
    doc = json::parse(bytes.begin(), bytes.end());
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::MalformedJson, std::string(expected_id) + ": " + e.what());
  }
  if (!doc.is_object()) {
    throw Error(ErrorCode::SchemaMismatch, std::string(expected_id) + ": top level is not an object");
  }

  if (auto it = doc.find(schema.id_key); it != doc.end()) {
    if (!it->is_string()) {
      throw Error(ErrorCode::SchemaMismatch,
                  std::string(expected_id) + ": '" + schema.id_key + "' is not a string");
    }
    if (it->get_ref<const std::string&>() != expected_id) {
      throw Error(ErrorCode::IdMismatch, "file for " + std::string(expected_id) + " embeds id " +
                                             it->get<std::string>());
    }
  }

  const json* calls = nullptr;
  try {
    calls = &doc.at(json::json_pointer(schema.calls_pointer));
  } catch (const json::exception&) {
    throw Error(ErrorCode::SchemaMismatch,
                std::string(expected_id) + ": missing call array at " + schema.calls_pointer);
  }
  if (!calls->is_array()) {
    throw Error(ErrorCode::SchemaMismatch,
                std::string(expected_id) + ": " + schema.calls_pointer + " is not an array");
  }

  ApiTrace trace;
  trace.sample_id = std::string(expected_id);
  trace.calls.reserve(calls->size());
  for (std::size_t i = 0; i < calls->size(); ++i) {
    const json& call = (*calls)[i];
    if (!call.is_string() || !is_valid_call_name(call.get_ref<const std::string&>())) {
      throw Error(ErrorCode::SchemaMismatch, std::string(expected_id) + ": call " +
                                                 std::to_string(i) + " is not a valid API name");
    }
    trace.calls.push_back(call.get<std::string>());
  }
  return trace;
}

std::string serialize_trace(const ApiTrace& trace) {
  json doc = {{"sha256", trace.sample_id}, {"api_calls", trace.calls}};
  return doc.dump();
}

namespace {

std::vector<std::string_view> split_on(std::string_view text, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = text.find(sep, start);
    out.push_back(text.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

CorpusManifest parse_manifest(std::string_view text, std::string source_path) {
  CorpusManifest manifest;
  manifest.source_path = std::move(source_path);
  const auto where = [&](std::size_t line) {
    return (manifest.source_path.empty() ? std::string("manifest") : manifest.source_path) + ":" +
           std::to_string(line);
  };

  const auto lines = split_on(text, '\n');
  std::size_t lineno = 0;
  bool header_seen = false;
  std::unordered_set<std::string> seen;
  for (std::string_view raw : lines) {
    ++lineno;
    const std::string_view line = trim(raw);
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != "sample_id,labels") {
        throw Error(ErrorCode::MalformedManifest,
                    where(lineno) + ": expected header 'sample_id,labels'");
      }
      header_seen = true;
      continue;
    }
    const auto fields = split_on(line, ',');
    if (fields.size() != 2) {
      throw Error(ErrorCode::MalformedManifest, where(lineno) + ": expected 2 fields");
    }
    ManifestEntry entry;
    entry.sample_id = std::string(trim(fields[0]));
    if (!is_valid_sample_id(entry.sample_id)) {
      throw Error(ErrorCode::MalformedManifest,
                  where(lineno) + ": invalid sample id '" + entry.sample_id + "'");
    }
    for (std::string_view token : split_on(fields[1], '|')) {
      token = trim(token);
      if (!token.empty()) entry.raw_labels.emplace_back(token);
    }
    if (entry.raw_labels.empty()) {
      throw Error(ErrorCode::MalformedManifest, where(lineno) + ": no labels for " + entry.sample_id);
    }
    if (!seen.insert(entry.sample_id).second) {
      throw Error(ErrorCode::MalformedManifest,
                  where(lineno) + ": duplicate sample id " + entry.sample_id);
    }
    manifest.entries.push_back(std::move(entry));
  }
  if (!header_seen) {
    throw Error(ErrorCode::MalformedManifest, where(0) + ": empty manifest");
  }
  return manifest;
}

CorpusManifest load_manifest(const std::filesystem::path& path) {
  return parse_manifest(read_file(path), path.string());
}

std::string serialize_manifest(const CorpusManifest& manifest) {
  std::string out = "sample_id,labels\n";
  for (const auto& entry : manifest.entries) {
    out += entry.sample_id;
    out += ',';
    for (std::size_t i = 0; i < entry.raw_labels.size(); ++i) {
      if (i != 0) out += '|';
      out += entry.raw_labels[i];
    }
    out += '\n';
  }
  return out;
}

FilterResult apply_single_label_filter(const CorpusManifest& manifest, bool strict) {
  FilterResult result;
  for (const auto& entry : manifest.entries) {
    std::set<SampleLabel> labels;
    for (const auto& token : entry.raw_labels) {
      if (auto label = parse_label(token)) {
        labels.insert(*label);
      } else if (strict) {
        throw Error(ErrorCode::UnknownLabelToken,
                    entry.sample_id + ": unrecognized label '" + token + "'");
      }
    }
    if (labels.size() == 1) {
      result.samples.push_back({entry.sample_id, *labels.begin()});
    } else {
      ++result.dropped;
    }
  }
  return result;
}

DatasetSplit stratified_split(std::span<const LabeledSample> samples, double train_fraction,
                              std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error(ErrorCode::DegenerateSplit,
                "train fraction must be in (0, 1), got " + std::to_string(train_fraction));
  }
  std::vector<std::string> by_class[2];
  for (const auto& s : samples) by_class[label_value(s.label)].push_back(s.sample_id);

  DatasetSplit split;
  split.seed = seed;
  split.train_fraction = train_fraction;
  split.rng_algorithm = std::string(kRngAlgorithm);
  for (int c = 0; c < 2; ++c) {
    auto& ids = by_class[c];
    if (ids.empty()) {
      throw Error(ErrorCode::EmptyClass,
                  "no " + std::string(to_string(static_cast<SampleLabel>(c))) + " samples");
    }
    std::sort(ids.begin(), ids.end());
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(c)));
    rng.shuffle(std::span<std::string>(ids));
    const auto n_train = static_cast<std::size_t>(
        std::floor(train_fraction * static_cast<double>(ids.size()) + 0.5));
    auto cut = ids.begin() + static_cast<std::ptrdiff_t>(std::min(n_train, ids.size()));
    std::move(ids.begin(), cut, std::back_inserter(split.train_ids));
    std::move(cut, ids.end(), std::back_inserter(split.test_ids));
  }
  if (split.train_ids.empty() || split.test_ids.empty()) {
    throw Error(ErrorCode::DegenerateSplit,
                "split of " + std::to_string(samples.size()) + " samples leaves " +
                    (split.train_ids.empty() ? "train" : "test") + " empty");
  }
  std::sort(split.train_ids.begin(), split.train_ids.end());
  std::sort(split.test_ids.begin(), split.test_ids.end());
  return split;
}

std::string split_to_json(const DatasetSplit& split) {
  json doc = {{"seed", split.seed},
              {"train_fraction", split.train_fraction},
              {"rng_algorithm", split.rng_algorithm},
              {"train_ids", split.train_ids},
              {"test_ids", split.test_ids}};
  return doc.dump(1) + "\n";
}

DatasetSplit split_from_json(std::string_view text) {
  try {
    const json doc = json::parse(text.begin(), text.end());
    DatasetSplit split;
    split.seed = doc.at("seed").get<std::uint64_t>();
    split.train_fraction = doc.at("train_fraction").get<double>();
    split.rng_algorithm = doc.at("rng_algorithm").get<std::string>();
    split.train_ids = doc.at("train_ids").get<std::vector<std::string>>();
    split.test_ids = doc.at("test_ids").get<std::vector<std::string>>();
    return split;
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::MalformedJson, std::string("split artifact: ") + e.what());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaMismatch, std::string("split artifact: ") + e.what());
  }
}

void save_split(const DatasetSplit& split, const std::filesystem::path& path) {
  write_file(path, split_to_json(split));
}

DatasetSplit load_split(const std::filesystem::path& path) {
  return split_from_json(read_file(path));
}

double CorpusStats::malware_fraction() const noexcept {
  return total() == 0 ? 0.0 : static_cast<double>(malware) / static_cast<double>(total());
}

double CorpusStats::benign_fraction() const noexcept {
  return total() == 0 ? 0.0 : static_cast<double>(benign) / static_cast<double>(total());
}

CorpusStats corpus_stats(std::span<const LabeledSample> samples) noexcept {
  CorpusStats stats;
  for (const auto& s : samples) {
    (s.label == SampleLabel::benign ? stats.benign : stats.malware) += 1;
  }
  return stats;
}

LoadedCorpus load_traces(const std::filesystem::path& dir, std::span<const LabeledSample> samples,
                         const LoadOptions& options) {
  std::vector<std::optional<ApiTrace>> slots(samples.size());
  parallel_for(samples.size(), options.workers, [&](std::size_t i) {
    const auto& sample = samples[i];
    const auto path = dir / (sample.sample_id + ".json");
    if (!std::filesystem::exists(path)) return;
    try {
      ApiTrace trace = parse_trace(read_file(path), sample.sample_id, options.schema);
      trace.label = sample.label;
      slots[i] = std::move(trace);
    } catch (const Error& e) {
      rethrow_with_context(e, "sample " + sample.sample_id);
    }
  });

  LoadedCorpus corpus;
  corpus.traces.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (slots[i]) {
      corpus.traces.push_back(std::move(*slots[i]));
    } else {
      corpus.missing_ids.push_back(samples[i].sample_id);
    }
  }
  if (options.strict && !corpus.missing_ids.empty()) {
    throw Error(ErrorCode::TraceMissing,
                std::to_string(corpus.missing_ids.size()) + " trace file(s) missing under " +
                    dir.string() + ", first: " + corpus.missing_ids.front());
  }
  return corpus;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::move(buf).str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error(ErrorCode::IoFailure, "short write to " + path.string());
}

}  // namespace apifreq
