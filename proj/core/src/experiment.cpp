#include "apifreq/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "apifreq/error.hpp"
#include "apifreq/forest.hpp"
#include "apifreq/hash.hpp"
#include "apifreq/parallel.hpp"
#include "apifreq/rng.hpp"

namespace apifreq {

using nlohmann::json;

namespace {

std::string corpus_digest(std::span<const LabeledSample> samples) {
  std::vector<std::string> lines;
  lines.reserve(samples.size());
  for (const auto& s : samples) lines.push_back(s.sample_id + " " + std::string(to_string(s.label)));
  std::sort(lines.begin(), lines.end());
  Sha256 h;
  for (const auto& l : lines) h.update(l).update("\n");
  return to_hex(h.finish());
}

std::vector<ApiTrace> select(const Corpus& corpus,
                             const std::unordered_map<std::string, std::size_t>& index,
                             const std::vector<std::string>& ids) {
  std::vector<ApiTrace> out;
  out.reserve(ids.size());
  for (const auto& id : ids) out.push_back(corpus.traces[index.at(id)]);
  return out;
}

}  // namespace

Corpus make_corpus(std::vector<ApiTrace> labeled_traces) {
  Corpus corpus;
  for (const auto& t : labeled_traces) {
    if (!t.label) throw Error(ErrorCode::SchemaMismatch, "sample " + t.sample_id + ": trace has no label");
    corpus.samples.push_back({t.sample_id, *t.label});
  }
  corpus.traces = std::move(labeled_traces);
  corpus.digest = corpus_digest(corpus.samples);
  return corpus;
}

Corpus load_corpus(const ExperimentConfig& config) {
  const CorpusManifest manifest = load_manifest(config.manifest);
  const FilterResult filtered = apply_single_label_filter(manifest, config.strict);
  LoadOptions options;
  options.schema = config.schema;
  options.strict = config.strict;
  options.workers = config.threads;
  LoadedCorpus loaded = load_traces(config.corpus_dir, filtered.samples, options);
  Corpus corpus = make_corpus(std::move(loaded.traces));
  corpus.dropped_ambiguous = filtered.dropped;
  corpus.missing = loaded.missing_ids.size();
  return corpus;
}

std::string CellKey::to_string() const {
  return "variant=" + std::string(apifreq::to_string(variant)) + " length=" + std::to_string(length) +
         " seed=" + std::to_string(seed);
}

std::uint64_t cell_forest_seed(const CellKey& key) noexcept {
  const auto v = static_cast<std::uint64_t>(key.variant);
  return derive_seed(derive_seed(key.seed, 0x100 + v), key.length);
}

Experiment::Experiment(ExperimentConfig config, std::shared_ptr<const Corpus> corpus)
    : config_(std::move(config)), corpus_(std::move(corpus)) {
  config_.validate();
}

std::string Experiment::config_hash() const {
  return sha256_hex(config_.canonical() + "corpus=" + corpus_->digest + "\n");
}

const Experiment::SeedState& Experiment::seed_state(std::uint64_t seed, Variant variant,
                                                    std::size_t workers) {
  std::lock_guard lock(mutex_);
  auto& slot = seeds_[seed];
  if (!slot) {
    auto state = std::make_unique<SeedState>();
    state->split = stratified_split(corpus_->samples, config_.train_fraction, seed);
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < corpus_->traces.size(); ++i) index.emplace(corpus_->traces[i].sample_id, i);
    state->train = select(*corpus_, index, state->split.train_ids);
    state->test = select(*corpus_, index, state->split.test_ids);
    slot = std::move(state);
  }
  const std::span<const ApiTrace> vocab_source =
      config_.vocab_dataset_wide ? std::span<const ApiTrace>(corpus_->traces)
                                 : std::span<const ApiTrace>(slot->train);
  for (int n : variant_orders(variant)) {
    auto& vocab = n == 1 ? slot->vocabs.unigram : n == 2 ? slot->vocabs.bigram : slot->vocabs.trigram;
    if (!vocab) vocab = build_ngram_vocab(vocab_source, n, LengthThreshold::unlimited(), workers);
  }
  return *slot;
}

CellResult Experiment::run_cell(Variant variant, LengthThreshold length, std::uint64_t seed,
                                std::size_t workers) {
  const CellKey key{variant, length.value(), seed};
  try {
    const SeedState& state = seed_state(seed, variant, workers);
    const FeatureMatrix train = featurize_corpus(state.train, length, variant, state.vocabs, workers);
    const FeatureMatrix test = featurize_corpus(state.test, length, variant, state.vocabs, workers);
    ForestParams params = config_.forest;
    params.seed = cell_forest_seed(key);
    params.workers = workers;
    const ForestModel model = train_forest(train, params);

    CellResult cell;
    cell.scores = predict_proba(model, test, workers);
    cell.actual = test.labels;
    cell.metrics = evaluate(cell.scores, cell.actual, config_.decision_threshold);
    cell.vocab_fingerprints = train.vocab_fingerprints;
    return cell;
  } catch (const Error& e) {
    rethrow_with_context(e, "cell " + key.to_string());
  }
}

CellResult run_cell(const ExperimentConfig& config, const Corpus& corpus, Variant variant,
                    LengthThreshold length, std::uint64_t seed) {
  auto shared = std::make_shared<const Corpus>(corpus);
  Experiment experiment(config, shared);
  return experiment.run_cell(variant, length, seed, config.threads);
}

std::filesystem::path Experiment::cell_cache_path(const CellKey& key) const {
  const std::string id = sha256_hex(config_hash() + "\n" + key.to_string() + "\n" +
                                    std::string(kSoftwareVersion) + "\n");
  return config_.effective_cache_dir() / (id + ".json");
}

SweepResult Experiment::run_sweep(const SweepOptions& options) {
  SweepResult result;
  result.provenance.config_hash = config_hash();
  result.provenance.config_canonical = config_.canonical();
  result.provenance.rng_algorithm = std::string(kRngAlgorithm);
  result.provenance.vocab_scope = config_.vocab_dataset_wide ? "dataset" : "train";

  std::vector<CellKey> pending;
  for (Variant v : config_.variants) {
    for (std::size_t len : config_.lengths) {
      for (std::uint64_t seed : config_.seeds) {
        const CellKey key{v, len, seed};
        const auto path = cell_cache_path(key);
        if (options.use_cache && std::filesystem::exists(path)) {
          try {
            auto [cached_key, cell] = cell_from_json(read_file(path));
            if (cached_key == key) {
              result.cells.emplace(key, std::move(cell));
              if (options.on_cell) options.on_cell(key, true);
              continue;
            }
          } catch (const Error&) {
            // unreadable cache entry: recompute
          }
        }
        pending.push_back(key);
      }
    }
  }
  if (options.max_new_cells && pending.size() > *options.max_new_cells) {
    pending.resize(*options.max_new_cells);
    result.interrupted = true;
  }

  // Per-seed preparation happens up front so cells only read shared state.
  std::map<std::pair<std::uint64_t, Variant>, std::string> prep_failures;
  for (const auto& key : pending) {
    const auto slot = std::make_pair(key.seed, key.variant);
    if (prep_failures.count(slot)) continue;
    try {
      seed_state(key.seed, key.variant, config_.threads);
    } catch (const Error& e) {
      prep_failures.emplace(slot, "cell " + key.to_string() + ": " + e.what());
    }
  }
  auto prep_failure = [&](const CellKey& key) -> const std::string* {
    const auto it = prep_failures.find({key.seed, key.variant});
    return it == prep_failures.end() ? nullptr : &it->second;
  };

  const std::size_t cell_workers = std::max<std::size_t>(1, resolve_workers(config_.threads));
  const std::size_t inner_workers = cell_workers > 1 ? 1 : config_.threads;
  std::vector<std::optional<CellResult>> computed(pending.size());
  std::vector<std::string> errors(pending.size());
  std::mutex progress_mutex;
  parallel_for(pending.size(), cell_workers, [&](std::size_t i) {
    const CellKey& key = pending[i];
    if (prep_failure(key)) return;
    try {
      CellResult cell = run_cell(key.variant, LengthThreshold(key.length), key.seed, inner_workers);
      if (options.use_cache) {
        const auto path = cell_cache_path(key);
        const auto tmp = std::filesystem::path(path.string() + ".tmp");
        write_file(tmp, cell_to_json(key, cell));
        std::filesystem::rename(tmp, path);
      }
      computed[i] = std::move(cell);
      if (options.on_cell) {
        std::lock_guard lock(progress_mutex);
        options.on_cell(key, false);
      }
    } catch (const Error& e) {
      errors[i] = e.what();
    } catch (const std::exception& e) {
      errors[i] = "cell " + key.to_string() + ": " + e.what();
    }
  });

  for (std::size_t i = 0; i < pending.size(); ++i) {
    if (computed[i]) {
      result.cells.emplace(pending[i], std::move(*computed[i]));
    } else if (const std::string* why = prep_failure(pending[i])) {
      result.failures.emplace_back(pending[i], *why);
    } else {
      result.failures.emplace_back(pending[i], errors[i]);
    }
  }
  std::sort(result.failures.begin(), result.failures.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  for (const auto& [key, cell] : result.cells) {
    auto& fps = result.provenance.vocab_fingerprints[key.seed];
    for (const auto& fp : cell.vocab_fingerprints) {
      if (std::find(fps.begin(), fps.end(), fp) == fps.end()) fps.push_back(fp);
    }
  }
  for (auto& [seed, fps] : result.provenance.vocab_fingerprints) std::sort(fps.begin(), fps.end());
  return result;
}

// --- serialization ---------------------------------------------------------------

namespace {

json metrics_json(const MetricsReport& m) {
  return {{"accuracy", m.accuracy},
          {"precision", m.precision},
          {"recall", m.recall},
          {"f1", m.f1},
          {"roc_auc", m.roc_auc},
          {"tp", m.confusion.tp},
          {"fp", m.confusion.fp},
          {"fn", m.confusion.fn},
          {"tn", m.confusion.tn},
          {"n_samples", m.n_samples},
          {"decision_threshold", m.decision_threshold},
          {"precision_undefined", m.precision_undefined},
          {"recall_undefined", m.recall_undefined},
          {"f1_undefined", m.f1_undefined}};
}

MetricsReport metrics_from(const json& j) {
  MetricsReport m;
  m.accuracy = j.at("accuracy").get<double>();
  m.precision = j.at("precision").get<double>();
  m.recall = j.at("recall").get<double>();
  m.f1 = j.at("f1").get<double>();
  m.roc_auc = j.at("roc_auc").get<double>();
  m.confusion = {j.at("tp").get<std::uint64_t>(), j.at("fp").get<std::uint64_t>(),
                 j.at("fn").get<std::uint64_t>(), j.at("tn").get<std::uint64_t>()};
  m.n_samples = j.at("n_samples").get<std::size_t>();
  m.decision_threshold = j.at("decision_threshold").get<double>();
  m.precision_undefined = j.at("precision_undefined").get<bool>();
  m.recall_undefined = j.at("recall_undefined").get<bool>();
  m.f1_undefined = j.at("f1_undefined").get<bool>();
  return m;
}

json cell_json(const CellKey& key, const CellResult& cell) {
  std::vector<int> actual;
  actual.reserve(cell.actual.size());
  for (SampleLabel l : cell.actual) actual.push_back(label_value(l));
  return {{"variant", to_string(key.variant)},
          {"length", key.length},
          {"seed", key.seed},
          {"metrics", metrics_json(cell.metrics)},
          {"vocab_fingerprints", cell.vocab_fingerprints},
          {"scores", cell.scores},
          {"actual", actual}};
}

std::pair<CellKey, CellResult> cell_from(const json& j) {
  const auto variant = parse_variant(j.at("variant").get<std::string>());
  if (!variant) throw Error(ErrorCode::SchemaMismatch, "cell has unknown variant");
  CellKey key{*variant, j.at("length").get<std::size_t>(), j.at("seed").get<std::uint64_t>()};
  CellResult cell;
  cell.metrics = metrics_from(j.at("metrics"));
  cell.vocab_fingerprints = j.at("vocab_fingerprints").get<std::vector<std::string>>();
  cell.scores = j.at("scores").get<std::vector<double>>();
  for (int a : j.at("actual").get<std::vector<int>>()) {
    cell.actual.push_back(a == 1 ? SampleLabel::benign : SampleLabel::malware);
  }
  if (cell.actual.size() != cell.scores.size()) {
    throw Error(ErrorCode::SchemaMismatch, "cell scores and labels differ in length");
  }
  return {key, std::move(cell)};
}

template <typename F>
auto parse_json_or_throw(std::string_view text, std::string_view what, F&& f) {
  try {
    return f(json::parse(text.begin(), text.end()));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::MalformedJson, std::string(what) + ": " + e.what());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaMismatch, std::string(what) + ": " + e.what());
  }
}

}  // namespace

std::string cell_to_json(const CellKey& key, const CellResult& cell) {
  return cell_json(key, cell).dump() + "\n";
}

std::pair<CellKey, CellResult> cell_from_json(std::string_view text) {
  return parse_json_or_throw(text, "cell", [](const json& j) { return cell_from(j); });
}

std::string sweep_to_json(const SweepResult& result) {
  json cells = json::array();
  for (const auto& [key, cell] : result.cells) cells.push_back(cell_json(key, cell));
  json failures = json::array();
  for (const auto& [key, error] : result.failures) {
    failures.push_back({{"variant", to_string(key.variant)},
                        {"length", key.length},
                        {"seed", key.seed},
                        {"error", error}});
  }
  json fps = json::object();
  for (const auto& [seed, list] : result.provenance.vocab_fingerprints) fps[std::to_string(seed)] = list;
  const auto& p = result.provenance;
  json doc = {{"provenance",
               {{"config_hash", p.config_hash},
                {"config_canonical", p.config_canonical},
                {"software_version", p.software_version},
                {"rng_algorithm", p.rng_algorithm},
                {"vocab_scope", p.vocab_scope},
                {"vocab_fingerprints", fps}}},
              {"interrupted", result.interrupted},
              {"cells", cells},
              {"failures", failures}};
  return doc.dump() + "\n";
}

SweepResult sweep_from_json(std::string_view text) {
  return parse_json_or_throw(text, "sweep result", [](const json& doc) {
    SweepResult result;
    const auto& p = doc.at("provenance");
    result.provenance.config_hash = p.at("config_hash").get<std::string>();
    result.provenance.config_canonical = p.at("config_canonical").get<std::string>();
    result.provenance.software_version = p.at("software_version").get<std::string>();
    result.provenance.rng_algorithm = p.at("rng_algorithm").get<std::string>();
    result.provenance.vocab_scope = p.at("vocab_scope").get<std::string>();
    for (const auto& [seed, list] : p.at("vocab_fingerprints").items()) {
      result.provenance.vocab_fingerprints[std::stoull(seed)] = list.get<std::vector<std::string>>();
    }
    result.interrupted = doc.at("interrupted").get<bool>();
    for (const auto& c : doc.at("cells")) {
      auto [key, cell] = cell_from(c);
      result.cells.emplace(key, std::move(cell));
    }
    for (const auto& f : doc.at("failures")) {
      const auto variant = parse_variant(f.at("variant").get<std::string>());
      if (!variant) throw Error(ErrorCode::SchemaMismatch, "failure has unknown variant");
      result.failures.emplace_back(
          CellKey{*variant, f.at("length").get<std::size_t>(), f.at("seed").get<std::uint64_t>()},
          f.at("error").get<std::string>());
    }
    return result;
  });
}

// --- aggregation -------------------------------------------------------------------

std::array<double, 5> metric_values(const MetricsReport& m) noexcept {
  return {m.accuracy, m.precision, m.recall, m.f1, m.roc_auc};
}

MetricSummary summarize(std::span<const double> values) {
  MetricSummary s;
  const std::size_t n = values.size();
  if (n == 0) {
    s.stddev_defined = s.cv_defined = false;
    return s;
  }
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(n);
  if (n == 1) {
    s.stddev_defined = s.cv_defined = false;
    return s;
  }
  double sq = 0.0;
  for (double v : values) sq += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(sq / static_cast<double>(n - 1));
  if (s.mean > 0.0) {
    s.cv_percent = 100.0 * s.stddev / s.mean;
  } else {
    s.cv_defined = false;
  }
  return s;
}

AggregateResult aggregate_runs(const SweepResult& sweep) {
  std::map<std::pair<Variant, std::size_t>, std::vector<const MetricsReport*>> groups;
  for (const auto& [key, cell] : sweep.cells) groups[{key.variant, key.length}].push_back(&cell.metrics);

  AggregateResult out;
  for (const auto& [group, reports] : groups) {
    AggregateRow row{group.first, group.second, reports.size(), {}};
    for (std::size_t m = 0; m < kMetricNames.size(); ++m) {
      std::vector<double> values;
      for (const auto* r : reports) values.push_back(metric_values(*r)[m]);
      row.metrics[m] = summarize(values);
    }
    out.rows.push_back(row);
  }
  return out;
}

}  // namespace apifreq
