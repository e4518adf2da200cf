#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>

#include "apifreq/config.hpp"
#include "apifreq/error.hpp"
#include "apifreq/evaluation.hpp"
#include "apifreq/experiment.hpp"
#include "apifreq/featurization.hpp"
#include "apifreq/forest.hpp"
#include "apifreq/parallel.hpp"
#include "apifreq/synthetic.hpp"
#include "apifreq/trace_corpus.hpp"

namespace fs = std::filesystem;

namespace apifreq::cli {
namespace {

LengthThreshold parse_length(const std::string& text) {
  if (text.empty() || text == "unlimited" || text == "none") return LengthThreshold::unlimited();
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(text, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != text.size()) throw Error(ErrorCode::InvalidConfig, "bad length threshold '" + text + "'");
  return LengthThreshold(static_cast<std::size_t>(v));
}

Variant parse_variant_or_throw(const std::string& text) {
  auto v = parse_variant(text);
  if (!v) throw Error(ErrorCode::InvalidConfig, "unknown variant '" + text + "'");
  return *v;
}

// Manifest -> single-label samples, optionally restricted to a split subset.
std::vector<LabeledSample> select_samples(const fs::path& manifest, bool strict,
                                          const std::optional<fs::path>& split_path,
                                          const std::string& subset) {
  auto filtered = apply_single_label_filter(load_manifest(manifest), strict);
  if (!split_path || subset == "all") return std::move(filtered.samples);
  const DatasetSplit split = load_split(*split_path);
  const auto& ids = subset == "train" ? split.train_ids : split.test_ids;
  std::vector<LabeledSample> out;
  for (auto& s : filtered.samples)
    if (std::binary_search(ids.begin(), ids.end(), s.sample_id)) out.push_back(std::move(s));
  return out;
}

std::vector<ApiTrace> load_labeled(const fs::path& dir, const std::vector<LabeledSample>& samples,
                                   bool strict, const std::string& pointer, std::ostream& err) {
  LoadOptions opts;
  opts.strict = strict;
  opts.schema.calls_pointer = pointer;
  auto loaded = load_traces(dir, samples, opts);
  if (!loaded.missing_ids.empty())
    err << "warning: " << loaded.missing_ids.size() << " trace files missing, skipped\n";
  return std::move(loaded.traces);
}

void write_text(std::ostream& out, const std::string& path, const std::string& text) {
  if (path.empty() || path == "-")
    out << text;
  else
    write_file(path, text);
}

std::string metrics_json(const MetricsReport& m) {
  std::ostringstream s;
  s.precision(17);
  s << "{\"accuracy\": " << m.accuracy << ", \"precision\": " << m.precision
    << ", \"recall\": " << m.recall << ", \"f1\": " << m.f1 << ", \"roc_auc\": " << m.roc_auc
    << ", \"tp\": " << m.confusion.tp << ", \"fp\": " << m.confusion.fp
    << ", \"fn\": " << m.confusion.fn << ", \"tn\": " << m.confusion.tn
    << ", \"n_samples\": " << m.n_samples << ", \"decision_threshold\": " << m.decision_threshold
    << "}\n";
  return s.str();
}

struct CommonCorpusArgs {
  std::string corpus;
  std::string manifest;
  std::string split;
  std::string subset = "train";
  bool lenient = false;
  std::string calls_pointer = "/api_calls";

  void add(CLI::App* cmd, bool with_subset) {
    cmd->add_option("--corpus", corpus, "Directory holding <sample_id>.json trace files")->required();
    cmd->add_option("--manifest", manifest, "Manifest CSV (sample_id,labels)")->required();
    cmd->add_option("--split", split, "Split JSON written by ingest");
    if (with_subset)
      cmd->add_option("--subset", subset, "Which part of the split to use")
          ->check(CLI::IsMember({"train", "test", "all"}))
          ->capture_default_str();
    cmd->add_flag("--lenient", lenient, "Skip missing trace files instead of failing");
    cmd->add_option("--calls-pointer", calls_pointer, "JSON pointer to the call array")
        ->capture_default_str();
  }

  std::vector<ApiTrace> load(std::ostream& err) const {
    std::optional<fs::path> sp;
    if (!split.empty()) sp = split;
    auto samples = select_samples(manifest, !lenient, sp, subset);
    err << "loading " << samples.size() << " traces from " << corpus << "\n";
    return load_labeled(corpus, samples, !lenient, calls_pointer, err);
  }
};

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"API-call frequency malware detection pipeline", "apifreq"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kSoftwareVersion));
  std::size_t threads = 0;
  app.add_option("--threads", threads, "Cap on worker threads (0 = all cores)")->capture_default_str();

  std::function<void()> action;

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Filter the manifest to single-label samples and split it");
  std::string in_manifest, in_corpus, in_out;
  double in_fraction = 0.75;
  std::uint64_t in_seed = 42;
  bool in_strict = false, in_lenient = false;
  std::string in_pointer = "/api_calls";
  ingest->add_option("--manifest", in_manifest, "Manifest CSV")->required();
  ingest->add_option("--corpus", in_corpus, "Trace directory; when given, only samples with a readable trace are split");
  ingest->add_option("--out", in_out, "Output split JSON")->required();
  ingest->add_option("--train-fraction", in_fraction, "Train share per class")->capture_default_str();
  ingest->add_option("--seed", in_seed, "Split seed")->capture_default_str();
  ingest->add_flag("--strict-labels", in_strict, "Reject unknown label tokens");
  ingest->add_flag("--lenient", in_lenient, "Skip missing trace files instead of failing");
  ingest->add_option("--calls-pointer", in_pointer, "JSON pointer to the call array")->capture_default_str();
  ingest->callback([&] {
    action = [&] {
      auto filtered = apply_single_label_filter(load_manifest(in_manifest), in_strict);
      err << "kept " << filtered.samples.size() << " single-label samples, dropped "
          << filtered.dropped << "\n";
      std::vector<LabeledSample> samples = std::move(filtered.samples);
      if (!in_corpus.empty()) {
        auto traces = load_labeled(in_corpus, samples, !in_lenient, in_pointer, err);
        std::vector<LabeledSample> present;
        for (const auto& t : traces) present.push_back({t.sample_id, *t.label});
        samples = std::move(present);
      }
      const auto split = stratified_split(samples, in_fraction, in_seed);
      save_split(split, in_out);
      const auto stats = corpus_stats(samples);
      out << "samples " << stats.total() << " malware " << stats.malware << " benign " << stats.benign
          << " train " << split.train_ids.size() << " test " << split.test_ids.size() << "\n";
    };
  });

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic labeled trace corpus");
  SyntheticSpec spec;
  std::string sy_out;
  synth->add_option("--out", sy_out, "Output directory (manifest.csv, traces/)")->required();
  synth->add_option("--samples", spec.n_samples, "Number of samples")->capture_default_str();
  synth->add_option("--benign-fraction", spec.benign_fraction, "Share of benign samples")->capture_default_str();
  synth->add_option("--alphabet", spec.alphabet_size, "Distinct API names")->capture_default_str();
  synth->add_option("--min-length", spec.min_length, "Shortest trace")->capture_default_str();
  synth->add_option("--max-length", spec.max_length, "Longest trace")->capture_default_str();
  synth->add_option("--divergence", spec.divergence, "0 = identical classes, 1 = disjoint alphabets")->capture_default_str();
  synth->add_option("--ambiguous-fraction", spec.ambiguous_fraction, "Share written with both labels")->capture_default_str();
  synth->add_option("--seed", spec.seed, "Generator seed")->capture_default_str();
  synth->callback([&] {
    action = [&] {
      const auto corpus = generate_synthetic_corpus(spec);
      write_corpus(corpus, sy_out);
      err << "wrote " << corpus.traces.size() << " traces to " << sy_out << "\n";
    };
  });

  // vocab
  auto* vocab = app.add_subcommand("vocab", "Build an n-gram vocabulary");
  CommonCorpusArgs vo_corpus;
  int vo_n = 1;
  std::string vo_length = "unlimited", vo_out;
  vo_corpus.add(vocab, true);
  vocab->add_option("-n,--order", vo_n, "n-gram order")->check(CLI::Range(1, 3))->capture_default_str();
  vocab->add_option("--length", vo_length, "Length threshold in calls or 'unlimited'")->capture_default_str();
  vocab->add_option("--out", vo_out, "Output vocabulary JSON")->required();
  vocab->callback([&] {
    action = [&] {
      const auto traces = vo_corpus.load(err);
      const auto v = build_ngram_vocab(traces, vo_n, parse_length(vo_length));
      save_vocabulary(v, vo_out);
      out << "order " << v.order() << " size " << v.size() << " fingerprint " << v.fingerprint() << "\n";
    };
  });

  // featurize
  auto* featurize = app.add_subcommand("featurize", "Turn traces into a sparse count matrix");
  CommonCorpusArgs fe_corpus;
  std::string fe_variant = "unigram", fe_length = "unlimited", fe_out, fe_labels, fe_csv;
  std::vector<std::string> fe_vocabs;
  fe_corpus.add(featurize, true);
  featurize->add_option("--variant", fe_variant, "unigram | bigram | trigram | combined")->capture_default_str();
  featurize->add_option("--length", fe_length, "Length threshold in calls or 'unlimited'")->capture_default_str();
  featurize->add_option("--vocab", fe_vocabs, "Vocabulary JSON files (one per order used)")->required();
  featurize->add_option("--out", fe_out, "Output feature cache")->required();
  featurize->add_option("--labels-out", fe_labels, "Labels CSV (default <out>.labels.csv)");
  featurize->add_option("--csv", fe_csv, "Also write the long-form CSV export here");
  featurize->callback([&] {
    action = [&] {
      const Variant variant = parse_variant_or_throw(fe_variant);
      VocabularySet set;
      for (const auto& path : fe_vocabs) {
        auto v = load_vocabulary(path);
        switch (v.order()) {
          case 1: set.unigram = std::move(v); break;
          case 2: set.bigram = std::move(v); break;
          default: set.trigram = std::move(v); break;
        }
      }
      const auto traces = fe_corpus.load(err);
      const auto m = featurize_corpus(traces, parse_length(fe_length), variant, set);
      save_feature_matrix(m, fe_out);
      write_file(fe_labels.empty() ? fe_out + ".labels.csv" : fe_labels, labels_csv(m));
      if (!fe_csv.empty()) write_file(fe_csv, feature_matrix_csv(m));
      out << "rows " << m.row_count() << " dimension " << m.dimension << "\n";
    };
  });

  // train
  auto* train = app.add_subcommand("train", "Train a random forest on a feature cache");
  std::string tr_matrix, tr_labels, tr_out, tr_fps = "sqrt", tr_depth = "none";
  ForestParams params;
  params.seed = 42;
  bool tr_no_bootstrap = false;
  train->add_option("--matrix", tr_matrix, "Feature cache")->required();
  train->add_option("--labels", tr_labels, "Labels CSV (default <matrix>.labels.csv)");
  train->add_option("--out", tr_out, "Output model file")->required();
  train->add_option("--trees", params.n_trees, "Number of trees")->capture_default_str();
  train->add_option("--max-depth", tr_depth, "Depth limit or 'none'")->capture_default_str();
  train->add_option("--min-samples-split", params.min_samples_split, "Smallest node that may split")->capture_default_str();
  train->add_option("--features-per-split", tr_fps, "sqrt | log2 | all | <count>")->capture_default_str();
  train->add_flag("--no-bootstrap", tr_no_bootstrap, "Train every tree on the full matrix");
  train->add_option("--seed", params.seed, "Forest seed")->capture_default_str();
  train->callback([&] {
    action = [&] {
      auto m = load_feature_matrix(tr_matrix);
      attach_labels(m, read_file(tr_labels.empty() ? tr_matrix + ".labels.csv" : tr_labels));
      ExperimentConfig scratch;
      apply_setting(scratch, "max_depth", tr_depth);
      apply_setting(scratch, "features_per_split", tr_fps);
      params.max_depth = scratch.forest.max_depth;
      params.features_per_split = scratch.forest.features_per_split;
      params.bootstrap = !tr_no_bootstrap;
      err << "training " << params.n_trees << " trees on " << m.row_count() << " rows\n";
      const auto model = train_forest(m, params);
      save_model(model, tr_out);
      out << "trees " << model.trees.size() << " dimension " << model.feature_dimension << "\n";
    };
  });

  // eval
  auto* eval = app.add_subcommand("eval", "Score a feature cache with a model");
  std::string ev_model, ev_matrix, ev_labels, ev_curves, ev_out;
  double ev_threshold = 0.5;
  eval->add_option("--model", ev_model, "Model file")->required();
  eval->add_option("--matrix", ev_matrix, "Feature cache")->required();
  eval->add_option("--labels", ev_labels, "Labels CSV (default <matrix>.labels.csv)");
  eval->add_option("--threshold", ev_threshold, "Decision threshold on P(benign)")->capture_default_str();
  eval->add_option("--curves", ev_curves, "Directory for roc.csv and pr.csv");
  eval->add_option("--out", ev_out, "Metrics JSON path ('-' = stdout)");
  eval->callback([&] {
    action = [&] {
      const auto model = load_model(ev_model);
      auto m = load_feature_matrix(ev_matrix);
      attach_labels(m, read_file(ev_labels.empty() ? ev_matrix + ".labels.csv" : ev_labels));
      const auto scores = predict_proba(model, m);
      const auto report = evaluate(scores, m.labels, ev_threshold);
      if (!ev_curves.empty()) {
        fs::create_directories(ev_curves);
        write_file(fs::path(ev_curves) / "roc.csv", curve_csv(roc_curve(scores, m.labels), "roc"));
        write_file(fs::path(ev_curves) / "pr.csv", curve_csv(pr_curve(scores, m.labels), "pr"));
      }
      write_text(out, ev_out, metrics_json(report));
    };
  });

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Run the variant x length x seed sweep and write reports");
  std::string sw_config;
  std::vector<std::string> sw_sets;
  std::string sw_report, sw_corpus, sw_manifest;
  bool sw_no_cache = false;
  sweep->add_option("--config", sw_config, std::string("Config file (default $") + std::string(kConfigEnvVar) + ")");
  sweep->add_option("--set", sw_sets, "Override a config key, key=value (repeatable)");
  sweep->add_option("--corpus", sw_corpus, "Override corpus_dir");
  sweep->add_option("--manifest", sw_manifest, "Override manifest");
  sweep->add_option("--report-dir", sw_report, "Override report_dir");
  sweep->add_flag("--no-cache", sw_no_cache, "Recompute every cell");
  sweep->callback([&] {
    action = [&] {
      std::string cfg_path = sw_config;
      if (cfg_path.empty())
        if (const char* env = std::getenv(std::string(kConfigEnvVar).c_str())) cfg_path = env;
      ExperimentConfig config = cfg_path.empty() ? ExperimentConfig{} : load_config(cfg_path);
      for (const auto& kv : sw_sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw Error(ErrorCode::InvalidConfig, "--set expects key=value, got '" + kv + "'");
        apply_setting(config, kv.substr(0, eq), kv.substr(eq + 1));
      }
      if (!sw_corpus.empty()) config.corpus_dir = sw_corpus;
      if (!sw_manifest.empty()) config.manifest = sw_manifest;
      if (!sw_report.empty()) config.report_dir = sw_report;
      if (threads != 0) config.threads = threads;
      config.validate();

      auto corpus = std::make_shared<const Corpus>(load_corpus(config));
      err << "corpus: " << corpus->samples.size() << " samples, " << corpus->dropped_ambiguous
          << " ambiguous dropped, " << corpus->missing << " missing\n";
      Experiment experiment(config, corpus);
      SweepOptions opts;
      opts.use_cache = !sw_no_cache;
      const std::size_t total = config.variants.size() * config.lengths.size() * config.seeds.size();
      std::size_t done = 0;
      opts.on_cell = [&](const CellKey& key, bool cached) {
        err << "[" << ++done << "/" << total << "] " << key.to_string() << (cached ? " (cached)" : "") << "\n";
      };
      const auto result = experiment.run_sweep(opts);
      emit_report(result, config.report_dir);
      out << "cells " << result.cells.size() << " failed " << result.failures.size() << " report "
          << config.report_dir.string() << "\n";
      if (!result.failures.empty())
        throw Error(ErrorCode::PartialSweep, std::to_string(result.failures.size()) + " cells failed; first " +
                                                 result.failures.front().first.to_string() + ": " +
                                                 result.failures.front().second);
    };
  });

  // report
  auto* report = app.add_subcommand("report", "Re-emit CSV reports from a saved sweep.json");
  std::string re_results, re_out;
  report->add_option("--results", re_results, "sweep.json written by sweep")->required();
  report->add_option("--out", re_out, "Report directory")->required();
  report->callback([&] {
    action = [&] {
      const auto result = sweep_from_json(read_file(re_results));
      emit_report(result, re_out);
      out << "cells " << result.cells.size() << " report " << re_out << "\n";
    };
  });

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  std::vector<std::string> rev(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
  std::reverse(rev.begin(), rev.end());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << kSoftwareVersion << "\n";
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kUsageError;
  }

  try {
    set_max_threads(threads);
    if (action) action();
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kDomainError;
  } catch (const std::exception& e) {
    err << "error: IoFailure: " << e.what() << "\n";
    return kDomainError;
  }
  return kOk;
}

}  // namespace apifreq::cli
