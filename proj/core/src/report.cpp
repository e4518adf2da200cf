#include <chrono>
#include <cstdio>
#include <ctime>

#include <nlohmann/json.hpp>

#include "apifreq/error.hpp"
#include "apifreq/experiment.hpp"

namespace apifreq {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::string cells_csv(const SweepResult& sweep) {
  std::string out = "variant,length,seed,accuracy,precision,recall,f1,roc_auc,tp,fp,fn,tn\n";
  for (const auto& [key, cell] : sweep.cells) {
    const auto& m = cell.metrics;
    out += std::string(to_string(key.variant)) + ',' + std::to_string(key.length) + ',' +
           std::to_string(key.seed) + ',' + num(m.accuracy) + ',' + num(m.precision) + ',' +
           num(m.recall) + ',' + num(m.f1) + ',' + num(m.roc_auc) + ',' +
           std::to_string(m.confusion.tp) + ',' + std::to_string(m.confusion.fp) + ',' +
           std::to_string(m.confusion.fn) + ',' + std::to_string(m.confusion.tn) + '\n';
  }
  return out;
}

std::string aggregate_csv(const AggregateResult& aggregate) {
  std::string out = "variant,length,n_seeds";
  for (auto name : kMetricNames) {
    out += ',' + std::string(name) + "_mean," + std::string(name) + "_stddev," + std::string(name) +
           "_cv_pct";
  }
  out += ",stddev_defined\n";
  for (const auto& row : aggregate.rows) {
    out += std::string(to_string(row.variant)) + ',' + std::to_string(row.length) + ',' +
           std::to_string(row.n_seeds);
    for (const auto& s : row.metrics) {
      out += ',' + num(s.mean) + ',' + num(s.stddev) + ',' + num(s.cv_percent);
    }
    out += row.metrics[3].stddev_defined ? ",1\n" : ",0\n";
  }
  return out;
}

std::string provenance_json(const SweepResult& sweep) {
  using nlohmann::json;
  const auto& p = sweep.provenance;
  json fps = json::object();
  for (const auto& [seed, list] : p.vocab_fingerprints) fps[std::to_string(seed)] = list;
  json failures = json::array();
  for (const auto& [key, error] : sweep.failures) failures.push_back(key.to_string() + ": " + error);
  json doc = {{"generated_at", utc_timestamp()},
              {"software_version", p.software_version},
              {"config_hash", p.config_hash},
              {"config", p.config_canonical},
              {"rng_algorithm", p.rng_algorithm},
              {"vocab_scope", p.vocab_scope},
              {"vocab_rebuilt_per_seed", p.vocab_scope == "train"},
              {"vocab_fingerprints", fps},
              {"cells", sweep.cells.size()},
              {"interrupted", sweep.interrupted},
              {"failures", failures}};
  return doc.dump(2) + "\n";
}

void emit_report(const SweepResult& sweep, const std::filesystem::path& dir) {
  if (sweep.cells.empty()) throw Error(ErrorCode::IoFailure, "nothing to report: sweep has no cells");
  try {
    std::filesystem::create_directories(dir / "curves");
    write_file(dir / "cells.csv", cells_csv(sweep));
    write_file(dir / "aggregate.csv", aggregate_csv(aggregate_runs(sweep)));
    for (const auto& [key, cell] : sweep.cells) {
      const std::string stem = std::string(to_string(key.variant)) + "_" + std::to_string(key.length) +
                               "_" + std::to_string(key.seed);
      const std::string tags = "variant=" + std::string(to_string(key.variant)) +
                               " length=" + std::to_string(key.length) +
                               " seed=" + std::to_string(key.seed);
      write_file(dir / "curves" / (stem + "_roc.csv"),
                 curve_csv(roc_curve(cell.scores, cell.actual), "kind=roc " + tags));
      write_file(dir / "curves" / (stem + "_pr.csv"),
                 curve_csv(pr_curve(cell.scores, cell.actual), "kind=pr " + tags));
    }
    write_file(dir / "sweep.json", sweep_to_json(sweep));
    write_file(dir / "provenance.json", provenance_json(sweep));
  } catch (const std::filesystem::filesystem_error& e) {
    throw Error(ErrorCode::IoFailure, e.what());
  }
}

}  // namespace apifreq
