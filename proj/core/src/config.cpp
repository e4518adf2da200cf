#include "apifreq/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <set>

#include "apifreq/error.hpp"

namespace apifreq {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

[[noreturn]] void bad(std::string_view key, std::string_view value, std::string_view why) {
  throw Error(ErrorCode::InvalidConfig,
              std::string(key) + " = '" + std::string(value) + "': " + std::string(why));
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto v = trim(value);
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) bad(key, value, "not a number");
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  const auto v = trim(value);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad(key, value, "expected true or false");
}

std::vector<std::string_view> split_list(std::string_view value) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start <= value.size()) {
    std::size_t end = value.find(',', start);
    if (end == std::string_view::npos) end = value.size();
    if (auto item = trim(value.substr(start, end - start)); !item.empty()) out.push_back(item);
    start = end + 1;
  }
  return out;
}

template <typename T>
std::string join(const std::vector<T>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_same_v<T, Variant>) {
      out += to_string(items[i]);
    } else {
      out += std::to_string(items[i]);
    }
  }
  return out;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::InvalidConfig, why); };
  if (variants.empty()) fail("no variants");
  if (std::set<Variant>(variants.begin(), variants.end()).size() != variants.size()) {
    fail("variants repeat");
  }
  if (lengths.empty()) fail("no lengths");
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    if (lengths[i] == 0) fail("lengths must be >= 1");
    if (i > 0 && lengths[i] <= lengths[i - 1]) fail("lengths must be strictly increasing");
  }
  if (seeds.empty()) fail("no seeds");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    fail("seeds must be distinct");
  }
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) fail("train_fraction must be in (0, 1)");
  if (!(decision_threshold >= 0.0 && decision_threshold <= 1.0)) {
    fail("decision_threshold must be in [0, 1]");
  }
  forest.validate();
}

std::filesystem::path ExperimentConfig::effective_cache_dir() const {
  return cache_dir.empty() ? report_dir / "cache" : cache_dir;
}

std::string ExperimentConfig::canonical() const {
  std::string out;
  out += "train_fraction=" + format_double(train_fraction) + "\n";
  out += "n_trees=" + std::to_string(forest.n_trees) + "\n";
  out += "max_depth=" + (forest.max_depth ? std::to_string(*forest.max_depth) : std::string("none")) + "\n";
  out += "min_samples_split=" + std::to_string(forest.min_samples_split) + "\n";
  out += "features_per_split=" + forest.features_per_split.to_string() + "\n";
  out += "bootstrap=" + std::string(forest.bootstrap ? "true" : "false") + "\n";
  out += "vocab_scope=" + std::string(vocab_dataset_wide ? "dataset" : "train") + "\n";
  out += "decision_threshold=" + format_double(decision_threshold) + "\n";
  out += "calls_pointer=" + schema.calls_pointer + "\n";
  return out;
}

void apply_setting(ExperimentConfig& c, std::string_view key, std::string_view value) {
  key = trim(key);
  value = trim(value);
  if (key == "variants") {
    c.variants.clear();
    for (auto item : split_list(value)) {
      auto v = parse_variant(item);
      if (!v) bad(key, value, "unknown variant");
      c.variants.push_back(*v);
    }
  } else if (key == "lengths") {
    c.lengths.clear();
    for (auto item : split_list(value)) c.lengths.push_back(parse_number<std::size_t>(key, item));
  } else if (key == "seeds") {
    c.seeds.clear();
    for (auto item : split_list(value)) c.seeds.push_back(parse_number<std::uint64_t>(key, item));
  } else if (key == "train_fraction") {
    c.train_fraction = parse_number<double>(key, value);
  } else if (key == "n_trees") {
    c.forest.n_trees = parse_number<std::size_t>(key, value);
  } else if (key == "max_depth") {
    if (value == "none" || value == "unlimited") {
      c.forest.max_depth.reset();
    } else {
      c.forest.max_depth = parse_number<std::size_t>(key, value);
    }
  } else if (key == "min_samples_split") {
    c.forest.min_samples_split = parse_number<std::size_t>(key, value);
  } else if (key == "features_per_split") {
    auto rule = FeaturesPerSplit::parse(value);
    if (!rule) bad(key, value, "expected sqrt, log2, all or a positive count");
    c.forest.features_per_split = *rule;
  } else if (key == "bootstrap") {
    c.forest.bootstrap = parse_bool(key, value);
  } else if (key == "vocab_scope") {
    if (value == "train") c.vocab_dataset_wide = false;
    else if (value == "dataset") c.vocab_dataset_wide = true;
    else bad(key, value, "expected train or dataset");
  } else if (key == "decision_threshold") {
    c.decision_threshold = parse_number<double>(key, value);
  } else if (key == "strict") {
    c.strict = parse_bool(key, value);
  } else if (key == "calls_pointer") {
    c.schema.calls_pointer = std::string(value);
  } else if (key == "threads") {
    c.threads = parse_number<std::size_t>(key, value);
  } else if (key == "corpus_dir") {
    c.corpus_dir = std::string(value);
  } else if (key == "manifest") {
    c.manifest = std::string(value);
  } else if (key == "report_dir") {
    c.report_dir = std::string(value);
  } else if (key == "cache_dir") {
    c.cache_dir = std::string(value);
  } else {
    throw Error(ErrorCode::InvalidConfig, "unknown config key '" + std::string(key) + "'");
  }
}

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig config;
  std::size_t start = 0, lineno = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::InvalidConfig, "line " + std::to_string(lineno) + ": expected key = value");
    }
    try {
      apply_setting(config, line.substr(0, eq), line.substr(eq + 1));
    } catch (const Error& e) {
      rethrow_with_context(e, "line " + std::to_string(lineno));
    }
  }
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  ExperimentConfig config = parse_config(read_file(path));
  // Relative data paths are taken relative to the config file.
  const auto base = path.parent_path();
  for (auto* p : {&config.corpus_dir, &config.manifest, &config.report_dir, &config.cache_dir}) {
    if (!p->empty() && p->is_relative()) *p = base / *p;
  }
  return config;
}

std::string config_to_text(const ExperimentConfig& c) {
  std::string out;
  out += "corpus_dir = " + c.corpus_dir.string() + "\n";
  out += "manifest = " + c.manifest.string() + "\n";
  out += "report_dir = " + c.report_dir.string() + "\n";
  if (!c.cache_dir.empty()) out += "cache_dir = " + c.cache_dir.string() + "\n";
  out += "variants = " + join(c.variants) + "\n";
  out += "lengths = " + join(c.lengths) + "\n";
  out += "seeds = " + join(c.seeds) + "\n";
  out += "threads = " + std::to_string(c.threads) + "\n";
  out += "strict = " + std::string(c.strict ? "true" : "false") + "\n";
  // canonical() is already key=value lines
  std::string canon = c.canonical();
  for (std::size_t pos = 0; (pos = canon.find('=', pos)) != std::string::npos; pos += 3) {
    canon.replace(pos, 1, " = ");
  }
  return out + canon;
}

}  // namespace apifreq
