#include <string>

#include "apifreq/error.hpp"
#include "apifreq/forest.hpp"
#include "apifreq/hash.hpp"
#include "byte_io.hpp"

namespace apifreq {

namespace {

constexpr std::string_view kMagic = "APRF";
constexpr std::size_t kChecksumSize = 32;

std::span<const std::uint8_t> as_bytes(std::string_view s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

[[noreturn]] void corrupt(const std::string& what) { throw Error(ErrorCode::CorruptModel, what); }

}  // namespace

std::string encode_model(const ForestModel& model) {
  detail::ByteWriter body;
  const auto& p = model.params;
  body.put(static_cast<std::uint32_t>(p.n_trees));
  body.put(static_cast<std::int64_t>(p.max_depth ? static_cast<std::int64_t>(*p.max_depth) : -1));
  body.put(static_cast<std::uint32_t>(p.min_samples_split));
  body.put(static_cast<std::uint8_t>(p.features_per_split.rule));
  body.put(static_cast<std::uint32_t>(p.features_per_split.count));
  body.put(static_cast<std::uint8_t>(p.bootstrap ? 1 : 0));
  body.put(p.seed);

  body.put(static_cast<std::uint8_t>(model.class_order.size()));
  for (SampleLabel l : model.class_order) body.put(static_cast<std::uint8_t>(l));
  body.put(static_cast<std::uint64_t>(model.feature_dimension));
  body.put(static_cast<std::uint32_t>(model.vocab_fingerprints.size()));
  for (const auto& fp : model.vocab_fingerprints) body.put_string(fp);

  body.put(model.metadata.seed);
  body.put_string(model.metadata.seed_derivation);
  body.put(model.metadata.n_rows);
  body.put(model.metadata.class_counts.malware);
  body.put(model.metadata.class_counts.benign);

  body.put(static_cast<std::uint32_t>(model.trees.size()));
  for (const auto& tree : model.trees) {
    body.put(static_cast<std::uint32_t>(tree.nodes().size()));
    for (const auto& node : tree.nodes()) {
      if (node.is_leaf()) {
        body.put(std::uint8_t{0});
        body.put(node.counts.malware);
        body.put(node.counts.benign);
      } else {
        body.put(std::uint8_t{1});
        body.put(node.feature);
        body.put(node.threshold);
      }
    }
  }

  const std::string payload = body.take();
  const Digest checksum = sha256(as_bytes(payload));
  detail::ByteWriter out;
  out.put_bytes(kMagic);
  out.put(kModelFormatVersion);
  out.put_bytes(std::string_view(reinterpret_cast<const char*>(checksum.data()), checksum.size()));
  out.put_bytes(payload);
  return out.take();
}

ForestModel decode_model(std::string_view bytes) {
  detail::ByteReader head(bytes);
  if (head.get_bytes(kMagic.size()) != kMagic) corrupt("bad magic");
  const auto version = head.get<std::uint32_t>();
  if (!head.ok()) corrupt("truncated header");
  if (version != kModelFormatVersion) {
    throw Error(ErrorCode::VersionMismatch, "model format version " + std::to_string(version) +
                                                ", expected " + std::to_string(kModelFormatVersion));
  }
  const auto stored = head.get_bytes(kChecksumSize);
  if (!head.ok()) corrupt("truncated header");
  const std::string_view payload = bytes.substr(head.position());
  const Digest actual = sha256(as_bytes(payload));
  if (stored != std::string_view(reinterpret_cast<const char*>(actual.data()), actual.size())) {
    corrupt("checksum mismatch");
  }

  detail::ByteReader r(payload);
  ForestModel model;
  auto& p = model.params;
  p.n_trees = r.get<std::uint32_t>();
  const auto depth = r.get<std::int64_t>();
  if (depth >= 0) p.max_depth = static_cast<std::size_t>(depth);
  p.min_samples_split = r.get<std::uint32_t>();
  const auto rule = r.get<std::uint8_t>();
  if (rule > static_cast<std::uint8_t>(FeaturesPerSplit::Rule::fixed)) corrupt("bad feature rule");
  p.features_per_split.rule = static_cast<FeaturesPerSplit::Rule>(rule);
  p.features_per_split.count = r.get<std::uint32_t>();
  p.bootstrap = r.get<std::uint8_t>() != 0;
  p.seed = r.get<std::uint64_t>();

  if (r.get<std::uint8_t>() != 2) corrupt("expected two classes");
  for (auto& l : model.class_order) {
    const auto v = r.get<std::uint8_t>();
    if (v > 1) corrupt("bad class id");
    l = static_cast<SampleLabel>(v);
  }
  model.feature_dimension = r.get<std::uint64_t>();
  const auto n_fp = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_fp && r.ok(); ++i) model.vocab_fingerprints.push_back(r.get_string());

  model.metadata.seed = r.get<std::uint64_t>();
  model.metadata.seed_derivation = r.get_string();
  model.metadata.n_rows = r.get<std::uint64_t>();
  model.metadata.class_counts.malware = r.get<std::uint64_t>();
  model.metadata.class_counts.benign = r.get<std::uint64_t>();

  const auto n_trees = r.get<std::uint32_t>();
  if (!r.ok() || n_trees != p.n_trees) corrupt("tree count mismatch");
  model.trees.reserve(n_trees);
  for (std::uint32_t t = 0; t < n_trees; ++t) {
    const auto n_nodes = r.get<std::uint32_t>();
    if (!r.ok() || n_nodes == 0 || n_nodes > r.remaining() / 13) corrupt("bad node count");
    std::vector<TreeNode> nodes(n_nodes);
    // Rebuild right-child links from preorder: each open internal node
    // records how many children have started.
    std::vector<std::pair<std::uint32_t, int>> open;
    for (std::uint32_t i = 0; i < n_nodes; ++i) {
      if (i > 0 && open.empty()) corrupt("preorder has extra nodes");
      if (!open.empty()) {
        auto& [parent, started] = open.back();
        if (started == 1) nodes[parent].right = i;
        ++started;
      }
      auto& node = nodes[i];
      const auto kind = r.get<std::uint8_t>();
      if (kind == 1) {
        node.feature = r.get<std::uint32_t>();
        node.threshold = r.get<double>();
        if (node.feature >= model.feature_dimension) corrupt("feature index out of range");
        open.emplace_back(i, 0);
      } else if (kind == 0) {
        node.counts.malware = r.get<std::uint64_t>();
        node.counts.benign = r.get<std::uint64_t>();
        if (node.counts.total() == 0) corrupt("empty leaf");
        while (!open.empty() && open.back().second == 2) open.pop_back();
      } else {
        corrupt("bad node kind");
      }
      if (!r.ok()) corrupt("truncated tree");
    }
    if (!open.empty()) corrupt("incomplete tree");
    model.trees.emplace_back(std::move(nodes));
  }
  if (!r.ok() || r.remaining() != 0) corrupt("trailing or missing bytes");
  return model;
}

void save_model(const ForestModel& model, const std::filesystem::path& path) {
  write_file(path, encode_model(model));
}

ForestModel load_model(const std::filesystem::path& path) {
  try {
    return decode_model(read_file(path));
  } catch (const Error& e) {
    rethrow_with_context(e, path.string());
  }
}

}  // namespace apifreq
