#include <string>

#include "apifreq/error.hpp"
#include "apifreq/featurization.hpp"
#include "byte_io.hpp"

namespace apifreq {

namespace {
constexpr std::string_view kMagic = "APFM";
}

std::string encode_feature_matrix(const FeatureMatrix& matrix) {
  detail::ByteWriter w;
  w.put_bytes(kMagic);
  w.put(kFeatureCacheVersion);
  w.put(static_cast<std::uint8_t>(matrix.variant));
  w.put(static_cast<std::uint64_t>(matrix.threshold.is_unlimited() ? 0 : matrix.threshold.value()));
  w.put(static_cast<std::uint64_t>(matrix.dimension));
  w.put(static_cast<std::uint64_t>(matrix.rows.size()));
  w.put(static_cast<std::uint32_t>(matrix.vocab_fingerprints.size()));
  for (const auto& fp : matrix.vocab_fingerprints) w.put_string(fp);
  for (const auto& row : matrix.rows) {
    w.put(static_cast<std::uint32_t>(row.size()));
    for (const auto& e : row) {
      w.put(e.index);
      w.put(e.count);
    }
  }
  return w.take();
}

FeatureMatrix decode_feature_matrix(std::string_view bytes) {
  detail::ByteReader r(bytes);
  if (r.get_bytes(kMagic.size()) != kMagic) {
    throw Error(ErrorCode::SchemaMismatch, "not a feature cache (bad magic)");
  }
  const auto version = r.get<std::uint32_t>();
  if (r.ok() && version != kFeatureCacheVersion) {
    throw Error(ErrorCode::VersionMismatch, "feature cache version " + std::to_string(version) +
                                                ", expected " + std::to_string(kFeatureCacheVersion));
  }
  FeatureMatrix m;
  const auto variant = r.get<std::uint8_t>();
  if (variant > static_cast<std::uint8_t>(Variant::combined)) {
    throw Error(ErrorCode::SchemaMismatch, "feature cache has unknown variant");
  }
  m.variant = static_cast<Variant>(variant);
  const auto threshold = r.get<std::uint64_t>();
  m.threshold = threshold == 0 ? LengthThreshold::unlimited() : LengthThreshold(threshold);
  m.dimension = r.get<std::uint64_t>();
  const auto n_rows = r.get<std::uint64_t>();
  const auto n_fp = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_fp && r.ok(); ++i) m.vocab_fingerprints.push_back(r.get_string());
  if (!r.ok() || n_rows > r.remaining() / 4) {
    throw Error(ErrorCode::SchemaMismatch, "feature cache header truncated");
  }
  m.rows.resize(n_rows);
  for (auto& row : m.rows) {
    const auto nnz = r.get<std::uint32_t>();
    if (!r.ok() || nnz > r.remaining() / 8) break;
    row.resize(nnz);
    for (auto& e : row) {
      e.index = r.get<std::uint32_t>();
      e.count = r.get<std::uint32_t>();
      if (e.index >= m.dimension) {
        throw Error(ErrorCode::DimensionMismatch, "feature index out of range in cache");
      }
    }
  }
  if (!r.ok() || r.remaining() != 0) {
    throw Error(ErrorCode::SchemaMismatch, "feature cache body truncated or has trailing bytes");
  }
  return m;
}

void save_feature_matrix(const FeatureMatrix& matrix, const std::filesystem::path& path) {
  write_file(path, encode_feature_matrix(matrix));
}

FeatureMatrix load_feature_matrix(const std::filesystem::path& path) {
  try {
    return decode_feature_matrix(read_file(path));
  } catch (const Error& e) {
    rethrow_with_context(e, path.string());
  }
}

std::string feature_matrix_csv(const FeatureMatrix& matrix) {
  std::string out = "# variant=" + std::string(to_string(matrix.variant)) +
                    " length=" + matrix.threshold.to_string() +
                    " dimension=" + std::to_string(matrix.dimension) + "\n";
  const bool with_ids = matrix.sample_ids.size() == matrix.rows.size();
  out += with_ids ? "sample_id,feature,count\n" : "row,feature,count\n";
  for (std::size_t i = 0; i < matrix.rows.size(); ++i) {
    const std::string key = with_ids ? matrix.sample_ids[i] : std::to_string(i);
    for (const auto& e : matrix.rows[i]) {
      out += key;
      out += ',';
      out += std::to_string(e.index);
      out += ',';
      out += std::to_string(e.count);
      out += '\n';
    }
  }
  return out;
}

std::string labels_csv(const FeatureMatrix& matrix) {
  if (matrix.labels.size() != matrix.rows.size() || matrix.sample_ids.size() != matrix.rows.size()) {
    throw Error(ErrorCode::DimensionMismatch, "matrix has no per-row labels to export");
  }
  std::string out = "sample_id,label\n";
  for (std::size_t i = 0; i < matrix.rows.size(); ++i) {
    out += matrix.sample_ids[i];
    out += ',';
    out += to_string(matrix.labels[i]);
    out += '\n';
  }
  return out;
}

void attach_labels(FeatureMatrix& matrix, std::string_view text) {
  std::vector<std::string> ids;
  std::vector<SampleLabel> labels;
  std::size_t start = 0;
  bool header = true;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (header) {
      if (line != "sample_id,label") {
        throw Error(ErrorCode::SchemaMismatch, "labels file must start with 'sample_id,label'");
      }
      header = false;
      continue;
    }
    const auto comma = line.find(',');
    const auto label = comma == std::string_view::npos ? std::nullopt : parse_label(line.substr(comma + 1));
    if (!label) {
      throw Error(ErrorCode::SchemaMismatch, "bad labels row '" + std::string(line) + "'");
    }
    ids.emplace_back(line.substr(0, comma));
    labels.push_back(*label);
  }
  if (labels.size() != matrix.rows.size()) {
    throw Error(ErrorCode::DimensionMismatch, std::to_string(labels.size()) + " labels for " +
                                                  std::to_string(matrix.rows.size()) +
                                                  " matrix rows");
  }
  matrix.labels = std::move(labels);
  matrix.sample_ids = std::move(ids);
}

}  // namespace apifreq
