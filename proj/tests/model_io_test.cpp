#include <gtest/gtest.h>

#include <random>

#include "apifreq/forest.hpp"
#include "support.hpp"

namespace apifreq {
namespace {

using testing::code_of;

FeatureMatrix random_matrix(std::mt19937_64& gen, std::size_t n, std::size_t d) {
  FeatureMatrix m;
  m.dimension = d;
  m.vocab_fingerprints = {"f00d"};
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<SparseEntry> row;
    std::uint32_t s = 0;
    for (std::uint32_t j = 0; j < d; ++j)
      if (std::uint32_t v = static_cast<std::uint32_t>(gen() % 4)) {
        row.push_back({j, v});
        s += v;
      }
    m.rows.push_back(row);
    m.labels.push_back((s + gen() % 2) % 2 ? SampleLabel::benign : SampleLabel::malware);
  }
  return m;
}

struct ModelIo : ::testing::Test {
  std::mt19937_64 gen{31};
  ForestModel model;
  void SetUp() override {
    ForestParams p;
    p.n_trees = 25;
    p.max_depth = 12;
    p.seed = 5;
    model = train_forest(random_matrix(gen, 150, 20), p);
  }
};

TEST_F(ModelIo, RoundTripPredictsIdentically) {
  testing::ScratchDir dir("model");
  save_model(model, dir.path / "m.bin");
  auto back = load_model(dir.path / "m.bin");
  EXPECT_EQ(back.params.n_trees, 25u);
  EXPECT_EQ(back.params.max_depth, std::optional<std::size_t>(12));
  EXPECT_EQ(back.feature_dimension, 20u);
  EXPECT_EQ(back.vocab_fingerprints, model.vocab_fingerprints);
  EXPECT_EQ(back.metadata.seed, model.metadata.seed);
  EXPECT_EQ(back.metadata.class_counts, model.metadata.class_counts);
  EXPECT_EQ(encode_model(back), encode_model(model));
  auto probe = random_matrix(gen, 1000, 20);
  for (std::size_t i = 0; i < probe.row_count(); ++i) {
    EXPECT_EQ(predict_proba(back, probe.rows[i]), predict_proba(model, probe.rows[i]));
    EXPECT_EQ(predict(back, probe.row(i)), predict(model, probe.row(i)));
  }
}

TEST_F(ModelIo, TruncatedIsCorrupt) {
  const auto bytes = encode_model(model);
  for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{10}, bytes.size() / 2, bytes.size() - 1})
    EXPECT_EQ(code_of([&] { decode_model(bytes.substr(0, cut)); }), ErrorCode::CorruptModel) << cut;
}

TEST_F(ModelIo, FlippedPayloadByteIsCorrupt) {
  auto bytes = encode_model(model);
  bytes[bytes.size() - 9] ^= 0x40;
  EXPECT_EQ(code_of([&] { decode_model(bytes); }), ErrorCode::CorruptModel);
}

TEST_F(ModelIo, BumpedVersion) {
  auto bytes = encode_model(model);
  bytes[4] = static_cast<char>(kModelFormatVersion + 1);
  EXPECT_EQ(code_of([&] { decode_model(bytes); }), ErrorCode::VersionMismatch);
}

TEST_F(ModelIo, MissingFile) {
  EXPECT_EQ(code_of([&] { load_model("/nonexistent/model.bin"); }), ErrorCode::IoFailure);
}

}  // namespace
}  // namespace apifreq
