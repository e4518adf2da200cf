#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "apifreq/forest.hpp"
#include "apifreq/synthetic.hpp"
#include "support.hpp"

namespace apifreq {
namespace {

using testing::code_of;
constexpr auto M = SampleLabel::malware;
constexpr auto B = SampleLabel::benign;

TEST(Gini, Examples) {
  EXPECT_DOUBLE_EQ(gini_impurity({2, 2}), 0.5);
  EXPECT_DOUBLE_EQ(gini_impurity({7, 0}), 0.0);
  EXPECT_DOUBLE_EQ(gini_impurity({3, 1}), 0.375);
  EXPECT_EQ(code_of([] { gini_impurity({0, 0}); }), ErrorCode::EmptyNode);
}

TEST(BestSplit, PerfectSeparationAtMidpoint) {
  std::vector<std::vector<double>> rows{{0}, {0}, {5}, {5}};
  std::vector<SampleLabel> labels{M, M, B, B};
  std::vector<std::size_t> cand{0};
  auto s = best_split(rows, labels, cand);
  ASSERT_TRUE(s);
  EXPECT_EQ(s->feature, 0u);
  EXPECT_DOUBLE_EQ(s->threshold, 2.5);
  EXPECT_DOUBLE_EQ(s->impurity_decrease, 0.5);
}

TEST(BestSplit, IdenticalRowsGiveNothing) {
  std::vector<std::vector<double>> rows{{1, 2}, {1, 2}, {1, 2}};
  std::vector<SampleLabel> labels{M, B, M};
  std::vector<std::size_t> cand{0, 1};
  EXPECT_FALSE(best_split(rows, labels, cand));
}

TEST(BestSplit, NoGainGivesNothing) {
  // XOR: no single threshold lowers impurity
  std::vector<std::vector<double>> rows{{0, 0}, {0, 1}, {1, 0}, {1, 1}};
  std::vector<SampleLabel> labels{M, B, B, M};
  std::vector<std::size_t> cand{0, 1};
  EXPECT_FALSE(best_split(rows, labels, cand));
}

TEST(BestSplit, TieBreakLowestFeatureThenThreshold) {
  std::vector<std::vector<double>> rows{{0, 0}, {1, 1}, {2, 2}, {3, 3}};
  std::vector<SampleLabel> labels{M, M, B, B};
  std::vector<std::size_t> cand{1, 0};
  auto s = best_split(rows, labels, cand);
  ASSERT_TRUE(s);
  EXPECT_EQ(s->feature, 0u);
  EXPECT_DOUBLE_EQ(s->threshold, 1.5);

  // two equally good thresholds on one feature: {M,B,M,B}-like symmetric case
  std::vector<std::vector<double>> r2{{0}, {1}, {2}};
  std::vector<SampleLabel> l2{M, B, M};
  std::vector<std::size_t> c2{0};
  auto s2 = best_split(r2, l2, c2);
  ASSERT_TRUE(s2);
  EXPECT_DOUBLE_EQ(s2->threshold, 0.5);
}

TEST(BestSplit, ExhaustiveOracle) {
  std::mt19937_64 gen(99);
  for (int c = 0; c < 200; ++c) {
    const std::size_t n = 2 + gen() % 49, d = 1 + gen() % 5;
    const int range = 1 + static_cast<int>(gen() % 6);
    std::vector<std::vector<double>> rows(n, std::vector<double>(d));
    std::vector<SampleLabel> labels(n);
    for (auto& r : rows)
      for (auto& v : r) v = static_cast<double>(gen() % static_cast<unsigned>(range));
    for (auto& l : labels) l = gen() % 3 == 0 ? B : M;
    std::vector<std::size_t> cand(d);
    std::iota(cand.begin(), cand.end(), 0);
    std::shuffle(cand.begin(), cand.end(), gen);
    cand.resize(1 + gen() % d);
    auto got = best_split(rows, labels, cand);
    std::sort(cand.begin(), cand.end());
    auto want = testing::exhaustive_split(rows, labels, cand);
    ASSERT_EQ(got.has_value(), want.has_value()) << "case " << c;
    if (!got) continue;
    EXPECT_EQ(got->feature, want->feature) << "case " << c;
    EXPECT_EQ(got->threshold, want->threshold) << "case " << c;
    EXPECT_NEAR(got->impurity_decrease, want->decrease, 1e-12) << "case " << c;
  }
}

TEST(FeaturesPerSplitRule, Resolve) {
  EXPECT_EQ(FeaturesPerSplit{}.resolve(8082), 89u);
  EXPECT_EQ((FeaturesPerSplit{FeaturesPerSplit::Rule::log2, 0}).resolve(1024), 10u);
  EXPECT_EQ((FeaturesPerSplit{FeaturesPerSplit::Rule::all, 0}).resolve(7), 7u);
  EXPECT_EQ((FeaturesPerSplit{FeaturesPerSplit::Rule::fixed, 50}).resolve(7), 7u);
  EXPECT_EQ(FeaturesPerSplit{}.resolve(1), 1u);
  EXPECT_EQ(FeaturesPerSplit::parse("12")->count, 12u);
  EXPECT_FALSE(FeaturesPerSplit::parse("many"));
}

TEST(Params, Validate) {
  ForestParams p;
  p.n_trees = 0;
  EXPECT_EQ(code_of([&] { p.validate(); }), ErrorCode::InvalidConfig);
  p.n_trees = 1;
  p.min_samples_split = 1;
  EXPECT_EQ(code_of([&] { p.validate(); }), ErrorCode::InvalidConfig);
}

FeatureMatrix matrix_from(const std::vector<std::vector<std::uint32_t>>& dense, const std::vector<SampleLabel>& labels) {
  FeatureMatrix m;
  m.dimension = dense.empty() ? 0 : dense[0].size();
  for (std::size_t i = 0; i < dense.size(); ++i) {
    std::vector<SparseEntry> row;
    for (std::size_t j = 0; j < dense[i].size(); ++j)
      if (dense[i][j]) row.push_back({static_cast<std::uint32_t>(j), dense[i][j]});
    m.rows.push_back(std::move(row));
    m.sample_ids.push_back(testing::hex_id(i + 1));
  }
  m.labels = labels;
  return m;
}

FeatureMatrix random_matrix(std::mt19937_64& gen, std::size_t n, std::size_t d, unsigned range) {
  std::vector<std::vector<std::uint32_t>> dense(n, std::vector<std::uint32_t>(d));
  std::vector<SampleLabel> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& v : dense[i]) v = static_cast<std::uint32_t>(gen() % range);
    labels[i] = (dense[i][0] + dense[i][1] + gen() % 3) % 2 ? B : M;
  }
  return matrix_from(dense, labels);
}

FeatureMatrix synthetic_unigrams(double divergence, std::size_t n, std::uint64_t seed, std::size_t limit) {
  SyntheticSpec spec;
  spec.n_samples = n;
  spec.divergence = divergence;
  spec.seed = seed;
  spec.max_length = 400;
  spec.benign_fraction = 0.2;
  auto corpus = generate_synthetic_corpus(spec);
  auto set = build_vocabularies(corpus.traces, Variant::unigram);
  return featurize_corpus(corpus.traces, LengthThreshold(limit), Variant::unigram, set);
}

TEST(Train, Errors) {
  FeatureMatrix empty;
  EXPECT_EQ(code_of([&] { train_forest(empty, {}); }), ErrorCode::EmptyMatrix);
  auto m = matrix_from({{1, 2}, {3, 4}}, {M, B});
  m.rows[1].push_back({5, 1});
  EXPECT_EQ(code_of([&] { train_forest(m, {}); }), ErrorCode::DimensionMismatch);
}

TEST(Train, SingleClassPredictsThatClass) {
  auto m = matrix_from({{1, 0}, {0, 1}, {2, 2}}, {M, M, M});
  ForestParams p;
  p.n_trees = 10;
  auto model = train_forest(m, p);
  for (std::size_t i = 0; i < m.row_count(); ++i) {
    EXPECT_EQ(predict_proba(model, m.rows[i]), 0.0);
    EXPECT_EQ(predict(model, m.row(i)), M);
  }
}

TEST(Train, ShattersConsistentData) {
  auto m = synthetic_unigrams(0.2, 300, 3, 60);
  ForestParams p;
  p.n_trees = 25;
  p.bootstrap = false;
  p.seed = 1;
  auto model = train_forest(m, p);
  for (std::size_t i = 0; i < m.row_count(); ++i) EXPECT_EQ(predict(model, m.row(i)), m.labels[i]) << i;
}

TEST(Train, ShattersXor) {
  auto m = matrix_from({{0, 0}, {0, 1}, {1, 0}, {1, 1}}, {M, B, B, M});
  ForestParams p;
  p.n_trees = 5;
  p.bootstrap = false;
  auto model = train_forest(m, p);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(predict(model, m.row(i)), m.labels[i]);
}

TEST(Train, DeterministicForAnyWorkerCount) {
  std::mt19937_64 gen(5);
  auto m = random_matrix(gen, 120, 30, 4);
  ForestParams p;
  p.n_trees = 30;
  p.seed = 77;
  p.workers = 1;
  const auto a = encode_model(train_forest(m, p));
  p.workers = 4;
  const auto b = encode_model(train_forest(m, p));
  EXPECT_EQ(a, b);
}

TEST(Train, MaxDepthAndMinSamplesRespected) {
  std::mt19937_64 gen(6);
  auto m = random_matrix(gen, 200, 10, 5);
  ForestParams p;
  p.n_trees = 5;
  p.max_depth = 3;
  auto model = train_forest(m, p);
  for (const auto& t : model.trees) EXPECT_LE(t.depth(), 3u);

  p.max_depth.reset();
  p.min_samples_split = 1000;
  p.bootstrap = false;
  auto stumps = train_forest(m, p);
  for (const auto& t : stumps.trees) EXPECT_EQ(t.nodes().size(), 1u);
}

TEST(Model, Invariants) {
  std::mt19937_64 gen(7);
  auto m = random_matrix(gen, 150, 12, 6);
  ForestParams p;
  p.n_trees = 20;
  auto model = train_forest(m, p);
  EXPECT_EQ(model.trees.size(), 20u);
  EXPECT_EQ(model.feature_dimension, 12u);
  for (const auto& t : model.trees)
    for (const auto& node : t.nodes()) {
      if (node.is_leaf())
        EXPECT_GE(node.counts.total(), 1u);
      else
        EXPECT_LT(node.feature, 12u);
    }
}

TEST(Predict, TraversalOracle) {
  std::mt19937_64 gen(8);
  auto m = random_matrix(gen, 200, 15, 5);
  ForestParams p;
  p.n_trees = 40;
  p.seed = 3;
  auto model = train_forest(m, p);
  auto probe = random_matrix(gen, 300, 15, 7);
  auto batch = predict_proba(model, probe);
  for (std::size_t i = 0; i < probe.row_count(); ++i) {
    const double want = testing::traversal_proba(model, probe.row(i).dense());
    EXPECT_DOUBLE_EQ(predict_proba(model, probe.row(i)), want);
    EXPECT_DOUBLE_EQ(batch[i], want);
    EXPECT_GE(want, 0.0);
    EXPECT_LE(want, 1.0);
  }
}

TEST(Predict, DimensionMismatch) {
  auto m = matrix_from({{1, 0}, {0, 1}}, {M, B});
  auto model = train_forest(m, {});
  FeatureVector wrong{Variant::unigram, 3, {}};
  EXPECT_EQ(code_of([&] { predict_proba(model, wrong); }), ErrorCode::DimensionMismatch);
}

// Forest of hand-built stumps: 40 route to a pure benign leaf, 60 to pure malware.
ForestModel vote_model(std::size_t benign_trees, std::size_t total) {
  ForestModel model;
  model.feature_dimension = 1;
  model.params.n_trees = total;
  for (std::size_t t = 0; t < total; ++t) {
    TreeNode leaf;
    leaf.counts = t < benign_trees ? ClassCounts{0, 3} : ClassCounts{5, 0};
    model.trees.emplace_back(std::vector<TreeNode>{leaf});
  }
  return model;
}

TEST(Predict, SoftVotingAndThresholds) {
  FeatureVector row{Variant::unigram, 1, {}};
  EXPECT_DOUBLE_EQ(predict_proba(vote_model(100, 100), row), 1.0);
  EXPECT_DOUBLE_EQ(predict_proba(vote_model(40, 100), row), 0.4);
  EXPECT_EQ(predict(vote_model(49, 100), row, 0.5), M);
  EXPECT_EQ(predict(vote_model(50, 100), row, 0.5), B);
  EXPECT_EQ(predict(vote_model(0, 100), row, 0.0), B);
}

TEST(Properties, ConstantColumnChangesNothing) {
  std::mt19937_64 gen(9);
  for (int c = 0; c < 10; ++c) {
    auto m = random_matrix(gen, 80, 6, 4);
    // same data with an all-zero column inserted at position 0
    FeatureMatrix wide = m;
    wide.dimension = m.dimension + 1;
    for (auto& row : wide.rows)
      for (auto& e : row) ++e.index;
    ForestParams p;
    p.n_trees = 15;
    p.seed = static_cast<std::uint64_t>(c);
    p.features_per_split = {FeaturesPerSplit::Rule::all, 0};
    auto a = train_forest(m, p);
    auto b = train_forest(wide, p);
    auto probe = random_matrix(gen, 50, 6, 5);
    for (std::size_t i = 0; i < probe.row_count(); ++i) {
      auto shifted = probe.rows[i];
      for (auto& e : shifted) ++e.index;
      EXPECT_EQ(predict_proba(a, probe.rows[i]), predict_proba(b, shifted));
    }
  }
}

TEST(Properties, RowOrderIndependentWithoutBootstrap) {
  std::mt19937_64 gen(10);
  for (int c = 0; c < 10; ++c) {
    auto m = random_matrix(gen, 90, 8, 5);
    std::vector<std::size_t> perm(m.row_count());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), gen);
    FeatureMatrix shuffled = m;
    for (std::size_t i = 0; i < perm.size(); ++i) {
      shuffled.rows[i] = m.rows[perm[i]];
      shuffled.labels[i] = m.labels[perm[i]];
      shuffled.sample_ids[i] = m.sample_ids[perm[i]];
    }
    ForestParams p;
    p.n_trees = 10;
    p.bootstrap = false;
    p.seed = 11;
    auto a = train_forest(m, p);
    auto b = train_forest(shuffled, p);
    auto probe = random_matrix(gen, 60, 8, 6);
    for (std::size_t i = 0; i < probe.row_count(); ++i)
      EXPECT_EQ(predict_proba(a, probe.rows[i]), predict_proba(b, probe.rows[i]));
  }
}

TEST(Properties, EnsembleVarianceShrinks) {
  auto m = synthetic_unigrams(0.1, 300, 17, 100);
  FeatureMatrix train = m, probe = m;
  train.rows.resize(200);
  train.labels.resize(200);
  train.sample_ids.resize(200);
  probe.rows.erase(probe.rows.begin(), probe.rows.begin() + 200);

  auto mean_variance = [&](std::size_t trees) {
    const int seeds = 12;
    std::vector<std::vector<double>> p(seeds);
    for (int s = 0; s < seeds; ++s) {
      ForestParams params;
      params.n_trees = trees;
      params.seed = 1000 + static_cast<std::uint64_t>(s);
      auto model = train_forest(train, params);
      for (const auto& row : probe.rows) p[static_cast<std::size_t>(s)].push_back(predict_proba(model, row));
    }
    double total = 0;
    for (std::size_t i = 0; i < probe.rows.size(); ++i) {
      double mean = 0, var = 0;
      for (int s = 0; s < seeds; ++s) mean += p[static_cast<std::size_t>(s)][i];
      mean /= seeds;
      for (int s = 0; s < seeds; ++s) var += std::pow(p[static_cast<std::size_t>(s)][i] - mean, 2);
      total += var / (seeds - 1);
    }
    return total / static_cast<double>(probe.rows.size());
  };
  const double v1 = mean_variance(1), v10 = mean_variance(10), v100 = mean_variance(100);
  EXPECT_LT(v10, v1);
  EXPECT_LT(v100, v10);
}

}  // namespace
}  // namespace apifreq
