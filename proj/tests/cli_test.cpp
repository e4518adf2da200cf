#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

#include "apifreq/trace_corpus.hpp"
#include "cli.hpp"
#include "support.hpp"

namespace apifreq {
namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "apifreq");
  std::ostringstream out, err;
  const int code = cli::dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

std::size_t lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

TEST(Cli, UsageErrors) {
  auto r = run({"frobnicate"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"train", "--bogus"}).code, 2);
  EXPECT_EQ(run({"train", "--out", "x"}).code, 2);
}

TEST(Cli, HelpOnEverySubcommand) {
  for (const char* sub : {"ingest", "synth", "vocab", "featurize", "train", "eval", "sweep", "report"}) {
    auto r = run({sub, "--help"});
    EXPECT_EQ(r.code, 0) << sub;
    EXPECT_NE(r.out.find(std::string("apifreq ") + sub), std::string::npos) << sub << r.out;
  }
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST(Cli, DomainErrorIsOneLine) {
  auto r = run({"report", "--results", "/nonexistent/sweep.json", "--out", "/tmp/x"});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(lines(r.err), 1u);
  EXPECT_EQ(r.err.rfind("error: IoFailure", 0), 0u) << r.err;
}

struct Pipeline : ::testing::Test {
  testing::ScratchDir dir{"cli"};
  std::string p(const std::string& rel) const { return (dir.path / rel).string(); }

  void SetUp() override {
    ASSERT_EQ(run({"synth", "--out", p("c"), "--samples", "200", "--max-length", "300", "--benign-fraction", "0.2",
                   "--ambiguous-fraction", "0.05"})
                  .code,
              0);
    auto r = run({"ingest", "--manifest", p("c/manifest.csv"), "--corpus", p("c/traces"), "--out", p("split.json")});
    ASSERT_EQ(r.code, 0) << r.err;
  }

  void featurize(const std::string& subset, const std::string& out) {
    auto r = run({"featurize", "--corpus", p("c/traces"), "--manifest", p("c/manifest.csv"), "--split",
                  p("split.json"), "--subset", subset, "--variant", "combined", "--length", "100", "--vocab",
                  p("v1.json"), p("v2.json"), p("v3.json"), "--out", p(out)});
    ASSERT_EQ(r.code, 0) << r.err;
  }
};

TEST_F(Pipeline, EndToEnd) {
  auto split = load_split(p("split.json"));
  EXPECT_GT(split.train_ids.size(), split.test_ids.size());
  for (const char* n : {"1", "2", "3"}) {
    auto r = run({"vocab", "--corpus", p("c/traces"), "--manifest", p("c/manifest.csv"), "--split", p("split.json"),
                  "-n", n, "--out", p(std::string("v") + n + ".json")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("fingerprint"), std::string::npos);
  }
  featurize("train", "train.bin");
  featurize("test", "test.bin");
  auto t = run({"train", "--matrix", p("train.bin"), "--out", p("model.bin"), "--trees", "20", "--threads", "2"});
  ASSERT_EQ(t.code, 0) << t.err;
  auto e = run({"eval", "--model", p("model.bin"), "--matrix", p("test.bin"), "--curves", p("curves")});
  ASSERT_EQ(e.code, 0) << e.err;
  EXPECT_NE(e.out.find("\"f1\""), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(p("curves/roc.csv")));
  EXPECT_TRUE(std::filesystem::exists(p("curves/pr.csv")));
  // progress stays off stdout
  EXPECT_EQ(t.out.find("training"), std::string::npos);
  EXPECT_NE(t.err.find("training"), std::string::npos);
}

TEST_F(Pipeline, MismatchedLabelsIsDimensionMismatch) {
  ASSERT_EQ(run({"vocab", "--corpus", p("c/traces"), "--manifest", p("c/manifest.csv"), "-n", "1", "--out",
                 p("v1.json")})
                .code,
            0);
  auto r = run({"featurize", "--corpus", p("c/traces"), "--manifest", p("c/manifest.csv"), "--split",
                p("split.json"), "--vocab", p("v1.json"), "--out", p("train.bin")});
  ASSERT_EQ(r.code, 0) << r.err;
  r = run({"featurize", "--corpus", p("c/traces"), "--manifest", p("c/manifest.csv"), "--split", p("split.json"),
           "--subset", "test", "--vocab", p("v1.json"), "--out", p("test.bin")});
  ASSERT_EQ(r.code, 0) << r.err;
  r = run({"train", "--matrix", p("train.bin"), "--labels", p("test.bin.labels.csv"), "--out", p("m.bin")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("DimensionMismatch"), std::string::npos) << r.err;
  EXPECT_EQ(lines(r.err), 1u) << r.err;
}

TEST_F(Pipeline, MissingTraceStrictVsLenient) {
  auto m = load_manifest(p("c/manifest.csv"));
  std::filesystem::remove(p("c/traces/" + m.entries[0].sample_id + ".json"));
  auto strict = run({"ingest", "--manifest", p("c/manifest.csv"), "--corpus", p("c/traces"), "--out", p("s2.json")});
  EXPECT_EQ(strict.code, 1);
  EXPECT_NE(strict.err.find("TraceMissing"), std::string::npos);
  EXPECT_NE(strict.err.find(m.entries[0].sample_id), std::string::npos) << strict.err;
  auto lenient = run({"ingest", "--manifest", p("c/manifest.csv"), "--corpus", p("c/traces"), "--out", p("s2.json"),
                      "--lenient"});
  EXPECT_EQ(lenient.code, 0) << lenient.err;
}

TEST_F(Pipeline, SweepAndReport) {
  write_file(p("s.cfg"), "corpus_dir = c/traces\nmanifest = c/manifest.csv\nreport_dir = out\n"
                         "variants = unigram\nlengths = 50,100\nseeds = 42,21\nn_trees = 10\n");
  ::setenv("APIFREQ_CONFIG", p("s.cfg").c_str(), 1);
  auto r = run({"sweep", "--threads", "2"});
  ::unsetenv("APIFREQ_CONFIG");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(lines(read_file(p("out/cells.csv"))), 5u);
  EXPECT_TRUE(std::filesystem::exists(p("out/provenance.json")));

  auto again = run({"sweep", "--config", p("s.cfg"), "--set", "n_trees=10", "--report-dir", p("again")});
  ASSERT_EQ(again.code, 0) << again.err;
  EXPECT_EQ(read_file(p("out/cells.csv")), read_file(p("again/cells.csv")));

  auto rep = run({"report", "--results", p("out/sweep.json"), "--out", p("re")});
  ASSERT_EQ(rep.code, 0) << rep.err;
  EXPECT_EQ(read_file(p("out/aggregate.csv")), read_file(p("re/aggregate.csv")));

  auto bad = run({"sweep", "--config", p("s.cfg"), "--set", "n_trees"});
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.err.find("InvalidConfig"), std::string::npos);
}

TEST(Cli, BundledDefaultConfig) {
  testing::ScratchDir dir("bundled");
  auto r = run({"sweep", "--config", std::string(APIFREQ_DATA_DIR) + "/default.cfg", "--report-dir",
                (dir.path / "reports").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(lines(read_file(dir.path / "reports/cells.csv")), 169u);
  EXPECT_EQ(lines(read_file(dir.path / "reports/aggregate.csv")), 57u);
}

}  // namespace
}  // namespace apifreq
