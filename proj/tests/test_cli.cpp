#include <sstream>

#include <gtest/gtest.h>

#include "cli.hpp"
#include "support.hpp"
#include "tea/net.hpp"
#include "tea/util.hpp"

namespace tea::cli {
namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(invoke({}).code, kExitUsage);
  EXPECT_EQ(invoke({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(invoke({"report", "nonsense", "x"}).code, kExitUsage);
  EXPECT_EQ(invoke({"--mock", "generate"}).code, kExitUsage);
  EXPECT_EQ(invoke({"--mock", "generate", "--all", "pythagorean-theorem"}).code, kExitUsage);
  EXPECT_EQ(invoke({"generate", "--all", "--rag", "maybe"}).code, kExitUsage);
  EXPECT_EQ(invoke({"--help"}).code, kExitOk);
}

TEST(Cli, FailuresExitOne) {
  testing::TempDir dir;
  EXPECT_EQ(invoke({"bench", "validate", (dir / "none.json").string()}).code, kExitFailure);
  EXPECT_EQ(invoke({"--mock", "generate", "no-such-theorem", "--runs", (dir / "runs").string()}).code, kExitFailure);
  EXPECT_EQ(invoke({"report", "success", (dir / "missing").string()}).code, kExitFailure);
}

TEST(Cli, BenchValidate) {
  auto r = invoke({"bench", "validate", (data_dir() / "corpus/sample_corpus.json").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("total/easy/medium/hard: 5/"), std::string::npos);
}

TEST(Cli, MockGenerateEvaluateReportOffline) {
  testing::TempDir dir;
  auto runs = (dir / "runs").string();
  auto before = net::outbound_request_count();
  auto gen = invoke({"--mock", "generate", "--all", "--stamp", "s1", "--runs", runs});
  ASSERT_EQ(gen.code, kExitOk) << gen.err;
  EXPECT_NE(gen.out.find("5/5 theorems succeeded"), std::string::npos) << gen.out;
  EXPECT_EQ(net::outbound_request_count(), before);
  EXPECT_TRUE(net::network_enabled());

  auto run_dir = dir / "runs/pythagorean-theorem/s1";
  EXPECT_TRUE(std::filesystem::exists(run_dir / "final.srt"));
  auto ev = invoke({"--mock", "evaluate", run_dir.string()});
  ASSERT_EQ(ev.code, kExitOk) << ev.err;
  EXPECT_NE(ev.out.find("Overall"), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(run_dir / "evaluation.json"));
  EXPECT_EQ(net::outbound_request_count(), before);

  for (std::string kind : {"success", "cumulative", "scores", "cost"}) {
    auto rep = invoke({"report", kind, runs});
    EXPECT_EQ(rep.code, kExitOk) << kind << ": " << rep.err;
    EXPECT_FALSE(rep.out.empty());
  }
  auto csv = invoke({"report", "success", runs, "--csv"});
  EXPECT_EQ(csv.out.rfind("Configuration,", 0), 0u) << csv.out;
  auto cum = invoke({"report", "cumulative", runs, "--budgets", "0,1"});
  EXPECT_NE(cum.out.find("N=1"), std::string::npos);
  EXPECT_EQ(cum.out.find("N=2"), std::string::npos);
}

TEST(Cli, RagIngestAndQuery) {
  testing::TempDir dir;
  util::write_file(dir / "docs/core/circle.md", "# Circle\n\nCircle draws a round shape with a radius.\n");
  util::write_file(dir / "docs/phys/pendulum.md", "# Pendulum\n\nPendulum swings a bob on a rod under gravity.\n");
  auto index = (dir / "index").string();
  auto ing = invoke({"--mock", "rag", "ingest", (dir / "docs/core").string(),
                     "manim-physics=" + (dir / "docs/phys").string(), "--index", index});
  ASSERT_EQ(ing.code, kExitOk) << ing.err;
  EXPECT_NE(ing.out.find("2 sources"), std::string::npos) << ing.out;

  auto q = invoke({"--mock", "rag", "query", "Pendulum swings a bob on a rod under gravity.", "--index", index,
                   "--threshold", "0.1", "--k", "1", "--plugins", "manim-physics"});
  ASSERT_EQ(q.code, kExitOk) << q.err;
  EXPECT_NE(q.out.find("manim-physics"), std::string::npos) << q.out;

  auto none = invoke({"--mock", "rag", "query", "pendulum", "--index", index, "--threshold", "1.0"});
  EXPECT_NE(none.out.find("no chunk reached the threshold"), std::string::npos);
  EXPECT_EQ(invoke({"--mock", "rag", "query", "x", "--index", index, "--stage", "bogus"}).code, kExitUsage);
  EXPECT_EQ(invoke({"--mock", "rag", "query", "x", "--index", index, "--threshold", "2"}).code, kExitUsage);
}

}  // namespace
}  // namespace tea::cli
