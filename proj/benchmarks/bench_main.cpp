#include <random>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "tea/codegen.hpp"
#include "tea/evaluator.hpp"
#include "tea/retrieval.hpp"
#include "tea/srt.hpp"
#include "tea/stats.hpp"

namespace {

using namespace tea;

const char* kWords[] = {"square", "circle", "axes", "graph", "vector", "matrix", "rotate", "shift",
                        "color",  "text",   "tex",  "arrow", "line",   "dot",    "label",  "camera"};

std::string random_text(std::mt19937& rng, std::size_t words) {
  std::string out;
  for (std::size_t i = 0; i < words; ++i) out += std::string(kWords[rng() % 16]) + (i % 12 == 11 ? ".\n" : " ");
  return out;
}

void BM_Retrieve(benchmark::State& state) {
  std::mt19937 rng(1);
  retrieval::HashingEmbedder e(256);
  retrieval::VectorIndex index(e.dimension(), e.name());
  std::vector<std::string> texts;
  for (int i = 0; i < state.range(0); ++i) texts.push_back(random_text(rng, 60));
  auto vecs = e.embed(texts);
  for (std::size_t i = 0; i < texts.size(); ++i) {
    index.add({0, "doc.md", retrieval::ChunkKind::kProse, i % 3 == 0 ? "manim-physics" : "", texts[i]}, vecs[i]);
  }
  retrieval::Retriever r(index, e);
  retrieval::RetrievalConfig cfg{5, 0.5, {"manim-physics"}};
  std::size_t q = 0;
  for (auto _ : state) {
    // distinct queries defeat the query-embedding cache
    benchmark::DoNotOptimize(r.retrieve("rotate the vector " + std::to_string(q++), cfg));
  }
}
BENCHMARK(BM_Retrieve)->Arg(1000)->Arg(10000);

void BM_Split(benchmark::State& state) {
  std::mt19937 rng(2);
  std::string doc;
  for (int p = 0; p < 200; ++p) doc += "## Section\n\n" + random_text(rng, 80) + "\n\n";
  retrieval::RecursiveTextSplitter splitter(retrieval::DocLanguage::kMarkdown);
  for (auto _ : state) benchmark::DoNotOptimize(splitter.split(doc));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * doc.size()));
}
BENCHMARK(BM_Split);

void BM_Spearman(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> xs(state.range(0)), ys(state.range(0));
  for (auto& x : xs) x = u(rng);
  for (auto& y : ys) y = u(rng);
  for (auto _ : state) benchmark::DoNotOptimize(stats::spearman(xs, ys));
}
BENCHMARK(BM_Spearman)->Arg(100)->Arg(10000);

void BM_Alpha(benchmark::State& state) {
  std::mt19937_64 rng(4);
  std::vector<std::vector<double>> m(3, std::vector<double>(state.range(0)));
  for (auto& row : m) {
    for (auto& v : row) v = static_cast<double>(1 + rng() % 5);
  }
  for (auto _ : state) benchmark::DoNotOptimize(stats::krippendorff_alpha(m));
}
BENCHMARK(BM_Alpha)->Arg(50)->Arg(1000);

void BM_SrtRoundTrip(benchmark::State& state) {
  std::mt19937 rng(5);
  std::vector<srt::SceneNarration> scenes;
  double start = 0.0;
  for (int s = 0; s < 8; ++s) {
    scenes.push_back({start, 40.0, random_text(rng, 120), {}});
    start += 40.0;
  }
  for (auto _ : state) {
    auto cues = srt::build_cues(scenes);
    benchmark::DoNotOptimize(srt::parse_srt(srt::emit_srt(cues)));
  }
}
BENCHMARK(BM_SrtRoundTrip);

void BM_Classify(benchmark::State& state) {
  std::string tb = "Traceback (most recent call last):\n  File \"scene.py\", line 12, in construct\n";
  for (int i = 0; i < 40; ++i) tb += "    self.play(Create(obj))\n";
  tb += "ValueError: latex error converting to dvi. See log output above or the log file: media/Tex/abc.log\n";
  for (auto _ : state) benchmark::DoNotOptimize(codegen::classify_error(tb));
}
BENCHMARK(BM_Classify);

void BM_OverallScore(benchmark::State& state) {
  std::vector<double> v = {0.79, 0.79, 0.89, 0.59, 0.87};
  for (auto _ : state) benchmark::DoNotOptimize(evaluator::overall_score(v));
}
BENCHMARK(BM_OverallScore);

}  // namespace

BENCHMARK_MAIN();
