#include <cstdio>
#include <random>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "fake_transport.hpp"
#include "oracles.hpp"
#include "support.hpp"
#include "tea/retrieval.hpp"
#include "tea/util.hpp"

namespace tea::retrieval {
namespace {

using nlohmann::json;

std::vector<std::string> fixture_words(std::size_t n) {
  std::vector<std::string> words;
  for (std::size_t i = 0; i < n; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "word%05zu", i);
    words.emplace_back(buf);
  }
  return words;
}

std::string join(const std::vector<std::string>& words, std::size_t from, std::size_t to) {
  std::string out;
  for (std::size_t i = from; i < to; ++i) {
    if (i > from) out += ' ';
    out += words[i];
  }
  return out;
}

TEST(Splitter, TwentyFiveHundredCharacterProse) {
  auto words = fixture_words(250);
  std::string text = join(words, 0, 250);
  ASSERT_EQ(text.size(), 2499u);
  RecursiveTextSplitter splitter(DocLanguage::kPlain, {1000, 100});
  auto chunks = splitter.split(text);
  ASSERT_EQ(chunks.size(), 3u);
  EXPECT_EQ(chunks[0], join(words, 0, 100));
  EXPECT_EQ(chunks[1], join(words, 90, 190));
  EXPECT_EQ(chunks[2], join(words, 180, 250));
  for (const auto& c : chunks) EXPECT_LE(c.size(), 1000u);
}

TEST(Splitter, PrefersParagraphBreaks) {
  std::string a(600, 'a');
  std::string b(600, 'b');
  RecursiveTextSplitter splitter(DocLanguage::kMarkdown, {1000, 100});
  auto chunks = splitter.split(a + "\n\n" + b);
  EXPECT_EQ(chunks, (std::vector<std::string>{a, b}));
}

TEST(Splitter, PythonSplitsAtDefinitions) {
  std::string f1 = "def first():\n" + std::string(500, '#') + "\n";
  std::string f2 = "def second():\n" + std::string(500, '#') + "\n";
  RecursiveTextSplitter splitter(DocLanguage::kPython, {700, 0});
  auto chunks = splitter.split(f1 + "\n" + f2);
  ASSERT_EQ(chunks.size(), 2u);
  EXPECT_TRUE(chunks[0].starts_with("def first"));
  EXPECT_TRUE(chunks[1].starts_with("def second"));
}

TEST(Splitter, RejectsOverlapNotBelowSize) {
  EXPECT_THROW(RecursiveTextSplitter(DocLanguage::kPlain, {100, 100}), std::invalid_argument);
}

TEST(Embedding, HashingIsDeterministicAndUnit) {
  HashingEmbedder e(64);
  std::vector<std::string> texts = {"Pythagorean theorem proof", "Pythagorean theorem proof", ""};
  auto v = e.embed(texts);
  EXPECT_EQ(v[0], v[1]);
  for (const auto& row : v) {
    double n = 0;
    for (float x : row) n += double(x) * x;
    EXPECT_NEAR(n, 1.0, 1e-6);
  }
}

TEST(Embedding, HttpPortSendsModelAndChecksDimension) {
  auto transport = std::make_shared<testing::FakeTransport>([](const testing::FakeTransport::Call& c) {
    auto req = json::parse(c.body);
    json data = json::array();
    for (std::size_t i = 0; i < req.at("input").size(); ++i) data.push_back({{"index", i}, {"embedding", {3.0, 4.0}}});
    return net::HttpResponse{200, json{{"data", data}}.dump(), "application/json"};
  });
  HttpEmbedder e({"http://embed.local/v1", "", "m", 2, 5}, transport);
  std::vector<std::string> texts = {"a", "b"};
  auto v = e.embed(texts);
  ASSERT_EQ(v.size(), 2u);
  EXPECT_NEAR(v[0][0], 0.6f, 1e-6);
  EXPECT_EQ(transport->calls().at(0).url, "http://embed.local/v1/embeddings");
  HttpEmbedder wrong({"http://embed.local/v1", "", "m", 3, 5}, transport);
  EXPECT_THROW(wrong.embed(texts), EmbeddingPortUnavailable);
}

TEST(Embedding, HttpPortFailureIsUnavailable) {
  auto transport = std::make_shared<testing::FakeTransport>(
      [](const auto&) { return net::HttpResponse{503, "down", "text/plain"}; });
  HttpEmbedder e({"http://embed.local/v1", "", "m", 2, 5}, transport);
  std::vector<std::string> texts = {"a"};
  EXPECT_THROW(e.embed(texts), EmbeddingPortUnavailable);
}

TEST(Ingest, CountsSourcesAndKinds) {
  testing::TempDir dir;
  util::write_file(dir / "docs/guide.md", "# Guide\n\nCreate a Square and animate it with Create.\n");
  util::write_file(dir / "docs/example.py", "from manim import *\n\nclass Demo(Scene):\n    pass\n");
  util::write_file(dir / "docs/image.png", "not text");
  HashingEmbedder e(32);
  VectorIndex index(32, e.name());
  std::vector<IngestRoot> roots = {{dir / "docs", ""}};
  auto stats = ingest_docs(roots, e, index);
  EXPECT_EQ(stats.sources, 2u);
  EXPECT_EQ(stats.prose_chunks, 1u);
  EXPECT_EQ(stats.code_chunks, 1u);
  EXPECT_EQ(index.size(), 2u);
}

TEST(Ingest, EmptyRootThrows) {
  testing::TempDir dir;
  std::filesystem::create_directories(dir / "empty");
  HashingEmbedder e(32);
  VectorIndex index(32, e.name());
  std::vector<IngestRoot> roots = {{dir / "empty", ""}};
  EXPECT_THROW(ingest_docs(roots, e, index), EmptyCorpus);
}

VectorIndex make_index(HashingEmbedder& e, const std::vector<std::pair<std::string, std::string>>& texts) {
  VectorIndex index(e.dimension(), e.name());
  for (const auto& [text, plugin] : texts) {
    std::vector<std::string> one = {text};
    index.add({0, "doc.md", ChunkKind::kProse, plugin, text}, e.embed(one)[0]);
  }
  return index;
}

TEST(Index, SaveLoadRoundTrip) {
  testing::TempDir dir;
  HashingEmbedder e(16);
  auto index = make_index(e, {{"alpha beta", ""}, {"gamma", "manim-physics"}});
  index.save(dir / "idx");
  auto back = VectorIndex::load(dir / "idx");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back.chunk(1).plugin, "manim-physics");
  EXPECT_EQ(back.embedder_name(), e.name());
  for (std::uint32_t i = 0; i < 2; ++i) {
    auto a = index.embedding(i);
    auto b = back.embedding(i);
    EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin(), b.end()));
  }
  auto meta = json::parse(util::read_file(dir / "idx/meta.json"));
  EXPECT_EQ(meta.at("dimension"), 16);
  EXPECT_EQ(meta.at("count"), 2);
  EXPECT_EQ(std::filesystem::file_size(dir / "idx/vectors.bin"), 2u * 16u * 4u);
  util::write_file(dir / "idx/vectors.bin", "short");
  EXPECT_THROW(VectorIndex::load(dir / "idx"), IndexFormatError);
}

TEST(Retrieve, SelfSimilarityFirst) {
  HashingEmbedder e(128);
  auto index = make_index(e, {{"draw a circle", ""}, {"rotate the square around its center", ""}, {"plot axes", ""}});
  Retriever r(index, e);
  auto hits = r.retrieve("rotate the square around its center", {3, 0.0, {}});
  ASSERT_FALSE(hits.empty());
  EXPECT_EQ(hits[0].id, 1u);
  EXPECT_NEAR(hits[0].score, 1.0, 1e-6);
}

TEST(Retrieve, ThresholdCanEmptyTheResult) {
  HashingEmbedder e(128);
  auto index = make_index(e, {{"draw a circle", ""}});
  Retriever r(index, e);
  EXPECT_TRUE(r.retrieve("unrelated words entirely", {2, 0.99, {}}).empty());
}

TEST(Retrieve, EmptyIndexThrows) {
  HashingEmbedder e(8);
  VectorIndex index(8, e.name());
  Retriever r(index, e);
  EXPECT_THROW(r.retrieve("q", {}), IndexEmpty);
}

TEST(Retrieve, PluginAllowlist) {
  HashingEmbedder e(64);
  auto index = make_index(e, {{"molecule bond", "manim-chemistry"}, {"molecule bond", ""}, {"molecule bond", "manim-ml"}});
  Retriever r(index, e);
  auto hits = r.retrieve("molecule bond", {5, 0.0, {"manim-chemistry"}});
  ASSERT_EQ(hits.size(), 2u);
  EXPECT_EQ(hits[0].id, 0u);
  EXPECT_EQ(hits[1].id, 1u);
}

TEST(Retrieve, CacheSkipsTheEmbedder) {
  HashingEmbedder e(64);
  auto index = make_index(e, {{"a b c", ""}, {"c d e", ""}});
  Retriever r(index, e);
  auto before = e.calls();
  auto first = r.retrieve("b c d", {2, 0.0, {}});
  auto after_first = e.calls();
  auto second = r.retrieve("b c d", {2, 0.0, {}});
  EXPECT_EQ(first, second);
  EXPECT_EQ(after_first, before + 1);
  EXPECT_EQ(e.calls(), after_first);
  EXPECT_EQ(r.cache().hits(), 1u);
  r.retrieve("b c d", {1, 0.0, {}});
  EXPECT_EQ(e.calls(), after_first + 1);
}

TEST(Retrieve, InvalidConfig) {
  EXPECT_THROW((RetrievalConfig{0, 0.5, {}}.validate()), std::invalid_argument);
  EXPECT_THROW((RetrievalConfig{1, 1.5, {}}.validate()), std::invalid_argument);
}

TEST(Retrieve, MatchesBruteForceProperty) {
  std::mt19937 rng(1234);
  const char* vocab[] = {"square", "circle", "axes", "graph", "vector", "matrix", "rotate", "shift", "color",
                         "text", "tex", "arrow", "line", "dot", "label", "camera", "zoom", "fade", "write", "plot"};
  const char* plugins[] = {"", "", "manim-physics", "manim-chemistry"};
  HashingEmbedder e(48);
  for (int trial = 0; trial < 30; ++trial) {
    VectorIndex index(e.dimension(), e.name());
    std::size_t n = 1 + rng() % 300;
    for (std::size_t i = 0; i < n; ++i) {
      std::string text;
      for (std::size_t w = 0, m = 1 + rng() % 6; w < m; ++w) text += std::string(vocab[rng() % 20]) + " ";
      std::vector<std::string> one = {text};
      index.add({0, "d.md", ChunkKind::kProse, plugins[rng() % 4], text}, e.embed(one)[0]);
    }
    Retriever r(index, e);
    for (int q = 0; q < 5; ++q) {
      std::string query = std::string(vocab[rng() % 20]) + " " + vocab[rng() % 20];
      RetrievalConfig cfg{1 + rng() % 8, (rng() % 100) / 100.0, {}};
      if (rng() % 2) cfg.plugin_allowlist = {"manim-physics"};
      std::vector<std::string> qv = {query};
      auto qe = e.embed(qv)[0];
      std::vector<std::pair<std::uint32_t, double>> all;
      for (std::uint32_t id = 0; id < index.size(); ++id) {
        const auto& c = index.chunk(id);
        bool allowed = c.plugin.empty() || (!cfg.plugin_allowlist.empty() && c.plugin == cfg.plugin_allowlist[0]);
        if (!allowed) continue;
        auto row = index.embedding(id);
        double dot = 0;
        for (std::size_t d = 0; d < row.size(); ++d) dot += double(row[d]) * qe[d];
        dot = std::clamp(dot, -1.0, 1.0);
        all.emplace_back(id, (1.0 + dot) / 2.0);
      }
      auto expected = oracle::top_k(all, cfg.k, cfg.threshold);
      auto got = r.retrieve(query, cfg);
      ASSERT_EQ(got.size(), expected.size());
      for (std::size_t i = 0; i < got.size(); ++i) {
        EXPECT_EQ(got[i].id, expected[i].first);
        EXPECT_EQ(got[i].score, expected[i].second);
      }
    }
  }
}

TEST(Retrieve, ContextBlockListsExcerpts) {
  HashingEmbedder e(16);
  auto index = make_index(e, {{"Square docs", ""}});
  std::vector<ScoredChunk> hits = {{0, 0.75}};
  auto block = format_context(index, hits);
  EXPECT_NE(block.find("Square docs"), std::string::npos);
  EXPECT_NE(block.find("0.750"), std::string::npos);
  EXPECT_EQ(format_context(index, {}), "");
}

// ---------------------------------------------------------------------------

const std::vector<std::string> kCatalog = {"manim-physics", "manim-chemistry", "manim-dsa", "manim-circuit",
                                           "manim-ml"};

TEST(RagAgent, ChemistryTheoremPicksChemistryPlugin) {
  testing::QueueClient client({R"({"plugins": ["manim-chemistry"]})"});
  RagAgent agent(client, testing::shipped_prompts(), {"openai/gpt-4o", 0.7, 512, 5, kCatalog});
  corpus::TheoremEntry t{"octet-rule", "Octet Rule", "Atoms bond to fill eight valence electrons.",
                         corpus::Difficulty::kEasy, corpus::Subject::kChemistry, "Bonding"};
  EXPECT_EQ(agent.classify_plugins(t), (std::vector<std::string>{"manim-chemistry"}));
  EXPECT_EQ(client.requests().at(0).tag, gateway::Tag::kQuery);
}

TEST(RagAgent, UncataloguedPluginDropped) {
  EXPECT_TRUE(parse_plugin_answer(R"({"plugins": ["manim-voodoo"]})", kCatalog).empty());
  EXPECT_EQ(parse_plugin_answer("Use manim-dsa for the array.", kCatalog), (std::vector<std::string>{"manim-dsa"}));
  EXPECT_EQ(parse_plugin_answer(R"({"plugins": ["MANIM-DSA", "manim-dsa"]})", kCatalog),
            (std::vector<std::string>{"manim-dsa"}));
}

TEST(RagAgent, NumberedQueries) {
  testing::QueueClient client({"1. How to draw a right triangle\n2. Square on each side\n3. Animate area transfer\n"});
  RagAgent agent(client, testing::shipped_prompts(), {"openai/gpt-4o", 0.7, 512, 5, kCatalog});
  auto qs = agent.generate_queries(QueryStage::kStoryboard, "");
  EXPECT_EQ(qs.size(), 3u);
  EXPECT_EQ(qs[0], "How to draw a right triangle");
}

TEST(RagAgent, ErrorFixQueriesKeepSymbol) {
  auto qs = parse_query_list("- Usage of `MathTex` class\n- Replacement for ShowCreation\n", 5);
  ASSERT_EQ(qs.size(), 2u);
  EXPECT_NE(qs[1].find("ShowCreation"), std::string::npos);
}

TEST(RagAgent, QueryListLimitsAndErrors) {
  EXPECT_EQ(parse_query_list(R"(["a","b","c","d","e","f"])", 5).size(), 5u);
  EXPECT_THROW(parse_query_list("I cannot help with that", 5), QueryParseError);
}

TEST(RagAgent, PluginProbeFormats) {
  testing::TempDir dir;
  EXPECT_EQ(effective_catalog(kCatalog, dir / "absent.json"), kCatalog);
  util::write_file(dir / "a.json", R"(["manim-dsa", "manim-other"])");
  EXPECT_EQ(effective_catalog(kCatalog, dir / "a.json"), (std::vector<std::string>{"manim-dsa"}));
  util::write_file(dir / "b.json", R"({"installed": ["manim-ml", "manim-physics"]})");
  EXPECT_EQ(effective_catalog(kCatalog, dir / "b.json"), (std::vector<std::string>{"manim-physics", "manim-ml"}));
  util::write_file(dir / "c.json", R"({"manim-circuit": true, "manim-ml": false})");
  EXPECT_EQ(effective_catalog(kCatalog, dir / "c.json"), (std::vector<std::string>{"manim-circuit"}));
}

}  // namespace
}  // namespace tea::retrieval
