#include <algorithm>
#include <cstdio>
#include <random>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "support.hpp"
#include "tea/evaluator.hpp"
#include "tea/srt.hpp"
#include "tea/util.hpp"

namespace tea::evaluator {
namespace {

using nlohmann::json;

TEST(Overall, ReproducesPublishedRows) {
  struct Row {
    std::vector<double> dims;
    const char* overall;
  };
  std::vector<Row> rows = {{{0.79, 0.79, 0.89, 0.59, 0.87}, "0.78"},
                           {{0.75, 0.87, 0.88, 0.57, 0.92}, "0.79"},
                           {{0.76, 0.76, 0.89, 0.61, 0.88}, "0.77"}};
  for (const auto& r : rows) {
    double v = overall_score(r.dims);
    EXPECT_NEAR(v, oracle::geometric_mean5(r.dims), 1e-12);
    char buf[16];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    EXPECT_STREQ(buf, r.overall);
  }
}

TEST(Overall, Properties) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> v(5);
    for (auto& x : v) x = u(rng);
    double base = overall_score(v);
    EXPECT_LE(base, *std::max_element(v.begin(), v.end()) + 1e-15);
    auto shuffled = v;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    EXPECT_NEAR(overall_score(shuffled), base, 1e-12);
    auto bumped = v;
    std::size_t i = rng() % 5;
    bumped[i] = std::min(1.0, bumped[i] + 0.1);
    EXPECT_GE(overall_score(bumped), base - 1e-15);
    auto zeroed = v;
    zeroed[i] = 0.0;
    EXPECT_EQ(overall_score(zeroed), 0.0);
    EXPECT_GT(base, 0.0);
  }
  // Not bounded by the minimum.
  std::vector<double> spread = {0.2, 1, 1, 1, 1};
  EXPECT_GT(overall_score(spread), 0.2);
}

TEST(Overall, Errors) {
  std::vector<double> four = {1, 1, 1, 1};
  std::vector<double> out = {1, 1, 1, 1, 1.2};
  EXPECT_THROW(overall_score(four), ArityError);
  EXPECT_THROW(overall_score(out), RangeError);
}

TEST(Rating, AffineEndpoints) {
  EXPECT_EQ(normalize_rating(1), 0.0);
  EXPECT_EQ(normalize_rating(5), 1.0);
  EXPECT_EQ(normalize_rating(3), 0.5);
  EXPECT_THROW(normalize_rating(0), RangeError);
  EXPECT_THROW(normalize_rating(2.5), RangeError);
}

TEST(Chunks, SeventySeconds) {
  auto c = chunk_bounds(70, 30);
  ASSERT_EQ(c.size(), 3u);
  EXPECT_EQ(c[2], (std::pair<double, double>{60, 70}));
  EXPECT_EQ(chunk_bounds(60, 30).size(), 2u);
  EXPECT_THROW(chunk_bounds(10, 0), std::invalid_argument);
}

TEST(JsonObject, FirstObjectInReply) {
  EXPECT_EQ(extract_json_object("Sure! {\"a\": {\"b\": \"}\"}} trailing {\"c\":1}"), json::parse(R"({"a":{"b":"}"}})"));
  EXPECT_THROW(extract_json_object("no json"), std::invalid_argument);
}

TEST(Keyframes, StaticClipYieldsOne) {
  testing::TempDir dir;
  media::write_solid_clip(dir / "static.mp4", 10.0, 40, 80, 120, 15.0, 160, 90);
  EXPECT_EQ(extract_keyframes(dir / "static.mp4").size(), 1u);
}

TEST(Keyframes, AlternatingClipYieldsTen) {
  testing::TempDir dir;
  media::write_clip(dir / "alt.mp4", 15.0, 160, 90, 150, [](int i, media::VideoFrame& f) {
    std::fill(f.bgr.begin(), f.bgr.end(), (i / 15) % 2 == 0 ? 0 : 255);
  });
  auto frames = extract_keyframes(dir / "alt.mp4");
  ASSERT_EQ(frames.size(), 10u);
  for (std::size_t j = 0; j < frames.size(); ++j) EXPECT_DOUBLE_EQ(frames[j].timestamp_s, static_cast<double>(j));
}

TEST(Keyframes, CapAndMissingFile) {
  testing::TempDir dir;
  media::write_clip(dir / "alt.mp4", 10.0, 32, 32, 100, [](int i, media::VideoFrame& f) {
    std::fill(f.bgr.begin(), f.bgr.end(), (i / 10) % 2 == 0 ? 0 : 255);
  });
  EXPECT_EQ(extract_keyframes(dir / "alt.mp4", {1.0, 0.05, 4}).size(), 4u);
  EXPECT_THROW(extract_keyframes(dir / "nope.mp4"), UnreadableVideo);
}

// Judge double: replies by prompt kind, optionally garbling the first reply.
struct Judge {
  int garble = 0;
  testing::ScriptedClient client{[this](const gateway::ChatRequest& r) -> std::string {
    if (garble > 0) {
      --garble;
      return "I think it is good.";
    }
    if (r.user.find("visual_consistency") != std::string::npos) return R"({"visual_consistency": 4})";
    if (r.user.find("element_layout") != std::string::npos) return R"({"visual_relevance": 5, "element_layout": 3})";
    return R"({"accuracy_depth": 0.8, "logical_flow": 0.6})";
  }};
};

EvaluatorConfig config() {
  EvaluatorConfig c;
  c.judge_model = "openai/gpt-4o";
  c.consistency_judge_model = "gemini/gemini-2.0-flash";
  c.parallelism = 2;
  return c;
}

TEST(Evaluator, EmptyTranscriptScoresZeroWithoutACall) {
  Judge j;
  Evaluator ev(j.client, testing::shipped_prompts(), config());
  auto [acc, flow] = ev.score_text_dimensions({}, {"t", "T"});
  EXPECT_EQ(acc.value, 0.0);
  EXPECT_EQ(flow.value, 0.0);
  EXPECT_TRUE(j.client.requests().empty());
}

TEST(Evaluator, RepromptsOnceThenRejects) {
  std::vector<srt::SrtCue> cues = {{1, 0, 1000, "A right triangle."}};
  Judge once;
  once.garble = 1;
  Evaluator ev(once.client, testing::shipped_prompts(), config());
  auto [acc, flow] = ev.score_text_dimensions(cues, {"t", "T"});
  EXPECT_DOUBLE_EQ(acc.value, 0.8);
  EXPECT_EQ(once.client.requests().size(), 2u);
  Judge twice;
  twice.garble = 2;
  Evaluator bad(twice.client, testing::shipped_prompts(), config());
  EXPECT_THROW(bad.score_text_dimensions(cues, {"t", "T"}), JudgeParseError);
}

TEST(Evaluator, RejectsOutOfRangeRatings) {
  testing::ScriptedClient client([](const gateway::ChatRequest&) { return R"({"visual_relevance": 7, "element_layout": 3})"; });
  Evaluator ev(client, testing::shipped_prompts(), config());
  media::VideoFrame f{0, 8, 8, std::vector<std::uint8_t>(8 * 8 * 3, 100)};
  std::vector<media::VideoFrame> frames = {f};
  EXPECT_THROW(ev.score_frame_dimensions(frames, {"t", "T"}), JudgeParseError);
}

TEST(Evaluator, FullReport) {
  testing::TempDir dir;
  media::write_clip(dir / "final.mp4", 15.0, 160, 90, 15 * 40, [](int i, media::VideoFrame& f) {
    std::fill(f.bgr.begin(), f.bgr.end(), (i / 150) % 2 == 0 ? 30 : 220);
  });
  std::vector<srt::SrtCue> cues = {{1, 0, 20000, "First."}, {2, 20000, 40000, "Second."}};
  util::write_file(dir / "final.srt", srt::emit_srt(cues));
  Judge j;
  Evaluator ev(j.client, testing::shipped_prompts(), config());
  auto report = ev.evaluate(dir / "final.mp4", dir / "final.srt", {"pythagorean-theorem", "Pythagorean Theorem"});
  EXPECT_DOUBLE_EQ(report.value(Dimension::kAccuracyDepth), 0.8);
  EXPECT_DOUBLE_EQ(report.value(Dimension::kLogicalFlow), 0.6);
  EXPECT_DOUBLE_EQ(report.value(Dimension::kVisualRelevance), 1.0);
  EXPECT_DOUBLE_EQ(report.value(Dimension::kElementLayout), 0.5);
  EXPECT_DOUBLE_EQ(report.value(Dimension::kVisualConsistency), 0.75);
  std::vector<double> v = {0.8, 1.0, 0.6, 0.5, 0.75};
  EXPECT_NEAR(report.overall, oracle::geometric_mean5(v), 1e-12);
  auto reqs = j.client.requests();
  for (const auto& r : reqs) {
    EXPECT_EQ(r.temperature, 0.0);
    EXPECT_EQ(r.tag, gateway::Tag::kJudge);
  }
  auto chunk_calls = std::count_if(reqs.begin(), reqs.end(),
                                   [](const auto& r) { return r.model_id == "gemini/gemini-2.0-flash"; });
  EXPECT_EQ(chunk_calls, 2);
  EXPECT_EQ(report.scores[4].evidence.size(), 2u);
  EXPECT_EQ(report.scores[1].evidence.size(), 4u);
  auto back = report_from_json(to_json(report));
  EXPECT_EQ(back.overall, report.overall);
  EXPECT_EQ(back.value(Dimension::kElementLayout), 0.5);
}

TEST(Evaluator, UnreadableVideo) {
  testing::TempDir dir;
  util::write_file(dir / "final.srt", "");
  Judge j;
  Evaluator ev(j.client, testing::shipped_prompts(), config());
  EXPECT_THROW(ev.evaluate(dir / "final.mp4", dir / "final.srt", {"t", "T"}), UnreadableVideo);
}

}  // namespace
}  // namespace tea::evaluator
