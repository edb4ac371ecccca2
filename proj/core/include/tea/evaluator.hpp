#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tea/error.hpp"
#include "tea/gateway.hpp"
#include "tea/media.hpp"
#include "tea/prompts.hpp"
#include "tea/srt.hpp"

namespace tea::evaluator {

enum class Dimension { kAccuracyDepth, kVisualRelevance, kLogicalFlow, kElementLayout, kVisualConsistency };

// Result table column order.
inline constexpr std::array<Dimension, 5> kAllDimensions = {
    Dimension::kAccuracyDepth, Dimension::kVisualRelevance, Dimension::kLogicalFlow, Dimension::kElementLayout,
    Dimension::kVisualConsistency};

std::string_view to_string(Dimension d);  // snake_case key
std::string_view label(Dimension d);      // table heading
std::optional<Dimension> parse_dimension(std::string_view s);

struct DimensionScore {
  Dimension dimension = Dimension::kAccuracyDepth;
  double value = 0.0;
  std::vector<std::string> evidence;  // frame, chunk or transcript ids
  std::vector<std::string> judge_replies;
};

struct EvaluationReport {
  std::string theorem_id;
  std::string judge_model;
  std::string video_model;
  bool rag = false;
  std::array<DimensionScore, 5> scores;  // kAllDimensions order
  double overall = 0.0;

  double value(Dimension d) const;
};

class UnreadableVideo : public Error {
 public:
  using Error::Error;
};

class JudgeParseError : public Error {
 public:
  JudgeParseError(const std::string& detail, std::string raw_text)
      : Error("judge reply rejected: " + detail), raw_text_(std::move(raw_text)) {}
  const std::string& raw_text() const { return raw_text_; }

 private:
  std::string raw_text_;
};

class ArityError : public Error {
 public:
  using Error::Error;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

// Geometric mean of exactly five values in [0,1]; 0 when any value is 0.
double overall_score(std::span<const double> values);

// (r - 1) / 4 for an integer rating r in 1..5.
double normalize_rating(double r);

struct KeyframeConfig {
  double fps = 1.0;
  double tau = 0.05;
  std::size_t cap = 50;
};

// Samples at cfg.fps and keeps a frame when its mean absolute grayscale
// difference from the last kept frame exceeds tau. The first frame is
// always kept; at most cap frames are returned.
std::vector<media::VideoFrame> extract_keyframes(const std::filesystem::path& video, const KeyframeConfig& cfg = {});

// [start, end) windows of chunk_s seconds covering duration_s; the last one
// may be shorter.
std::vector<std::pair<double, double>> chunk_bounds(double duration_s, double chunk_s);

// The first JSON object in a judge reply.
nlohmann::json extract_json_object(std::string_view text);

struct EvaluatorConfig {
  std::string judge_model = "openai/gpt-4o";
  std::string consistency_judge_model;  // chunk judge; empty means judge_model
  int max_output_tokens = 512;
  KeyframeConfig keyframes;
  double chunk_s = 30.0;
  double chunk_sample_fps = 1.0;
  std::size_t frames_per_chunk = 8;
  int parallelism = 4;
};

struct TheoremRef {
  std::string id;
  std::string name;
};

class Evaluator {
 public:
  Evaluator(gateway::ChatClient& client, const PromptLibrary& prompts, EvaluatorConfig config);

  // Accuracy & Depth and Logical Flow from one judge call.
  std::pair<DimensionScore, DimensionScore> score_text_dimensions(std::span<const srt::SrtCue> cues,
                                                                  const TheoremRef& theorem) const;
  // Visual Relevance and Element Layout, averaged over frames.
  std::pair<DimensionScore, DimensionScore> score_frame_dimensions(std::span<const media::VideoFrame> frames,
                                                                   const TheoremRef& theorem) const;
  DimensionScore score_chunk_dimension(const std::filesystem::path& video, const TheoremRef& theorem) const;

  EvaluationReport evaluate(const std::filesystem::path& video, const std::filesystem::path& srt_file,
                            const TheoremRef& theorem) const;

 private:
  // One re-prompt on a rejected reply, then JudgeParseError.
  std::pair<nlohmann::json, std::string> judge(const std::string& model, const RenderedPrompt& prompt,
                                               std::vector<gateway::ImageInput> images,
                                               const std::function<void(const nlohmann::json&)>& check) const;

  gateway::ChatClient& client_;
  const PromptLibrary& prompts_;
  EvaluatorConfig config_;
};

nlohmann::json to_json(const EvaluationReport& report);
EvaluationReport report_from_json(const nlohmann::json& j);

}  // namespace tea::evaluator
