#include "tea/evaluator.hpp"

#include <cmath>
#include <mutex>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "tea/util.hpp"

namespace tea::evaluator {
namespace {

using nlohmann::json;

double number_field(const json& j, const char* key) {
  if (!j.contains(key)) throw std::invalid_argument(fmt::format("missing key \"{}\"", key));
  const auto& v = j.at(key);
  if (!v.is_number()) throw std::invalid_argument(fmt::format("\"{}\" is not a number", key));
  return v.get<double>();
}

void check_unit(const json& j, const char* key) {
  double v = number_field(j, key);
  if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument(fmt::format("\"{}\" = {} lies outside [0,1]", key, v));
}

void check_rating(const json& j, const char* key) {
  double v = number_field(j, key);
  if (v != std::floor(v) || v < 1.0 || v > 5.0) {
    throw std::invalid_argument(fmt::format("\"{}\" = {} is not an integer from 1 to 5", key, v));
  }
}

gateway::ImageInput jpeg_image(const media::VideoFrame& f) {
  auto bytes = media::encode_jpeg(f);
  return {"image/jpeg", util::base64_encode(bytes)};
}

std::string ts(double s) { return fmt::format("{:.3f}", s); }

}  // namespace

std::string_view to_string(Dimension d) {
  switch (d) {
    case Dimension::kAccuracyDepth: return "accuracy_depth";
    case Dimension::kVisualRelevance: return "visual_relevance";
    case Dimension::kLogicalFlow: return "logical_flow";
    case Dimension::kElementLayout: return "element_layout";
    case Dimension::kVisualConsistency: return "visual_consistency";
  }
  return "?";
}

std::string_view label(Dimension d) {
  switch (d) {
    case Dimension::kAccuracyDepth: return "Accuracy & Depth";
    case Dimension::kVisualRelevance: return "Visual Relevance";
    case Dimension::kLogicalFlow: return "Logical Flow";
    case Dimension::kElementLayout: return "Element Layout";
    case Dimension::kVisualConsistency: return "Visual Consistency";
  }
  return "?";
}

std::optional<Dimension> parse_dimension(std::string_view s) {
  for (auto d : kAllDimensions) {
    if (to_string(d) == s) return d;
  }
  return std::nullopt;
}

double EvaluationReport::value(Dimension d) const {
  for (const auto& s : scores) {
    if (s.dimension == d) return s.value;
  }
  throw std::out_of_range("dimension missing from report");
}

double overall_score(std::span<const double> values) {
  if (values.size() != 5) throw ArityError(fmt::format("expected 5 dimension values, got {}", values.size()));
  double log_sum = 0.0;
  for (double v : values) {
    if (!(v >= 0.0 && v <= 1.0)) throw RangeError(fmt::format("dimension value {} lies outside [0,1]", v));
  }
  for (double v : values) {
    if (v == 0.0) return 0.0;
    log_sum += std::log(v);
  }
  return std::min(1.0, std::exp(log_sum / 5.0));
}

double normalize_rating(double r) {
  if (r != std::floor(r) || r < 1.0 || r > 5.0) throw RangeError(fmt::format("rating {} is not an integer 1..5", r));
  return (r - 1.0) / 4.0;
}

std::vector<media::VideoFrame> extract_keyframes(const std::filesystem::path& video, const KeyframeConfig& cfg) {
  if (cfg.fps <= 0.0 || cfg.cap == 0 || cfg.tau < 0.0) throw std::invalid_argument("bad keyframe settings");
  std::vector<media::VideoFrame> sampled;
  try {
    sampled = media::sample_frames(video, cfg.fps);
  } catch (const media::MediaError& e) {
    throw UnreadableVideo(e.what());
  }
  if (sampled.empty()) throw UnreadableVideo("no frames decoded from " + video.string());
  std::vector<media::VideoFrame> kept;
  for (auto& f : sampled) {
    if (kept.size() >= cfg.cap) break;
    if (kept.empty() || media::frame_difference(kept.back(), f) > cfg.tau) kept.push_back(std::move(f));
  }
  return kept;
}

std::vector<std::pair<double, double>> chunk_bounds(double duration_s, double chunk_s) {
  if (chunk_s <= 0.0) throw std::invalid_argument("chunk length must be positive");
  if (duration_s < 0.0) throw std::invalid_argument("negative duration");
  std::vector<std::pair<double, double>> out;
  for (int i = 0;; ++i) {
    double start = i * chunk_s;
    if (start >= duration_s - 1e-9) break;
    out.emplace_back(start, std::min(duration_s, start + chunk_s));
  }
  return out;
}

json extract_json_object(std::string_view text) {
  for (auto open = text.find('{'); open != std::string_view::npos; open = text.find('{', open + 1)) {
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = open; i < text.size(); ++i) {
      char c = text[i];
      if (in_string) {
        if (c == '\\') ++i;
        else if (c == '"') in_string = false;
        continue;
      }
      if (c == '"') in_string = true;
      else if (c == '{') ++depth;
      else if (c == '}' && --depth == 0) {
        auto parsed = json::parse(text.substr(open, i - open + 1), nullptr, false);
        if (!parsed.is_discarded() && parsed.is_object()) return parsed;
        break;
      }
    }
  }
  throw std::invalid_argument("no JSON object in reply");
}

Evaluator::Evaluator(gateway::ChatClient& client, const PromptLibrary& prompts, EvaluatorConfig config)
    : client_(client), prompts_(prompts), config_(std::move(config)) {}

std::pair<json, std::string> Evaluator::judge(const std::string& model, const RenderedPrompt& prompt,
                                              std::vector<gateway::ImageInput> images,
                                              const std::function<void(const json&)>& check) const {
  gateway::ChatRequest req{model, prompt.system, prompt.user, 0.0, config_.max_output_tokens,
                           gateway::Tag::kJudge, std::move(images)};
  std::string reply = client_.complete(req).text;
  std::string problem;
  try {
    auto j = extract_json_object(reply);
    check(j);
    return {j, reply};
  } catch (const std::exception& e) {
    problem = e.what();
  }
  spdlog::debug("judge reply rejected ({}), asking again", problem);
  req.user += prompts_.render("judge_repair", {{"error", problem}}).user;
  std::string second = client_.complete(req).text;
  try {
    auto j = extract_json_object(second);
    check(j);
    return {j, second};
  } catch (const std::exception& e) {
    throw JudgeParseError(e.what(), second);
  }
}

std::pair<DimensionScore, DimensionScore> Evaluator::score_text_dimensions(std::span<const srt::SrtCue> cues,
                                                                           const TheoremRef& theorem) const {
  DimensionScore acc{Dimension::kAccuracyDepth, 0.0, {"transcript"}, {}};
  DimensionScore flow{Dimension::kLogicalFlow, 0.0, {"transcript"}, {}};
  std::string text = util::trim(srt::transcript(cues));
  if (text.empty()) return {acc, flow};
  auto prompt = prompts_.render("eval_text", {{"topic", theorem.name}, {"transcript", text}});
  auto [j, reply] = judge(config_.judge_model, prompt, {}, [](const json& o) {
    check_unit(o, "accuracy_depth");
    check_unit(o, "logical_flow");
  });
  acc.value = j.at("accuracy_depth").get<double>();
  flow.value = j.at("logical_flow").get<double>();
  acc.judge_replies = {reply};
  flow.judge_replies = {reply};
  return {acc, flow};
}

std::pair<DimensionScore, DimensionScore> Evaluator::score_frame_dimensions(std::span<const media::VideoFrame> frames,
                                                                            const TheoremRef& theorem) const {
  if (frames.empty()) throw std::invalid_argument("no frames to score");
  std::vector<double> relevance(frames.size());
  std::vector<double> layout(frames.size());
  std::vector<std::string> replies(frames.size());
  util::parallel_for(frames.size(), config_.parallelism, [&](std::size_t i) {
    auto prompt = prompts_.render("eval_frame", {{"topic", theorem.name}, {"timestamp", ts(frames[i].timestamp_s)}});
    auto [j, reply] = judge(config_.judge_model, prompt, {jpeg_image(frames[i])}, [](const json& o) {
      check_rating(o, "visual_relevance");
      check_rating(o, "element_layout");
    });
    relevance[i] = normalize_rating(j.at("visual_relevance").get<double>());
    layout[i] = normalize_rating(j.at("element_layout").get<double>());
    replies[i] = std::move(reply);
  });
  DimensionScore rel{Dimension::kVisualRelevance, 0.0, {}, replies};
  DimensionScore lay{Dimension::kElementLayout, 0.0, {}, replies};
  for (std::size_t i = 0; i < frames.size(); ++i) {
    rel.value += relevance[i];
    lay.value += layout[i];
    rel.evidence.push_back("frame@" + ts(frames[i].timestamp_s));
  }
  rel.value /= static_cast<double>(frames.size());
  lay.value /= static_cast<double>(frames.size());
  lay.evidence = rel.evidence;
  return {rel, lay};
}

DimensionScore Evaluator::score_chunk_dimension(const std::filesystem::path& video, const TheoremRef& theorem) const {
  std::vector<media::VideoFrame> sampled;
  double duration = 0.0;
  try {
    duration = media::probe_clip(video).duration_s;
    sampled = media::sample_frames(video, config_.chunk_sample_fps);
  } catch (const media::MediaError& e) {
    throw UnreadableVideo(e.what());
  }
  if (sampled.empty()) throw UnreadableVideo("no frames decoded from " + video.string());
  auto chunks = chunk_bounds(duration, config_.chunk_s);
  std::vector<double> values(chunks.size());
  std::vector<std::string> replies(chunks.size());
  util::parallel_for(chunks.size(), config_.parallelism, [&](std::size_t c) {
    auto [start, end] = chunks[c];
    std::vector<const media::VideoFrame*> in;
    for (const auto& f : sampled) {
      if (f.timestamp_s >= start - 1e-9 && f.timestamp_s < end - 1e-9) in.push_back(&f);
    }
    if (in.empty()) {
      // Short tail chunk between samples: use the last frame before its end.
      const media::VideoFrame* best = &sampled.front();
      for (const auto& f : sampled) {
        if (f.timestamp_s < end) best = &f;
      }
      in.push_back(best);
    }
    std::vector<gateway::ImageInput> images;
    std::size_t take = std::min(in.size(), config_.frames_per_chunk);
    for (std::size_t k = 0; k < take; ++k) {
      std::size_t pick = take == 1 ? 0 : k * (in.size() - 1) / (take - 1);
      images.push_back(jpeg_image(*in[pick]));
    }
    auto prompt = prompts_.render("eval_chunk", {{"topic", theorem.name},
                                                 {"start", ts(start)},
                                                 {"end", ts(end)},
                                                 {"frame_count", std::to_string(images.size())}});
    const auto& model = config_.consistency_judge_model.empty() ? config_.judge_model : config_.consistency_judge_model;
    auto [j, reply] = judge(model, prompt, std::move(images), [](const json& o) { check_rating(o, "visual_consistency"); });
    values[c] = normalize_rating(j.at("visual_consistency").get<double>());
    replies[c] = std::move(reply);
  });
  DimensionScore out{Dimension::kVisualConsistency, 0.0, {}, replies};
  for (std::size_t c = 0; c < chunks.size(); ++c) {
    out.value += values[c];
    out.evidence.push_back(fmt::format("chunk[{},{})", ts(chunks[c].first), ts(chunks[c].second)));
  }
  out.value /= static_cast<double>(chunks.size());
  return out;
}

EvaluationReport Evaluator::evaluate(const std::filesystem::path& video, const std::filesystem::path& srt_file,
                                     const TheoremRef& theorem) const {
  if (!std::filesystem::is_regular_file(video)) throw UnreadableVideo("no such video: " + video.string());
  auto cues = srt::parse_srt(util::read_file(srt_file));
  auto [acc, flow] = score_text_dimensions(cues, theorem);
  auto frames = extract_keyframes(video, config_.keyframes);
  auto [rel, lay] = score_frame_dimensions(frames, theorem);
  auto consistency = score_chunk_dimension(video, theorem);

  EvaluationReport r;
  r.theorem_id = theorem.id;
  r.judge_model = config_.judge_model;
  r.scores = {acc, rel, flow, lay, consistency};
  std::array<double, 5> values{};
  for (std::size_t i = 0; i < 5; ++i) values[i] = r.scores[i].value;
  r.overall = overall_score(values);
  return r;
}

json to_json(const EvaluationReport& r) {
  json scores = json::object();
  for (const auto& s : r.scores) {
    scores[std::string(to_string(s.dimension))] = {{"value", s.value}, {"evidence", s.evidence}};
  }
  return {{"theorem_id", r.theorem_id}, {"judge_model", r.judge_model}, {"video_model", r.video_model},
          {"rag", r.rag},               {"scores", scores},             {"overall", r.overall}};
}

EvaluationReport report_from_json(const json& j) {
  EvaluationReport r;
  r.theorem_id = j.at("theorem_id").get<std::string>();
  r.judge_model = j.value("judge_model", "");
  r.video_model = j.value("video_model", "");
  r.rag = j.value("rag", false);
  const auto& scores = j.at("scores");
  for (std::size_t i = 0; i < kAllDimensions.size(); ++i) {
    auto d = kAllDimensions[i];
    const auto& s = scores.at(std::string(to_string(d)));
    r.scores[i].dimension = d;
    r.scores[i].value = s.at("value").get<double>();
    r.scores[i].evidence = s.value("evidence", std::vector<std::string>{});
  }
  r.overall = j.at("overall").get<double>();
  return r;
}

}  // namespace tea::evaluator
