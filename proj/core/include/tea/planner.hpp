#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tea/corpus.hpp"
#include "tea/error.hpp"
#include "tea/gateway.hpp"
#include "tea/prompts.hpp"

namespace tea::planner {

struct SceneOutline {
  std::string title;  // 2 to 5 words
  std::string purpose;
  std::string description;
  std::string layout;

  bool operator==(const SceneOutline&) const = default;
};

struct VideoPlan {
  std::string theorem_id;
  std::vector<SceneOutline> scenes;

  bool operator==(const VideoPlan&) const = default;
};

struct SceneSpec {
  SceneOutline outline;
  std::string narration;
  std::vector<std::string> visual_elements;
  std::string animation_notes;
  std::string transitions;

  bool operator==(const SceneSpec&) const = default;
};

class PlanParseError : public Error {
 public:
  explicit PlanParseError(std::string raw_text)
      : Error("could not parse a scene plan from the model response"), raw_text_(std::move(raw_text)) {}
  const std::string& raw_text() const { return raw_text_; }

 private:
  std::string raw_text_;
};

class PlanInvariantError : public Error {
 public:
  explicit PlanInvariantError(std::string which) : Error("invalid plan: " + which), which_(std::move(which)) {}
  const std::string& which() const { return which_; }

 private:
  std::string which_;
};

class SceneParseError : public Error {
 public:
  SceneParseError(std::size_t index, std::string raw_text, const std::string& detail);
  std::size_t index() const { return index_; }
  const std::string& raw_text() const { return raw_text_; }

 private:
  std::size_t index_;
  std::string raw_text_;
};

struct PlannerConfig {
  std::string model_id;
  double temperature = 0.7;
  int max_output_tokens = 8192;
  int max_scenes = 8;
};

// Line-anchored, case-insensitive parse of "Scene Title:" style blocks.
// Throws PlanParseError when no scene is found.
std::vector<SceneOutline> parse_plan_response(std::string_view text);
// Throws PlanInvariantError naming the first violated invariant.
void check_plan(const VideoPlan& plan, int max_scenes);
// Throws SceneParseError when narration or visual elements are missing.
SceneSpec parse_scene_response(std::string_view text, const SceneOutline& outline, std::size_t index);

// Text block handed to the coding agent for one scene.
std::string render_implementation_plan(const SceneSpec& spec, std::size_t index);
std::string render_plan_overview(const VideoPlan& plan);

class Planner {
 public:
  Planner(gateway::ChatClient& client, const PromptLibrary& prompts, PlannerConfig config);

  // One repair re-prompt when the first answer fails to parse or validate.
  VideoPlan plan_video(const corpus::TheoremEntry& theorem, std::string_view context = {}) const;
  SceneSpec refine_scene(const corpus::TheoremEntry& theorem, const VideoPlan& plan, std::size_t index,
                         std::string_view context = {}) const;

 private:
  gateway::ChatClient& client_;
  const PromptLibrary& prompts_;
  PlannerConfig config_;
};

nlohmann::json to_json(const SceneOutline& outline);
nlohmann::json to_json(const VideoPlan& plan);
nlohmann::json to_json(const SceneSpec& spec);
VideoPlan plan_from_json(const nlohmann::json& j);

}  // namespace tea::planner
