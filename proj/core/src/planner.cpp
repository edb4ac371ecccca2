#include "tea/planner.hpp"

#include <regex>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "tea/util.hpp"

namespace tea::planner {
namespace {

using nlohmann::json;

// Label lines tolerate list markers, quote markers and markdown bold.
const std::regex& plan_label() {
  static const std::regex re(R"(^[\s>*\-]*\**\s*scene\s+(title|purpose|description|layout)\s*\**\s*:\s*\**\s*(.*)$)",
                             std::regex::icase);
  return re;
}

const std::regex& scene_label() {
  static const std::regex re(
      R"(^[\s>*\-]*\**\s*(narration|visual elements|animation notes|transitions)\s*\**\s*:\s*\**\s*(.*)$)",
      std::regex::icase);
  return re;
}

bool is_decoration(const std::string& line) {
  std::string t = util::trim(line);
  if (t.rfind("```", 0) == 0) return true;
  static const std::regex tag(R"(^</?[A-Za-z_]+[0-9]*>$)");
  return std::regex_match(t, tag);
}

void append_text(std::string& field, std::string_view text) {
  std::string t = util::trim(text);
  if (t.empty()) return;
  if (!field.empty()) field += ' ';
  field += t;
}

std::string strip_bold(std::string s) {
  s = util::trim(s);
  while (s.size() >= 2 && s.rfind("**", 0) == 0) s = util::trim(s.substr(2));
  while (s.size() >= 2 && s.compare(s.size() - 2, 2, "**") == 0) s = util::trim(s.substr(0, s.size() - 2));
  return s;
}

std::optional<std::string> list_item(const std::string& line) {
  static const std::regex item(R"(^\s*(?:[-*•]|\d+[.)])\s+(.*)$)");
  std::smatch m;
  if (std::regex_match(line, m, item)) return util::trim(m[1].str());
  return std::nullopt;
}

}  // namespace

SceneParseError::SceneParseError(std::size_t index, std::string raw_text, const std::string& detail)
    : Error(fmt::format("could not parse refinement of scene {}: {}", index, detail)),
      index_(index),
      raw_text_(std::move(raw_text)) {}

std::vector<SceneOutline> parse_plan_response(std::string_view text) {
  std::vector<SceneOutline> scenes;
  std::string* field = nullptr;
  for (const auto& line : util::split_lines(text)) {
    if (is_decoration(line)) continue;
    std::smatch m;
    if (std::regex_match(line, m, plan_label())) {
      std::string label = util::to_lower(m[1].str());
      if (label == "title") {
        scenes.emplace_back();
        field = &scenes.back().title;
      } else if (scenes.empty()) {
        // A field before any title starts an implicit first scene.
        scenes.emplace_back();
      }
      auto& scene = scenes.back();
      if (label == "purpose") field = &scene.purpose;
      if (label == "description") field = &scene.description;
      if (label == "layout") field = &scene.layout;
      append_text(*field, strip_bold(m[2].str()));
      continue;
    }
    if (field != nullptr) append_text(*field, line);
  }
  if (scenes.empty()) throw PlanParseError(std::string(text));
  return scenes;
}

void check_plan(const VideoPlan& plan, int max_scenes) {
  if (plan.scenes.empty()) throw PlanInvariantError("plan has no scenes");
  if (static_cast<int>(plan.scenes.size()) > max_scenes) {
    throw PlanInvariantError(fmt::format("plan has {} scenes, maximum is {}", plan.scenes.size(), max_scenes));
  }
  for (std::size_t i = 0; i < plan.scenes.size(); ++i) {
    const auto& s = plan.scenes[i];
    const std::pair<const char*, const std::string*> fields[] = {
        {"title", &s.title}, {"purpose", &s.purpose}, {"description", &s.description}, {"layout", &s.layout}};
    for (const auto& [name, value] : fields) {
      if (util::trim(*value).empty()) throw PlanInvariantError(fmt::format("scene {} has an empty {}", i + 1, name));
    }
    auto words = util::split_words(s.title).size();
    if (words < 2 || words > 5) {
      throw PlanInvariantError(fmt::format("scene {} title has {} words, expected 2-5", i + 1, words));
    }
  }
}

SceneSpec parse_scene_response(std::string_view text, const SceneOutline& outline, std::size_t index) {
  SceneSpec spec;
  spec.outline = outline;
  enum class Field { kNone, kNarration, kVisuals, kAnimation, kTransitions } field = Field::kNone;
  bool saw_visuals = false;
  for (const auto& line : util::split_lines(text)) {
    if (is_decoration(line)) continue;
    std::smatch m;
    if (std::regex_match(line, m, scene_label())) {
      std::string label = util::to_lower(m[1].str());
      std::string rest = strip_bold(m[2].str());
      if (label == "narration") {
        field = Field::kNarration;
        append_text(spec.narration, rest);
      } else if (label == "visual elements") {
        field = Field::kVisuals;
        saw_visuals = true;
        if (!rest.empty()) spec.visual_elements.push_back(rest);
      } else if (label == "animation notes") {
        field = Field::kAnimation;
        append_text(spec.animation_notes, rest);
      } else {
        field = Field::kTransitions;
        append_text(spec.transitions, rest);
      }
      continue;
    }
    switch (field) {
      case Field::kNarration: append_text(spec.narration, line); break;
      case Field::kVisuals:
        if (auto item = list_item(line)) {
          if (!item->empty()) spec.visual_elements.push_back(*item);
        } else if (!util::trim(line).empty()) {
          if (spec.visual_elements.empty()) spec.visual_elements.emplace_back();
          append_text(spec.visual_elements.back(), line);
        }
        break;
      case Field::kAnimation: append_text(spec.animation_notes, line); break;
      case Field::kTransitions: append_text(spec.transitions, line); break;
      case Field::kNone: break;
    }
  }
  if (!saw_visuals || spec.visual_elements.empty()) {
    throw SceneParseError(index, std::string(text), "no visual elements section");
  }
  if (spec.narration.empty()) throw SceneParseError(index, std::string(text), "no narration");
  return spec;
}

std::string render_plan_overview(const VideoPlan& plan) {
  std::string out;
  for (std::size_t i = 0; i < plan.scenes.size(); ++i) {
    out += fmt::format("{}. {}: {}\n", i + 1, plan.scenes[i].title, plan.scenes[i].purpose);
  }
  return out;
}

std::string render_implementation_plan(const SceneSpec& spec, std::size_t index) {
  std::string out = fmt::format("Scene {}: {}\nPurpose: {}\nDescription: {}\nLayout: {}\nNarration: {}\nVisual elements:\n",
                                index + 1, spec.outline.title, spec.outline.purpose, spec.outline.description,
                                spec.outline.layout, spec.narration);
  for (const auto& v : spec.visual_elements) out += "- " + v + "\n";
  if (!spec.animation_notes.empty()) out += "Animation notes: " + spec.animation_notes + "\n";
  if (!spec.transitions.empty()) out += "Transitions: " + spec.transitions + "\n";
  return out;
}

Planner::Planner(gateway::ChatClient& client, const PromptLibrary& prompts, PlannerConfig config)
    : client_(client), prompts_(prompts), config_(std::move(config)) {}

VideoPlan Planner::plan_video(const corpus::TheoremEntry& theorem, std::string_view context) const {
  auto prompt = prompts_.render("scene_plan", {{"topic", theorem.name},
                                               {"description", theorem.description},
                                               {"subject", std::string(corpus::to_string(theorem.subject))},
                                               {"max_scenes", std::to_string(config_.max_scenes)},
                                               {"context", std::string(context)}});
  gateway::ChatRequest request{config_.model_id, prompt.system, prompt.user, config_.temperature,
                               config_.max_output_tokens, gateway::Tag::kPlan, {}};
  auto attempt = [&](const gateway::ChatRequest& req) {
    VideoPlan plan{theorem.id, parse_plan_response(client_.complete(req).text)};
    check_plan(plan, config_.max_scenes);
    return plan;
  };
  try {
    return attempt(request);
  } catch (const Error& e) {
    if (dynamic_cast<const PlanParseError*>(&e) == nullptr && dynamic_cast<const PlanInvariantError*>(&e) == nullptr) {
      throw;
    }
    spdlog::info("plan for {} rejected ({}), re-prompting once", theorem.id, e.what());
    auto repair = prompts_.render("plan_repair", {{"error", e.what()}});
    request.user += repair.user;
    return attempt(request);
  }
}

SceneSpec Planner::refine_scene(const corpus::TheoremEntry& theorem, const VideoPlan& plan, std::size_t index,
                                std::string_view context) const {
  if (index >= plan.scenes.size()) {
    throw std::out_of_range(fmt::format("scene index {} outside plan of {} scenes", index, plan.scenes.size()));
  }
  const auto& outline = plan.scenes[index];
  auto prompt = prompts_.render("scene_refine", {{"topic", theorem.name},
                                                 {"description", theorem.description},
                                                 {"plan_overview", render_plan_overview(plan)},
                                                 {"scene_number", std::to_string(index + 1)},
                                                 {"scene_count", std::to_string(plan.scenes.size())},
                                                 {"title", outline.title},
                                                 {"purpose", outline.purpose},
                                                 {"scene_description", outline.description},
                                                 {"layout", outline.layout},
                                                 {"context", std::string(context)}});
  gateway::ChatRequest request{config_.model_id, prompt.system, prompt.user, config_.temperature,
                               config_.max_output_tokens, gateway::Tag::kRefine, {}};
  return parse_scene_response(client_.complete(request).text, outline, index);
}

json to_json(const SceneOutline& o) {
  return {{"title", o.title}, {"purpose", o.purpose}, {"description", o.description}, {"layout", o.layout}};
}

json to_json(const VideoPlan& plan) {
  json scenes = json::array();
  for (const auto& s : plan.scenes) scenes.push_back(to_json(s));
  return {{"theorem_id", plan.theorem_id}, {"scenes", scenes}};
}

json to_json(const SceneSpec& spec) {
  return {{"outline", to_json(spec.outline)},
          {"narration", spec.narration},
          {"visual_elements", spec.visual_elements},
          {"animation_notes", spec.animation_notes},
          {"transitions", spec.transitions}};
}

VideoPlan plan_from_json(const json& j) {
  VideoPlan plan;
  plan.theorem_id = j.at("theorem_id").get<std::string>();
  for (const auto& s : j.at("scenes")) {
    plan.scenes.push_back(SceneOutline{s.at("title").get<std::string>(), s.at("purpose").get<std::string>(),
                                       s.at("description").get<std::string>(), s.at("layout").get<std::string>()});
  }
  return plan;
}

}  // namespace tea::planner
