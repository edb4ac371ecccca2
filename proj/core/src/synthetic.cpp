#include "tea/synthetic.hpp"

#include <array>
#include <regex>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "tea/util.hpp"

namespace tea::gateway {
namespace {

constexpr std::array<std::string_view, 5> kTitles = {"Setting The Stage", "Stating The Theorem", "Building Intuition",
                                                     "A Worked Example", "Why It Holds"};

constexpr std::array<std::string_view, 6> kErrors = {
    "Traceback (most recent call last):\n  File \"scene.py\", line 12, in construct\n"
    "AttributeError: 'Circle' object has no attribute 'set_glow'",
    "Traceback (most recent call last):\n  File \"scene.py\", line 3, in <module>\n"
    "ModuleNotFoundError: No module named 'manim_extras'",
    "ValueError: latex error converting to dvi. See log output above or the log file: media/Tex/1a2b.log",
    "! Undefined control sequence.\nl.8 \\theorm",
    "Traceback (most recent call last):\n  File \"scene.py\", line 21, in construct\n"
    "NameError: name 'squre' is not defined",
    "  File \"scene.py\", line 17\n    self.play(Write(title)\n                        ^\nSyntaxError: '(' was never closed",
};

std::string field(std::string_view text, std::string_view label) {
  for (const auto& line : util::split_lines(text)) {
    std::string t = util::trim(line);
    if (util::istarts_with(t, label)) return util::trim(std::string_view(t).substr(label.size()));
  }
  return {};
}

std::uint64_t digest(const ChatRequest& r) { return util::fnv1a64(r.user, util::fnv1a64(r.model_id)); }

std::string plan_answer(const ChatRequest& r) {
  std::string topic = field(r.user, "Topic:");
  if (topic.empty()) topic = "the theorem";
  int max_scenes = 3;
  static const std::regex between(R"(between 1 and (\d+) scenes)");
  std::smatch m;
  if (std::regex_search(r.user, m, between)) max_scenes = std::stoi(m[1].str());
  int count = std::clamp(3 + static_cast<int>(digest(r) % 3), 1, std::max(1, max_scenes));
  std::string out = fmt::format("Here is a plan for {}.\n\n", topic);
  for (int i = 0; i < count; ++i) {
    out += fmt::format(
        "```scene\nScene Title: {}\nScene Purpose: Move the viewer one step closer to understanding {}.\n"
        "Scene Description: Part {} of the explanation of {}, shown with labeled shapes and short formulas.\n"
        "Scene Layout: Title at the top edge, main diagram centered, formulas on the right with a one unit margin.\n"
        "```\n\n",
        kTitles[static_cast<std::size_t>(i) % kTitles.size()], topic, i + 1, topic);
  }
  return out;
}

std::string refine_answer(const ChatRequest& r) {
  std::string topic = field(r.user, "Theorem:");
  std::string title = field(r.user, "Scene Title:");
  return fmt::format(
      "Narration: In this scene, {1}, we look at {0}. We draw the key objects and name each part. "
      "Then we connect them to the statement step by step.\n"
      "Visual Elements:\n- A title text reading \"{1}\"\n- A central diagram for {0}\n- A formula box on the right\n"
      "Animation Notes: Write the title, then create the diagram, then transform the labels into the formula.\n"
      "Transitions: Fade in from black and fade out all objects at the end.\n",
      topic, title);
}

std::string scene_code(const std::string& scene_class, const std::string& topic) {
  return fmt::format(
      "from manim import *\n\n\n"
      "class {0}(Scene):\n"
      "    def construct(self):\n"
      "        title = Text({1}).scale(0.6).to_edge(UP)\n"
      "        shape = Circle(radius=1.5, color=BLUE)\n"
      "        label = MathTex(r\"a^2 + b^2 = c^2\").next_to(shape, RIGHT, buff=0.5)\n"
      "        self.play(Write(title))\n"
      "        self.play(Create(shape))\n"
      "        self.play(FadeIn(label))\n"
      "        self.wait(1)\n",
      scene_class, nlohmann::json(topic).dump());
}

std::string codegen_answer(const ChatRequest& r, int failure_per_mille) {
  std::string scene_class = field(r.user, "Scene class:");
  if (scene_class.empty()) scene_class = "GeneratedScene";
  std::string topic = field(r.user, "Theorem:");
  std::string code = scene_code(scene_class, topic);
  auto h = util::fnv1a64(scene_class + '\x1f' + topic);
  if (static_cast<int>(h % 1000) < failure_per_mille) {
    std::string err = std::string(kErrors[(h >> 16) % kErrors.size()]);
    std::string escaped;
    for (char c : err) {
      if (c == '\n') escaped += "\\n";
      else if (c == '\\') escaped += "\\\\";
      else escaped += c;
    }
    code = "# stub-error: " + escaped + "\n" + code;
  }
  return "```python\n" + code + "```\n";
}

std::string fix_answer(const ChatRequest& r) {
  std::string code;
  auto start = r.user.find("Current code:\n```python\n");
  if (start != std::string::npos) {
    start += std::string_view("Current code:\n```python\n").size();
    auto end = r.user.find("\n```", start);
    code = r.user.substr(start, end == std::string::npos ? std::string::npos : end - start);
  }
  std::string fixed;
  for (const auto& line : util::split_lines(code)) {
    if (util::trim(line).rfind("# stub-error:", 0) == 0) continue;
    fixed += line + '\n';
  }
  if (util::trim(fixed).empty()) fixed = scene_code("GeneratedScene", "the theorem");
  return "The failing call is not part of the Manim API; it is removed below.\n\n```python\n" + fixed + "```\n";
}

std::string plugin_answer(const ChatRequest& r) {
  std::string lower = util::to_lower(r.user);
  nlohmann::json picks = nlohmann::json::array();
  auto offer = [&](std::string_view plugin, std::initializer_list<std::string_view> cues) {
    if (lower.find("- " + std::string(plugin)) == std::string::npos) return;
    for (auto cue : cues) {
      if (lower.find(cue) != std::string::npos) {
        picks.push_back(plugin);
        return;
      }
    }
  };
  offer("manim-physics", {"force", "motion", "wave", "pendulum", "newton"});
  offer("manim-chemistry", {"electron", "molecule", "atom", "octet", "bond"});
  offer("manim-dsa", {"sort", "array", "graph", "tree", "list"});
  offer("manim-circuit", {"circuit", "resistor", "voltage", "current"});
  offer("manim-ml", {"neural", "network layer", "gradient descent"});
  return nlohmann::json{{"plugins", picks}}.dump();
}

std::string query_answer(const ChatRequest& r) {
  std::string context = field(r.user, "Context:");
  auto pos = r.user.find("Context:\n");
  if (pos != std::string::npos) {
    auto rest = std::string_view(r.user).substr(pos + 9);
    context = util::trim(rest.substr(0, std::min<std::size_t>(rest.size(), 120)));
  }
  auto words = util::split_words(context);
  std::string head;
  for (std::size_t i = 0; i < words.size() && i < 6; ++i) head += (i ? " " : "") + words[i];
  std::string stage = field(r.user, "Stage:");
  return fmt::format("1. {} {}\n2. Manim Text and MathTex positioning\n3. Manim Create and Transform animations\n",
                     stage.empty() ? "manim" : stage, head);
}

int score_in(std::uint64_t h, int lo, int hi) { return lo + static_cast<int>(h % static_cast<std::uint64_t>(hi - lo + 1)); }

}  // namespace

SyntheticResponder::SyntheticResponder(int failure_per_mille) : failure_per_mille_(failure_per_mille) {}

std::string SyntheticResponder::respond(const ChatRequest& r) {
  auto h = digest(r);
  switch (r.tag) {
    case Tag::kPlan: return plan_answer(r);
    case Tag::kRefine: return refine_answer(r);
    case Tag::kCodegen: return codegen_answer(r, failure_per_mille_);
    case Tag::kFix: return fix_answer(r);
    case Tag::kQuery:
      if (r.user.find("Available plugins:") != std::string::npos) return plugin_answer(r);
      return query_answer(r);
    case Tag::kJudge:
      if (r.user.find("\"accuracy_depth\"") != std::string::npos) {
        return nlohmann::json{{"accuracy_depth", score_in(h, 6, 9) / 10.0},
                              {"logical_flow", score_in(h >> 8, 6, 9) / 10.0},
                              {"justification", "Synthetic grade."}}
            .dump();
      }
      if (r.user.find("\"visual_consistency\"") != std::string::npos) {
        return nlohmann::json{{"visual_consistency", score_in(h, 3, 5)}, {"justification", "Synthetic grade."}}.dump();
      }
      return nlohmann::json{{"visual_relevance", score_in(h, 3, 5)},
                            {"element_layout", score_in(h >> 8, 3, 5)},
                            {"justification", "Synthetic grade."}}
          .dump();
  }
  return {};
}

}  // namespace tea::gateway
