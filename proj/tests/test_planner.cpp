#include <gtest/gtest.h>

#include "support.hpp"
#include "tea/planner.hpp"
#include "tea/util.hpp"

namespace tea::planner {
namespace {

const corpus::TheoremEntry kTheorem{"pythagorean-theorem", "Pythagorean Theorem",
                                    "In a right triangle the squares on the legs sum to the square on the hypotenuse.",
                                    corpus::Difficulty::kEasy, corpus::Subject::kMathematics, "Geometry"};

std::string scene_block(const std::string& title) {
  return "Scene Title: " + title +
         "\nScene Purpose: Introduce the idea.\nScene Description: A right triangle appears.\n"
         "Scene Layout: Triangle centered, labels to the right.\n\n";
}

TEST(PlanParse, FieldsAndMultiline) {
  auto scenes = parse_plan_response("<SCENE_OUTLINE>\n" + scene_block("Right Triangle Basics") +
                                    "**Scene Title:** Squares On Sides\nScene Purpose: Show squares.\n"
                                    "Scene Description: Squares grow\nfrom each side.\nscene layout: Grid.\n"
                                    "</SCENE_OUTLINE>\n");
  ASSERT_EQ(scenes.size(), 2u);
  EXPECT_EQ(scenes[0].title, "Right Triangle Basics");
  EXPECT_EQ(scenes[1].title, "Squares On Sides");
  EXPECT_EQ(scenes[1].description, "Squares grow from each side.");
  EXPECT_EQ(scenes[1].layout, "Grid.");
  EXPECT_THROW(parse_plan_response("I will not plan."), PlanParseError);
}

TEST(PlanCheck, Invariants) {
  VideoPlan ok{"t", parse_plan_response(scene_block("Two Words"))};
  EXPECT_NO_THROW(check_plan(ok, 8));
  VideoPlan long_title{"t", parse_plan_response(scene_block("One Two Three Four Five Six Seven"))};
  EXPECT_THROW(check_plan(long_title, 8), PlanInvariantError);
  VideoPlan one_word{"t", parse_plan_response(scene_block("Intro"))};
  EXPECT_THROW(check_plan(one_word, 8), PlanInvariantError);
  std::string many;
  for (int i = 0; i < 3; ++i) many += scene_block("Scene Number " + std::to_string(i));
  VideoPlan three{"t", parse_plan_response(many)};
  EXPECT_THROW(check_plan(three, 2), PlanInvariantError);
  VideoPlan empty{"t", {}};
  EXPECT_THROW(check_plan(empty, 8), PlanInvariantError);
}

TEST(Planner, RepairsOnceThenFails) {
  testing::QueueClient client({scene_block("One Two Three Four Five Six Seven"), scene_block("Still Far Too Long A Title Here")});
  Planner p(client, testing::shipped_prompts(), {"openai/gpt-4o", 0.7, 4096, 8});
  EXPECT_THROW(p.plan_video(kTheorem), PlanInvariantError);
  ASSERT_EQ(client.requests().size(), 2u);
  EXPECT_GT(client.requests()[1].user.size(), client.requests()[0].user.size());
}

TEST(Planner, RepairSucceeds) {
  testing::QueueClient client({"no plan", scene_block("Right Triangle Basics")});
  Planner p(client, testing::shipped_prompts(), {"openai/gpt-4o", 0.7, 4096, 8});
  auto plan = p.plan_video(kTheorem);
  EXPECT_EQ(plan.scenes.size(), 1u);
  EXPECT_EQ(plan.theorem_id, "pythagorean-theorem");
}

TEST(Planner, StableUnderMock) {
  testing::ScriptedClient client([](const gateway::ChatRequest& r) {
    return scene_block("Plan For " + std::to_string(util::fnv1a64(r.user) % 1000)) + scene_block("Closing Remarks");
  });
  Planner p(client, testing::shipped_prompts(), {"openai/gpt-4o", 0.7, 4096, 8});
  EXPECT_EQ(p.plan_video(kTheorem), p.plan_video(kTheorem));
  EXPECT_EQ(client.requests()[0].tag, gateway::Tag::kPlan);
}

TEST(Planner, RefineLeavesPlanAlone) {
  testing::QueueClient client({"Narration: We start with a triangle. Then squares.\nVisual Elements:\n- Right triangle\n"
                               "- Three squares\nAnimation Notes: Grow squares.\nTransitions: Fade out.\n"});
  Planner p(client, testing::shipped_prompts(), {"openai/gpt-4o", 0.7, 4096, 8});
  VideoPlan plan{"pythagorean-theorem", parse_plan_response(scene_block("Right Triangle Basics"))};
  auto before = plan;
  auto spec = p.refine_scene(kTheorem, plan, 0);
  EXPECT_EQ(plan, before);
  EXPECT_EQ(spec.narration, "We start with a triangle. Then squares.");
  EXPECT_EQ(spec.visual_elements, (std::vector<std::string>{"Right triangle", "Three squares"}));
  EXPECT_EQ(spec.outline, plan.scenes[0]);
  EXPECT_EQ(client.requests()[0].tag, gateway::Tag::kRefine);
  EXPECT_THROW(p.refine_scene(kTheorem, plan, 1), std::out_of_range);
  auto rendered = render_implementation_plan(spec, 0);
  EXPECT_NE(rendered.find("Right triangle"), std::string::npos);
}

TEST(SceneParse, MissingNarration) {
  SceneOutline o{"A B", "p", "d", "l"};
  EXPECT_THROW(parse_scene_response("Visual Elements:\n- x\n", o, 2), SceneParseError);
  EXPECT_THROW(parse_scene_response("Narration: hi\n", o, 2), SceneParseError);
}

TEST(PlanJson, RoundTrip) {
  VideoPlan plan{"t", parse_plan_response(scene_block("Right Triangle Basics") + scene_block("Area Argument"))};
  EXPECT_EQ(plan_from_json(to_json(plan)), plan);
}

}  // namespace
}  // namespace tea::planner
