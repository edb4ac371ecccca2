#include "tea/pipeline.hpp"

#include <chrono>
#include <mutex>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "tea/planner.hpp"
#include "tea/util.hpp"

namespace tea::pipeline {
namespace {

using nlohmann::json;

struct StageError {
  std::string stage;
  std::string message;
};

std::string theorem_seed(const corpus::TheoremEntry& t) { return t.name + ": " + t.description; }

// Retrieval helper bound to one run: generates stage queries through the
// agent and joins the excerpts it finds.
class RunContext {
 public:
  RunContext(retrieval::RagAgent* agent, retrieval::Retriever* retriever, retrieval::RetrievalConfig config)
      : agent_(agent), retriever_(retriever), config_(std::move(config)) {}

  std::string fetch(retrieval::QueryStage stage, std::string_view seed) {
    if (agent_ == nullptr || retriever_ == nullptr) return {};
    std::vector<std::string> queries;
    try {
      queries = agent_->generate_queries(stage, seed);
    } catch (const retrieval::QueryParseError& e) {
      spdlog::warn("{} queries unusable, continuing without context", retrieval::to_string(stage));
      return {};
    }
    std::vector<retrieval::ScoredChunk> merged;
    for (const auto& q : queries) {
      for (const auto& hit : retriever_->retrieve(q, config_, stage)) {
        auto same = [&](const retrieval::ScoredChunk& c) { return c.id == hit.id; };
        if (std::find_if(merged.begin(), merged.end(), same) == merged.end()) merged.push_back(hit);
      }
    }
    return retrieval::format_context(retriever_->index(), merged);
  }

 private:
  retrieval::RagAgent* agent_;
  retrieval::Retriever* retriever_;
  retrieval::RetrievalConfig config_;
};

std::filesystem::path unique_run_dir(const std::filesystem::path& base) {
  if (!std::filesystem::exists(base)) return base;
  for (int n = 2;; ++n) {
    auto candidate = base.parent_path() / fmt::format("{}-{}", base.filename().string(), n);
    if (!std::filesystem::exists(candidate)) return candidate;
  }
}

json artifact_json(const VideoArtifact& a) {
  json scenes = json::array();
  for (const auto& s : a.scenes) {
    scenes.push_back({{"scene_index", s.scene_index},
                      {"video_path", s.video_path.string()},
                      {"duration_s", s.duration_s},
                      {"narration", s.narration},
                      {"audio_path", s.audio_path.string()},
                      {"timed_segments", s.segments.size()}});
  }
  return {{"theorem_id", a.theorem_id},
          {"video_path", a.video_path.string()},
          {"srt_path", a.srt_path.string()},
          {"total_duration_s", a.total_duration_s},
          {"under_a_minute", a.under_a_minute},
          {"ledger_path", a.ledger_path.string()},
          {"scenes", scenes}};
}

VideoArtifact artifact_from_json(const json& j) {
  VideoArtifact a;
  a.theorem_id = j.at("theorem_id").get<std::string>();
  a.video_path = j.at("video_path").get<std::string>();
  a.srt_path = j.at("srt_path").get<std::string>();
  a.total_duration_s = j.at("total_duration_s").get<double>();
  a.under_a_minute = j.value("under_a_minute", false);
  a.ledger_path = j.value("ledger_path", "");
  for (const auto& s : j.at("scenes")) {
    RenderedScene r;
    r.scene_index = s.at("scene_index").get<std::size_t>();
    r.video_path = s.at("video_path").get<std::string>();
    r.duration_s = s.at("duration_s").get<double>();
    r.narration = s.value("narration", "");
    r.audio_path = s.value("audio_path", "");
    a.scenes.push_back(std::move(r));
  }
  return a;
}

}  // namespace

VideoArtifact assemble_video(std::string theorem_id, std::vector<RenderedScene> scenes, media::MediaTool& tool,
                             const std::filesystem::path& out_dir) {
  if (scenes.empty()) throw NonContiguousScenes("no scenes to assemble");
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    if (scenes[i].scene_index != i) {
      throw NonContiguousScenes(fmt::format("expected scene {} at position {}, found scene {}", i, i,
                                            scenes[i].scene_index));
    }
    if (!(scenes[i].duration_s > 0.0)) throw std::invalid_argument(fmt::format("scene {} has no duration", i));
  }

  VideoArtifact a;
  a.theorem_id = std::move(theorem_id);
  a.video_path = out_dir / "final.mp4";
  a.srt_path = out_dir / "final.srt";
  std::vector<media::SceneMedia> parts;
  std::vector<srt::SceneNarration> narration;
  double offset = 0.0;
  for (const auto& s : scenes) {
    parts.push_back({s.video_path, s.audio_path, s.duration_s});
    narration.push_back({offset, s.duration_s, s.narration, s.segments});
    offset += s.duration_s;
  }
  try {
    tool.assemble(parts, a.video_path);
  } catch (const media::MediaError& e) {
    throw MediaToolFailure(e.what());
  }
  a.total_duration_s = offset;
  auto cues = srt::build_cues(narration);
  util::write_file(a.srt_path, srt::emit_srt(cues));
  a.under_a_minute = a.total_duration_s < 60.0;
  if (a.under_a_minute) spdlog::warn("{}: video runs {:.1f} s, under a minute", a.theorem_id, a.total_duration_s);
  a.scenes = std::move(scenes);
  return a;
}

json to_json(const RunRecord& r) {
  json scenes = json::array();
  for (const auto& s : r.scenes) scenes.push_back(codegen::to_json(s));
  json j = {{"theorem_id", r.theorem_id},
            {"theorem_name", r.theorem_name},
            {"difficulty", corpus::to_string(r.difficulty)},
            {"subject", corpus::to_string(r.subject)},
            {"model_id", r.model_id},
            {"rag", r.rag},
            {"max_fixes", r.max_fixes},
            {"success", r.success},
            {"wall_time_s", r.wall_time_s},
            {"error_stage", r.error_stage},
            {"error", r.error},
            {"run_dir", r.run_dir.string()},
            {"plugins", r.plugins},
            {"scenes", scenes},
            {"ledger", gateway::to_json(r.ledger)}};
  j["artifact"] = r.artifact ? artifact_json(*r.artifact) : json(nullptr);
  return j;
}

RunRecord run_record_from_json(const json& j) {
  RunRecord r;
  r.theorem_id = j.at("theorem_id").get<std::string>();
  r.theorem_name = j.value("theorem_name", "");
  auto difficulty = corpus::parse_difficulty(j.at("difficulty").get<std::string>());
  auto subject = corpus::parse_subject(j.at("subject").get<std::string>());
  if (!difficulty || !subject) throw std::invalid_argument("run record for " + r.theorem_id + " has bad metadata");
  r.difficulty = *difficulty;
  r.subject = *subject;
  r.model_id = j.at("model_id").get<std::string>();
  r.rag = j.value("rag", false);
  r.max_fixes = j.value("max_fixes", 5);
  r.success = j.at("success").get<bool>();
  r.wall_time_s = j.value("wall_time_s", 0.0);
  r.error_stage = j.value("error_stage", "");
  r.error = j.value("error", "");
  r.run_dir = j.value("run_dir", "");
  r.plugins = j.value("plugins", std::vector<std::string>{});
  if (j.contains("scenes")) {
    for (const auto& s : j["scenes"]) r.scenes.push_back(codegen::scene_result_from_json(s));
  }
  if (j.contains("ledger") && j["ledger"].is_object()) r.ledger = gateway::ledger_from_json(j["ledger"]);
  if (j.contains("artifact") && j["artifact"].is_object()) r.artifact = artifact_from_json(j["artifact"]);
  return r;
}

RunRecord load_run_record(const std::filesystem::path& path) {
  return run_record_from_json(json::parse(util::read_file(path)));
}

RunRecord run_theorem(const corpus::TheoremEntry& theorem, const PipelineConfig& config, Ports& ports,
                      const std::filesystem::path& runs_root, const std::string& stamp) {
  auto started = std::chrono::steady_clock::now();
  RunRecord record;
  record.theorem_id = theorem.id;
  record.theorem_name = theorem.name;
  record.difficulty = theorem.difficulty;
  record.subject = theorem.subject;
  record.model_id = config.model_id;
  record.rag = config.rag;
  record.max_fixes = config.max_fixes;
  record.run_dir = unique_run_dir(runs_root / theorem.id / stamp);
  std::filesystem::create_directories(record.run_dir);

  gateway::MeteredClient client(ports.client, config.model_id, ports.prices);
  const auto& classifier = ports.classifier != nullptr ? *ports.classifier : codegen::ErrorClassifier::builtin();
  std::optional<StageError> failure;
  auto fail = [&](std::string stage, const std::exception& e) {
    if (!failure) failure = StageError{std::move(stage), e.what()};
    spdlog::error("{}: {} stage failed: {}", theorem.id, failure->stage, failure->message);
  };

  // Retrieval setup: plugin classification, then stage-specific queries.
  std::unique_ptr<retrieval::RagAgent> agent;
  retrieval::RetrievalConfig rcfg = config.retrieval;
  if (config.rag) {
    if (ports.retriever == nullptr) throw std::invalid_argument("retrieval is on but no retriever was supplied");
    retrieval::RagAgentConfig acfg;
    acfg.model_id = config.model_id;
    acfg.temperature = config.temperature;
    acfg.max_queries = config.max_queries;
    acfg.plugin_catalog = retrieval::effective_catalog(config.plugin_catalog, config.plugin_probe);
    agent = std::make_unique<retrieval::RagAgent>(client, ports.prompts, acfg);
    try {
      record.plugins = agent->classify_plugins(theorem);
    } catch (const std::exception& e) {
      fail("plugins", e);
    }
    rcfg.plugin_allowlist = record.plugins;
  }
  RunContext rag(agent.get(), config.rag ? ports.retriever : nullptr, rcfg);

  planner::PlannerConfig pcfg{config.model_id, config.temperature, 8192, config.max_scenes};
  planner::Planner planner(client, ports.prompts, pcfg);
  planner::VideoPlan plan;
  std::vector<planner::SceneSpec> specs;
  std::string storyboard;
  if (!failure) {
    try {
      storyboard = rag.fetch(retrieval::QueryStage::kStoryboard, theorem_seed(theorem));
      plan = planner.plan_video(theorem, storyboard);
      util::write_file(record.run_dir / "plan.json", planner::to_json(plan).dump(2) + "\n");
    } catch (const std::exception& e) {
      fail("plan", e);
    }
  }

  if (!failure) {
    specs.resize(plan.scenes.size());
    try {
      util::parallel_for(plan.scenes.size(), config.parallelism,
                   [&](std::size_t i) { specs[i] = planner.refine_scene(theorem, plan, i, storyboard); });
      json refined = json::array();
      for (const auto& s : specs) refined.push_back(planner::to_json(s));
      util::write_file(record.run_dir / "scenes.json", refined.dump(2) + "\n");
    } catch (const std::exception& e) {
      fail("refine", e);
    }
  }

  if (!failure) {
    codegen::CodegenConfig ccfg{config.model_id, config.temperature, 8192, config.max_fixes, config.stderr_limit,
                                config.rag_every_fix};
    codegen::CodeGenerator generator(client, ports.prompts, ccfg);
    codegen::ContextProvider provider;
    if (config.rag) {
      provider = [&](std::string_view stage, std::string_view seed) {
        auto st = retrieval::parse_stage(stage).value_or(retrieval::QueryStage::kImplementation);
        return rag.fetch(st, seed);
      };
    }
    record.scenes.resize(specs.size());
    std::mutex executor_mu;
    struct LockedExecutor final : codegen::ScriptExecutor {
      codegen::ScriptExecutor& inner;
      std::mutex& mu;
      bool serialize;
      LockedExecutor(codegen::ScriptExecutor& e, std::mutex& m, bool s) : inner(e), mu(m), serialize(s) {}
      codegen::RenderOutcome execute(const std::filesystem::path& p, const std::string& c, std::size_t i,
                                     const std::filesystem::path& o) override {
        if (!serialize) return inner.execute(p, c, i, o);
        std::lock_guard lock(mu);
        return inner.execute(p, c, i, o);
      }
    };
    // Stub renderers keep counters; real subprocess runs are independent.
    bool serialize = dynamic_cast<SubprocessExecutor*>(&ports.executor) == nullptr;
    LockedExecutor executor(ports.executor, executor_mu, serialize);
    util::parallel_for(specs.size(), config.parallelism, [&](std::size_t i) {
      codegen::SceneJob job{i, theorem.name, planner::render_implementation_plan(specs[i], i),
                            record.run_dir / "scenes" / std::to_string(i)};
      try {
        record.scenes[i] = codegen::run_scene_loop(generator, executor, job, provider, classifier);
      } catch (const std::exception& e) {
        auto& s = record.scenes[i];
        s.index = i;
        s.scene_class = codegen::scene_class_name(i);
        s.status = codegen::SceneStatus::kFailed;
        s.error = e.what();
        spdlog::error("{}: scene {} aborted: {}", theorem.id, i + 1, e.what());
      }
    });
    for (const auto& s : record.scenes) {
      if (!s.error.empty()) {
        failure = StageError{"codegen", fmt::format("scene {}: {}", s.index + 1, s.error)};
        break;
      }
    }
  }

  bool all_rendered = !record.scenes.empty() &&
                      std::all_of(record.scenes.begin(), record.scenes.end(),
                                  [](const codegen::SceneResult& s) { return s.status == codegen::SceneStatus::kSucceeded; });

  if (!failure && all_rendered) {
    try {
      std::vector<RenderedScene> rendered;
      auto media_dir = record.run_dir / "media";
      for (std::size_t i = 0; i < record.scenes.size(); ++i) {
        const auto& s = record.scenes[i];
        RenderedScene r;
        r.scene_index = i;
        r.video_path = s.media;
        r.narration = specs[i].narration;
        auto voice = ports.tts.synthesize(r.narration, media_dir / fmt::format("scene_{}.wav", i));
        r.audio_path = voice.audio;
        auto sidecar = record.run_dir / "scenes" / std::to_string(i) / "media" / codegen::timing_sidecar_name(i);
        if (std::filesystem::exists(sidecar)) r.segments = srt::read_timing_sidecar(sidecar);
        r.duration_s = std::max(s.clip_duration_s, voice.duration_s);
        rendered.push_back(std::move(r));
      }
      record.artifact = assemble_video(theorem.id, std::move(rendered), ports.media, record.run_dir);
      record.artifact->ledger_path = record.run_dir / "ledger.json";
    } catch (const std::exception& e) {
      fail("assemble", e);
    }
  }

  if (failure) {
    record.error_stage = failure->stage;
    record.error = failure->message;
  }
  record.success = !failure && all_rendered;
  record.ledger = client.snapshot();
  record.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  util::write_file(record.run_dir / "ledger.json", gateway::to_json(record.ledger).dump(2) + "\n");
  util::write_file(record.run_dir / "run_record.json", to_json(record).dump(2) + "\n");
  spdlog::info("{}: {} ({} scenes, {} model calls)", theorem.id, record.success ? "success" : "failure",
               record.scenes.size(), record.ledger.records.size());
  return record;
}

}  // namespace tea::pipeline
