#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tea/codegen.hpp"
#include "tea/corpus.hpp"
#include "tea/error.hpp"
#include "tea/gateway.hpp"
#include "tea/media.hpp"
#include "tea/net.hpp"
#include "tea/prompts.hpp"
#include "tea/retrieval.hpp"
#include "tea/srt.hpp"

namespace tea::pipeline {

// ---------------------------------------------------------------------------
// Narration

class TtsPortError : public Error {
 public:
  using Error::Error;
};

struct Voiceover {
  std::filesystem::path audio;
  double duration_s = 0.0;
};

class TtsPort {
 public:
  virtual ~TtsPort() = default;
  virtual Voiceover synthesize(std::string_view narration, const std::filesystem::path& out_wav) = 0;
  virtual std::string name() const = 0;
};

// word_count / 2.5 seconds, at least 0.5 s.
double stub_narration_seconds(std::string_view narration);

// Writes silence of the stub narration length.
class SilentTts final : public TtsPort {
 public:
  Voiceover synthesize(std::string_view narration, const std::filesystem::path& out_wav) override;
  std::string name() const override { return "silent"; }
};

struct HttpTtsConfig {
  std::string base_url;
  std::string api_key_env;
  std::string model = "gpt-4o-mini-tts";
  std::string voice = "alloy";
  int timeout_s = 120;
};

// OpenAI-compatible <base_url>/audio/speech returning WAV.
class HttpTts final : public TtsPort {
 public:
  HttpTts(HttpTtsConfig config, std::shared_ptr<net::HttpTransport> transport = nullptr);
  Voiceover synthesize(std::string_view narration, const std::filesystem::path& out_wav) override;
  std::string name() const override { return "http:" + config_.model; }

 private:
  HttpTtsConfig config_;
  std::shared_ptr<net::HttpTransport> transport_;
};

// ---------------------------------------------------------------------------
// Script execution

struct SubprocessExecutorConfig {
  // Placeholders: {script}, {scene_class}, {media_dir}, {timing_file}.
  std::vector<std::string> command = {"manim", "render", "-ql", "--media_dir", "{media_dir}",
                                      "-o", "{scene_class}", "{script}", "{scene_class}"};
  int timeout_s = 600;
};

// Runs the renderer in the script's directory. ok iff exit status 0 and a
// video file exists under the media directory.
class SubprocessExecutor final : public codegen::ScriptExecutor {
 public:
  explicit SubprocessExecutor(SubprocessExecutorConfig config);
  codegen::RenderOutcome execute(const std::filesystem::path& script_path, const std::string& scene_class,
                                 std::size_t scene_index, const std::filesystem::path& out_dir) override;

 private:
  SubprocessExecutorConfig config_;
};

// Offline renderer. A "# stub-error: <message>" line (with \n escapes) in
// the script fails the run with that message; a script lacking the scene
// class fails too. Otherwise writes a solid-colour clip of clip_s seconds.
class StubExecutor final : public codegen::ScriptExecutor {
 public:
  explicit StubExecutor(double clip_s = 3.0);
  codegen::RenderOutcome execute(const std::filesystem::path& script_path, const std::string& scene_class,
                                 std::size_t scene_index, const std::filesystem::path& out_dir) override;
  std::size_t runs() const { return runs_; }

 private:
  double clip_s_;
  std::size_t runs_ = 0;
};

// ---------------------------------------------------------------------------
// Assembly

struct RenderedScene {
  std::size_t scene_index = 0;
  std::filesystem::path video_path;
  double duration_s = 0.0;
  std::string narration;
  std::filesystem::path audio_path;
  std::vector<srt::TimedText> segments;  // from the timing sidecar, if any
};

struct VideoArtifact {
  std::string theorem_id;
  std::filesystem::path video_path;
  std::filesystem::path srt_path;
  double total_duration_s = 0.0;
  std::vector<RenderedScene> scenes;
  std::filesystem::path ledger_path;
  bool under_a_minute = false;
};

class NonContiguousScenes : public Error {
 public:
  using Error::Error;
};

class MediaToolFailure : public Error {
 public:
  using Error::Error;
};

// Joins scenes (indices 0..n-1 in order) into out_dir/final.mp4 and writes
// out_dir/final.srt.
VideoArtifact assemble_video(std::string theorem_id, std::vector<RenderedScene> scenes, media::MediaTool& tool,
                             const std::filesystem::path& out_dir);

// ---------------------------------------------------------------------------
// Orchestration

struct PipelineConfig {
  std::string model_id = "openai/gpt-4o";
  double temperature = 0.7;
  int max_fixes = 5;
  int max_scenes = 8;
  int parallelism = 4;
  std::size_t stderr_limit = 8000;
  bool rag = false;
  bool rag_every_fix = true;
  std::size_t max_queries = 5;
  retrieval::RetrievalConfig retrieval;
  std::vector<std::string> plugin_catalog;
  std::filesystem::path plugin_probe;  // plugins.json written by the renderer environment
};

struct Ports {
  gateway::ChatClient& client;
  const PromptLibrary& prompts;
  codegen::ScriptExecutor& executor;
  TtsPort& tts;
  media::MediaTool& media;
  retrieval::Retriever* retriever = nullptr;  // required when rag is on
  const codegen::ErrorClassifier* classifier = nullptr;
  gateway::PriceTable prices;
};

struct RunRecord {
  std::string theorem_id;
  std::string theorem_name;
  corpus::Difficulty difficulty = corpus::Difficulty::kEasy;
  corpus::Subject subject = corpus::Subject::kMathematics;
  std::string model_id;
  bool rag = false;
  int max_fixes = 5;
  std::vector<codegen::SceneResult> scenes;
  bool success = false;
  double wall_time_s = 0.0;
  std::string error_stage;  // empty when no stage raised
  std::string error;
  std::filesystem::path run_dir;
  std::optional<VideoArtifact> artifact;
  std::vector<std::string> plugins;
  gateway::UsageLedger ledger;
};

nlohmann::json to_json(const RunRecord& record);
RunRecord run_record_from_json(const nlohmann::json& j);
RunRecord load_run_record(const std::filesystem::path& path);

// Never throws for stage failures: they land in the record. The run
// directory is runs_root/<theorem id>/<stamp>.
RunRecord run_theorem(const corpus::TheoremEntry& theorem, const PipelineConfig& config, Ports& ports,
                      const std::filesystem::path& runs_root, const std::string& stamp);

}  // namespace tea::pipeline
