#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tea/error.hpp"
#include "tea/gateway.hpp"
#include "tea/prompts.hpp"

namespace tea::codegen {

enum class ErrorCategory { kApiHallucination, kLatexRendering, kGeneralCoding, kUnknown };

std::string_view to_string(ErrorCategory category);
std::optional<ErrorCategory> parse_category(std::string_view s);

// Ordered regex table; the first matching row decides the category.
class ErrorClassifier {
 public:
  struct Row {
    ErrorCategory category;
    std::string pattern;
    bool icase = false;
  };

  explicit ErrorClassifier(std::vector<Row> rows);
  static const ErrorClassifier& builtin();
  // Array of {"category", "regex", "icase"} objects.
  static ErrorClassifier from_json(const nlohmann::json& j);
  static ErrorClassifier load(const std::filesystem::path& path);

  ErrorCategory classify(std::string_view stderr_text) const;
  const std::vector<Row>& rows() const { return rows_; }

 private:
  std::vector<Row> rows_;
  std::vector<std::regex> compiled_;
};

ErrorCategory classify_error(std::string_view stderr_text);

class NoCodeBlock : public Error {
 public:
  explicit NoCodeBlock(std::string raw_text)
      : Error("response contains no python code block"), raw_text_(std::move(raw_text)) {}
  const std::string& raw_text() const { return raw_text_; }

 private:
  std::string raw_text_;
};

struct ExtractedCode {
  std::string code;
  std::size_t block_count = 0;
};

// First ```python (or ```py) fenced block. Falls back to a lone untagged
// fence. Throws NoCodeBlock otherwise.
ExtractedCode extract_code_block(std::string_view text);

// Keeps the last max_chars bytes, where tracebacks put the actual error.
std::string truncate_stderr(std::string_view stderr_text, std::size_t max_chars);

std::string scene_class_name(std::size_t scene_index);
std::string timing_sidecar_name(std::size_t scene_index);

// ---------------------------------------------------------------------------
// Execution port

struct RenderOutcome {
  bool ok = false;
  std::string stderr_text;
  std::filesystem::path media;  // rendered clip when ok
  double duration_s = 0.0;
  bool timed_out = false;
};

class RendererUnavailable : public Error {
 public:
  using Error::Error;
};

class ScriptExecutor {
 public:
  virtual ~ScriptExecutor() = default;
  // Runs script_path, rendering scene_class into out_dir. A narration timing
  // sidecar, when the script writes one, is expected at
  // out_dir/scene_<scene_index>.timing.jsonl.
  virtual RenderOutcome execute(const std::filesystem::path& script_path, const std::string& scene_class,
                                std::size_t scene_index, const std::filesystem::path& out_dir) = 0;
};

// ---------------------------------------------------------------------------
// Generation and repair

struct CodegenConfig {
  std::string model_id;
  double temperature = 0.7;
  int max_output_tokens = 8192;
  int max_fixes = 5;
  std::size_t stderr_limit = 8000;
  // Retrieve error-fix context before every repair rather than the first only.
  bool rag_every_fix = true;
};

// Supplies retrieved documentation for a prompt; empty when RAG is off.
// Arguments: stage name ("implementation" or "error_fix") and seed text.
using ContextProvider = std::function<std::string(std::string_view stage, std::string_view seed)>;

struct CodeArtifact {
  std::size_t scene_index = 0;
  int attempt = 0;
  std::string code;
  std::filesystem::path script_path;
  bool ok = false;
  std::optional<ErrorCategory> error_category;
  std::string error_text;  // truncated stderr
  bool rag_used = false;
  bool timed_out = false;
};

enum class SceneStatus { kSucceeded, kFailed };
std::string_view to_string(SceneStatus status);

struct SceneResult {
  std::size_t index = 0;
  std::string scene_class;
  SceneStatus status = SceneStatus::kFailed;
  std::vector<CodeArtifact> attempts;
  std::filesystem::path media;
  double clip_duration_s = 0.0;
  std::string error;  // set when a model call aborted the loop

  std::size_t fixes_used() const { return attempts.empty() ? 0 : attempts.size() - 1; }
};

class CodeGenerator {
 public:
  CodeGenerator(gateway::ChatClient& client, const PromptLibrary& prompts, CodegenConfig config);

  std::string generate_scene_code(std::string_view topic, const std::string& scene_class,
                                  std::string_view implementation_plan, std::string_view context) const;
  std::string fix_code(std::string_view implementation_plan, std::string_view code, std::string_view error,
                       std::string_view context) const;
  const CodegenConfig& config() const { return config_; }

 private:
  std::string extract(const std::string& text) const;

  gateway::ChatClient& client_;
  const PromptLibrary& prompts_;
  CodegenConfig config_;
};

struct SceneJob {
  std::size_t index = 0;
  std::string topic;
  std::string implementation_plan;
  std::filesystem::path scene_dir;  // receives attempt_<k>.py and render.log
};

// Generate, execute and repair until the scene renders or max_fixes repairs
// have been spent, so a scene has at most max_fixes + 1 attempts.
SceneResult run_scene_loop(const CodeGenerator& generator, ScriptExecutor& executor, const SceneJob& job,
                           const ContextProvider& context = {},
                           const ErrorClassifier& classifier = ErrorClassifier::builtin());

nlohmann::json to_json(const CodeArtifact& artifact);
nlohmann::json to_json(const SceneResult& result);
SceneResult scene_result_from_json(const nlohmann::json& j);

}  // namespace tea::codegen
