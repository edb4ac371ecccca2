#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "tea/error.hpp"
#include "tea/evaluator.hpp"
#include "tea/gateway.hpp"
#include "tea/pipeline.hpp"
#include "tea/retrieval.hpp"

namespace tea::config {

class ConfigError : public Error {
 public:
  using Error::Error;
};

struct EmbeddingSettings {
  std::string kind = "hashing";  // hashing | http
  std::size_t dimension = 256;
  retrieval::HttpEmbedderConfig http;
};

struct RetrievalSettings {
  retrieval::RetrievalConfig retrieval;
  retrieval::SplitterConfig splitter;
  std::size_t max_queries = 5;
  std::vector<std::string> plugin_catalog;
  std::filesystem::path plugin_probe;
};

struct TtsSettings {
  std::string kind = "silent";  // silent | http
  pipeline::HttpTtsConfig http;
};

struct PipelineSettings {
  std::string model_id = "openai/gpt-4o";
  double temperature = 0.7;
  int max_fixes = 5;
  int max_scenes = 8;
  int parallelism = 4;
  std::size_t stderr_limit = 8000;
  bool rag = false;
  bool rag_every_fix = true;
  pipeline::SubprocessExecutorConfig renderer;
  std::vector<std::string> pinned_packages;
  std::string media_tool = "auto";
  TtsSettings tts;
  double stub_clip_s = 3.0;
  int stub_failure_per_mille = 400;
};

struct Paths {
  std::filesystem::path corpus;
  std::filesystem::path prompts;
  std::filesystem::path runs;
  std::filesystem::path index;
  std::filesystem::path error_patterns;
};

struct ReportSettings {
  std::vector<int> budgets = {0, 1, 2, 3, 4, 5};
  std::map<std::string, std::string> reference_costs;
};

struct AppConfig {
  gateway::GatewayConfig gateway;
  EmbeddingSettings embedding;
  RetrievalSettings retrieval;
  PipelineSettings pipeline;
  evaluator::EvaluatorConfig evaluator;
  Paths paths;
  ReportSettings report;

  pipeline::PipelineConfig pipeline_config() const;
};

// Applies TEA_<SECTION>__<KEY>[__<KEY>...] variables. Keys are lowercased;
// values are parsed as JSON and kept as strings when that fails.
void apply_env_overrides(nlohmann::json& doc, const std::vector<std::pair<std::string, std::string>>& env);
std::vector<std::pair<std::string, std::string>> process_env();

// Shipped defaults, merged with the user file (JSON merge patch) and then
// the environment. Relative asset paths (corpus, prompts, error patterns,
// mock fixtures) resolve against the data directory; runs, index and the
// plugin probe resolve against the working directory.
nlohmann::json load_document(const std::optional<std::filesystem::path>& user_file,
                             const std::vector<std::pair<std::string, std::string>>& env);
AppConfig from_json(const nlohmann::json& doc, const std::filesystem::path& data_root);
AppConfig load(const std::optional<std::filesystem::path>& user_file = std::nullopt);

}  // namespace tea::config
