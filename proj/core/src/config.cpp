#include "tea/config.hpp"

#include <fmt/format.h>

#include "tea/util.hpp"

extern char** environ;

namespace tea::config {
namespace {

using nlohmann::json;

std::filesystem::path under(const std::filesystem::path& root, const std::string& p) {
  if (p.empty()) return {};
  std::filesystem::path path(p);
  return path.is_absolute() ? path : root / path;
}

template <typename T>
T get(const json& section, const char* key, T fallback) {
  if (!section.contains(key)) return fallback;
  try {
    return section.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("config key '{}': {}", key, e.what()));
  }
}

}  // namespace

pipeline::PipelineConfig AppConfig::pipeline_config() const {
  pipeline::PipelineConfig c;
  c.model_id = pipeline.model_id;
  c.temperature = pipeline.temperature;
  c.max_fixes = pipeline.max_fixes;
  c.max_scenes = pipeline.max_scenes;
  c.parallelism = pipeline.parallelism;
  c.stderr_limit = pipeline.stderr_limit;
  c.rag = pipeline.rag;
  c.rag_every_fix = pipeline.rag_every_fix;
  c.max_queries = retrieval.max_queries;
  c.retrieval = retrieval.retrieval;
  c.plugin_catalog = retrieval.plugin_catalog;
  c.plugin_probe = retrieval.plugin_probe;
  return c;
}

void apply_env_overrides(json& doc, const std::vector<std::pair<std::string, std::string>>& env) {
  constexpr std::string_view kPrefix = "TEA_";
  for (const auto& [name, value] : env) {
    if (name.rfind(kPrefix, 0) != 0 || name.find("__") == std::string::npos) continue;
    std::vector<std::string> keys;
    std::string_view rest = std::string_view(name).substr(kPrefix.size());
    while (true) {
      auto cut = rest.find("__");
      keys.push_back(util::to_lower(rest.substr(0, cut)));
      if (cut == std::string_view::npos) break;
      rest = rest.substr(cut + 2);
    }
    json* node = &doc;
    for (std::size_t i = 0; i + 1 < keys.size(); ++i) {
      if (!node->contains(keys[i]) || !(*node)[keys[i]].is_object()) (*node)[keys[i]] = json::object();
      node = &(*node)[keys[i]];
    }
    json parsed = json::parse(value, nullptr, false);
    (*node)[keys.back()] = parsed.is_discarded() ? json(value) : parsed;
  }
}

std::vector<std::pair<std::string, std::string>> process_env() {
  std::vector<std::pair<std::string, std::string>> out;
  for (char** e = environ; *e != nullptr; ++e) {
    std::string_view entry(*e);
    auto eq = entry.find('=');
    if (eq == std::string_view::npos) continue;
    out.emplace_back(entry.substr(0, eq), entry.substr(eq + 1));
  }
  return out;
}

json load_document(const std::optional<std::filesystem::path>& user_file,
                   const std::vector<std::pair<std::string, std::string>>& env) {
  auto defaults = data_dir() / "config" / "default.json";
  json doc;
  try {
    doc = json::parse(util::read_file(defaults));
  } catch (const std::exception& e) {
    throw ConfigError(fmt::format("cannot read default config {}: {}", defaults.string(), e.what()));
  }
  if (user_file) {
    try {
      doc.merge_patch(json::parse(util::read_file(*user_file)));
    } catch (const std::exception& e) {
      throw ConfigError(fmt::format("cannot read config {}: {}", user_file->string(), e.what()));
    }
  }
  apply_env_overrides(doc, env);
  return doc;
}

AppConfig from_json(const json& doc, const std::filesystem::path& data_root) {
  AppConfig c;
  const json empty = json::object();
  auto section = [&](const char* name) -> const json& { return doc.contains(name) ? doc.at(name) : empty; };

  try {
    c.gateway = gateway::gateway_config_from_json(section("gateway"));
  } catch (const std::exception& e) {
    throw ConfigError(std::string("gateway section: ") + e.what());
  }
  c.gateway.mock_dir = under(data_root, c.gateway.mock_dir.string());

  const auto& emb = section("embedding");
  c.embedding.kind = get<std::string>(emb, "kind", c.embedding.kind);
  c.embedding.dimension = get<std::size_t>(emb, "dimension", c.embedding.dimension);
  c.embedding.http.base_url = get<std::string>(emb, "base_url", "");
  c.embedding.http.api_key_env = get<std::string>(emb, "api_key_env", "");
  c.embedding.http.model = get<std::string>(emb, "model", c.embedding.http.model);
  c.embedding.http.dimension = get<std::size_t>(emb, "remote_dimension", c.embedding.http.dimension);

  const auto& ret = section("retrieval");
  c.retrieval.retrieval.k = get<std::size_t>(ret, "k", 2);
  c.retrieval.retrieval.threshold = get<double>(ret, "threshold", 0.5);
  c.retrieval.splitter.chunk_size = get<std::size_t>(ret, "chunk_size", 1000);
  c.retrieval.splitter.chunk_overlap = get<std::size_t>(ret, "chunk_overlap", 100);
  c.retrieval.max_queries = get<std::size_t>(ret, "max_queries", 5);
  c.retrieval.plugin_catalog = get<std::vector<std::string>>(ret, "plugin_catalog", {});
  c.retrieval.plugin_probe = get<std::string>(ret, "plugin_probe", "");
  try {
    c.retrieval.retrieval.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  const auto& pip = section("pipeline");
  auto& p = c.pipeline;
  p.model_id = get<std::string>(pip, "model", p.model_id);
  p.temperature = get<double>(pip, "temperature", p.temperature);
  p.max_fixes = get<int>(pip, "max_fixes", p.max_fixes);
  p.max_scenes = get<int>(pip, "max_scenes", p.max_scenes);
  p.parallelism = get<int>(pip, "parallelism", p.parallelism);
  p.renderer.timeout_s = get<int>(pip, "timeout_s", p.renderer.timeout_s);
  p.stderr_limit = get<std::size_t>(pip, "stderr_limit", p.stderr_limit);
  p.rag = get<bool>(pip, "rag", p.rag);
  p.rag_every_fix = get<bool>(pip, "rag_every_fix", p.rag_every_fix);
  p.renderer.command = get<std::vector<std::string>>(pip, "renderer_command", p.renderer.command);
  p.pinned_packages = get<std::vector<std::string>>(pip, "renderer_pinned_packages", {});
  p.media_tool = get<std::string>(pip, "media_tool", p.media_tool);
  p.stub_clip_s = get<double>(pip, "stub_clip_s", p.stub_clip_s);
  p.stub_failure_per_mille = get<int>(pip, "stub_failure_per_mille", p.stub_failure_per_mille);
  if (pip.contains("tts")) {
    const auto& tts = pip.at("tts");
    p.tts.kind = get<std::string>(tts, "kind", p.tts.kind);
    p.tts.http.base_url = get<std::string>(tts, "base_url", "");
    p.tts.http.api_key_env = get<std::string>(tts, "api_key_env", "");
    p.tts.http.model = get<std::string>(tts, "model", p.tts.http.model);
    p.tts.http.voice = get<std::string>(tts, "voice", p.tts.http.voice);
  }
  if (p.max_fixes < 0) throw ConfigError("pipeline.max_fixes must be non-negative");
  if (p.max_scenes < 1) throw ConfigError("pipeline.max_scenes must be at least 1");

  const auto& ev = section("evaluator");
  auto& e = c.evaluator;
  e.judge_model = get<std::string>(ev, "judge_model", e.judge_model);
  e.consistency_judge_model = get<std::string>(ev, "consistency_judge_model", "");
  e.keyframes.fps = get<double>(ev, "fps", e.keyframes.fps);
  e.keyframes.tau = get<double>(ev, "tau", e.keyframes.tau);
  e.keyframes.cap = get<std::size_t>(ev, "cap", e.keyframes.cap);
  e.chunk_s = get<double>(ev, "chunk_s", e.chunk_s);
  e.frames_per_chunk = get<std::size_t>(ev, "frames_per_chunk", e.frames_per_chunk);
  e.parallelism = get<int>(ev, "parallelism", e.parallelism);

  const auto& paths = section("paths");
  c.paths.corpus = under(data_root, get<std::string>(paths, "corpus", "corpus/sample_corpus.json"));
  c.paths.prompts = under(data_root, get<std::string>(paths, "prompts", "prompts"));
  c.paths.error_patterns = under(data_root, get<std::string>(paths, "error_patterns", "config/error_patterns.json"));
  c.paths.runs = get<std::string>(paths, "runs", "runs");
  c.paths.index = get<std::string>(paths, "index", "index");

  const auto& rep = section("report");
  c.report.budgets = get<std::vector<int>>(rep, "budgets", c.report.budgets);
  c.report.reference_costs = get<std::map<std::string, std::string>>(rep, "reference_costs", {});
  return c;
}

AppConfig load(const std::optional<std::filesystem::path>& user_file) {
  return from_json(load_document(user_file, process_env()), data_dir());
}

}  // namespace tea::config
