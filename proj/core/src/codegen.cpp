#include "tea/codegen.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "tea/util.hpp"

namespace tea::codegen {
namespace {

using nlohmann::json;

std::regex compile(const std::string& pattern, bool icase) {
  auto flags = std::regex::ECMAScript | std::regex::optimize;
  if (icase) flags |= std::regex::icase;
  return std::regex(pattern, flags);
}

}  // namespace

std::string_view to_string(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::kApiHallucination: return "api_hallucination";
    case ErrorCategory::kLatexRendering: return "latex_rendering";
    case ErrorCategory::kGeneralCoding: return "general_coding";
    case ErrorCategory::kUnknown: return "unknown";
  }
  return "unknown";
}

std::optional<ErrorCategory> parse_category(std::string_view s) {
  for (auto c : {ErrorCategory::kApiHallucination, ErrorCategory::kLatexRendering, ErrorCategory::kGeneralCoding,
                 ErrorCategory::kUnknown}) {
    if (to_string(c) == s) return c;
  }
  return std::nullopt;
}

std::string_view to_string(SceneStatus status) { return status == SceneStatus::kSucceeded ? "succeeded" : "failed"; }

ErrorClassifier::ErrorClassifier(std::vector<Row> rows) : rows_(std::move(rows)) {
  compiled_.reserve(rows_.size());
  for (const auto& r : rows_) {
    try {
      compiled_.push_back(compile(r.pattern, r.icase));
    } catch (const std::regex_error& e) {
      throw std::invalid_argument(fmt::format("bad error pattern '{}': {}", r.pattern, e.what()));
    }
  }
}

const ErrorClassifier& ErrorClassifier::builtin() {
  using C = ErrorCategory;
  static const ErrorClassifier table({
      {C::kLatexRendering, R"(latex error)", true},
      {C::kLatexRendering, R"(undefined control sequence)", true},
      {C::kLatexRendering, R"(missing \$ inserted)", true},
      {C::kLatexRendering, R"(dvisvgm)", true},
      {C::kLatexRendering, R"(\.tex\b)", false},
      {C::kLatexRendering, R"(\bpdflatex\b|\blatex\b.*not found)", true},
      {C::kApiHallucination, R"(AttributeError|has no attribute)", false},
      {C::kApiHallucination, R"(NameError: name '[A-Z][a-z]+[A-Za-z0-9_]*' is not defined)", false},
      {C::kApiHallucination, R"(ModuleNotFoundError|No module named)", false},
      {C::kApiHallucination, R"(cannot import name)", false},
      {C::kApiHallucination, R"(unexpected keyword argument|got multiple values for argument)", false},
      {C::kApiHallucination, R"(takes (from \d+ to )?\d+ positional arguments? but \d+ (were|was) given)", false},
      {C::kApiHallucination, R"(missing \d+ required (positional|keyword-only) arguments?)", false},
      {C::kApiHallucination, R"(FileNotFoundError)", false},
      {C::kGeneralCoding, R"(\b(NameError|UnboundLocalError|ImportError|SyntaxError|IndentationError|TabError)\b)",
       false},
      {C::kGeneralCoding,
       R"(\b(ZeroDivisionError|IndexError|KeyError|ValueError|TypeError|RecursionError|AssertionError|OverflowError|RuntimeError)\b)",
       false},
      {C::kGeneralCoding, R"(LinAlgError|numpy\.core|broadcast)", false},
  });
  return table;
}

ErrorClassifier ErrorClassifier::from_json(const json& j) {
  if (!j.is_array()) throw std::invalid_argument("error pattern table must be a JSON array");
  std::vector<Row> rows;
  for (const auto& item : j) {
    auto name = item.at("category").get<std::string>();
    auto category = parse_category(name);
    if (!category) throw std::invalid_argument("unknown error category: " + name);
    rows.push_back({*category, item.at("regex").get<std::string>(), item.value("icase", false)});
  }
  return ErrorClassifier(std::move(rows));
}

ErrorClassifier ErrorClassifier::load(const std::filesystem::path& path) {
  return from_json(json::parse(util::read_file(path)));
}

ErrorCategory ErrorClassifier::classify(std::string_view stderr_text) const {
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    if (std::regex_search(stderr_text.begin(), stderr_text.end(), compiled_[i])) return rows_[i].category;
  }
  return ErrorCategory::kUnknown;
}

ErrorCategory classify_error(std::string_view stderr_text) { return ErrorClassifier::builtin().classify(stderr_text); }

ExtractedCode extract_code_block(std::string_view text) {
  ExtractedCode out;
  std::optional<std::string> python;
  std::optional<std::string> untagged;
  std::size_t untagged_count = 0;
  auto lines = util::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string open = util::trim(lines[i]);
    if (open.rfind("```", 0) != 0) continue;
    std::string lang = util::to_lower(util::trim(std::string_view(open).substr(3)));
    std::string body;
    std::size_t j = i + 1;
    for (; j < lines.size(); ++j) {
      if (util::trim(lines[j]).rfind("```", 0) == 0) break;
      body += lines[j];
      body += '\n';
    }
    if (lang == "python" || lang == "py" || lang == "python3") {
      ++out.block_count;
      if (!python) python = std::move(body);
    } else if (lang.empty()) {
      ++untagged_count;
      if (!untagged) untagged = std::move(body);
    }
    i = j;
  }
  if (python) {
    out.code = std::move(*python);
  } else if (untagged_count == 1) {
    out.code = std::move(*untagged);
    out.block_count = 1;
  } else {
    throw NoCodeBlock(std::string(text));
  }
  if (util::trim(out.code).empty()) throw NoCodeBlock(std::string(text));
  return out;
}

std::string truncate_stderr(std::string_view stderr_text, std::size_t max_chars) {
  if (stderr_text.size() <= max_chars) return std::string(stderr_text);
  return std::string(stderr_text.substr(stderr_text.size() - max_chars));
}

std::string scene_class_name(std::size_t scene_index) { return fmt::format("Scene{}", scene_index + 1); }

std::string timing_sidecar_name(std::size_t scene_index) { return fmt::format("scene_{}.timing.jsonl", scene_index); }

// ---------------------------------------------------------------------------

CodeGenerator::CodeGenerator(gateway::ChatClient& client, const PromptLibrary& prompts, CodegenConfig config)
    : client_(client), prompts_(prompts), config_(std::move(config)) {
  if (config_.max_fixes < 0) throw std::invalid_argument("max_fixes must be non-negative");
}

std::string CodeGenerator::extract(const std::string& text) const {
  auto code = extract_code_block(text);
  if (code.block_count > 1) spdlog::debug("response held {} python blocks, using the first", code.block_count);
  return std::move(code.code);
}

std::string CodeGenerator::generate_scene_code(std::string_view topic, const std::string& scene_class,
                                               std::string_view implementation_plan, std::string_view context) const {
  auto prompt = prompts_.render("code_generation", {{"topic", std::string(topic)},
                                                    {"scene_class", scene_class},
                                                    {"implementation_plan", std::string(implementation_plan)},
                                                    {"context", std::string(context)}});
  gateway::ChatRequest req{config_.model_id, prompt.system, prompt.user, config_.temperature,
                           config_.max_output_tokens, gateway::Tag::kCodegen, {}};
  return extract(client_.complete(req).text);
}

std::string CodeGenerator::fix_code(std::string_view implementation_plan, std::string_view code,
                                    std::string_view error, std::string_view context) const {
  auto prompt = prompts_.render("code_fix", {{"implementation_plan", std::string(implementation_plan)},
                                             {"code", std::string(code)},
                                             {"error", truncate_stderr(error, config_.stderr_limit)},
                                             {"context", std::string(context)}});
  gateway::ChatRequest req{config_.model_id, prompt.system, prompt.user, config_.temperature,
                           config_.max_output_tokens, gateway::Tag::kFix, {}};
  return extract(client_.complete(req).text);
}

SceneResult run_scene_loop(const CodeGenerator& generator, ScriptExecutor& executor, const SceneJob& job,
                           const ContextProvider& context, const ErrorClassifier& classifier) {
  const auto& cfg = generator.config();
  SceneResult result;
  result.index = job.index;
  result.scene_class = scene_class_name(job.index);
  std::filesystem::create_directories(job.scene_dir);

  std::string code;
  std::string last_error;
  std::string log;
  for (int attempt = 0; attempt <= cfg.max_fixes; ++attempt) {
    CodeArtifact art;
    art.scene_index = job.index;
    art.attempt = attempt;
    std::string ctx;
    if (context) {
      if (attempt == 0) {
        ctx = context("implementation", job.implementation_plan);
      } else if (attempt == 1 || cfg.rag_every_fix) {
        ctx = context("error_fix", last_error);
      }
      art.rag_used = !ctx.empty();
    }

    bool have_code = true;
    try {
      code = attempt == 0 ? generator.generate_scene_code(job.topic, result.scene_class, job.implementation_plan, ctx)
                          : generator.fix_code(job.implementation_plan, code, last_error, ctx);
    } catch (const NoCodeBlock& e) {
      have_code = false;
      art.error_text = e.what();
      art.error_category = ErrorCategory::kUnknown;
    }
    art.code = code;
    art.script_path = job.scene_dir / fmt::format("attempt_{}.py", attempt);
    util::write_file(art.script_path, code);

    if (have_code) {
      auto outcome = executor.execute(art.script_path, result.scene_class, job.index, job.scene_dir / "media");
      art.ok = outcome.ok;
      art.timed_out = outcome.timed_out;
      if (outcome.ok) {
        result.status = SceneStatus::kSucceeded;
        result.media = outcome.media;
        result.clip_duration_s = outcome.duration_s;
      } else {
        std::string err = outcome.stderr_text.empty() ? std::string("no output produced") : outcome.stderr_text;
        if (outcome.timed_out) err += "\nrender timed out";
        art.error_text = truncate_stderr(err, cfg.stderr_limit);
        art.error_category = classifier.classify(art.error_text);
      }
    }
    log += fmt::format("=== attempt {} ({})\n{}\n", attempt, art.ok ? "ok" : "failed", art.error_text);
    last_error = art.error_text;
    result.attempts.push_back(std::move(art));
    if (result.status == SceneStatus::kSucceeded) break;
  }
  util::write_file(job.scene_dir / "render.log", log);
  spdlog::info("scene {} {} after {} attempt(s)", job.index + 1, to_string(result.status), result.attempts.size());
  return result;
}

json to_json(const CodeArtifact& a) {
  json j = {{"scene_index", a.scene_index}, {"attempt", a.attempt},        {"script_path", a.script_path.string()},
            {"ok", a.ok},                   {"error_text", a.error_text}, {"rag_used", a.rag_used},
            {"timed_out", a.timed_out}};
  j["error_category"] = a.error_category ? json(to_string(*a.error_category)) : json(nullptr);
  return j;
}

json to_json(const SceneResult& r) {
  json attempts = json::array();
  for (const auto& a : r.attempts) attempts.push_back(to_json(a));
  return {{"index", r.index},
          {"scene_class", r.scene_class},
          {"status", to_string(r.status)},
          {"attempts", attempts},
          {"media", r.media.string()},
          {"clip_duration_s", r.clip_duration_s},
          {"error", r.error}};
}

SceneResult scene_result_from_json(const json& j) {
  SceneResult r;
  r.index = j.at("index").get<std::size_t>();
  r.scene_class = j.value("scene_class", scene_class_name(r.index));
  r.status = j.at("status").get<std::string>() == "succeeded" ? SceneStatus::kSucceeded : SceneStatus::kFailed;
  r.media = j.value("media", "");
  r.clip_duration_s = j.value("clip_duration_s", 0.0);
  r.error = j.value("error", "");
  for (const auto& a : j.at("attempts")) {
    CodeArtifact art;
    art.scene_index = a.at("scene_index").get<std::size_t>();
    art.attempt = a.at("attempt").get<int>();
    art.script_path = a.value("script_path", "");
    art.ok = a.value("ok", false);
    art.error_text = a.value("error_text", "");
    art.rag_used = a.value("rag_used", false);
    art.timed_out = a.value("timed_out", false);
    if (a.contains("error_category") && a["error_category"].is_string()) {
      art.error_category = parse_category(a["error_category"].get<std::string>());
    }
    r.attempts.push_back(std::move(art));
  }
  return r;
}

}  // namespace tea::codegen
