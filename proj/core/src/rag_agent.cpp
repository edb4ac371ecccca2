#include <algorithm>
#include <regex>
#include <set>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "tea/retrieval.hpp"
#include "tea/util.hpp"

namespace tea::retrieval {
namespace {

std::string strip_item(std::string s) {
  s = util::trim(s);
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'' || s.front() == '`') && s.back() == s.front()) {
    s = util::trim(std::string_view(s).substr(1, s.size() - 2));
  }
  return s;
}

std::string_view prompt_for(QueryStage stage) {
  switch (stage) {
    case QueryStage::kStoryboard: return "rag_query_storyboard";
    case QueryStage::kImplementation: return "rag_query_implementation";
    case QueryStage::kErrorFix: return "rag_query_error_fix";
  }
  return "rag_query_implementation";
}

}  // namespace

std::vector<std::string> parse_plugin_answer(std::string_view text, std::span<const std::string> catalog) {
  std::vector<std::string> named;
  auto open = text.find('{');
  auto close = text.rfind('}');
  bool parsed = false;
  if (open != std::string_view::npos && close != std::string_view::npos && close > open) {
    try {
      auto j = nlohmann::json::parse(text.substr(open, close - open + 1));
      if (j.contains("plugins") && j["plugins"].is_array()) {
        for (const auto& p : j["plugins"]) {
          if (p.is_string()) named.push_back(util::trim(p.get<std::string>()));
        }
        parsed = true;
      }
    } catch (const nlohmann::json::exception&) {
    }
  }
  if (!parsed) {
    // Free text: accept catalog names in the order they appear.
    std::vector<std::pair<std::size_t, std::string>> hits;
    std::string lower = util::to_lower(text);
    for (const auto& c : catalog) {
      auto pos = lower.find(util::to_lower(c));
      if (pos != std::string::npos) hits.emplace_back(pos, c);
    }
    std::sort(hits.begin(), hits.end());
    for (auto& h : hits) named.push_back(h.second);
  }
  std::vector<std::string> out;
  for (const auto& n : named) {
    auto it = std::find_if(catalog.begin(), catalog.end(), [&](const std::string& c) { return util::iequals(c, n); });
    if (it == catalog.end()) {
      spdlog::debug("ignoring plugin outside the catalog: {}", n);
      continue;
    }
    if (std::find(out.begin(), out.end(), *it) == out.end()) out.push_back(*it);
  }
  return out;
}

std::vector<std::string> parse_query_list(std::string_view text, std::size_t max_queries) {
  std::vector<std::string> out;
  auto push = [&](std::string q) {
    q = strip_item(std::move(q));
    if (!q.empty() && out.size() < max_queries && std::find(out.begin(), out.end(), q) == out.end()) {
      out.push_back(std::move(q));
    }
  };

  auto open = text.find('[');
  auto close = text.rfind(']');
  if (open != std::string_view::npos && close != std::string_view::npos && close > open) {
    try {
      auto j = nlohmann::json::parse(text.substr(open, close - open + 1));
      if (j.is_array()) {
        for (const auto& q : j) {
          if (q.is_string()) push(q.get<std::string>());
        }
        if (!out.empty()) return out;
      }
    } catch (const nlohmann::json::exception&) {
    }
  }

  static const std::regex kItem(R"(^\s*(?:\d+\s*[.):]|[-*+•])\s+(.+?)\s*$)");
  for (const auto& line : util::split_lines(text)) {
    std::smatch m;
    if (std::regex_match(line, m, kItem)) push(m[1].str());
  }
  if (out.empty()) throw QueryParseError(std::string(text));
  return out;
}

std::vector<std::string> effective_catalog(std::span<const std::string> catalog,
                                           const std::filesystem::path& probe_file) {
  if (probe_file.empty() || !std::filesystem::exists(probe_file)) {
    return {catalog.begin(), catalog.end()};
  }
  auto j = nlohmann::json::parse(util::read_file(probe_file));
  std::set<std::string, std::less<>> installed;
  auto collect = [&](const nlohmann::json& arr) {
    for (const auto& p : arr) {
      if (p.is_string()) installed.insert(p.get<std::string>());
    }
  };
  if (j.is_array()) {
    collect(j);
  } else if (j.is_object()) {
    if (j.contains("installed") && j["installed"].is_array()) {
      collect(j["installed"]);
    } else {
      for (const auto& [name, value] : j.items()) {
        if (value.is_boolean() ? value.get<bool>() : !value.is_null()) installed.insert(name);
      }
    }
  } else {
    throw std::invalid_argument("plugin probe file must hold a JSON array or object");
  }
  std::vector<std::string> out;
  for (const auto& c : catalog) {
    if (installed.contains(c)) out.push_back(c);
  }
  return out;
}

RagAgent::RagAgent(gateway::ChatClient& client, const PromptLibrary& prompts, RagAgentConfig config)
    : client_(client), prompts_(prompts), config_(std::move(config)) {}

std::vector<std::string> RagAgent::classify_plugins(const corpus::TheoremEntry& theorem) const {
  if (config_.plugin_catalog.empty()) return {};
  std::string catalog;
  for (const auto& p : config_.plugin_catalog) catalog += "- " + p + "\n";
  auto prompt = prompts_.render("plugin_classify", {{"topic", theorem.name},
                                                    {"description", theorem.description},
                                                    {"catalog", util::trim(catalog)}});
  gateway::ChatRequest req;
  req.model_id = config_.model_id;
  req.system = prompt.system;
  req.user = prompt.user;
  req.temperature = config_.temperature;
  req.max_output_tokens = config_.max_output_tokens;
  req.tag = gateway::Tag::kQuery;
  return parse_plugin_answer(client_.complete(req).text, config_.plugin_catalog);
}

std::vector<std::string> RagAgent::generate_queries(QueryStage stage, std::string_view context) const {
  auto prompt = prompts_.render(prompt_for(stage), {{"context", std::string(context)},
                                                    {"max_queries", std::to_string(config_.max_queries)}});
  gateway::ChatRequest req;
  req.model_id = config_.model_id;
  req.system = prompt.system;
  req.user = prompt.user;
  req.temperature = config_.temperature;
  req.max_output_tokens = config_.max_output_tokens;
  req.tag = gateway::Tag::kQuery;
  return parse_query_list(client_.complete(req).text, config_.max_queries);
}

}  // namespace tea::retrieval
