#include "tea/prompts.hpp"

#include <cstdlib>

#include "tea/util.hpp"

#ifndef TEA_DEFAULT_DATA_DIR
#define TEA_DEFAULT_DATA_DIR "data"
#endif

namespace tea {

PromptTemplate parse_prompt(std::string_view text, std::string name) {
  PromptTemplate t;
  t.name = std::move(name);
  enum class Section { kHeader, kSystem, kUser } section = Section::kHeader;
  std::string* target = nullptr;
  for (const auto& line : util::split_lines(text)) {
    if (section == Section::kHeader && line.rfind("# tea prompt:", 0) == 0) {
      auto words = util::split_words(line.substr(13));
      if (!words.empty() && t.name.empty()) t.name = words[0];
      if (words.size() > 1) t.version = words[1];
      continue;
    }
    if (line == "[system]") {
      section = Section::kSystem;
      target = &t.system;
      continue;
    }
    if (line == "[user]") {
      section = Section::kUser;
      target = &t.user;
      continue;
    }
    if (target == nullptr) {
      if (util::trim(line).empty() || line.rfind('#', 0) == 0) continue;
      throw PromptError("prompt " + t.name + ": text before [system]/[user] section");
    }
    *target += line;
    *target += '\n';
  }
  if (section != Section::kUser) throw PromptError("prompt " + t.name + ": missing [user] section");
  // Trailing newline of the last line belongs to the file, not the prompt.
  if (!t.system.empty()) t.system.pop_back();
  if (!t.user.empty()) t.user.pop_back();
  return t;
}

PromptLibrary PromptLibrary::load(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw PromptError("prompt directory not found: " + dir.string());
  PromptLibrary lib;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
    auto name = entry.path().stem().string();
    lib.templates_[name] = parse_prompt(util::read_file(entry.path()), name);
  }
  return lib;
}

const PromptTemplate& PromptLibrary::get(std::string_view name) const {
  auto it = templates_.find(name);
  if (it == templates_.end()) throw PromptError("missing prompt template: " + std::string(name));
  return it->second;
}

bool PromptLibrary::contains(std::string_view name) const { return templates_.contains(name); }

RenderedPrompt PromptLibrary::render(std::string_view name, const Bindings& bindings) const {
  const auto& t = get(name);
  try {
    return {util::render_template(t.system, bindings), util::render_template(t.user, bindings)};
  } catch (const std::invalid_argument& e) {
    throw PromptError("prompt " + std::string(name) + ": " + e.what());
  }
}

std::filesystem::path data_dir() {
  if (const char* env = std::getenv("TEA_DATA_DIR"); env != nullptr && *env != '\0') return env;
  return TEA_DEFAULT_DATA_DIR;
}

}  // namespace tea
