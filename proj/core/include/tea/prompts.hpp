#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tea/error.hpp"

namespace tea {

using Bindings = std::vector<std::pair<std::string, std::string>>;

struct PromptTemplate {
  std::string name;
  std::string version;
  std::string system;
  std::string user;
};

struct RenderedPrompt {
  std::string system;
  std::string user;
};

class PromptError : public Error {
 public:
  using Error::Error;
};

// Parses one template asset: optional "# tea prompt: <name> <version>" header,
// then "[system]" and "[user]" sections.
PromptTemplate parse_prompt(std::string_view text, std::string name = {});

// Text assets loaded from a prompts/ directory, one <name>.txt per template.
class PromptLibrary {
 public:
  static PromptLibrary load(const std::filesystem::path& dir);

  const PromptTemplate& get(std::string_view name) const;
  RenderedPrompt render(std::string_view name, const Bindings& bindings) const;
  bool contains(std::string_view name) const;

 private:
  std::map<std::string, PromptTemplate, std::less<>> templates_;
};

// Root of the shipped assets (prompts/, config/, corpus/). TEA_DATA_DIR in
// the environment wins over the compiled-in location.
std::filesystem::path data_dir();

}  // namespace tea
