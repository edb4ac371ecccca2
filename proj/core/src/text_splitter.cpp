#include <deque>
#include <regex>

#include "tea/retrieval.hpp"
#include "tea/util.hpp"

namespace tea::retrieval {
namespace {

// Pieces of text cut before every separator match; the separator stays at
// the start of the following piece. Empty pieces are dropped.
std::vector<std::string> split_keep_start(std::string_view text, const std::string& separator) {
  std::vector<std::string> pieces;
  if (separator.empty()) {
    for (char c : text) pieces.emplace_back(1, c);
    return pieces;
  }
  std::regex re(separator);
  std::size_t cut = 0;
  for (auto it = std::cregex_iterator(text.data(), text.data() + text.size(), re); it != std::cregex_iterator(); ++it) {
    auto pos = static_cast<std::size_t>(it->position());
    if (it->length() == 0) continue;
    if (pos > cut) pieces.emplace_back(text.substr(cut, pos - cut));
    cut = pos;
  }
  if (cut < text.size()) pieces.emplace_back(text.substr(cut));
  return pieces;
}

bool contains_match(std::string_view text, const std::string& separator) {
  std::regex re(separator);
  return std::regex_search(text.begin(), text.end(), re);
}

}  // namespace

DocLanguage language_for(const std::filesystem::path& path) {
  auto ext = util::to_lower(path.extension().string());
  if (ext == ".py") return DocLanguage::kPython;
  if (ext == ".md" || ext == ".markdown") return DocLanguage::kMarkdown;
  return DocLanguage::kPlain;
}

std::vector<std::string> separators_for(DocLanguage language) {
  switch (language) {
    case DocLanguage::kPython:
      return {"\nclass ", "\ndef ", "\n\tdef ", "\n\n", "\n", " ", ""};
    case DocLanguage::kMarkdown:
      return {"\n#{1,6} ", "```\n", "\n\\*\\*\\*+\n", "\n---+\n", "\n___+\n", "\n\n", "\n", " ", ""};
    case DocLanguage::kPlain:
      break;
  }
  return {"\n\n", "\n", " ", ""};
}

RecursiveTextSplitter::RecursiveTextSplitter(SplitterConfig config, std::vector<std::string> separators)
    : config_(config), separators_(std::move(separators)) {
  if (config_.chunk_size == 0 || config_.chunk_overlap >= config_.chunk_size) {
    throw std::invalid_argument("chunk overlap must be smaller than a positive chunk size");
  }
  if (separators_.empty()) separators_.emplace_back();
}

RecursiveTextSplitter::RecursiveTextSplitter(DocLanguage language, SplitterConfig config)
    : RecursiveTextSplitter(config, separators_for(language)) {}

std::vector<std::string> RecursiveTextSplitter::split(std::string_view text) const {
  return split_recursive(text, separators_);
}

std::vector<std::string> RecursiveTextSplitter::split_recursive(std::string_view text,
                                                                std::span<const std::string> separators) const {
  std::string separator = separators.back();
  std::span<const std::string> finer;
  for (std::size_t i = 0; i < separators.size(); ++i) {
    if (separators[i].empty()) {
      separator.clear();
      break;
    }
    if (contains_match(text, separators[i])) {
      separator = separators[i];
      finer = separators.subspan(i + 1);
      break;
    }
  }

  std::vector<std::string> chunks;
  std::vector<std::string> small;
  auto flush = [&] {
    if (small.empty()) return;
    auto merged = merge(small);
    chunks.insert(chunks.end(), merged.begin(), merged.end());
    small.clear();
  };
  for (auto& piece : split_keep_start(text, separator)) {
    if (piece.size() < config_.chunk_size) {
      small.push_back(std::move(piece));
      continue;
    }
    flush();
    if (finer.empty()) {
      chunks.push_back(std::move(piece));
    } else {
      auto sub = split_recursive(piece, finer);
      chunks.insert(chunks.end(), sub.begin(), sub.end());
    }
  }
  flush();
  return chunks;
}

std::vector<std::string> RecursiveTextSplitter::merge(std::span<const std::string> pieces) const {
  std::vector<std::string> docs;
  std::deque<std::string_view> window;
  std::size_t total = 0;
  auto emit = [&] {
    std::string joined;
    for (auto p : window) joined += p;
    joined = util::trim(joined);
    if (!joined.empty()) docs.push_back(std::move(joined));
  };
  for (const auto& piece : pieces) {
    if (total + piece.size() > config_.chunk_size && !window.empty()) {
      emit();
      while (total > config_.chunk_overlap ||
             (total > 0 && total + piece.size() > config_.chunk_size)) {
        total -= window.front().size();
        window.pop_front();
      }
    }
    window.push_back(piece);
    total += piece.size();
  }
  if (!window.empty()) emit();
  return docs;
}

}  // namespace tea::retrieval
