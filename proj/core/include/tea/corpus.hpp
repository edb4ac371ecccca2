#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tea/error.hpp"

namespace tea::corpus {

enum class Difficulty { kEasy, kMedium, kHard };
enum class Subject { kMathematics, kPhysics, kChemistry, kComputerScience };

inline constexpr Difficulty kAllDifficulties[] = {Difficulty::kEasy, Difficulty::kMedium,
                                                  Difficulty::kHard};
// Column order used by the result tables.
inline constexpr Subject kAllSubjects[] = {Subject::kMathematics, Subject::kPhysics,
                                           Subject::kComputerScience, Subject::kChemistry};

std::string_view to_string(Difficulty d);
std::string_view to_string(Subject s);
std::optional<Difficulty> parse_difficulty(std::string_view s);
std::optional<Subject> parse_subject(std::string_view s);

struct TheoremEntry {
  std::string id;
  std::string name;
  std::string description;
  Difficulty difficulty = Difficulty::kEasy;
  Subject subject = Subject::kMathematics;
  std::string subfield;

  bool operator==(const TheoremEntry&) const = default;
};

struct CorpusStats {
  std::size_t total = 0;
  std::map<Difficulty, std::size_t> per_difficulty;
  std::map<Subject, std::size_t> per_subject;
  std::size_t subfield_count = 0;

  bool operator==(const CorpusStats&) const = default;
};

class MissingFile : public Error {
 public:
  explicit MissingFile(const std::filesystem::path& path)
      : Error("corpus file not found: " + path.string()), path_(path) {}
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

class MalformedRecord : public Error {
 public:
  MalformedRecord(std::size_t index, std::string field, const std::string& detail = {});
  std::size_t index() const { return index_; }
  const std::string& field() const { return field_; }

 private:
  std::size_t index_;
  std::string field_;
};

class EmptyCorpus : public Error {
 public:
  EmptyCorpus() : Error("corpus is empty") {}
};

// Parses and validates a JSON array of entry records. Validation stops at
// the first bad record.
std::vector<TheoremEntry> parse_corpus(const nlohmann::json& doc);
std::vector<TheoremEntry> load_corpus(const std::filesystem::path& path);

nlohmann::json to_json(const TheoremEntry& entry);
std::string serialize_corpus(std::span<const TheoremEntry> entries);

CorpusStats corpus_stats(std::span<const TheoremEntry> entries);

// Slugified names, with "-2", "-3", ... appended on collision.
std::vector<std::string> make_ids(std::span<const std::string> names);

const TheoremEntry* find_entry(std::span<const TheoremEntry> entries, std::string_view id);

std::string format_stats_table(const CorpusStats& stats);

}  // namespace tea::corpus
