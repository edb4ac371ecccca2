#include "tea/corpus.hpp"

#include <algorithm>
#include <array>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "tea/util.hpp"

namespace tea::corpus {
namespace {

using nlohmann::json;

constexpr std::array<std::string_view, 6> kFields = {"id",         "name",    "description",
                                                     "difficulty", "subject", "subfield"};

std::string require_text(const json& rec, std::size_t index, std::string_view field, bool nonempty) {
  auto it = rec.find(field);
  if (it == rec.end()) throw MalformedRecord(index, std::string(field), "missing");
  if (!it->is_string()) throw MalformedRecord(index, std::string(field), "not a string");
  auto value = it->get<std::string>();
  if (nonempty && util::trim(value).empty()) {
    throw MalformedRecord(index, std::string(field), "empty");
  }
  return value;
}

}  // namespace

MalformedRecord::MalformedRecord(std::size_t index, std::string field, const std::string& detail)
    : Error(fmt::format("malformed record {} field '{}'{}", index, field,
                        detail.empty() ? "" : ": " + detail)),
      index_(index),
      field_(std::move(field)) {}

std::string_view to_string(Difficulty d) {
  switch (d) {
    case Difficulty::kEasy: return "Easy";
    case Difficulty::kMedium: return "Medium";
    case Difficulty::kHard: return "Hard";
  }
  return "?";
}

std::string_view to_string(Subject s) {
  switch (s) {
    case Subject::kMathematics: return "Mathematics";
    case Subject::kPhysics: return "Physics";
    case Subject::kChemistry: return "Chemistry";
    case Subject::kComputerScience: return "Computer Science";
  }
  return "?";
}

std::optional<Difficulty> parse_difficulty(std::string_view s) {
  for (auto d : kAllDifficulties) {
    if (to_string(d) == s) return d;
  }
  return std::nullopt;
}

std::optional<Subject> parse_subject(std::string_view s) {
  for (auto subj : kAllSubjects) {
    if (to_string(subj) == s) return subj;
  }
  return std::nullopt;
}

std::vector<TheoremEntry> parse_corpus(const json& doc) {
  if (!doc.is_array()) throw MalformedRecord(0, "<root>", "expected a JSON array");
  std::vector<TheoremEntry> entries;
  entries.reserve(doc.size());
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const json& rec = doc[i];
    if (!rec.is_object()) throw MalformedRecord(i, "<record>", "expected an object");
    for (const auto& [key, _] : rec.items()) {
      if (std::find(kFields.begin(), kFields.end(), key) == kFields.end()) {
        throw MalformedRecord(i, key, "unknown field");
      }
    }
    TheoremEntry e;
    e.id = require_text(rec, i, "id", true);
    e.name = require_text(rec, i, "name", true);
    e.description = require_text(rec, i, "description", true);
    auto difficulty = parse_difficulty(require_text(rec, i, "difficulty", true));
    if (!difficulty) throw MalformedRecord(i, "difficulty", "not one of Easy|Medium|Hard");
    e.difficulty = *difficulty;
    auto subject = parse_subject(require_text(rec, i, "subject", true));
    if (!subject) throw MalformedRecord(i, "subject", "unknown subject");
    e.subject = *subject;
    e.subfield = require_text(rec, i, "subfield", true);
    if (!seen.insert(e.id).second) throw MalformedRecord(i, "id", "duplicate id " + e.id);
    entries.push_back(std::move(e));
  }
  return entries;
}

std::vector<TheoremEntry> load_corpus(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) throw MissingFile(path);
  json doc;
  try {
    doc = json::parse(util::read_file(path));
  } catch (const json::parse_error& e) {
    throw MalformedRecord(0, "<root>", e.what());
  }
  return parse_corpus(doc);
}

nlohmann::json to_json(const TheoremEntry& e) {
  return json{{"id", e.id},
              {"name", e.name},
              {"description", e.description},
              {"difficulty", to_string(e.difficulty)},
              {"subject", to_string(e.subject)},
              {"subfield", e.subfield}};
}

std::string serialize_corpus(std::span<const TheoremEntry> entries) {
  json arr = json::array();
  for (const auto& e : entries) arr.push_back(to_json(e));
  return arr.dump(2) + "\n";
}

CorpusStats corpus_stats(std::span<const TheoremEntry> entries) {
  if (entries.empty()) throw EmptyCorpus();
  CorpusStats stats;
  std::set<std::string> subfields;
  for (auto d : kAllDifficulties) stats.per_difficulty[d] = 0;
  for (auto s : kAllSubjects) stats.per_subject[s] = 0;
  for (const auto& e : entries) {
    ++stats.total;
    ++stats.per_difficulty[e.difficulty];
    ++stats.per_subject[e.subject];
    subfields.insert(e.subfield);
  }
  stats.subfield_count = subfields.size();
  return stats;
}

std::vector<std::string> make_ids(std::span<const std::string> names) {
  std::vector<std::string> ids;
  std::unordered_map<std::string, int> used;
  std::unordered_set<std::string> taken;
  for (const auto& name : names) {
    std::string base = util::slugify(name);
    std::string id = base;
    int& n = used[base];
    while (!taken.insert(id).second) id = fmt::format("{}-{}", base, ++n + 1);
    ids.push_back(std::move(id));
  }
  return ids;
}

const TheoremEntry* find_entry(std::span<const TheoremEntry> entries, std::string_view id) {
  auto it = std::find_if(entries.begin(), entries.end(), [&](const auto& e) { return e.id == id; });
  return it == entries.end() ? nullptr : &*it;
}

std::string format_stats_table(const CorpusStats& stats) {
  std::string out;
  out += fmt::format("{:<18} {:>6}\n", "Total", stats.total);
  for (auto d : kAllDifficulties) out += fmt::format("{:<18} {:>6}\n", to_string(d), stats.per_difficulty.at(d));
  for (auto s : kAllSubjects) out += fmt::format("{:<18} {:>6}\n", to_string(s), stats.per_subject.at(s));
  out += fmt::format("{:<18} {:>6}\n", "Subfields", stats.subfield_count);
  return out;
}

}  // namespace tea::corpus
