#include "tea/report.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "tea/util.hpp"

namespace tea::report {
namespace {

using nlohmann::json;

std::string_view short_subject(corpus::Subject s) {
  switch (s) {
    case corpus::Subject::kMathematics: return "Math";
    case corpus::Subject::kPhysics: return "Phys";
    case corpus::Subject::kComputerScience: return "CS";
    case corpus::Subject::kChemistry: return "Chem";
  }
  return "?";
}

ConfigKey key_of(const pipeline::RunRecord& r) { return {r.model_id, r.rag, r.max_fixes}; }

// Files under the given roots matching pred, sorted.
std::vector<std::filesystem::path> expand(std::span<const std::filesystem::path> paths,
                                          const std::function<bool(const std::filesystem::path&)>& pred) {
  std::vector<std::filesystem::path> out;
  for (const auto& p : paths) {
    if (std::filesystem::is_directory(p)) {
      std::vector<std::filesystem::path> found;
      for (const auto& e : std::filesystem::recursive_directory_iterator(p)) {
        if (e.is_regular_file() && pred(e.path())) found.push_back(e.path());
      }
      std::sort(found.begin(), found.end());
      out.insert(out.end(), found.begin(), found.end());
    } else if (std::filesystem::is_regular_file(p)) {
      out.push_back(p);
    } else {
      throw std::invalid_argument("no such file or directory: " + p.string());
    }
  }
  return out;
}

std::vector<json> read_documents(const std::filesystem::path& file) {
  std::vector<json> docs;
  std::string text = util::read_file(file);
  if (util::to_lower(file.extension().string()) == ".jsonl") {
    for (const auto& line : util::split_lines(text)) {
      if (!util::trim(line).empty()) docs.push_back(json::parse(line));
    }
  } else {
    auto j = json::parse(text);
    if (j.is_array()) {
      for (auto& item : j) docs.push_back(std::move(item));
    } else {
      docs.push_back(std::move(j));
    }
  }
  return docs;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace

std::string ConfigKey::label() const {
  return fmt::format("{}{} N={}", model_id, rag ? " +RAG" : "", max_fixes);
}

void RunLedger::validate() const {
  std::set<std::pair<ConfigKey, std::string>> seen;
  for (const auto& r : records) {
    if (!seen.emplace(key_of(r), r.theorem_id).second) {
      throw DuplicateRun(fmt::format("theorem {} appears twice under {}", r.theorem_id, key_of(r).label()));
    }
  }
}

RunLedger load_ledger(std::span<const std::filesystem::path> paths) {
  RunLedger ledger;
  auto files = expand(paths, [](const std::filesystem::path& p) { return p.filename() == "run_record.json"; });
  for (const auto& f : files) {
    for (const auto& doc : read_documents(f)) ledger.records.push_back(pipeline::run_record_from_json(doc));
  }
  ledger.validate();
  return ledger;
}

std::string format_percent(std::size_t num, std::size_t den) {
  if (den == 0) throw std::invalid_argument("percentage of zero items");
  // tenths of a percent, rounded half up
  std::size_t tenths = (num * 2000 + den) / (2 * den);
  return fmt::format("{}.{}%", tenths / 10, tenths % 10);
}

std::string format_percent_int(std::size_t num, std::size_t den) {
  if (den == 0) throw std::invalid_argument("percentage of zero items");
  return fmt::format("{}%", (num * 200 + den) / (2 * den));
}

std::string render_text(const Table& t) {
  std::vector<std::size_t> width(t.header.size(), 0);
  auto measure = [&](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size() && i < width.size(); ++i) width[i] = std::max(width[i], row[i].size());
  };
  measure(t.header);
  for (const auto& r : t.rows) measure(r);
  auto line = [&](const std::vector<std::string>& row) {
    std::string out;
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i == 0) out += fmt::format("{:<{}}", row[i], width[i]);
      else out += fmt::format("  {:>{}}", row[i], width[i]);
    }
    return util::trim(out) == "" ? std::string() : out + "\n";
  };
  std::string out;
  if (!t.title.empty()) out += t.title + "\n";
  out += line(t.header);
  std::size_t total = 0;
  for (auto w : width) total += w;
  out += std::string(total + 2 * (width.empty() ? 0 : width.size() - 1), '-') + "\n";
  for (const auto& r : t.rows) out += line(r);
  for (const auto& n : t.notes) out += "note: " + n + "\n";
  return out;
}

std::string render_csv(const Table& t) {
  std::string out;
  auto line = [&](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += csv_field(row[i]);
    }
    out += '\n';
  };
  line(t.header);
  for (const auto& r : t.rows) line(r);
  return out;
}

std::map<ConfigKey, SuccessCounts> success_counts(const RunLedger& ledger) {
  if (ledger.records.empty()) throw EmptyLedger();
  ledger.validate();
  std::map<ConfigKey, SuccessCounts> out;
  for (const auto& r : ledger.records) {
    auto& c = out[key_of(r)];
    std::size_t ok = r.success ? 1 : 0;
    for (auto* t : {&c.by_difficulty[r.difficulty], &c.by_subject[r.subject], &c.overall}) {
      t->attempted += 1;
      t->successes += ok;
    }
  }
  return out;
}

Table success_table(const RunLedger& ledger) {
  Table t;
  t.title = "Theorem success rate";
  t.header = {"Configuration"};
  for (auto d : corpus::kAllDifficulties) t.header.emplace_back(corpus::to_string(d));
  for (auto s : corpus::kAllSubjects) t.header.emplace_back(short_subject(s));
  t.header.emplace_back("Overall");
  auto cell = [](const auto& m, auto k) {
    auto it = m.find(k);
    return it == m.end() || it->second.attempted == 0 ? std::string("-")
                                                       : format_percent(it->second.successes, it->second.attempted);
  };
  for (const auto& [key, c] : success_counts(ledger)) {
    std::vector<std::string> row = {key.label()};
    for (auto d : corpus::kAllDifficulties) row.push_back(cell(c.by_difficulty, d));
    for (auto s : corpus::kAllSubjects) row.push_back(cell(c.by_subject, s));
    row.push_back(format_percent(c.overall.successes, c.overall.attempted));
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::optional<int> fixes_needed(const pipeline::RunRecord& r) {
  if (!r.success) return std::nullopt;
  if (r.scenes.empty()) throw MissingTraces("successful run " + r.theorem_id + " has no scene traces");
  int worst = 0;
  for (const auto& s : r.scenes) {
    auto it = std::find_if(s.attempts.begin(), s.attempts.end(), [](const codegen::CodeArtifact& a) { return a.ok; });
    if (s.status != codegen::SceneStatus::kSucceeded || it == s.attempts.end()) {
      throw MissingTraces(fmt::format("run {} scene {} has no succeeding attempt", r.theorem_id, s.index));
    }
    worst = std::max(worst, it->attempt);
  }
  return worst;
}

std::vector<CumulativeRow> cumulative_counts(const RunLedger& ledger, std::span<const int> budgets) {
  if (ledger.records.empty()) throw EmptyLedger();
  ledger.validate();
  if (budgets.empty()) throw std::invalid_argument("no budgets requested");
  int max_budget = *std::max_element(budgets.begin(), budgets.end());
  if (*std::min_element(budgets.begin(), budgets.end()) < 0) throw std::invalid_argument("negative budget");
  std::map<std::pair<ConfigKey, int>, CumulativeRow> rows;  // group order: difficulties then overall
  for (const auto& r : ledger.records) {
    if (r.max_fixes < max_budget) {
      throw MissingTraces(fmt::format("run {} used N={}, budget {} needs longer traces", r.theorem_id, r.max_fixes,
                                      max_budget));
    }
    auto needed = fixes_needed(r);
    auto key = key_of(r);
    for (int g : {static_cast<int>(r.difficulty), 99}) {
      auto& row = rows[{key, g}];
      if (row.successes.empty()) {
        row.config = key;
        row.group = g == 99 ? "Overall" : std::string(corpus::to_string(r.difficulty));
        row.successes.assign(budgets.size(), 0);
      }
      row.attempted += 1;
      for (std::size_t b = 0; b < budgets.size(); ++b) {
        if (needed && *needed <= budgets[b]) row.successes[b] += 1;
      }
    }
  }
  std::vector<CumulativeRow> out;
  for (auto& [k, row] : rows) out.push_back(std::move(row));
  return out;
}

Table cumulative_success(const RunLedger& ledger, std::span<const int> budgets) {
  Table t;
  t.title = "Cumulative theorem success rate by fix budget";
  t.header = {"Configuration", "Difficulty"};
  for (int b : budgets) t.header.push_back(fmt::format("N={}", b));
  for (const auto& row : cumulative_counts(ledger, budgets)) {
    std::vector<std::string> cells = {row.config.label(), row.group};
    for (auto s : row.successes) cells.push_back(format_percent_int(s, row.attempted));
    t.rows.push_back(std::move(cells));
  }
  return t;
}

std::vector<ScoreRow> score_rows(std::span<const evaluator::EvaluationReport> reports) {
  if (reports.empty()) throw EmptyReports("no evaluation reports");
  std::map<std::string, std::vector<const evaluator::EvaluationReport*>> groups;
  for (const auto& r : reports) {
    std::string label = r.video_model.empty() ? "unknown" : r.video_model;
    if (r.rag) label += " +RAG";
    groups[label].push_back(&r);
  }
  std::vector<ScoreRow> out;
  for (const auto& [label, members] : groups) {
    ScoreRow row;
    row.label = label;
    row.videos = members.size();
    for (std::size_t i = 0; i < 5; ++i) {
      double sum = 0.0;
      for (const auto* m : members) sum += m->scores[i].value;
      row.means[i] = sum / static_cast<double>(members.size());
    }
    row.overall = evaluator::overall_score(row.means);
    out.push_back(std::move(row));
  }
  return out;
}

Table score_table(std::span<const evaluator::EvaluationReport> reports) {
  Table t;
  t.title = "Evaluation scores";
  t.header = {"Model", "Videos"};
  for (auto d : evaluator::kAllDimensions) t.header.emplace_back(evaluator::label(d));
  t.header.emplace_back("Overall");
  for (const auto& row : score_rows(reports)) {
    std::vector<std::string> cells = {row.label, std::to_string(row.videos)};
    for (double m : row.means) cells.push_back(fmt::format("{:.2f}", m));
    cells.push_back(fmt::format("{:.2f}", row.overall));
    t.rows.push_back(std::move(cells));
  }
  return t;
}

std::vector<CostRow> cost_rows(std::span<const gateway::UsageLedger> ledgers) {
  if (ledgers.empty()) throw EmptyReports("no usage ledgers");
  std::map<std::string, std::vector<const gateway::UsageLedger*>> groups;
  for (const auto& l : ledgers) groups[l.label].push_back(&l);
  std::vector<CostRow> out;
  for (const auto& [label, members] : groups) {
    CostRow row;
    row.label = label;
    row.videos = members.size();
    for (const auto* l : members) {
      row.input_tokens += static_cast<double>(l->total_input_tokens());
      row.output_tokens += static_cast<double>(l->total_output_tokens());
      row.cost_usd += gateway::ledger_cost(*l);
      row.latency_s += l->total_latency_ms() / 1000.0;
    }
    double n = static_cast<double>(members.size());
    row.input_tokens /= n;
    row.output_tokens /= n;
    row.cost_usd /= n;
    row.latency_s /= n;
    out.push_back(std::move(row));
  }
  return out;
}

Table cost_table(std::span<const gateway::UsageLedger> ledgers, const std::map<std::string, std::string>& reference_costs) {
  Table t;
  t.title = "Average usage per video";
  t.header = {"Model", "Videos", "Input tokens", "Output tokens", "Cost (USD)", "Time (s)"};
  for (const auto& row : cost_rows(ledgers)) {
    std::string cost = gateway::format_usd(row.cost_usd);
    t.rows.push_back({row.label, std::to_string(row.videos), fmt::format("{:.0f}", row.input_tokens),
                      fmt::format("{:.0f}", row.output_tokens), cost, fmt::format("{:.1f}", row.latency_s)});
    auto ref = reference_costs.find(row.label);
    if (ref != reference_costs.end() && ref->second != cost) {
      auto dot = ref->second.find('.');
      int places = dot == std::string::npos ? 0 : static_cast<int>(ref->second.size() - dot - 1);
      bool rounding = fmt::format("{:.{}f}", row.cost_usd, places) == ref->second;
      t.notes.push_back(fmt::format("{} cost {} differs from the reference figure {}{}", row.label, cost, ref->second,
                                    rounding ? " (rounding)" : ""));
    }
  }
  return t;
}

std::vector<evaluator::EvaluationReport> load_reports(std::span<const std::filesystem::path> paths) {
  std::vector<evaluator::EvaluationReport> out;
  auto files = expand(paths, [](const std::filesystem::path& p) { return p.filename() == "evaluation.json"; });
  for (const auto& f : files) {
    for (const auto& doc : read_documents(f)) out.push_back(evaluator::report_from_json(doc));
  }
  return out;
}

std::vector<gateway::UsageLedger> load_usage_ledgers(std::span<const std::filesystem::path> paths) {
  std::vector<gateway::UsageLedger> out;
  auto files = expand(paths, [](const std::filesystem::path& p) { return p.filename() == "ledger.json"; });
  for (const auto& f : files) {
    for (const auto& doc : read_documents(f)) out.push_back(gateway::ledger_from_json(doc));
  }
  return out;
}

}  // namespace tea::report
