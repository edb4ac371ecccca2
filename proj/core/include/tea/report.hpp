#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tea/error.hpp"
#include "tea/evaluator.hpp"
#include "tea/gateway.hpp"
#include "tea/pipeline.hpp"

namespace tea::report {

class EmptyLedger : public Error {
 public:
  EmptyLedger() : Error("no run records to tabulate") {}
};

class MissingTraces : public Error {
 public:
  using Error::Error;
};

class EmptyReports : public Error {
 public:
  using Error::Error;
};

class DuplicateRun : public Error {
 public:
  using Error::Error;
};

// Run configuration a record belongs to.
struct ConfigKey {
  std::string model_id;
  bool rag = false;
  int max_fixes = 5;

  auto operator<=>(const ConfigKey&) const = default;
  std::string label() const;
};

struct RunLedger {
  std::vector<pipeline::RunRecord> records;

  // Throws DuplicateRun if a theorem appears twice under one ConfigKey.
  void validate() const;
};

// Accepts run_record.json files, .jsonl files of records, and directories
// searched recursively for run_record.json.
RunLedger load_ledger(std::span<const std::filesystem::path> paths);

// One decimal, half-up, from exact integer arithmetic: 225/240 -> "93.8%".
std::string format_percent(std::size_t num, std::size_t den);
// Whole percent, half-up.
std::string format_percent_int(std::size_t num, std::size_t den);

struct Table {
  std::string title;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> notes;
};

std::string render_text(const Table& table);
std::string render_csv(const Table& table);

struct Tally {
  std::size_t successes = 0;
  std::size_t attempted = 0;
};

struct SuccessCounts {
  std::map<corpus::Difficulty, Tally> by_difficulty;
  std::map<corpus::Subject, Tally> by_subject;
  Tally overall;
};

std::map<ConfigKey, SuccessCounts> success_counts(const RunLedger& ledger);
// Rows per configuration: Easy, Medium, Hard, Math, Phys, CS, Chem, Overall.
Table success_table(const RunLedger& ledger);

// Number of fixes the theorem needed: the largest succeeding attempt index
// over its scenes; empty when the theorem never succeeded.
std::optional<int> fixes_needed(const pipeline::RunRecord& record);

// Successes per difficulty (and overall) at each budget.
struct CumulativeRow {
  ConfigKey config;
  std::string group;  // difficulty name or "Overall"
  std::size_t attempted = 0;
  std::vector<std::size_t> successes;  // parallel to budgets
};

std::vector<CumulativeRow> cumulative_counts(const RunLedger& ledger, std::span<const int> budgets);
// Integer percents per budget. Throws MissingTraces when a record lacks
// attempt traces or ran with fewer fixes than a requested budget.
Table cumulative_success(const RunLedger& ledger, std::span<const int> budgets);

struct ScoreRow {
  std::string label;
  std::size_t videos = 0;
  std::array<double, 5> means{};
  double overall = 0.0;
};

std::vector<ScoreRow> score_rows(std::span<const evaluator::EvaluationReport> reports);
// Mean per dimension, then the geometric mean of those means.
Table score_table(std::span<const evaluator::EvaluationReport> reports);

struct CostRow {
  std::string label;
  std::size_t videos = 0;
  double input_tokens = 0.0;
  double output_tokens = 0.0;
  double cost_usd = 0.0;
  double latency_s = 0.0;
};

std::vector<CostRow> cost_rows(std::span<const gateway::UsageLedger> ledgers);
// Averages per video. reference_costs maps a label to a published cost
// string; a differing two-decimal value gets a rounding note.
Table cost_table(std::span<const gateway::UsageLedger> ledgers,
                 const std::map<std::string, std::string>& reference_costs = {});

std::vector<evaluator::EvaluationReport> load_reports(std::span<const std::filesystem::path> paths);
std::vector<gateway::UsageLedger> load_usage_ledgers(std::span<const std::filesystem::path> paths);

}  // namespace tea::report
