#include "cli.hpp"

#include <algorithm>
#include <ostream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "tea/codegen.hpp"
#include "tea/config.hpp"
#include "tea/corpus.hpp"
#include "tea/evaluator.hpp"
#include "tea/gateway.hpp"
#include "tea/media.hpp"
#include "tea/net.hpp"
#include "tea/pipeline.hpp"
#include "tea/prompts.hpp"
#include "tea/report.hpp"
#include "tea/retrieval.hpp"
#include "tea/srt.hpp"
#include "tea/synthetic.hpp"
#include "tea/util.hpp"

namespace tea::cli {
namespace {

using nlohmann::json;

class UsageError : public Error {
 public:
  using Error::Error;
};

struct Options {
  std::string config_file;
  bool mock = false;
  bool verbose = false;

  // generate
  std::vector<std::string> ids;
  bool all = false;
  std::string model;
  int max_fixes = -1;
  std::string rag;
  std::string stamp;
  std::string corpus;
  std::string runs;

  // evaluate
  std::string run_dir;
  std::string judge_model;

  // report
  std::string report_kind;
  std::vector<std::string> report_paths;
  bool csv = false;
  std::vector<int> budgets;

  // bench / rag
  std::string bench_path;
  std::vector<std::string> roots;
  std::string index_dir;
  std::string query;
  std::size_t k = 0;
  double threshold = -1.0;
  std::vector<std::string> plugins;
  std::string stage = "implementation";
};

void setup_logging(bool verbose) {
  auto logger = spdlog::get("tea");
  if (!logger) {
    logger = spdlog::stderr_color_mt("tea");
    spdlog::set_default_logger(logger);
  }
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::warn);
}

std::unique_ptr<retrieval::EmbeddingPort> make_embedder(const config::AppConfig& cfg, bool mock) {
  if (mock || cfg.embedding.kind == "hashing") {
    return std::make_unique<retrieval::HashingEmbedder>(cfg.embedding.dimension);
  }
  if (cfg.embedding.kind == "http") return std::make_unique<retrieval::HttpEmbedder>(cfg.embedding.http);
  throw config::ConfigError("unknown embedding kind: " + cfg.embedding.kind);
}

std::filesystem::path index_path(const Options& o, const config::AppConfig& cfg) {
  return o.index_dir.empty() ? cfg.paths.index : std::filesystem::path(o.index_dir);
}

// Live or offline chat client.
struct ChatStack {
  std::unique_ptr<gateway::Gateway> gateway;
  std::unique_ptr<gateway::FixtureRecorder> recorder;
  gateway::ChatClient& client() {
    if (recorder) return *recorder;
    return *gateway;
  }
};

ChatStack make_chat(const config::AppConfig& cfg, bool mock) {
  ChatStack s;
  std::shared_ptr<gateway::Responder> fallback;
  if (mock) fallback = std::make_shared<gateway::SyntheticResponder>(cfg.pipeline.stub_failure_per_mille);
  s.gateway = gateway::make_gateway(cfg.gateway, mock, fallback);
  if (!mock && !cfg.gateway.record_dir.empty()) {
    s.recorder = std::make_unique<gateway::FixtureRecorder>(*s.gateway, cfg.gateway.record_dir);
  }
  return s;
}

bool parse_on_off(const std::string& s) {
  if (s == "on") return true;
  if (s == "off") return false;
  throw UsageError("--rag takes on or off");
}

int cmd_generate(const Options& o, config::AppConfig& cfg, std::ostream& out) {
  if (o.all == !o.ids.empty()) throw UsageError("generate needs theorem ids or --all, not both");
  if (!o.model.empty()) cfg.pipeline.model_id = o.model;
  if (o.max_fixes >= 0) cfg.pipeline.max_fixes = o.max_fixes;
  if (!o.rag.empty()) cfg.pipeline.rag = parse_on_off(o.rag);

  auto corpus_path = o.corpus.empty() ? cfg.paths.corpus : std::filesystem::path(o.corpus);
  auto entries = corpus::load_corpus(corpus_path);
  std::vector<corpus::TheoremEntry> chosen;
  if (o.all) {
    chosen = entries;
  } else {
    for (const auto& id : o.ids) {
      const auto* e = corpus::find_entry(entries, id);
      if (e == nullptr) throw Error(fmt::format("theorem {} is not in {}", id, corpus_path.string()));
      chosen.push_back(*e);
    }
  }

  auto prompts = PromptLibrary::load(cfg.paths.prompts);
  auto classifier = std::filesystem::exists(cfg.paths.error_patterns)
                        ? codegen::ErrorClassifier::load(cfg.paths.error_patterns)
                        : codegen::ErrorClassifier::builtin();
  auto chat = make_chat(cfg, o.mock);

  std::unique_ptr<codegen::ScriptExecutor> executor;
  std::unique_ptr<pipeline::TtsPort> tts;
  std::unique_ptr<media::MediaTool> media_tool;
  if (o.mock) {
    executor = std::make_unique<pipeline::StubExecutor>(cfg.pipeline.stub_clip_s);
    tts = std::make_unique<pipeline::SilentTts>();
    media_tool = std::make_unique<media::BuiltinMediaTool>();
  } else {
    executor = std::make_unique<pipeline::SubprocessExecutor>(cfg.pipeline.renderer);
    if (cfg.pipeline.tts.kind == "http") tts = std::make_unique<pipeline::HttpTts>(cfg.pipeline.tts.http);
    else tts = std::make_unique<pipeline::SilentTts>();
    media_tool = media::make_media_tool(cfg.pipeline.media_tool);
  }

  std::unique_ptr<retrieval::EmbeddingPort> embedder;
  std::optional<retrieval::VectorIndex> index;
  std::unique_ptr<retrieval::Retriever> retriever;
  if (cfg.pipeline.rag) {
    embedder = make_embedder(cfg, o.mock);
    index.emplace(retrieval::VectorIndex::load(index_path(o, cfg)));
    if (index->embedder_name() != embedder->name()) {
      throw Error(fmt::format("index was built with {} but the configured embedder is {}", index->embedder_name(),
                              embedder->name()));
    }
    retriever = std::make_unique<retrieval::Retriever>(*index, *embedder);
  }

  pipeline::Ports ports{chat.client(), prompts, *executor, *tts, *media_tool, retriever.get(), &classifier,
                        cfg.gateway.prices};
  auto pcfg = cfg.pipeline_config();
  auto runs = o.runs.empty() ? cfg.paths.runs : std::filesystem::path(o.runs);
  std::string stamp = o.stamp.empty() ? util::utc_timestamp() : o.stamp;
  std::size_t successes = 0;
  for (const auto& t : chosen) {
    auto record = pipeline::run_theorem(t, pcfg, ports, runs, stamp);
    successes += record.success ? 1 : 0;
    out << fmt::format("{}\t{}\t{}\n", t.id, record.success ? "success" : "failure", record.run_dir.string());
  }
  out << fmt::format("{}/{} theorems succeeded\n", successes, chosen.size());
  return kExitOk;
}

int cmd_evaluate(const Options& o, config::AppConfig& cfg, std::ostream& out) {
  std::filesystem::path dir = o.run_dir;
  auto record = pipeline::load_run_record(dir / "run_record.json");
  if (!record.artifact) throw Error("run " + dir.string() + " produced no video to evaluate");
  if (!o.judge_model.empty()) {
    cfg.evaluator.judge_model = o.judge_model;
    cfg.evaluator.consistency_judge_model = o.judge_model;
  }
  auto prompts = PromptLibrary::load(cfg.paths.prompts);
  auto chat = make_chat(cfg, o.mock);
  gateway::MeteredClient metered(chat.client(), "judge:" + cfg.evaluator.judge_model, cfg.gateway.prices);
  evaluator::Evaluator ev(metered, prompts, cfg.evaluator);
  auto video = dir / "final.mp4";
  auto srt_file = dir / "final.srt";
  auto report = ev.evaluate(video, srt_file, {record.theorem_id, record.theorem_name});
  report.video_model = record.model_id;
  report.rag = record.rag;
  util::write_file(dir / "evaluation.json", evaluator::to_json(report).dump(2) + "\n");
  util::write_file(dir / "evaluation_ledger.json", gateway::to_json(metered.snapshot()).dump(2) + "\n");
  for (const auto& s : report.scores) out << fmt::format("{:<20} {:.2f}\n", evaluator::label(s.dimension), s.value);
  out << fmt::format("{:<20} {:.2f}\n", "Overall", report.overall);
  return kExitOk;
}

int cmd_report(const Options& o, const config::AppConfig& cfg, std::ostream& out) {
  std::vector<std::filesystem::path> paths(o.report_paths.begin(), o.report_paths.end());
  report::Table table;
  if (o.report_kind == "success") {
    table = report::success_table(report::load_ledger(paths));
  } else if (o.report_kind == "cumulative") {
    auto budgets = o.budgets.empty() ? cfg.report.budgets : o.budgets;
    table = report::cumulative_success(report::load_ledger(paths), budgets);
  } else if (o.report_kind == "scores") {
    auto reports = report::load_reports(paths);
    table = report::score_table(reports);
  } else if (o.report_kind == "cost") {
    auto ledgers = report::load_usage_ledgers(paths);
    table = report::cost_table(ledgers, cfg.report.reference_costs);
  } else {
    throw UsageError("report kind must be success, cumulative, scores or cost");
  }
  out << (o.csv ? report::render_csv(table) : report::render_text(table));
  return kExitOk;
}

int cmd_bench_validate(const Options& o, std::ostream& out) {
  auto entries = corpus::load_corpus(o.bench_path);
  auto stats = corpus::corpus_stats(entries);
  out << corpus::format_stats_table(stats);
  out << fmt::format("total/easy/medium/hard: {}/{}/{}/{}\n", stats.total,
                     stats.per_difficulty.at(corpus::Difficulty::kEasy),
                     stats.per_difficulty.at(corpus::Difficulty::kMedium),
                     stats.per_difficulty.at(corpus::Difficulty::kHard));
  return kExitOk;
}

int cmd_rag_ingest(const Options& o, const config::AppConfig& cfg, std::ostream& out) {
  std::vector<retrieval::IngestRoot> roots;
  for (const auto& r : o.roots) {
    auto eq = r.find('=');
    if (eq != std::string::npos && !std::filesystem::exists(r)) {
      roots.push_back({r.substr(eq + 1), r.substr(0, eq)});
    } else {
      roots.push_back({r, ""});
    }
  }
  auto embedder = make_embedder(cfg, o.mock);
  retrieval::VectorIndex index(embedder->dimension(), embedder->name());
  auto stats = retrieval::ingest_docs(roots, *embedder, index, cfg.retrieval.splitter);
  auto dir = index_path(o, cfg);
  index.save(dir);
  out << fmt::format("indexed {} sources into {} chunks ({} prose, {} code) at {}\n", stats.sources, stats.chunks,
                     stats.prose_chunks, stats.code_chunks, dir.string());
  return kExitOk;
}

int cmd_rag_query(const Options& o, config::AppConfig& cfg, std::ostream& out) {
  auto embedder = make_embedder(cfg, o.mock);
  auto index = retrieval::VectorIndex::load(index_path(o, cfg));
  retrieval::Retriever retriever(index, *embedder);
  auto rc = cfg.retrieval.retrieval;
  if (o.k > 0) rc.k = o.k;
  if (o.threshold >= 0.0) rc.threshold = o.threshold;
  rc.plugin_allowlist = o.plugins;
  auto stage = retrieval::parse_stage(o.stage);
  if (!stage) throw UsageError("--stage must be storyboard, implementation or error_fix");
  auto hits = retriever.retrieve(o.query, rc, *stage);
  for (const auto& h : hits) {
    const auto& c = index.chunk(h.id);
    out << fmt::format("{:.4f}\t{}\t{}\t{}\n", h.score, h.id, c.plugin.empty() ? "core" : c.plugin, c.source_path);
  }
  if (hits.empty()) out << "no chunk reached the threshold\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Theorem explainer video pipeline", "tea"};
  app.option_defaults()->always_capture_default();
  app.add_option("--config", o.config_file, "JSON config merged over the shipped defaults")->check(CLI::ExistingFile);
  app.add_flag("--mock", o.mock, "Run fully offline with mock models, stub renderer and silent narration");
  app.add_flag("-v,--verbose", o.verbose, "Debug logging on standard error");
  app.require_subcommand(1);
  app.fallthrough();

  auto* gen = app.add_subcommand("generate", "Generate explainer videos for theorems");
  gen->add_option("ids", o.ids, "Theorem ids");
  gen->add_flag("--all", o.all, "Every theorem in the corpus");
  gen->add_option("--model", o.model, "Model id, e.g. openai/gpt-4o");
  gen->add_option("--max-fixes", o.max_fixes, "Repair attempts per scene after the first generation")
      ->check(CLI::NonNegativeNumber);
  gen->add_option("--rag", o.rag, "Retrieval augmentation")->check(CLI::IsMember({"on", "off"}));
  gen->add_option("--stamp", o.stamp, "Run directory name (default: UTC timestamp)");
  gen->add_option("--corpus", o.corpus, "Corpus JSON file");
  gen->add_option("--runs", o.runs, "Root directory for run outputs");
  gen->add_option("--index", o.index_dir, "Vector index directory");

  auto* eval = app.add_subcommand("evaluate", "Score a generated video");
  eval->add_option("run_dir", o.run_dir, "Run directory holding final.mp4 and final.srt")->required();
  eval->add_option("--judge-model", o.judge_model, "Judge model id");

  auto* rep = app.add_subcommand("report", "Render result tables");
  rep->add_option("kind", o.report_kind, "success | cumulative | scores | cost")
      ->required()
      ->check(CLI::IsMember({"success", "cumulative", "scores", "cost"}));
  rep->add_option("paths", o.report_paths, "Run records, ledgers, reports or directories")->required();
  rep->add_flag("--csv", o.csv, "CSV instead of aligned text");
  rep->add_option("--budgets", o.budgets, "Fix budgets for the cumulative table")->delimiter(',');

  auto* bench = app.add_subcommand("bench", "Benchmark corpus tools");
  bench->require_subcommand(1);
  auto* validate = bench->add_subcommand("validate", "Validate a corpus file and print its composition");
  validate->add_option("path", o.bench_path, "Corpus JSON file")->required();

  auto* rag = app.add_subcommand("rag", "Documentation index tools");
  rag->require_subcommand(1);
  auto* ingest = rag->add_subcommand("ingest", "Build the vector index from documentation trees");
  ingest->add_option("roots", o.roots, "Directories or files; plugin=path marks plugin docs")->required();
  ingest->add_option("--index", o.index_dir, "Output index directory");
  auto* query = rag->add_subcommand("query", "Query the vector index");
  query->add_option("text", o.query, "Query text")->required();
  query->add_option("--k", o.k, "Number of chunks")->check(CLI::PositiveNumber);
  query->add_option("--threshold", o.threshold, "Minimum relevance in [0,1]")->check(CLI::Range(0.0, 1.0));
  query->add_option("--plugins", o.plugins, "Allowed plugins")->delimiter(',');
  query->add_option("--stage", o.stage, "storyboard | implementation | error_fix");
  query->add_option("--index", o.index_dir, "Index directory");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  setup_logging(o.verbose);
  bool network_before = net::network_enabled();
  if (o.mock) net::set_network_enabled(false);
  struct Restore {
    bool value;
    ~Restore() { net::set_network_enabled(value); }
  } restore{network_before};

  try {
    auto cfg = config::load(o.config_file.empty() ? std::nullopt
                                                  : std::optional<std::filesystem::path>(o.config_file));
    if (*gen) return cmd_generate(o, cfg, out);
    if (*eval) return cmd_evaluate(o, cfg, out);
    if (*rep) return cmd_report(o, cfg, out);
    if (*validate) return cmd_bench_validate(o, out);
    if (*ingest) return cmd_rag_ingest(o, cfg, out);
    if (*query) return cmd_rag_query(o, cfg, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace tea::cli
