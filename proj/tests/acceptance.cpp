// One PASS/FAIL line per acceptance criterion; exit status 1 when any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "cli.hpp"
#include "oracles.hpp"
#include "support.hpp"
#include "tea/codegen.hpp"
#include "tea/config.hpp"
#include "tea/corpus.hpp"
#include "tea/evaluator.hpp"
#include "tea/gateway.hpp"
#include "tea/media.hpp"
#include "tea/net.hpp"
#include "tea/pipeline.hpp"
#include "tea/report.hpp"
#include "tea/retrieval.hpp"
#include "tea/srt.hpp"
#include "tea/stats.hpp"
#include "tea/util.hpp"

namespace {

using namespace tea;
using nlohmann::json;

struct Outcome {
  bool ok = true;
  std::string detail;

  void fail(const std::string& why) {
    if (ok) detail = why;
    ok = false;
  }
};

struct Criterion {
  std::string name;
  double limit_s;
  std::function<Outcome()> check;
};

std::string two_dp(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

Outcome geometric_mean() {
  struct Row {
    const char* agent;
    std::vector<double> dims;
    const char* published;
  };
  const std::vector<Row> rows = {{"GPT-4o", {0.79, 0.79, 0.89, 0.59, 0.87}, "0.78"},
                                 {"Claude 3.5-Sonnet v1", {0.75, 0.87, 0.88, 0.57, 0.92}, "0.79"},
                                 {"o3-mini", {0.76, 0.76, 0.89, 0.61, 0.88}, "0.77"}};
  Outcome o;
  std::string shown;
  for (const auto& r : rows) {
    double got = evaluator::overall_score(r.dims);
    if (std::abs(got - oracle::geometric_mean5(r.dims)) > 1e-12) o.fail(std::string(r.agent) + " disagrees with oracle");
    if (two_dp(got) != r.published) o.fail(std::string(r.agent) + " gives " + two_dp(got));
    shown += (shown.empty() ? "" : " ") + two_dp(got);
  }
  if (o.ok) o.detail = shown;
  return o;
}

gateway::PriceTable config_prices() {
  return config::from_json(config::load_document(std::nullopt, {}), data_dir()).gateway.prices;
}

Outcome cost() {
  auto prices = config_prices();
  Outcome o;
  struct Row {
    const char* model;
    std::int64_t in, out;
    const char* published;
  };
  const std::vector<Row> rows = {{"openai/gpt-4o", 350000, 84000, "1.71"}, {"openai/o3-mini", 434000, 154000, "1.16"}};
  std::string shown;
  for (const auto& r : rows) {
    gateway::UsageLedger l{r.model, {{gateway::Tag::kCodegen, r.model, r.in, r.out, 0.0}}, prices};
    auto s = gateway::format_usd(gateway::ledger_cost(l));
    if (s != r.published) o.fail(std::string(r.model) + " costs " + s);
    shown += (shown.empty() ? "" : " ") + s;
  }
  if (o.ok) o.detail = shown;
  return o;
}

pipeline::RunRecord scripted_record(const std::string& id, corpus::Difficulty d, corpus::Subject s,
                                    const std::vector<int>& first_ok, int max_fixes) {
  pipeline::RunRecord r;
  r.theorem_id = id;
  r.difficulty = d;
  r.subject = s;
  r.model_id = "openai/o3-mini";
  r.max_fixes = max_fixes;
  r.success = true;
  for (std::size_t i = 0; i < first_ok.size(); ++i) {
    codegen::SceneResult sr;
    sr.index = i;
    int n = first_ok[i] < 0 ? max_fixes + 1 : first_ok[i] + 1;
    for (int k = 0; k < n; ++k) {
      codegen::CodeArtifact a;
      a.scene_index = i;
      a.attempt = k;
      a.ok = first_ok[i] == k;
      sr.attempts.push_back(a);
    }
    sr.status = first_ok[i] < 0 ? codegen::SceneStatus::kFailed : codegen::SceneStatus::kSucceeded;
    r.success = r.success && first_ok[i] >= 0;
    r.scenes.push_back(sr);
  }
  return r;
}

Outcome success_accounting() {
  Outcome o;
  report::RunLedger ledger;
  for (int i = 0; i < 240; ++i) {
    ledger.records.push_back(scripted_record("t" + std::to_string(i), static_cast<corpus::Difficulty>(i / 80),
                                             corpus::kAllSubjects[i % 4], {0, i % 16 == 15 ? -1 : 2}, 5));
  }
  auto table = report::success_table(ledger);
  std::string overall = table.rows.at(0).back();
  if (overall != "93.8%") o.fail("overall " + overall);

  std::mt19937 rng(20240501);
  std::vector<int> budgets = {0, 1, 2, 3, 4, 5};
  for (int trial = 0; trial < 1000 && o.ok; ++trial) {
    report::RunLedger l;
    std::size_t n = 1 + rng() % 30;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<int> scenes(1 + rng() % 6);
      for (auto& s : scenes) s = static_cast<int>(rng() % 8) - 2;
      l.records.push_back(scripted_record("t" + std::to_string(i), static_cast<corpus::Difficulty>(rng() % 3),
                                          corpus::kAllSubjects[rng() % 4], scenes, 5));
    }
    for (const auto& row : report::cumulative_counts(l, budgets)) {
      for (std::size_t b = 1; b < row.successes.size(); ++b) {
        if (row.successes[b] < row.successes[b - 1]) o.fail("ledger " + std::to_string(trial) + " decreases");
      }
    }
    auto t = report::cumulative_success(l, budgets);
    for (const auto& row : t.rows) {
      for (std::size_t c = 3; c < row.size(); ++c) {
        if (std::stoi(row[c]) < std::stoi(row[c - 1])) o.fail("table " + std::to_string(trial) + " decreases");
      }
    }
  }
  if (o.ok) o.detail = overall + ", 1000 ledgers monotone";
  return o;
}

Outcome fix_loop() {
  Outcome o;
  testing::TempDir dir("tea-accept");
  testing::ScriptedClient client([](const gateway::ChatRequest&) { return testing::python_reply(); });
  codegen::CodeGenerator gen(client, testing::shipped_prompts(), {"openai/gpt-4o", 0.7, 8192, 5, 8000, true});
  std::mt19937 rng(500);
  std::size_t succeeded = 0;
  for (int trial = 0; trial < 500 && o.ok; ++trial) {
    std::vector<bool> verdicts(8);
    for (auto&& v : verdicts) v = rng() % 4 == 0;
    testing::ScriptedExecutor ex(verdicts);
    auto r = codegen::run_scene_loop(gen, ex, {0, "T", "plan", dir / ("s" + std::to_string(trial))});
    if (r.attempts.size() > 6) o.fail("trace " + std::to_string(trial) + " has " + std::to_string(r.attempts.size()));
    if (ex.calls() != r.attempts.size()) o.fail("executor ran past the recorded attempts");
    int first = -1;
    for (std::size_t k = 0; k < 6; ++k) {
      if (verdicts[k]) {
        first = static_cast<int>(k);
        break;
      }
    }
    if (r.status == codegen::SceneStatus::kSucceeded) {
      ++succeeded;
      if (static_cast<int>(r.attempts.size()) != first + 1 || !r.attempts.back().ok) {
        o.fail("trace " + std::to_string(trial) + " not truncated at its success");
      }
    } else if (first >= 0 || r.attempts.size() != 6) {
      o.fail("trace " + std::to_string(trial) + " failed wrongly");
    }
  }
  if (o.ok) o.detail = "500 traces, " + std::to_string(succeeded) + " succeeded";
  return o;
}

Outcome retrieval_exactness() {
  Outcome o;
  static const char* vocab[] = {"square", "circle", "axes", "graph", "vector", "matrix", "rotate", "shift",
                                "color", "text", "tex", "arrow", "line", "dot", "label", "camera", "zoom",
                                "fade", "write", "plot", "surface", "number", "plane", "brace"};
  static const char* plugins[] = {"", "", "manim-physics", "manim-chemistry", "manim-dsa"};
  std::mt19937 rng(200);
  retrieval::HashingEmbedder e(64);
  std::size_t queries = 0;
  for (int trial = 0; trial < 200 && o.ok; ++trial) {
    retrieval::VectorIndex index(e.dimension(), e.name());
    std::size_t n = 1 + rng() % 1000;
    std::vector<std::string> texts(n);
    for (auto& t : texts) {
      for (std::size_t w = 0, m = 1 + rng() % 8; w < m; ++w) t += std::string(vocab[rng() % 24]) + " ";
    }
    auto vecs = e.embed(texts);
    for (std::size_t i = 0; i < n; ++i) {
      index.add({0, "doc.md", retrieval::ChunkKind::kProse, plugins[rng() % 5], texts[i]}, vecs[i]);
    }
    retrieval::Retriever r(index, e);
    for (int q = 0; q < 3; ++q, ++queries) {
      std::string query = std::string(vocab[rng() % 24]) + " " + vocab[rng() % 24];
      retrieval::RetrievalConfig cfg{1 + rng() % 10, (rng() % 100) / 100.0, {}};
      if (rng() % 2) cfg.plugin_allowlist = {"manim-physics", "manim-dsa"};
      std::vector<std::string> qv = {query};
      auto qe = e.embed(qv)[0];
      std::vector<std::pair<std::uint32_t, double>> all;
      for (std::uint32_t id = 0; id < index.size(); ++id) {
        const auto& c = index.chunk(id);
        bool allowed = c.plugin.empty() || std::find(cfg.plugin_allowlist.begin(), cfg.plugin_allowlist.end(),
                                                     c.plugin) != cfg.plugin_allowlist.end();
        if (!allowed) continue;
        auto row = index.embedding(id);
        double dot = 0;
        for (std::size_t d = 0; d < row.size(); ++d) dot += double(row[d]) * qe[d];
        all.emplace_back(id, (1.0 + std::clamp(dot, -1.0, 1.0)) / 2.0);
      }
      auto expected = oracle::top_k(all, cfg.k, cfg.threshold);
      auto got = r.retrieve(query, cfg);
      bool same = got.size() == expected.size();
      for (std::size_t i = 0; same && i < got.size(); ++i) {
        same = got[i].id == expected[i].first && got[i].score == expected[i].second;
      }
      if (!same) o.fail("index " + std::to_string(trial) + " query '" + query + "' mismatches");
    }
  }
  if (o.ok) o.detail = "200 indices, " + std::to_string(queries) + " queries, 0 mismatches";
  return o;
}

Outcome taxonomy() {
  Outcome o;
  auto goldens = json::parse(util::read_file(std::filesystem::path(TEA_TEST_FIXTURES) / "stderr_goldens.json"));
  auto classifier = codegen::ErrorClassifier::load(data_dir() / "config/error_patterns.json");
  std::size_t total = 0;
  for (auto category : {codegen::ErrorCategory::kApiHallucination, codegen::ErrorCategory::kLatexRendering,
                        codegen::ErrorCategory::kGeneralCoding}) {
    const auto& cases = goldens.at(std::string(codegen::to_string(category)));
    if (cases.size() < 5) o.fail(std::string(codegen::to_string(category)) + " has fewer than 5 goldens");
    for (const auto& c : cases) {
      ++total;
      if (classifier.classify(c.get<std::string>()) != category) o.fail("misclassified: " + c.get<std::string>());
    }
  }
  if (o.ok) o.detail = std::to_string(total) + "/" + std::to_string(total) + " goldens";
  return o;
}

Outcome srt_round_trip() {
  Outcome o;
  std::mt19937 rng(100);
  static const char* words[] = {"the", "area", "of", "a", "square", "equals", "sum", "legs", "proof", "now"};
  for (int trial = 0; trial < 100 && o.ok; ++trial) {
    std::vector<srt::SceneNarration> scenes;
    double start = 0.0;
    for (std::size_t s = 0, n = 1 + rng() % 8; s < n; ++s) {
      srt::SceneNarration sn;
      sn.start_s = start;
      sn.duration_s = 2.0 + (rng() % 4000) / 100.0;
      for (std::size_t k = 0, m = 1 + rng() % 5; k < m; ++k) {
        for (std::size_t w = 0, wn = 1 + rng() % 12; w < wn; ++w) sn.narration += std::string(words[rng() % 10]) + " ";
        sn.narration.back() = '.';
        sn.narration += ' ';
      }
      start += sn.duration_s;
      scenes.push_back(sn);
    }
    auto cues = srt::build_cues(scenes);
    auto text = srt::emit_srt(cues);
    if (srt::parse_srt(text) != cues) o.fail("layout " + std::to_string(trial) + " does not round-trip");
    if (srt::emit_srt(srt::parse_srt(text)) != text) o.fail("layout " + std::to_string(trial) + " re-emits differently");
  }
  const std::vector<std::string> rejects = {
      "2\n00:00:00,000 --> 00:00:01,000\na\n\n",
      "1\n00:00:00,000 --> 00:00:01,000\na\n\n3\n00:00:02,000 --> 00:00:03,000\nb\n\n",
      "one\n00:00:00,000 --> 00:00:01,000\na\n\n",
      "1\n00:00:00.000 --> 00:00:01,000\na\n\n",
      "1\n0:00:00,000 --> 00:00:01,000\na\n\n",
      "1\n00:60:00,000 --> 01:00:01,000\na\n\n",
      "1\n00:00:00,000 -> 00:00:01,000\na\n\n",
      "1\n00:00:02,000 --> 00:00:01,000\na\n\n",
      "1\n00:00:01,000 --> 00:00:01,000\na\n\n",
      "1\n00:00:00,000 --> 00:00:03,000\na\n\n2\n00:00:02,000 --> 00:00:04,000\nb\n\n",
      "1\n00:00:00,000 --> 00:00:01,000\n\n",
      "1\n",
      "1\n00:00:00,000 --> 00:00:01,000\na\n\n\n2\n00:00:01,000 --> 00:00:02,000\nb\n\n",
      "1\n00:00:00,000 --> 00:00:01,000 X1:2\na\n\n"};
  for (std::size_t i = 0; i < rejects.size(); ++i) {
    try {
      srt::parse_srt(rejects[i]);
      o.fail("rejection case " + std::to_string(i) + " accepted");
    } catch (const srt::SrtSyntaxError&) {
    }
  }
  if (o.ok) o.detail = "100 layouts, " + std::to_string(rejects.size()) + " rejections";
  return o;
}

Outcome statistics() {
  Outcome o;
  std::mt19937_64 rng(1000);
  std::uniform_real_distribution<double> u(-1000, 1000);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::size_t n = 2 + rng() % 60;
    std::vector<double> xs(n), ys(n);
    for (auto& x : xs) x = u(rng);
    for (auto& y : ys) y = u(rng);
    worst = std::max(worst, std::abs(stats::spearman(xs, ys) - oracle::spearman_rank_formula(xs, ys)));
  }
  if (!(worst < 1e-12)) o.fail("spearman deviates by " + std::to_string(worst));
  std::vector<double> t = {1, 2, 2, 3}, v = {1, 2, 3, 4};
  if (std::abs(stats::spearman(t, v) - 3.0 / std::sqrt(10.0)) > 1e-12) o.fail("tie golden 1");
  std::vector<double> t2 = {5, 5, 5, 1}, v2 = {2, 2, 1, 0};
  // ranks (3,3,3,1) vs (3.5,3.5,2,1): Pearson of the ranks is 0.8164965809277261.
  if (std::abs(stats::spearman(t2, v2) - std::sqrt(2.0 / 3.0)) > 1e-12) o.fail("tie golden 2");

  std::size_t checked = 0;
  double worst_alpha = 0.0;
  while (checked < 200) {
    std::size_t raters = 2 + rng() % 4;
    std::size_t items = 2 + rng() % 8;
    std::vector<std::vector<double>> m(raters, std::vector<double>(items));
    for (auto& row : m) {
      for (auto& x : row) x = (rng() % 5 == 0) ? stats::kMissing : static_cast<double>(1 + rng() % 5);
    }
    double got;
    try {
      got = stats::krippendorff_alpha(m);
    } catch (const stats::InsufficientData&) {
      continue;
    }
    worst_alpha = std::max(worst_alpha, std::abs(got - oracle::krippendorff_ordinal(m)));
    ++checked;
  }
  if (!(worst_alpha < 1e-9)) o.fail("alpha deviates by " + std::to_string(worst_alpha));
  std::vector<std::vector<double>> agree = {{1, 2, 3, stats::kMissing}, {1, 2, 3, 4}, {stats::kMissing, 2, 3, 4}};
  if (stats::krippendorff_alpha(agree) != 1.0) o.fail("alpha on agreement is not 1");
  if (o.ok) o.detail = "1000 spearman, 200 alpha";
  return o;
}

std::set<std::string> listing(const std::filesystem::path& root) {
  std::set<std::string> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
    out.insert(std::filesystem::relative(e.path(), root).string());
  }
  return out;
}

Outcome offline_end_to_end() {
  Outcome o;
  testing::TempDir a("tea-accept"), b("tea-accept");
  auto before = net::outbound_request_count();
  for (const auto* dir : {&a, &b}) {
    std::ostringstream out, err;
    int code = cli::run({"--mock", "generate", "--all", "--stamp", "acceptance", "--runs", (*dir / "runs").string()},
                        out, err);
    if (code != cli::kExitOk) o.fail("generate exited " + std::to_string(code) + ": " + err.str());
  }
  if (!o.ok) return o;
  if (net::outbound_request_count() != before) o.fail("network requests were made");
  auto ra = a / "runs", rb = b / "runs";
  if (listing(ra) != listing(rb)) o.fail("run directories differ");
  auto entries = corpus::load_corpus(data_dir() / "corpus/sample_corpus.json");
  if (entries.size() != 5) o.fail("fixture corpus does not hold 5 theorems");
  std::size_t ok = 0;
  for (const auto& t : entries) {
    auto da = ra / t.id / "acceptance", db = rb / t.id / "acceptance";
    auto record = pipeline::load_run_record(da / "run_record.json");
    ok += record.success ? 1 : 0;
    if (record.ledger.records.empty()) o.fail(t.id + " has an empty ledger");
    auto ledger = gateway::ledger_from_json(json::parse(util::read_file(da / "ledger.json")));
    if (ledger.records.empty()) o.fail(t.id + " ledger.json is empty");
    if (!std::filesystem::exists(da / "final.srt")) {
      o.fail(t.id + " has no subtitles");
      continue;
    }
    auto sa = util::read_file(da / "final.srt");
    if (sa != util::read_file(db / "final.srt")) o.fail(t.id + " subtitles differ between runs");
    srt::parse_srt(sa);
  }
  if (o.ok) o.detail = std::to_string(ok) + "/5 succeeded, SRT identical, 0 requests";
  return o;
}

Outcome keyframes() {
  Outcome o;
  testing::TempDir dir("tea-accept");
  media::write_solid_clip(dir / "static.mp4", 10.0, 40, 80, 120, 15.0, 160, 90);
  media::write_clip(dir / "alt.mp4", 15.0, 160, 90, 150, [](int i, media::VideoFrame& f) {
    std::fill(f.bgr.begin(), f.bgr.end(), (i / 15) % 2 == 0 ? 0 : 255);
  });
  auto s = evaluator::extract_keyframes(dir / "static.mp4", {1.0, 0.05, 50});
  auto alt = evaluator::extract_keyframes(dir / "alt.mp4", {1.0, 0.05, 50});
  if (s.size() != 1) o.fail("static clip gives " + std::to_string(s.size()));
  if (alt.size() != 10) o.fail("alternating clip gives " + std::to_string(alt.size()));
  if (o.ok) o.detail = "1 and 10";
  return o;
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::warn);
  const std::vector<Criterion> criteria = {
      {"geometric-mean", 1.0, geometric_mean},
      {"cost", 1.0, cost},
      {"success-accounting", 10.0, success_accounting},
      {"fix-loop-bound", 10.0, fix_loop},
      {"retrieval-exactness", 30.0, retrieval_exactness},
      {"error-taxonomy", 1.0, taxonomy},
      {"srt-round-trip", 5.0, srt_round_trip},
      {"statistics-oracles", 30.0, statistics},
      {"offline-end-to-end", 60.0, offline_end_to_end},
      {"keyframe-rule", 30.0, keyframes},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o.fail(std::string("threw: ") + e.what());
    }
    double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (o.ok && elapsed >= c.limit_s) o.fail("took longer than the limit");
    failures += o.ok ? 0 : 1;
    std::printf("%s %-20s %7.3fs (limit %gs) %s\n", o.ok ? "PASS" : "FAIL", c.name.c_str(), elapsed, c.limit_s,
                o.detail.c_str());
  }
  std::fflush(stdout);
  return failures == 0 ? 0 : 1;
}
