#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "tea/retrieval.hpp"
#include "tea/util.hpp"

namespace tea::retrieval {
namespace {

using nlohmann::json;

constexpr std::size_t kEmbedBatch = 64;

bool is_ingestable(const std::filesystem::path& p) {
  static const std::set<std::string> kExt = {".md", ".markdown", ".rst", ".txt", ".py"};
  return kExt.contains(util::to_lower(p.extension().string()));
}

}  // namespace

std::string_view to_string(ChunkKind kind) { return kind == ChunkKind::kCode ? "code" : "prose"; }

VectorIndex::VectorIndex(std::size_t dimension, std::string embedder_name)
    : dimension_(dimension), embedder_name_(std::move(embedder_name)) {
  if (dimension_ == 0) throw std::invalid_argument("index dimension must be positive");
}

std::uint32_t VectorIndex::add(DocChunk chunk, std::span<const float> embedding) {
  if (embedding.size() != dimension_) {
    throw std::invalid_argument(fmt::format("embedding has {} dims, index expects {}", embedding.size(), dimension_));
  }
  if (util::trim(chunk.text).empty()) throw std::invalid_argument("chunk text is empty");
  double norm = 0.0;
  for (float x : embedding) norm += static_cast<double>(x) * x;
  norm = std::sqrt(norm);
  if (!(norm > 0.0) || !std::isfinite(norm)) throw std::invalid_argument("embedding has zero or non-finite norm");
  chunk.id = static_cast<std::uint32_t>(chunks_.size());
  for (float x : embedding) vectors_.push_back(static_cast<float>(x / norm));
  chunks_.push_back(std::move(chunk));
  return chunks_.back().id;
}

std::span<const float> VectorIndex::embedding(std::uint32_t id) const {
  if (id >= chunks_.size()) throw std::out_of_range("chunk id out of range");
  return std::span<const float>(vectors_).subspan(static_cast<std::size_t>(id) * dimension_, dimension_);
}

void VectorIndex::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  std::string lines;
  for (const auto& c : chunks_) {
    lines += json{{"id", c.id}, {"source_path", c.source_path}, {"kind", to_string(c.kind)},
                  {"plugin", c.plugin}, {"text", c.text}}
                 .dump();
    lines += '\n';
  }
  util::write_file(dir / "chunks.jsonl", lines);

  std::string bytes;
  bytes.reserve(vectors_.size() * 4);
  for (float x : vectors_) {
    auto u = std::bit_cast<std::uint32_t>(x);
    for (int b = 0; b < 4; ++b) bytes.push_back(static_cast<char>((u >> (8 * b)) & 0xFFU));
  }
  util::write_file(dir / "vectors.bin", bytes);
  util::write_file(dir / "meta.json",
                   json{{"dimension", dimension_}, {"count", chunks_.size()}, {"embedder", embedder_name_}}.dump(2) + "\n");
}

VectorIndex VectorIndex::load(const std::filesystem::path& dir) {
  if (!std::filesystem::is_regular_file(dir / "meta.json")) {
    throw IndexFormatError("no index at " + dir.string() + " (missing meta.json)");
  }
  json meta = json::parse(util::read_file(dir / "meta.json"));
  VectorIndex index(meta.at("dimension").get<std::size_t>(), meta.value("embedder", ""));
  auto count = meta.at("count").get<std::size_t>();

  std::string bytes = util::read_file(dir / "vectors.bin");
  if (bytes.size() != count * index.dimension_ * 4) {
    throw IndexFormatError(fmt::format("vectors.bin holds {} bytes, expected {}", bytes.size(),
                                       count * index.dimension_ * 4));
  }
  index.vectors_.resize(count * index.dimension_);
  for (std::size_t i = 0; i < index.vectors_.size(); ++i) {
    std::uint32_t u = 0;
    for (int b = 0; b < 4; ++b) u |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[4 * i + b])) << (8 * b);
    index.vectors_[i] = std::bit_cast<float>(u);
  }

  for (const auto& line : util::split_lines(util::read_file(dir / "chunks.jsonl"))) {
    if (util::trim(line).empty()) continue;
    json j = json::parse(line);
    DocChunk c;
    c.id = j.at("id").get<std::uint32_t>();
    c.source_path = j.at("source_path").get<std::string>();
    c.kind = j.at("kind").get<std::string>() == "code" ? ChunkKind::kCode : ChunkKind::kProse;
    c.plugin = j.value("plugin", "");
    c.text = j.at("text").get<std::string>();
    if (c.id != index.chunks_.size()) throw IndexFormatError("chunk ids in chunks.jsonl are not sequential");
    index.chunks_.push_back(std::move(c));
  }
  if (index.chunks_.size() != count) {
    throw IndexFormatError(fmt::format("chunks.jsonl has {} rows, meta.json says {}", index.chunks_.size(), count));
  }
  return index;
}

IngestStats ingest_docs(std::span<const IngestRoot> roots, EmbeddingPort& embedder, VectorIndex& index,
                        const SplitterConfig& splitter) {
  if (embedder.dimension() != index.dimension()) {
    throw std::invalid_argument("embedder and index dimensions differ");
  }
  struct Source {
    std::filesystem::path path;
    std::string plugin;
  };
  std::vector<Source> sources;
  for (const auto& root : roots) {
    if (!std::filesystem::exists(root.path)) throw std::invalid_argument("ingest root does not exist: " + root.path.string());
    if (std::filesystem::is_regular_file(root.path)) {
      if (is_ingestable(root.path)) sources.push_back({root.path, root.plugin});
      continue;
    }
    std::vector<std::filesystem::path> found;
    for (const auto& e : std::filesystem::recursive_directory_iterator(root.path)) {
      if (e.is_regular_file() && is_ingestable(e.path())) found.push_back(e.path());
    }
    std::sort(found.begin(), found.end());
    for (auto& p : found) sources.push_back({std::move(p), root.plugin});
  }

  IngestStats stats;
  std::vector<DocChunk> pending;
  auto flush = [&] {
    if (pending.empty()) return;
    std::vector<std::string> texts;
    texts.reserve(pending.size());
    for (const auto& c : pending) texts.push_back(c.text);
    std::vector<std::vector<float>> vectors;
    try {
      vectors = embedder.embed(texts);
    } catch (const EmbeddingPortUnavailable&) {
      throw;
    } catch (const std::exception& e) {
      throw EmbeddingPortUnavailable(std::string("embedding port failed: ") + e.what());
    }
    if (vectors.size() != pending.size()) throw EmbeddingPortUnavailable("embedding port returned wrong batch size");
    for (std::size_t i = 0; i < pending.size(); ++i) index.add(std::move(pending[i]), vectors[i]);
    pending.clear();
  };

  for (const auto& src : sources) {
    std::string text = util::read_file(src.path);
    if (util::trim(text).empty()) continue;
    ++stats.sources;
    auto language = language_for(src.path);
    ChunkKind kind = language == DocLanguage::kPython ? ChunkKind::kCode : ChunkKind::kProse;
    for (auto& piece : RecursiveTextSplitter(language, splitter).split(text)) {
      ++stats.chunks;
      ++(kind == ChunkKind::kCode ? stats.code_chunks : stats.prose_chunks);
      pending.push_back(DocChunk{0, src.path.generic_string(), kind, src.plugin, std::move(piece)});
      if (pending.size() >= kEmbedBatch) flush();
    }
  }
  if (stats.sources == 0) throw EmptyCorpus();
  flush();
  spdlog::info("ingested {} sources into {} chunks", stats.sources, stats.chunks);
  return stats;
}

// ---------------------------------------------------------------------------

std::string_view to_string(QueryStage stage) {
  switch (stage) {
    case QueryStage::kStoryboard: return "storyboard";
    case QueryStage::kImplementation: return "implementation";
    case QueryStage::kErrorFix: return "error_fix";
  }
  return "?";
}

std::optional<QueryStage> parse_stage(std::string_view s) {
  for (auto st : {QueryStage::kStoryboard, QueryStage::kImplementation, QueryStage::kErrorFix}) {
    if (to_string(st) == s) return st;
  }
  return std::nullopt;
}

void RetrievalConfig::validate() const {
  if (k < 1) throw std::invalid_argument("retrieval k must be at least 1");
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw std::invalid_argument("retrieval threshold must lie in [0,1]");
}

double relevance(std::span<const float> a, std::span<const float> b) {
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += static_cast<double>(a[i]) * b[i];
  dot = std::clamp(dot, -1.0, 1.0);
  return (1.0 + dot) / 2.0;
}

std::optional<std::vector<ScoredChunk>> QueryCache::lookup(const std::string& key) const {
  std::lock_guard lock(mu_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  ++hits_;
  return it->second;
}

void QueryCache::store(const std::string& key, std::vector<ScoredChunk> value) {
  std::lock_guard lock(mu_);
  entries_.try_emplace(key, std::move(value));
}

std::size_t QueryCache::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

std::size_t QueryCache::hits() const {
  std::lock_guard lock(mu_);
  return hits_;
}

std::string QueryCache::key(QueryStage stage, std::string_view query, const RetrievalConfig& config) {
  std::vector<std::string> plugins = config.plugin_allowlist;
  std::sort(plugins.begin(), plugins.end());
  plugins.erase(std::unique(plugins.begin(), plugins.end()), plugins.end());
  std::string plugin_blob;
  for (const auto& p : plugins) plugin_blob += p + '\n';
  return fmt::format("{}\x1f{}\x1f{}\x1f{}\x1f{:.6f}", to_string(stage), query, util::sha256_hex(plugin_blob),
                     config.k, config.threshold);
}

Retriever::Retriever(const VectorIndex& index, EmbeddingPort& embedder) : index_(index), embedder_(embedder) {
  if (embedder_.dimension() != index_.dimension()) {
    throw std::invalid_argument("embedder and index dimensions differ");
  }
}

std::vector<ScoredChunk> Retriever::retrieve(std::string_view query, const RetrievalConfig& config, QueryStage stage) {
  config.validate();
  if (index_.empty()) throw IndexEmpty();
  auto key = QueryCache::key(stage, query, config);
  if (auto cached = cache_.lookup(key)) return *cached;

  std::vector<float> q;
  {
    std::lock_guard lock(embed_mu_);
    std::string text(query);
    q = embedder_.embed(std::span<const std::string>(&text, 1)).at(0);
  }
  std::set<std::string, std::less<>> allowed(config.plugin_allowlist.begin(), config.plugin_allowlist.end());
  std::vector<ScoredChunk> hits;
  for (const auto& c : index_.chunks()) {
    if (!c.plugin.empty() && !allowed.contains(c.plugin)) continue;
    double s = relevance(q, index_.embedding(c.id));
    if (s >= config.threshold) hits.push_back({c.id, s});
  }
  auto better = [](const ScoredChunk& a, const ScoredChunk& b) {
    return a.score != b.score ? a.score > b.score : a.id < b.id;
  };
  std::size_t keep = std::min(config.k, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(keep), hits.end(), better);
  hits.resize(keep);
  cache_.store(key, hits);
  return hits;
}

std::string format_context(const VectorIndex& index, std::span<const ScoredChunk> results) {
  if (results.empty()) return {};
  std::string out = "\nDocumentation excerpts:\n";
  for (const auto& r : results) {
    const auto& c = index.chunk(r.id);
    out += fmt::format("[chunk {} | {} | relevance {:.3f}]\n{}\n\n", c.id, c.source_path, r.score, c.text);
  }
  return out;
}

}  // namespace tea::retrieval
