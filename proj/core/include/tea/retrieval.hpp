#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tea/corpus.hpp"
#include "tea/error.hpp"
#include "tea/gateway.hpp"
#include "tea/net.hpp"
#include "tea/prompts.hpp"

namespace tea::retrieval {

class EmptyCorpus : public Error {
 public:
  EmptyCorpus() : Error("no documentation sources found under the ingest roots") {}
};

class EmbeddingPortUnavailable : public Error {
 public:
  using Error::Error;
};

class IndexEmpty : public Error {
 public:
  IndexEmpty() : Error("vector index is empty") {}
};

class QueryParseError : public Error {
 public:
  explicit QueryParseError(std::string raw_text)
      : Error("no queries found in the model response"), raw_text_(std::move(raw_text)) {}
  const std::string& raw_text() const { return raw_text_; }

 private:
  std::string raw_text_;
};

class IndexFormatError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Splitting

enum class DocLanguage { kPlain, kMarkdown, kPython };

DocLanguage language_for(const std::filesystem::path& path);
// Separator regexes tried in order, coarsest first; the last is "".
std::vector<std::string> separators_for(DocLanguage language);

struct SplitterConfig {
  std::size_t chunk_size = 1000;
  std::size_t chunk_overlap = 100;
};

// Recursive character splitter: split on the first separator present,
// recurse into oversize pieces with the finer separators, then greedily
// merge pieces into chunks of at most chunk_size with up to chunk_overlap
// characters carried over between neighbours. Separators stay attached to
// the start of the piece that follows them; chunks are whitespace-trimmed.
class RecursiveTextSplitter {
 public:
  RecursiveTextSplitter(SplitterConfig config, std::vector<std::string> separators);
  explicit RecursiveTextSplitter(DocLanguage language, SplitterConfig config = {});

  std::vector<std::string> split(std::string_view text) const;

 private:
  std::vector<std::string> split_recursive(std::string_view text, std::span<const std::string> separators) const;
  std::vector<std::string> merge(std::span<const std::string> pieces) const;

  SplitterConfig config_;
  std::vector<std::string> separators_;
};

// ---------------------------------------------------------------------------
// Embeddings

class EmbeddingPort {
 public:
  virtual ~EmbeddingPort() = default;
  virtual std::vector<std::vector<float>> embed(std::span<const std::string> texts) = 0;
  virtual std::size_t dimension() const = 0;
  virtual std::string name() const = 0;
};

// Deterministic offline embedder: signed feature hashing of lowercase word
// tokens and adjacent-token pairs, L2-normalized.
class HashingEmbedder final : public EmbeddingPort {
 public:
  explicit HashingEmbedder(std::size_t dimension = 256);
  std::vector<std::vector<float>> embed(std::span<const std::string> texts) override;
  std::size_t dimension() const override { return dimension_; }
  std::string name() const override;
  std::size_t calls() const { return calls_; }

 private:
  std::vector<float> embed_one(std::string_view text) const;

  std::size_t dimension_;
  std::size_t calls_ = 0;
};

struct HttpEmbedderConfig {
  std::string base_url;
  std::string api_key_env;
  std::string model = "text-embedding-3-small";
  std::size_t dimension = 1536;
  int timeout_s = 120;
};

// OpenAI-compatible <base_url>/embeddings endpoint.
class HttpEmbedder final : public EmbeddingPort {
 public:
  HttpEmbedder(HttpEmbedderConfig config, std::shared_ptr<net::HttpTransport> transport = nullptr);
  std::vector<std::vector<float>> embed(std::span<const std::string> texts) override;
  std::size_t dimension() const override { return config_.dimension; }
  std::string name() const override { return "http:" + config_.model; }

 private:
  HttpEmbedderConfig config_;
  std::shared_ptr<net::HttpTransport> transport_;
};

// ---------------------------------------------------------------------------
// Index

enum class ChunkKind { kProse, kCode };
std::string_view to_string(ChunkKind kind);

struct DocChunk {
  std::uint32_t id = 0;
  std::string source_path;
  ChunkKind kind = ChunkKind::kProse;
  std::string plugin;  // empty for renderer core documentation
  std::string text;
};

// Exact-scan index. Rows are unit-normalized on insert.
class VectorIndex {
 public:
  VectorIndex(std::size_t dimension, std::string embedder_name);

  std::uint32_t add(DocChunk chunk, std::span<const float> embedding);

  std::size_t size() const { return chunks_.size(); }
  bool empty() const { return chunks_.empty(); }
  std::size_t dimension() const { return dimension_; }
  const std::string& embedder_name() const { return embedder_name_; }
  const DocChunk& chunk(std::uint32_t id) const { return chunks_.at(id); }
  std::span<const DocChunk> chunks() const { return chunks_; }
  std::span<const float> embedding(std::uint32_t id) const;

  // Directory with chunks.jsonl, vectors.bin (little-endian float32,
  // row-major) and meta.json.
  void save(const std::filesystem::path& dir) const;
  static VectorIndex load(const std::filesystem::path& dir);

 private:
  std::size_t dimension_;
  std::string embedder_name_;
  std::vector<DocChunk> chunks_;
  std::vector<float> vectors_;
};

struct IngestRoot {
  std::filesystem::path path;
  std::string plugin;  // empty: core docs
};

struct IngestStats {
  std::size_t sources = 0;
  std::size_t chunks = 0;
  std::size_t prose_chunks = 0;
  std::size_t code_chunks = 0;
};

// Recursively ingests .md/.markdown/.rst/.txt (prose) and .py (code) files
// in sorted path order.
IngestStats ingest_docs(std::span<const IngestRoot> roots, EmbeddingPort& embedder, VectorIndex& index,
                        const SplitterConfig& splitter = {});

// ---------------------------------------------------------------------------
// Retrieval

enum class QueryStage { kStoryboard, kImplementation, kErrorFix };
std::string_view to_string(QueryStage stage);
std::optional<QueryStage> parse_stage(std::string_view s);

struct RetrievalConfig {
  std::size_t k = 2;
  double threshold = 0.5;
  std::vector<std::string> plugin_allowlist;

  // Throws std::invalid_argument unless k >= 1 and threshold in [0,1].
  void validate() const;
};

struct ScoredChunk {
  std::uint32_t id = 0;
  double score = 0.0;  // (1 + cos) / 2

  bool operator==(const ScoredChunk&) const = default;
};

// Similarity mapped to [0,1].
double relevance(std::span<const float> a, std::span<const float> b);

class QueryCache {
 public:
  std::optional<std::vector<ScoredChunk>> lookup(const std::string& key) const;
  void store(const std::string& key, std::vector<ScoredChunk> value);
  std::size_t size() const;
  std::size_t hits() const;

  static std::string key(QueryStage stage, std::string_view query, const RetrievalConfig& config);

 private:
  mutable std::mutex mu_;
  std::map<std::string, std::vector<ScoredChunk>> entries_;
  mutable std::size_t hits_ = 0;
};

class Retriever {
 public:
  Retriever(const VectorIndex& index, EmbeddingPort& embedder);

  // Top-k chunks by relevance at or above the threshold, best first (ties
  // by ascending id), restricted to core docs plus allow-listed plugins.
  // Memoized per (stage, query, plugin set, k, threshold).
  std::vector<ScoredChunk> retrieve(std::string_view query, const RetrievalConfig& config,
                                    QueryStage stage = QueryStage::kImplementation);

  const VectorIndex& index() const { return index_; }
  QueryCache& cache() { return cache_; }

 private:
  const VectorIndex& index_;
  EmbeddingPort& embedder_;
  QueryCache cache_;
  std::mutex embed_mu_;
};

// Prompt block listing retrieved excerpts; empty when nothing was retrieved.
std::string format_context(const VectorIndex& index, std::span<const ScoredChunk> results);

// ---------------------------------------------------------------------------
// Agentic steps

// Plugin names accepted from the model, in the order the model gave them.
std::vector<std::string> parse_plugin_answer(std::string_view text, std::span<const std::string> catalog);
// Numbered or bulleted list (or a JSON array) of at most max_queries items.
std::vector<std::string> parse_query_list(std::string_view text, std::size_t max_queries);
// Catalog entries present in a plugins.json probe file; the whole catalog
// when the file does not exist.
std::vector<std::string> effective_catalog(std::span<const std::string> catalog,
                                           const std::filesystem::path& probe_file);

struct RagAgentConfig {
  std::string model_id;
  double temperature = 0.7;
  int max_output_tokens = 1024;
  std::size_t max_queries = 5;
  std::vector<std::string> plugin_catalog;
};

class RagAgent {
 public:
  RagAgent(gateway::ChatClient& client, const PromptLibrary& prompts, RagAgentConfig config);

  std::vector<std::string> classify_plugins(const corpus::TheoremEntry& theorem) const;
  std::vector<std::string> generate_queries(QueryStage stage, std::string_view context) const;

 private:
  gateway::ChatClient& client_;
  const PromptLibrary& prompts_;
  RagAgentConfig config_;
};

}  // namespace tea::retrieval
