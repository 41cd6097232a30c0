#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "nav/corpus.hpp"
#include "nav/embedding.hpp"
#include "nav/hnsw.hpp"

namespace nav {

enum class Granularity { document, chunk, sentence };

std::string_view to_string(Granularity g);
bool parse_granularity(std::string_view s, Granularity& out);

/// What an index key points at. Document keys cover title + abstract.
struct IndexedSpan {
  std::string doc_id;
  Granularity granularity = Granularity::document;
  Field field = Field::title;
  std::size_t start_char = 0;
  std::size_t end_char = 0;
  std::size_t ordinal = 0;
  // Chunk enclosing a sentence (same field); unused for other granularities.
  std::size_t chunk_start = 0;
  std::size_t chunk_end = 0;

  bool operator==(const IndexedSpan&) const = default;
};

struct EmbeddedUnit {
  std::string key;
  IndexedSpan span;
  Vector vector;
};

std::string document_key(std::string_view doc_id);
std::string sentence_key(std::string_view doc_id, Field field, std::size_t ordinal);
std::string chunk_key(std::string_view doc_id, Field field, std::size_t ordinal);

/// Text used for the document-granularity vector.
std::string document_text(const Document& doc);

/// Embeds every sentence and chunk of abstract + body plus the document
/// itself. Units whose text has no tokens are skipped.
std::vector<EmbeddedUnit> embed_document_units(const Document& doc, const Embedder& embedder,
                                               std::size_t chunk_size = kDefaultChunkSize);

using VectorIndex = HnswIndex<double>;

struct GranularIndices {
  VectorIndex sentences;
  VectorIndex chunks;
  VectorIndex documents;
  std::map<std::string, IndexedSpan> spans;

  explicit GranularIndices(HnswParams params = {}) : sentences(params), chunks(params), documents(params) {}

  VectorIndex& index(Granularity g);
  const VectorIndex& index(Granularity g) const;
  const IndexedSpan& span(const std::string& key) const;
};

/// Inserts units in ascending key order, so the graphs depend only on the
/// unit set and the seed.
GranularIndices build_indices_from_units(std::vector<EmbeddedUnit> units, HnswParams params);
GranularIndices build_indices(const std::vector<Document>& corpus, const Embedder& embedder, HnswParams params);

struct FusedResult {
  std::string doc_id;
  double score = 0.0;
  std::size_t keyword_rank = 0;  // 1-based; 0 when absent
  std::size_t vector_rank = 0;
};

inline constexpr double kRrfConstant = 60.0;

/// Reciprocal rank fusion over two ranked doc-id lists (1-based ranks).
/// Duplicates within one list keep their first rank.
std::vector<FusedResult> fuse(const std::vector<std::string>& keyword_ranked,
                              const std::vector<std::string>& vector_ranked, std::size_t k);

}  // namespace nav
