#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "nav/text.hpp"

namespace nav {

using Json = nlohmann::json;

enum class Source { arxiv, openreview, blog, other };

/// Annotatable document fields. Annotations may only reference these four.
enum class Field : std::uint8_t { title = 0, abstract = 1, authors = 2, body = 3 };

std::string_view to_string(Source s);
std::string_view to_string(Field f);
bool parse_field(std::string_view s, Field& out);

struct Document {
  std::string id;
  std::int64_t version = 1;
  Source source = Source::other;
  std::string title;
  std::string abstract;
  std::vector<std::string> authors;
  std::optional<std::string> body;
  std::optional<std::string> references_raw;
  Date published_at{};
  std::vector<std::string> categories;
  std::int64_t citation_count = 0;
  std::optional<std::string> url;

  /// Text of an annotatable field; authors are joined with "; ".
  std::string field_text(Field f) const;
  bool has_same_content(const Document& other) const;
};

/// Builds a Document from an ingest record, enforcing every invariant.
/// Whitespace runs in title and author names collapse to single spaces.
/// Throws Error{MissingField|EmptyTitle|InvalidDate|InvalidDocument}.
Document validate_document(const Json& raw, Date today = today_utc());
Document parse_document_line(std::string_view line, Date today = today_utc());
Json to_json(const Document& d);

struct SentenceSpan {
  std::string doc_id;
  Field field = Field::body;
  std::size_t start_char = 0;
  std::size_t end_char = 0;
  std::size_t ordinal = 0;

  auto operator<=>(const SentenceSpan&) const = default;
};

struct ChunkSpan {
  std::string doc_id;
  Field field = Field::body;
  std::size_t start_char = 0;
  std::size_t end_char = 0;
  std::size_t ordinal = 0;
  std::size_t first_sentence = 0;  // sentence ordinals [first, last]
  std::size_t last_sentence = 0;

  auto operator<=>(const ChunkSpan&) const = default;
};

/// Rule-based sentence splitter. Offsets count Unicode scalar values.
std::vector<SentenceSpan> segment_sentences(std::string_view text);
std::vector<SentenceSpan> segment_field(const Document& doc, Field field);

inline constexpr std::size_t kDefaultChunkSize = 10;

/// Groups consecutive sentences; throws Error{InvalidSize} when size < 1.
std::vector<ChunkSpan> chunk_sentences(const std::vector<SentenceSpan>& spans,
                                       std::size_t size = kDefaultChunkSize);

enum class AnnotationKind : std::uint8_t { concept_mention, concept_link, citation_marker, embedding_ref };

std::string_view to_string(AnnotationKind k);
bool parse_annotation_kind(std::string_view s, AnnotationKind& out);

struct StandoffAnnotation {
  std::string doc_id;
  std::int64_t doc_version = 1;
  Field field = Field::body;
  std::size_t start_char = 0;
  std::size_t end_char = 0;
  AnnotationKind kind = AnnotationKind::concept_mention;
  std::string payload;
  std::string producer_stage;

  auto operator<=>(const StandoffAnnotation&) const = default;
};

Json to_json(const StandoffAnnotation& a);
StandoffAnnotation annotation_from_json(const Json& j);

/// Throws Error{VersionMismatch|SpanOutOfBounds}.
std::string resolve_annotation(const Document& doc, const StandoffAnnotation& ann);

/// Append-only annotation store keyed by
/// (doc_id, version, kind, span, producer_stage). Re-adding an existing key is
/// a no-op, which makes producer stages idempotent.
class AnnotationStore {
public:
  bool add(const StandoffAnnotation& ann);
  std::size_t add_all(const std::vector<StandoffAnnotation>& anns);

  std::vector<StandoffAnnotation> for_doc(std::string_view doc_id, std::int64_t version) const;
  std::vector<StandoffAnnotation> of_kind(AnnotationKind kind) const;
  std::vector<StandoffAnnotation> snapshot() const;
  std::size_t size() const;

  void write_jsonl(std::ostream& out) const;
  void read_jsonl(std::istream& in);

private:
  using Key = std::tuple<std::string, std::int64_t, AnnotationKind, std::size_t, std::size_t, Field,
                         std::string>;
  static Key key_of(const StandoffAnnotation& a);

  mutable std::shared_mutex mutex_;
  std::map<Key, StandoffAnnotation> items_;
};

}  // namespace nav
