#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "nav/corpus.hpp"

namespace nav {

/// Half-open range of Unicode scalar offsets.
struct TextRange {
  std::size_t start = 0;
  std::size_t end = 0;
  bool operator==(const TextRange&) const = default;
};

struct RawReference {
  std::string doc_id;
  std::string text;
  std::size_t ordinal = 0;
  TextRange range;  // offsets into the text passed to split_references
};

struct CitationRecord {
  std::string id;
  std::string source_doc_id;
  std::vector<std::string> authors;
  std::string title;
  std::optional<int> year;
  std::optional<std::string> venue;
  std::optional<std::string> linked_doc_id;
  double link_similarity = 0.0;

  bool operator==(const CitationRecord&) const = default;
};

Json to_json(const CitationRecord& r);
CitationRecord citation_from_json(const Json& j);

/// Span after the last "References"/"Bibliography" heading line (optionally
/// numbered, case-insensitive) through the end of body.
std::optional<TextRange> extract_reference_section(std::string_view body);

/// Entries shorter than this many scalar values are dropped.
inline constexpr std::size_t kMinReferenceLength = 20;

/// Splits on the first marker style present: "[n]", "n.", author-year line
/// starts, then blank lines.
std::vector<RawReference> split_references(std::string_view section, std::string_view doc_id = {});

/// Heuristic field extraction. Throws Error{UnparseableReference}.
CitationRecord parse_reference(const RawReference& raw);

/// Lowercase, punctuation removed, whitespace collapsed.
std::string normalize_title(std::string_view title);

/// Cleans a record and applies the rejection rules. `seen` holds normalized
/// titles already accepted for the same source document.
std::optional<CitationRecord> sanitize(const CitationRecord& candidate, std::set<std::string>* seen = nullptr);

/// Sanitizes a whole bibliography, rejecting repeated titles per source document.
std::vector<CitationRecord> sanitize_all(const std::vector<CitationRecord>& candidates);

struct LinkParams {
  double threshold = 0.90;
  int year_tolerance = 1;
  std::size_t max_token_df = 100;
};

/// Normalized catalog titles with a token inverted index; read-only after build.
class CatalogIndex {
public:
  struct Entry {
    std::string doc_id;
    std::string normalized_title;
    int year = 0;
    std::int64_t citation_count = 0;
  };

  CatalogIndex() = default;
  explicit CatalogIndex(const std::vector<Document>& docs);

  void add(const Document& doc);
  std::size_t size() const { return entries_.size(); }
  const Entry& entry(std::size_t i) const { return entries_[i]; }
  std::size_t document_frequency(const std::string& token) const;

  /// Entries sharing at least one token whose document frequency <= max_df.
  std::vector<std::size_t> candidates(std::string_view normalized_title, std::size_t max_df) const;

private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::vector<std::size_t>> postings_;
};

struct LinkDecision {
  std::optional<std::string> doc_id;
  double similarity = 0.0;  // best candidate similarity, linked or not
  std::size_t candidates = 0;
};

LinkDecision link_citation(const CitationRecord& record, const CatalogIndex& catalog, const LinkParams& params = {});

}  // namespace nav
