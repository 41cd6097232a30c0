#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "nav/corpus.hpp"

namespace nav {

struct FieldWeights {
  double authors = 3.0;
  double title = 2.5;
  double abstract = 1.5;
  double body = 0.5;
  double dismax_tiebreak = 0.1;

  double weight(Field f) const;
  /// All weights positive and body strictly the smallest.
  bool valid() const;
};

struct KeywordParams {
  FieldWeights weights;
  std::size_t max_ngram = 3;
  double stopword_boost = 0.25;
  double recency_tau_days = 730.0;
  Date today = today_utc();
};

bool is_stopword(std::string_view token);

struct NGram {
  std::vector<std::string> tokens;
  double boost = 1.0;

  std::size_t n() const { return tokens.size(); }
  std::string text() const;
};

struct QueryPlan {
  std::string raw_query;
  std::vector<NGram> ngrams;
};

/// All contiguous n-grams up to max_ngram, boost(n) = n, stopword unigrams
/// boosted by `stopword_boost`. Throws Error{EmptyQuery}.
QueryPlan plan_query(std::string_view q, std::size_t max_ngram = 3, double stopword_boost = 0.25);

struct NGramScore {
  std::string ngram;
  Field winning_field = Field::title;
  double field_score = 0.0;  // the max field score
  double combined = 0.0;     // max + tiebreak * sum(others)
  double boost = 0.0;
  std::array<double, 4> field_scores{};
};

struct PriorBreakdown {
  double citation_component = 1.0;  // 1 + ln(1 + citations)
  double recency_component = 1.0;   // exp(-age_days / tau)
  double value() const { return citation_component * recency_component; }
};

struct ScoreBreakdown {
  std::vector<NGramScore> ngrams;
  PriorBreakdown prior;
  double match_total = 0.0;
  double total = 0.0;

  /// prior * sum(boost * combined), recomputed from the parts.
  double reconstruct() const;
};

struct RankedResult {
  std::string doc_id;
  double score = 0.0;
  Date published_at{};
  ScoreBreakdown breakdown;
};

PriorBreakdown document_prior(std::int64_t citation_count, Date published_at, Date today, double tau_days);

/// Inverted index over authors/title/abstract/body with token positions.
/// Single writer; copy to publish an immutable snapshot.
class KeywordIndex {
public:
  explicit KeywordIndex(KeywordParams params = {}) : params_(std::move(params)) {}

  const KeywordParams& params() const { return params_; }
  void set_params(KeywordParams p) { params_ = std::move(p); }

  /// Same (id, version) is a no-op; a newer version replaces the postings.
  void index_document(const Document& doc);

  std::size_t size() const { return docs_.size(); }
  bool contains(std::string_view doc_id) const;

  /// Constant field weight on phrase presence for metadata fields;
  /// weight * tf / (tf + 1) for body.
  double field_match_score(std::string_view doc_id, Field field, const NGram& ngram) const;
  std::size_t phrase_count(std::string_view doc_id, Field field, const std::vector<std::string>& tokens) const;

  /// nullopt for an unknown doc; match_total may be 0.
  std::optional<ScoreBreakdown> score_document(std::string_view doc_id, const QueryPlan& plan) const;

  /// Top-k by total; ties by newer published_at, then doc id. Docs with no
  /// match are excluded. Throws Error{EmptyQuery}.
  std::vector<RankedResult> search(std::string_view q, std::size_t k) const;

  /// Term -> doc ids, sorted; for inspection and tests.
  std::vector<std::string> documents_with_term(std::string_view term) const;
  bool same_content(const KeywordIndex& other) const;

  // Layout documented in docs/index_formats.md ("NAVKIDX1").
  void save(std::ostream& out) const;
  static KeywordIndex load(std::istream& in, KeywordParams params = {});

private:
  struct DocEntry {
    std::string id;
    std::int64_t version = 0;
    Date published_at{};
    std::int64_t citation_count = 0;
    std::vector<std::string> terms;  // distinct, for removal on reindex
  };
  using Positions = std::array<std::vector<std::uint32_t>, 4>;
  using Postings = std::map<std::uint32_t, Positions>;

  const Positions* positions(std::uint32_t doc, const std::string& term) const;
  std::size_t phrase_count(std::uint32_t doc, Field field, const std::vector<std::string>& tokens) const;
  double field_match_score(std::uint32_t doc, Field field, const NGram& ngram) const;
  ScoreBreakdown score(std::uint32_t doc, const QueryPlan& plan) const;

  KeywordParams params_;
  std::vector<DocEntry> docs_;
  std::unordered_map<std::string, std::uint32_t> ordinals_;
  std::unordered_map<std::string, Postings> postings_;
};

}  // namespace nav
