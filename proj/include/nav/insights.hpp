#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nav/concept_kg.hpp"
#include "nav/corpus.hpp"
#include "nav/embedding.hpp"
#include "nav/vector_search.hpp"

namespace nav {

enum class QueryClass { question, keyword, other };

inline constexpr std::array<QueryClass, 3> kQueryClasses = {QueryClass::question, QueryClass::keyword,
                                                            QueryClass::other};

std::string_view to_string(QueryClass c);
bool parse_query_class(std::string_view s, QueryClass& out);

struct QueryKind {
  QueryClass kind = QueryClass::other;
  double probability = 0.0;
};

using LabeledExample = std::pair<std::string, QueryClass>;

/// `text<TAB>label` lines. Throws Error{Format}.
std::vector<LabeledExample> read_labeled_tsv(std::istream& in);

/// Unigram tokens plus pseudo-tokens for a '?', a leading wh-/auxiliary
/// word, and the absence of both.
std::vector<std::string> classifier_features(std::string_view text);

/// Multinomial naive Bayes with add-one smoothing. Training only counts, so
/// the model does not depend on example order.
class BayesModel {
public:
  /// Throws Error{InsufficientClasses} when fewer than two classes occur.
  static BayesModel train(const std::vector<LabeledExample>& examples);

  QueryKind classify(std::string_view text) const;
  double prior(QueryClass c) const;
  std::size_t vocabulary_size() const { return vocab_.size(); }

  bool operator==(const BayesModel&) const = default;

private:
  std::array<std::size_t, 3> docs_{};
  std::array<std::size_t, 3> token_totals_{};
  std::map<std::string, std::array<std::size_t, 3>> vocab_;
  std::size_t total_docs_ = 0;
};

/// Deterministic shuffle + split; the first `train_fraction` goes to training.
std::pair<std::vector<LabeledExample>, std::vector<LabeledExample>> split_examples(
    std::vector<LabeledExample> examples, double train_fraction, std::uint64_t seed);

double accuracy(const BayesModel& model, const std::vector<LabeledExample>& examples);

/// "What is <q>?" with q lowercased and trimmed.
std::string question_template(std::string_view keyword_query);
/// Same, but throws Error{PreconditionViolation} unless `model` says keyword.
std::string auto_question(const BayesModel& model, std::string_view keyword_query);

struct SentenceAnswer {
  std::string key;
  std::string doc_id;
  Field field = Field::body;
  std::size_t start_char = 0;
  std::size_t end_char = 0;
  double similarity = 0.0;
  std::string sentence;
  std::string context;  // enclosing chunk
};

using DocumentLookup = std::function<const Document*(std::string_view)>;

/// Throws Error{EmptyIndex|EmptyText}.
std::vector<SentenceAnswer> answer_sentences(std::string_view question, std::size_t k, const GranularIndices& indices,
                                             const Embedder& embedder, const DocumentLookup& documents,
                                             std::size_t ef = 0);

enum class Bucket { month, year };

std::string_view to_string(Bucket b);
bool parse_bucket(std::string_view s, Bucket& out);

struct AnalyticsSpec {
  std::vector<std::string> concepts;
  Bucket bucket = Bucket::month;
  std::string rule;  // "multi_concept" | "which_type"
};

std::optional<AnalyticsSpec> match_template(std::string_view query, const KnowledgeGraph& kg);

struct PopularityPoint {
  std::string period;  // YYYY-MM or YYYY
  std::size_t count = 0;
};

struct PopularitySeries {
  std::string concept_id;
  std::vector<PopularityPoint> series;
};

/// Per period, the number of distinct documents with at least one linked
/// mention of each concept. All series share one contiguous axis spanning the
/// corpus date range. Throws Error{UnknownConcept}.
std::vector<PopularitySeries> contrastive_popularity(const std::vector<std::string>& concept_ids,
                                                     const KnowledgeGraph& kg,
                                                     const std::vector<StandoffAnnotation>& concept_links,
                                                     const std::map<std::string, Date>& published,
                                                     Bucket bucket = Bucket::month);

}  // namespace nav
