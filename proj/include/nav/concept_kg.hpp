#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "nav/corpus.hpp"
#include "nav/embedding.hpp"

namespace nav {

enum class ConceptType { method, task, dataset, metric, organization, other };
enum class ConceptOrigin { seed, promoted_candidate };

inline constexpr std::array<ConceptType, 6> kConceptTypes = {ConceptType::method,  ConceptType::task,
                                                             ConceptType::dataset, ConceptType::metric,
                                                             ConceptType::organization, ConceptType::other};

std::string_view to_string(ConceptType t);
bool parse_concept_type(std::string_view s, ConceptType& out);
std::string_view to_string(ConceptOrigin o);

struct Concept {
  std::string id;
  std::string canonical_name;
  std::vector<std::string> aliases;
  ConceptType type = ConceptType::other;
  ConceptOrigin created_from = ConceptOrigin::seed;

  bool operator==(const Concept&) const = default;
};

/// "c:" + lowercase alphanumeric runs joined by '-'.
std::string concept_id_for(std::string_view canonical_name);

/// Reads `canonical_name<TAB>type<TAB>alias1|alias2...` lines. Blank lines and
/// lines starting with '#' are skipped. Throws Error{Format} on bad lines.
std::vector<Concept> read_gazetteer(std::istream& in);

/// Token-sequence dictionary over concept names and aliases, lowercased.
class Gazetteer {
public:
  Gazetteer() = default;
  explicit Gazetteer(const std::vector<Concept>& concepts);

  void add(std::string_view surface, const std::string& concept_id);
  bool empty() const { return entries_.empty(); }
  std::size_t max_tokens() const { return max_tokens_; }
  /// Concept for a space-joined lowercase token sequence.
  const std::string* lookup(const std::string& key) const;

private:
  std::unordered_map<std::string, std::string> entries_;  // key -> smallest concept id
  std::size_t max_tokens_ = 0;
};

struct Mention {
  std::string doc_id;
  Field field = Field::body;
  std::size_t start_char = 0;
  std::size_t end_char = 0;
  std::string surface;
  std::optional<std::string> gazetteer_hit;

  bool operator==(const Mention&) const = default;
};

/// Leftmost-longest, non-overlapping, token-boundary matching.
std::vector<Mention> recognize_in_text(std::string_view text, const Gazetteer& gazetteer, std::string_view doc_id = {},
                                       Field field = Field::body);

/// Matches over title, abstract and body; sorted by (field, start).
std::vector<Mention> recognize_mentions(const Document& doc, const Gazetteer& gazetteer);

struct LinkerParams {
  double string_weight = 0.6;
  double embed_weight = 0.4;
  double threshold = 0.75;
  std::size_t context_tokens = 20;
};

struct LinkOutcome {
  Mention mention;
  std::optional<std::string> linked_concept;
  double score = 0.0;
  double string_sim = 0.0;
  double embed_sim = 0.0;
};

/// Lowercased tokens within +-window tokens of [start, end), mention included.
std::string context_window(std::string_view field_text, std::size_t start_char, std::size_t end_char,
                           std::size_t window);

/// w_s * string_sim + w_e * (embed_sim + 1) / 2.
double link_score(double string_sim, double embed_sim, const LinkerParams& params);

enum class NodeKind { concept_node, person, document };
enum class Relation { authored, cites, mentions, related_to };

std::string_view to_string(NodeKind k);
std::string_view to_string(Relation r);

struct KGNode {
  std::string id;
  NodeKind kind = NodeKind::document;
  std::string payload;  // display label: concept name, person name, document title

  bool operator==(const KGNode&) const = default;
};

struct KGEdge {
  std::string src;
  std::string dst;
  Relation relation = Relation::related_to;
  std::optional<double> weight;

  bool operator==(const KGEdge&) const = default;
};

std::string person_node_id(std::string_view author_name);
std::string document_node_id(std::string_view doc_id);
/// Lowercased, single-spaced author identity.
std::string normalize_author(std::string_view name);

/// Embedded typed graph of concepts, people and documents.
/// Single writer, concurrent readers; reads return copies.
class KnowledgeGraph {
public:
  KnowledgeGraph() = default;
  KnowledgeGraph(const KnowledgeGraph& other);
  KnowledgeGraph& operator=(const KnowledgeGraph& other);

  /// Inserts or merges aliases into an existing concept with the same id.
  /// Throws Error{InvalidDocument} when the canonical name collides
  /// case-insensitively with a different concept.
  void upsert_concept(const Concept& c);
  void upsert_node(const KGNode& node);
  /// false when (src, dst, relation) already exists.
  /// Throws Error{UnknownEndpoint|KindConstraintViolation}.
  bool add_edge(const KGEdge& edge);

  std::optional<Concept> concept_by_id(std::string_view id) const;
  std::vector<Concept> concepts() const;
  std::vector<Concept> concepts_with_prefix(std::string_view prefix) const;
  std::optional<KGNode> node(std::string_view id) const;
  std::vector<KGNode> nodes() const;
  std::vector<KGEdge> edges() const;
  std::size_t concept_count() const;

  /// Document ids d with an edge d -> doc (incoming) or doc -> d (outgoing).
  std::vector<std::string> cited_by(std::string_view doc_id) const;
  std::vector<std::string> cites(std::string_view doc_id) const;

  std::map<ConceptType, std::size_t> concept_type_distribution() const;

  /// Concepts with a name or alias sharing at least one token with `surface`.
  std::vector<std::string> candidate_concepts(std::string_view surface) const;
  std::shared_ptr<const Gazetteer> gazetteer() const;

  /// Constraint violations found by a full scan; empty when consistent.
  std::vector<std::string> validate() const;

  void write_jsonl(std::ostream& out) const;
  void read_jsonl(std::istream& in);

private:
  void check_kinds(const KGEdge& e) const;

  mutable std::shared_mutex mutex_;
  std::map<std::string, Concept> concepts_;
  std::map<std::string, std::string> canonical_index_;  // lowercase name -> id
  std::map<std::string, KGNode> nodes_;
  std::map<std::tuple<std::string, std::string, Relation>, KGEdge> edges_;
  std::unordered_map<std::string, std::set<std::string>> token_index_;  // token -> concept ids
  mutable std::shared_ptr<const Gazetteer> gazetteer_;
};

LinkOutcome link_mention(const Mention& mention, std::string_view field_text, const KnowledgeGraph& kg,
                         const Embedder& embedder, const LinkerParams& params = {});

/// Groups unlinked mentions by normalized surface; groups with >= min_support
/// mentions across >= 2 documents become staged candidates.
std::vector<Concept> propose_concepts(const std::vector<Mention>& unlinked, std::size_t min_support = 3);

/// Gazetteer concepts mentioned in `query`, deduplicated, in query order.
std::vector<std::string> find_concepts_in_query(std::string_view query, const KnowledgeGraph& kg);

}  // namespace nav
