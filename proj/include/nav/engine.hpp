#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nav/concept_kg.hpp"
#include "nav/config.hpp"
#include "nav/corpus.hpp"
#include "nav/embedding.hpp"
#include "nav/expert_search.hpp"
#include "nav/insights.hpp"
#include "nav/keyword_search.hpp"
#include "nav/pipeline.hpp"
#include "nav/recommender.hpp"
#include "nav/refparse.hpp"
#include "nav/vector_search.hpp"

namespace nav {

/// Immutable read side published by Engine::commit().
struct Snapshot {
  std::map<std::string, Document, std::less<>> documents;
  KeywordIndex keyword;
  GranularIndices vectors;
  KnowledgeGraph kg;
  std::vector<StandoffAnnotation> concept_links;  // live versions only
  std::map<std::string, std::vector<CitationRecord>, std::less<>> citations;
  Authorship authorship;
  std::map<std::string, Date> published;
  RecommenderData recommender;  // tag counts left at zero

  explicit Snapshot(HnswParams params) : vectors(params) {}
  const Document* document(std::string_view id) const;
};

struct IngestLineResult {
  std::size_t line = 0;  // 1-based
  bool accepted = false;
  std::string doc_id;
  std::int64_t version = 0;
  std::string reason;
};

Json to_json(const IngestLineResult& r);

HnswParams hnsw_params(const Config& c);
KeywordParams keyword_params(const Config& c);
std::unique_ptr<Embedder> make_embedder(const Config& c);

/// Owns the write side (document store, annotations, KG, staged index
/// data), runs the pipeline over it and publishes snapshots.
class Engine {
public:
  explicit Engine(Config config);
  ~Engine();
  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  const Config& config() const { return config_; }
  const Embedder& embedder() const { return *embedder_; }
  const BayesModel& classifier() const { return classifier_; }
  Pipeline& pipeline() { return *pipeline_; }

  /// Validates and stores documents. Identical content is a no-op; changed
  /// content gets a version above the stored one.
  std::vector<IngestLineResult> add_jsonl(std::istream& in);
  IngestLineResult add_document(Document doc);

  /// Runs every stored document without a complete ticket through the
  /// pipeline and blocks until the queue drains.
  void process();
  /// Builds the vector graphs from staged units and swaps in a new snapshot.
  void commit();
  /// add_jsonl + process + commit.
  std::vector<IngestLineResult> ingest(std::istream& in);

  std::shared_ptr<const Snapshot> snapshot() const;

  StageResult run_stage(const Document& doc, Stage stage);

  // Write-side state, for inspection and tests.
  const AnnotationStore& annotations() const { return annotations_; }
  std::vector<CitationRecord> citation_records() const;  // live versions, sorted by id
  const KnowledgeGraph& kg() const { return kg_; }
  KeywordIndex keyword_index() const;
  std::vector<EmbeddedUnit> ready_units() const;
  std::vector<Document> documents() const;
  std::vector<Concept> proposed_concepts() const;

  /// Re-embeds and re-indexes every stored document, then commits.
  void rebuild_indices();

  void save(const std::string& dir) const;
  /// Restores a saved data directory and publishes it as the snapshot.
  void load(const std::string& dir);

private:
  using DocKey = std::pair<std::string, std::int64_t>;

  bool is_live(const Document& doc) const;
  std::vector<Mention> stored_mentions(const Document& doc) const;

  Config config_;
  std::unique_ptr<Embedder> embedder_;
  BayesModel classifier_;
  HnswParams hnsw_;

  mutable std::shared_mutex docs_mutex_;
  std::map<std::string, Document, std::less<>> docs_;
  std::shared_ptr<const CatalogIndex> catalog_;

  AnnotationStore annotations_;
  KnowledgeGraph kg_;

  mutable std::mutex state_mutex_;
  std::map<DocKey, std::vector<CitationRecord>> candidates_;
  std::map<DocKey, std::vector<CitationRecord>> citations_;
  std::map<DocKey, std::vector<Mention>> unlinked_;
  std::map<DocKey, std::vector<EmbeddedUnit>> staged_;
  std::map<std::string, std::pair<std::int64_t, std::vector<EmbeddedUnit>>, std::less<>> ready_;
  std::set<DocKey> restored_;  // loaded from disk, already processed
  KeywordIndex keyword_;

  mutable std::mutex snapshot_mutex_;
  std::shared_ptr<const Snapshot> snapshot_;

  std::unique_ptr<Pipeline> pipeline_;
};

}  // namespace nav
