#include "nav/engine.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "nav/error.hpp"

namespace nav {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kNerStage = "ner";
constexpr std::string_view kLinkStage = "concept_link";
constexpr std::string_view kRefStage = "ref_extract";
constexpr std::string_view kEmbedStage = "embed";

// Far enough ahead that documents restored from disk are never "future".
const Date kNoFutureCheck = Date{std::chrono::days(2'000'000)};

std::ifstream open_in(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + p.string());
  return in;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + p.string());
  return out;
}

Json span_to_json(const std::string& key, const IndexedSpan& s) {
  return Json{{"key", key},
              {"doc_id", s.doc_id},
              {"granularity", to_string(s.granularity)},
              {"field", to_string(s.field)},
              {"start_char", s.start_char},
              {"end_char", s.end_char},
              {"ordinal", s.ordinal},
              {"chunk_start", s.chunk_start},
              {"chunk_end", s.chunk_end}};
}

std::pair<std::string, IndexedSpan> span_from_json(const Json& j) {
  IndexedSpan s;
  s.doc_id = j.at("doc_id").get<std::string>();
  if (!parse_granularity(j.at("granularity").get<std::string>(), s.granularity) ||
      !parse_field(j.at("field").get<std::string>(), s.field))
    throw Error(ErrorCode::Format, "bad span record");
  s.start_char = j.at("start_char").get<std::size_t>();
  s.end_char = j.at("end_char").get<std::size_t>();
  s.ordinal = j.at("ordinal").get<std::size_t>();
  s.chunk_start = j.at("chunk_start").get<std::size_t>();
  s.chunk_end = j.at("chunk_end").get<std::size_t>();
  return {j.at("key").get<std::string>(), s};
}

RecommenderData recommender_data(const std::map<std::string, Document, std::less<>>& docs,
                                 const GranularIndices& vectors, const KnowledgeGraph& kg) {
  RecommenderData data;
  for (const auto& [id, d] : docs) {
    std::optional<Vector> v;
    if (auto node = vectors.documents.find(document_key(id))) v = Vector(vectors.documents.vector(*node));
    data.add_document(d, std::move(v));
  }
  for (const auto& e : kg.edges()) {
    if (e.relation == Relation::cites) data.add_citation(e.src.substr(2), e.dst.substr(2));
  }
  return data;
}

}  // namespace

const Document* Snapshot::document(std::string_view id) const {
  auto it = documents.find(id);
  return it == documents.end() ? nullptr : &it->second;
}

Json to_json(const IngestLineResult& r) {
  Json j{{"line", r.line}, {"accepted", r.accepted}};
  if (!r.doc_id.empty()) j["doc_id"] = r.doc_id;
  if (r.version > 0) j["version"] = r.version;
  if (!r.reason.empty()) j["reason"] = r.reason;
  return j;
}

HnswParams hnsw_params(const Config& c) {
  return HnswParams{c.vector.dim, c.vector.m, c.vector.ef_construction, c.vector.seed};
}

KeywordParams keyword_params(const Config& c) {
  KeywordParams p;
  p.weights = FieldWeights{c.keyword.w_authors, c.keyword.w_title, c.keyword.w_abstract, c.keyword.w_body,
                           c.keyword.dismax_tiebreak};
  if (!p.weights.valid()) throw Error(ErrorCode::Config, "keyword weights must be positive with body the smallest");
  p.max_ngram = c.keyword.max_ngram;
  p.stopword_boost = c.keyword.stopword_boost;
  p.recency_tau_days = c.keyword.recency_tau_days;
  p.today = c.reference_date();
  return p;
}

std::unique_ptr<Embedder> make_embedder(const Config& c) {
  if (c.vector.embedder == "external")
    return std::make_unique<ExternalEmbedder>(c.vector.external_host, c.vector.external_port, c.vector.external_path,
                                              c.vector.dim);
  return std::make_unique<HashingEmbedder>(c.vector.dim);
}

Engine::Engine(Config config)
    : config_(std::move(config)), embedder_(make_embedder(config_)), hnsw_(hnsw_params(config_)),
      keyword_(keyword_params(config_)) {
  {
    const auto path = config_.concepts.gazetteer.empty() ? source_path("fixtures/gazetteer.tsv") : config_.concepts.gazetteer;
    auto in = open_in(path);
    for (const auto& c : read_gazetteer(in)) kg_.upsert_concept(c);
  }
  {
    const auto path = config_.insights.classifier.empty() ? source_path("fixtures/classifier.tsv") : config_.insights.classifier;
    auto in = open_in(path);
    classifier_ = BayesModel::train(read_labeled_tsv(in));
  }
  snapshot_ = std::make_shared<const Snapshot>([&] {
    Snapshot s(hnsw_);
    s.keyword = keyword_;
    s.kg = kg_;
    return s;
  }());
  PipelineConfig pc;
  pc.max_retries = config_.pipeline.max_retries;
  pc.base_delay = std::chrono::milliseconds(config_.pipeline.base_delay_ms);
  pc.workers = config_.pipeline.workers;
  pipeline_ = std::make_unique<Pipeline>([this](const Document& d, Stage s) { return run_stage(d, s); }, pc);
}

Engine::~Engine() { pipeline_.reset(); }

IngestLineResult Engine::add_document(Document doc) {
  IngestLineResult r;
  r.doc_id = doc.id;
  std::unique_lock lock(docs_mutex_);
  auto it = docs_.find(doc.id);
  if (it != docs_.end()) {
    if (it->second.has_same_content(doc)) {
      r.accepted = true;
      r.version = it->second.version;
      r.reason = "unchanged";
      return r;
    }
    if (doc.version <= it->second.version) doc.version = it->second.version + 1;
  }
  r.accepted = true;
  r.version = doc.version;
  docs_.insert_or_assign(doc.id, std::move(doc));
  return r;
}

std::vector<IngestLineResult> Engine::add_jsonl(std::istream& in) {
  std::vector<IngestLineResult> out;
  std::string line;
  std::size_t lineno = 0;
  const Date today = config_.reference_date();
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    IngestLineResult r;
    try {
      r = add_document(parse_document_line(line, today));
    } catch (const Error& e) {
      r.accepted = false;
      r.reason = e.what();
    }
    r.line = lineno;
    out.push_back(std::move(r));
  }
  return out;
}

bool Engine::is_live(const Document& doc) const {
  std::shared_lock lock(docs_mutex_);
  auto it = docs_.find(doc.id);
  return it != docs_.end() && it->second.version == doc.version;
}

void Engine::process() {
  std::vector<Document> docs;
  {
    std::shared_lock lock(docs_mutex_);
    auto catalog = std::make_shared<CatalogIndex>();
    for (const auto& [id, d] : docs_) {
      catalog->add(d);
      docs.push_back(d);
    }
    catalog_ = std::move(catalog);
  }
  for (const auto& d : docs) {
    {
      std::lock_guard lock(state_mutex_);
      if (restored_.count({d.id, d.version})) continue;
    }
    pipeline_->submit(d);
  }
  pipeline_->drain();
}

std::vector<Mention> Engine::stored_mentions(const Document& doc) const {
  std::vector<Mention> out;
  for (const auto& a : annotations_.for_doc(doc.id, doc.version)) {
    if (a.kind != AnnotationKind::concept_mention || a.producer_stage != kNerStage) continue;
    Mention m;
    m.doc_id = a.doc_id;
    m.field = a.field;
    m.start_char = a.start_char;
    m.end_char = a.end_char;
    m.surface = resolve_annotation(doc, a);
    m.gazetteer_hit = a.payload;
    out.push_back(std::move(m));
  }
  std::sort(out.begin(), out.end(), [](const Mention& x, const Mention& y) {
    return std::tie(x.field, x.start_char) < std::tie(y.field, y.start_char);
  });
  return out;
}

StageResult Engine::run_stage(const Document& doc, Stage stage) {
  if (!is_live(doc)) return {StageOutcome::ok, "superseded"};
  const DocKey key{doc.id, doc.version};
  const auto doc_node = document_node_id(doc.id);

  switch (stage) {
    case Stage::parse: {
      for (auto f : {Field::title, Field::abstract, Field::body}) segment_field(doc, f);
      kg_.upsert_node({doc_node, NodeKind::document, doc.title});
      for (const auto& a : doc.authors) {
        kg_.upsert_node({person_node_id(a), NodeKind::person, collapse_whitespace(a)});
        kg_.add_edge({person_node_id(a), doc_node, Relation::authored, std::nullopt});
      }
      break;
    }
    case Stage::ref_extract: {
      std::vector<CitationRecord> records;
      std::vector<StandoffAnnotation> markers;
      if (doc.body) {
        if (auto section = extract_reference_section(*doc.body)) {
          const auto text = utf8::substr(*doc.body, section->start, section->end);
          std::set<std::string> seen;
          for (const auto& raw : split_references(text, doc.id)) {
            std::optional<CitationRecord> rec;
            try {
              rec = sanitize(parse_reference(raw), &seen);
            } catch (const Error& e) {
              if (e.code() != ErrorCode::UnparseableReference) throw;
            }
            if (!rec) continue;
            markers.push_back({doc.id, doc.version, Field::body, section->start + raw.range.start,
                               section->start + raw.range.end, AnnotationKind::citation_marker, rec->id,
                               std::string(kRefStage)});
            records.push_back(std::move(*rec));
          }
        }
      }
      annotations_.add_all(markers);
      std::lock_guard lock(state_mutex_);
      candidates_[key] = std::move(records);
      break;
    }
    case Stage::ref_link: {
      std::vector<CitationRecord> records;
      {
        std::lock_guard lock(state_mutex_);
        auto it = candidates_.find(key);
        if (it == candidates_.end()) return {StageOutcome::retryable_error, "no extracted references"};
        records = it->second;
      }
      const LinkParams lp{config_.refparse.threshold, config_.refparse.year_tolerance, config_.refparse.max_token_df};
      std::shared_ptr<const CatalogIndex> catalog;
      {
        std::shared_lock lock(docs_mutex_);
        catalog = catalog_;
      }
      for (auto& r : records) {
        if (!catalog) break;
        auto decision = link_citation(r, *catalog, lp);
        r.link_similarity = decision.similarity;
        r.linked_doc_id = decision.doc_id;
        if (!r.linked_doc_id || *r.linked_doc_id == doc.id) continue;
        std::string target_title;
        {
          std::shared_lock lock(docs_mutex_);
          auto t = docs_.find(*r.linked_doc_id);
          if (t == docs_.end()) continue;
          target_title = t->second.title;
        }
        kg_.upsert_node({doc_node, NodeKind::document, doc.title});
        kg_.upsert_node({document_node_id(*r.linked_doc_id), NodeKind::document, target_title});
        kg_.add_edge({doc_node, document_node_id(*r.linked_doc_id), Relation::cites, std::nullopt});
      }
      std::lock_guard lock(state_mutex_);
      citations_[key] = std::move(records);
      break;
    }
    case Stage::ner: {
      std::vector<StandoffAnnotation> anns;
      for (const auto& m : recognize_mentions(doc, *kg_.gazetteer())) {
        anns.push_back({doc.id, doc.version, m.field, m.start_char, m.end_char, AnnotationKind::concept_mention,
                        m.gazetteer_hit.value_or(""), std::string(kNerStage)});
      }
      annotations_.add_all(anns);
      break;
    }
    case Stage::concept_link: {
      const LinkerParams lp{config_.concepts.string_weight, config_.concepts.embed_weight,
                            config_.concepts.link_threshold, config_.concepts.context_tokens};
      std::vector<StandoffAnnotation> anns;
      std::vector<Mention> unlinked;
      std::set<std::string> linked_concepts;
      for (const auto& m : stored_mentions(doc)) {
        auto outcome = link_mention(m, doc.field_text(m.field), kg_, *embedder_, lp);
        if (!outcome.linked_concept) {
          unlinked.push_back(m);
          continue;
        }
        anns.push_back({doc.id, doc.version, m.field, m.start_char, m.end_char, AnnotationKind::concept_link,
                        *outcome.linked_concept, std::string(kLinkStage)});
        linked_concepts.insert(*outcome.linked_concept);
      }
      if (!linked_concepts.empty()) kg_.upsert_node({doc_node, NodeKind::document, doc.title});
      for (const auto& c : linked_concepts) kg_.add_edge({doc_node, c, Relation::mentions, std::nullopt});
      annotations_.add_all(anns);
      std::lock_guard lock(state_mutex_);
      unlinked_[key] = std::move(unlinked);
      break;
    }
    case Stage::embed: {
      auto units = embed_document_units(doc, *embedder_, config_.corpus.chunk_size);
      std::vector<StandoffAnnotation> anns;
      for (const auto& u : units) {
        anns.push_back({doc.id, doc.version, u.span.field, u.span.start_char, u.span.end_char,
                        AnnotationKind::embedding_ref, u.key, std::string(kEmbedStage)});
      }
      annotations_.add_all(anns);
      std::lock_guard lock(state_mutex_);
      staged_[key] = std::move(units);
      break;
    }
    case Stage::index_keyword: {
      std::lock_guard lock(state_mutex_);
      keyword_.index_document(doc);
      break;
    }
    case Stage::index_vector: {
      std::lock_guard lock(state_mutex_);
      auto it = staged_.find(key);
      if (it == staged_.end()) return {StageOutcome::retryable_error, "no staged vectors"};
      auto& slot = ready_[doc.id];
      if (slot.first <= doc.version) slot = {doc.version, it->second};
      break;
    }
    case Stage::done: break;
  }
  return {StageOutcome::ok, {}};
}

void Engine::commit() {
  auto snap = std::make_shared<Snapshot>(hnsw_);
  {
    std::shared_lock lock(docs_mutex_);
    snap->documents = docs_;
  }
  std::vector<EmbeddedUnit> units;
  {
    std::lock_guard lock(state_mutex_);
    snap->keyword = keyword_;
    for (const auto& [id, entry] : ready_) {
      auto d = snap->documents.find(id);
      if (d == snap->documents.end() || d->second.version != entry.first) continue;
      units.insert(units.end(), entry.second.begin(), entry.second.end());
    }
    for (const auto& [key, records] : citations_) {
      auto d = snap->documents.find(key.first);
      if (d != snap->documents.end() && d->second.version == key.second) snap->citations[key.first] = records;
    }
  }
  snap->vectors = build_indices_from_units(std::move(units), hnsw_);
  snap->kg = kg_;
  for (auto& a : annotations_.of_kind(AnnotationKind::concept_link)) {
    auto d = snap->documents.find(a.doc_id);
    if (d != snap->documents.end() && d->second.version == a.doc_version) snap->concept_links.push_back(std::move(a));
  }
  for (const auto& [id, d] : snap->documents) {
    snap->authorship.add(d);
    snap->published[id] = d.published_at;
  }
  snap->recommender = recommender_data(snap->documents, snap->vectors, snap->kg);
  std::lock_guard lock(snapshot_mutex_);
  snapshot_ = std::move(snap);
}

std::vector<IngestLineResult> Engine::ingest(std::istream& in) {
  auto results = add_jsonl(in);
  process();
  commit();
  return results;
}

std::shared_ptr<const Snapshot> Engine::snapshot() const {
  std::lock_guard lock(snapshot_mutex_);
  return snapshot_;
}

std::vector<CitationRecord> Engine::citation_records() const {
  std::vector<CitationRecord> out;
  {
    std::shared_lock docs_lock(docs_mutex_);
    std::lock_guard lock(state_mutex_);
    for (const auto& [key, records] : citations_) {
      auto d = docs_.find(key.first);
      if (d == docs_.end() || d->second.version != key.second) continue;
      out.insert(out.end(), records.begin(), records.end());
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return out;
}

KeywordIndex Engine::keyword_index() const {
  std::lock_guard lock(state_mutex_);
  return keyword_;
}

std::vector<EmbeddedUnit> Engine::ready_units() const {
  std::lock_guard lock(state_mutex_);
  std::vector<EmbeddedUnit> out;
  for (const auto& [id, entry] : ready_) out.insert(out.end(), entry.second.begin(), entry.second.end());
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.key < b.key; });
  return out;
}

std::vector<Document> Engine::documents() const {
  std::shared_lock lock(docs_mutex_);
  std::vector<Document> out;
  for (const auto& [id, d] : docs_) out.push_back(d);
  return out;
}

std::vector<Concept> Engine::proposed_concepts() const {
  std::vector<Mention> all;
  {
    std::shared_lock docs_lock(docs_mutex_);
    std::lock_guard lock(state_mutex_);
    for (const auto& [key, mentions] : unlinked_) {
      auto d = docs_.find(key.first);
      if (d != docs_.end() && d->second.version == key.second) all.insert(all.end(), mentions.begin(), mentions.end());
    }
  }
  return propose_concepts(all, config_.concepts.min_support);
}

void Engine::rebuild_indices() {
  {
    std::lock_guard lock(state_mutex_);
    keyword_ = KeywordIndex(keyword_params(config_));
    ready_.clear();
    staged_.clear();
  }
  for (const auto& d : documents()) {
    for (auto s : {Stage::embed, Stage::index_keyword, Stage::index_vector}) {
      auto r = run_stage(d, s);
      if (r.outcome != StageOutcome::ok) throw Error(ErrorCode::PreconditionViolation, "reindex of " + d.id + ": " + r.message);
    }
  }
  commit();
}

void Engine::save(const std::string& dir) const {
  const fs::path root(dir);
  fs::create_directories(root);
  const auto snap = snapshot();
  {
    auto out = open_out(root / "documents.jsonl");
    for (const auto& d : documents()) out << to_json(d).dump() << '\n';
  }
  {
    auto out = open_out(root / "annotations.jsonl");
    annotations_.write_jsonl(out);
  }
  {
    auto out = open_out(root / "citations.jsonl");
    for (const auto& r : citation_records()) out << to_json(r).dump() << '\n';
  }
  {
    auto out = open_out(root / "kg.jsonl");
    kg_.write_jsonl(out);
  }
  {
    auto out = open_out(root / "keyword.idx");
    snap->keyword.save(out);
  }
  for (auto g : {Granularity::document, Granularity::chunk, Granularity::sentence}) {
    auto out = open_out(root / ("vectors_" + std::string(to_string(g)) + ".idx"));
    snap->vectors.index(g).save(out);
  }
  {
    auto out = open_out(root / "spans.jsonl");
    for (const auto& [key, span] : snap->vectors.spans) out << span_to_json(key, span).dump() << '\n';
  }
  {
    auto out = open_out(root / "candidates.jsonl");
    for (const auto& c : proposed_concepts()) {
      out << Json{{"id", c.id}, {"canonical_name", c.canonical_name}, {"concept_type", to_string(c.type)},
                  {"created_from", to_string(c.created_from)}}
                 .dump()
          << '\n';
    }
  }
  {
    auto out = open_out(root / "tickets.jsonl");
    for (const auto& t : pipeline_->tickets()) out << to_json(t).dump() << '\n';
  }
}

void Engine::load(const std::string& dir) {
  const fs::path root(dir);
  auto snap = std::make_shared<Snapshot>(hnsw_);
  {
    auto in = open_in(root / "documents.jsonl");
    std::string line;
    std::unique_lock lock(docs_mutex_);
    while (std::getline(in, line)) {
      if (trim(line).empty()) continue;
      auto d = parse_document_line(line, kNoFutureCheck);
      docs_.insert_or_assign(d.id, std::move(d));
    }
    snap->documents = docs_;
  }
  {
    auto in = open_in(root / "annotations.jsonl");
    annotations_.read_jsonl(in);
  }
  {
    auto in = open_in(root / "kg.jsonl");
    kg_.read_jsonl(in);
  }
  {
    auto in = open_in(root / "citations.jsonl");
    std::string line;
    std::lock_guard lock(state_mutex_);
    while (std::getline(in, line)) {
      if (trim(line).empty()) continue;
      auto r = citation_from_json(Json::parse(line));
      auto d = snap->documents.find(r.source_doc_id);
      if (d == snap->documents.end()) continue;
      citations_[{r.source_doc_id, d->second.version}].push_back(r);
      snap->citations[r.source_doc_id].push_back(std::move(r));
    }
  }
  {
    auto in = open_in(root / "keyword.idx");
    auto idx = KeywordIndex::load(in, keyword_params(config_));
    std::lock_guard lock(state_mutex_);
    keyword_ = idx;
    snap->keyword = std::move(idx);
  }
  for (auto g : {Granularity::document, Granularity::chunk, Granularity::sentence}) {
    auto in = open_in(root / ("vectors_" + std::string(to_string(g)) + ".idx"));
    snap->vectors.index(g) = VectorIndex::load(in);
  }
  {
    auto in = open_in(root / "spans.jsonl");
    std::string line;
    while (std::getline(in, line)) {
      if (trim(line).empty()) continue;
      snap->vectors.spans.insert(span_from_json(Json::parse(line)));
    }
  }
  {
    std::lock_guard lock(state_mutex_);
    for (const auto& [key, span] : snap->vectors.spans) {
      const auto& index = snap->vectors.index(span.granularity);
      auto node = index.find(key);
      auto d = snap->documents.find(span.doc_id);
      if (!node || d == snap->documents.end()) throw Error(ErrorCode::Format, "dangling vector key " + key);
      auto& slot = ready_[span.doc_id];
      slot.first = d->second.version;
      slot.second.push_back({key, span, Vector(index.vector(*node))});
    }
    for (const auto& [id, d] : snap->documents) restored_.insert({id, d.version});
  }
  snap->kg = kg_;
  for (auto& a : annotations_.of_kind(AnnotationKind::concept_link)) {
    auto d = snap->documents.find(a.doc_id);
    if (d != snap->documents.end() && d->second.version == a.doc_version) snap->concept_links.push_back(std::move(a));
  }
  for (const auto& [id, d] : snap->documents) {
    snap->authorship.add(d);
    snap->published[id] = d.published_at;
  }
  snap->recommender = recommender_data(snap->documents, snap->vectors, snap->kg);
  std::lock_guard lock(snapshot_mutex_);
  snapshot_ = std::move(snap);
}

}  // namespace nav
