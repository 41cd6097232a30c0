#include "nav/gateway.hpp"

#include <httplib.h>

#include <algorithm>
#include <charconv>
#include <set>
#include <sstream>

#include "nav/error.hpp"
#include "nav/text.hpp"

namespace nav {

namespace {

constexpr std::size_t kMaxK = 100;

Response error_response(int status, std::string_view code, const std::string& message) {
  return {status, Json{{"error", {{"code", code}, {"message", message}}}}};
}

int status_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::UnknownDocument:
    case ErrorCode::UnknownConcept:
      return 404;
    case ErrorCode::DuplicateKey:
      return 409;
    case ErrorCode::EmptyIndex:
      return 503;
    case ErrorCode::Io:
      return 500;
    default:
      return 400;
  }
}

std::optional<std::string> param(const Request& req, const std::string& name) {
  auto it = req.query.find(name);
  if (it == req.query.end()) return std::nullopt;
  return it->second;
}

std::size_t size_param(const Request& req, const std::string& name, std::size_t fallback) {
  auto v = param(req, name);
  if (!v) return fallback;
  std::size_t out = 0;
  auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc{} || p != v->data() + v->size() || out < 1 || out > kMaxK)
    throw Error(ErrorCode::InvalidArgument, name + " must be an integer in [1, " + std::to_string(kMaxK) + "]");
  return out;
}

std::string required(const Request& req, const std::string& name) {
  auto v = param(req, name);
  if (!v || trim(*v).empty()) throw Error(ErrorCode::MissingField, "query parameter '" + name + "' is required");
  return *v;
}

Json parse_body(const Request& req) {
  try {
    Json j = Json::parse(req.body);
    if (!j.is_object()) throw Error(ErrorCode::Format, "request body must be a JSON object");
    return j;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Format, std::string("request body: ") + e.what());
  }
}

std::string body_string(const Json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_string() || trim(j[key].get<std::string>()).empty())
    throw Error(ErrorCode::MissingField, std::string("'") + key + "' is required");
  return j[key].get<std::string>();
}

std::size_t ef_for(const Config& c, std::size_t k) {
  return c.vector.ef_search ? std::max(c.vector.ef_search, k) : 0;
}

Json breakdown_json(const ScoreBreakdown& b) {
  Json ngrams = Json::array();
  for (const auto& g : b.ngrams) {
    Json fields = Json::object();
    for (Field f : {Field::title, Field::abstract, Field::authors, Field::body})
      fields[std::string(to_string(f))] = g.field_scores[static_cast<std::size_t>(f)];
    ngrams.push_back({{"ngram", g.ngram},
                      {"winning_field", to_string(g.winning_field)},
                      {"field_score", g.field_score},
                      {"combined", g.combined},
                      {"boost", g.boost},
                      {"field_scores", fields}});
  }
  return Json{{"ngrams", ngrams},
              {"prior",
               {{"citation", b.prior.citation_component},
                {"recency", b.prior.recency_component},
                {"value", b.prior.value()}}},
              {"match_total", b.match_total},
              {"total", b.total}};
}

Json unit_hit_json(const Snapshot& snap, const std::string& key, double similarity) {
  const IndexedSpan& span = snap.vectors.span(key);
  Json j{{"key", key},
         {"doc_id", span.doc_id},
         {"granularity", to_string(span.granularity)},
         {"similarity", similarity}};
  const Document* doc = snap.document(span.doc_id);
  if (doc) j["title"] = doc->title;
  if (span.granularity != Granularity::document) {
    j["field"] = to_string(span.field);
    j["start_char"] = span.start_char;
    j["end_char"] = span.end_char;
    if (doc) {
      const std::string text = doc->field_text(span.field);
      j["text"] = utf8::substr(text, span.start_char, span.end_char);
      if (span.granularity == Granularity::sentence)
        j["context"] = utf8::substr(text, span.chunk_start, span.chunk_end);
    }
  }
  return j;
}

Json answer_json(const SentenceAnswer& a) {
  return Json{{"key", a.key},
              {"doc_id", a.doc_id},
              {"field", to_string(a.field)},
              {"start_char", a.start_char},
              {"end_char", a.end_char},
              {"similarity", a.similarity},
              {"sentence", a.sentence},
              {"context", a.context}};
}

Json concept_json(const Concept& c) {
  return Json{{"id", c.id},
              {"canonical_name", c.canonical_name},
              {"aliases", c.aliases},
              {"type", to_string(c.type)},
              {"created_from", to_string(c.created_from)}};
}

Json weights_json(const ModuleWeights& w) {
  Json j = Json::object();
  for (Module m : kModules) j[std::string(to_string(m))] = w[m];
  return j;
}

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (const auto& p : parts) {
    if (!out.empty()) out += sep;
    out += p;
  }
  return out;
}

}  // namespace

Request Request::get(const std::string& target) {
  Request r;
  r.method = "GET";
  auto q = target.find('?');
  r.path = target.substr(0, q);
  if (q != std::string::npos) {
    std::string qs = target.substr(q + 1);
    httplib::Params params;
    httplib::detail::parse_query_text(qs.data(), qs.size(), params);
    r.query.insert(params.begin(), params.end());
  }
  return r;
}

Gateway::Gateway(Engine& engine, UserStore& users) : engine_(engine), users_(users) {}

Gateway::~Gateway() = default;

Response Gateway::handle(const Request& req) {
  const std::string& p = req.path;
  const std::string& m = req.method;
  try {
    if (m == "GET") {
      if (p == "/v1/search") return search(req);
      if (p == "/v1/experts") return experts(req);
      if (p == "/v1/recommendations") return recommendations(req);
      if (p == "/v1/analytics/popularity") return popularity(req);
      if (p.rfind("/v1/documents/", 0) == 0) return document(p.substr(14));
      if (p == "/v1/kg/concepts") return kg_concepts(req);
      if (p == "/v1/kg/stats") return kg_stats();
      if (p == "/v1/tags") return list_tags(req);
      if (p == "/v1/notes") return list_notes(req);
    } else if (m == "POST") {
      if (p == "/v1/ingest") return ingest(req);
      if (p == "/v1/tags") return add_tag(req);
      if (p == "/v1/notes") return add_note(req);
      if (p == "/v1/weights") return set_weights(req);
    } else if (m == "DELETE") {
      if (p == "/v1/tags") return delete_tag(req);
      if (p.rfind("/v1/notes/", 0) == 0) return delete_note(p.substr(10));
    }
    return error_response(404, "NotFound", m + " " + p);
  } catch (const Error& e) {
    return error_response(status_for(e.code()), to_string(e.code()), e.what());
  } catch (const std::exception& e) {
    return error_response(500, "Internal", e.what());
  }
}

Response Gateway::search(const Request& req) {
  const std::string q = param(req, "q").value_or("");
  if (trim(q).empty()) throw Error(ErrorCode::EmptyQuery, "q is empty");
  const std::string mode = param(req, "mode").value_or("hybrid");
  if (mode != "keyword" && mode != "vector" && mode != "hybrid")
    throw Error(ErrorCode::InvalidArgument, "mode must be keyword, vector or hybrid");
  Granularity gran = Granularity::document;
  if (auto g = param(req, "granularity"); g && !parse_granularity(*g, gran))
    throw Error(ErrorCode::InvalidArgument, "granularity must be document, chunk or sentence");
  if (mode == "keyword" && gran != Granularity::document)
    throw Error(ErrorCode::InvalidArgument, "keyword mode requires granularity=document");
  const std::size_t k = size_param(req, "k", 10);

  const auto snap = engine_.snapshot();
  const Config& cfg = engine_.config();
  const std::size_t ef = ef_for(cfg, k);

  auto keyword_hits = [&] { return snap->keyword.size() ? snap->keyword.search(q, k) : std::vector<RankedResult>{}; };
  auto vector_hits = [&] {
    const auto& idx = snap->vectors.index(gran);
    if (idx.empty()) return std::vector<VectorIndex::Hit>{};
    return idx.knn(engine_.embedder().embed(q), k, ef);
  };

  Json payload{{"query", q}, {"mode", mode}, {"granularity", to_string(gran)}, {"k", k}};
  Json results = Json::array();
  if (mode == "keyword") {
    for (const auto& r : keyword_hits())
      results.push_back({{"doc_id", r.doc_id},
                         {"title", snap->document(r.doc_id)->title},
                         {"published_at", format_date(r.published_at)},
                         {"score", r.score},
                         {"breakdown", breakdown_json(r.breakdown)}});
  } else if (mode == "vector") {
    for (const auto& h : vector_hits()) results.push_back(unit_hit_json(*snap, h.key, h.similarity));
  } else {
    std::vector<std::string> kw_ids, vec_ids;
    for (const auto& r : keyword_hits()) kw_ids.push_back(r.doc_id);
    for (const auto& h : vector_hits()) vec_ids.push_back(snap->vectors.span(h.key).doc_id);
    for (const auto& f : fuse(kw_ids, vec_ids, k)) {
      Json j{{"doc_id", f.doc_id},
             {"score", f.score},
             {"breakdown", {{"keyword_rank", f.keyword_rank}, {"vector_rank", f.vector_rank}, {"rrf_k", kRrfConstant}}}};
      if (const Document* d = snap->document(f.doc_id)) j["title"] = d->title;
      results.push_back(std::move(j));
    }
  }
  payload["results"] = results;

  const QueryKind kind = engine_.classifier().classify(q);
  payload["query_kind"] = {{"class", to_string(kind.kind)}, {"probability", kind.probability}};

  std::optional<std::string> question;
  if (kind.kind == QueryClass::question) {
    question = q;
  } else if (kind.kind == QueryClass::keyword) {
    question = question_template(q);
    payload["generated_question"] = *question;
  }
  if (question && !snap->vectors.sentences.empty()) {
    DocumentLookup lookup = [&](std::string_view id) { return snap->document(id); };
    Json answers = Json::array();
    for (const auto& a : answer_sentences(*question, cfg.insights.answer_k, snap->vectors, engine_.embedder(), lookup,
                                          ef_for(cfg, cfg.insights.answer_k)))
      answers.push_back(answer_json(a));
    payload["answers"] = answers;
  }

  if (auto spec = match_template(q, snap->kg)) {
    Bucket bucket = spec->bucket;
    parse_bucket(cfg.insights.bucket, bucket);
    payload["analytics"] = {{"rule", spec->rule},
                            {"concepts", spec->concepts},
                            {"bucket", to_string(bucket)},
                            {"href", "/v1/analytics/popularity?concepts=" + join(spec->concepts, ',') +
                                         "&bucket=" + std::string(to_string(bucket))}};
  }
  return {200, payload};
}

Response Gateway::experts(const Request& req) {
  const std::string q = param(req, "q").value_or("");
  if (trim(q).empty()) throw Error(ErrorCode::EmptyQuery, "q is empty");
  const std::size_t k = size_param(req, "k", 10);
  const auto snap = engine_.snapshot();
  const Config& cfg = engine_.config();
  ExpertParams params{cfg.experts.gamma, cfg.experts.beta, cfg.experts.k_docs};

  Json list = Json::array();
  if (!snap->vectors.documents.empty()) {
    for (const auto& e : nav::experts(q, k, snap->vectors.documents, engine_.embedder(), snap->authorship, params,
                                      ef_for(cfg, params.k_docs))) {
      Json docs = Json::array();
      for (const auto& [id, rank] : e.supporting_docs) docs.push_back({{"doc_id", id}, {"rank", rank}});
      list.push_back({{"author", e.author},
                      {"name", e.author_name},
                      {"score", e.damped_score},
                      {"raw_votes", e.raw_votes},
                      {"publication_count", e.publication_count},
                      {"supporting_docs", docs}});
    }
  }
  return {200, Json{{"query", q}, {"k", k}, {"experts", list}}};
}

Response Gateway::recommendations(const Request& req) {
  const std::string user = required(req, "user");
  if (!users_.has_user(user)) return error_response(404, "UnknownUser", "unknown user " + user);
  const Config& cfg = engine_.config();
  const std::size_t k = size_param(req, "k", cfg.recommender.top_k);

  ModuleWeights weights;
  weights[Module::content] = cfg.recommender.w_content;
  weights[Module::citation] = cfg.recommender.w_citation;
  weights[Module::author] = cfg.recommender.w_author;
  weights[Module::popularity] = cfg.recommender.w_popularity;
  if (auto w = users_.weights(user)) weights = *w;

  const auto snap = engine_.snapshot();
  RecommenderData data = snap->recommender;
  for (const auto& [doc, n] : users_.tag_counts()) data.set_tag_count(doc, n);

  Json tags = Json::array();
  for (auto& [tag, docs] : users_.tag_profiles(user)) {
    std::vector<std::string> known;
    for (const auto& d : docs)
      if (data.document(d)) known.push_back(d);
    Json recs = Json::array();
    if (!known.empty()) {
      TagProfile profile = TagProfile::build(user, tag, known, data);
      for (const auto& r : recommend(profile, data, weights, engine_.config().reference_date(),
                                     cfg.recommender.window_days, k)) {
        Json contribs = Json::array();
        for (const auto& c : r.contributions)
          contribs.push_back(
              {{"module", to_string(c.module)}, {"raw", c.raw}, {"normalized", c.normalized}, {"weight", c.weight}});
        recs.push_back({{"doc_id", r.doc_id},
                        {"title", data.document(r.doc_id)->title},
                        {"published_at", format_date(r.published_at)},
                        {"score", r.score},
                        {"contributions", contribs}});
      }
    }
    tags.push_back({{"tag_name", tag}, {"doc_ids", docs}, {"recommendations", recs}});
  }
  return {200, Json{{"user_id", user}, {"weights", weights_json(weights)}, {"tags", tags}}};
}

Response Gateway::popularity(const Request& req) {
  const std::string raw = required(req, "concepts");
  Bucket bucket = Bucket::month;
  parse_bucket(engine_.config().insights.bucket, bucket);
  if (auto b = param(req, "bucket"); b && !parse_bucket(*b, bucket))
    throw Error(ErrorCode::InvalidArgument, "bucket must be month or year");

  const auto snap = engine_.snapshot();
  std::vector<std::string> ids;
  for (const auto& part : split(raw, ',')) {
    std::string id = trim(part);
    if (id.empty()) continue;
    // Accept canonical names as well as ids.
    if (!snap->kg.concept_by_id(id) && id.rfind("c:", 0) != 0) id = concept_id_for(id);
    ids.push_back(id);
  }
  if (ids.empty()) throw Error(ErrorCode::MissingField, "concepts is empty");

  Json series = Json::array();
  for (const auto& s : contrastive_popularity(ids, snap->kg, snap->concept_links, snap->published, bucket)) {
    Json points = Json::array();
    for (const auto& p : s.series) points.push_back({{"period", p.period}, {"count", p.count}});
    series.push_back({{"concept_id", s.concept_id},
                      {"name", snap->kg.concept_by_id(s.concept_id)->canonical_name},
                      {"series", points}});
  }
  return {200, Json{{"bucket", to_string(bucket)}, {"series", series}}};
}

Response Gateway::document(const std::string& id) {
  const auto snap = engine_.snapshot();
  const Document* doc = snap->document(id);
  if (!doc) throw Error(ErrorCode::UnknownDocument, id);
  Json j = to_json(*doc);
  Json refs = Json::array();
  if (auto it = snap->citations.find(id); it != snap->citations.end())
    for (const auto& r : it->second) refs.push_back(to_json(r));
  j["references"] = refs;
  j["cites"] = snap->kg.cites(id);
  j["cited_by"] = snap->kg.cited_by(id);
  std::set<std::string> concepts;
  for (const auto& a : snap->concept_links)
    if (a.doc_id == id) concepts.insert(a.payload);
  j["concepts"] = concepts;
  j["node_id"] = document_node_id(id);
  return {200, j};
}

Response Gateway::kg_concepts(const Request& req) {
  const std::string prefix = param(req, "prefix").value_or("");
  const std::size_t limit = size_param(req, "limit", 50);
  const auto snap = engine_.snapshot();
  Json list = Json::array();
  for (const auto& c : snap->kg.concepts_with_prefix(prefix)) {
    if (list.size() >= limit) break;
    list.push_back(concept_json(c));
  }
  return {200, Json{{"prefix", prefix}, {"concepts", list}}};
}

Response Gateway::kg_stats() {
  const auto snap = engine_.snapshot();
  Json types = Json::object();
  for (ConceptType t : kConceptTypes) types[std::string(to_string(t))] = 0;
  for (const auto& [t, n] : snap->kg.concept_type_distribution()) types[std::string(to_string(t))] = n;
  Json relations = Json::object();
  const auto edges = snap->kg.edges();
  for (const auto& e : edges) {
    auto key = std::string(to_string(e.relation));
    relations[key] = relations.value(key, 0) + 1;
  }
  return {200, Json{{"concepts", snap->kg.concept_count()},
                    {"concept_type_distribution", types},
                    {"nodes", snap->kg.nodes().size()},
                    {"edges", edges.size()},
                    {"edges_by_relation", relations},
                    {"documents", snap->documents.size()}}};
}

Response Gateway::ingest(const Request& req) {
  std::lock_guard lock(ingest_mutex_);
  std::istringstream in(req.body);
  Json lines = Json::array();
  std::size_t accepted = 0;
  for (const auto& r : engine_.ingest(in)) {
    accepted += r.accepted;
    lines.push_back(to_json(r));
  }
  return {200, Json{{"accepted", accepted}, {"rejected", lines.size() - accepted}, {"lines", lines}}};
}

Response Gateway::list_tags(const Request& req) {
  const std::string user = required(req, "user");
  Json list = Json::array();
  for (const auto& t : users_.tags(user)) list.push_back(to_json(t));
  return {200, Json{{"user_id", user}, {"tags", list}}};
}

Response Gateway::add_tag(const Request& req) {
  const Json body = parse_body(req);
  Tag t{body_string(body, "user_id"), body_string(body, "tag_name"), body_string(body, "doc_id"), {}};
  if (!engine_.snapshot()->document(t.doc_id)) throw Error(ErrorCode::UnknownDocument, t.doc_id);
  if (!users_.add_tag(t))
    throw Error(ErrorCode::DuplicateKey, "tag exists: " + t.user_id + "/" + t.tag_name + "/" + t.doc_id);
  for (const auto& stored : users_.tags(t.user_id))
    if (stored.tag_name == t.tag_name && stored.doc_id == t.doc_id) return {201, to_json(stored)};
  return {201, to_json(t)};
}

Response Gateway::delete_tag(const Request& req) {
  Json body = req.body.empty() ? Json::object() : parse_body(req);
  auto pick = [&](const char* key, const char* alt) -> std::string {
    if (auto v = param(req, key)) return *v;
    if (auto v = param(req, alt)) return *v;
    if (body.contains(key) && body[key].is_string()) return body[key].get<std::string>();
    return {};
  };
  const std::string user = pick("user_id", "user");
  const std::string tag = pick("tag_name", "tag");
  const std::string doc = pick("doc_id", "doc");
  if (user.empty() || tag.empty()) throw Error(ErrorCode::MissingField, "user_id and tag_name are required");
  const std::size_t removed = users_.remove_tag(user, tag, doc);
  if (removed == 0) return error_response(404, "NotFound", "no such tag");
  return {200, Json{{"removed", removed}}};
}

Response Gateway::list_notes(const Request& req) {
  const std::string user = required(req, "user");
  Json list = Json::array();
  for (const auto& n : users_.notes(user)) list.push_back(to_json(n));
  return {200, Json{{"user_id", user}, {"notes", list}}};
}

Response Gateway::add_note(const Request& req) {
  const Json body = parse_body(req);
  const std::string user = body_string(body, "user_id");
  std::optional<std::string> doc;
  if (body.contains("doc_id") && !body["doc_id"].is_null()) {
    doc = body.at("doc_id").get<std::string>();
    if (!engine_.snapshot()->document(*doc)) throw Error(ErrorCode::UnknownDocument, *doc);
  }
  if (!body.contains("text") || !body["text"].is_string()) throw Error(ErrorCode::MissingField, "'text' is required");
  return {201, to_json(users_.add_note(user, doc, body["text"].get<std::string>()))};
}

Response Gateway::delete_note(const std::string& id) {
  if (!users_.remove_note(id)) return error_response(404, "NotFound", "no such note " + id);
  return {200, Json{{"removed", id}}};
}

Response Gateway::set_weights(const Request& req) {
  const Json body = parse_body(req);
  const std::string user = body_string(body, "user_id");
  const Json w = body.value("weights", Json::object());
  if (!w.is_object()) throw Error(ErrorCode::InvalidWeights, "'weights' must be an object");
  ModuleWeights weights;
  for (Module m : kModules) {
    auto key = std::string(to_string(m));
    if (!w.contains(key)) continue;
    if (!w[key].is_number()) throw Error(ErrorCode::InvalidWeights, key + " must be a number");
    weights[m] = w[key].get<double>();
  }
  users_.set_weights(user, weights);
  return {200, Json{{"user_id", user}, {"weights", weights_json(weights)}}};
}

int Gateway::bind(const std::string& host, int port) {
  server_ = std::make_unique<httplib::Server>();
  auto route = [this](const httplib::Request& hreq, httplib::Response& hres) {
    Request req;
    req.method = hreq.method;
    req.path = hreq.path;
    req.query.insert(hreq.params.begin(), hreq.params.end());
    req.body = hreq.body;
    Response res = handle(req);
    hres.status = res.status;
    hres.set_content(res.body.dump(), "application/json");
  };
  server_->Get(".*", route);
  server_->Post(".*", route);
  server_->Delete(".*", route);
  if (port == 0) return server_->bind_to_any_port(host);
  return server_->bind_to_port(host, port) ? port : -1;
}

void Gateway::listen() {
  if (server_) server_->listen_after_bind();
}

void Gateway::stop() {
  if (server_) server_->stop();
}

}  // namespace nav
