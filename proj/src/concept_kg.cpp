#include "nav/concept_kg.hpp"

#include <algorithm>
#include <istream>
#include <mutex>
#include <ostream>

#include "nav/error.hpp"

namespace nav {

namespace {

std::mutex& gazetteer_cache_mutex() {
  static std::mutex m;
  return m;
}

std::string token_key(std::string_view text) {
  std::string out;
  for (const auto& t : tokenize_words(text)) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

}  // namespace

std::string_view to_string(ConceptType t) {
  switch (t) {
    case ConceptType::method: return "method";
    case ConceptType::task: return "task";
    case ConceptType::dataset: return "dataset";
    case ConceptType::metric: return "metric";
    case ConceptType::organization: return "organization";
    case ConceptType::other: return "other";
  }
  return "other";
}

bool parse_concept_type(std::string_view s, ConceptType& out) {
  for (auto t : kConceptTypes) {
    if (to_string(t) == s) {
      out = t;
      return true;
    }
  }
  return false;
}

std::string_view to_string(ConceptOrigin o) { return o == ConceptOrigin::seed ? "seed" : "promoted_candidate"; }

std::string_view to_string(NodeKind k) {
  switch (k) {
    case NodeKind::concept_node: return "concept";
    case NodeKind::person: return "person";
    case NodeKind::document: return "document";
  }
  return "document";
}

std::string_view to_string(Relation r) {
  switch (r) {
    case Relation::authored: return "authored";
    case Relation::cites: return "cites";
    case Relation::mentions: return "mentions";
    case Relation::related_to: return "related_to";
  }
  return "related_to";
}

namespace {

bool parse_node_kind(std::string_view s, NodeKind& out) {
  for (auto k : {NodeKind::concept_node, NodeKind::person, NodeKind::document}) {
    if (to_string(k) == s) {
      out = k;
      return true;
    }
  }
  return false;
}

bool parse_relation(std::string_view s, Relation& out) {
  for (auto r : {Relation::authored, Relation::cites, Relation::mentions, Relation::related_to}) {
    if (to_string(r) == s) {
      out = r;
      return true;
    }
  }
  return false;
}

}  // namespace

std::string concept_id_for(std::string_view canonical_name) {
  std::string out = "c:";
  bool first = true;
  for (const auto& t : tokenize_words(canonical_name)) {
    if (!first) out += '-';
    out += t;
    first = false;
  }
  return out;
}

std::string normalize_author(std::string_view name) { return to_lower(collapse_whitespace(name)); }
std::string person_node_id(std::string_view author_name) { return "p:" + normalize_author(author_name); }
std::string document_node_id(std::string_view doc_id) { return "d:" + std::string(doc_id); }

std::vector<Concept> read_gazetteer(std::istream& in) {
  std::vector<Concept> out;
  std::set<std::string> names;
  std::set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || line[0] == '#') continue;
    auto cols = split(line, '\t');
    if (cols.size() < 2 || cols.size() > 3)
      throw Error(ErrorCode::Format, "gazetteer line " + std::to_string(lineno) + ": expected 2 or 3 tab-separated columns");
    Concept c;
    c.canonical_name = collapse_whitespace(cols[0]);
    if (c.canonical_name.empty() || tokenize_words(c.canonical_name).empty())
      throw Error(ErrorCode::Format, "gazetteer line " + std::to_string(lineno) + ": empty name");
    if (!parse_concept_type(trim(cols[1]), c.type))
      throw Error(ErrorCode::Format, "gazetteer line " + std::to_string(lineno) + ": unknown type " + cols[1]);
    if (cols.size() == 3) {
      for (auto& a : split(cols[2], '|')) {
        auto alias = collapse_whitespace(a);
        if (!alias.empty() && !tokenize_words(alias).empty()) c.aliases.push_back(std::move(alias));
      }
    }
    if (!names.insert(to_lower(c.canonical_name)).second) continue;  // first definition wins
    std::string id = concept_id_for(c.canonical_name);
    for (int n = 2; ids.count(id); ++n) id = concept_id_for(c.canonical_name) + "-" + std::to_string(n);
    ids.insert(id);
    c.id = std::move(id);
    out.push_back(std::move(c));
  }
  return out;
}

Gazetteer::Gazetteer(const std::vector<Concept>& concepts) {
  for (const auto& c : concepts) {
    add(c.canonical_name, c.id);
    for (const auto& a : c.aliases) add(a, c.id);
  }
}

void Gazetteer::add(std::string_view surface, const std::string& concept_id) {
  auto key = token_key(surface);
  if (key.empty()) return;
  const std::size_t n = static_cast<std::size_t>(std::count(key.begin(), key.end(), ' ')) + 1;
  max_tokens_ = std::max(max_tokens_, n);
  auto [it, inserted] = entries_.emplace(key, concept_id);
  if (!inserted && concept_id < it->second) it->second = concept_id;
}

const std::string* Gazetteer::lookup(const std::string& key) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

std::vector<Mention> recognize_in_text(std::string_view text, const Gazetteer& gazetteer, std::string_view doc_id,
                                       Field field) {
  std::vector<Mention> out;
  if (gazetteer.empty()) return out;
  const auto tokens = tokenize(text);
  const auto cps = utf8::decode(text);
  std::size_t i = 0;
  while (i < tokens.size()) {
    bool matched = false;
    for (std::size_t len = std::min(gazetteer.max_tokens(), tokens.size() - i); len >= 1; --len) {
      std::string key = tokens[i].text;
      for (std::size_t k = 1; k < len; ++k) key += ' ' + tokens[i + k].text;
      if (const auto* id = gazetteer.lookup(key)) {
        Mention m;
        m.doc_id = std::string(doc_id);
        m.field = field;
        m.start_char = tokens[i].start;
        m.end_char = tokens[i + len - 1].end;
        m.surface = utf8::encode(std::u32string_view(cps).substr(m.start_char, m.end_char - m.start_char));
        m.gazetteer_hit = *id;
        out.push_back(std::move(m));
        i += len;
        matched = true;
        break;
      }
    }
    if (!matched) ++i;
  }
  return out;
}

std::vector<Mention> recognize_mentions(const Document& doc, const Gazetteer& gazetteer) {
  std::vector<Mention> out;
  for (Field f : {Field::title, Field::abstract, Field::body}) {
    auto m = recognize_in_text(doc.field_text(f), gazetteer, doc.id, f);
    std::move(m.begin(), m.end(), std::back_inserter(out));
  }
  return out;
}

std::string context_window(std::string_view field_text, std::size_t start_char, std::size_t end_char,
                           std::size_t window) {
  const auto tokens = tokenize(field_text);
  std::size_t first = tokens.size(), last = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i].end > start_char && tokens[i].start < end_char) {
      first = std::min(first, i);
      last = i;
    }
  }
  if (first == tokens.size()) return {};
  const std::size_t lo = first >= window ? first - window : 0;
  const std::size_t hi = std::min(tokens.size() - 1, last + window);
  std::string out;
  for (std::size_t i = lo; i <= hi; ++i) {
    if (!out.empty()) out += ' ';
    out += tokens[i].text;
  }
  return out;
}

double link_score(double string_sim, double embed_sim, const LinkerParams& params) {
  return params.string_weight * string_sim + params.embed_weight * (embed_sim + 1.0) / 2.0;
}

KnowledgeGraph::KnowledgeGraph(const KnowledgeGraph& other) { *this = other; }

KnowledgeGraph& KnowledgeGraph::operator=(const KnowledgeGraph& other) {
  if (this == &other) return *this;
  std::shared_lock theirs(other.mutex_);
  std::unique_lock mine(mutex_);
  concepts_ = other.concepts_;
  canonical_index_ = other.canonical_index_;
  nodes_ = other.nodes_;
  edges_ = other.edges_;
  token_index_ = other.token_index_;
  std::lock_guard g(gazetteer_cache_mutex());
  gazetteer_.reset();
  return *this;
}

void KnowledgeGraph::upsert_concept(const Concept& c) {
  if (c.id.empty() || tokenize_words(c.canonical_name).empty())
    throw Error(ErrorCode::InvalidDocument, "concept needs an id and a name");
  std::unique_lock lock(mutex_);
  const auto lower = to_lower(c.canonical_name);
  if (auto it = canonical_index_.find(lower); it != canonical_index_.end() && it->second != c.id)
    throw Error(ErrorCode::InvalidDocument, "canonical name '" + c.canonical_name + "' already used by " + it->second);

  auto [it, inserted] = concepts_.try_emplace(c.id, c);
  Concept& stored = it->second;
  if (!inserted) {
    for (const auto& a : c.aliases) {
      if (a.empty()) continue;
      if (std::find(stored.aliases.begin(), stored.aliases.end(), a) == stored.aliases.end()) stored.aliases.push_back(a);
    }
  } else {
    stored.aliases.erase(std::remove(stored.aliases.begin(), stored.aliases.end(), std::string()), stored.aliases.end());
    canonical_index_[lower] = c.id;
  }
  for (const auto& t : tokenize_words(stored.canonical_name)) token_index_[t].insert(stored.id);
  for (const auto& a : stored.aliases) {
    for (const auto& t : tokenize_words(a)) token_index_[t].insert(stored.id);
  }
  nodes_[stored.id] = KGNode{stored.id, NodeKind::concept_node, stored.canonical_name};
  std::lock_guard g(gazetteer_cache_mutex());
  gazetteer_.reset();
}

void KnowledgeGraph::upsert_node(const KGNode& node) {
  if (node.id.empty()) throw Error(ErrorCode::InvalidDocument, "node id must be non-empty");
  std::unique_lock lock(mutex_);
  if (auto it = nodes_.find(node.id); it != nodes_.end() && it->second.kind != node.kind)
    throw Error(ErrorCode::KindConstraintViolation, "node " + node.id + " already has kind " + std::string(to_string(it->second.kind)));
  if (node.kind == NodeKind::concept_node && !concepts_.count(node.id)) {
    lock.unlock();
    upsert_concept(Concept{node.id, node.payload.empty() ? node.id : node.payload, {}, ConceptType::other, ConceptOrigin::seed});
    return;
  }
  nodes_[node.id] = node;
}

void KnowledgeGraph::check_kinds(const KGEdge& e) const {
  auto src = nodes_.find(e.src);
  auto dst = nodes_.find(e.dst);
  if (src == nodes_.end()) throw Error(ErrorCode::UnknownEndpoint, e.src);
  if (dst == nodes_.end()) throw Error(ErrorCode::UnknownEndpoint, e.dst);
  NodeKind want_src{}, want_dst{};
  switch (e.relation) {
    case Relation::cites: want_src = NodeKind::document; want_dst = NodeKind::document; break;
    case Relation::authored: want_src = NodeKind::person; want_dst = NodeKind::document; break;
    case Relation::mentions: want_src = NodeKind::document; want_dst = NodeKind::concept_node; break;
    case Relation::related_to: want_src = NodeKind::concept_node; want_dst = NodeKind::concept_node; break;
  }
  if (src->second.kind != want_src || dst->second.kind != want_dst) {
    throw Error(ErrorCode::KindConstraintViolation,
                std::string(to_string(e.relation)) + " requires " + std::string(to_string(want_src)) + " -> " +
                    std::string(to_string(want_dst)) + ", got " + std::string(to_string(src->second.kind)) + " -> " +
                    std::string(to_string(dst->second.kind)));
  }
}

bool KnowledgeGraph::add_edge(const KGEdge& edge) {
  std::unique_lock lock(mutex_);
  check_kinds(edge);
  return edges_.try_emplace({edge.src, edge.dst, edge.relation}, edge).second;
}

std::optional<Concept> KnowledgeGraph::concept_by_id(std::string_view id) const {
  std::shared_lock lock(mutex_);
  auto it = concepts_.find(std::string(id));
  if (it == concepts_.end()) return std::nullopt;
  return it->second;
}

std::vector<Concept> KnowledgeGraph::concepts() const {
  std::shared_lock lock(mutex_);
  std::vector<Concept> out;
  for (const auto& [id, c] : concepts_) out.push_back(c);
  return out;
}

std::vector<Concept> KnowledgeGraph::concepts_with_prefix(std::string_view prefix) const {
  const auto p = to_lower(prefix);
  std::shared_lock lock(mutex_);
  std::vector<Concept> out;
  for (const auto& [lower, id] : canonical_index_) {
    if (lower.compare(0, p.size(), p) == 0) out.push_back(concepts_.at(id));
  }
  return out;
}

std::optional<KGNode> KnowledgeGraph::node(std::string_view id) const {
  std::shared_lock lock(mutex_);
  auto it = nodes_.find(std::string(id));
  if (it == nodes_.end()) return std::nullopt;
  return it->second;
}

std::vector<KGNode> KnowledgeGraph::nodes() const {
  std::shared_lock lock(mutex_);
  std::vector<KGNode> out;
  for (const auto& [id, n] : nodes_) out.push_back(n);
  return out;
}

std::vector<KGEdge> KnowledgeGraph::edges() const {
  std::shared_lock lock(mutex_);
  std::vector<KGEdge> out;
  for (const auto& [k, e] : edges_) out.push_back(e);
  return out;
}

std::size_t KnowledgeGraph::concept_count() const {
  std::shared_lock lock(mutex_);
  return concepts_.size();
}

std::vector<std::string> KnowledgeGraph::cites(std::string_view doc_id) const {
  const auto src = document_node_id(doc_id);
  std::shared_lock lock(mutex_);
  std::vector<std::string> out;
  for (auto it = edges_.lower_bound({src, std::string(), Relation::authored}); it != edges_.end(); ++it) {
    if (std::get<0>(it->first) != src) break;
    if (std::get<2>(it->first) == Relation::cites) out.push_back(std::get<1>(it->first).substr(2));
  }
  return out;
}

std::vector<std::string> KnowledgeGraph::cited_by(std::string_view doc_id) const {
  const auto dst = document_node_id(doc_id);
  std::shared_lock lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [k, e] : edges_) {
    if (e.relation == Relation::cites && e.dst == dst) out.push_back(e.src.substr(2));
  }
  return out;
}

std::map<ConceptType, std::size_t> KnowledgeGraph::concept_type_distribution() const {
  std::map<ConceptType, std::size_t> out;
  for (auto t : kConceptTypes) out[t] = 0;
  std::shared_lock lock(mutex_);
  for (const auto& [id, c] : concepts_) ++out[c.type];
  return out;
}

std::vector<std::string> KnowledgeGraph::candidate_concepts(std::string_view surface) const {
  std::set<std::string> ids;
  std::shared_lock lock(mutex_);
  for (const auto& t : tokenize_words(surface)) {
    auto it = token_index_.find(t);
    if (it != token_index_.end()) ids.insert(it->second.begin(), it->second.end());
  }
  return {ids.begin(), ids.end()};
}

std::shared_ptr<const Gazetteer> KnowledgeGraph::gazetteer() const {
  {
    std::lock_guard g(gazetteer_cache_mutex());
    if (gazetteer_) return gazetteer_;
  }
  auto built = std::make_shared<const Gazetteer>(concepts());
  std::lock_guard g(gazetteer_cache_mutex());
  if (!gazetteer_) gazetteer_ = built;
  return gazetteer_;
}

std::vector<std::string> KnowledgeGraph::validate() const {
  std::vector<std::string> problems;
  std::shared_lock lock(mutex_);
  std::set<std::string> lower_names;
  for (const auto& [id, c] : concepts_) {
    if (!lower_names.insert(to_lower(c.canonical_name)).second) problems.push_back("duplicate canonical name " + c.canonical_name);
    for (const auto& a : c.aliases) {
      if (a.empty()) problems.push_back("empty alias on " + id);
    }
    auto n = nodes_.find(id);
    if (n == nodes_.end() || n->second.kind != NodeKind::concept_node) problems.push_back("concept without node " + id);
  }
  for (const auto& [k, e] : edges_) {
    if (std::tie(e.src, e.dst, e.relation) != std::tie(std::get<0>(k), std::get<1>(k), std::get<2>(k)))
      problems.push_back("edge key mismatch " + e.src + " -> " + e.dst);
    try {
      check_kinds(e);
    } catch (const Error& err) {
      problems.push_back(err.what());
    }
  }
  return problems;
}

void KnowledgeGraph::write_jsonl(std::ostream& out) const {
  std::shared_lock lock(mutex_);
  for (const auto& [id, n] : nodes_) {
    Json j{{"type", "node"}, {"id", n.id}, {"kind", to_string(n.kind)}, {"payload", n.payload}};
    if (auto c = concepts_.find(id); c != concepts_.end()) {
      j["concept"] = Json{{"canonical_name", c->second.canonical_name},
                          {"aliases", c->second.aliases},
                          {"concept_type", to_string(c->second.type)},
                          {"created_from", to_string(c->second.created_from)}};
    }
    out << j.dump() << '\n';
  }
  for (const auto& [k, e] : edges_) {
    Json j{{"type", "edge"}, {"src", e.src}, {"dst", e.dst}, {"relation", to_string(e.relation)}};
    j["weight"] = e.weight ? Json(*e.weight) : Json(nullptr);
    out << j.dump() << '\n';
  }
}

void KnowledgeGraph::read_jsonl(std::istream& in) {
  std::string line;
  std::vector<KGEdge> edges;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto j = Json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::Format, "bad KG line");
    try {
      const auto type = j.at("type").get<std::string>();
      if (type == "node") {
        KGNode n;
        n.id = j.at("id").get<std::string>();
        if (!parse_node_kind(j.at("kind").get<std::string>(), n.kind)) throw Error(ErrorCode::Format, "bad node kind");
        n.payload = j.value("payload", "");
        if (j.contains("concept")) {
          const auto& cj = j.at("concept");
          Concept c;
          c.id = n.id;
          c.canonical_name = cj.at("canonical_name").get<std::string>();
          c.aliases = cj.at("aliases").get<std::vector<std::string>>();
          if (!parse_concept_type(cj.at("concept_type").get<std::string>(), c.type))
            throw Error(ErrorCode::Format, "bad concept type");
          c.created_from = cj.value("created_from", "seed") == "seed" ? ConceptOrigin::seed : ConceptOrigin::promoted_candidate;
          upsert_concept(c);
        } else {
          upsert_node(n);
        }
      } else if (type == "edge") {
        KGEdge e;
        e.src = j.at("src").get<std::string>();
        e.dst = j.at("dst").get<std::string>();
        if (!parse_relation(j.at("relation").get<std::string>(), e.relation)) throw Error(ErrorCode::Format, "bad relation");
        if (j.contains("weight") && !j.at("weight").is_null()) e.weight = j.at("weight").get<double>();
        edges.push_back(std::move(e));
      } else {
        throw Error(ErrorCode::Format, "unknown KG record type " + type);
      }
    } catch (const Json::exception& ex) {
      throw Error(ErrorCode::Format, ex.what());
    }
  }
  for (const auto& e : edges) add_edge(e);
}

LinkOutcome link_mention(const Mention& mention, std::string_view field_text, const KnowledgeGraph& kg,
                         const Embedder& embedder, const LinkerParams& params) {
  LinkOutcome out;
  out.mention = mention;
  const auto candidates = kg.candidate_concepts(mention.surface);
  if (candidates.empty()) return out;

  const std::string surface = token_key(mention.surface);
  const std::string context = context_window(field_text, mention.start_char, mention.end_char, params.context_tokens);
  std::optional<Vector> ctx_vec;
  if (!tokenize_words(context).empty()) ctx_vec = embedder.embed(context);

  bool have = false;
  for (const auto& id : candidates) {
    auto c = kg.concept_by_id(id);
    if (!c) continue;
    double ssim = edit_similarity(surface, token_key(c->canonical_name));
    for (const auto& a : c->aliases) ssim = std::max(ssim, edit_similarity(surface, token_key(a)));
    const double esim = ctx_vec ? cosine(*ctx_vec, embedder.embed(c->canonical_name)) : 0.0;
    const double score = link_score(ssim, esim, params);
    if (!have || score > out.score) {
      have = true;
      out.score = score;
      out.string_sim = ssim;
      out.embed_sim = esim;
      out.linked_concept = id;
    }
  }
  if (out.score < params.threshold) out.linked_concept.reset();
  return out;
}

std::vector<Concept> propose_concepts(const std::vector<Mention>& unlinked, std::size_t min_support) {
  struct Group {
    std::size_t support = 0;
    std::set<std::string> docs;
  };
  std::map<std::string, Group> groups;
  for (const auto& m : unlinked) {
    auto key = token_key(m.surface);
    if (key.empty()) continue;
    auto& g = groups[key];
    ++g.support;
    g.docs.insert(m.doc_id);
  }
  std::vector<Concept> out;
  for (const auto& [surface, g] : groups) {
    if (g.support < min_support || g.docs.size() < 2) continue;
    out.push_back(Concept{concept_id_for(surface), surface, {}, ConceptType::other, ConceptOrigin::promoted_candidate});
  }
  return out;
}

std::vector<std::string> find_concepts_in_query(std::string_view query, const KnowledgeGraph& kg) {
  std::vector<std::string> out;
  for (const auto& m : recognize_in_text(query, *kg.gazetteer())) {
    if (m.gazetteer_hit && std::find(out.begin(), out.end(), *m.gazetteer_hit) == out.end()) out.push_back(*m.gazetteer_hit);
  }
  return out;
}

}  // namespace nav
