#include "nav/keyword_search.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <set>
#include <unordered_set>

#include "nav/error.hpp"

namespace nav {

namespace {

constexpr std::array<std::string_view, 50> kStopwords = {
    "a",    "an",   "and",   "are",  "as",   "at",   "be",    "but",  "by",    "for",
    "from", "has",  "have",  "he",   "her",  "his",  "how",   "i",    "if",    "in",
    "into", "is",   "it",    "its",  "no",   "not",  "of",    "on",   "or",    "our",
    "she",  "so",   "such",  "that", "the",  "their", "then", "there", "these", "they",
    "this", "to",   "was",   "we",   "what", "when", "which", "who",  "will",  "with"};

constexpr std::array<Field, 4> kFields = {Field::title, Field::abstract, Field::authors, Field::body};

std::vector<std::vector<std::string>> field_tokens(const Document& doc, Field f) {
  // Authors are separate phrases: a one-position gap stops phrases spanning two names.
  if (f == Field::authors) {
    std::vector<std::vector<std::string>> out;
    for (const auto& a : doc.authors) out.push_back(tokenize_words(a));
    return out;
  }
  return {tokenize_words(doc.field_text(f))};
}

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw Error(ErrorCode::Format, "truncated keyword index");
  return v;
}
void put_str(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}
std::string get_str(std::istream& in) {
  std::string s(get<std::uint32_t>(in), '\0');
  in.read(s.data(), static_cast<std::streamsize>(s.size()));
  if (!in) throw Error(ErrorCode::Format, "truncated keyword index");
  return s;
}

}  // namespace

double FieldWeights::weight(Field f) const {
  switch (f) {
    case Field::authors: return authors;
    case Field::title: return title;
    case Field::abstract: return abstract;
    case Field::body: return body;
  }
  return 0.0;
}

bool FieldWeights::valid() const {
  return authors > 0 && title > 0 && abstract > 0 && body > 0 && dismax_tiebreak >= 0 && body < authors &&
         body < title && body < abstract;
}

bool is_stopword(std::string_view token) {
  return std::find(kStopwords.begin(), kStopwords.end(), token) != kStopwords.end();
}

std::string NGram::text() const {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

QueryPlan plan_query(std::string_view q, std::size_t max_ngram, double stopword_boost) {
  auto tokens = tokenize_words(q);
  if (tokens.empty()) throw Error(ErrorCode::EmptyQuery, "query has no tokens");
  if (max_ngram < 1) throw Error(ErrorCode::InvalidSize, "max_ngram must be >= 1");
  QueryPlan plan;
  plan.raw_query = std::string(q);
  const std::size_t cap = std::min(max_ngram, tokens.size());
  for (std::size_t n = 1; n <= cap; ++n) {
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
      NGram g;
      g.tokens.assign(tokens.begin() + static_cast<std::ptrdiff_t>(i), tokens.begin() + static_cast<std::ptrdiff_t>(i + n));
      g.boost = (n == 1 && is_stopword(g.tokens[0])) ? stopword_boost : static_cast<double>(n);
      plan.ngrams.push_back(std::move(g));
    }
  }
  return plan;
}

double ScoreBreakdown::reconstruct() const {
  double sum = 0.0;
  for (const auto& g : ngrams) sum += g.boost * g.combined;
  return prior.value() * sum;
}

PriorBreakdown document_prior(std::int64_t citation_count, Date published_at, Date today, double tau_days) {
  PriorBreakdown p;
  p.citation_component = 1.0 + std::log1p(static_cast<double>(std::max<std::int64_t>(0, citation_count)));
  const double age = std::max<double>(0.0, static_cast<double>((today - published_at).count()));
  p.recency_component = std::exp(-age / tau_days);
  return p;
}

void KeywordIndex::index_document(const Document& doc) {
  std::uint32_t ord;
  if (auto it = ordinals_.find(doc.id); it != ordinals_.end()) {
    ord = it->second;
    auto& entry = docs_[ord];
    if (entry.version >= doc.version) return;
    for (const auto& t : entry.terms) {
      auto p = postings_.find(t);
      if (p == postings_.end()) continue;
      p->second.erase(ord);
      if (p->second.empty()) postings_.erase(p);
    }
  } else {
    ord = static_cast<std::uint32_t>(docs_.size());
    docs_.emplace_back();
    ordinals_.emplace(doc.id, ord);
  }
  auto& entry = docs_[ord];
  entry.id = doc.id;
  entry.version = doc.version;
  entry.published_at = doc.published_at;
  entry.citation_count = doc.citation_count;
  entry.terms.clear();

  std::set<std::string> terms;
  for (Field f : kFields) {
    std::uint32_t pos = 0;
    for (const auto& phrase : field_tokens(doc, f)) {
      for (const auto& tok : phrase) {
        postings_[tok][ord][static_cast<std::size_t>(f)].push_back(pos++);
        terms.insert(tok);
      }
      ++pos;
    }
  }
  entry.terms.assign(terms.begin(), terms.end());
}

bool KeywordIndex::contains(std::string_view doc_id) const { return ordinals_.count(std::string(doc_id)) != 0; }

const KeywordIndex::Positions* KeywordIndex::positions(std::uint32_t doc, const std::string& term) const {
  auto p = postings_.find(term);
  if (p == postings_.end()) return nullptr;
  auto d = p->second.find(doc);
  return d == p->second.end() ? nullptr : &d->second;
}

std::size_t KeywordIndex::phrase_count(std::uint32_t doc, Field field, const std::vector<std::string>& tokens) const {
  if (tokens.empty()) return 0;
  const auto fi = static_cast<std::size_t>(field);
  std::vector<const std::vector<std::uint32_t>*> lists;
  for (const auto& t : tokens) {
    const auto* p = positions(doc, t);
    if (!p || (*p)[fi].empty()) return 0;
    lists.push_back(&(*p)[fi]);
  }
  std::size_t count = 0;
  for (std::uint32_t start : *lists[0]) {
    bool ok = true;
    for (std::size_t k = 1; ok && k < lists.size(); ++k) {
      ok = std::binary_search(lists[k]->begin(), lists[k]->end(), start + static_cast<std::uint32_t>(k));
    }
    if (ok) ++count;
  }
  return count;
}

std::size_t KeywordIndex::phrase_count(std::string_view doc_id, Field field, const std::vector<std::string>& tokens) const {
  auto it = ordinals_.find(std::string(doc_id));
  return it == ordinals_.end() ? 0 : phrase_count(it->second, field, tokens);
}

double KeywordIndex::field_match_score(std::uint32_t doc, Field field, const NGram& ngram) const {
  const std::size_t tf = phrase_count(doc, field, ngram.tokens);
  if (tf == 0) return 0.0;
  const double w = params_.weights.weight(field);
  if (field == Field::body) {
    const double t = static_cast<double>(tf);
    return w * t / (t + 1.0);
  }
  return w;
}

double KeywordIndex::field_match_score(std::string_view doc_id, Field field, const NGram& ngram) const {
  auto it = ordinals_.find(std::string(doc_id));
  return it == ordinals_.end() ? 0.0 : field_match_score(it->second, field, ngram);
}

ScoreBreakdown KeywordIndex::score(std::uint32_t doc, const QueryPlan& plan) const {
  ScoreBreakdown b;
  const auto& entry = docs_[doc];
  b.prior = document_prior(entry.citation_count, entry.published_at, params_.today, params_.recency_tau_days);
  for (const auto& g : plan.ngrams) {
    NGramScore s;
    s.ngram = g.text();
    s.boost = g.boost;
    // Winner order on equal scores follows kFields (title first).
    double sum = 0.0;
    bool first = true;
    for (Field f : kFields) {
      const double v = field_match_score(doc, f, g);
      s.field_scores[static_cast<std::size_t>(f)] = v;
      sum += v;
      if (first || v > s.field_score) {
        s.field_score = v;
        s.winning_field = f;
        first = false;
      }
    }
    s.combined = s.field_score + params_.weights.dismax_tiebreak * (sum - s.field_score);
    b.match_total += s.boost * s.combined;
    b.ngrams.push_back(std::move(s));
  }
  b.total = b.match_total * b.prior.value();
  return b;
}

std::optional<ScoreBreakdown> KeywordIndex::score_document(std::string_view doc_id, const QueryPlan& plan) const {
  auto it = ordinals_.find(std::string(doc_id));
  if (it == ordinals_.end()) return std::nullopt;
  return score(it->second, plan);
}

std::vector<RankedResult> KeywordIndex::search(std::string_view q, std::size_t k) const {
  if (k < 1) throw Error(ErrorCode::InvalidSize, "k must be >= 1");
  const auto plan = plan_query(q, params_.max_ngram, params_.stopword_boost);
  std::unordered_set<std::uint32_t> candidates;
  for (const auto& g : plan.ngrams) {
    if (g.n() != 1) continue;
    auto p = postings_.find(g.tokens[0]);
    if (p == postings_.end()) continue;
    for (const auto& [doc, pos] : p->second) candidates.insert(doc);
  }
  std::vector<RankedResult> out;
  for (std::uint32_t doc : candidates) {
    auto b = score(doc, plan);
    if (b.match_total <= 0.0) continue;
    out.push_back({docs_[doc].id, b.total, docs_[doc].published_at, std::move(b)});
  }
  auto better = [](const RankedResult& a, const RankedResult& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.published_at != b.published_at) return a.published_at > b.published_at;
    return a.doc_id < b.doc_id;
  };
  if (out.size() > k) {
    std::partial_sort(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(k), out.end(), better);
    out.resize(k);
  } else {
    std::sort(out.begin(), out.end(), better);
  }
  return out;
}

std::vector<std::string> KeywordIndex::documents_with_term(std::string_view term) const {
  std::vector<std::string> out;
  auto p = postings_.find(std::string(term));
  if (p == postings_.end()) return out;
  for (const auto& [doc, pos] : p->second) out.push_back(docs_[doc].id);
  std::sort(out.begin(), out.end());
  return out;
}

bool KeywordIndex::same_content(const KeywordIndex& other) const {
  if (docs_.size() != other.docs_.size() || postings_.size() != other.postings_.size()) return false;
  for (const auto& d : docs_) {
    auto it = other.ordinals_.find(d.id);
    if (it == other.ordinals_.end()) return false;
    const auto& o = other.docs_[it->second];
    if (o.version != d.version || o.published_at != d.published_at || o.citation_count != d.citation_count ||
        o.terms != d.terms)
      return false;
  }
  for (const auto& [term, plist] : postings_) {
    auto ot = other.postings_.find(term);
    if (ot == other.postings_.end() || ot->second.size() != plist.size()) return false;
    for (const auto& [doc, pos] : plist) {
      auto od = ot->second.find(other.ordinals_.at(docs_[doc].id));
      if (od == ot->second.end() || od->second != pos) return false;
    }
  }
  return true;
}

void KeywordIndex::save(std::ostream& out) const {
  out.write("NAVKIDX1", 8);
  put<std::uint32_t>(out, 1);
  put<std::uint64_t>(out, docs_.size());
  for (const auto& d : docs_) {
    put_str(out, d.id);
    put<std::int64_t>(out, d.version);
    put<std::int32_t>(out, static_cast<std::int32_t>(d.published_at.time_since_epoch().count()));
    put<std::int64_t>(out, d.citation_count);
  }
  std::vector<const std::string*> terms;
  terms.reserve(postings_.size());
  for (const auto& [t, p] : postings_) terms.push_back(&t);
  std::sort(terms.begin(), terms.end(), [](const std::string* a, const std::string* b) { return *a < *b; });
  put<std::uint64_t>(out, terms.size());
  for (const auto* t : terms) {
    const auto& plist = postings_.at(*t);
    put_str(out, *t);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(plist.size()));
    for (const auto& [doc, pos] : plist) {
      put<std::uint32_t>(out, doc);
      for (const auto& field : pos) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(field.size()));
        for (auto p : field) put<std::uint32_t>(out, p);
      }
    }
  }
  if (!out) throw Error(ErrorCode::Io, "failed writing keyword index");
}

KeywordIndex KeywordIndex::load(std::istream& in, KeywordParams params) {
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, "NAVKIDX1", 8) != 0) throw Error(ErrorCode::Format, "bad keyword index magic");
  if (get<std::uint32_t>(in) != 1) throw Error(ErrorCode::Format, "unsupported keyword index format");
  KeywordIndex idx(std::move(params));
  const auto n = get<std::uint64_t>(in);
  for (std::uint64_t i = 0; i < n; ++i) {
    DocEntry d;
    d.id = get_str(in);
    d.version = get<std::int64_t>(in);
    d.published_at = Date{std::chrono::days{get<std::int32_t>(in)}};
    d.citation_count = get<std::int64_t>(in);
    idx.ordinals_.emplace(d.id, static_cast<std::uint32_t>(i));
    idx.docs_.push_back(std::move(d));
  }
  const auto nterms = get<std::uint64_t>(in);
  for (std::uint64_t i = 0; i < nterms; ++i) {
    auto term = get_str(in);
    auto& plist = idx.postings_[term];
    const auto np = get<std::uint32_t>(in);
    for (std::uint32_t j = 0; j < np; ++j) {
      const auto doc = get<std::uint32_t>(in);
      if (doc >= idx.docs_.size()) throw Error(ErrorCode::Format, "posting references unknown document");
      auto& pos = plist[doc];
      for (auto& field : pos) {
        field.resize(get<std::uint32_t>(in));
        for (auto& p : field) p = get<std::uint32_t>(in);
      }
      idx.docs_[doc].terms.push_back(term);
    }
  }
  return idx;
}

}  // namespace nav
