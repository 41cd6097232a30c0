#include "nav/corpus.hpp"

#include <algorithm>
#include <array>

#include "nav/error.hpp"

namespace nav {

std::string_view to_string(Source s) {
  switch (s) {
    case Source::arxiv: return "arxiv";
    case Source::openreview: return "openreview";
    case Source::blog: return "blog";
    case Source::other: return "other";
  }
  return "other";
}

std::string_view to_string(Field f) {
  switch (f) {
    case Field::title: return "title";
    case Field::abstract: return "abstract";
    case Field::authors: return "authors";
    case Field::body: return "body";
  }
  return "body";
}

bool parse_field(std::string_view s, Field& out) {
  for (Field f : {Field::title, Field::abstract, Field::authors, Field::body}) {
    if (to_string(f) == s) {
      out = f;
      return true;
    }
  }
  return false;
}

std::string Document::field_text(Field f) const {
  switch (f) {
    case Field::title: return title;
    case Field::abstract: return abstract;
    case Field::body: return body.value_or("");
    case Field::authors: {
      std::string out;
      for (std::size_t i = 0; i < authors.size(); ++i) {
        if (i) out += "; ";
        out += authors[i];
      }
      return out;
    }
  }
  return {};
}

bool Document::has_same_content(const Document& o) const {
  return id == o.id && source == o.source && title == o.title && abstract == o.abstract &&
         authors == o.authors && body == o.body && references_raw == o.references_raw &&
         published_at == o.published_at && categories == o.categories &&
         citation_count == o.citation_count && url == o.url;
}

namespace {

std::string require_string(const Json& raw, const char* name) {
  if (!raw.contains(name) || raw.at(name).is_null()) throw Error(ErrorCode::MissingField, name);
  if (!raw.at(name).is_string()) throw Error(ErrorCode::InvalidDocument, std::string(name) + " must be a string");
  return raw.at(name).get<std::string>();
}

std::optional<std::string> optional_string(const Json& raw, const char* name) {
  if (!raw.contains(name) || raw.at(name).is_null()) return std::nullopt;
  if (!raw.at(name).is_string()) throw Error(ErrorCode::InvalidDocument, std::string(name) + " must be a string");
  return raw.at(name).get<std::string>();
}

}  // namespace

Document validate_document(const Json& raw, Date today) {
  if (!raw.is_object()) throw Error(ErrorCode::InvalidDocument, "record is not an object");
  Document d;
  d.id = trim(require_string(raw, "id"));
  if (d.id.empty()) throw Error(ErrorCode::MissingField, "id");

  d.title = collapse_whitespace(require_string(raw, "title"));
  if (d.title.empty()) throw Error(ErrorCode::EmptyTitle, d.id);

  if (!raw.contains("authors") || raw.at("authors").is_null()) throw Error(ErrorCode::MissingField, "authors");
  if (!raw.at("authors").is_array()) throw Error(ErrorCode::InvalidDocument, "authors must be an array");
  for (const auto& a : raw.at("authors")) {
    if (!a.is_string()) throw Error(ErrorCode::InvalidDocument, "author names must be strings");
    auto name = collapse_whitespace(a.get<std::string>());
    if (name.empty()) throw Error(ErrorCode::InvalidDocument, "empty author name");
    d.authors.push_back(std::move(name));
  }

  auto date = require_string(raw, "published_at");
  if (!parse_date(date, d.published_at)) throw Error(ErrorCode::InvalidDate, date);
  if (d.published_at > today) throw Error(ErrorCode::InvalidDate, date + " is in the future");

  if (raw.contains("version") && !raw.at("version").is_null()) {
    if (!raw.at("version").is_number_integer()) throw Error(ErrorCode::InvalidDocument, "version must be an integer");
    d.version = raw.at("version").get<std::int64_t>();
    if (d.version < 1) throw Error(ErrorCode::InvalidDocument, "version must be >= 1");
  }
  if (auto src = optional_string(raw, "source")) {
    if (*src == "arxiv") d.source = Source::arxiv;
    else if (*src == "openreview") d.source = Source::openreview;
    else if (*src == "blog") d.source = Source::blog;
    else if (*src == "other") d.source = Source::other;
    else throw Error(ErrorCode::InvalidDocument, "unknown source " + *src);
  }
  d.abstract = optional_string(raw, "abstract").value_or("");
  d.body = optional_string(raw, "body");
  d.references_raw = optional_string(raw, "references_raw");
  d.url = optional_string(raw, "url");
  if (raw.contains("categories") && !raw.at("categories").is_null()) {
    if (!raw.at("categories").is_array()) throw Error(ErrorCode::InvalidDocument, "categories must be an array");
    for (const auto& c : raw.at("categories")) {
      if (!c.is_string()) throw Error(ErrorCode::InvalidDocument, "categories must be strings");
      d.categories.push_back(c.get<std::string>());
    }
  }
  if (raw.contains("citation_count") && !raw.at("citation_count").is_null()) {
    const auto& c = raw.at("citation_count");
    if (!c.is_number_integer() || c.get<std::int64_t>() < 0)
      throw Error(ErrorCode::InvalidDocument, "citation_count must be a non-negative integer");
    d.citation_count = c.get<std::int64_t>();
  }
  return d;
}

Document parse_document_line(std::string_view line, Date today) {
  Json j;
  try {
    j = Json::parse(line);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::Format, e.what());
  }
  return validate_document(j, today);
}

Json to_json(const Document& d) {
  Json j;
  j["id"] = d.id;
  j["version"] = d.version;
  j["source"] = to_string(d.source);
  j["title"] = d.title;
  j["abstract"] = d.abstract;
  j["authors"] = d.authors;
  j["body"] = d.body ? Json(*d.body) : Json(nullptr);
  j["references_raw"] = d.references_raw ? Json(*d.references_raw) : Json(nullptr);
  j["published_at"] = format_date(d.published_at);
  j["categories"] = d.categories;
  j["citation_count"] = d.citation_count;
  j["url"] = d.url ? Json(*d.url) : Json(nullptr);
  return j;
}

namespace {

constexpr std::array<std::u32string_view, 6> kAbbreviations = {U"e.g", U"i.e", U"fig", U"eq", U"vs", U"cf"};

bool is_letter(char32_t c) { return is_alnum(c) && !is_digit(c); }

bool is_decimal(std::u32string_view tok) {
  auto dot = tok.find(U'.');
  if (dot == std::u32string_view::npos || dot == 0 || dot + 1 >= tok.size()) return false;
  for (std::size_t i = 0; i < tok.size(); ++i) {
    if (i != dot && !is_digit(tok[i])) return false;
  }
  return true;
}

// Token is the whitespace-delimited run ending right before the period at `dot`.
bool period_is_abbreviation(const std::u32string& cps, std::size_t dot) {
  std::size_t b = dot;
  while (b > 0 && !is_space(cps[b - 1])) --b;
  std::u32string tok = cps.substr(b, dot - b);
  while (!tok.empty() && !is_alnum(tok.front())) tok.erase(tok.begin());
  if (tok.empty()) return false;
  if (tok.size() == 1 && is_letter(tok[0])) return true;
  std::u32string lower;
  for (char32_t c : tok) lower.push_back(to_lower(c));
  for (auto abbr : kAbbreviations) {
    if (lower == abbr) return true;
  }
  if (lower == U"al") {
    std::size_t e = b;
    while (e > 0 && is_space(cps[e - 1])) --e;
    std::size_t pb = e;
    while (pb > 0 && !is_space(cps[pb - 1])) --pb;
    std::u32string prev;
    for (std::size_t k = pb; k < e; ++k) prev.push_back(to_lower(cps[k]));
    if (prev == U"et") return true;
  }
  return is_decimal(tok);
}

}  // namespace

std::vector<SentenceSpan> segment_sentences(std::string_view text) {
  auto cps = utf8::decode(text);
  std::vector<std::pair<std::size_t, std::size_t>> pieces;
  std::size_t start = 0;
  for (std::size_t i = 0; i + 1 < cps.size(); ++i) {
    char32_t c = cps[i];
    if (c != U'.' && c != U'!' && c != U'?') continue;
    if (!is_space(cps[i + 1])) continue;
    std::size_t j = i + 1;
    while (j < cps.size() && is_space(cps[j])) ++j;
    if (j >= cps.size() || !(is_upper(cps[j]) || is_digit(cps[j]))) continue;
    if (c == U'.' && period_is_abbreviation(cps, i)) continue;
    pieces.emplace_back(start, i + 1);
    start = i + 1;
  }
  pieces.emplace_back(start, cps.size());

  std::vector<SentenceSpan> out;
  for (auto [b, e] : pieces) {
    while (b < e && is_space(cps[b])) ++b;
    while (e > b && is_space(cps[e - 1])) --e;
    if (b == e) continue;
    SentenceSpan s;
    s.start_char = b;
    s.end_char = e;
    s.ordinal = out.size();
    out.push_back(s);
  }
  return out;
}

std::vector<SentenceSpan> segment_field(const Document& doc, Field field) {
  auto spans = segment_sentences(doc.field_text(field));
  for (auto& s : spans) {
    s.doc_id = doc.id;
    s.field = field;
  }
  return spans;
}

std::vector<ChunkSpan> chunk_sentences(const std::vector<SentenceSpan>& spans, std::size_t size) {
  if (size < 1) throw Error(ErrorCode::InvalidSize, "chunk size must be >= 1");
  std::vector<ChunkSpan> out;
  for (std::size_t i = 0; i < spans.size(); i += size) {
    std::size_t last = std::min(i + size, spans.size()) - 1;
    ChunkSpan c;
    c.doc_id = spans[i].doc_id;
    c.field = spans[i].field;
    c.start_char = spans[i].start_char;
    c.end_char = spans[last].end_char;
    c.ordinal = out.size();
    c.first_sentence = spans[i].ordinal;
    c.last_sentence = spans[last].ordinal;
    out.push_back(c);
  }
  return out;
}

std::string_view to_string(AnnotationKind k) {
  switch (k) {
    case AnnotationKind::concept_mention: return "concept_mention";
    case AnnotationKind::concept_link: return "concept_link";
    case AnnotationKind::citation_marker: return "citation_marker";
    case AnnotationKind::embedding_ref: return "embedding_ref";
  }
  return "concept_mention";
}

bool parse_annotation_kind(std::string_view s, AnnotationKind& out) {
  for (auto k : {AnnotationKind::concept_mention, AnnotationKind::concept_link, AnnotationKind::citation_marker,
                 AnnotationKind::embedding_ref}) {
    if (to_string(k) == s) {
      out = k;
      return true;
    }
  }
  return false;
}

Json to_json(const StandoffAnnotation& a) {
  return Json{{"doc_id", a.doc_id},         {"doc_version", a.doc_version}, {"field", to_string(a.field)},
              {"start_char", a.start_char}, {"end_char", a.end_char},       {"kind", to_string(a.kind)},
              {"payload", a.payload},       {"producer_stage", a.producer_stage}};
}

StandoffAnnotation annotation_from_json(const Json& j) {
  StandoffAnnotation a;
  try {
    a.doc_id = j.at("doc_id").get<std::string>();
    a.doc_version = j.at("doc_version").get<std::int64_t>();
    if (!parse_field(j.at("field").get<std::string>(), a.field)) throw Error(ErrorCode::Format, "bad field");
    a.start_char = j.at("start_char").get<std::size_t>();
    a.end_char = j.at("end_char").get<std::size_t>();
    if (!parse_annotation_kind(j.at("kind").get<std::string>(), a.kind)) throw Error(ErrorCode::Format, "bad kind");
    a.payload = j.at("payload").get<std::string>();
    a.producer_stage = j.at("producer_stage").get<std::string>();
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Format, e.what());
  }
  return a;
}

std::string resolve_annotation(const Document& doc, const StandoffAnnotation& ann) {
  if (ann.doc_version != doc.version || ann.doc_id != doc.id) {
    throw Error(ErrorCode::VersionMismatch,
                ann.doc_id + "@" + std::to_string(ann.doc_version) + " vs " + doc.id + "@" + std::to_string(doc.version));
  }
  auto cps = utf8::decode(doc.field_text(ann.field));
  if (ann.start_char >= ann.end_char || ann.end_char > cps.size()) {
    throw Error(ErrorCode::SpanOutOfBounds,
                "(" + std::to_string(ann.start_char) + "," + std::to_string(ann.end_char) + ") in field of length " +
                    std::to_string(cps.size()));
  }
  return utf8::encode(std::u32string_view(cps).substr(ann.start_char, ann.end_char - ann.start_char));
}

}  // namespace nav
