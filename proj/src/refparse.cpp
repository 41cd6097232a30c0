#include "nav/refparse.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <chrono>
#include <regex>
#include <unordered_set>

#include "nav/error.hpp"

namespace nav {

Json to_json(const CitationRecord& r) {
  return Json{{"id", r.id},
              {"source_doc_id", r.source_doc_id},
              {"authors", r.authors},
              {"title", r.title},
              {"year", r.year ? Json(*r.year) : Json(nullptr)},
              {"venue", r.venue ? Json(*r.venue) : Json(nullptr)},
              {"linked_doc_id", r.linked_doc_id ? Json(*r.linked_doc_id) : Json(nullptr)},
              {"link_similarity", r.link_similarity}};
}

CitationRecord citation_from_json(const Json& j) {
  CitationRecord r;
  try {
    r.id = j.at("id").get<std::string>();
    r.source_doc_id = j.at("source_doc_id").get<std::string>();
    r.authors = j.at("authors").get<std::vector<std::string>>();
    r.title = j.at("title").get<std::string>();
    if (!j.at("year").is_null()) r.year = j.at("year").get<int>();
    if (!j.at("venue").is_null()) r.venue = j.at("venue").get<std::string>();
    if (!j.at("linked_doc_id").is_null()) r.linked_doc_id = j.at("linked_doc_id").get<std::string>();
    r.link_similarity = j.at("link_similarity").get<double>();
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Format, e.what());
  }
  return r;
}

namespace {

struct Line {
  std::u32string text;
  std::size_t start = 0;  // scalar offset of first character
};

std::vector<Line> split_lines(const std::u32string& cps) {
  std::vector<Line> lines;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= cps.size(); ++i) {
    if (i == cps.size() || cps[i] == U'\n') {
      lines.push_back({cps.substr(start, i - start), start});
      start = i + 1;
    }
  }
  return lines;
}

std::u32string trim32(std::u32string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::u32string(s.substr(b, e - b));
}

bool blank(std::u32string_view s) {
  return std::all_of(s.begin(), s.end(), [](char32_t c) { return is_space(c); });
}

bool is_letter(char32_t c) { return is_alnum(c) && !is_digit(c); }

bool is_heading(const std::u32string& line) {
  static const std::regex re(R"(^((\d+(\.\d+)*\.?|[IVXLC]+\.)\s+)?(references|bibliography)\s*:?$)",
                             std::regex::icase);
  return std::regex_match(utf8::encode(trim32(line)), re);
}

// Leading "[12]" marker; returns the length consumed including trailing spaces.
std::size_t bracket_marker(std::u32string_view s) {
  std::size_t i = 0;
  while (i < s.size() && is_space(s[i])) ++i;
  if (i >= s.size() || s[i] != U'[') return 0;
  std::size_t j = i + 1;
  while (j < s.size() && is_digit(s[j])) ++j;
  if (j == i + 1 || j >= s.size() || s[j] != U']') return 0;
  ++j;
  while (j < s.size() && is_space(s[j])) ++j;
  return j;
}

// Leading "12." followed by whitespace.
std::size_t number_marker(std::u32string_view s) {
  std::size_t i = 0;
  while (i < s.size() && is_space(s[i])) ++i;
  std::size_t j = i;
  while (j < s.size() && is_digit(s[j])) ++j;
  if (j == i || j - i > 3 || j + 1 >= s.size() || s[j] != U'.' || !is_space(s[j + 1])) return 0;
  ++j;
  while (j < s.size() && is_space(s[j])) ++j;
  return j;
}

// Capitalized surname followed by a comma or " and".
bool author_year_start(std::u32string_view s) {
  std::size_t i = 0;
  while (i < s.size() && is_space(s[i])) ++i;
  if (i >= s.size() || !is_upper(s[i])) return false;
  std::size_t j = i + 1;
  while (j < s.size() && (is_letter(s[j]) || s[j] == U'\'' || s[j] == U'-')) ++j;
  if (j - i < 2 || j >= s.size()) return false;
  if (s[j] == U',') return true;
  return s.substr(j, 5) == U" and ";
}

enum class SplitMode { bracket, number, author_year, blank_line };

}  // namespace

std::optional<TextRange> extract_reference_section(std::string_view body) {
  const auto cps = utf8::decode(body);
  const auto lines = split_lines(cps);
  std::optional<TextRange> found;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (!is_heading(lines[i].text)) continue;
    const std::size_t start = std::min(cps.size(), lines[i].start + lines[i].text.size() + 1);
    found = TextRange{start, cps.size()};
  }
  return found;
}

std::vector<RawReference> split_references(std::string_view section, std::string_view doc_id) {
  const auto cps = utf8::decode(section);
  const auto lines = split_lines(cps);

  SplitMode mode = SplitMode::blank_line;
  auto any = [&](auto pred) { return std::any_of(lines.begin(), lines.end(), [&](const Line& l) { return pred(l.text); }); };
  if (any([](const std::u32string& t) { return bracket_marker(t) > 0; })) {
    mode = SplitMode::bracket;
  } else if (any([](const std::u32string& t) { return number_marker(t) > 0; })) {
    mode = SplitMode::number;
  } else if (any([](const std::u32string& t) { return author_year_start(t); })) {
    mode = SplitMode::author_year;
  }

  auto starts_entry = [&](const std::u32string& t) {
    switch (mode) {
      case SplitMode::bracket: return bracket_marker(t) > 0;
      case SplitMode::number: return number_marker(t) > 0;
      case SplitMode::author_year: return author_year_start(t);
      case SplitMode::blank_line: return false;
    }
    return false;
  };

  struct Pending {
    std::u32string text;
    std::size_t start = 0;
    std::size_t end = 0;
    bool open = false;
  } cur;
  std::vector<RawReference> out;
  auto flush = [&]() {
    if (!cur.open) return;
    cur.open = false;
    if (cur.text.size() < kMinReferenceLength) return;
    RawReference r;
    r.doc_id = std::string(doc_id);
    r.text = utf8::encode(cur.text);
    r.ordinal = out.size();
    r.range = {cur.start, cur.end};
    out.push_back(std::move(r));
  };
  auto append = [&](const Line& l) {
    std::size_t b = 0, e = l.text.size();
    while (b < e && is_space(l.text[b])) ++b;
    while (e > b && is_space(l.text[e - 1])) --e;
    if (!cur.open) {
      cur = {{}, l.start + b, l.start + e, true};
    } else {
      cur.text.push_back(U' ');
      cur.end = l.start + e;
    }
    cur.text += l.text.substr(b, e - b);
  };

  for (const auto& l : lines) {
    if (blank(l.text)) {
      if (mode == SplitMode::blank_line) flush();
      continue;
    }
    if (mode == SplitMode::blank_line) {
      append(l);
      continue;
    }
    if (starts_entry(l.text)) {
      flush();
      append(l);
    } else if (cur.open) {
      append(l);
    }
  }
  flush();
  return out;
}

namespace {

bool is_initials(std::u32string_view tok) {
  // "J", "J.", "M.-W.", "J.R." : single capitals separated by '.' or '-'.
  bool any = false;
  std::size_t run = 0;
  for (char32_t c : tok) {
    if (c == U'.' || c == U'-') {
      run = 0;
      continue;
    }
    if (!is_upper(c) || ++run > 1) return false;
    any = true;
  }
  return any;
}

std::u32string strip_chars(std::u32string_view s, std::u32string_view chars) {
  std::size_t b = 0, e = s.size();
  auto strip = [&](char32_t c) { return is_space(c) || chars.find(c) != std::u32string_view::npos; };
  while (b < e && strip(s[b])) ++b;
  while (e > b && strip(s[e - 1])) --e;
  return std::u32string(s.substr(b, e - b));
}

struct YearHit {
  int year = 0;
  std::size_t start = 0;
  std::size_t end = 0;
};

std::optional<YearHit> find_year(std::u32string_view s) {
  for (std::size_t i = 0; i + 4 <= s.size(); ++i) {
    if (i > 0 && (is_digit(s[i - 1]) || is_letter(s[i - 1]))) continue;
    bool digits = true;
    for (std::size_t k = 0; k < 4; ++k) digits = digits && is_digit(s[i + k]);
    if (!digits) continue;
    if (i + 4 < s.size() && is_digit(s[i + 4])) continue;
    int y = 0;
    for (std::size_t k = 0; k < 4; ++k) y = y * 10 + static_cast<int>(s[i + k] - U'0');
    // A trailing lowercase letter ("2019a") still counts as the year.
    if (y >= 1900 && y <= 2099) return YearHit{y, i, i + 4};
  }
  return std::nullopt;
}

bool is_year_only(std::u32string_view seg) {
  auto t = strip_chars(seg, U"()[],.;:");
  if (t.size() == 5 && is_letter(t[4])) t.pop_back();
  return t.size() == 4 && std::all_of(t.begin(), t.end(), [](char32_t c) { return is_digit(c); }) &&
         find_year(t).has_value();
}

// Period-delimited segments; periods after initials or inside tokens do not split.
std::vector<std::u32string> segments_of(std::u32string_view s) {
  std::vector<std::u32string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != U'.') continue;
    if (i + 1 < s.size() && !is_space(s[i + 1])) continue;
    std::size_t b = i;
    while (b > 0 && !is_space(s[b - 1])) --b;
    std::u32string tok(s.substr(b, i - b));
    tok = strip_chars(tok, U"(\"'“");
    if (is_initials(tok)) continue;
    auto seg = trim32(s.substr(start, i - start));
    if (!seg.empty()) out.push_back(seg);
    start = i + 1;
  }
  auto tail = trim32(s.substr(std::min(start, s.size())));
  if (!tail.empty()) out.push_back(tail);
  return out;
}

bool venue_like(std::u32string_view seg) {
  const std::string lower = to_lower(utf8::encode(seg));
  if (lower.rfind("in ", 0) == 0) return true;
  static const std::array<std::string_view, 12> kWords = {
      "proceedings", "conference", "journal", "arxiv", "workshop", "transactions",
      "symposium",   "preprint",   "advances in", "pages ", "pp", "vol"};
  for (auto w : kWords) {
    if (lower.find(w) != std::string::npos) {
      if (w == "pp" || w == "vol") {
        // Only as standalone abbreviations.
        auto pos = lower.find(w);
        bool left = pos == 0 || !is_alnum(static_cast<char32_t>(lower[pos - 1]));
        bool right = pos + w.size() >= lower.size() || !is_alnum(static_cast<char32_t>(lower[pos + w.size()]));
        if (left && right) return true;
        continue;
      }
      return true;
    }
  }
  return false;
}

std::vector<std::string> split_authors(std::u32string block) {
  std::vector<std::u32string> pieces;
  // Normalize conjunctions to commas, then split.
  auto replace_all = [&](std::u32string_view from, std::u32string_view to) {
    std::size_t pos = 0;
    while ((pos = block.find(from, pos)) != std::u32string::npos) {
      block.replace(pos, from.size(), to);
      pos += to.size();
    }
  };
  replace_all(U", and ", U", ");
  replace_all(U" and ", U", ");
  replace_all(U" & ", U", ");
  replace_all(U";", U",");
  std::size_t start = 0;
  for (std::size_t i = 0; i <= block.size(); ++i) {
    if (i == block.size() || block[i] == U',') {
      auto p = trim32(std::u32string_view(block).substr(start, i - start));
      if (!p.empty()) pieces.push_back(p);
      start = i + 1;
    }
  }
  std::vector<std::u32string> merged;
  for (auto& p : pieces) {
    if (!merged.empty() && is_initials(p)) {
      merged.back() += U", " + p;
    } else {
      merged.push_back(p);
    }
  }
  std::vector<std::string> out;
  for (auto& m : merged) {
    auto s = utf8::encode(m);
    if (!s.empty()) out.push_back(collapse_whitespace(s));
  }
  return out;
}

std::u32string strip_marker(std::u32string_view s) {
  if (auto n = bracket_marker(s)) return trim32(s.substr(n));
  if (auto n = number_marker(s)) return trim32(s.substr(n));
  return trim32(s);
}

std::u32string clean_venue(const std::vector<std::u32string>& segs) {
  std::vector<std::u32string> parts;
  for (const auto& seg : segs) {
    std::u32string s = seg;
    if (s.size() > 3 && (s.substr(0, 3) == U"In " || s.substr(0, 3) == U"in ")) s = s.substr(3);
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
      if (i == s.size() || s[i] == U',') {
        auto part = strip_chars(std::u32string_view(s).substr(start, i - start), U"()");
        start = i + 1;
        if (part.empty() || is_year_only(part)) continue;
        const std::string lower = to_lower(utf8::encode(part));
        if (lower.rfind("pages", 0) == 0 || lower.rfind("pp", 0) == 0 || lower.rfind("vol", 0) == 0) continue;
        if (std::all_of(part.begin(), part.end(), [](char32_t c) { return is_digit(c) || c == U'(' || c == U')' || c == U':' || c == U'-' || c == U'–'; }))
          continue;
        // Drop a trailing year inside the part ("NAACL 2019").
        if (auto y = find_year(part); y && y->end == part.size()) part = trim32(part.substr(0, y->start));
        if (!part.empty()) parts.push_back(part);
      }
    }
  }
  std::u32string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += U", ";
    out += parts[i];
  }
  return strip_chars(out, U".,;:");
}

}  // namespace

CitationRecord parse_reference(const RawReference& raw) {
  const std::u32string text = strip_marker(utf8::decode(raw.text));
  CitationRecord rec;
  rec.source_doc_id = raw.doc_id;
  rec.id = raw.doc_id + "#ref" + std::to_string(raw.ordinal);
  if (auto y = find_year(text)) rec.year = y->year;

  auto segs = segments_of(text);
  if (segs.size() < 2) throw Error(ErrorCode::UnparseableReference, raw.text);

  // Author block; an author-year style block carries the year at its end.
  std::u32string author_block = segs[0];
  if (auto y = find_year(author_block); y && author_block.size() - y->end <= 2) {
    author_block = strip_chars(std::u32string_view(author_block).substr(0, y->start), U"(,");
  }
  if (is_year_only(segs[0])) author_block.clear();

  std::vector<std::size_t> rest;
  for (std::size_t i = 1; i < segs.size(); ++i) {
    if (!is_year_only(segs[i])) rest.push_back(i);
  }
  // Title is the first segment after the authors that does not look like a venue.
  std::optional<std::size_t> title_idx;
  for (std::size_t i : rest) {
    if (!venue_like(segs[i])) {
      title_idx = i;
      break;
    }
  }
  if (!title_idx && !rest.empty()) title_idx = rest.front();
  if (!title_idx) throw Error(ErrorCode::UnparseableReference, raw.text);

  std::u32string title = strip_chars(segs[*title_idx], U"\"“”,");
  if (title.empty()) throw Error(ErrorCode::UnparseableReference, raw.text);
  rec.title = utf8::encode(title);
  rec.authors = split_authors(author_block);

  std::vector<std::u32string> venue_segs;
  for (std::size_t i : rest) {
    if (i > *title_idx) venue_segs.push_back(segs[i]);
  }
  auto venue = clean_venue(venue_segs);
  if (!venue.empty()) rec.venue = utf8::encode(venue);
  return rec;
}

std::string normalize_title(std::string_view title) {
  auto cps = utf8::decode(title);
  std::u32string out;
  for (char32_t c : cps) {
    if (is_alnum(c)) {
      out.push_back(to_lower(c));
    } else if (is_space(c)) {
      out.push_back(U' ');
    }
  }
  return collapse_whitespace(utf8::encode(out));
}

namespace {

bool is_punct(char32_t c) { return !is_alnum(c) && !is_space(c); }

// Trims edge punctuation (keeping closing ?, !, ), ]) and collapses runs of
// repeated punctuation and whitespace.
std::string clean_text(std::string_view s) {
  auto cps = utf8::decode(collapse_whitespace(s));
  std::u32string out;
  for (std::size_t i = 0; i < cps.size(); ++i) {
    if (is_punct(cps[i]) && !out.empty() && out.back() == cps[i]) continue;
    out.push_back(cps[i]);
  }
  std::size_t b = 0, e = out.size();
  while (b < e && (is_punct(out[b]) && out[b] != U'(' && out[b] != U'[' && out[b] != U'"')) ++b;
  auto keep_tail = [](char32_t c) { return c == U'?' || c == U'!' || c == U')' || c == U']' || c == U'"'; };
  while (e > b && is_punct(out[e - 1]) && !keep_tail(out[e - 1])) --e;
  return collapse_whitespace(utf8::encode(std::u32string_view(out).substr(b, e - b)));
}

bool url_only(std::string_view title) {
  static const std::regex re(R"(^\s*(https?://|www\.)\S+\s*$)", std::regex::icase);
  return std::regex_match(std::string(title), re);
}

}  // namespace

std::optional<CitationRecord> sanitize(const CitationRecord& candidate, std::set<std::string>* seen) {
  if (url_only(collapse_whitespace(candidate.title))) return std::nullopt;
  CitationRecord r = candidate;
  r.title = clean_text(candidate.title);
  std::vector<std::string> authors;
  for (const auto& a : candidate.authors) {
    auto c = collapse_whitespace(a);
    if (!c.empty()) authors.push_back(std::move(c));
  }
  r.authors = std::move(authors);
  if (r.venue) {
    r.venue = clean_text(*r.venue);
    if (r.venue->empty()) r.venue.reset();
  }

  if (r.title.empty() || url_only(r.title)) return std::nullopt;
  const auto words = tokenize_words(r.title);
  // Also covers all-uppercase fragments of one or two tokens ("IBID", "ET AL").
  if (words.size() < 3) return std::nullopt;
  if (r.year) {
    const int max_year = static_cast<int>(std::chrono::year_month_day{today_utc()}.year()) + 1;
    if (*r.year < 1900 || *r.year > max_year) r.year.reset();
  }
  if (seen) {
    if (!seen->insert(normalize_title(r.title)).second) return std::nullopt;
  }
  return r;
}

std::vector<CitationRecord> sanitize_all(const std::vector<CitationRecord>& candidates) {
  std::map<std::string, std::set<std::string>> seen;
  std::vector<CitationRecord> out;
  for (const auto& c : candidates) {
    if (auto r = sanitize(c, &seen[c.source_doc_id])) out.push_back(std::move(*r));
  }
  return out;
}

CatalogIndex::CatalogIndex(const std::vector<Document>& docs) {
  for (const auto& d : docs) add(d);
}

void CatalogIndex::add(const Document& doc) {
  Entry e;
  e.doc_id = doc.id;
  e.normalized_title = normalize_title(doc.title);
  e.year = static_cast<int>(std::chrono::year_month_day{doc.published_at}.year());
  e.citation_count = doc.citation_count;
  const std::size_t idx = entries_.size();
  std::set<std::string> toks;
  for (auto& t : tokenize_words(e.normalized_title)) toks.insert(std::move(t));
  for (const auto& t : toks) postings_[t].push_back(idx);
  entries_.push_back(std::move(e));
}

std::size_t CatalogIndex::document_frequency(const std::string& token) const {
  auto it = postings_.find(token);
  return it == postings_.end() ? 0 : it->second.size();
}

std::vector<std::size_t> CatalogIndex::candidates(std::string_view normalized_title, std::size_t max_df) const {
  std::vector<std::size_t> out;
  std::set<std::string> toks;
  for (auto& t : tokenize_words(normalized_title)) toks.insert(std::move(t));
  for (const auto& t : toks) {
    auto it = postings_.find(t);
    if (it == postings_.end() || it->second.size() > max_df) continue;
    out.insert(out.end(), it->second.begin(), it->second.end());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

LinkDecision link_citation(const CitationRecord& record, const CatalogIndex& catalog, const LinkParams& params) {
  LinkDecision decision;
  const std::string norm = normalize_title(record.title);
  const auto cands = catalog.candidates(norm, params.max_token_df);
  decision.candidates = cands.size();
  const CatalogIndex::Entry* best = nullptr;
  double best_sim = -1.0;
  for (std::size_t i : cands) {
    const auto& e = catalog.entry(i);
    if (record.year && std::abs(*record.year - e.year) > params.year_tolerance) continue;
    const double sim = edit_similarity(norm, e.normalized_title);
    bool better = !best || sim > best_sim ||
                  (sim == best_sim && (e.citation_count > best->citation_count ||
                                       (e.citation_count == best->citation_count && e.doc_id < best->doc_id)));
    if (better) {
      best = &e;
      best_sim = sim;
    }
  }
  if (best) {
    decision.similarity = best_sim;
    if (best_sim >= params.threshold) decision.doc_id = best->doc_id;
  }
  return decision;
}

}  // namespace nav
