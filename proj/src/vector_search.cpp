#include "nav/vector_search.hpp"

#include <algorithm>
#include <unordered_map>

#include "nav/error.hpp"

namespace nav {

std::string_view to_string(Granularity g) {
  switch (g) {
    case Granularity::document: return "document";
    case Granularity::chunk: return "chunk";
    case Granularity::sentence: return "sentence";
  }
  return "document";
}

bool parse_granularity(std::string_view s, Granularity& out) {
  for (auto g : {Granularity::document, Granularity::chunk, Granularity::sentence}) {
    if (to_string(g) == s) {
      out = g;
      return true;
    }
  }
  return false;
}

std::string document_key(std::string_view doc_id) { return std::string(doc_id); }

std::string sentence_key(std::string_view doc_id, Field field, std::size_t ordinal) {
  return std::string(doc_id) + "#s:" + std::string(to_string(field)) + ":" + std::to_string(ordinal);
}

std::string chunk_key(std::string_view doc_id, Field field, std::size_t ordinal) {
  return std::string(doc_id) + "#c:" + std::string(to_string(field)) + ":" + std::to_string(ordinal);
}

std::string document_text(const Document& doc) {
  return doc.abstract.empty() ? doc.title : doc.title + "\n" + doc.abstract;
}

std::vector<EmbeddedUnit> embed_document_units(const Document& doc, const Embedder& embedder,
                                               std::size_t chunk_size) {
  std::vector<EmbeddedUnit> out;
  auto try_add = [&](std::string key, IndexedSpan span, std::string_view text) {
    if (tokenize_words(text).empty()) return;
    Vector v = embedder.embed(text);
    if (v.norm() == 0.0) return;
    out.push_back({std::move(key), std::move(span), std::move(v)});
  };

  for (Field field : {Field::abstract, Field::body}) {
    const std::string text = doc.field_text(field);
    if (text.empty()) continue;
    const auto cps = utf8::decode(text);
    auto slice = [&](std::size_t b, std::size_t e) { return utf8::encode(std::u32string_view(cps).substr(b, e - b)); };
    const auto sentences = segment_field(doc, field);
    const auto chunks = chunk_sentences(sentences, chunk_size);
    for (const auto& c : chunks) {
      IndexedSpan span{doc.id, Granularity::chunk, field, c.start_char, c.end_char, c.ordinal, c.start_char, c.end_char};
      try_add(chunk_key(doc.id, field, c.ordinal), span, slice(c.start_char, c.end_char));
    }
    for (const auto& s : sentences) {
      const auto& c = chunks[s.ordinal / chunk_size];
      IndexedSpan span{doc.id, Granularity::sentence, field, s.start_char, s.end_char, s.ordinal, c.start_char, c.end_char};
      try_add(sentence_key(doc.id, field, s.ordinal), span, slice(s.start_char, s.end_char));
    }
  }
  IndexedSpan dspan{doc.id, Granularity::document, Field::title, 0, utf8::length(doc.title), 0, 0, 0};
  try_add(document_key(doc.id), dspan, document_text(doc));
  return out;
}

VectorIndex& GranularIndices::index(Granularity g) {
  switch (g) {
    case Granularity::sentence: return sentences;
    case Granularity::chunk: return chunks;
    case Granularity::document: break;
  }
  return documents;
}

const VectorIndex& GranularIndices::index(Granularity g) const {
  return const_cast<GranularIndices*>(this)->index(g);
}

const IndexedSpan& GranularIndices::span(const std::string& key) const {
  auto it = spans.find(key);
  if (it == spans.end()) throw Error(ErrorCode::UnknownDocument, "no indexed span for key " + key);
  return it->second;
}

GranularIndices build_indices_from_units(std::vector<EmbeddedUnit> units, HnswParams params) {
  std::sort(units.begin(), units.end(), [](const EmbeddedUnit& a, const EmbeddedUnit& b) { return a.key < b.key; });
  GranularIndices out(params);
  for (auto& u : units) {
    out.index(u.span.granularity).insert(u.key, u.vector);
    out.spans.emplace(u.key, std::move(u.span));
  }
  return out;
}

GranularIndices build_indices(const std::vector<Document>& corpus, const Embedder& embedder, HnswParams params) {
  std::vector<EmbeddedUnit> units;
  for (const auto& d : corpus) {
    auto u = embed_document_units(d, embedder);
    std::move(u.begin(), u.end(), std::back_inserter(units));
  }
  return build_indices_from_units(std::move(units), params);
}

std::vector<FusedResult> fuse(const std::vector<std::string>& keyword_ranked,
                              const std::vector<std::string>& vector_ranked, std::size_t k) {
  std::unordered_map<std::string, FusedResult> acc;
  auto add = [&](const std::vector<std::string>& list, bool keyword) {
    for (std::size_t i = 0; i < list.size(); ++i) {
      auto& r = acc[list[i]];
      r.doc_id = list[i];
      std::size_t& slot = keyword ? r.keyword_rank : r.vector_rank;
      if (slot != 0) continue;
      slot = i + 1;
      r.score += 1.0 / (kRrfConstant + static_cast<double>(i + 1));
    }
  };
  add(keyword_ranked, true);
  add(vector_ranked, false);
  std::vector<FusedResult> out;
  out.reserve(acc.size());
  for (auto& [id, r] : acc) out.push_back(std::move(r));
  std::sort(out.begin(), out.end(), [](const FusedResult& a, const FusedResult& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.doc_id < b.doc_id;
  });
  if (out.size() > k) out.resize(k);
  return out;
}

}  // namespace nav
