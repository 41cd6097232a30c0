#include "nav/insights.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <random>
#include <regex>
#include <set>

#include "nav/error.hpp"

namespace nav {

namespace {

constexpr std::string_view kQuestionMarkFeature = "__qmark__";
constexpr std::string_view kLeadingWhFeature = "__wh__";
constexpr std::string_view kNoQuestionCueFeature = "__nocue__";

bool is_wh_word(std::string_view t) {
  static const std::set<std::string_view> words = {"what", "which", "how", "why",  "when",
                                                   "who",  "is",    "are", "does", "can"};
  return words.count(t) != 0;
}

std::size_t index_of(QueryClass c) { return static_cast<std::size_t>(c); }

}  // namespace

std::string_view to_string(QueryClass c) {
  switch (c) {
    case QueryClass::question: return "question";
    case QueryClass::keyword: return "keyword";
    case QueryClass::other: return "other";
  }
  return "other";
}

bool parse_query_class(std::string_view s, QueryClass& out) {
  for (auto c : kQueryClasses) {
    if (to_string(c) == s) {
      out = c;
      return true;
    }
  }
  return false;
}

std::vector<LabeledExample> read_labeled_tsv(std::istream& in) {
  std::vector<LabeledExample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto tab = line.rfind('\t');
    QueryClass c;
    if (tab == std::string::npos || !parse_query_class(trim(line.substr(tab + 1)), c))
      throw Error(ErrorCode::Format, "labeled data line " + std::to_string(lineno) + ": expected text<TAB>label");
    out.emplace_back(line.substr(0, tab), c);
  }
  return out;
}

std::vector<std::string> classifier_features(std::string_view text) {
  auto out = tokenize_words(text);
  if (out.empty()) return out;
  const bool wh = is_wh_word(out.front());
  const bool qmark = trim(text).find('?') != std::string::npos;
  if (qmark) out.emplace_back(kQuestionMarkFeature);
  if (wh) out.emplace_back(kLeadingWhFeature);
  if (!qmark && !wh) out.emplace_back(kNoQuestionCueFeature);
  return out;
}

BayesModel BayesModel::train(const std::vector<LabeledExample>& examples) {
  BayesModel m;
  for (const auto& [text, label] : examples) {
    const auto c = index_of(label);
    ++m.docs_[c];
    ++m.total_docs_;
    for (const auto& f : classifier_features(text)) {
      ++m.vocab_[f][c];
      ++m.token_totals_[c];
    }
  }
  const auto present = std::count_if(m.docs_.begin(), m.docs_.end(), [](std::size_t n) { return n > 0; });
  if (present < 2) throw Error(ErrorCode::InsufficientClasses, "training data needs at least two classes");
  return m;
}

double BayesModel::prior(QueryClass c) const {
  return total_docs_ == 0 ? 0.0 : static_cast<double>(docs_[index_of(c)]) / static_cast<double>(total_docs_);
}

QueryKind BayesModel::classify(std::string_view text) const {
  const auto features = classifier_features(text);
  if (features.empty()) {
    double best = 0.0;
    for (auto c : kQueryClasses) best = std::max(best, prior(c));
    return {QueryClass::other, best};
  }
  std::array<double, 3> logp{};
  std::array<bool, 3> active{};
  const double v = static_cast<double>(vocab_.size());
  for (auto c : kQueryClasses) {
    const auto i = index_of(c);
    active[i] = docs_[i] > 0;
    if (!active[i]) continue;
    logp[i] = std::log(prior(c));
    const double denom = static_cast<double>(token_totals_[i]) + v;
    for (const auto& f : features) {
      auto it = vocab_.find(f);
      if (it == vocab_.end()) continue;  // unseen in training: no evidence
      logp[i] += std::log((static_cast<double>(it->second[i]) + 1.0) / denom);
    }
  }
  double top = -INFINITY;
  std::size_t arg = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    if (active[i] && logp[i] > top) {
      top = logp[i];
      arg = i;
    }
  }
  double z = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    if (active[i]) z += std::exp(logp[i] - top);
  }
  return {kQueryClasses[arg], 1.0 / z};
}

std::pair<std::vector<LabeledExample>, std::vector<LabeledExample>> split_examples(std::vector<LabeledExample> examples,
                                                                                   double train_fraction,
                                                                                   std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = examples.size(); i > 1; --i) std::swap(examples[i - 1], examples[rng() % i]);
  const auto cut = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(examples.size())));
  std::vector<LabeledExample> test(examples.begin() + static_cast<std::ptrdiff_t>(cut), examples.end());
  examples.resize(cut);
  return {std::move(examples), std::move(test)};
}

double accuracy(const BayesModel& model, const std::vector<LabeledExample>& examples) {
  if (examples.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& [text, label] : examples) hits += model.classify(text).kind == label;
  return static_cast<double>(hits) / static_cast<double>(examples.size());
}

std::string question_template(std::string_view keyword_query) {
  return "What is " + to_lower(collapse_whitespace(keyword_query)) + "?";
}

std::string auto_question(const BayesModel& model, std::string_view keyword_query) {
  const auto kind = model.classify(keyword_query);
  if (kind.kind != QueryClass::keyword)
    throw Error(ErrorCode::PreconditionViolation, "query is classified as " + std::string(to_string(kind.kind)));
  return question_template(keyword_query);
}

std::vector<SentenceAnswer> answer_sentences(std::string_view question, std::size_t k, const GranularIndices& indices,
                                             const Embedder& embedder, const DocumentLookup& documents,
                                             std::size_t ef) {
  if (indices.sentences.empty()) throw Error(ErrorCode::EmptyIndex, "sentence index is empty");
  const auto q = embedder.embed(question);
  std::vector<SentenceAnswer> out;
  for (const auto& hit : indices.sentences.knn(q, k, ef)) {
    const auto& span = indices.span(hit.key);
    SentenceAnswer a;
    a.key = hit.key;
    a.doc_id = span.doc_id;
    a.field = span.field;
    a.start_char = span.start_char;
    a.end_char = span.end_char;
    a.similarity = hit.similarity;
    if (const Document* d = documents(span.doc_id)) {
      const auto text = d->field_text(span.field);
      a.sentence = utf8::substr(text, span.start_char, span.end_char);
      a.context = utf8::substr(text, span.chunk_start, span.chunk_end);
    }
    out.push_back(std::move(a));
  }
  return out;
}

std::string_view to_string(Bucket b) { return b == Bucket::month ? "month" : "year"; }

bool parse_bucket(std::string_view s, Bucket& out) {
  if (s == "month") {
    out = Bucket::month;
  } else if (s == "year") {
    out = Bucket::year;
  } else {
    return false;
  }
  return true;
}

std::optional<AnalyticsSpec> match_template(std::string_view query, const KnowledgeGraph& kg) {
  auto concepts = find_concepts_in_query(query, kg);
  if (concepts.size() >= 2) return AnalyticsSpec{std::move(concepts), Bucket::month, "multi_concept"};

  static const std::regex which_type(R"(\bwhich\s+(datasets|methods|models|metrics|tasks)\b.*?\b(for|in)\s+(.+))",
                                     std::regex::icase | std::regex::ECMAScript);
  const std::string q(query);
  std::smatch m;
  if (std::regex_search(q, m, which_type)) {
    auto tail = find_concepts_in_query(m[3].str(), kg);
    if (!tail.empty()) return AnalyticsSpec{std::move(tail), Bucket::month, "which_type"};
  }
  return std::nullopt;
}

namespace {

std::string period_of(Date d, Bucket b) {
  return b == Bucket::month ? format_month(d) : format_month(d).substr(0, 4);
}

std::vector<std::string> period_axis(Date first, Date last, Bucket b) {
  using namespace std::chrono;
  std::vector<std::string> out;
  year_month cur{year_month_day(first).year(), year_month_day(first).month()};
  const year_month end{year_month_day(last).year(), year_month_day(last).month()};
  if (b == Bucket::year) {
    for (auto y = cur.year(); y <= end.year(); ++y) out.push_back(format_month(sys_days(y / January / 1)).substr(0, 4));
    return out;
  }
  for (; cur <= end; cur += months(1)) out.push_back(format_month(sys_days(cur / 1)));
  return out;
}

}  // namespace

std::vector<PopularitySeries> contrastive_popularity(const std::vector<std::string>& concept_ids,
                                                     const KnowledgeGraph& kg,
                                                     const std::vector<StandoffAnnotation>& concept_links,
                                                     const std::map<std::string, Date>& published, Bucket bucket) {
  for (const auto& id : concept_ids) {
    if (!kg.concept_by_id(id)) throw Error(ErrorCode::UnknownConcept, id);
  }
  std::vector<std::string> axis;
  if (!published.empty()) {
    auto [lo, hi] = std::minmax_element(published.begin(), published.end(),
                                        [](const auto& a, const auto& b) { return a.second < b.second; });
    axis = period_axis(lo->second, hi->second, bucket);
  }
  std::map<std::string, std::set<std::string>> docs_by_concept;
  for (const auto& a : concept_links) {
    if (a.kind != AnnotationKind::concept_link || !published.count(a.doc_id)) continue;
    docs_by_concept[a.payload].insert(a.doc_id);
  }
  std::vector<PopularitySeries> out;
  for (const auto& id : concept_ids) {
    std::map<std::string, std::size_t> counts;
    for (const auto& doc : docs_by_concept[id]) ++counts[period_of(published.at(doc), bucket)];
    PopularitySeries s{id, {}};
    for (const auto& p : axis) s.series.push_back({p, counts.count(p) ? counts[p] : 0});
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace nav
