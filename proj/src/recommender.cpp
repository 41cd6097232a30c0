#include "nav/recommender.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nav/concept_kg.hpp"
#include "nav/error.hpp"

namespace nav {

std::string_view to_string(Module m) {
  switch (m) {
    case Module::content: return "content";
    case Module::citation: return "citation";
    case Module::author: return "author";
    case Module::popularity: return "popularity";
  }
  return "content";
}

void RecommenderData::add_document(const Document& doc, std::optional<Vector> embedding) {
  docs_.insert_or_assign(doc.id, doc);
  if (embedding) {
    embeddings_.insert_or_assign(doc.id, std::move(*embedding));
  } else {
    embeddings_.erase(doc.id);
  }
  std::vector<std::string> names;
  for (const auto& a : doc.authors) {
    auto n = normalize_author(a);
    if (!n.empty() && std::find(names.begin(), names.end(), n) == names.end()) names.push_back(std::move(n));
  }
  authors_.insert_or_assign(doc.id, std::move(names));
}

void RecommenderData::add_citation(const std::string& citing, const std::string& cited) {
  if (citing == cited) return;
  cites_.emplace(citing, cited);
  neighbors_[citing].insert(cited);
  neighbors_[cited].insert(citing);
}

void RecommenderData::set_tag_count(const std::string& doc_id, std::size_t count) { tag_counts_[doc_id] = count; }

const Document* RecommenderData::document(std::string_view id) const {
  auto it = docs_.find(id);
  return it == docs_.end() ? nullptr : &it->second;
}

const Vector* RecommenderData::embedding(std::string_view id) const {
  auto it = embeddings_.find(id);
  return it == embeddings_.end() ? nullptr : &it->second;
}

const std::vector<std::string>& RecommenderData::authors(std::string_view id) const {
  static const std::vector<std::string> none;
  auto it = authors_.find(id);
  return it == authors_.end() ? none : it->second;
}

const std::set<std::string>& RecommenderData::citation_neighbors(std::string_view id) const {
  static const std::set<std::string> none;
  auto it = neighbors_.find(id);
  return it == neighbors_.end() ? none : it->second;
}

bool RecommenderData::cites(std::string_view citing, std::string_view cited) const {
  return cites_.count({std::string(citing), std::string(cited)}) != 0;
}

std::size_t RecommenderData::tag_count(std::string_view id) const {
  auto it = tag_counts_.find(id);
  return it == tag_counts_.end() ? 0 : it->second;
}

std::vector<std::string> RecommenderData::document_ids() const {
  std::vector<std::string> out;
  for (const auto& [id, _] : docs_) out.push_back(id);
  return out;
}

Vector tag_centroid(const std::vector<std::string>& doc_ids, const RecommenderData& data) {
  Vector sum;
  for (const auto& id : doc_ids) {
    const Vector* v = data.embedding(id);
    if (!v) continue;
    if (sum.size() == 0) sum = Vector::Zero(v->size());
    sum += *v;
  }
  if (sum.size() == 0) return Vector::Zero(kEmbeddingDim);
  normalize_in_place(sum);
  return sum;
}

TagProfile TagProfile::build(std::string user_id, std::string tag_name, std::vector<std::string> doc_ids,
                             const RecommenderData& data) {
  std::sort(doc_ids.begin(), doc_ids.end());
  doc_ids.erase(std::unique(doc_ids.begin(), doc_ids.end()), doc_ids.end());
  if (doc_ids.empty()) throw Error(ErrorCode::PreconditionViolation, "tag profile needs at least one document");
  TagProfile p{std::move(user_id), std::move(tag_name), std::move(doc_ids), {}};
  p.centroid = tag_centroid(p.doc_ids, data);
  return p;
}

std::vector<std::string> candidate_pool(const RecommenderData& data, const std::set<std::string>& tagged, Date today,
                                        int window_days) {
  const Date earliest = today - std::chrono::days(window_days);
  std::vector<std::string> out;
  for (const auto& id : data.document_ids()) {
    if (tagged.count(id)) continue;
    const auto* d = data.document(id);
    if (d->published_at >= earliest && d->published_at <= today) out.push_back(id);
  }
  return out;
}

namespace {

double citation_raw(const std::vector<std::string>& tagged, std::string_view doc_id, const RecommenderData& data) {
  const std::set<std::string> t(tagged.begin(), tagged.end());
  const auto& near = data.citation_neighbors(doc_id);
  for (const auto& x : near) {
    if (t.count(x)) return 1.0;
  }
  for (const auto& x : near) {
    for (const auto& y : data.citation_neighbors(x)) {
      if (y != doc_id && t.count(y)) return 0.5;
    }
  }
  return 0.0;
}

double author_raw(const std::vector<std::string>& tagged, std::string_view doc_id, const RecommenderData& data) {
  if (tagged.empty()) return 0.0;
  std::map<std::string, std::size_t> freq;
  for (const auto& t : tagged) {
    for (const auto& a : data.authors(t)) ++freq[a];
  }
  double sum = 0.0;
  for (const auto& a : data.authors(doc_id)) {
    auto it = freq.find(a);
    if (it != freq.end()) sum += static_cast<double>(it->second);
  }
  return sum / static_cast<double>(tagged.size());
}

double popularity_raw(std::string_view doc_id, const RecommenderData& data) {
  const auto* d = data.document(doc_id);
  const double cites = d ? static_cast<double>(d->citation_count) : 0.0;
  return std::log1p(cites) + static_cast<double>(data.tag_count(doc_id));
}

double content_raw(const Vector& centroid, std::string_view doc_id, const RecommenderData& data) {
  const Vector* v = data.embedding(doc_id);
  if (!v || centroid.size() != v->size()) return 0.0;
  return cosine(centroid, *v);
}

std::map<std::string, double> score_pool(Module m, const TagProfile& profile, const std::vector<std::string>& pool,
                                         const RecommenderData& data) {
  std::map<std::string, double> out;
  for (const auto& id : pool) {
    out[id] = m == Module::content ? content_raw(profile.centroid, id, data) : raw_score(m, profile.doc_ids, id, data);
  }
  return out;
}

}  // namespace

double raw_score(Module module, const std::vector<std::string>& tagged, std::string_view doc_id,
                 const RecommenderData& data) {
  switch (module) {
    case Module::content: return content_raw(tag_centroid(tagged, data), doc_id, data);
    case Module::citation: return citation_raw(tagged, doc_id, data);
    case Module::author: return author_raw(tagged, doc_id, data);
    case Module::popularity: return popularity_raw(doc_id, data);
  }
  return 0.0;
}

std::map<std::string, double> content_scores(const TagProfile& profile, const std::vector<std::string>& pool,
                                             const RecommenderData& data) {
  return score_pool(Module::content, profile, pool, data);
}

std::map<std::string, double> citation_scores(const TagProfile& profile, const std::vector<std::string>& pool,
                                              const RecommenderData& data) {
  return score_pool(Module::citation, profile, pool, data);
}

std::map<std::string, double> author_scores(const TagProfile& profile, const std::vector<std::string>& pool,
                                            const RecommenderData& data) {
  return score_pool(Module::author, profile, pool, data);
}

std::map<std::string, double> popularity_scores(const std::vector<std::string>& pool, const RecommenderData& data) {
  std::map<std::string, double> out;
  for (const auto& id : pool) out[id] = popularity_raw(id, data);
  return out;
}

double Normalizer::operator()(double raw) const {
  if (!fallback) return 1.0 / (1.0 + std::exp(-(raw - mean) / stddev));
  if (max > min) return (raw - min) / (max - min);
  return 0.5;
}

std::vector<double> loo_sample(Module module, const TagProfile& profile, const RecommenderData& data) {
  std::vector<double> sample;
  if (profile.doc_ids.size() < 2) return sample;
  for (std::size_t i = 0; i < profile.doc_ids.size(); ++i) {
    std::vector<std::string> rest;
    for (std::size_t j = 0; j < profile.doc_ids.size(); ++j) {
      if (j != i) rest.push_back(profile.doc_ids[j]);
    }
    sample.push_back(raw_score(module, rest, profile.doc_ids[i], data));
  }
  return sample;
}

Normalizer fit_normalizer(Module module, const TagProfile& profile, const RecommenderData& data,
                          const std::vector<double>& candidate_raws) {
  Normalizer n;
  if (profile.doc_ids.size() >= 2) {
    const auto sample = loo_sample(module, profile, data);
    const double count = static_cast<double>(sample.size());
    n.mean = std::accumulate(sample.begin(), sample.end(), 0.0) / count;
    double var = 0.0;
    for (double x : sample) var += (x - n.mean) * (x - n.mean);
    n.stddev = std::sqrt(var / count);
    n.fallback = !(n.stddev > 0.0);
  }
  if (n.fallback && !candidate_raws.empty()) {
    auto [lo, hi] = std::minmax_element(candidate_raws.begin(), candidate_raws.end());
    n.min = *lo;
    n.max = *hi;
  }
  return n;
}

std::vector<Recommendation> aggregate(const ModuleScores& scores, const ModuleWeights& weights,
                                      const RecommenderData& data, std::size_t k) {
  double total_weight = 0.0;
  for (auto m : kModules) {
    if (!(weights[m] >= 0.0) || !std::isfinite(weights[m]))
      throw Error(ErrorCode::InvalidWeights, "weight for " + std::string(to_string(m)) + " must be >= 0");
    total_weight += weights[m];
  }
  if (total_weight <= 0.0) throw Error(ErrorCode::NoActiveModules, "all module weights are zero");

  std::map<std::string, Recommendation> by_doc;
  for (auto m : kModules) {
    if (weights[m] == 0.0) continue;
    auto it = scores.find(m);
    if (it == scores.end()) continue;
    for (const auto& [doc, rn] : it->second) {
      auto& r = by_doc[doc];
      r.doc_id = doc;
      r.score += weights[m] * rn.second;
      r.contributions.push_back({m, rn.first, rn.second, weights[m]});
    }
  }
  std::vector<Recommendation> out;
  for (auto& [doc, r] : by_doc) {
    r.score /= total_weight;
    if (const auto* d = data.document(doc)) r.published_at = d->published_at;
    out.push_back(std::move(r));
  }
  std::sort(out.begin(), out.end(), [](const Recommendation& a, const Recommendation& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.published_at != b.published_at) return a.published_at > b.published_at;
    return a.doc_id < b.doc_id;
  });
  if (out.size() > k) out.resize(k);
  return out;
}

std::vector<Recommendation> recommend(const TagProfile& profile, const RecommenderData& data,
                                      const ModuleWeights& weights, Date today, int window_days, std::size_t k) {
  const std::set<std::string> tagged(profile.doc_ids.begin(), profile.doc_ids.end());
  const auto pool = candidate_pool(data, tagged, today, window_days);
  ModuleScores scores;
  for (auto m : kModules) {
    if (weights[m] == 0.0) continue;
    const auto raws = m == Module::popularity ? popularity_scores(pool, data) : score_pool(m, profile, pool, data);
    std::vector<double> values;
    for (const auto& [_, v] : raws) values.push_back(v);
    const auto norm = fit_normalizer(m, profile, data, values);
    auto& out = scores[m];
    for (const auto& [doc, v] : raws) out[doc] = {v, norm(v)};
  }
  return aggregate(scores, weights, data, k);
}

}  // namespace nav
