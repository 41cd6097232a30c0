#include "nav/expert_search.hpp"

#include <algorithm>
#include <cmath>

#include "nav/concept_kg.hpp"
#include "nav/error.hpp"

namespace nav {

Authorship::Authorship(const std::vector<Document>& corpus) {
  for (const auto& d : corpus) add(d);
}

void Authorship::add(const Document& doc) {
  if (auto old = by_doc_.find(doc.id); old != by_doc_.end()) {
    for (const auto& a : old->second) {
      if (--pub_counts_[a] == 0) pub_counts_.erase(a);
    }
  }
  std::vector<std::string> names;
  for (const auto& raw : doc.authors) {
    auto a = normalize_author(raw);
    if (a.empty() || std::find(names.begin(), names.end(), a) != names.end()) continue;
    display_.try_emplace(a, collapse_whitespace(raw));
    names.push_back(std::move(a));
  }
  for (const auto& a : names) ++pub_counts_[a];
  by_doc_[doc.id] = std::move(names);
}

const std::vector<std::string>& Authorship::authors_of(std::string_view doc_id) const {
  static const std::vector<std::string> none;
  auto it = by_doc_.find(doc_id);
  return it == by_doc_.end() ? none : it->second;
}

std::size_t Authorship::publication_count(std::string_view author) const {
  auto it = pub_counts_.find(author);
  return it == pub_counts_.end() ? 0 : it->second;
}

const std::string& Authorship::display_name(std::string_view author) const {
  static const std::string none;
  auto it = display_.find(author);
  return it == display_.end() ? none : it->second;
}

std::vector<std::string> retrieve_for_expertise(std::string_view query, const VectorIndex& documents,
                                                const Embedder& embedder, std::size_t k_docs, std::size_t ef) {
  if (documents.empty()) throw Error(ErrorCode::EmptyIndex, "document index is empty");
  const auto q = embedder.embed(query);
  std::vector<std::string> out;
  for (auto& hit : documents.knn(q, k_docs, ef)) out.push_back(std::move(hit.key));
  return out;
}

std::map<std::string, double> vote(const std::vector<std::string>& ranked_docs, const Authorship& authorship,
                                   double gamma) {
  std::map<std::string, double> votes;
  for (std::size_t rank = 0; rank < ranked_docs.size(); ++rank) {
    const double w = std::pow(gamma, static_cast<double>(rank));
    for (const auto& a : authorship.authors_of(ranked_docs[rank])) votes[a] += w;
  }
  return votes;
}

double damp_prolific(double raw_votes, std::size_t pub_count, double beta) {
  if (pub_count < 1) throw Error(ErrorCode::PreconditionViolation, "publication count must be >= 1");
  return raw_votes / std::pow(1.0 + std::log(static_cast<double>(pub_count)), beta);
}

std::vector<ExpertScore> rank_experts(const std::vector<std::string>& ranked_docs, const Authorship& authorship,
                                      std::size_t k, const ExpertParams& params) {
  if (k < 1) throw Error(ErrorCode::InvalidSize, "k must be >= 1");
  std::map<std::string, ExpertScore> by_author;
  for (std::size_t rank = 0; rank < ranked_docs.size(); ++rank) {
    for (const auto& a : authorship.authors_of(ranked_docs[rank])) {
      auto& e = by_author[a];
      e.supporting_docs.emplace_back(ranked_docs[rank], rank);
    }
  }
  const auto votes = vote(ranked_docs, authorship, params.gamma);
  std::vector<ExpertScore> out;
  for (auto& [a, e] : by_author) {
    e.author = a;
    e.author_name = authorship.display_name(a);
    e.raw_votes = votes.at(a);
    e.publication_count = std::max<std::size_t>(1, authorship.publication_count(a));
    e.damped_score = damp_prolific(e.raw_votes, e.publication_count, params.beta);
    out.push_back(std::move(e));
  }
  std::sort(out.begin(), out.end(), [](const ExpertScore& x, const ExpertScore& y) {
    if (x.damped_score != y.damped_score) return x.damped_score > y.damped_score;
    if (x.raw_votes != y.raw_votes) return x.raw_votes > y.raw_votes;
    return x.author < y.author;
  });
  if (out.size() > k) out.resize(k);
  return out;
}

std::vector<ExpertScore> experts(std::string_view query, std::size_t k, const VectorIndex& documents,
                                 const Embedder& embedder, const Authorship& authorship, const ExpertParams& params,
                                 std::size_t ef) {
  if (k < 1) throw Error(ErrorCode::InvalidSize, "k must be >= 1");
  return rank_experts(retrieve_for_expertise(query, documents, embedder, params.k_docs, ef), authorship, k, params);
}

}  // namespace nav
