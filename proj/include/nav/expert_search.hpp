#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nav/corpus.hpp"
#include "nav/embedding.hpp"
#include "nav/vector_search.hpp"

namespace nav {

struct ExpertParams {
  double gamma = 0.85;  // vote decay per rank
  double beta = 0.5;    // damping exponent
  std::size_t k_docs = 50;
};

/// Who wrote what, keyed by normalized author name.
class Authorship {
public:
  Authorship() = default;
  explicit Authorship(const std::vector<Document>& corpus);

  void add(const Document& doc);
  /// Normalized names, deduplicated, in byline order.
  const std::vector<std::string>& authors_of(std::string_view doc_id) const;
  std::size_t publication_count(std::string_view author) const;
  /// First spelling seen for a normalized name.
  const std::string& display_name(std::string_view author) const;

private:
  std::map<std::string, std::vector<std::string>, std::less<>> by_doc_;
  std::map<std::string, std::size_t, std::less<>> pub_counts_;
  std::map<std::string, std::string, std::less<>> display_;
};

struct ExpertScore {
  std::string author;       // normalized identity
  std::string author_name;  // display form
  double raw_votes = 0.0;
  double damped_score = 0.0;
  std::size_t publication_count = 0;
  std::vector<std::pair<std::string, std::size_t>> supporting_docs;  // (doc_id, 0-based rank)
};

/// Document ids ranked by the document-granularity index.
/// Throws Error{EmptyIndex|EmptyText}.
std::vector<std::string> retrieve_for_expertise(std::string_view query, const VectorIndex& documents,
                                                const Embedder& embedder, std::size_t k_docs,
                                                std::size_t ef = 0);

/// raw(a) = sum of gamma^rank over retrieved docs authored by a.
std::map<std::string, double> vote(const std::vector<std::string>& ranked_docs, const Authorship& authorship,
                                   double gamma = 0.85);

/// raw / (1 + ln(pub_count))^beta.
double damp_prolific(double raw_votes, std::size_t pub_count, double beta = 0.5);

/// Vote, damp, then sort by damped desc, raw desc, author asc. Throws Error{InvalidSize} for k < 1.
std::vector<ExpertScore> rank_experts(const std::vector<std::string>& ranked_docs, const Authorship& authorship,
                                      std::size_t k, const ExpertParams& params = {});

std::vector<ExpertScore> experts(std::string_view query, std::size_t k, const VectorIndex& documents,
                                 const Embedder& embedder, const Authorship& authorship,
                                 const ExpertParams& params = {}, std::size_t ef = 0);

}  // namespace nav
