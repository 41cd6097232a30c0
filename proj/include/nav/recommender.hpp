#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "nav/corpus.hpp"
#include "nav/embedding.hpp"

namespace nav {

enum class Module { content, citation, author, popularity };

inline constexpr std::array<Module, 4> kModules = {Module::content, Module::citation, Module::author,
                                                   Module::popularity};

std::string_view to_string(Module m);

/// Read-only view of what the modules score against.
class RecommenderData {
public:
  void add_document(const Document& doc, std::optional<Vector> embedding);
  void add_citation(const std::string& citing, const std::string& cited);
  void set_tag_count(const std::string& doc_id, std::size_t count);

  const Document* document(std::string_view id) const;
  const Vector* embedding(std::string_view id) const;
  const std::vector<std::string>& authors(std::string_view id) const;  // normalized, distinct
  /// Documents linked to `id` by a cites edge in either direction.
  const std::set<std::string>& citation_neighbors(std::string_view id) const;
  bool cites(std::string_view citing, std::string_view cited) const;
  std::size_t tag_count(std::string_view id) const;
  std::vector<std::string> document_ids() const;

private:
  std::map<std::string, Document, std::less<>> docs_;
  std::map<std::string, Vector, std::less<>> embeddings_;
  std::map<std::string, std::vector<std::string>, std::less<>> authors_;
  std::map<std::string, std::set<std::string>, std::less<>> neighbors_;
  std::set<std::pair<std::string, std::string>> cites_;
  std::map<std::string, std::size_t, std::less<>> tag_counts_;
};

struct TagProfile {
  std::string user_id;
  std::string tag_name;
  std::vector<std::string> doc_ids;  // sorted, distinct, non-empty
  Vector centroid;                   // unit length, or zero when no tagged doc has an embedding

  /// Throws Error{PreconditionViolation} for an empty doc list.
  static TagProfile build(std::string user_id, std::string tag_name, std::vector<std::string> doc_ids,
                          const RecommenderData& data);
};

/// Unit centroid of the tagged documents' embeddings; zero when none exist.
Vector tag_centroid(const std::vector<std::string>& doc_ids, const RecommenderData& data);

/// Docs published within [today - window_days, today], minus `tagged`.
std::vector<std::string> candidate_pool(const RecommenderData& data, const std::set<std::string>& tagged, Date today,
                                        int window_days = 30);

/// Raw score of `doc_id` for `module` against the tagged set.
double raw_score(Module module, const std::vector<std::string>& tagged, std::string_view doc_id,
                 const RecommenderData& data);

std::map<std::string, double> content_scores(const TagProfile& profile, const std::vector<std::string>& pool,
                                             const RecommenderData& data);
std::map<std::string, double> citation_scores(const TagProfile& profile, const std::vector<std::string>& pool,
                                              const RecommenderData& data);
std::map<std::string, double> author_scores(const TagProfile& profile, const std::vector<std::string>& pool,
                                            const RecommenderData& data);
std::map<std::string, double> popularity_scores(const std::vector<std::string>& pool, const RecommenderData& data);

struct Normalizer {
  double mean = 0.0;
  double stddev = 0.0;
  bool fallback = true;
  // min-max range of the candidate raws, used in fallback mode
  double min = 0.0;
  double max = 0.0;

  double operator()(double raw) const;
};

/// Leave-one-out sample: each tagged doc scored against the others.
std::vector<double> loo_sample(Module module, const TagProfile& profile, const RecommenderData& data);

/// Mean and population stddev of the LOO sample, logistic squashing;
/// min-max over `candidate_raws` when |tag| < 2 or stddev = 0.
Normalizer fit_normalizer(Module module, const TagProfile& profile, const RecommenderData& data,
                          const std::vector<double>& candidate_raws);

struct ModuleWeights {
  std::array<double, 4> values{1.0, 1.0, 1.0, 1.0};
  double& operator[](Module m) { return values[static_cast<std::size_t>(m)]; }
  double operator[](Module m) const { return values[static_cast<std::size_t>(m)]; }
};

struct ModuleContribution {
  Module module = Module::content;
  double raw = 0.0;
  double normalized = 0.0;
  double weight = 0.0;
};

struct Recommendation {
  std::string doc_id;
  double score = 0.0;
  Date published_at{};
  std::vector<ModuleContribution> contributions;
};

using ModuleScores = std::map<Module, std::map<std::string, std::pair<double, double>>>;  // doc -> (raw, normalized)

/// final = sum(w * normalized) / sum(w); ties by newer published_at, then id.
/// Throws Error{InvalidWeights} for negative weights, Error{NoActiveModules} when all are 0.
std::vector<Recommendation> aggregate(const ModuleScores& scores, const ModuleWeights& weights,
                                      const RecommenderData& data, std::size_t k);

/// Pool, score with every active module, normalize, aggregate.
std::vector<Recommendation> recommend(const TagProfile& profile, const RecommenderData& data,
                                      const ModuleWeights& weights, Date today, int window_days, std::size_t k);

}  // namespace nav
