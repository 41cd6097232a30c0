#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "nav/concept_kg.hpp"
#include "nav/corpus.hpp"

namespace nav {

struct SyntheticParams {
  std::size_t documents = 1000;
  std::uint64_t seed = 7;
  Date today{};
  Date earliest{};            // defaults to six years before today
  double recent_fraction = 0.06;  // share published within the last 30 days
  double typo_rate = 0.15;        // corpus references with a one-letter typo
};

/// Deterministic fielded corpus built around the given concepts. Documents
/// cite earlier documents by title in a trailing References section.
std::vector<Document> synthesize_corpus(const std::vector<Concept>& concepts, SyntheticParams params);

}  // namespace nav
