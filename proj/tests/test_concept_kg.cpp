#include <doctest.h>

#include <random>
#include <sstream>

#include "nav/concept_kg.hpp"
#include "nav/error.hpp"
#include "support.hpp"

using namespace nav;

namespace {

Concept concept_of(const std::string& name, ConceptType type, std::vector<std::string> aliases = {}) {
  return Concept{concept_id_for(name), name, std::move(aliases), type, ConceptOrigin::seed};
}

KnowledgeGraph small_graph() {
  KnowledgeGraph kg;
  kg.upsert_concept(concept_of("BERT", ConceptType::method, {"bidirectional encoder representations"}));
  kg.upsert_concept(concept_of("Graph Neural Network", ConceptType::method, {"GNN"}));
  kg.upsert_concept(concept_of("ImageNet", ConceptType::dataset));
  kg.upsert_concept(concept_of("Question Answering", ConceptType::task, {"QA"}));
  return kg;
}

// Leftmost-longest over token sequences, written directly from the rule.
std::vector<std::pair<std::size_t, std::size_t>> oracle_matches(const std::string& text, const Gazetteer& g) {
  const auto toks = tokenize(text);
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t i = 0;
  while (i < toks.size()) {
    std::size_t best = 0;
    std::string key;
    for (std::size_t n = 1; i + n <= toks.size(); ++n) {
      key += (n > 1 ? " " : "") + toks[i + n - 1].text;
      if (g.lookup(key)) best = n;
    }
    if (best) {
      out.emplace_back(toks[i].start, toks[i + best - 1].end);
      i += best;
    } else {
      ++i;
    }
  }
  return out;
}

}  // namespace

TEST_CASE("concept ids and the gazetteer file format") {
  CHECK(concept_id_for("Graph Neural Network") == "c:graph-neural-network");
  CHECK(concept_id_for("BM25 (Okapi)") == "c:bm25-okapi");
  std::istringstream in("# comment\n\nBERT\tmethod\tbert-base|BERT large\nSQuAD\tdataset\t\nBert\tother\t\n");
  auto cs = read_gazetteer(in);
  // a case-insensitive repeat of a name is dropped; the first definition wins
  REQUIRE(cs.size() == 2);
  CHECK(cs[0].aliases.size() == 2);
  CHECK(cs[0].type == ConceptType::method);
  CHECK(cs[1].type == ConceptType::dataset);
  std::istringstream bad("BERT\tnot-a-type\t\n");
  CHECK_THROWS_AS(read_gazetteer(bad), Error);
}

TEST_CASE("recognize_in_text: leftmost-longest, token boundaries, scalar offsets") {
  auto kg = small_graph();
  auto g = kg.gazetteer();
  const std::string text = "Über GNN and graph neural network models beat BERTology but not BERT on QA.";
  auto ms = recognize_in_text(text, *g, "d1");
  REQUIRE(ms.size() == 4);
  CHECK(ms[0].surface == "GNN");
  CHECK(ms[0].start_char == 5);
  CHECK(ms[1].surface == "graph neural network");
  CHECK(ms[2].surface == "BERT");
  CHECK(ms[3].surface == "QA");
  for (const auto& m : ms) {
    CHECK(utf8::substr(text, m.start_char, m.end_char) == m.surface);
    CHECK(m.gazetteer_hit);
  }
  CHECK(*ms[1].gazetteer_hit == "c:graph-neural-network");

  std::mt19937_64 rng(4);
  const std::vector<std::string> words = {"graph", "neural", "network", "bert", "gnn", "qa", "imagenet",
                                          "question", "answering", "the", "model"};
  std::uniform_int_distribution<std::size_t> pick(0, words.size() - 1), len(1, 30);
  for (int trial = 0; trial < 300; ++trial) {
    std::string t;
    const auto n = len(rng);
    for (std::size_t i = 0; i < n; ++i) t += (i ? " " : "") + words[pick(rng)];
    auto got = recognize_in_text(t, *g);
    auto want = oracle_matches(t, *g);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].start_char == want[i].first);
      CHECK(got[i].end_char == want[i].second);
      if (i) CHECK(got[i].start_char >= got[i - 1].end_char);
    }
  }
}

TEST_CASE("knowledge graph: kinds, duplicates, canonical collisions") {
  auto kg = small_graph();
  CHECK(kg.concept_count() == 4);
  kg.upsert_node({document_node_id("a"), NodeKind::document, "Paper A"});
  kg.upsert_node({document_node_id("b"), NodeKind::document, "Paper B"});
  kg.upsert_node({person_node_id("Ada  Lovelace"), NodeKind::person, "Ada Lovelace"});
  CHECK(person_node_id("Ada  Lovelace") == "p:ada lovelace");

  CHECK(kg.add_edge({"d:a", "d:b", Relation::cites, std::nullopt}));
  CHECK_FALSE(kg.add_edge({"d:a", "d:b", Relation::cites, std::nullopt}));
  CHECK(kg.add_edge({"p:ada lovelace", "d:a", Relation::authored, std::nullopt}));
  CHECK(kg.add_edge({"d:a", "c:bert", Relation::mentions, 0.9}));
  CHECK(kg.add_edge({"c:bert", "c:question-answering", Relation::related_to, std::nullopt}));

  auto code = [&](const KGEdge& e) {
    try {
      kg.add_edge(e);
    } catch (const Error& err) {
      return err.code();
    }
    return ErrorCode::Format;
  };
  CHECK(code({"d:a", "c:bert", Relation::cites, {}}) == ErrorCode::KindConstraintViolation);
  CHECK(code({"c:bert", "d:a", Relation::mentions, {}}) == ErrorCode::KindConstraintViolation);
  CHECK(code({"d:a", "d:b", Relation::authored, {}}) == ErrorCode::KindConstraintViolation);
  CHECK(code({"d:a", "d:zzz", Relation::cites, {}}) == ErrorCode::UnknownEndpoint);

  CHECK(kg.cites("a") == std::vector<std::string>{"b"});
  CHECK(kg.cited_by("b") == std::vector<std::string>{"a"});
  CHECK(kg.cited_by("a").empty());
  CHECK(kg.validate().empty());

  // alias merge keeps one concept, case-insensitive collision is rejected
  kg.upsert_concept(concept_of("BERT", ConceptType::method, {"bert-base"}));
  CHECK(kg.concept_by_id("c:bert")->aliases.size() == 2);
  CHECK(kg.concept_count() == 4);
  Concept clash{"c:other-bert", "bert", {}, ConceptType::other, ConceptOrigin::seed};
  CHECK_THROWS_AS(kg.upsert_concept(clash), Error);

  auto dist = kg.concept_type_distribution();
  CHECK(dist.size() == 6);
  CHECK(dist[ConceptType::method] == 2);
  CHECK(dist[ConceptType::metric] == 0);

  CHECK(kg.concepts_with_prefix("gr").size() == 1);
  auto cands = kg.candidate_concepts("neural models");
  CHECK(cands == std::vector<std::string>{"c:graph-neural-network"});

  std::stringstream buf;
  kg.write_jsonl(buf);
  KnowledgeGraph back;
  back.read_jsonl(buf);
  CHECK(back.concepts() == kg.concepts());
  CHECK(back.nodes() == kg.nodes());
  CHECK(back.edges() == kg.edges());
}

TEST_CASE("linker: score formula, threshold and context") {
  CHECK(link_score(1.0, 1.0, {}) == doctest::Approx(1.0));
  CHECK(link_score(1.0, -1.0, {}) == doctest::Approx(0.6));
  CHECK(link_score(0.5, 0.0, {}) == doctest::Approx(0.5));

  CHECK(context_window("a b c d e f g", 6, 7, 2) == "b c d e f");
  CHECK(context_window("a b c", 100, 101, 2).empty());

  auto kg = small_graph();
  HashingEmbedder e;
  const std::string text = "We fine-tune BERT for question answering.";
  Mention exact{"d", Field::body, 13, 17, "BERT", "c:bert"};
  auto out = link_mention(exact, text, kg, e);
  CHECK(out.linked_concept == "c:bert");
  CHECK(out.string_sim == doctest::Approx(1.0));
  CHECK(out.score == doctest::Approx(link_score(out.string_sim, out.embed_sim, {})));

  Mention unrelated{"d", Field::body, 0, 2, "We", std::nullopt};
  CHECK_FALSE(link_mention(unrelated, text, kg, e).linked_concept);

  Mention partial{"d", Field::body, 0, 6, "neural", std::nullopt};
  auto p = link_mention(partial, "neural", kg, e);
  CHECK(p.score < 0.75);
  CHECK_FALSE(p.linked_concept);
}

TEST_CASE("propose_concepts: support and document spread") {
  std::vector<Mention> ms;
  for (int i = 0; i < 3; ++i) ms.push_back({"d" + std::to_string(i % 2), Field::body, 0, 5, "Flash Attention", {}});
  ms.push_back({"d9", Field::body, 0, 5, "lonely term", {}});
  for (int i = 0; i < 4; ++i) ms.push_back({"same", Field::body, 0, 5, "one doc only", {}});
  auto out = propose_concepts(ms, 3);
  REQUIRE(out.size() == 1);
  CHECK(out[0].id == "c:flash-attention");
  CHECK(out[0].created_from == ConceptOrigin::promoted_candidate);
}

TEST_CASE("find_concepts_in_query: deduplicated, in order") {
  auto kg = small_graph();
  auto ids = find_concepts_in_query("Compare GNN with BERT and gnn", kg);
  CHECK(ids == std::vector<std::string>{"c:graph-neural-network", "c:bert"});
  CHECK(find_concepts_in_query("nothing here", kg).empty());
}
