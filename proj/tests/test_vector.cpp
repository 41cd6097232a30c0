#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "nav/embedding.hpp"
#include "nav/error.hpp"
#include "nav/hnsw.hpp"
#include "nav/vector_search.hpp"
#include "support.hpp"

using namespace nav;

namespace {

std::vector<Vector> random_unit_vectors(std::size_t n, int dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<Vector> out;
  for (std::size_t i = 0; i < n; ++i) {
    Vector v(dim);
    for (int j = 0; j < dim; ++j) v[j] = g(rng);
    v.normalize();
    out.push_back(v);
  }
  return out;
}

std::vector<std::string> exact_top(const std::vector<Vector>& data, const Vector& q, std::size_t k) {
  std::vector<std::pair<double, std::size_t>> scored;
  for (std::size_t i = 0; i < data.size(); ++i) scored.emplace_back(-data[i].dot(q), i);
  std::partial_sort(scored.begin(), scored.begin() + static_cast<long>(k), scored.end());
  std::vector<std::string> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(std::to_string(scored[i].second));
  return out;
}

double recall_at(const VectorIndex& idx, const std::vector<Vector>& data, const std::vector<Vector>& queries,
                 std::size_t k, std::size_t ef) {
  std::size_t hit = 0;
  for (const auto& q : queries) {
    auto truth = exact_top(data, q, k);
    std::set<std::string> t(truth.begin(), truth.end());
    for (const auto& h : idx.knn(q, k, ef)) hit += t.count(h.key);
  }
  return static_cast<double>(hit) / static_cast<double>(k * queries.size());
}

VectorIndex build(const std::vector<Vector>& data, HnswParams p) {
  VectorIndex idx(p);
  for (std::size_t i = 0; i < data.size(); ++i) idx.insert(std::to_string(i), data[i]);
  return idx;
}

// Degree bounds, layer membership and no self loops.
void check_structure(const VectorIndex& idx) {
  for (VectorIndex::NodeId id = 0; id < idx.size(); ++id) {
    for (int l = 0; l <= idx.level(id); ++l) {
      const auto& nb = idx.neighbors(id, l);
      CHECK(nb.size() <= idx.capacity(l));
      std::set<VectorIndex::NodeId> uniq(nb.begin(), nb.end());
      CHECK(uniq.size() == nb.size());
      for (auto n : nb) {
        CHECK(n != id);
        CHECK(idx.level(n) >= l);
      }
    }
  }
}

// Layer-0 reachability from the entry point.
std::size_t reachable(const VectorIndex& idx) {
  std::vector<bool> seen(idx.size(), false);
  std::vector<VectorIndex::NodeId> stack{static_cast<VectorIndex::NodeId>(idx.entry_point())};
  seen[stack.back()] = true;
  std::size_t n = 1;
  while (!stack.empty()) {
    auto cur = stack.back();
    stack.pop_back();
    for (auto nb : idx.neighbors(cur, 0))
      if (!seen[nb]) {
        seen[nb] = true;
        ++n;
        stack.push_back(nb);
      }
  }
  return n;
}

}  // namespace

TEST_CASE("hashing embedder: deterministic unit vectors, empty text rejected") {
  HashingEmbedder e;
  Vector a = e.embed("Graph neural networks");
  CHECK(a.size() == 256);
  CHECK(a.norm() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((a - e.embed("graph, NEURAL networks!")).norm() == doctest::Approx(0.0));
  CHECK((e.embed("a b") - e.embed("b a")).norm() == doctest::Approx(0.0));
  CHECK_THROWS_AS(e.embed("  ,; "), Error);
  CHECK(cosine(e.embed("deep learning"), e.embed("deep learning models")) >
        cosine(e.embed("deep learning"), e.embed("protein folding")));

  // bucket and sign come straight from FNV-1a-64 of the token
  Vector one = e.embed("tensor");
  const std::uint64_t h = fnv1a64("tensor");
  CHECK(one[static_cast<Eigen::Index>(h % 256)] == doctest::Approx((h >> 63) ? -1.0 : 1.0));
  CHECK(one.cwiseAbs().sum() == doctest::Approx(1.0));
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("hnsw: basic examples and errors") {
  HnswParams p;
  p.dim = 4;
  VectorIndex idx(p);
  Vector a(4), b(4);
  a << 1, 0, 0, 0;
  b << 0, 1, 0, 0;
  idx.insert("a", a);
  CHECK(idx.entry_point() == 0);
  CHECK(idx.level(0) >= 0);
  idx.insert("b", b);
  Vector q(4);
  q << 0.9, 0.1, 0, 0;
  q.normalize();
  auto hits = idx.knn(q, 1);
  REQUIRE(hits.size() == 1);
  CHECK(hits[0].key == "a");
  CHECK_THROWS_AS(idx.insert("a", b), Error);
  CHECK_THROWS_AS(idx.insert("c", Vector::Zero(8)), Error);
  CHECK_THROWS_AS(VectorIndex(p).knn(q, 1), Error);
  auto both = idx.knn(q, 5);
  CHECK(both.size() == 2);
  CHECK(both[0].similarity >= both[1].similarity);
}

TEST_CASE("hnsw: exhaustive beam equals brute force; structure invariants; determinism") {
  const auto data = random_unit_vectors(1000, 32, 5);
  HnswParams p;
  p.dim = 32;
  const auto idx = build(data, p);
  check_structure(idx);
  CHECK(reachable(idx) == idx.size());

  const auto queries = random_unit_vectors(40, 32, 6);
  for (const auto& q : queries) {
    auto truth = exact_top(data, q, 10);
    auto hits = idx.knn(q, 10, idx.size());
    REQUIRE(hits.size() == 10);
    for (std::size_t i = 0; i < 10; ++i) CHECK(hits[i].key == truth[i]);
  }
  auto self = idx.knn(data[17], 1, 64);
  CHECK(self[0].key == "17");
  CHECK(self[0].similarity == doctest::Approx(1.0));

  const auto again = build(data, p);
  CHECK(again.structurally_equal(idx));
  for (const auto& q : queries) {
    auto x = idx.knn(q, 10), y = again.knn(q, 10);
    REQUIRE(x.size() == y.size());
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(x[i].key == y[i].key);
  }

  HnswParams other = p;
  other.seed = 43;
  CHECK_FALSE(build(data, other).structurally_equal(idx));

  const double r16 = recall_at(idx, data, queries, 10, 16);
  const double r64 = recall_at(idx, data, queries, 10, 64);
  const double r256 = recall_at(idx, data, queries, 10, 256);
  CHECK(r16 <= r64);
  CHECK(r64 <= r256);

  std::stringstream buf;
  idx.save(buf);
  const std::string bytes = buf.str();
  CHECK(bytes.substr(0, 8) == "NAVVIDX1");
  auto loaded = VectorIndex::load(buf);
  CHECK(loaded.structurally_equal(idx));
  auto x = loaded.knn(queries[0], 10), y = idx.knn(queries[0], 10);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(x[i].key == y[i].key);
}

TEST_CASE("granular indices: unit counts, span resolution and rebuild determinism") {
  Document d;
  d.id = "doc";
  d.title = "Sparse retrieval";
  d.abstract = "We study retrieval. It works well.";
  std::string body;
  for (int i = 0; i < 25; ++i) body += "Sentence number " + std::to_string(i) + " is here. ";
  d.body = body;
  d.published_at = navtest::kToday;

  HashingEmbedder e;
  auto units = embed_document_units(d, e, 10);
  std::map<Granularity, std::size_t> counts;
  for (const auto& u : units) ++counts[u.span.granularity];
  CHECK(counts[Granularity::sentence] == 25 + 2);
  CHECK(counts[Granularity::chunk] == 3 + 1);
  CHECK(counts[Granularity::document] == 1);

  HnswParams p;
  auto gi = build_indices_from_units(units, p);
  CHECK(gi.sentences.size() == 27);
  CHECK(gi.chunks.size() == 4);
  CHECK(gi.documents.size() == 1);
  for (const auto& u : units) {
    const auto& span = gi.span(u.key);
    CHECK(span.doc_id == "doc");
    if (span.granularity == Granularity::sentence) {
      const std::string text = d.field_text(span.field);
      const std::string sentence = utf8::substr(text, span.start_char, span.end_char);
      const std::string context = utf8::substr(text, span.chunk_start, span.chunk_end);
      CHECK(context.find(sentence) != std::string::npos);
    }
  }

  auto hit = gi.sentences.knn(e.embed("Sentence number 7 is here."), 1, gi.sentences.size());
  CHECK(hit[0].key == sentence_key("doc", Field::body, 7));

  auto again = build_indices_from_units(embed_document_units(d, e, 10), p);
  CHECK(again.sentences.structurally_equal(gi.sentences));
  CHECK(again.chunks.structurally_equal(gi.chunks));

  auto empty = build_indices({}, e, p);
  CHECK(empty.sentences.empty());
  CHECK(empty.chunks.empty());
  CHECK(empty.documents.empty());
}

TEST_CASE("fuse: reciprocal rank fusion") {
  auto f = fuse({"a", "b", "c"}, {"a", "c", "d"}, 10);
  REQUIRE(f.size() == 4);
  CHECK(f[0].doc_id == "a");
  CHECK(f[0].score == doctest::Approx(2.0 / 61.0));
  CHECK(f[0].keyword_rank == 1);
  CHECK(f[0].vector_rank == 1);

  // brute-force oracle on random lists
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::string> pool;
    for (int i = 0; i < 15; ++i) pool.push_back("d" + std::to_string(i));
    std::shuffle(pool.begin(), pool.end(), rng);
    std::vector<std::string> kw(pool.begin(), pool.begin() + 8);
    std::shuffle(pool.begin(), pool.end(), rng);
    std::vector<std::string> vec(pool.begin(), pool.begin() + 8);
    std::map<std::string, double> score;
    for (std::size_t i = 0; i < kw.size(); ++i) score[kw[i]] += 1.0 / (60.0 + static_cast<double>(i + 1));
    for (std::size_t i = 0; i < vec.size(); ++i) score[vec[i]] += 1.0 / (60.0 + static_cast<double>(i + 1));
    std::vector<std::pair<std::string, double>> expect(score.begin(), score.end());
    std::stable_sort(expect.begin(), expect.end(), [](const auto& x, const auto& y) { return x.second > y.second; });
    auto got = fuse(kw, vec, 5);
    REQUIRE(got.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
      CHECK(got[i].doc_id == expect[i].first);
      CHECK(got[i].score == doctest::Approx(expect[i].second).epsilon(1e-12));
    }
  }
}
