#pragma once

// Hierarchical navigable small world graph over unit vectors.
//
// Nodes live in a dim x capacity column matrix; node i's adjacency at layer l
// is links_[i][l]. Layer 0 holds every node and allows 2*M neighbors, upper
// layers allow M. Distance is 1 - dot, i.e. cosine distance on unit vectors.
//
// Construction is single-writer. knn() is const and allocates its own visited
// set, so concurrent queries against a frozen index need no locking.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <queue>
#include <random>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "nav/error.hpp"

namespace nav {

struct HnswParams {
  int dim = 256;
  int m = 16;
  int ef_construction = 200;
  std::uint64_t seed = 42;
};

template <typename Scalar = double>
class HnswIndex {
public:
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using NodeId = std::uint32_t;

  struct Hit {
    std::string key;
    double similarity = 0.0;
  };

  explicit HnswIndex(HnswParams params = {})
      : params_(params), level_mult_(1.0 / std::log(static_cast<double>(params.m))), rng_(params.seed) {
    if (params.dim < 1 || params.m < 2 || params.ef_construction < 1)
      throw Error(ErrorCode::InvalidSize, "hnsw: dim >= 1, m >= 2, ef_construction >= 1 required");
    data_.resize(params_.dim, 0);
  }

  const HnswParams& params() const { return params_; }
  std::size_t size() const { return keys_.size(); }
  bool empty() const { return keys_.empty(); }
  int max_level() const { return max_level_; }
  std::int64_t entry_point() const { return entry_; }
  int level(NodeId id) const { return levels_[id]; }
  const std::string& key(NodeId id) const { return keys_[id]; }
  const std::vector<NodeId>& neighbors(NodeId id, int layer) const { return links_[id][static_cast<std::size_t>(layer)]; }
  auto vector(NodeId id) const { return data_.col(static_cast<Eigen::Index>(id)); }
  bool contains(const std::string& key) const { return ids_.count(key) != 0; }
  std::optional<NodeId> find(const std::string& key) const {
    auto it = ids_.find(key);
    if (it == ids_.end()) return std::nullopt;
    return it->second;
  }
  std::size_t capacity(int layer) const { return static_cast<std::size_t>(layer == 0 ? 2 * params_.m : params_.m); }

  /// Throws Error{DuplicateKey} for a key already present.
  template <typename Derived>
  void insert(const std::string& key, const Eigen::MatrixBase<Derived>& v) {
    if (v.size() != params_.dim)
      throw Error(ErrorCode::DimensionMismatch, "expected " + std::to_string(params_.dim) + " got " + std::to_string(v.size()));
    if (ids_.count(key)) throw Error(ErrorCode::DuplicateKey, key);

    const int lvl = sample_level();
    const auto id = static_cast<NodeId>(keys_.size());
    if (static_cast<Eigen::Index>(id) >= data_.cols()) {
      data_.conservativeResize(Eigen::NoChange, std::max<Eigen::Index>(16, data_.cols() * 2));
    }
    data_.col(id) = v.template cast<Scalar>();
    keys_.push_back(key);
    ids_.emplace(key, id);
    levels_.push_back(lvl);
    links_.emplace_back(static_cast<std::size_t>(lvl) + 1);

    if (entry_ < 0) {
      entry_ = id;
      max_level_ = lvl;
      return;
    }

    const auto q = data_.col(id);
    NodeId cur = static_cast<NodeId>(entry_);
    for (int l = max_level_; l > lvl; --l) cur = greedy_closest(q, cur, l);

    std::vector<Candidate> eps{{distance(q, cur), cur}};
    for (int l = std::min(lvl, max_level_); l >= 0; --l) {
      auto found = search_layer(q, eps, static_cast<std::size_t>(params_.ef_construction), l);
      auto& mine = links_[id][static_cast<std::size_t>(l)];
      const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(params_.m), found.size());
      for (std::size_t i = 0; i < take; ++i) mine.push_back(found[i].second);
      for (NodeId nb : mine) connect(nb, id, l);
      eps = std::move(found);
    }
    if (lvl > max_level_) {
      max_level_ = lvl;
      entry_ = id;
    }
  }

  /// Top-k by cosine similarity, descending; ties broken by key. ef defaults
  /// to max(64, 2k) and is never smaller than k. Throws Error{EmptyIndex}.
  template <typename Derived>
  std::vector<Hit> knn(const Eigen::MatrixBase<Derived>& query, std::size_t k, std::size_t ef = 0) const {
    if (empty()) throw Error(ErrorCode::EmptyIndex, "knn on empty index");
    if (k < 1) throw Error(ErrorCode::InvalidSize, "k must be >= 1");
    if (query.size() != params_.dim)
      throw Error(ErrorCode::DimensionMismatch, "expected " + std::to_string(params_.dim) + " got " + std::to_string(query.size()));
    if (ef == 0) ef = std::max<std::size_t>(64, 2 * k);
    ef = std::max(ef, k);
    const Vec q = query.template cast<Scalar>();
    NodeId cur = static_cast<NodeId>(entry_);
    for (int l = max_level_; l > 0; --l) cur = greedy_closest(q, cur, l);
    auto found = search_layer(q, {{distance(q, cur), cur}}, ef, 0);
    std::vector<Hit> out;
    // exact dot rather than 1 - distance, which rounds near-ties together
    for (const auto& [d, id] : found)
      out.push_back({keys_[id], static_cast<double>(q.dot(data_.col(static_cast<Eigen::Index>(id))))});
    std::stable_sort(out.begin(), out.end(), [](const Hit& a, const Hit& b) {
      if (a.similarity != b.similarity) return a.similarity > b.similarity;
      return a.key < b.key;
    });
    if (out.size() > k) out.resize(k);
    return out;
  }

  bool structurally_equal(const HnswIndex& o) const {
    return params_.dim == o.params_.dim && params_.m == o.params_.m &&
           params_.ef_construction == o.params_.ef_construction && params_.seed == o.params_.seed &&
           keys_ == o.keys_ && levels_ == o.levels_ && links_ == o.links_ && entry_ == o.entry_ &&
           max_level_ == o.max_level_ &&
           data_.leftCols(static_cast<Eigen::Index>(size())) == o.data_.leftCols(static_cast<Eigen::Index>(o.size()));
  }

  // Binary layout, little-endian:
  //   "NAVVIDX1" | u32 format=1 | u32 dim | u32 m | u32 ef_construction | u64 seed
  //   | u8 scalar_bytes | u64 node_count | i64 entry_point | i32 max_level
  //   | per node: u32 key_len, key bytes, i32 level, dim scalars,
  //               then for each layer 0..level: u32 count, count x u32 neighbor ids
  void save(std::ostream& out) const {
    out.write("NAVVIDX1", 8);
    put<std::uint32_t>(out, 1);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(params_.dim));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(params_.m));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(params_.ef_construction));
    put<std::uint64_t>(out, params_.seed);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(sizeof(Scalar)));
    put<std::uint64_t>(out, size());
    put<std::int64_t>(out, entry_);
    put<std::int32_t>(out, max_level_);
    for (std::size_t i = 0; i < size(); ++i) {
      put<std::uint32_t>(out, static_cast<std::uint32_t>(keys_[i].size()));
      out.write(keys_[i].data(), static_cast<std::streamsize>(keys_[i].size()));
      put<std::int32_t>(out, levels_[i]);
      out.write(reinterpret_cast<const char*>(data_.col(static_cast<Eigen::Index>(i)).data()),
                static_cast<std::streamsize>(sizeof(Scalar) * static_cast<std::size_t>(params_.dim)));
      for (const auto& layer : links_[i]) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(layer.size()));
        for (NodeId nb : layer) put<std::uint32_t>(out, nb);
      }
    }
    if (!out) throw Error(ErrorCode::Io, "failed writing vector index");
  }

  static HnswIndex load(std::istream& in) {
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, "NAVVIDX1", 8) != 0) throw Error(ErrorCode::Format, "bad vector index magic");
    if (get<std::uint32_t>(in) != 1) throw Error(ErrorCode::Format, "unsupported vector index format");
    HnswParams p;
    p.dim = static_cast<int>(get<std::uint32_t>(in));
    p.m = static_cast<int>(get<std::uint32_t>(in));
    p.ef_construction = static_cast<int>(get<std::uint32_t>(in));
    p.seed = get<std::uint64_t>(in);
    if (get<std::uint8_t>(in) != sizeof(Scalar)) throw Error(ErrorCode::Format, "scalar width mismatch");
    HnswIndex idx(p);
    const auto n = get<std::uint64_t>(in);
    idx.entry_ = get<std::int64_t>(in);
    idx.max_level_ = get<std::int32_t>(in);
    idx.data_.resize(p.dim, static_cast<Eigen::Index>(std::max<std::uint64_t>(n, 1)));
    for (std::uint64_t i = 0; i < n; ++i) {
      std::string key(get<std::uint32_t>(in), '\0');
      in.read(key.data(), static_cast<std::streamsize>(key.size()));
      const int lvl = get<std::int32_t>(in);
      if (lvl < 0 || lvl > 64) throw Error(ErrorCode::Format, "bad node level");
      in.read(reinterpret_cast<char*>(idx.data_.col(static_cast<Eigen::Index>(i)).data()),
              static_cast<std::streamsize>(sizeof(Scalar) * static_cast<std::size_t>(p.dim)));
      std::vector<std::vector<NodeId>> layers(static_cast<std::size_t>(lvl) + 1);
      for (auto& layer : layers) {
        layer.resize(get<std::uint32_t>(in));
        for (auto& nb : layer) nb = get<std::uint32_t>(in);
      }
      if (!in) throw Error(ErrorCode::Format, "truncated vector index");
      idx.ids_.emplace(key, static_cast<NodeId>(i));
      idx.keys_.push_back(std::move(key));
      idx.levels_.push_back(lvl);
      idx.links_.push_back(std::move(layers));
    }
    // One level draw per insert; resume the stream where the writer left it.
    idx.rng_.discard(n);
    return idx;
  }

private:
  using Candidate = std::pair<double, NodeId>;  // (distance, id)

  template <typename Derived>
  double distance(const Eigen::MatrixBase<Derived>& q, NodeId id) const {
    return 1.0 - static_cast<double>(q.dot(data_.col(static_cast<Eigen::Index>(id))));
  }

  int sample_level() {
    // Uniform in (0, 1]; the top 53 bits of one 64-bit draw.
    const double u = (static_cast<double>(rng_() >> 11) + 1.0) * 0x1.0p-53;
    return static_cast<int>(std::floor(-std::log(u) * level_mult_));
  }

  template <typename Derived>
  NodeId greedy_closest(const Eigen::MatrixBase<Derived>& q, NodeId start, int layer) const {
    NodeId cur = start;
    double best = distance(q, cur);
    bool moved = true;
    while (moved) {
      moved = false;
      for (NodeId nb : links_[cur][static_cast<std::size_t>(layer)]) {
        const double d = distance(q, nb);
        if (d < best || (d == best && nb < cur)) {
          best = d;
          cur = nb;
          moved = true;
        }
      }
    }
    return cur;
  }

  // Beam search restricted to `layer`; returns up to ef nodes sorted by distance.
  template <typename Derived>
  std::vector<Candidate> search_layer(const Eigen::MatrixBase<Derived>& q, const std::vector<Candidate>& entries,
                                      std::size_t ef, int layer) const {
    std::vector<bool> visited(size(), false);
    std::priority_queue<Candidate, std::vector<Candidate>, std::greater<>> frontier;
    std::priority_queue<Candidate> best;
    for (const auto& c : entries) {
      if (visited[c.second]) continue;
      visited[c.second] = true;
      frontier.push(c);
      best.push(c);
      if (best.size() > ef) best.pop();
    }
    while (!frontier.empty()) {
      const auto [d, id] = frontier.top();
      if (best.size() >= ef && d > best.top().first) break;
      frontier.pop();
      for (NodeId nb : links_[id][static_cast<std::size_t>(layer)]) {
        if (visited[nb]) continue;
        visited[nb] = true;
        const double dn = distance(q, nb);
        if (best.size() < ef || dn < best.top().first) {
          frontier.push({dn, nb});
          best.push({dn, nb});
          if (best.size() > ef) best.pop();
        }
      }
    }
    std::vector<Candidate> out;
    out.reserve(best.size());
    while (!best.empty()) {
      out.push_back(best.top());
      best.pop();
    }
    std::reverse(out.begin(), out.end());
    return out;
  }

  void connect(NodeId from, NodeId to, int layer) {
    auto& list = links_[from][static_cast<std::size_t>(layer)];
    list.push_back(to);
    if (list.size() <= capacity(layer)) return;
    const auto base = data_.col(static_cast<Eigen::Index>(from));
    std::vector<Candidate> scored;
    scored.reserve(list.size());
    for (NodeId nb : list) scored.push_back({distance(base, nb), nb});
    std::sort(scored.begin(), scored.end());
    scored.resize(capacity(layer));
    list.clear();
    for (const auto& c : scored) list.push_back(c.second);
  }

  template <typename T>
  static void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  template <typename T>
  static T get(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw Error(ErrorCode::Format, "truncated vector index");
    return v;
  }

  HnswParams params_;
  double level_mult_;
  std::mt19937_64 rng_;
  Matrix data_;
  std::vector<std::string> keys_;
  std::unordered_map<std::string, NodeId> ids_;
  std::vector<int> levels_;
  std::vector<std::vector<std::vector<NodeId>>> links_;
  std::int64_t entry_ = -1;
  int max_level_ = -1;
};

}  // namespace nav
