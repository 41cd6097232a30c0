#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace nav {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Vector = VectorX<double>;

inline constexpr int kEmbeddingDim = 256;

/// Cosine similarity; zero vectors compare as 0.
template <typename DerivedA, typename DerivedB>
double cosine(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  const double na = static_cast<double>(a.norm());
  const double nb = static_cast<double>(b.norm());
  if (na == 0.0 || nb == 0.0) return 0.0;
  return static_cast<double>(a.dot(b)) / (na * nb);
}

/// Normalizes in place; returns false (leaving the zero vector) when the norm is 0.
template <typename Derived>
bool normalize_in_place(Eigen::MatrixBase<Derived>& v) {
  const auto n = v.norm();
  if (n == 0) return false;
  v /= n;
  return true;
}

class Embedder {
public:
  virtual ~Embedder() = default;
  virtual int dim() const = 0;
  /// Unit vector for `text`. Throws Error{EmptyText} when text has no tokens.
  virtual Vector embed(std::string_view text) const = 0;
};

/// Signed feature hashing over lowercased alphanumeric tokens:
/// bucket = FNV-1a-64(token) mod dim, sign from bit 63 of the same hash.
class HashingEmbedder final : public Embedder {
public:
  explicit HashingEmbedder(int dim = kEmbeddingDim);
  int dim() const override { return dim_; }
  Vector embed(std::string_view text) const override;

private:
  int dim_;
};

/// Delegates to a remote model over HTTP: POST <path> with {"text": ...},
/// expects {"vector": [...]} of length dim. The result is L2-normalized.
class ExternalEmbedder final : public Embedder {
public:
  ExternalEmbedder(std::string host, int port, std::string path = "/embed", int dim = kEmbeddingDim);
  int dim() const override { return dim_; }
  Vector embed(std::string_view text) const override;

private:
  std::string host_;
  int port_;
  std::string path_;
  int dim_;
};

}  // namespace nav
