#include "nav/embedding.hpp"

#include "httplib.h"
#include "json.hpp"
#include "nav/error.hpp"
#include "nav/text.hpp"

namespace nav {

HashingEmbedder::HashingEmbedder(int dim) : dim_(dim) {
  if (dim < 1) throw Error(ErrorCode::InvalidSize, "embedding dimension must be >= 1");
}

Vector HashingEmbedder::embed(std::string_view text) const {
  auto tokens = tokenize_words(text);
  if (tokens.empty()) throw Error(ErrorCode::EmptyText, "no tokens");
  Vector v = Vector::Zero(dim_);
  for (const auto& t : tokens) {
    const std::uint64_t h = fnv1a64(t);
    const auto idx = static_cast<Eigen::Index>(h % static_cast<std::uint64_t>(dim_));
    v[idx] += (h >> 63) == 0 ? 1.0 : -1.0;
  }
  normalize_in_place(v);
  return v;
}

ExternalEmbedder::ExternalEmbedder(std::string host, int port, std::string path, int dim)
    : host_(std::move(host)), port_(port), path_(std::move(path)), dim_(dim) {}

Vector ExternalEmbedder::embed(std::string_view text) const {
  if (tokenize_words(text).empty()) throw Error(ErrorCode::EmptyText, "no tokens");
  httplib::Client client(host_, port_);
  nlohmann::json req{{"text", std::string(text)}};
  auto res = client.Post(path_, req.dump(), "application/json");
  if (!res) throw Error(ErrorCode::Io, "embedder unreachable at " + host_ + ":" + std::to_string(port_));
  if (res->status != 200) throw Error(ErrorCode::Io, "embedder returned HTTP " + std::to_string(res->status));
  auto body = nlohmann::json::parse(res->body, nullptr, false);
  if (body.is_discarded() || !body.contains("vector") || !body["vector"].is_array())
    throw Error(ErrorCode::Format, "embedder response lacks a vector");
  const auto& arr = body["vector"];
  if (static_cast<int>(arr.size()) != dim_)
    throw Error(ErrorCode::DimensionMismatch,
                "expected " + std::to_string(dim_) + " values, got " + std::to_string(arr.size()));
  Vector v(dim_);
  for (int i = 0; i < dim_; ++i) v[i] = arr[static_cast<std::size_t>(i)].get<double>();
  normalize_in_place(v);
  return v;
}

}  // namespace nav
