#include "nav/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>

#include "nav/error.hpp"

#ifndef NAV_SOURCE_DIR
#define NAV_SOURCE_DIR "."
#endif

namespace nav {

namespace {

template <typename T>
T parse_number(std::string_view key, std::string_view v) {
  T out{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw Error(ErrorCode::Config, std::string(key) + ": not a number: " + std::string(v));
  return out;
}

using Setter = std::function<void(Config&, std::string_view key, std::string_view value)>;

template <typename T, typename Get>
Setter number(Get get) {
  return [get](Config& c, std::string_view k, std::string_view v) { get(c) = parse_number<T>(k, v); };
}

template <typename Get>
Setter text(Get get) {
  return [get](Config& c, std::string_view, std::string_view v) { get(c) = std::string(v); };
}

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = {
      {"corpus.chunk_size", number<std::size_t>([](Config& c) -> auto& { return c.corpus.chunk_size; })},
      {"pipeline.max_retries", number<int>([](Config& c) -> auto& { return c.pipeline.max_retries; })},
      {"pipeline.base_delay_ms", number<int>([](Config& c) -> auto& { return c.pipeline.base_delay_ms; })},
      {"pipeline.workers", number<int>([](Config& c) -> auto& { return c.pipeline.workers; })},
      {"refparse.link_threshold", number<double>([](Config& c) -> auto& { return c.refparse.threshold; })},
      {"refparse.year_tolerance", number<int>([](Config& c) -> auto& { return c.refparse.year_tolerance; })},
      {"refparse.max_token_df", number<std::size_t>([](Config& c) -> auto& { return c.refparse.max_token_df; })},
      {"concepts.gazetteer", text([](Config& c) -> auto& { return c.concepts.gazetteer; })},
      {"concepts.string_weight", number<double>([](Config& c) -> auto& { return c.concepts.string_weight; })},
      {"concepts.embed_weight", number<double>([](Config& c) -> auto& { return c.concepts.embed_weight; })},
      {"concepts.link_threshold", number<double>([](Config& c) -> auto& { return c.concepts.link_threshold; })},
      {"concepts.context_tokens", number<std::size_t>([](Config& c) -> auto& { return c.concepts.context_tokens; })},
      {"concepts.min_support", number<std::size_t>([](Config& c) -> auto& { return c.concepts.min_support; })},
      {"keyword.weight.authors", number<double>([](Config& c) -> auto& { return c.keyword.w_authors; })},
      {"keyword.weight.title", number<double>([](Config& c) -> auto& { return c.keyword.w_title; })},
      {"keyword.weight.abstract", number<double>([](Config& c) -> auto& { return c.keyword.w_abstract; })},
      {"keyword.weight.body", number<double>([](Config& c) -> auto& { return c.keyword.w_body; })},
      {"keyword.dismax_tiebreak", number<double>([](Config& c) -> auto& { return c.keyword.dismax_tiebreak; })},
      {"keyword.max_ngram", number<std::size_t>([](Config& c) -> auto& { return c.keyword.max_ngram; })},
      {"keyword.stopword_boost", number<double>([](Config& c) -> auto& { return c.keyword.stopword_boost; })},
      {"keyword.recency_tau_days", number<double>([](Config& c) -> auto& { return c.keyword.recency_tau_days; })},
      {"vector.dim", number<int>([](Config& c) -> auto& { return c.vector.dim; })},
      {"vector.m", number<int>([](Config& c) -> auto& { return c.vector.m; })},
      {"vector.ef_construction", number<int>([](Config& c) -> auto& { return c.vector.ef_construction; })},
      {"vector.ef_search", number<std::size_t>([](Config& c) -> auto& { return c.vector.ef_search; })},
      {"vector.seed", number<std::uint64_t>([](Config& c) -> auto& { return c.vector.seed; })},
      {"vector.embedder", text([](Config& c) -> auto& { return c.vector.embedder; })},
      {"vector.external.host", text([](Config& c) -> auto& { return c.vector.external_host; })},
      {"vector.external.port", number<int>([](Config& c) -> auto& { return c.vector.external_port; })},
      {"vector.external.path", text([](Config& c) -> auto& { return c.vector.external_path; })},
      {"fusion.rrf_k", number<double>([](Config& c) -> auto& { return c.fusion.rrf_k; })},
      {"experts.gamma", number<double>([](Config& c) -> auto& { return c.experts.gamma; })},
      {"experts.beta", number<double>([](Config& c) -> auto& { return c.experts.beta; })},
      {"experts.k_docs", number<std::size_t>([](Config& c) -> auto& { return c.experts.k_docs; })},
      {"recommender.window_days", number<int>([](Config& c) -> auto& { return c.recommender.window_days; })},
      {"recommender.weight.content", number<double>([](Config& c) -> auto& { return c.recommender.w_content; })},
      {"recommender.weight.citation", number<double>([](Config& c) -> auto& { return c.recommender.w_citation; })},
      {"recommender.weight.author", number<double>([](Config& c) -> auto& { return c.recommender.w_author; })},
      {"recommender.weight.popularity", number<double>([](Config& c) -> auto& { return c.recommender.w_popularity; })},
      {"recommender.top_k", number<std::size_t>([](Config& c) -> auto& { return c.recommender.top_k; })},
      {"insights.classifier", text([](Config& c) -> auto& { return c.insights.classifier; })},
      {"insights.bucket", text([](Config& c) -> auto& { return c.insights.bucket; })},
      {"insights.answer_k", number<std::size_t>([](Config& c) -> auto& { return c.insights.answer_k; })},
      {"server.host", text([](Config& c) -> auto& { return c.server.host; })},
      {"server.port", number<int>([](Config& c) -> auto& { return c.server.port; })},
      {"server.data_dir", text([](Config& c) -> auto& { return c.server.data_dir; })},
      {"clock.today",
       [](Config& c, std::string_view k, std::string_view v) {
         Date d;
         if (!parse_date(v, d)) throw Error(ErrorCode::Config, std::string(k) + ": bad date " + std::string(v));
         c.today = d;
       }},
  };
  return table;
}

}  // namespace

void Config::set(std::string_view key, std::string_view value) {
  auto it = setters().find(key);
  if (it == setters().end()) throw Error(ErrorCode::Config, "unknown key " + std::string(key));
  // apply to a copy so a rejected value leaves this config untouched
  Config next = *this;
  it->second(next, key, value);
  if (next.insights.bucket != "month" && next.insights.bucket != "year")
    throw Error(ErrorCode::Config, "insights.bucket must be month or year");
  if (next.vector.embedder != "hashing" && next.vector.embedder != "external")
    throw Error(ErrorCode::Config, "vector.embedder must be hashing or external");
  *this = std::move(next);
}

void Config::read(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    auto t = trim(line);
    if (t.empty()) continue;
    auto eq = t.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::Config, "line " + std::to_string(lineno) + ": expected key=value");
    set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
}

Config Config::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open config " + path);
  Config c;
  c.read(in);
  return c;
}

Config Config::resolve(const std::optional<std::string>& cli_path) {
  if (cli_path) return load_file(*cli_path);
  if (const char* env = std::getenv("NAV_CONFIG"); env && *env) return load_file(env);
  return Config{};
}

std::vector<std::string> Config::keys() {
  std::vector<std::string> out;
  for (const auto& [k, _] : setters()) out.push_back(k);
  return out;
}

std::string source_path(std::string_view relative) { return std::string(NAV_SOURCE_DIR) + "/" + std::string(relative); }

}  // namespace nav
