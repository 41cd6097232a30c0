#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nav/text.hpp"

namespace nav {

/// Every tunable constant, grouped by owning module. Loaded from key=value
/// files; unknown keys are errors so typos do not silently fall back.
struct Config {
  struct {
    std::size_t chunk_size = 10;
  } corpus;

  struct {
    int max_retries = 3;
    int base_delay_ms = 100;
    int workers = 2;
  } pipeline;

  struct {
    double threshold = 0.90;
    int year_tolerance = 1;
    std::size_t max_token_df = 100;
  } refparse;

  struct {
    std::string gazetteer;  // path; empty -> <source>/fixtures/gazetteer.tsv
    double string_weight = 0.6;
    double embed_weight = 0.4;
    double link_threshold = 0.75;
    std::size_t context_tokens = 20;
    std::size_t min_support = 3;
  } concepts;

  struct {
    double w_authors = 3.0;
    double w_title = 2.5;
    double w_abstract = 1.5;
    double w_body = 0.5;
    double dismax_tiebreak = 0.1;
    std::size_t max_ngram = 3;
    double stopword_boost = 0.25;
    double recency_tau_days = 730.0;
  } keyword;

  struct {
    int dim = 256;
    int m = 16;
    int ef_construction = 200;
    std::size_t ef_search = 0;  // 0 -> max(64, 2k)
    std::uint64_t seed = 42;
    std::string embedder = "hashing";  // hashing | external
    std::string external_host = "127.0.0.1";
    int external_port = 8090;
    std::string external_path = "/embed";
  } vector;

  struct {
    double rrf_k = 60.0;
  } fusion;

  struct {
    double gamma = 0.85;
    double beta = 0.5;
    std::size_t k_docs = 50;
  } experts;

  struct {
    int window_days = 30;
    double w_content = 1.0;
    double w_citation = 1.0;
    double w_author = 1.0;
    double w_popularity = 1.0;
    std::size_t top_k = 10;
  } recommender;

  struct {
    std::string classifier;  // path; empty -> <source>/fixtures/classifier.tsv
    std::string bucket = "month";  // month | year
    std::size_t answer_k = 3;
  } insights;

  struct {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string data_dir = "nav-data";
  } server;

  /// Reference date for recency and candidate windows; today when unset.
  std::optional<Date> today;

  Date reference_date() const { return today ? *today : today_utc(); }

  /// Applies one key=value assignment. Throws Error{Config}.
  void set(std::string_view key, std::string_view value);
  /// Reads key=value lines; '#' starts a comment. Throws Error{Config}.
  void read(std::istream& in);

  static Config load_file(const std::string& path);
  /// --config path, else $NAV_CONFIG, else built-in defaults.
  static Config resolve(const std::optional<std::string>& cli_path);

  static std::vector<std::string> keys();
};

/// Absolute path of a file shipped with the source tree.
std::string source_path(std::string_view relative);

}  // namespace nav
