#pragma once

#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "nav/config.hpp"
#include "nav/corpus.hpp"
#include "nav/text.hpp"

namespace navtest {

inline nav::Date date(const char* s) {
  nav::Date d{};
  if (!nav::parse_date(s, d)) throw std::runtime_error(std::string("bad date ") + s);
  return d;
}

inline const nav::Date kToday = date("2024-06-30");

// Small vocabulary so random queries hit several documents and phrases repeat.
inline const std::vector<std::string> kWords = {
    "neural", "ranking", "graph",   "search",  "model",    "learning", "deep",   "retrieval", "the",
    "of",     "for",     "dense",   "sparse",  "citation", "expert",   "vector", "index",     "query",
    "corpus", "network", "semantic", "entity", "linking",  "tensor",   "a",      "scalable",  "robust"};
inline const std::vector<std::string> kAuthors = {
    "Ada Lovelace", "Alan Turing", "Grace Hopper",   "Edsger Dijkstra", "Barbara Liskov", "Donald Knuth",
    "Frances Allen", "John Backus", "Leslie Lamport", "Radia Perlman",   "Ken Thompson",   "Shafi Goldwasser"};

inline std::string random_text(std::mt19937_64& rng, std::size_t min_words, std::size_t max_words) {
  std::uniform_int_distribution<std::size_t> len(min_words, max_words);
  std::uniform_int_distribution<std::size_t> pick(0, kWords.size() - 1);
  std::string out;
  const std::size_t n = len(rng);
  for (std::size_t i = 0; i < n; ++i) {
    if (i) out += (i % 9 == 8) ? ". " : " ";
    out += kWords[pick(rng)];
  }
  if (!out.empty()) out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  return out + ".";
}

/// Seeded fielded corpus over a tiny vocabulary; ids "d000".. in order.
inline std::vector<nav::Document> random_corpus(std::size_t n, std::uint64_t seed, nav::Date today = kToday,
                                                int max_age_days = 2000) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> age(0, max_age_days);
  std::uniform_int_distribution<int> cites(0, 300);
  std::uniform_int_distribution<std::size_t> nauth(1, 3);
  std::uniform_int_distribution<std::size_t> pick_author(0, kAuthors.size() - 1);
  std::vector<nav::Document> docs;
  for (std::size_t i = 0; i < n; ++i) {
    nav::Document d;
    char id[16];
    std::snprintf(id, sizeof id, "d%03zu", i);
    d.id = id;
    d.title = random_text(rng, 3, 7);
    d.title.pop_back();
    d.abstract = random_text(rng, 10, 30);
    d.body = random_text(rng, 20, 60);
    const std::size_t na = nauth(rng);
    while (d.authors.size() < na) {
      auto a = kAuthors[pick_author(rng)];
      if (std::find(d.authors.begin(), d.authors.end(), a) == d.authors.end()) d.authors.push_back(a);
    }
    d.published_at = today - std::chrono::days(age(rng));
    d.citation_count = cites(rng);
    d.source = nav::Source::arxiv;
    docs.push_back(std::move(d));
  }
  return docs;
}

inline std::string random_query(std::mt19937_64& rng, std::size_t max_tokens = 4) {
  std::uniform_int_distribution<std::size_t> len(1, max_tokens);
  std::uniform_int_distribution<std::size_t> pick(0, kWords.size() - 1);
  std::string q;
  const std::size_t n = len(rng);
  for (std::size_t i = 0; i < n; ++i) q += (i ? " " : "") + kWords[pick(rng)];
  return q;
}

inline std::string to_jsonl(const std::vector<nav::Document>& docs) {
  std::string out;
  for (const auto& d : docs) out += nav::to_json(d).dump() + "\n";
  return out;
}

/// Config with the pinned reference date and a short retry delay.
inline nav::Config test_config() {
  nav::Config c;
  c.today = kToday;
  c.pipeline.base_delay_ms = 1;
  return c;
}

inline std::string fixture(const char* name) { return nav::source_path(std::string("fixtures/") + name); }

class TempDir {
public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("navtest-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string str() const { return path_.string(); }

private:
  std::filesystem::path path_;
};

}  // namespace navtest
