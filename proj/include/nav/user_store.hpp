#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "nav/corpus.hpp"
#include "nav/recommender.hpp"

namespace nav {

struct Tag {
  std::string user_id;
  std::string tag_name;
  std::string doc_id;
  std::string created_at;  // ISO-8601 UTC

  bool operator==(const Tag&) const = default;
};

struct Note {
  std::string id;
  std::string user_id;
  std::optional<std::string> doc_id;
  std::string text;
  std::string created_at;
  std::string updated_at;

  bool operator==(const Note&) const = default;
};

Json to_json(const Tag& t);
Json to_json(const Note& n);

/// Tags, notes and per-user module weights. Every mutation is appended to
/// `<dir>/user_log.jsonl` before it is applied; compact() folds the log into
/// `<dir>/user_snapshot.json`. Replaying snapshot + log restores the state.
/// An empty dir keeps everything in memory.
class UserStore {
public:
  explicit UserStore(std::string dir = {});

  /// false when (user, tag, doc) already exists.
  bool add_tag(const Tag& tag);
  /// Number of tags removed; doc_id empty removes the whole tag.
  std::size_t remove_tag(std::string_view user, std::string_view tag_name, std::string_view doc_id);
  std::vector<Tag> tags(std::string_view user) const;
  /// tag name -> tagged doc ids
  std::map<std::string, std::vector<std::string>> tag_profiles(std::string_view user) const;
  /// doc id -> number of (user, tag) pairs tagging it
  std::map<std::string, std::size_t> tag_counts() const;

  /// Throws Error{PreconditionViolation} for empty text.
  Note add_note(std::string user, std::optional<std::string> doc_id, std::string text);
  std::optional<Note> update_note(std::string_view id, std::string text);
  bool remove_note(std::string_view id);
  std::vector<Note> notes(std::string_view user) const;

  /// Throws Error{InvalidWeights} for negative weights.
  void set_weights(std::string user, const ModuleWeights& w);
  std::optional<ModuleWeights> weights(std::string_view user) const;

  bool has_user(std::string_view user) const;
  void compact();

  bool operator==(const UserStore& o) const;

private:
  void append(const Json& op);
  void apply(const Json& op);
  Json state_json() const;
  void load_state(const Json& j);

  std::string dir_;
  mutable std::mutex mutex_;
  std::uint64_t seq_ = 0;
  std::uint64_t next_note_ = 1;
  std::set<std::string, std::less<>> users_;
  std::map<std::tuple<std::string, std::string, std::string>, Tag> tags_;
  std::map<std::string, Note, std::less<>> notes_;
  std::map<std::string, ModuleWeights, std::less<>> weights_;
};

}  // namespace nav
