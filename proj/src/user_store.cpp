#include "nav/user_store.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "nav/error.hpp"
#include "nav/text.hpp"

namespace nav {

namespace fs = std::filesystem;

Json to_json(const Tag& t) {
  return Json{{"user_id", t.user_id}, {"tag_name", t.tag_name}, {"doc_id", t.doc_id}, {"created_at", t.created_at}};
}

Json to_json(const Note& n) {
  Json j{{"id", n.id}, {"user_id", n.user_id}, {"text", n.text},
         {"created_at", n.created_at}, {"updated_at", n.updated_at}};
  j["doc_id"] = n.doc_id ? Json(*n.doc_id) : Json(nullptr);
  return j;
}

namespace {

Tag tag_from_json(const Json& j) {
  return Tag{j.at("user_id").get<std::string>(), j.at("tag_name").get<std::string>(),
             j.at("doc_id").get<std::string>(), j.value("created_at", std::string{})};
}

Note note_from_json(const Json& j) {
  Note n;
  n.id = j.at("id").get<std::string>();
  n.user_id = j.at("user_id").get<std::string>();
  if (j.contains("doc_id") && !j["doc_id"].is_null()) n.doc_id = j["doc_id"].get<std::string>();
  n.text = j.at("text").get<std::string>();
  n.created_at = j.value("created_at", std::string{});
  n.updated_at = j.value("updated_at", std::string{});
  return n;
}

Json weights_json(const ModuleWeights& w) {
  return Json{{"content", w[Module::content]}, {"citation", w[Module::citation]},
              {"author", w[Module::author]}, {"popularity", w[Module::popularity]}};
}

ModuleWeights weights_from_json(const Json& j) {
  ModuleWeights w;
  w[Module::content] = j.value("content", 1.0);
  w[Module::citation] = j.value("citation", 1.0);
  w[Module::author] = j.value("author", 1.0);
  w[Module::popularity] = j.value("popularity", 1.0);
  return w;
}

std::string now_iso() { return format_timestamp(std::chrono::system_clock::now()); }

}  // namespace

UserStore::UserStore(std::string dir) : dir_(std::move(dir)) {
  if (dir_.empty()) return;
  fs::create_directories(dir_);
  fs::path snap = fs::path(dir_) / "user_snapshot.json";
  if (fs::exists(snap)) {
    std::ifstream in(snap);
    Json j;
    try {
      in >> j;
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::Format, "user snapshot: " + std::string(e.what()));
    }
    load_state(j);
  }
  fs::path log = fs::path(dir_) / "user_log.jsonl";
  if (fs::exists(log)) {
    std::ifstream in(log, std::ios::binary);
    std::string line;
    std::uintmax_t good = 0;  // end of the last complete op
    bool torn = false;
    while (std::getline(in, line)) {
      if (in.eof()) {
        torn = !line.empty();  // no trailing newline: the write never finished
        break;
      }
      const auto end = static_cast<std::uintmax_t>(in.tellg());
      if (line.empty()) {
        good = end;
        continue;
      }
      Json op;
      try {
        op = Json::parse(line);
      } catch (const Json::exception&) {
        torn = true;
        break;
      }
      good = end;
      std::uint64_t s = op.value("seq", std::uint64_t{0});
      if (s <= seq_) continue;  // already folded into the snapshot
      apply(op);
      seq_ = s;
    }
    in.close();
    // Drop the torn tail so later appends start on a fresh line.
    if (torn) fs::resize_file(log, good);
  }
}

void UserStore::append(const Json& op) {
  if (dir_.empty()) return;
  std::ofstream out(fs::path(dir_) / "user_log.jsonl", std::ios::app);
  out << op.dump() << '\n';
  out.flush();
  if (!out) throw Error(ErrorCode::Io, "cannot append to user log");
}

void UserStore::apply(const Json& op) {
  const std::string kind = op.at("op").get<std::string>();
  if (kind == "add_tag") {
    Tag t = tag_from_json(op.at("tag"));
    users_.insert(t.user_id);
    tags_.emplace(std::tuple{t.user_id, t.tag_name, t.doc_id}, t);
  } else if (kind == "remove_tag") {
    auto user = op.at("user_id").get<std::string>();
    auto name = op.at("tag_name").get<std::string>();
    auto doc = op.value("doc_id", std::string{});
    for (auto it = tags_.begin(); it != tags_.end();) {
      const auto& [u, n, d] = it->first;
      if (u == user && n == name && (doc.empty() || d == doc))
        it = tags_.erase(it);
      else
        ++it;
    }
  } else if (kind == "add_note" || kind == "update_note") {
    Note n = note_from_json(op.at("note"));
    users_.insert(n.user_id);
    notes_[n.id] = n;
    if (n.id.size() > 1 && n.id[0] == 'n') next_note_ = std::max<std::uint64_t>(next_note_, std::stoull(n.id.substr(1)) + 1);
  } else if (kind == "remove_note") {
    notes_.erase(op.at("id").get<std::string>());
  } else if (kind == "set_weights") {
    auto user = op.at("user_id").get<std::string>();
    users_.insert(user);
    weights_[user] = weights_from_json(op.at("weights"));
  } else {
    throw Error(ErrorCode::Format, "unknown user log op: " + kind);
  }
}

bool UserStore::add_tag(const Tag& tag) {
  if (tag.user_id.empty() || tag.tag_name.empty() || tag.doc_id.empty())
    throw Error(ErrorCode::MissingField, "tag needs user_id, tag_name and doc_id");
  std::lock_guard lock(mutex_);
  if (tags_.count({tag.user_id, tag.tag_name, tag.doc_id})) return false;
  Tag t = tag;
  if (t.created_at.empty()) t.created_at = now_iso();
  Json op{{"seq", seq_ + 1}, {"op", "add_tag"}, {"tag", to_json(t)}};
  append(op);
  apply(op);
  ++seq_;
  return true;
}

std::size_t UserStore::remove_tag(std::string_view user, std::string_view tag_name, std::string_view doc_id) {
  std::lock_guard lock(mutex_);
  std::size_t n = 0;
  for (const auto& [key, t] : tags_) {
    const auto& [u, name, d] = key;
    if (u == user && name == tag_name && (doc_id.empty() || d == doc_id)) ++n;
  }
  if (n == 0) return 0;
  Json op{{"seq", seq_ + 1}, {"op", "remove_tag"}, {"user_id", user}, {"tag_name", tag_name}, {"doc_id", doc_id}};
  append(op);
  apply(op);
  ++seq_;
  return n;
}

std::vector<Tag> UserStore::tags(std::string_view user) const {
  std::lock_guard lock(mutex_);
  std::vector<Tag> out;
  for (const auto& [key, t] : tags_)
    if (t.user_id == user) out.push_back(t);
  return out;
}

std::map<std::string, std::vector<std::string>> UserStore::tag_profiles(std::string_view user) const {
  std::lock_guard lock(mutex_);
  std::map<std::string, std::vector<std::string>> out;
  for (const auto& [key, t] : tags_)
    if (t.user_id == user) out[t.tag_name].push_back(t.doc_id);
  return out;
}

std::map<std::string, std::size_t> UserStore::tag_counts() const {
  std::lock_guard lock(mutex_);
  std::map<std::string, std::size_t> out;
  for (const auto& [key, t] : tags_) ++out[t.doc_id];
  return out;
}

Note UserStore::add_note(std::string user, std::optional<std::string> doc_id, std::string text) {
  if (user.empty()) throw Error(ErrorCode::MissingField, "note needs user_id");
  if (trim(text).empty()) throw Error(ErrorCode::PreconditionViolation, "note text is empty");
  std::lock_guard lock(mutex_);
  Note n;
  n.id = "n" + std::to_string(next_note_);
  n.user_id = std::move(user);
  n.doc_id = std::move(doc_id);
  n.text = std::move(text);
  n.created_at = n.updated_at = now_iso();
  Json op{{"seq", seq_ + 1}, {"op", "add_note"}, {"note", to_json(n)}};
  append(op);
  apply(op);
  ++seq_;
  return n;
}

std::optional<Note> UserStore::update_note(std::string_view id, std::string text) {
  if (trim(text).empty()) throw Error(ErrorCode::PreconditionViolation, "note text is empty");
  std::lock_guard lock(mutex_);
  auto it = notes_.find(id);
  if (it == notes_.end()) return std::nullopt;
  Note n = it->second;
  n.text = std::move(text);
  n.updated_at = now_iso();
  Json op{{"seq", seq_ + 1}, {"op", "update_note"}, {"note", to_json(n)}};
  append(op);
  apply(op);
  ++seq_;
  return n;
}

bool UserStore::remove_note(std::string_view id) {
  std::lock_guard lock(mutex_);
  if (notes_.find(id) == notes_.end()) return false;
  Json op{{"seq", seq_ + 1}, {"op", "remove_note"}, {"id", id}};
  append(op);
  apply(op);
  ++seq_;
  return true;
}

std::vector<Note> UserStore::notes(std::string_view user) const {
  std::lock_guard lock(mutex_);
  std::vector<Note> out;
  for (const auto& [id, n] : notes_)
    if (n.user_id == user) out.push_back(n);
  std::sort(out.begin(), out.end(), [](const Note& a, const Note& b) {
    return std::tuple(a.created_at, a.id.size(), a.id) < std::tuple(b.created_at, b.id.size(), b.id);
  });
  return out;
}

void UserStore::set_weights(std::string user, const ModuleWeights& w) {
  if (user.empty()) throw Error(ErrorCode::MissingField, "weights need user_id");
  for (double v : w.values)
    if (!(v >= 0.0)) throw Error(ErrorCode::InvalidWeights, "module weights must be non-negative");
  std::lock_guard lock(mutex_);
  Json op{{"seq", seq_ + 1}, {"op", "set_weights"}, {"user_id", user}, {"weights", weights_json(w)}};
  append(op);
  apply(op);
  ++seq_;
}

std::optional<ModuleWeights> UserStore::weights(std::string_view user) const {
  std::lock_guard lock(mutex_);
  auto it = weights_.find(user);
  if (it == weights_.end()) return std::nullopt;
  return it->second;
}

bool UserStore::has_user(std::string_view user) const {
  std::lock_guard lock(mutex_);
  return users_.find(user) != users_.end();
}

Json UserStore::state_json() const {
  Json j;
  j["seq"] = seq_;
  j["next_note"] = next_note_;
  j["users"] = Json::array();
  for (const auto& u : users_) j["users"].push_back(u);
  j["tags"] = Json::array();
  for (const auto& [k, t] : tags_) j["tags"].push_back(to_json(t));
  j["notes"] = Json::array();
  for (const auto& [id, n] : notes_) j["notes"].push_back(to_json(n));
  j["weights"] = Json::object();
  for (const auto& [u, w] : weights_) j["weights"][u] = weights_json(w);
  return j;
}

void UserStore::load_state(const Json& j) {
  seq_ = j.value("seq", std::uint64_t{0});
  next_note_ = j.value("next_note", std::uint64_t{1});
  for (const auto& u : j.value("users", Json::array())) users_.insert(u.get<std::string>());
  for (const auto& t : j.value("tags", Json::array())) {
    Tag tag = tag_from_json(t);
    tags_.emplace(std::tuple{tag.user_id, tag.tag_name, tag.doc_id}, tag);
  }
  for (const auto& n : j.value("notes", Json::array())) {
    Note note = note_from_json(n);
    notes_[note.id] = note;
  }
  const Json weights = j.value("weights", Json::object());
  for (const auto& [u, w] : weights.items()) weights_[u] = weights_from_json(w);
}

void UserStore::compact() {
  if (dir_.empty()) return;
  std::lock_guard lock(mutex_);
  fs::path snap = fs::path(dir_) / "user_snapshot.json";
  fs::path tmp = fs::path(dir_) / "user_snapshot.json.tmp";
  {
    std::ofstream out(tmp);
    out << state_json().dump() << '\n';
    if (!out) throw Error(ErrorCode::Io, "cannot write user snapshot");
  }
  fs::rename(tmp, snap);
  std::ofstream(fs::path(dir_) / "user_log.jsonl", std::ios::trunc);
}

bool UserStore::operator==(const UserStore& o) const {
  if (this == &o) return true;
  std::scoped_lock lock(mutex_, o.mutex_);
  auto same_weights = [&] {
    if (weights_.size() != o.weights_.size()) return false;
    for (const auto& [u, w] : weights_) {
      auto it = o.weights_.find(u);
      if (it == o.weights_.end() || it->second.values != w.values) return false;
    }
    return true;
  };
  return users_ == o.users_ && tags_ == o.tags_ && notes_ == o.notes_ && same_weights();
}

}  // namespace nav
