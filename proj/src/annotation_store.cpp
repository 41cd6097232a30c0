#include <istream>
#include <mutex>
#include <ostream>
#include <string>

#include "nav/corpus.hpp"

namespace nav {

AnnotationStore::Key AnnotationStore::key_of(const StandoffAnnotation& a) {
  return {a.doc_id, a.doc_version, a.kind, a.start_char, a.end_char, a.field, a.producer_stage};
}

bool AnnotationStore::add(const StandoffAnnotation& ann) {
  std::unique_lock lock(mutex_);
  return items_.try_emplace(key_of(ann), ann).second;
}

std::size_t AnnotationStore::add_all(const std::vector<StandoffAnnotation>& anns) {
  std::unique_lock lock(mutex_);
  std::size_t n = 0;
  for (const auto& a : anns) n += items_.try_emplace(key_of(a), a).second ? 1 : 0;
  return n;
}

std::vector<StandoffAnnotation> AnnotationStore::for_doc(std::string_view doc_id, std::int64_t version) const {
  std::shared_lock lock(mutex_);
  std::vector<StandoffAnnotation> out;
  Key lo{std::string(doc_id), version, AnnotationKind::concept_mention, 0, 0, Field::title, std::string()};
  for (auto it = items_.lower_bound(lo); it != items_.end(); ++it) {
    if (std::get<0>(it->first) != doc_id || std::get<1>(it->first) != version) break;
    out.push_back(it->second);
  }
  return out;
}

std::vector<StandoffAnnotation> AnnotationStore::of_kind(AnnotationKind kind) const {
  std::shared_lock lock(mutex_);
  std::vector<StandoffAnnotation> out;
  for (const auto& [k, a] : items_) {
    if (a.kind == kind) out.push_back(a);
  }
  return out;
}

std::vector<StandoffAnnotation> AnnotationStore::snapshot() const {
  std::shared_lock lock(mutex_);
  std::vector<StandoffAnnotation> out;
  out.reserve(items_.size());
  for (const auto& [k, a] : items_) out.push_back(a);
  return out;
}

std::size_t AnnotationStore::size() const {
  std::shared_lock lock(mutex_);
  return items_.size();
}

void AnnotationStore::write_jsonl(std::ostream& out) const {
  for (const auto& a : snapshot()) out << to_json(a).dump() << '\n';
}

void AnnotationStore::read_jsonl(std::istream& in) {
  std::string line;
  std::vector<StandoffAnnotation> batch;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    batch.push_back(annotation_from_json(Json::parse(line)));
  }
  add_all(batch);
}

}  // namespace nav
