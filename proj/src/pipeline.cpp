#include "nav/pipeline.hpp"

#include <algorithm>

#include "nav/error.hpp"

namespace nav {

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::parse: return "parse";
    case Stage::ref_extract: return "ref_extract";
    case Stage::ref_link: return "ref_link";
    case Stage::ner: return "ner";
    case Stage::concept_link: return "concept_link";
    case Stage::embed: return "embed";
    case Stage::index_keyword: return "index_keyword";
    case Stage::index_vector: return "index_vector";
    case Stage::done: return "done";
  }
  return "done";
}

bool parse_stage(std::string_view s, Stage& out) {
  for (auto st : kStageOrder) {
    if (to_string(st) == s) {
      out = st;
      return true;
    }
  }
  return false;
}

Stage next_stage(Stage s) { return s == Stage::done ? Stage::done : static_cast<Stage>(static_cast<int>(s) + 1); }

std::string_view to_string(TicketStatus s) {
  switch (s) {
    case TicketStatus::pending: return "pending";
    case TicketStatus::in_flight: return "in_flight";
    case TicketStatus::failed: return "failed";
    case TicketStatus::dead_letter: return "dead_letter";
    case TicketStatus::complete: return "complete";
  }
  return "pending";
}

Json to_json(const PipelineTicket& t) {
  Json attempts = Json::object();
  for (const auto& [stage, n] : t.attempts) attempts[std::string(to_string(stage))] = n;
  Json j{{"doc_id", t.doc_id},
         {"doc_version", t.doc_version},
         {"current_stage", to_string(t.current_stage)},
         {"attempts", attempts},
         {"status", to_string(t.status)},
         {"enqueued_at", format_timestamp(t.enqueued_at)},
         {"updated_at", format_timestamp(t.updated_at)}};
  if (!t.last_error.empty()) j["last_error"] = t.last_error;
  return j;
}

Pipeline::Pipeline(StageHandler handler, PipelineConfig config) : handler_(std::move(handler)), config_(config) {
  if (config_.workers < 1) config_.workers = 1;
}

Pipeline::~Pipeline() {
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
  }
  work_cv_.notify_all();
  for (auto& t : workers_) t.join();
}

void Pipeline::set_fault_hook(FaultHook hook) {
  std::lock_guard lock(mutex_);
  fault_hook_ = std::move(hook);
}

std::chrono::milliseconds Pipeline::backoff(std::chrono::milliseconds base, int attempts) {
  return base * (std::int64_t{1} << std::max(0, attempts - 1));
}

void Pipeline::schedule(Entry& e, std::chrono::milliseconds delay) {
  e.token = seq_++;
  queue_.push({std::chrono::steady_clock::now() + delay, e.token, e.ticket.doc_id, e.ticket.doc_version});
  work_cv_.notify_one();
}

PipelineTicket Pipeline::submit(const Document& doc) {
  std::lock_guard lock(mutex_);
  if (auto it = entries_.find(doc.id); it != entries_.end() && it->second.ticket.doc_version >= doc.version)
    return it->second.ticket;
  const auto now = Clock::now();
  Entry e;
  e.doc = doc;
  e.ticket.doc_id = doc.id;
  e.ticket.doc_version = doc.version;
  e.ticket.enqueued_at = now;
  e.ticket.updated_at = now;
  auto& stored = entries_.insert_or_assign(doc.id, std::move(e)).first->second;
  schedule(stored, std::chrono::milliseconds(0));
  return stored.ticket;
}

StageResult Pipeline::run_handler(const Document& doc, Stage stage, const PipelineTicket& snapshot) {
  StageResult r;
  try {
    r = handler_(doc, stage);
  } catch (const Error& e) {
    return {StageOutcome::fatal_error, e.what()};
  } catch (const std::exception& e) {
    return {StageOutcome::retryable_error, e.what()};
  }
  FaultHook hook;
  {
    std::lock_guard lock(mutex_);
    hook = fault_hook_;
  }
  if (r.outcome == StageOutcome::ok && hook && hook(snapshot, stage)) return {StageOutcome::retryable_error, "injected fault"};
  return r;
}

FailureAction Pipeline::record_failure(Entry& e, Stage stage, bool fatal, const std::string& message) {
  auto& t = e.ticket;
  const int n = ++t.attempts[stage];
  t.updated_at = Clock::now();
  t.last_error = message;
  if (fatal || n > config_.max_retries) {
    t.status = TicketStatus::dead_letter;
    return {true, std::chrono::milliseconds(0)};
  }
  t.status = TicketStatus::failed;
  return {false, backoff(config_.base_delay, n)};
}

std::optional<std::chrono::milliseconds> Pipeline::apply_result(Entry& e, Stage stage, const StageResult& r) {
  auto& t = e.ticket;
  if (r.outcome == StageOutcome::ok) {
    log_[{t.doc_id, t.doc_version}].push_back(stage);
    t.current_stage = next_stage(stage);
    t.updated_at = Clock::now();
    t.last_error.clear();
    if (t.current_stage == Stage::done) {
      t.status = TicketStatus::complete;
      return std::nullopt;
    }
    t.status = TicketStatus::pending;
    return std::chrono::milliseconds(0);
  }
  auto action = record_failure(e, stage, r.outcome == StageOutcome::fatal_error, r.message);
  if (action.dead_letter) return std::nullopt;
  return action.delay;
}

StageResult Pipeline::execute_stage(std::string_view doc_id, Stage stage) {
  Document doc;
  PipelineTicket snapshot;
  {
    std::lock_guard lock(mutex_);
    auto it = entries_.find(doc_id);
    if (it == entries_.end()) throw Error(ErrorCode::UnknownDocument, std::string(doc_id));
    auto& t = it->second.ticket;
    if (t.current_stage != stage)
      throw Error(ErrorCode::StageMismatch, "ticket is at " + std::string(to_string(t.current_stage)) + ", not " +
                                                std::string(to_string(stage)));
    if (t.status != TicketStatus::pending && t.status != TicketStatus::failed)
      throw Error(ErrorCode::StageMismatch, "ticket status is " + std::string(to_string(t.status)));
    t.status = TicketStatus::in_flight;
    ++in_flight_;
    doc = it->second.doc;
    snapshot = t;
  }
  const auto r = run_handler(doc, stage, snapshot);
  std::lock_guard lock(mutex_);
  --in_flight_;
  auto it = entries_.find(doc_id);
  if (it != entries_.end() && it->second.ticket.doc_version == snapshot.doc_version) {
    if (auto delay = apply_result(it->second, stage, r)) schedule(it->second, *delay);
  }
  idle_cv_.notify_all();
  return r;
}

FailureAction Pipeline::handle_failure(std::string_view doc_id, Stage stage, bool fatal) {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(doc_id);
  if (it == entries_.end()) throw Error(ErrorCode::UnknownDocument, std::string(doc_id));
  if (it->second.ticket.current_stage != stage) throw Error(ErrorCode::StageMismatch, std::string(to_string(stage)));
  auto action = record_failure(it->second, stage, fatal, fatal ? "fatal error" : "retryable error");
  if (!action.dead_letter) schedule(it->second, action.delay);
  return action;
}

void Pipeline::start_workers() {
  if (!workers_.empty()) return;
  for (int i = 0; i < config_.workers; ++i) workers_.emplace_back([this] { worker_loop(); });
}

void Pipeline::worker_loop() {
  std::unique_lock lock(mutex_);
  while (!stopping_) {
    if (queue_.empty()) {
      work_cv_.wait(lock);
      continue;
    }
    if (queue_.top().ready > std::chrono::steady_clock::now()) {
      work_cv_.wait_until(lock, queue_.top().ready);
      continue;
    }
    const Scheduled item = queue_.top();
    queue_.pop();
    auto it = entries_.find(item.doc_id);
    const bool runnable = it != entries_.end() && it->second.token == item.seq &&
                          it->second.ticket.doc_version == item.version &&
                          (it->second.ticket.status == TicketStatus::pending ||
                           it->second.ticket.status == TicketStatus::failed) &&
                          it->second.ticket.current_stage != Stage::done;
    if (!runnable) {
      if (queue_.empty() && in_flight_ == 0) idle_cv_.notify_all();
      continue;
    }
    auto& t = it->second.ticket;
    const Stage stage = t.current_stage;
    t.status = TicketStatus::in_flight;
    t.updated_at = Clock::now();
    ++in_flight_;
    const Document doc = it->second.doc;
    const PipelineTicket snapshot = t;
    lock.unlock();

    const auto r = run_handler(doc, stage, snapshot);

    lock.lock();
    --in_flight_;
    it = entries_.find(item.doc_id);
    if (it != entries_.end() && it->second.ticket.doc_version == item.version) {
      if (auto delay = apply_result(it->second, stage, r)) schedule(it->second, *delay);
    }
    if (queue_.empty() && in_flight_ == 0) idle_cv_.notify_all();
  }
}

void Pipeline::drain() {
  std::unique_lock lock(mutex_);
  start_workers();
  work_cv_.notify_all();
  idle_cv_.wait(lock, [this] { return queue_.empty() && in_flight_ == 0; });
}

std::size_t Pipeline::redrive_dead_letters() {
  std::lock_guard lock(mutex_);
  std::size_t n = 0;
  for (auto& [id, e] : entries_) {
    auto& t = e.ticket;
    if (t.status != TicketStatus::dead_letter) continue;
    t.attempts[t.current_stage] = 0;
    t.status = TicketStatus::pending;
    t.updated_at = Clock::now();
    schedule(e, std::chrono::milliseconds(0));
    ++n;
  }
  return n;
}

PipelineTicket Pipeline::status(std::string_view doc_id) const {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(doc_id);
  if (it == entries_.end()) throw Error(ErrorCode::UnknownDocument, std::string(doc_id));
  return it->second.ticket;
}

std::vector<PipelineTicket> Pipeline::tickets() const {
  std::lock_guard lock(mutex_);
  std::vector<PipelineTicket> out;
  for (const auto& [id, e] : entries_) out.push_back(e.ticket);
  return out;
}

std::map<std::pair<std::string, std::int64_t>, std::vector<Stage>> Pipeline::stage_log() const {
  std::lock_guard lock(mutex_);
  return log_;
}

}  // namespace nav
