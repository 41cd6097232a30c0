#pragma once

#include <array>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <queue>
#include <string>
#include <string_view>
#include <thread>
#include <tuple>
#include <vector>

#include "nav/corpus.hpp"

namespace nav {

enum class Stage { parse, ref_extract, ref_link, ner, concept_link, embed, index_keyword, index_vector, done };

inline constexpr std::array<Stage, 9> kStageOrder = {Stage::parse,        Stage::ref_extract,   Stage::ref_link,
                                                     Stage::ner,          Stage::concept_link,  Stage::embed,
                                                     Stage::index_keyword, Stage::index_vector, Stage::done};

std::string_view to_string(Stage s);
bool parse_stage(std::string_view s, Stage& out);
Stage next_stage(Stage s);

enum class TicketStatus { pending, in_flight, failed, dead_letter, complete };
std::string_view to_string(TicketStatus s);

using Clock = std::chrono::system_clock;

struct PipelineTicket {
  std::string doc_id;
  std::int64_t doc_version = 1;
  Stage current_stage = Stage::parse;
  std::map<Stage, int> attempts;
  TicketStatus status = TicketStatus::pending;
  Clock::time_point enqueued_at{};
  Clock::time_point updated_at{};
  std::string last_error;
};

Json to_json(const PipelineTicket& t);

enum class StageOutcome { ok, retryable_error, fatal_error };

struct StageResult {
  StageOutcome outcome = StageOutcome::ok;
  std::string message;
};

/// Runs one stage for one document. Must be idempotent per (doc_id, version, stage).
/// A thrown nav::Error counts as fatal, any other exception as retryable.
using StageHandler = std::function<StageResult(const Document&, Stage)>;

/// Called after a handler succeeded; returning true turns the success into a
/// retryable failure. Used to exercise the retry path.
using FaultHook = std::function<bool(const PipelineTicket&, Stage)>;

struct PipelineConfig {
  int max_retries = 3;
  std::chrono::milliseconds base_delay{100};
  int workers = 2;
};

struct FailureAction {
  bool dead_letter = false;
  std::chrono::milliseconds delay{0};
};

/// In-process staged queue with at-least-once delivery. Stages of one
/// (doc_id, version) run strictly in order; distinct documents run in
/// parallel on the worker pool.
class Pipeline {
public:
  Pipeline(StageHandler handler, PipelineConfig config = {});
  ~Pipeline();
  Pipeline(const Pipeline&) = delete;
  Pipeline& operator=(const Pipeline&) = delete;

  void set_fault_hook(FaultHook hook);

  /// Same (id, version) returns the existing ticket; a higher version
  /// restarts from parse; a lower one is ignored.
  PipelineTicket submit(const Document& doc);

  /// Runs `stage` synchronously for the doc's live ticket. Throws
  /// Error{StageMismatch} if the ticket is elsewhere or not runnable,
  /// Error{UnknownDocument} for an unknown id.
  StageResult execute_stage(std::string_view doc_id, Stage stage);

  /// Records a retryable (or fatal) failure and decides the follow-up.
  FailureAction handle_failure(std::string_view doc_id, Stage stage, bool fatal = false);

  /// Starts the worker pool if needed and blocks until nothing is queued
  /// or in flight.
  void drain();
  /// Re-queues dead-lettered tickets at their failed stage with a fresh
  /// retry budget; returns how many were re-queued.
  std::size_t redrive_dead_letters();

  PipelineTicket status(std::string_view doc_id) const;
  std::vector<PipelineTicket> tickets() const;

  /// Stages completed per (doc_id, version), in execution order.
  std::map<std::pair<std::string, std::int64_t>, std::vector<Stage>> stage_log() const;

  static std::chrono::milliseconds backoff(std::chrono::milliseconds base, int attempts);

private:
  struct Entry {
    PipelineTicket ticket;
    Document doc;
    std::uint64_t token = 0;  // seq of the one live queue item
  };
  struct Scheduled {
    std::chrono::steady_clock::time_point ready;
    std::uint64_t seq;
    std::string doc_id;
    std::int64_t version;
    bool operator>(const Scheduled& o) const { return std::tie(ready, seq) > std::tie(o.ready, o.seq); }
  };

  void start_workers();
  void worker_loop();
  StageResult run_handler(const Document& doc, Stage stage, const PipelineTicket& snapshot);
  // Applies a handler result; caller holds mutex_. Returns the requeue delay, if any.
  std::optional<std::chrono::milliseconds> apply_result(Entry& e, Stage stage, const StageResult& r);
  FailureAction record_failure(Entry& e, Stage stage, bool fatal, const std::string& message);
  void schedule(Entry& e, std::chrono::milliseconds delay);

  StageHandler handler_;
  PipelineConfig config_;
  FaultHook fault_hook_;

  mutable std::mutex mutex_;
  std::condition_variable work_cv_;
  std::condition_variable idle_cv_;
  std::map<std::string, Entry, std::less<>> entries_;
  std::priority_queue<Scheduled, std::vector<Scheduled>, std::greater<>> queue_;
  std::map<std::pair<std::string, std::int64_t>, std::vector<Stage>> log_;
  std::uint64_t seq_ = 0;
  std::size_t in_flight_ = 0;
  bool stopping_ = false;
  std::vector<std::thread> workers_;
};

}  // namespace nav
