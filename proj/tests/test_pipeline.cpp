#include <doctest.h>

#include <atomic>
#include <mutex>
#include <set>

#include "nav/error.hpp"
#include "nav/pipeline.hpp"
#include "support.hpp"

using namespace nav;
using namespace std::chrono_literals;

namespace {

Document doc(const std::string& id, std::int64_t version = 1) {
  Document d;
  d.id = id;
  d.version = version;
  d.title = "t";
  d.published_at = navtest::kToday;
  return d;
}

PipelineConfig fast() {
  PipelineConfig c;
  c.base_delay = 1ms;
  c.workers = 2;
  return c;
}

// Handler that counts calls per (doc, stage) and fails according to a rule.
struct Recorder {
  std::mutex mu;
  std::map<std::pair<std::string, Stage>, int> calls;
  std::function<StageResult(const Document&, Stage, int)> rule = [](const Document&, Stage, int) {
    return StageResult{};
  };

  StageHandler handler() {
    return [this](const Document& d, Stage s) {
      int n;
      {
        std::lock_guard lock(mu);
        n = ++calls[{d.id, s}];
      }
      return rule(d, s, n);
    };
  }
};

const std::vector<Stage> kAllStages(kStageOrder.begin(), kStageOrder.end() - 1);

}  // namespace

TEST_CASE("stage order and backoff") {
  CHECK(next_stage(Stage::parse) == Stage::ref_extract);
  CHECK(next_stage(Stage::index_vector) == Stage::done);
  Stage s{};
  CHECK(parse_stage("concept_link", s));
  CHECK(s == Stage::concept_link);
  CHECK_FALSE(parse_stage("nope", s));
  CHECK(Pipeline::backoff(100ms, 1) == 100ms);
  CHECK(Pipeline::backoff(100ms, 2) == 200ms);
  CHECK(Pipeline::backoff(100ms, 3) == 400ms);
}

TEST_CASE("happy path: every stage once, in order") {
  Recorder rec;
  Pipeline p(rec.handler(), fast());
  for (int i = 0; i < 20; ++i) p.submit(doc("d" + std::to_string(i)));
  p.drain();
  for (const auto& t : p.tickets()) {
    CHECK(t.status == TicketStatus::complete);
    CHECK(t.current_stage == Stage::done);
  }
  auto log = p.stage_log();
  CHECK(log.size() == 20);
  for (const auto& [key, stages] : log) CHECK(stages == kAllStages);
  // resubmitting the same version is a no-op
  auto t = p.submit(doc("d0"));
  CHECK(t.status == TicketStatus::complete);
  p.drain();
  CHECK(rec.calls[{"d0", Stage::parse}] == 1);
}

TEST_CASE("retryable failures back off and then succeed") {
  Recorder rec;
  rec.rule = [](const Document&, Stage s, int n) {
    if (s == Stage::ner && n <= 2) return StageResult{StageOutcome::retryable_error, "flaky"};
    return StageResult{};
  };
  Pipeline p(rec.handler(), fast());
  p.submit(doc("a"));
  p.drain();
  auto t = p.status("a");
  CHECK(t.status == TicketStatus::complete);
  CHECK(t.attempts[Stage::ner] == 2);
  CHECK(p.stage_log().at({"a", 1}) == kAllStages);
}

TEST_CASE("exhausted retries dead-letter at the failing stage; redrive resumes there") {
  Recorder rec;
  std::atomic<bool> broken{true};
  rec.rule = [&](const Document&, Stage s, int) {
    if (s == Stage::embed && broken) return StageResult{StageOutcome::retryable_error, "embedder down"};
    return StageResult{};
  };
  Pipeline p(rec.handler(), fast());
  p.submit(doc("a"));
  p.drain();
  auto t = p.status("a");
  CHECK(t.status == TicketStatus::dead_letter);
  CHECK(t.current_stage == Stage::embed);
  CHECK(t.attempts[Stage::embed] == 4);  // first try plus three retries
  CHECK(t.last_error == "embedder down");
  CHECK(rec.calls[{"a", Stage::embed}] == 4);

  broken = false;
  CHECK(p.redrive_dead_letters() == 1);
  p.drain();
  CHECK(p.status("a").status == TicketStatus::complete);
  CHECK(rec.calls[{"a", Stage::parse}] == 1);
  CHECK(p.stage_log().at({"a", 1}) == kAllStages);
  CHECK(p.redrive_dead_letters() == 0);
}

TEST_CASE("fatal errors dead-letter immediately; thrown nav::Error is fatal, others retry") {
  Recorder rec;
  rec.rule = [](const Document& d, Stage s, int n) -> StageResult {
    if (d.id == "fatal" && s == Stage::parse) throw Error(ErrorCode::InvalidDocument, "bad");
    if (d.id == "flaky" && s == Stage::parse && n == 1) throw std::runtime_error("transient");
    if (d.id == "explicit" && s == Stage::ref_link) return {StageOutcome::fatal_error, "no"};
    return {};
  };
  Pipeline p(rec.handler(), fast());
  p.submit(doc("fatal"));
  p.submit(doc("flaky"));
  p.submit(doc("explicit"));
  p.drain();
  CHECK(p.status("fatal").status == TicketStatus::dead_letter);
  CHECK(p.status("fatal").attempts[Stage::parse] == 1);
  CHECK(p.status("flaky").status == TicketStatus::complete);
  CHECK(p.status("explicit").status == TicketStatus::dead_letter);
  CHECK(p.status("explicit").current_stage == Stage::ref_link);
}

TEST_CASE("a newer version supersedes; an older one is ignored") {
  Recorder rec;
  Pipeline p(rec.handler(), fast());
  p.submit(doc("a", 1));
  p.drain();
  auto t2 = p.submit(doc("a", 2));
  CHECK(t2.doc_version == 2);
  CHECK(t2.current_stage == Stage::parse);
  auto stale = p.submit(doc("a", 1));
  CHECK(stale.doc_version == 2);
  p.drain();
  CHECK(p.status("a").status == TicketStatus::complete);
  CHECK(p.status("a").doc_version == 2);
  CHECK(p.stage_log().at({"a", 2}) == kAllStages);
}

TEST_CASE("synchronous execute_stage and handle_failure") {
  Recorder rec;
  Pipeline p(rec.handler(), fast());
  p.submit(doc("a"));
  CHECK(p.execute_stage("a", Stage::parse).outcome == StageOutcome::ok);
  CHECK(p.status("a").current_stage == Stage::ref_extract);
  CHECK_THROWS_AS(p.execute_stage("a", Stage::parse), Error);
  CHECK_THROWS_AS(p.execute_stage("zzz", Stage::parse), Error);

  auto action = p.handle_failure("a", Stage::ref_extract);
  CHECK_FALSE(action.dead_letter);
  CHECK(action.delay == 1ms);
  CHECK(p.handle_failure("a", Stage::ref_extract).delay == 2ms);
  CHECK(p.status("a").status == TicketStatus::failed);
  CHECK(p.handle_failure("a", Stage::ref_extract, true).dead_letter);
  CHECK(p.status("a").status == TicketStatus::dead_letter);
  CHECK_THROWS_AS(p.handle_failure("a", Stage::embed), Error);
}

TEST_CASE("fault hook turns successes into retries without losing stages") {
  Recorder rec;
  Pipeline p(rec.handler(), fast());
  std::mutex mu;
  std::set<std::pair<std::string, Stage>> faulted;
  p.set_fault_hook([&](const PipelineTicket& t, Stage s) {
    std::lock_guard lock(mu);
    return faulted.insert({t.doc_id, s}).second;  // fail each stage exactly once
  });
  for (int i = 0; i < 10; ++i) p.submit(doc("d" + std::to_string(i)));
  p.drain();
  for (const auto& t : p.tickets()) {
    CHECK(t.status == TicketStatus::complete);
    for (auto s : kAllStages) CHECK(t.attempts.at(s) == 1);
  }
  for (const auto& [key, stages] : p.stage_log()) CHECK(stages == kAllStages);
  CHECK(rec.calls[{"d3", Stage::embed}] == 2);
}
