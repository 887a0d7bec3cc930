#include <algorithm>
#include <fstream>
#include <regex>
#include <thread>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "vgbench/error.hpp"
#include "vgbench/run_store.hpp"

using namespace vgbench;
namespace fs = std::filesystem;

namespace {

RunManifest manifest(const std::string& id, const Corpus& corpus) {
  RunManifest m;
  m.run_id = id;
  m.corpus_hash = corpus.hash();
  m.case_count = corpus.size();
  m.sut_name = "fixture";
  m.sut_version = "1";
  m.sut_model = fixtures::kFixtureSutModel;
  m.mode = GatewayMode::Replay;
  m.actor_model = fixtures::kFixtureActorModel;
  m.actor_cassette = "actor.cassette";
  m.sut_cassette = "sut.cassette";
  m.guideline_version = "patient-actor-guidelines/1";
  m.started_at = "2026-10-15T09:00:00.000Z";
  return m;
}

const Corpus& trio() {
  static const auto c = load_corpus(fixtures::fixture_dir() / "vignettes.jsonl");
  return c;
}

Conversation sample(const std::string& id, TerminalState end = TerminalState::ClosedNormally) {
  Conversation c(id, "r1");
  c.append("My shoulder hurts.", "2026-10-15T09:00:01.000Z",
           {LintViolation{GuidelineRule::R3, 0, "volunteered", Severity::Warn}});
  c.append("Since when?", "2026-10-15T09:00:02.000Z");
  c.append("A week. Thanks!", "2026-10-15T09:00:03.000Z");
  c.finish(end, end == TerminalState::GatewayFailure ? std::optional<std::string>("boom") : std::nullopt);
  return c;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error";
  return ErrorCode::Io;
}

}  // namespace

TEST(RunStore, WriteLoadRoundTrip) {
  fixtures::TempDir dir;
  RunStore store(dir.path());
  store.open_run(manifest("r1", trio()));
  store.write_corpus_snapshot("r1", trio());
  store.write_baseline_snapshot("r1", "Dermatology\t28\n");
  const std::vector<Conversation> convs = {sample("derm-001"), sample("ortho-001", TerminalState::GatewayFailure)};
  for (const auto& c : convs) store.write_conversation("r1", c);
  const auto j1 = fixtures::make_judgment("derm-001", MatchRule::M1, MatchRule::M1, true);
  store.append_verdict("r1", j1);
  store.write_report("r1", ReportFormat::Csv, "csv bytes");
  store.close_run("r1", "2026-10-15T10:00:00.000Z");

  const auto run = store.load_run("r1");
  EXPECT_EQ(run.manifest.run_id, "r1");
  EXPECT_TRUE(run.manifest.closed());
  ASSERT_EQ(run.conversations.size(), 2u);
  EXPECT_EQ(run.conversations[0], convs[0]);
  EXPECT_EQ(run.conversations[1], convs[1]);
  ASSERT_EQ(run.verdicts.size(), 1u);
  EXPECT_EQ(run.verdicts[0], j1);
  EXPECT_EQ(run.reports.at(ReportFormat::Csv), "csv bytes");
  ASSERT_TRUE(run.corpus.has_value());
  EXPECT_EQ(run.corpus->vignettes(), trio().vignettes());
  ASSERT_TRUE(run.baseline.has_value());
  EXPECT_FALSE(run.partial);
  EXPECT_EQ(run.skipped_records, 0u);
}

TEST(RunStore, RoundTripOverReplayedFixtureRun) {
  // every transcript of a random-ish run survives write and load unchanged
  fixtures::TempDir dir;
  RunStore store(dir.path());
  store.open_run(manifest("r1", trio()));
  std::vector<Conversation> written;
  for (const auto& v : trio()) {
    Conversation c(v.id, "r1");
    for (int i = 0; i < 7; ++i) c.append("turn " + std::to_string(i) + (i % 3 ? "?" : "") + " \"quoted\"\n", "ts");
    c.finish(TerminalState::MaxTurnsReached);
    store.write_conversation("r1", c);
    written.push_back(c);
  }
  std::sort(written.begin(), written.end(),
            [](const Conversation& a, const Conversation& b) { return a.vignette_id() < b.vignette_id(); });
  const auto run = store.load_run("r1");
  EXPECT_EQ(run.conversations, written);
}

TEST(RunStore, LatestVerdictWinsAndLogKeepsAll) {
  fixtures::TempDir dir;
  RunStore store(dir.path());
  store.open_run(manifest("r1", trio()));
  const auto automated = fixtures::make_judgment("uro-001", MatchRule::Unresolved, MatchRule::Unresolved, true);
  store.append_verdict("r1", automated);
  const auto human = apply_human_verdict(automated, {MatchRule::M4, MatchRule::M4, true, "ok"}, "dr", "t");
  store.append_verdict("r1", human);
  const auto run = store.load_run("r1");
  ASSERT_EQ(run.verdicts.size(), 1u);
  EXPECT_EQ(run.verdicts[0].judge_kind, JudgeKind::Human);
  EXPECT_EQ(run.verdict_log.size(), 2u);
}

TEST(RunStore, TornTailIsSkippedAndMarksPartial) {
  fixtures::TempDir dir;
  RunStore store(dir.path());
  store.open_run(manifest("r1", trio()));
  store.begin_transcript("r1", "derm-001");
  Conversation c("derm-001", "r1");
  store.append_turn("r1", "derm-001", c.append("My hands itch.", "t"));
  // a crash mid-write leaves half a record
  {
    std::ofstream out(store.run_dir("r1") / "transcripts" / "derm-001.jsonl", std::ios::app);
    out << R"({"record":"turn","index":1,"ro)";
  }
  const auto run = store.load_run("r1");
  ASSERT_EQ(run.conversations.size(), 1u);
  EXPECT_EQ(run.conversations[0].size(), 1u);
  EXPECT_EQ(run.conversations[0].terminal_state(), TerminalState::InProgress);
  EXPECT_EQ(run.skipped_records, 1u);
  EXPECT_TRUE(run.partial);
}

TEST(RunStore, RefusesToReuseARunId) {
  fixtures::TempDir dir;
  RunStore store(dir.path());
  store.open_run(manifest("r1", trio()));
  EXPECT_EQ(code_of([&] { store.open_run(manifest("r1", trio())); }), ErrorCode::RunExists);
}

TEST(RunStore, ClosedRunsTakeVerdictsButNoTranscripts) {
  fixtures::TempDir dir;
  RunStore store(dir.path());
  store.open_run(manifest("r1", trio()));
  store.close_run("r1", "end");
  EXPECT_THROW(store.write_conversation("r1", sample("derm-001")), Error);
  EXPECT_NO_THROW(store.append_verdict("r1", fixtures::make_judgment("derm-001", MatchRule::M1, MatchRule::M1, true)));
  EXPECT_THROW(store.close_run("r1", "again"), Error);
}

TEST(RunStore, UnknownRunAndCorruptManifest) {
  fixtures::TempDir dir;
  RunStore store(dir.path());
  EXPECT_EQ(code_of([&] { store.load_run("nope"); }), ErrorCode::UnknownRun);
  store.open_run(manifest("r1", trio()));
  {
    std::ofstream out(store.run_dir("r1") / "manifest.json", std::ios::trunc);
    out << "{ not json";
  }
  EXPECT_EQ(code_of([&] { store.manifest("r1"); }), ErrorCode::CorruptManifest);
}

TEST(RunStore, RejectsPathLikeIds) {
  fixtures::TempDir dir;
  RunStore store(dir.path());
  EXPECT_THROW(store.open_run(manifest("../escape", trio())), Error);
  store.open_run(manifest("r1", trio()));
  // case ids are escaped into plain file names
  store.begin_transcript("r1", "../../x");
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(store.run_dir("r1") / "transcripts")) {
    EXPECT_EQ(e.path().parent_path().filename(), "transcripts");
    ++files;
  }
  EXPECT_EQ(files, 1u);
  EXPECT_FALSE(fs::exists(dir.path().parent_path() / "x.jsonl"));
}

TEST(RunStore, ListRunsSortedById) {
  fixtures::TempDir dir;
  RunStore store(dir.path());
  store.open_run(manifest("r2", trio()));
  store.open_run(manifest("r1", trio()));
  fs::create_directories(dir / "not-a-run");
  const auto runs = store.list_runs();
  ASSERT_EQ(runs.size(), 2u);
  EXPECT_EQ(runs[0].run_id, "r1");
  EXPECT_EQ(runs[1].run_id, "r2");
}

TEST(RunStore, ConcurrentTranscriptsAndVerdicts) {
  fixtures::TempDir dir;
  RunStore store(dir.path());
  store.open_run(manifest("r1", trio()));
  std::vector<std::jthread> workers;
  for (int w = 0; w < 8; ++w) {
    workers.emplace_back([&, w] {
      const auto id = "case-" + std::to_string(w);
      Conversation c(id, "r1");
      for (int i = 0; i < 20; ++i) c.append("message " + std::to_string(i), "t");
      c.finish(TerminalState::MaxTurnsReached);
      store.write_conversation("r1", c);
      for (int i = 0; i < 10; ++i) {
        store.append_verdict("r1", fixtures::make_judgment(id, MatchRule::M1, MatchRule::M1, true));
      }
    });
  }
  workers.clear();
  const auto run = store.load_run("r1");
  EXPECT_EQ(run.conversations.size(), 8u);
  for (const auto& c : run.conversations) EXPECT_EQ(c.size(), 20u);
  EXPECT_EQ(run.verdict_log.size(), 80u);
  EXPECT_EQ(run.skipped_records, 0u);
}

TEST(RunManifest, JsonRoundTripAndValidation) {
  auto m = manifest("r1", trio());
  m.rate_limit = RateLimit{5, std::chrono::milliseconds{1000}};
  m.filter.specialty = Specialty::Urology;
  m.judge_model = "judge";
  EXPECT_EQ(run_manifest_from_json(to_json(m)), m);
  EXPECT_EQ(code_of([] { run_manifest_from_json(nlohmann::json{{"run_id", 1}}); }), ErrorCode::CorruptManifest);
  auto bad = m;
  bad.sut_cassette.reset();
  EXPECT_EQ(code_of([&] { validate_manifest(bad); }), ErrorCode::InvalidConfig);
  bad = m;
  bad.corpus_hash.clear();
  EXPECT_EQ(code_of([&] { validate_manifest(bad); }), ErrorCode::InvalidConfig);
}

TEST(RunManifest, RunIdsSortByTime) {
  const TimePoint t{std::chrono::milliseconds{1'760'520'600'123}};
  const auto id = make_run_id(t);
  EXPECT_TRUE(std::regex_match(id, std::regex(R"(\d{8}T\d{9}Z-[0-9a-f]{6})"))) << id;
  EXPECT_EQ(id.substr(0, 19), "20251015T093000123Z");
  EXPECT_LT(make_run_id(t), make_run_id(t + std::chrono::milliseconds{1}));
}

TEST(DurableWrites, AtomicReplaceAndAppend) {
  fixtures::TempDir dir;
  write_atomic(dir / "f.txt", "one");
  write_atomic(dir / "f.txt", "two");
  EXPECT_EQ(read_file(dir / "f.txt"), "two");
  append_durable(dir / "g.txt", "a\n");
  append_durable(dir / "g.txt", "b\n");
  EXPECT_EQ(read_file(dir / "g.txt"), "a\nb\n");
  EXPECT_EQ(code_of([&] { read_file(dir / "missing"); }), ErrorCode::Io);
  EXPECT_EQ(code_of([&] { append_durable(dir / "no" / "such" / "dir", "x"); }), ErrorCode::Io);
}
