#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "vgbench/clock.hpp"
#include "vgbench/conversation.hpp"
#include "vgbench/corpus.hpp"
#include "vgbench/gateway.hpp"
#include "vgbench/judge.hpp"
#include "vgbench/metrics.hpp"

namespace vgbench {

struct RunManifest {
  std::string run_id;
  std::string corpus_hash;
  CorpusFilter filter;
  std::size_t case_count = 0;
  std::string sut_name;
  std::string sut_version;
  std::string sut_model;
  GatewayMode mode = GatewayMode::Replay;
  std::string actor_model;
  std::optional<std::string> judge_model;
  std::optional<std::string> actor_cassette;
  std::optional<std::string> sut_cassette;
  std::string guideline_version;
  int max_turns = 60;
  int retries = 3;
  long long timeout_ms = 60'000;
  std::optional<RateLimit> rate_limit;
  int workers = 1;
  std::string started_at;
  std::optional<std::string> ended_at;

  bool closed() const noexcept { return ended_at.has_value(); }
  bool operator==(const RunManifest& o) const;
};

nlohmann::json to_json(const RunManifest& m);
/// Throws Error(CorruptManifest).
RunManifest run_manifest_from_json(const nlohmann::json& j);

/// Throws Error(InvalidConfig) for an empty id or corpus hash, or replay
/// mode without cassettes.
void validate_manifest(const RunManifest& m);

/// Time-ordered id: "20261015T093000123Z-" followed by six random hex digits.
std::string make_run_id(TimePoint now);

struct LoadedRun {
  RunManifest manifest;
  /// One per transcript file, in case-id order. Transcripts without an end
  /// record stay in_progress.
  std::vector<Conversation> conversations;
  /// Latest verdict per case, in case-id order.
  std::vector<CaseJudgment> verdicts;
  /// Every verdict record in append order.
  std::vector<CaseJudgment> verdict_log;
  std::map<ReportFormat, std::string> reports;
  std::optional<Corpus> corpus;
  std::optional<BaselineTable> baseline;
  /// Unreadable records skipped during the load (torn tails).
  std::size_t skipped_records = 0;
  /// Not closed, records skipped, or a transcript without an end record.
  bool partial = false;
};

/// Report over a loaded run: stored verdicts, transcripts, corpus snapshot
/// and baseline snapshot. Throws Error(CorruptManifest) without a corpus
/// snapshot.
BenchmarkReport aggregate_run(const LoadedRun& run);

/// Plain-file run storage under `root`:
///   <root>/<run_id>/manifest.json
///   <root>/<run_id>/transcripts/<case_id>.jsonl
///   <root>/<run_id>/verdicts.jsonl
///   <root>/<run_id>/report.{txt,csv,md}
///   <root>/<run_id>/corpus.jsonl, baseline.tsv (snapshots)
/// Appends are single O_APPEND writes followed by fsync.
class RunStore {
 public:
  explicit RunStore(std::filesystem::path root);

  const std::filesystem::path& root() const noexcept { return root_; }
  std::filesystem::path run_dir(std::string_view run_id) const;

  /// Creates the skeleton and writes the manifest first. Throws
  /// Error(RunExists) or Error(InvalidConfig).
  RunManifest open_run(const RunManifest& m);

  void begin_transcript(std::string_view run_id, std::string_view case_id);
  void append_turn(std::string_view run_id, std::string_view case_id, const Turn& t);
  void end_transcript(std::string_view run_id, const Conversation& c);
  /// Whole transcript in one call (start, turns, end).
  void write_conversation(std::string_view run_id, const Conversation& c);

  /// Allowed after close: adjudication continues on finished runs.
  void append_verdict(std::string_view run_id, const CaseJudgment& j);

  void write_report(std::string_view run_id, ReportFormat f, std::string_view bytes);
  void write_corpus_snapshot(std::string_view run_id, const Corpus& corpus);
  void write_baseline_snapshot(std::string_view run_id, std::string_view tsv);

  /// Stamps ended_at and rewrites the manifest atomically.
  RunManifest close_run(std::string_view run_id, std::string ended_at);

  RunManifest manifest(std::string_view run_id) const;
  LoadedRun load_run(std::string_view run_id) const;
  std::vector<RunManifest> list_runs() const;
  bool exists(std::string_view run_id) const;

 private:
  void require_open(std::string_view run_id) const;
  std::filesystem::path transcript_path(std::string_view run_id, std::string_view case_id) const;

  std::filesystem::path root_;
  mutable std::mutex verdict_mu_;
};

/// Appends `bytes` with O_APPEND and fsyncs. Throws Error(Io).
void append_durable(const std::filesystem::path& path, std::string_view bytes);
/// Writes to a sibling temp file, fsyncs and renames over `path`.
void write_atomic(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

}  // namespace vgbench
