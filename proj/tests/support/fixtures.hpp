#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "vgbench/corpus.hpp"
#include "vgbench/gateway.hpp"
#include "vgbench/judge.hpp"
#include "vgbench/orchestrator.hpp"

#include "commands.hpp"

namespace vgbench::fixtures {

std::filesystem::path data_dir();
std::filesystem::path fixture_dir();

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline constexpr const char* kFixtureSutModel = "fixture-sut";
inline constexpr const char* kFixtureActorModel = "patient-actor";

/// Scripted messages for one conversation.
struct Script {
  std::vector<std::string> patient;
  std::vector<std::string> ai;
};

std::map<std::string, Script> load_scripts(const std::filesystem::path& path);

/// Answers from a script, keyed by conversation id and turn index. Records
/// the fingerprint of every request it serves.
class ScriptedProvider : public ChatProvider {
 public:
  ScriptedProvider(std::map<std::string, Script> scripts, Speaker role);

  ChatResponse complete(const ChatRequest& req, std::chrono::milliseconds timeout) override;

  /// Fingerprint served for (conversation, turn index).
  std::string fingerprint_at(const std::string& id, int turn_index) const;
  int calls() const;

 private:
  std::map<std::string, Script> scripts_;
  Speaker role_;
  mutable std::mutex mu_;
  std::map<std::pair<std::string, int>, std::string> served_;
  int calls_ = 0;
};

struct FixtureCassettes {
  std::string actor;
  std::string sut;
  /// `sut` without the second SUT reply of uro-001.
  std::string sut_partial;
};

/// Replay configuration over the bundled cassettes. `sut_cassette` is a file
/// name inside the fixture directory.
cli::HarnessConfig replay_config(const std::filesystem::path& runs_dir, const std::string& run_id,
                                 const std::string& corpus = "vignettes.jsonl",
                                 const std::string& sut_cassette = "sut.cassette");

SystemUnderTest fixture_sut(std::shared_ptr<const ModelGateway> gateway);
LoopPolicy fixture_policy();

/// Records every scripted conversation of `corpus` through the real
/// orchestrator and returns the resulting cassettes.
FixtureCassettes record_fixture_cassettes(const Corpus& corpus, const std::map<std::string, Script>& scripts);

// ---- 400-case table fixture -----------------------------------------------

struct ReferenceCounts {
  Specialty specialty;
  int total, top1, top2, referral;
};

/// Per-specialty counts the harness must reproduce.
const std::vector<ReferenceCounts>& reference_counts();

enum class Outcome { Top1, Top2Only, Miss };

struct TableCase {
  Outcome outcome;
  bool referral_correct;
};

struct TableFixture {
  Corpus corpus;
  std::vector<TableCase> cases;  // parallel to corpus.vignettes()
};

/// Synthetic 400-case corpus whose labelled verdicts reproduce the
/// per-specialty and per-incidence counts.
TableFixture make_table_fixture();

/// Automated judgments realising the labelled outcomes.
std::vector<CaseJudgment> table_judgments(const TableFixture& f);

CaseJudgment make_judgment(const std::string& id, MatchRule top1, MatchRule top2, std::optional<bool> referral);

}  // namespace vgbench::fixtures
