#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "vgbench/condition_graph.hpp"
#include "vgbench/conversation.hpp"
#include "vgbench/corpus.hpp"
#include "vgbench/gateway.hpp"

namespace vgbench {

/// Condition name -> referral specialty, curated per repository.
class SpecialtyMap {
 public:
  SpecialtyMap() = default;
  explicit SpecialtyMap(std::map<std::string, Specialty> entries);

  /// Lines "condition<TAB>specialty"; '#' comments allowed. Throws
  /// Error(UnknownSpecialty) or Error(MalformedRecord) naming the line.
  static SpecialtyMap parse(std::string_view tsv);
  static SpecialtyMap load(const std::filesystem::path& path);

  /// Direct hit on the normalized name, else any entry in the same synonym
  /// class of `kg`.
  std::optional<Specialty> lookup(std::string_view condition, const ConditionGraph* kg = nullptr) const;

  /// Gold diagnoses of `corpus` that cannot be mapped.
  std::vector<std::string> uncovered(const Corpus& corpus, const ConditionGraph* kg = nullptr) const;

  const std::map<std::string, Specialty>& entries() const noexcept { return entries_; }

 private:
  std::map<std::string, Specialty> entries_;
};

struct Candidates {
  /// At most two, in order of presentation.
  std::vector<std::string> diagnoses;
  std::optional<Specialty> explicit_referral;
  /// Index of the AI turn the first candidate came from.
  int source_turn = -1;
};

/// Specialist named in free text ("see a cardiologist"), if any.
std::optional<Specialty> find_specialist_referral(std::string_view text);

/// Condition names the extractor recognises: graph names plus map keys.
std::vector<std::string> condition_lexicon(const ConditionGraph& kg, const SpecialtyMap& map);

/// Condition names in `text`, in order, longest match first.
std::vector<std::string> find_conditions(std::string_view text, const std::vector<std::string>& lexicon);

/// Top-two hypotheses from the final assessment-bearing AI turns, plus any
/// explicit specialist recommendation. Throws Error(NoDiagnosisExtracted).
Candidates extract_candidates(const Conversation& c, const std::vector<std::string>& lexicon);

struct ReferralResolution {
  std::optional<Specialty> specialty;
  /// Empty when the referral could not be determined.
  std::optional<bool> correct;
};

ReferralResolution resolve_referral(const Candidates& cand, const ClinicalVignette& v, const SpecialtyMap& map,
                                    const ConditionGraph* kg = nullptr);

enum class JudgeKind { Automated, Human };

std::string_view to_string(JudgeKind k) noexcept;

/// One verdict as it stood at some point; kept as audit history.
struct VerdictRecord {
  MatchVerdict top1;
  MatchVerdict top2;
  std::optional<bool> referral_correct;
  JudgeKind judge_kind = JudgeKind::Automated;
  std::string judge;
  std::string rationale;
  std::string timestamp;

  bool operator==(const VerdictRecord&) const = default;
};

struct CaseJudgment {
  std::string case_id;
  std::vector<std::string> candidates;
  std::optional<Specialty> referral_specialty;
  MatchVerdict top1;
  MatchVerdict top2;
  std::optional<bool> referral_correct;
  JudgeKind judge_kind = JudgeKind::Automated;
  std::string judge;
  std::string rationale;
  std::string timestamp;
  /// Why the case went to the human queue, when it did.
  std::optional<std::string> escalation;
  std::vector<VerdictRecord> history;

  /// Some component still awaits adjudication.
  bool pending() const noexcept { return !top1.resolved() || !top2.resolved() || !referral_correct.has_value(); }
  VerdictRecord current() const;

  bool operator==(const CaseJudgment&) const = default;
};

nlohmann::json to_json(const CaseJudgment& j);
/// Throws Error(MalformedRecord).
CaseJudgment case_judgment_from_json(const nlohmann::json& j);

/// top-2 verdict from the rank-1 and optional rank-2 verdicts: a match if
/// either matches, else unresolved if either is, else the rank-1 verdict.
MatchVerdict combine_top2(MatchVerdict rank1, std::optional<MatchVerdict> rank2);

/// Optional model-backed classifier for pairs the graph cannot decide.
class LlmJudge {
 public:
  LlmJudge(ModelGateway gateway, std::string model, SamplingControls sampling = {0.0, 200});

  /// Asks for one rubric id. Returns Unresolved when the reply names none.
  MatchVerdict classify(std::string_view predicted, std::string_view gold) const;

  ChatRequest request(std::string_view predicted, std::string_view gold) const;
  const std::string& model() const noexcept { return model_; }

  /// Rubric id from a reply such as "RULE: M4".
  static std::optional<MatchRule> parse_reply(std::string_view reply);

 private:
  ModelGateway gateway_;
  std::string model_;
  SamplingControls sampling_;
};

inline constexpr std::string_view kRuleJudgeId = "rules/1";

struct JudgeContext {
  const ConditionGraph& kg;
  const SpecialtyMap& map;
  const LlmJudge* llm = nullptr;
};

/// Automated judgment of one conversation. Extraction failures and
/// unresolved components are flagged through `escalation`, never thrown.
CaseJudgment judge_case(const Conversation& c, const ClinicalVignette& v, const JudgeContext& ctx,
                        std::string timestamp = {});

struct HumanVerdict {
  MatchRule top1 = MatchRule::Unresolved;
  MatchRule top2 = MatchRule::Unresolved;
  std::optional<bool> referral_correct;
  std::string rationale;
};

/// Overrides `current` with a human verdict; the previous verdict moves to
/// history. Throws Error(MalformedRule) for rules outside M1..N3 and
/// Error(InvalidVerdict) when top-1 matches but top-2 does not, or when the
/// referral stays undetermined.
CaseJudgment apply_human_verdict(const CaseJudgment& current, const HumanVerdict& verdict, const std::string& judge,
                                 const std::string& timestamp);

/// Current judgments by case id. Thread-safe.
class JudgmentBook {
 public:
  JudgmentBook() = default;
  explicit JudgmentBook(std::vector<CaseJudgment> judgments);
  JudgmentBook(const JudgmentBook& other);
  JudgmentBook& operator=(const JudgmentBook& other);

  /// Inserts or replaces.
  void put(CaseJudgment j);
  std::optional<CaseJudgment> find(std::string_view case_id) const;
  bool contains(std::string_view case_id) const;

  /// Throws Error(UnknownCase) before validating the verdict.
  CaseJudgment apply_human_verdict(std::string_view case_id, const HumanVerdict& verdict, const std::string& judge,
                                   const std::string& timestamp);

  std::vector<CaseJudgment> all() const;
  std::vector<CaseJudgment> pending() const;
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::map<std::string, CaseJudgment, std::less<>> by_case_;
};

}  // namespace vgbench
