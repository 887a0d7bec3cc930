#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "vgbench/lexicon.hpp"

namespace vgbench {

/// Patient-actor behaviour rules R1..R7.
enum class GuidelineRule { R1, R2, R3, R4, R5, R6, R7 };
enum class Severity { Warn, Fail };

std::string_view to_string(GuidelineRule r) noexcept;
std::string_view to_string(Severity s) noexcept;
std::optional<GuidelineRule> parse_guideline_rule(std::string_view s);

struct LintViolation {
  GuidelineRule rule;
  int turn_index = 0;
  std::string excerpt;
  Severity severity = Severity::Warn;

  bool operator==(const LintViolation&) const = default;
};

enum class Speaker { PatientActor, HealthAi };

std::string_view to_string(Speaker s) noexcept;

struct Turn {
  int index = 0;
  Speaker role = Speaker::PatientActor;
  std::string text;
  std::string timestamp;
  bool contains_question = false;
  std::vector<LintViolation> lint;

  bool operator==(const Turn&) const = default;
};

enum class TerminalState { InProgress, ClosedNormally, MaxTurnsReached, GatewayFailure };

std::string_view to_string(TerminalState s) noexcept;
std::optional<TerminalState> parse_terminal_state(std::string_view s);

/// Alternating transcript; turn 0 is always the patient actor.
class Conversation {
 public:
  Conversation() = default;
  Conversation(std::string vignette_id, std::string run_id);

  /// Appends the next turn. The role is implied by the position; the index,
  /// role and question flag are filled in here.
  const Turn& append(std::string text, std::string timestamp, std::vector<LintViolation> lint = {});

  /// Appends a turn read back from storage. Throws Error(MalformedRecord)
  /// when index, role or question flag break the invariants.
  void restore(Turn turn);

  void finish(TerminalState state, std::optional<std::string> failure = std::nullopt);

  const std::string& id() const noexcept { return vignette_id_; }
  const std::string& vignette_id() const noexcept { return vignette_id_; }
  const std::string& run_id() const noexcept { return run_id_; }
  const std::vector<Turn>& turns() const noexcept { return turns_; }
  TerminalState terminal_state() const noexcept { return terminal_; }
  const std::optional<std::string>& failure() const noexcept { return failure_; }
  int question_count() const noexcept { return question_count_; }
  std::size_t size() const noexcept { return turns_.size(); }
  bool empty() const noexcept { return turns_.empty(); }

  /// Role of the next turn to be appended.
  Speaker next_speaker() const noexcept;

  bool operator==(const Conversation&) const = default;

 private:
  std::string vignette_id_;
  std::string run_id_;
  std::vector<Turn> turns_;
  TerminalState terminal_ = TerminalState::InProgress;
  std::optional<std::string> failure_;
  int question_count_ = 0;
};

bool has_question(std::string_view text) noexcept;

/// Health-AI turns containing at least one '?'. A turn with several
/// questions counts once.
int count_questions(const Conversation& c);

/// True when the latest turn is the patient's closing acknowledgement
/// (gratitude or farewell, no new symptom) and some earlier health-AI turn
/// carried an assessment.
bool detect_close(const Conversation& c, const Lexicon& lexicon = Lexicon::builtin());

/// True when an AI message reads like an assessment ("could be", "likely",
/// "conditions like", ...).
bool has_assessment_cue(std::string_view text);

nlohmann::json to_json(const LintViolation& v);
LintViolation lint_violation_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Turn& t);
Turn turn_from_json(const nlohmann::json& j);

}  // namespace vgbench
