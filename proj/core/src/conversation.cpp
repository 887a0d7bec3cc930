#include "vgbench/conversation.hpp"

#include <algorithm>
#include <array>
#include <set>

#include "vgbench/error.hpp"
#include "vgbench/text.hpp"

namespace vgbench {

using nlohmann::json;

std::string_view to_string(GuidelineRule r) noexcept {
  static constexpr std::array<std::string_view, 7> kNames = {"R1", "R2", "R3", "R4", "R5", "R6", "R7"};
  return kNames[static_cast<std::size_t>(r)];
}

std::string_view to_string(Severity s) noexcept { return s == Severity::Warn ? "warn" : "fail"; }

std::optional<GuidelineRule> parse_guideline_rule(std::string_view s) {
  for (int i = 0; i < 7; ++i) {
    const auto r = static_cast<GuidelineRule>(i);
    if (s == to_string(r)) return r;
  }
  return std::nullopt;
}

std::string_view to_string(Speaker s) noexcept { return s == Speaker::PatientActor ? "patient_actor" : "health_ai"; }

std::string_view to_string(TerminalState s) noexcept {
  switch (s) {
    case TerminalState::InProgress: return "in_progress";
    case TerminalState::ClosedNormally: return "closed_normally";
    case TerminalState::MaxTurnsReached: return "max_turns_reached";
    case TerminalState::GatewayFailure: return "gateway_failure";
  }
  return "in_progress";
}

std::optional<TerminalState> parse_terminal_state(std::string_view s) {
  for (auto st : {TerminalState::InProgress, TerminalState::ClosedNormally, TerminalState::MaxTurnsReached,
                  TerminalState::GatewayFailure}) {
    if (s == to_string(st)) return st;
  }
  return std::nullopt;
}

bool has_question(std::string_view text) noexcept { return text.find('?') != std::string_view::npos; }

Conversation::Conversation(std::string vignette_id, std::string run_id)
    : vignette_id_(std::move(vignette_id)), run_id_(std::move(run_id)) {}

Speaker Conversation::next_speaker() const noexcept {
  return turns_.size() % 2 == 0 ? Speaker::PatientActor : Speaker::HealthAi;
}

const Turn& Conversation::append(std::string text, std::string timestamp, std::vector<LintViolation> lint) {
  if (terminal_ != TerminalState::InProgress) {
    throw Error(ErrorCode::InvalidRequest, "conversation " + vignette_id_ + " is already " +
                                               std::string(to_string(terminal_)));
  }
  Turn t;
  t.index = static_cast<int>(turns_.size());
  t.role = next_speaker();
  t.contains_question = has_question(text);
  t.text = std::move(text);
  t.timestamp = std::move(timestamp);
  if (t.role == Speaker::PatientActor) t.lint = std::move(lint);
  if (t.role == Speaker::HealthAi && t.contains_question) ++question_count_;
  turns_.push_back(std::move(t));
  return turns_.back();
}

void Conversation::restore(Turn turn) {
  if (turn.index != static_cast<int>(turns_.size())) {
    throw Error(ErrorCode::MalformedRecord, "turn index " + std::to_string(turn.index) + " out of sequence");
  }
  if (turn.role != next_speaker()) throw Error(ErrorCode::MalformedRecord, "turn roles do not alternate");
  if (turn.contains_question != has_question(turn.text)) {
    throw Error(ErrorCode::MalformedRecord, "contains_question disagrees with text");
  }
  if (turn.role == Speaker::HealthAi && turn.contains_question) ++question_count_;
  turns_.push_back(std::move(turn));
}

void Conversation::finish(TerminalState state, std::optional<std::string> failure) {
  if (terminal_ != TerminalState::InProgress || state == TerminalState::InProgress) {
    throw Error(ErrorCode::InvalidRequest, "conversation " + vignette_id_ + " cannot go from " +
                                               std::string(to_string(terminal_)) + " to " +
                                               std::string(to_string(state)));
  }
  terminal_ = state;
  failure_ = std::move(failure);
}

int count_questions(const Conversation& c) {
  return static_cast<int>(std::count_if(c.turns().begin(), c.turns().end(), [](const Turn& t) {
    return t.role == Speaker::HealthAi && has_question(t.text);
  }));
}

bool has_assessment_cue(std::string_view text_in) {
  static const std::array<std::string_view, 19> kCues = {
      "could be",      "might be",          "may be",         "likely",      "possibly",
      "possible",      "diagnosis",         "diagnose",       "consistent with", "suggests",
      "suggestive of", "conditions like",   "condition called", "you may have", "you might have",
      "probably",      "points towards",    "points to",      "indicative of",
  };
  const auto norm = text::normalize_text(text_in);
  return std::any_of(kCues.begin(), kCues.end(),
                     [&](std::string_view cue) { return text::contains_phrase(norm, cue); });
}

namespace {

bool is_closing_acknowledgement(std::string_view text_in) {
  static const std::array<std::string_view, 10> kCues = {
      "thank", "thanks", "thank you", "appreciate", "bye", "goodbye", "thats all", "that is all", "take care",
      "cheers",
  };
  const auto norm = text::normalize_text(text_in);
  return std::any_of(kCues.begin(), kCues.end(),
                     [&](std::string_view cue) { return text::contains_phrase(norm, cue); });
}

}  // namespace

bool detect_close(const Conversation& c, const Lexicon& lexicon) {
  if (c.empty()) return false;
  const auto& last = c.turns().back();
  if (last.role != Speaker::PatientActor) return false;
  if (!is_closing_acknowledgement(last.text)) return false;

  std::set<std::string> seen;
  bool assessed = false;
  for (std::size_t i = 0; i + 1 < c.turns().size(); ++i) {
    const auto& t = c.turns()[i];
    if (t.role == Speaker::PatientActor) {
      for (auto& concept_key : lexicon.asserted_concepts(t.text)) seen.insert(concept_key);
    } else if (has_assessment_cue(t.text)) {
      assessed = true;
    }
  }
  if (!assessed) return false;
  for (const auto& concept_key : lexicon.asserted_concepts(last.text)) {
    if (!seen.count(concept_key)) return false;
  }
  return true;
}

json to_json(const LintViolation& v) {
  return {{"rule", to_string(v.rule)},
          {"turn_index", v.turn_index},
          {"excerpt", v.excerpt},
          {"severity", to_string(v.severity)}};
}

LintViolation lint_violation_from_json(const json& j) {
  LintViolation v;
  const auto rule = parse_guideline_rule(j.at("rule").get<std::string>());
  if (!rule) throw Error(ErrorCode::MalformedRecord, "unknown lint rule");
  v.rule = *rule;
  v.turn_index = j.at("turn_index").get<int>();
  v.excerpt = j.at("excerpt").get<std::string>();
  const auto sev = j.at("severity").get<std::string>();
  if (sev != "warn" && sev != "fail") throw Error(ErrorCode::MalformedRecord, "unknown severity");
  v.severity = sev == "warn" ? Severity::Warn : Severity::Fail;
  return v;
}

json to_json(const Turn& t) {
  json j = {
      {"index", t.index},
      {"role", to_string(t.role)},
      {"text", t.text},
      {"timestamp", t.timestamp},
      {"contains_question", t.contains_question},
  };
  if (t.role == Speaker::PatientActor) {
    json lint = json::array();
    for (const auto& v : t.lint) lint.push_back(to_json(v));
    j["lint"] = lint;
  }
  return j;
}

Turn turn_from_json(const json& j) {
  Turn t;
  t.index = j.at("index").get<int>();
  const auto role = j.at("role").get<std::string>();
  if (role == "patient_actor") t.role = Speaker::PatientActor;
  else if (role == "health_ai") t.role = Speaker::HealthAi;
  else throw Error(ErrorCode::MalformedRecord, "unknown role '" + role + "'");
  t.text = j.at("text").get<std::string>();
  t.timestamp = j.at("timestamp").get<std::string>();
  t.contains_question = j.at("contains_question").get<bool>();
  if (const auto lint = j.find("lint"); lint != j.end()) {
    for (const auto& v : *lint) t.lint.push_back(lint_violation_from_json(v));
  }
  return t;
}

}  // namespace vgbench
