#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "vgbench/conversation.hpp"
#include "vgbench/corpus.hpp"
#include "vgbench/gateway.hpp"
#include "vgbench/lexicon.hpp"

namespace vgbench {

inline constexpr std::string_view kGuidelineVersion = "patient-actor-guidelines/1";

/// The seven behaviour rules, in R1..R7 order, as embedded in actor prompts.
const std::array<std::string_view, 7>& guideline_texts();

/// An (attribute, value) pair asserted about the patient, e.g.
/// ("age", "23") or ("symptom:fever", "absent").
struct Fact {
  std::string attribute;
  std::string value;

  bool operator==(const Fact&) const = default;
};

struct PatientPersona {
  std::string vignette_id;
  bool proxy_mode = false;
  std::string chief_complaint;
  std::string style_profile;
  std::string guideline_version{kGuidelineVersion};
  int age = 0;
  Sex sex = Sex::Male;
  Demographics demographics;
  /// Facts the vignette fixes (age, sex, symptoms present or denied).
  std::vector<Fact> vignette_facts;
};

/// Caregiver voice applies below 18 and above 80.
constexpr bool is_proxy_age(int age) noexcept { return age < 18 || age > 80; }

/// The first symptom-bearing clause of the narrative, trimmed to the
/// complaint itself ("dull-aching pain in his shoulder"). Possessive
/// pronouns become "my" unless `proxy`. Throws Error(NoChiefComplaint).
std::string extract_chief_complaint(std::string_view narrative, bool proxy,
                                    const Lexicon& lexicon = Lexicon::builtin());

PatientPersona build_persona(const ClinicalVignette& v, const Lexicon& lexicon = Lexicon::builtin());

struct PromptSpec {
  std::string system_prompt;
  /// First user-side message, which invites the actor's opening line.
  std::string opening_cue;
  std::string guideline_version;

  bool operator==(const PromptSpec&) const = default;
};

PromptSpec compose_actor_prompt(const PatientPersona& p, const ClinicalVignette& v);

struct ActorSettings {
  std::string model = "patient-actor";
  SamplingControls sampling{0.0, 400};
};

/// Chat request for the actor's next message: system prompt, opening cue,
/// then the transcript with the actor as assistant and the health AI as user.
ChatRequest actor_request(const PromptSpec& prompt, const Conversation& c, const ActorSettings& settings);

/// Asks the model for the actor's next message. Throws Error(InvalidRequest)
/// when it is not the actor's turn and Error(EmptyActorMessage) when the
/// model returns only whitespace; gateway errors propagate.
std::string next_patient_message(const PromptSpec& prompt, const Conversation& c, const ModelGateway& gateway,
                                 const ActorSettings& settings = {});

/// Facts asserted by a single message.
std::vector<Fact> extract_facts(std::string_view text, bool proxy, const Lexicon& lexicon = Lexicon::builtin());

/// Deterministic checks of an actor message against R1..R7. `c` holds the
/// turns before this message. R3 and R4 only ever warn.
class ActorLinter {
 public:
  explicit ActorLinter(Lexicon lexicon = Lexicon::builtin());

  std::vector<LintViolation> lint(std::string_view text, const PatientPersona& p, const Conversation& c) const;

  /// One rule in isolation.
  std::vector<LintViolation> check(GuidelineRule rule, std::string_view text, const PatientPersona& p,
                                   const Conversation& c) const;

  const Lexicon& lexicon() const noexcept { return lexicon_; }

 private:
  Lexicon lexicon_;
};

std::vector<LintViolation> lint_actor_message(std::string_view text, const PatientPersona& p, const Conversation& c,
                                              const Lexicon& lexicon = Lexicon::builtin());

}  // namespace vgbench
