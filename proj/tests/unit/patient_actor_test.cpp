#include <algorithm>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "vgbench/error.hpp"
#include "vgbench/patient_actor.hpp"

using namespace vgbench;

namespace {

const Corpus& trio() {
  static const auto c = load_corpus(fixtures::fixture_dir() / "vignettes.jsonl");
  return c;
}

const ClinicalVignette& ortho() { return *trio().find("ortho-001"); }

ClinicalVignette aged(int age) {
  auto v = ortho();
  v.age = age;
  return v;
}

bool fires(const std::vector<LintViolation>& vs, GuidelineRule r, Severity s) {
  return std::any_of(vs.begin(), vs.end(), [&](const LintViolation& v) { return v.rule == r && v.severity == s; });
}

// Conversation holding the given turns, patient first.
Conversation history(std::initializer_list<const char*> turns) {
  Conversation c("ortho-001", "run");
  for (const char* t : turns) c.append(t, "t");
  return c;
}

}  // namespace

TEST(ChiefComplaint, FromReferenceNarrative) {
  EXPECT_EQ(extract_chief_complaint(ortho().narrative, false), "dull-aching pain in my shoulder");
  EXPECT_EQ(extract_chief_complaint(ortho().narrative, true), "dull-aching pain in his shoulder");
}

TEST(ChiefComplaint, ExplicitLabelWins) {
  EXPECT_EQ(extract_chief_complaint("History of asthma. Chief complaint: cough at night. Also a rash.", false),
            "cough at night");
}

TEST(ChiefComplaint, NoSymptomIsAnError) {
  try {
    extract_chief_complaint("A 40-year-old accountant attends for a routine review.", false);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoChiefComplaint);
  }
}

TEST(Persona, CarriesVignetteFacts) {
  const auto p = build_persona(ortho());
  EXPECT_EQ(p.vignette_id, "ortho-001");
  EXPECT_FALSE(p.proxy_mode);
  EXPECT_EQ(p.guideline_version, kGuidelineVersion);
  EXPECT_NE(std::find(p.vignette_facts.begin(), p.vignette_facts.end(), Fact{"age", "23"}), p.vignette_facts.end());
  EXPECT_NE(std::find(p.vignette_facts.begin(), p.vignette_facts.end(), Fact{"symptom:fever", "absent"}),
            p.vignette_facts.end());
}

TEST(Persona, ProxyModeHoldsForEveryAge) {
  for (int age = 0; age <= 120; ++age) {
    const auto p = build_persona(aged(age));
    ASSERT_EQ(p.proxy_mode, age < 18 || age > 80) << "age " << age;
    ASSERT_EQ(p.proxy_mode, is_proxy_age(age));
  }
  EXPECT_FALSE(build_persona(aged(18)).proxy_mode);
  EXPECT_FALSE(build_persona(aged(80)).proxy_mode);
  EXPECT_TRUE(build_persona(aged(81)).proxy_mode);
}

TEST(Prompt, EmbedsAllSevenGuidelinesVerbatim) {
  const auto p = build_persona(ortho());
  const auto prompt = compose_actor_prompt(p, ortho());
  ASSERT_EQ(guideline_texts().size(), 7u);
  for (const auto& g : guideline_texts()) {
    EXPECT_NE(prompt.system_prompt.find(g), std::string::npos) << g;
  }
  EXPECT_NE(prompt.system_prompt.find(ortho().narrative), std::string::npos);
  EXPECT_EQ(prompt.guideline_version, kGuidelineVersion);
  EXPECT_FALSE(prompt.opening_cue.empty());
  // the gold answer is never handed to the actor
  EXPECT_EQ(prompt.system_prompt.find("rotator cuff tendinitis"), std::string::npos);
}

TEST(Prompt, ProxyPromptAsksForCaregiverVoice) {
  const auto child = aged(7);
  const auto prompt = compose_actor_prompt(build_persona(child), child);
  const auto adult = compose_actor_prompt(build_persona(ortho()), ortho());
  EXPECT_NE(prompt.system_prompt, adult.system_prompt);
  EXPECT_NE(prompt.system_prompt.find("caregiver"), std::string::npos);
}

TEST(ActorRequest, MapsRolesFromTheActorsView) {
  const auto prompt = compose_actor_prompt(build_persona(ortho()), ortho());
  const auto c = history({"Hi", "How can I help?"});
  const auto req = actor_request(prompt, c, {});
  ASSERT_EQ(req.messages.size(), 4u);
  EXPECT_EQ(req.messages[0].role, ChatRole::System);
  EXPECT_EQ(req.messages[1].role, ChatRole::User);  // opening cue
  EXPECT_EQ(req.messages[2].role, ChatRole::Assistant);
  EXPECT_EQ(req.messages[2].content, "Hi");
  EXPECT_EQ(req.messages[3].role, ChatRole::User);
}

// One seeded violation per guideline rule.
TEST(Linter, R1JargonFails) {
  const auto p = build_persona(ortho());
  const auto vs = ActorLinter().check(GuidelineRule::R1, "I think it's tendinitis in my shoulder.", p, {});
  EXPECT_TRUE(fires(vs, GuidelineRule::R1, Severity::Fail));
  EXPECT_TRUE(ActorLinter().check(GuidelineRule::R1, "My shoulder aches.", p, {}).empty());
}

TEST(Linter, R2WrongFirstSymptomFails) {
  const auto p = build_persona(ortho());
  const auto c = history({"Hi", "What brings you here today?"});
  EXPECT_TRUE(fires(ActorLinter().check(GuidelineRule::R2, "I've been feeling really tired lately.", p, c),
                    GuidelineRule::R2, Severity::Fail));
  EXPECT_TRUE(ActorLinter().check(GuidelineRule::R2, "My shoulder has a dull ache.", p, c).empty());
}

TEST(Linter, R3VolunteeringWarns) {
  const auto p = build_persona(ortho());
  const auto c = history({"My shoulder hurts.", "Is the pain worse at night?"});
  const auto vs = ActorLinter().check(GuidelineRule::R3, "Yes, and I also have a cough and a rash.", p, c);
  EXPECT_TRUE(fires(vs, GuidelineRule::R3, Severity::Warn));
  EXPECT_FALSE(fires(vs, GuidelineRule::R3, Severity::Fail));
  // open questions invite new symptoms
  const auto open = history({"My shoulder hurts.", "Any other symptoms you'd like to describe?"});
  EXPECT_TRUE(ActorLinter().check(GuidelineRule::R3, "I have a cough too.", p, open).empty());
}

TEST(Linter, R4ContradictionWarns) {
  const auto p = build_persona(ortho());
  const auto c = history({"My shoulder hurts.", "Any fever?"});
  EXPECT_TRUE(fires(ActorLinter().check(GuidelineRule::R4, "Yes, I've had a fever since yesterday.", p, c),
                    GuidelineRule::R4, Severity::Warn));
  const auto age = history({"My shoulder hurts.", "How old are you?"});
  EXPECT_TRUE(fires(ActorLinter().check(GuidelineRule::R4, "I'm 41 years old.", p, age), GuidelineRule::R4,
                    Severity::Warn));
  EXPECT_TRUE(ActorLinter().check(GuidelineRule::R4, "I'm 23 years old.", p, age).empty());
}

TEST(Linter, R4ContradictingAnEarlierTurnWarns) {
  const auto p = build_persona(ortho());
  const auto c = history({"My shoulder hurts.", "Any medications?", "No, I'm not taking any medications.",
                          "Anything else?"});
  EXPECT_TRUE(fires(ActorLinter().check(GuidelineRule::R4, "I take some pills for it every day.", p, c),
                    GuidelineRule::R4, Severity::Warn));
}

TEST(Linter, R5OpeningQuestionFails) {
  const auto p = build_persona(ortho());
  EXPECT_TRUE(fires(ActorLinter().check(GuidelineRule::R5, "Hi, can you tell me why my shoulder hurts?", p, {}),
                    GuidelineRule::R5, Severity::Fail));
  // later questions are allowed
  const auto c = history({"My shoulder hurts.", "It may be tendinitis."});
  EXPECT_TRUE(ActorLinter().check(GuidelineRule::R5, "Should I rest it?", p, c).empty());
}

TEST(Linter, R6FirstPersonInProxyModeFails) {
  const auto child = build_persona(aged(8));
  EXPECT_TRUE(fires(ActorLinter().check(GuidelineRule::R6, "My shoulder hurts a lot.", child, {}), GuidelineRule::R6,
                    Severity::Fail));
  EXPECT_TRUE(ActorLinter().check(GuidelineRule::R6, "My son's shoulder hurts a lot.", child, {}).empty());
  // adults may speak for themselves
  EXPECT_TRUE(ActorLinter().check(GuidelineRule::R6, "My shoulder hurts.", build_persona(ortho()), {}).empty());
}

TEST(Linter, R7LeakingTheSetupFails) {
  const auto p = build_persona(ortho());
  for (const char* leak : {"According to my vignette the pain started a week ago.",
                           "I'm just following the script here.", "As a simulated patient I can't say."}) {
    EXPECT_TRUE(fires(ActorLinter().check(GuidelineRule::R7, leak, p, {}), GuidelineRule::R7, Severity::Fail))
        << leak;
  }
}

TEST(Linter, EachRuleFiresOnlyForItsOwnSeed) {
  const auto adult = build_persona(ortho());
  const auto child = build_persona(aged(8));
  EXPECT_TRUE(fires(lint_actor_message("Hello, is this the right place?", adult, {}), GuidelineRule::R5,
                    Severity::Fail));
  const auto vs = lint_actor_message("My shoulder hurts.", child, {});
  ASSERT_EQ(vs.size(), 1u);
  EXPECT_EQ(vs[0].rule, GuidelineRule::R6);
}

TEST(Linter, ReferenceTranscriptHasNoFailures) {
  const auto scripts = fixtures::load_scripts(fixtures::fixture_dir() / "scripts.json");
  const auto& s = scripts.at("ortho-001");
  ASSERT_EQ(s.patient.size(), 13u);
  ASSERT_EQ(s.ai.size(), 13u);
  const auto p = build_persona(ortho());
  Conversation c("ortho-001", "run");
  int warnings = 0;
  for (std::size_t i = 0; i < s.patient.size(); ++i) {
    for (const auto& v : lint_actor_message(s.patient[i], p, c)) {
      EXPECT_NE(v.severity, Severity::Fail) << to_string(v.rule) << " on turn " << c.size() << ": " << v.excerpt;
      ++warnings;
    }
    c.append(s.patient[i], "t");
    c.append(s.ai[i], "t");
  }
  EXPECT_LT(warnings, 5);
}

TEST(Facts, AgeSexMedicationsAndSymptoms) {
  const auto facts = extract_facts("I'm a 23 year old male, no medications, and I have no fever but my arm aches.",
                                   false);
  auto has = [&](const Fact& f) { return std::find(facts.begin(), facts.end(), f) != facts.end(); };
  EXPECT_TRUE(has({"age", "23"}));
  EXPECT_TRUE(has({"sex", "male"}));
  EXPECT_TRUE(has({"medications", "none"}));
  EXPECT_TRUE(has({"symptom:fever", "absent"}));
  EXPECT_TRUE(has({"symptom:pain", "present"}));
}

TEST(Lexicon, JargonAndSymptoms) {
  const auto& lex = Lexicon::builtin();
  EXPECT_EQ(lex.find_jargon("Possible rotator cuff tendinitis."),
            (std::vector<std::string>{"rotator cuff", "tendinitis"}));
  const auto ms = lex.symptom_mentions("No fever, but my arm aches");
  ASSERT_EQ(ms.size(), 2u);
  EXPECT_TRUE(ms[0].negated);
  EXPECT_EQ(ms[1].concept_key, "pain");
  EXPECT_FALSE(ms[1].negated);
  const auto extended = lex.with_jargon({"Contact Dermatitis", "tendinitis"});
  EXPECT_EQ(extended.jargon().size(), lex.jargon().size() + 1);
}
