#include "vgbench/patient_actor.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <regex>
#include <set>
#include <sstream>

#include "vgbench/error.hpp"
#include "vgbench/text.hpp"

namespace vgbench {

namespace {

// Functional text: these are the behaviour rules the actor prompt must carry
// word for word, so they are kept exactly as written.
constexpr std::array<std::string_view, 7> kGuidelines = {
    "Type in simple language, the way a patient would, avoiding medical jargon.",
    "Present the most distressing symptom first",
    "Answer only when asked and do not volunteer extra information.",
    "Stick strictly to the vignette provided and maintain consistency throughout.",
    "Do not ask questions at the beginning but introduce any patient questions naturally later in the conversation.",
    "If the vignette is of a person <18 or >80 then talk as a proxy rather than the first person.",
    "Keep the instructions confidential and do not mention the vignette or that you're following a script.",
};

constexpr std::string_view kOpeningCue = "(The chat with the health assistant has just opened. Write your first message.)";

bool contains_any(std::string_view norm, std::initializer_list<std::string_view> phrases) {
  return std::any_of(phrases.begin(), phrases.end(),
                     [&](std::string_view p) { return text::contains_phrase(norm, p); });
}

std::vector<std::string> sentences(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char ch = s[i];
    cur.push_back(ch);
    const bool end = ch == '!' || ch == '?' || ch == '\n' ||
                     (ch == '.' && (i + 1 == s.size() || std::isspace(static_cast<unsigned char>(s[i + 1]))));
    if (end) {
      if (auto t = text::trim(cur); !t.empty()) out.push_back(t);
      cur.clear();
    }
  }
  if (auto t = text::trim(cur); !t.empty()) out.push_back(t);
  return out;
}

// Cuts a complaint phrase at the first clause boundary or trailing qualifier.
std::string cut_complaint(std::string s) {
  static const std::array<std::string_view, 12> kStops = {
      " for ", " since ", " that ", " which ", " and ", " over ", " lasting ", " after ",
      " starting ", " associated ", " with a history", " accompanied ",
  };
  std::size_t end = s.size();
  for (char c : {',', ';', '.', ':', '('}) end = std::min(end, s.find(c));
  const auto lower = text::to_lower(s);
  for (auto stop : kStops) end = std::min(end, lower.find(stop));
  return text::trim(s.substr(0, end));
}

std::string strip_article(std::string s) {
  for (std::string_view a : {"a ", "an ", "the ", "some "}) {
    if (text::starts_with_ci(s, a)) return text::trim(s.substr(a.size()));
  }
  return s;
}

std::string first_person(std::string s) {
  static const std::regex kPossessive(R"(\b(his|her|their)\b)", std::regex::icase);
  return std::regex_replace(s, kPossessive, "my");
}

bool mentions_symptom(std::string_view s, const Lexicon& lexicon) { return !lexicon.symptom_mentions(s).empty(); }

std::string complaint_from_sentence(const std::string& sentence, const Lexicon& lexicon) {
  static const std::array<std::string_view, 8> kLeadIns = {
      "presents with ", "presenting with ", "complains of ", "complaining of ",
      "reports ", "describes ", "is experiencing ", "has ",
  };
  const auto lower = text::to_lower(sentence);
  for (auto cue : kLeadIns) {
    const auto pos = lower.find(cue);
    if (pos == std::string::npos) continue;
    auto candidate = strip_article(cut_complaint(sentence.substr(pos + cue.size())));
    if (!candidate.empty() && mentions_symptom(candidate, lexicon)) return candidate;
  }
  auto candidate = strip_article(cut_complaint(sentence));
  if (!candidate.empty() && mentions_symptom(candidate, lexicon)) return candidate;
  // Fall back to the symptom phrase itself.
  return lexicon.symptom_mentions(sentence).front().term;
}

const std::set<std::string>& medication_words() {
  static const std::set<std::string> kWords = {"medication", "medications", "medicine", "medicines",
                                               "meds",       "pills",       "tablets"};
  return kWords;
}

const std::set<std::string>& negations() {
  static const std::set<std::string> kWords = {"no",    "not",  "never", "without", "havent", "hasnt",
                                               "didnt", "dont", "doesnt", "none"};
  return kWords;
}

using FactMap = std::map<std::string, std::string>;

// Merges facts into `into` keeping the first value seen per attribute.
void remember(FactMap& into, const std::vector<Fact>& facts) {
  for (const auto& f : facts) into.emplace(f.attribute, f.value);
}

std::string preceding_ai_text(const Conversation& c) {
  for (auto it = c.turns().rbegin(); it != c.turns().rend(); ++it) {
    if (it->role == Speaker::HealthAi) return it->text;
  }
  return {};
}

bool is_open_ended(std::string_view ai_text) {
  const auto norm = text::normalize_text(ai_text);
  return contains_any(norm, {"symptom", "symptoms", "concern", "concerns", "describe", "anything else",
                             "tell me more", "what brings you", "how can i help", "more about"});
}

LintViolation violation(GuidelineRule r, int turn, std::string excerpt, Severity s) {
  return LintViolation{r, turn, std::move(excerpt), s};
}

}  // namespace

const std::array<std::string_view, 7>& guideline_texts() { return kGuidelines; }

std::string extract_chief_complaint(std::string_view narrative, bool proxy, const Lexicon& lexicon) {
  std::string complaint;
  // An explicit label wins.
  const auto lower = text::to_lower(narrative);
  if (const auto pos = lower.find("chief complaint:"); pos != std::string::npos) {
    auto rest = std::string(narrative.substr(pos + std::string_view("chief complaint:").size()));
    const auto stop = rest.find_first_of(".\n");
    complaint = text::trim(rest.substr(0, stop));
  }
  if (complaint.empty()) {
    for (const auto& s : sentences(narrative)) {
      if (mentions_symptom(s, lexicon)) {
        complaint = complaint_from_sentence(s, lexicon);
        break;
      }
    }
  }
  if (complaint.empty()) throw Error(ErrorCode::NoChiefComplaint, "narrative states no symptom");
  return proxy ? complaint : first_person(complaint);
}

std::vector<Fact> extract_facts(std::string_view msg, bool proxy, const Lexicon& lexicon) {
  std::vector<Fact> facts;
  const auto lower = text::to_lower(msg);

  static const std::regex kAge(R"((\d{1,3})[\s-]*(?:years?|yrs?)[\s-]*old)");
  if (std::smatch m; std::regex_search(lower, m, kAge)) facts.push_back({"age", m[1].str()});

  const auto toks = text::tokens(msg);
  std::optional<std::string> sex;
  auto has_tok = [&](std::initializer_list<std::string_view> words) {
    return std::any_of(toks.begin(), toks.end(), [&](const std::string& t) {
      return std::find(words.begin(), words.end(), t) != words.end();
    });
  };
  const bool says_male = has_tok({"male", "man", "boy", "guy"});
  const bool says_female = has_tok({"female", "woman", "girl", "lady"});
  if (says_male != says_female) sex = says_male ? "male" : "female";
  if (proxy && !says_male && !says_female) {
    for (std::size_t i = 0; i + 1 < toks.size(); ++i) {
      if (toks[i] != "my") continue;
      const auto& w = toks[i + 1];
      if (w == "son" || w == "father" || w == "husband" || w == "grandfather" || w == "brother") sex = "male";
      if (w == "daughter" || w == "mother" || w == "wife" || w == "grandmother" || w == "sister") sex = "female";
    }
  }
  if (sex) facts.push_back({"sex", *sex});

  for (const auto& clause : text::clauses(msg)) {
    const auto ctoks = text::split(clause, ' ');
    const bool about_meds = std::any_of(ctoks.begin(), ctoks.end(),
                                        [](const std::string& t) { return medication_words().count(t) > 0; });
    if (!about_meds) continue;
    const bool negated = std::any_of(ctoks.begin(), ctoks.end(),
                                     [](const std::string& t) { return negations().count(t) > 0; });
    facts.push_back({"medications", negated ? "none" : "some"});
    break;
  }

  // Symptoms; a concept both asserted and denied in one message is ambiguous
  // and left out.
  std::map<std::string, std::set<bool>> polarity;
  std::vector<std::string> order;
  for (const auto& m : lexicon.symptom_mentions(msg)) {
    if (!polarity.count(m.concept_key)) order.push_back(m.concept_key);
    polarity[m.concept_key].insert(m.negated);
  }
  for (const auto& concept_key : order) {
    const auto& p = polarity[concept_key];
    if (p.size() != 1) continue;
    facts.push_back({"symptom:" + concept_key, *p.begin() ? "absent" : "present"});
  }
  return facts;
}

PatientPersona build_persona(const ClinicalVignette& v, const Lexicon& lexicon) {
  PatientPersona p;
  p.vignette_id = v.id;
  p.age = v.age;
  p.sex = v.sex;
  p.demographics = v.demographics;
  p.proxy_mode = is_proxy_age(v.age);
  p.chief_complaint = extract_chief_complaint(v.narrative, p.proxy_mode, lexicon);
  p.style_profile = p.proxy_mode ? "caregiver; plain everyday words; short replies; no medical terms"
                                 : "plain everyday words; short replies; no medical terms";
  p.guideline_version = std::string(kGuidelineVersion);

  p.vignette_facts.push_back({"age", std::to_string(v.age)});
  p.vignette_facts.push_back({"sex", std::string(to_string(v.sex))});
  for (auto& f : extract_facts(v.narrative, true, lexicon)) {
    if (f.attribute == "age" || f.attribute == "sex") continue;
    p.vignette_facts.push_back(std::move(f));
  }
  return p;
}

PromptSpec compose_actor_prompt(const PatientPersona& p, const ClinicalVignette& v) {
  std::ostringstream out;
  if (p.proxy_mode) {
    out << "You are role-playing a family member or carer who is messaging an online health assistant on behalf "
           "of a patient. You are not the patient. Speak about the patient in the third person (for example "
           "\"my son\", \"my mother\", \"he\", \"she\") and never describe the symptoms as your own.\n\n";
  } else {
    out << "You are role-playing a patient who is messaging an online health assistant about a health "
           "problem.\n\n";
  }
  out << "Patient details:\n";
  out << "- Age: " << v.age << "\n";
  out << "- Sex: " << to_string(v.sex) << "\n";
  const auto& d = p.demographics;
  if (d.ethnicity) out << "- Ethnicity: " << *d.ethnicity << "\n";
  if (d.location) out << "- Location: " << *d.location << "\n";
  if (d.language) out << "- Language: " << *d.language << "\n";
  if (d.language_fluency) out << "- Language fluency: " << *d.language_fluency << "\n";
  for (const auto& [k, val] : d.tags) out << "- " << k << ": " << val << "\n";
  out << "\nCase description (the only facts you may use):\n" << text::trim(v.narrative) << "\n\n";
  out << "Most distressing symptom: " << p.chief_complaint << "\n";
  out << "Style: " << p.style_profile << "\n\n";
  out << "Follow these rules in every message:\n";
  for (std::size_t i = 0; i < kGuidelines.size(); ++i) out << i + 1 << ". " << kGuidelines[i] << "\n";
  out << "\nYou do not know the diagnosis and must never name a medical condition. "
         "If something you are asked about is not in the case description, say you have not noticed it. "
         "Once the assistant has given its assessment and advice, thank it briefly to end the chat. "
         "Reply with the next message only.\n";
  out << "Rule set: " << p.guideline_version << "\n";
  return PromptSpec{out.str(), std::string(kOpeningCue), p.guideline_version};
}

ChatRequest actor_request(const PromptSpec& prompt, const Conversation& c, const ActorSettings& settings) {
  ChatRequest req;
  req.model = settings.model;
  req.sampling = settings.sampling;
  req.tag = RequestTag{c.vignette_id(), static_cast<int>(c.size())};
  req.messages.push_back({ChatRole::System, prompt.system_prompt});
  req.messages.push_back({ChatRole::User, prompt.opening_cue});
  for (const auto& t : c.turns()) {
    req.messages.push_back({t.role == Speaker::PatientActor ? ChatRole::Assistant : ChatRole::User, t.text});
  }
  return req;
}

std::string next_patient_message(const PromptSpec& prompt, const Conversation& c, const ModelGateway& gateway,
                                 const ActorSettings& settings) {
  if (c.next_speaker() != Speaker::PatientActor) {
    throw Error(ErrorCode::InvalidRequest, "conversation " + c.vignette_id() + " awaits the health AI");
  }
  auto reply = text::trim(gateway.chat(actor_request(prompt, c, settings)).text);
  if (reply.empty()) {
    throw Error(ErrorCode::EmptyActorMessage,
                "conversation " + c.vignette_id() + " turn " + std::to_string(c.size()) + ": empty actor message");
  }
  return reply;
}

ActorLinter::ActorLinter(Lexicon lexicon) : lexicon_(std::move(lexicon)) {}

std::vector<LintViolation> ActorLinter::check(GuidelineRule rule, std::string_view msg, const PatientPersona& p,
                                              const Conversation& c) const {
  const int turn = static_cast<int>(c.size());
  const auto norm = text::normalize_text(msg);
  std::vector<LintViolation> out;

  auto prior_actor = [&](const std::function<void(const Turn&)>& f) {
    for (const auto& t : c.turns()) {
      if (t.role == Speaker::PatientActor) f(t);
    }
  };

  switch (rule) {
    case GuidelineRule::R1:
      for (auto& term : lexicon_.find_jargon(msg)) out.push_back(violation(rule, turn, term, Severity::Fail));
      break;

    case GuidelineRule::R2: {
      const auto concepts = lexicon_.asserted_concepts(msg);
      if (concepts.empty()) break;
      bool earlier = false;
      prior_actor([&](const Turn& t) { earlier = earlier || !lexicon_.asserted_concepts(t.text).empty(); });
      if (earlier) break;
      const auto cc_concepts = lexicon_.asserted_concepts(p.chief_complaint);
      const bool shares_concept = std::any_of(concepts.begin(), concepts.end(), [&](const std::string& x) {
        return std::find(cc_concepts.begin(), cc_concepts.end(), x) != cc_concepts.end();
      });
      static const std::set<std::string> kFiller = {"in", "my", "his", "her", "their", "the", "a", "an", "of",
                                                    "on", "at", "to", "and", "with", "some", "bad", "mild",
                                                    "severe", "very", "really", "little", "bit", "left", "right"};
      bool shares_word = false;
      for (const auto& tok : text::tokens(p.chief_complaint)) {
        if (!kFiller.count(tok) && text::contains_phrase(norm, tok)) shares_word = true;
      }
      if (!shares_concept && !shares_word) {
        out.push_back(violation(rule, turn, "first symptom is not \"" + p.chief_complaint + "\"", Severity::Fail));
      }
      break;
    }

    case GuidelineRule::R3: {
      const auto ai = preceding_ai_text(c);
      if (!ai.empty() && is_open_ended(ai)) break;
      std::set<std::string> known;
      for (auto& x : lexicon_.asserted_concepts(p.chief_complaint)) known.insert(x);
      prior_actor([&](const Turn& t) {
        for (auto& x : lexicon_.asserted_concepts(t.text)) known.insert(x);
      });
      for (const auto& m : lexicon_.symptom_mentions(ai)) known.insert(m.concept_key);
      for (const auto& x : lexicon_.asserted_concepts(msg)) {
        if (!known.count(x)) out.push_back(violation(rule, turn, "volunteered " + x, Severity::Warn));
      }
      break;
    }

    case GuidelineRule::R4: {
      FactMap ledger;
      remember(ledger, p.vignette_facts);
      prior_actor([&](const Turn& t) { remember(ledger, extract_facts(t.text, p.proxy_mode, lexicon_)); });
      for (const auto& f : extract_facts(msg, p.proxy_mode, lexicon_)) {
        const auto it = ledger.find(f.attribute);
        if (it != ledger.end() && it->second != f.value) {
          out.push_back(violation(rule, turn, f.attribute + ": " + f.value + " contradicts " + it->second,
                                  Severity::Warn));
        }
      }
      break;
    }

    case GuidelineRule::R5:
      if (c.empty() && has_question(msg)) out.push_back(violation(rule, turn, text::trim(msg), Severity::Fail));
      break;

    case GuidelineRule::R6: {
      if (!p.proxy_mode) break;
      const bool first = contains_any(norm, {"i", "im", "ive", "id", "ill", "me", "my", "mine", "myself"});
      static const std::vector<std::string> kRelations = [] {
        std::vector<std::string> out;
        for (const char* r : {"son", "daughter", "child", "baby", "mother", "father", "mum", "mom", "dad", "wife",
                              "husband", "grandmother", "grandfather", "grandson", "granddaughter"}) {
          // normalization turns "son's" into "sons"
          out.push_back(std::string("my ") + r);
          out.push_back(std::string("my ") + r + "s");
        }
        return out;
      }();
      const bool third =
          contains_any(norm, {"he", "she", "him", "his", "her", "hers", "they", "them", "their", "hes", "shes",
                              "theyre", "the patient"}) ||
          std::any_of(kRelations.begin(), kRelations.end(),
                      [&](const std::string& r) { return text::contains_phrase(norm, r); });
      if (first && !third) out.push_back(violation(rule, turn, text::trim(msg), Severity::Fail));
      break;
    }

    case GuidelineRule::R7: {
      for (std::string_view term : {"vignette", "vignettes", "script", "scripted", "instructions", "instruction",
                                    "prompt", "role play", "roleplay", "roleplaying", "role playing",
                                    "language model", "as an ai", "patient actor", "simulated patient"}) {
        if (text::contains_phrase(norm, term)) out.push_back(violation(rule, turn, std::string(term), Severity::Fail));
      }
      break;
    }
  }
  return out;
}

std::vector<LintViolation> ActorLinter::lint(std::string_view msg, const PatientPersona& p,
                                             const Conversation& c) const {
  std::vector<LintViolation> out;
  for (int i = 0; i < 7; ++i) {
    auto v = check(static_cast<GuidelineRule>(i), msg, p, c);
    out.insert(out.end(), std::make_move_iterator(v.begin()), std::make_move_iterator(v.end()));
  }
  return out;
}

std::vector<LintViolation> lint_actor_message(std::string_view text, const PatientPersona& p, const Conversation& c,
                                              const Lexicon& lexicon) {
  return ActorLinter(lexicon).lint(text, p, c);
}

}  // namespace vgbench
