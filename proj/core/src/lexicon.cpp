#include "vgbench/lexicon.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "vgbench/error.hpp"
#include "vgbench/text.hpp"

namespace vgbench {

namespace {

// Clinical vocabulary a lay patient would not normally use.
const std::vector<std::string>& builtin_jargon() {
  static const std::vector<std::string> kTerms = {
      "tendinitis", "tendonitis", "tendinopathy", "impingement", "rotator cuff", "bursitis",
      "myocardial", "infarction", "angina", "arrhythmia", "tachycardia", "bradycardia",
      "atrial fibrillation", "hypertension", "hypotension", "dyspnea", "dyspnoea", "orthopnea",
      "edema", "oedema", "erythema", "pruritus", "urticaria", "dermatitis", "paresthesia",
      "paraesthesia", "syncope", "hematuria", "haematuria", "dysuria", "polyuria", "nocturia",
      "hemoptysis", "haemoptysis", "hematemesis", "melena", "dysphagia", "odynophagia",
      "rhinorrhea", "otalgia", "photophobia", "diplopia", "epistaxis", "lymphadenopathy",
      "hepatomegaly", "splenomegaly", "idiopathic", "etiology", "aetiology", "bilateral",
      "unilateral", "pathology", "prognosis", "differential diagnosis", "neuropathy",
      "radiculopathy", "osteoarthritis", "carcinoma", "malignancy", "metastasis", "thrombosis",
      "embolism", "ischemia", "ischaemia", "ischemic", "stenosis", "regurgitation",
      "insufficiency", "hypothyroidism", "hyperthyroidism", "leukocytosis", "neutropenia",
      "thrombocytopenia", "nephrotic", "glomerulonephritis", "pyelonephritis", "cystitis",
      "urethritis", "prostatitis", "endometriosis", "dysmenorrhea", "menorrhagia", "amenorrhea",
      "preeclampsia", "conjunctivitis", "keratitis", "uveitis", "otitis", "sinusitis",
      "pharyngitis", "tonsillitis", "laryngitis", "meningitis", "encephalitis", "cephalgia",
      "febrile", "afebrile", "pyrexia", "malaise", "emesis", "pertinent negative", "cholecystitis",
      "appendicitis", "pancreatitis", "diverticulitis", "nephrolithiasis", "urolithiasis",
      "cellulitis", "psoriasis", "anaphylaxis", "hypoglycemia", "hyperglycemia", "sepsis",
  };
  return kTerms;
}

const std::vector<Lexicon::SymptomEntry>& builtin_symptoms() {
  static const std::vector<Lexicon::SymptomEntry> kEntries = {
      {"pain", "pain"}, {"pains", "pain"}, {"painful", "pain"}, {"hurt", "pain"}, {"hurts", "pain"},
      {"hurting", "pain"}, {"ache", "pain"}, {"aches", "pain"}, {"aching", "pain"}, {"achy", "pain"},
      {"soreness", "pain"}, {"tender", "pain"}, {"tenderness", "pain"},
      {"sore throat", "sore throat"}, {"headache", "headache"}, {"headaches", "headache"},
      {"fever", "fever"}, {"feverish", "fever"}, {"high temperature", "fever"}, {"chills", "chills"},
      {"shivering", "chills"}, {"sweats", "sweating"}, {"sweating", "sweating"},
      {"night sweats", "sweating"}, {"cough", "cough"}, {"coughing", "cough"},
      {"coughing up blood", "coughing blood"}, {"rash", "rash"}, {"rashes", "rash"},
      {"spots", "rash"}, {"hives", "rash"}, {"itch", "itch"}, {"itching", "itch"}, {"itchy", "itch"},
      {"redness", "redness"}, {"swelling", "swelling"}, {"swollen", "swelling"}, {"puffy", "swelling"},
      {"bruise", "bruising"}, {"bruises", "bruising"}, {"bruising", "bruising"}, {"lump", "lump"},
      {"lumps", "lump"}, {"bleeding", "bleeding"}, {"nausea", "nausea"}, {"nauseous", "nausea"},
      {"feel sick", "nausea"}, {"feeling sick", "nausea"}, {"vomiting", "vomiting"},
      {"vomit", "vomiting"}, {"throwing up", "vomiting"}, {"threw up", "vomiting"},
      {"diarrhea", "diarrhea"}, {"diarrhoea", "diarrhea"}, {"loose stools", "diarrhea"},
      {"constipation", "constipation"}, {"constipated", "constipation"}, {"heartburn", "heartburn"},
      {"bloating", "bloating"}, {"bloated", "bloating"}, {"cramps", "cramps"}, {"cramping", "cramps"},
      {"cramp", "cramps"}, {"dizzy", "dizziness"}, {"dizziness", "dizziness"},
      {"lightheaded", "dizziness"}, {"light headed", "dizziness"}, {"fainting", "fainting"},
      {"fainted", "fainting"}, {"faint", "fainting"}, {"passed out", "fainting"},
      {"blacked out", "fainting"}, {"tired", "fatigue"}, {"tiredness", "fatigue"},
      {"fatigue", "fatigue"}, {"exhausted", "fatigue"}, {"exhaustion", "fatigue"},
      {"no energy", "fatigue"}, {"weakness", "weakness"}, {"weak", "weakness"},
      {"numbness", "numbness"}, {"numb", "numbness"}, {"tingling", "tingling"},
      {"pins and needles", "tingling"}, {"shortness of breath", "breathlessness"},
      {"short of breath", "breathlessness"}, {"breathless", "breathlessness"},
      {"breathlessness", "breathlessness"}, {"out of breath", "breathlessness"},
      {"trouble breathing", "breathlessness"}, {"difficulty breathing", "breathlessness"},
      {"wheeze", "wheezing"}, {"wheezing", "wheezing"}, {"wheezy", "wheezing"},
      {"palpitations", "palpitations"}, {"racing heart", "palpitations"},
      {"heart racing", "palpitations"}, {"pounding heart", "palpitations"},
      {"chest tightness", "chest tightness"}, {"tight chest", "chest tightness"},
      {"discharge", "discharge"}, {"burning", "burning"}, {"burns", "burning"}, {"stings", "burning"},
      {"stinging", "burning"}, {"blurry vision", "blurred vision"},
      {"blurred vision", "blurred vision"}, {"blurry", "blurred vision"},
      {"blurred", "blurred vision"}, {"double vision", "double vision"},
      {"loss of vision", "vision loss"}, {"vision loss", "vision loss"}, {"ringing", "ringing"},
      {"hearing loss", "hearing loss"}, {"runny nose", "runny nose"}, {"stuffy nose", "congestion"},
      {"blocked nose", "congestion"}, {"congestion", "congestion"}, {"congested", "congestion"},
      {"sneezing", "sneezing"}, {"seizure", "seizure"}, {"seizures", "seizure"},
      {"convulsions", "seizure"}, {"confusion", "confusion"}, {"confused", "confusion"},
      {"weight loss", "weight loss"}, {"losing weight", "weight loss"}, {"lost weight", "weight loss"},
      {"thirst", "thirst"}, {"thirsty", "thirst"}, {"frequent urination", "urination"},
      {"peeing a lot", "urination"}, {"jaundice", "jaundice"}, {"yellowing", "jaundice"},
      {"stiffness", "stiffness"}, {"stiff", "stiffness"}, {"tremor", "tremor"},
      {"shaking", "tremor"}, {"hair loss", "hair loss"},
  };
  return kEntries;
}

const std::set<std::string>& negation_cues() {
  static const std::set<std::string> kCues = {
      "no",     "not",   "never",  "without", "denies", "deny",   "denied", "havent",
      "hasnt",  "hadnt", "didnt",  "dont",    "doesnt", "isnt",   "arent",  "wasnt",
      "werent", "cant",  "cannot", "nor",     "none",   "neither", "free",
  };
  return kCues;
}

std::size_t token_count(std::string_view phrase) { return text::split(phrase, ' ').size(); }

}  // namespace

Lexicon::Lexicon(std::vector<std::string> jargon, std::vector<SymptomEntry> symptoms)
    : jargon_(std::move(jargon)), symptoms_(std::move(symptoms)) {
  for (auto& j : jargon_) j = text::normalize_name(j);
  std::erase_if(jargon_, [](const std::string& s) { return s.empty(); });
  std::sort(jargon_.begin(), jargon_.end());
  jargon_.erase(std::unique(jargon_.begin(), jargon_.end()), jargon_.end());
  for (auto& s : symptoms_) s.phrase = text::normalize_text(s.phrase);
  // Longest phrases first so "coughing up blood" wins over "coughing".
  std::stable_sort(symptoms_.begin(), symptoms_.end(), [](const SymptomEntry& a, const SymptomEntry& b) {
    return token_count(a.phrase) > token_count(b.phrase);
  });
}

const Lexicon& Lexicon::builtin() {
  static const Lexicon kBuiltin(builtin_jargon(), builtin_symptoms());
  return kBuiltin;
}

Lexicon Lexicon::with_jargon(const std::vector<std::string>& terms) const {
  auto all = jargon_;
  all.insert(all.end(), terms.begin(), terms.end());
  return Lexicon(std::move(all), symptoms_);
}

Lexicon Lexicon::with_jargon_file(const std::filesystem::path& path) const {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read jargon file " + path.string());
  std::vector<std::string> terms;
  std::string line;
  while (std::getline(in, line)) {
    const auto t = text::trim(line);
    if (t.empty() || t.front() == '#') continue;
    terms.push_back(t);
  }
  return with_jargon(terms);
}

std::vector<std::string> Lexicon::find_jargon(std::string_view text_in) const {
  const auto norm = text::normalize_text(text_in);
  std::vector<std::string> found;
  for (const auto& term : jargon_) {
    if (text::contains_phrase(norm, term)) found.push_back(term);
  }
  return found;
}

std::vector<SymptomMention> Lexicon::symptom_mentions(std::string_view text_in) const {
  std::vector<SymptomMention> out;
  for (const auto& clause : text::clauses(text_in)) {
    const auto toks = text::split(clause, ' ');
    bool negated = false;
    std::size_t i = 0;
    while (i < toks.size()) {
      if (negation_cues().count(toks[i])) {
        negated = true;
        ++i;
        continue;
      }
      const SymptomEntry* hit = nullptr;
      std::size_t hit_len = 0;
      for (const auto& entry : symptoms_) {
        const auto ptoks = text::split(entry.phrase, ' ');
        if (ptoks.size() > toks.size() - i) continue;
        if (std::equal(ptoks.begin(), ptoks.end(), toks.begin() + static_cast<std::ptrdiff_t>(i))) {
          hit = &entry;
          hit_len = ptoks.size();
          break;
        }
      }
      if (hit) {
        out.push_back({hit->phrase, hit->concept_key, negated});
        i += hit_len;
      } else {
        ++i;
      }
    }
  }
  return out;
}

std::vector<std::string> Lexicon::asserted_concepts(std::string_view text_in) const {
  std::vector<std::string> out;
  for (const auto& m : symptom_mentions(text_in)) {
    if (!m.negated && std::find(out.begin(), out.end(), m.concept_key) == out.end()) out.push_back(m.concept_key);
  }
  return out;
}

}  // namespace vgbench
