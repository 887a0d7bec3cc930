#include "vgbench/judge.hpp"

#include <algorithm>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "vgbench/error.hpp"
#include "vgbench/text.hpp"

namespace vgbench {

using nlohmann::json;

SpecialtyMap::SpecialtyMap(std::map<std::string, Specialty> entries) {
  for (auto& [k, v] : entries) entries_.emplace(normalize_condition(k), v);
}

SpecialtyMap SpecialtyMap::parse(std::string_view tsv) {
  std::map<std::string, Specialty> entries;
  std::istringstream in{std::string(tsv)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto t = text::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto fields = text::split(line, '\t');
    const auto where = "line " + std::to_string(lineno) + ": ";
    if (fields.size() != 2) throw Error(ErrorCode::MalformedRecord, where + "expected condition<TAB>specialty");
    const auto s = parse_specialty(fields[1]);
    if (!s) throw Error(ErrorCode::UnknownSpecialty, where + "unknown specialty '" + fields[1] + "'");
    const auto key = normalize_condition(fields[0]);
    if (const auto [it, fresh] = entries.emplace(key, *s); !fresh && it->second != *s) {
      throw Error(ErrorCode::MalformedRecord, where + "conflicting specialty for '" + fields[0] + "'");
    }
  }
  return SpecialtyMap(std::move(entries));
}

SpecialtyMap SpecialtyMap::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read specialty map " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::optional<Specialty> SpecialtyMap::lookup(std::string_view condition, const ConditionGraph* kg) const {
  const auto key = normalize_condition(condition);
  if (const auto it = entries_.find(key); it != entries_.end()) return it->second;
  if (!kg) return std::nullopt;
  const auto node = kg->find(key);
  if (!node) return std::nullopt;
  for (const auto& [name, s] : entries_) {
    if (const auto other = kg->find(name); other && kg->same_class(*node, *other)) return s;
  }
  return std::nullopt;
}

std::vector<std::string> SpecialtyMap::uncovered(const Corpus& corpus, const ConditionGraph* kg) const {
  std::vector<std::string> out;
  for (const auto& v : corpus) {
    bool found = lookup(v.gold_diagnosis, kg).has_value();
    for (const auto& s : v.gold_synonyms) found = found || lookup(s, kg).has_value();
    if (!found && std::find(out.begin(), out.end(), v.gold_diagnosis) == out.end()) out.push_back(v.gold_diagnosis);
  }
  return out;
}

std::optional<Specialty> find_specialist_referral(std::string_view text_in) {
  struct Noun {
    std::string_view phrase;
    Specialty specialty;
  };
  static const std::vector<Noun> kNouns = {
      {"cardiologist", Specialty::Cardiovascular},
      {"heart specialist", Specialty::Cardiovascular},
      {"dermatologist", Specialty::Dermatology},
      {"skin specialist", Specialty::Dermatology},
      {"endocrinologist", Specialty::Endocrine},
      {"otolaryngologist", Specialty::ENT},
      {"ent specialist", Specialty::ENT},
      {"ent doctor", Specialty::ENT},
      {"ear nose and throat", Specialty::ENT},
      {"gastroenterologist", Specialty::Gastroenterology},
      {"hematologist", Specialty::Hematology},
      {"haematologist", Specialty::Hematology},
      {"infectious disease specialist", Specialty::InfectiousDiseases},
      {"infectious diseases specialist", Specialty::InfectiousDiseases},
      {"nephrologist", Specialty::Nephrology},
      {"kidney specialist", Specialty::Nephrology},
      {"neurologist", Specialty::Neurology},
      {"gynecologist", Specialty::ObstetricsGynecology},
      {"gynaecologist", Specialty::ObstetricsGynecology},
      {"obstetrician", Specialty::ObstetricsGynecology},
      {"ob gyn", Specialty::ObstetricsGynecology},
      {"obgyn", Specialty::ObstetricsGynecology},
      {"ophthalmologist", Specialty::Ophthalmology},
      {"eye specialist", Specialty::Ophthalmology},
      {"eye doctor", Specialty::Ophthalmology},
      {"orthopedist", Specialty::OrthopedicsRheumatology},
      {"orthopaedist", Specialty::OrthopedicsRheumatology},
      {"orthopedic specialist", Specialty::OrthopedicsRheumatology},
      {"orthopaedic specialist", Specialty::OrthopedicsRheumatology},
      {"orthopedic surgeon", Specialty::OrthopedicsRheumatology},
      {"orthopaedic surgeon", Specialty::OrthopedicsRheumatology},
      {"rheumatologist", Specialty::OrthopedicsRheumatology},
      {"pulmonologist", Specialty::Respiratory},
      {"lung specialist", Specialty::Respiratory},
      {"respiratory specialist", Specialty::Respiratory},
      {"urologist", Specialty::Urology},
  };
  const auto norm = " " + text::normalize_text(text_in) + " ";
  std::optional<Specialty> best;
  std::size_t best_pos = std::string::npos;
  for (const auto& n : kNouns) {
    // Plural forms ("cardiologists") count too.
    for (const auto& form : {std::string(n.phrase), std::string(n.phrase) + "s"}) {
      const auto pos = norm.find(" " + form + " ");
      if (pos != std::string::npos && pos < best_pos) {
        best_pos = pos;
        best = n.specialty;
      }
    }
  }
  return best;
}

std::vector<std::string> condition_lexicon(const ConditionGraph& kg, const SpecialtyMap& map) {
  std::set<std::string> all;
  for (auto& n : kg.names()) all.insert(n);
  for (const auto& [k, v] : map.entries()) all.insert(k);
  std::vector<std::string> out(all.begin(), all.end());
  std::stable_sort(out.begin(), out.end(), [](const std::string& a, const std::string& b) {
    return text::split(a, ' ').size() > text::split(b, ' ').size();
  });
  return out;
}

std::vector<std::string> find_conditions(std::string_view text_in, const std::vector<std::string>& lexicon) {
  const auto toks = text::tokens(text_in);
  std::vector<std::vector<std::string>> split_lex;
  split_lex.reserve(lexicon.size());
  for (const auto& l : lexicon) split_lex.push_back(text::split(l, ' '));

  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < toks.size()) {
    std::size_t best = 0;
    const std::string* hit = nullptr;
    for (std::size_t k = 0; k < lexicon.size(); ++k) {
      const auto& p = split_lex[k];
      if (p.empty() || p.size() <= best || p.size() > toks.size() - i) continue;
      if (std::equal(p.begin(), p.end(), toks.begin() + static_cast<std::ptrdiff_t>(i))) {
        best = p.size();
        hit = &lexicon[k];
      }
    }
    if (hit) {
      out.push_back(*hit);
      i += best;
    } else {
      ++i;
    }
  }
  return out;
}

Candidates extract_candidates(const Conversation& c, const std::vector<std::string>& lexicon) {
  Candidates out;
  const auto& turns = c.turns();
  for (auto it = turns.rbegin(); it != turns.rend(); ++it) {
    if (it->role != Speaker::HealthAi) continue;
    if (!out.explicit_referral) out.explicit_referral = find_specialist_referral(it->text);
    if (out.diagnoses.size() >= 2 || !has_assessment_cue(it->text)) continue;
    for (auto& name : find_conditions(it->text, lexicon)) {
      if (out.diagnoses.size() >= 2) break;
      if (std::find(out.diagnoses.begin(), out.diagnoses.end(), name) != out.diagnoses.end()) continue;
      if (out.diagnoses.empty()) out.source_turn = it->index;
      out.diagnoses.push_back(std::move(name));
    }
  }
  if (out.diagnoses.empty()) {
    throw Error(ErrorCode::NoDiagnosisExtracted, "no assessment naming a condition in case " + c.vignette_id());
  }
  return out;
}

ReferralResolution resolve_referral(const Candidates& cand, const ClinicalVignette& v, const SpecialtyMap& map,
                                    const ConditionGraph* kg) {
  ReferralResolution r;
  if (cand.explicit_referral) {
    r.specialty = cand.explicit_referral;
  } else if (!cand.diagnoses.empty()) {
    r.specialty = map.lookup(cand.diagnoses.front(), kg);
  }
  if (r.specialty) r.correct = *r.specialty == v.gold_specialty;
  return r;
}

std::string_view to_string(JudgeKind k) noexcept { return k == JudgeKind::Automated ? "automated" : "human"; }

VerdictRecord CaseJudgment::current() const {
  return VerdictRecord{top1, top2, referral_correct, judge_kind, judge, rationale, timestamp};
}

MatchVerdict combine_top2(MatchVerdict rank1, std::optional<MatchVerdict> rank2) {
  if (!rank2) return rank1;
  if (rank1.is_match()) return rank1;
  if (rank2->is_match()) return *rank2;
  if (!rank1.resolved() || !rank2->resolved()) return {MatchRule::Unresolved};
  return rank1;
}

namespace {

json verdict_json(const VerdictRecord& r) {
  json j = {
      {"top1", to_string(r.top1.rule)},
      {"top2", to_string(r.top2.rule)},
      {"referral_correct", r.referral_correct ? json(*r.referral_correct) : json(nullptr)},
      {"judge_kind", to_string(r.judge_kind)},
      {"judge", r.judge},
      {"rationale", r.rationale},
      {"timestamp", r.timestamp},
  };
  return j;
}

MatchVerdict rule_field(const json& j, const char* key) {
  const auto r = parse_match_rule(j.at(key).get<std::string>());
  if (!r) throw Error(ErrorCode::MalformedRecord, std::string("unknown rule in '") + key + "'");
  return {*r};
}

JudgeKind kind_field(const json& j) {
  const auto k = j.at("judge_kind").get<std::string>();
  if (k == "automated") return JudgeKind::Automated;
  if (k == "human") return JudgeKind::Human;
  throw Error(ErrorCode::MalformedRecord, "unknown judge_kind '" + k + "'");
}

std::optional<bool> optional_bool(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<bool>();
}

VerdictRecord verdict_from_json(const json& j) {
  VerdictRecord r;
  r.top1 = rule_field(j, "top1");
  r.top2 = rule_field(j, "top2");
  r.referral_correct = optional_bool(j, "referral_correct");
  r.judge_kind = kind_field(j);
  r.judge = j.at("judge").get<std::string>();
  r.rationale = j.value("rationale", "");
  r.timestamp = j.value("timestamp", "");
  return r;
}

std::string describe(std::string_view predicted, std::string_view gold, MatchVerdict v) {
  auto out = "'" + std::string(predicted) + "' vs '" + std::string(gold) + "': " + std::string(to_string(v.rule));
  if (v.resolved()) out += " " + std::string(rule_title(v.rule));
  return out;
}

}  // namespace

json to_json(const CaseJudgment& j) {
  json out = verdict_json(j.current());
  out["case_id"] = j.case_id;
  out["candidates"] = j.candidates;
  out["referral_specialty"] = j.referral_specialty ? json(specialty_name(*j.referral_specialty)) : json(nullptr);
  out["escalation"] = j.escalation ? json(*j.escalation) : json(nullptr);
  out["pending"] = j.pending();
  json hist = json::array();
  for (const auto& h : j.history) hist.push_back(verdict_json(h));
  out["history"] = hist;
  return out;
}

CaseJudgment case_judgment_from_json(const json& j) {
  try {
    CaseJudgment c;
    c.case_id = j.at("case_id").get<std::string>();
    c.candidates = j.at("candidates").get<std::vector<std::string>>();
    if (const auto& rs = j.at("referral_specialty"); !rs.is_null()) {
      const auto s = parse_specialty(rs.get<std::string>());
      if (!s) throw Error(ErrorCode::MalformedRecord, "unknown referral specialty");
      c.referral_specialty = *s;
    }
    const auto cur = verdict_from_json(j);
    c.top1 = cur.top1;
    c.top2 = cur.top2;
    c.referral_correct = cur.referral_correct;
    c.judge_kind = cur.judge_kind;
    c.judge = cur.judge;
    c.rationale = cur.rationale;
    c.timestamp = cur.timestamp;
    if (const auto e = j.find("escalation"); e != j.end() && !e->is_null()) c.escalation = e->get<std::string>();
    if (const auto h = j.find("history"); h != j.end()) {
      for (const auto& rec : *h) c.history.push_back(verdict_from_json(rec));
    }
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedRecord, std::string("judgment record: ") + e.what());
  }
}

LlmJudge::LlmJudge(ModelGateway gateway, std::string model, SamplingControls sampling)
    : gateway_(std::move(gateway)), model_(std::move(model)), sampling_(sampling) {}

ChatRequest LlmJudge::request(std::string_view predicted, std::string_view gold) const {
  static constexpr std::string_view kRubric =
      "You compare a diagnosis proposed by a health assistant with the reference diagnosis of a clinical case.\n"
      "Pick exactly one rule id:\n"
      "M1 the two names are the same condition written identically.\n"
      "M2 the proposal is another accepted name for the reference condition.\n"
      "M3 the proposal is a more specific form of the reference condition.\n"
      "M4 the proposal is a longer description that a second physician would accept as the reference "
      "condition.\n"
      "M5 the proposal directly and explicitly causes the reference condition.\n"
      "N1 related but less precise, so not a match.\n"
      "N2 the proposal is a broader category containing the reference condition, so not a match.\n"
      "N3 a distinct condition with many shared symptoms, so not a match.\n"
      "If none applies, pick the closest non-match id.\n"
      "Answer with a single line of the form RULE: <id>.";
  ChatRequest req;
  req.model = model_;
  req.sampling = sampling_;
  req.messages.push_back({ChatRole::System, std::string(kRubric)});
  req.messages.push_back({ChatRole::User, "Proposed: " + std::string(predicted) + "\nReference: " + std::string(gold)});
  return req;
}

std::optional<MatchRule> LlmJudge::parse_reply(std::string_view reply) {
  static const std::regex kRule(R"(RULE:\s*([MN][1-5]))", std::regex::icase);
  const std::string s(reply);
  std::smatch m;
  if (!std::regex_search(s, m, kRule)) return std::nullopt;
  auto id = m[1].str();
  id[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(id[0])));
  const auto r = parse_match_rule(id);
  if (!r || *r == MatchRule::Unresolved) return std::nullopt;
  return r;
}

MatchVerdict LlmJudge::classify(std::string_view predicted, std::string_view gold) const {
  const auto reply = gateway_.chat(request(predicted, gold)).text;
  const auto r = parse_reply(reply);
  return r ? MatchVerdict{*r} : MatchVerdict{MatchRule::Unresolved};
}

CaseJudgment judge_case(const Conversation& c, const ClinicalVignette& v, const JudgeContext& ctx,
                        std::string timestamp) {
  CaseJudgment j;
  j.case_id = v.id;
  j.judge_kind = JudgeKind::Automated;
  j.judge = std::string(kRuleJudgeId);
  j.timestamp = std::move(timestamp);

  const auto lexicon = condition_lexicon(ctx.kg, ctx.map);
  std::vector<std::string> notes;
  std::vector<std::string> reasons;
  Candidates cand;
  try {
    cand = extract_candidates(c, lexicon);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NoDiagnosisExtracted) throw;
    reasons.push_back(e.what());
    for (auto it = c.turns().rbegin(); it != c.turns().rend() && !cand.explicit_referral; ++it) {
      if (it->role == Speaker::HealthAi) cand.explicit_referral = find_specialist_referral(it->text);
    }
  }
  j.candidates = cand.diagnoses;

  bool used_llm = false;
  auto classify = [&](const std::string& predicted) {
    auto verdict = match_diagnosis(predicted, v.gold_diagnosis, ctx.kg, v.gold_synonyms);
    if (!verdict.resolved() && ctx.llm) {
      verdict = ctx.llm->classify(predicted, v.gold_diagnosis);
      used_llm = used_llm || verdict.resolved();
    }
    notes.push_back(describe(predicted, v.gold_diagnosis, verdict));
    return verdict;
  };

  if (!cand.diagnoses.empty()) {
    const auto rank1 = classify(cand.diagnoses[0]);
    std::optional<MatchVerdict> rank2;
    if (cand.diagnoses.size() > 1) rank2 = classify(cand.diagnoses[1]);
    j.top1 = rank1;
    j.top2 = combine_top2(rank1, rank2);
    if (!j.top1.resolved()) reasons.push_back("top-1 unresolved");
    if (!j.top2.resolved()) reasons.push_back("top-2 unresolved");
  }

  const auto referral = resolve_referral(cand, v, ctx.map, &ctx.kg);
  j.referral_specialty = referral.specialty;
  j.referral_correct = referral.correct;
  if (referral.specialty) {
    notes.push_back(std::string(cand.explicit_referral ? "explicit referral: " : "referral via map: ") +
                    std::string(specialty_name(*referral.specialty)));
  } else {
    reasons.push_back("referral unresolved");
  }

  if (used_llm) j.judge += "+llm:" + ctx.llm->model();
  for (std::size_t i = 0; i < notes.size(); ++i) j.rationale += (i ? "; " : "") + notes[i];
  if (!reasons.empty()) {
    std::string e;
    for (std::size_t i = 0; i < reasons.size(); ++i) e += (i ? "; " : "") + reasons[i];
    j.escalation = e;
  }
  return j;
}

CaseJudgment apply_human_verdict(const CaseJudgment& current, const HumanVerdict& verdict, const std::string& judge,
                                 const std::string& timestamp) {
  if (verdict.top1 == MatchRule::Unresolved || verdict.top2 == MatchRule::Unresolved) {
    throw Error(ErrorCode::MalformedRule, "a human verdict must name a rule from M1..M5 or N1..N3");
  }
  if (is_match_rule(verdict.top1) && !is_match_rule(verdict.top2)) {
    throw Error(ErrorCode::InvalidVerdict, "top-1 match requires a top-2 match");
  }
  if (judge.empty()) throw Error(ErrorCode::InvalidVerdict, "judge identity required");
  CaseJudgment next = current;
  next.history.push_back(current.current());
  next.top1 = {verdict.top1};
  next.top2 = {verdict.top2};
  if (verdict.referral_correct) next.referral_correct = verdict.referral_correct;
  if (!next.referral_correct) throw Error(ErrorCode::InvalidVerdict, "referral correctness undetermined");
  next.judge_kind = JudgeKind::Human;
  next.judge = judge;
  next.rationale = verdict.rationale;
  next.timestamp = timestamp;
  next.escalation.reset();
  return next;
}

JudgmentBook::JudgmentBook(std::vector<CaseJudgment> judgments) {
  for (auto& j : judgments) {
    auto id = j.case_id;
    by_case_.insert_or_assign(std::move(id), std::move(j));
  }
}

JudgmentBook::JudgmentBook(const JudgmentBook& other) {
  std::lock_guard lock(other.mu_);
  by_case_ = other.by_case_;
}

JudgmentBook& JudgmentBook::operator=(const JudgmentBook& other) {
  if (this == &other) return *this;
  std::scoped_lock lock(mu_, other.mu_);
  by_case_ = other.by_case_;
  return *this;
}

void JudgmentBook::put(CaseJudgment j) {
  std::lock_guard lock(mu_);
  auto id = j.case_id;
  by_case_.insert_or_assign(std::move(id), std::move(j));
}

std::optional<CaseJudgment> JudgmentBook::find(std::string_view case_id) const {
  std::lock_guard lock(mu_);
  const auto it = by_case_.find(case_id);
  if (it == by_case_.end()) return std::nullopt;
  return it->second;
}

bool JudgmentBook::contains(std::string_view case_id) const {
  std::lock_guard lock(mu_);
  return by_case_.find(case_id) != by_case_.end();
}

CaseJudgment JudgmentBook::apply_human_verdict(std::string_view case_id, const HumanVerdict& verdict,
                                               const std::string& judge, const std::string& timestamp) {
  std::lock_guard lock(mu_);
  const auto it = by_case_.find(case_id);
  if (it == by_case_.end()) throw Error(ErrorCode::UnknownCase, "unknown case '" + std::string(case_id) + "'");
  auto next = vgbench::apply_human_verdict(it->second, verdict, judge, timestamp);
  it->second = next;
  return next;
}

std::vector<CaseJudgment> JudgmentBook::all() const {
  std::lock_guard lock(mu_);
  std::vector<CaseJudgment> out;
  out.reserve(by_case_.size());
  for (const auto& [k, v] : by_case_) out.push_back(v);
  return out;
}

std::vector<CaseJudgment> JudgmentBook::pending() const {
  std::lock_guard lock(mu_);
  std::vector<CaseJudgment> out;
  for (const auto& [k, v] : by_case_) {
    if (v.pending()) out.push_back(v);
  }
  return out;
}

std::size_t JudgmentBook::size() const {
  std::lock_guard lock(mu_);
  return by_case_.size();
}

}  // namespace vgbench
