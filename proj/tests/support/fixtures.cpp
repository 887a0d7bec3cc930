#include "fixtures.hpp"

#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "vgbench/clock.hpp"
#include "vgbench/digest.hpp"
#include "vgbench/error.hpp"
#include "vgbench/run_store.hpp"

#ifndef VGBENCH_DATA_DIR
#error "VGBENCH_DATA_DIR must be defined"
#endif

namespace vgbench::fixtures {

using json = nlohmann::json;

std::filesystem::path data_dir() { return VGBENCH_DATA_DIR; }
std::filesystem::path fixture_dir() { return data_dir() / "fixtures"; }

std::map<std::string, Script> load_scripts(const std::filesystem::path& path) {
  const auto j = json::parse(read_file(path));
  std::map<std::string, Script> out;
  for (const auto& [id, s] : j.items()) {
    out[id] = Script{s.at("patient").get<std::vector<std::string>>(), s.at("ai").get<std::vector<std::string>>()};
  }
  return out;
}

ScriptedProvider::ScriptedProvider(std::map<std::string, Script> scripts, Speaker role)
    : scripts_(std::move(scripts)), role_(role) {}

ChatResponse ScriptedProvider::complete(const ChatRequest& req, std::chrono::milliseconds) {
  const auto it = scripts_.find(req.tag.conversation_id);
  if (it == scripts_.end()) throw ProviderError(false, "no script for " + req.tag.conversation_id);
  const auto& lines = role_ == Speaker::PatientActor ? it->second.patient : it->second.ai;
  const auto k = static_cast<std::size_t>(req.tag.turn_index / 2);
  if (k >= lines.size()) throw ProviderError(false, "script exhausted for " + req.tag.conversation_id);
  std::lock_guard lock(mu_);
  served_[{req.tag.conversation_id, req.tag.turn_index}] = fingerprint(req);
  ++calls_;
  return ChatResponse{lines[k], {}};
}

std::string ScriptedProvider::fingerprint_at(const std::string& id, int turn_index) const {
  std::lock_guard lock(mu_);
  const auto it = served_.find({id, turn_index});
  return it == served_.end() ? std::string{} : it->second;
}

int ScriptedProvider::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

TempDir::TempDir() : path_(std::filesystem::temp_directory_path() / ("vgbench-test-" + random_hex(8))) {
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

cli::HarnessConfig replay_config(const std::filesystem::path& runs_dir, const std::string& run_id,
                                 const std::string& corpus, const std::string& sut_cassette) {
  cli::HarnessConfig c;
  c.corpus = fixture_dir() / corpus;
  c.runs_dir = runs_dir;
  c.run_id = run_id;
  c.sut_name = "fixture";
  c.sut_version = "1";
  c.sut_model = kFixtureSutModel;
  c.actor_model = kFixtureActorModel;
  c.mode = GatewayMode::Replay;
  c.actor_cassette = fixture_dir() / "actor.cassette";
  c.sut_cassette = fixture_dir() / sut_cassette;
  c.knowledge_graph = data_dir() / "conditions.tsv";
  c.specialty_map = data_dir() / "specialty_map.tsv";
  c.baseline = data_dir() / "baseline_questions.tsv";
  return c;
}

SystemUnderTest fixture_sut(std::shared_ptr<const ModelGateway> gateway) {
  return SystemUnderTest{"fixture", "1", kFixtureSutModel, std::move(gateway)};
}

LoopPolicy fixture_policy() {
  LoopPolicy p;
  p.actor.model = kFixtureActorModel;
  return p;
}

FixtureCassettes record_fixture_cassettes(const Corpus& corpus, const std::map<std::string, Script>& scripts) {
  auto actor_p = std::make_shared<ScriptedProvider>(scripts, Speaker::PatientActor);
  auto sut_p = std::make_shared<ScriptedProvider>(scripts, Speaker::HealthAi);
  auto actor_c = std::make_shared<Cassette>();
  auto sut_c = std::make_shared<Cassette>();
  const auto actor_gw = ModelGateway::record(actor_p, actor_c);
  const auto sut = fixture_sut(std::make_shared<const ModelGateway>(ModelGateway::record(sut_p, sut_c)));

  for (const auto& v : corpus) {
    if (!scripts.count(v.id)) continue;
    LogicalClock clock;
    ConversationEnv env;
    env.run_id = "fixture";
    env.clock = &clock;
    const auto c = run_conversation(v, sut, actor_gw, fixture_policy(), env);
    if (c.terminal_state() != TerminalState::ClosedNormally) {
      throw Error(ErrorCode::InvalidConfig, "fixture " + v.id + " ended " + std::string(to_string(c.terminal_state())) +
                                                ": " + c.failure().value_or(""));
    }
  }

  FixtureCassettes out;
  out.actor = actor_c->serialize();
  out.sut = sut_c->serialize();
  const auto dropped = sut_p->fingerprint_at("uro-001", 3);
  for (const auto& e : sut_c->entries()) {
    if (e.fingerprint != dropped) out.sut_partial += Cassette::serialize_entry(e);
  }
  return out;
}

// ---- table fixture --------------------------------------------------------

const std::vector<ReferenceCounts>& reference_counts() {
  static const std::vector<ReferenceCounts> kCounts = {
      {Specialty::Cardiovascular, 45, 36, 37, 42},
      {Specialty::Dermatology, 13, 13, 13, 13},
      {Specialty::Endocrine, 18, 14, 14, 17},
      {Specialty::ENT, 25, 22, 23, 25},
      {Specialty::Gastroenterology, 43, 36, 39, 43},
      {Specialty::Hematology, 23, 16, 16, 17},
      {Specialty::InfectiousDiseases, 29, 20, 22, 28},
      {Specialty::Nephrology, 16, 13, 13, 14},
      {Specialty::Neurology, 21, 17, 17, 21},
      {Specialty::ObstetricsGynecology, 52, 44, 47, 51},
      {Specialty::Ophthalmology, 18, 14, 16, 18},
      {Specialty::OrthopedicsRheumatology, 32, 25, 25, 30},
      {Specialty::Respiratory, 36, 31, 32, 35},
      {Specialty::Urology, 29, 26, 26, 29},
  };
  return kCounts;
}

namespace {

constexpr std::array<const char*, kSpecialtyCount> kCodes = {
    "cardio", "derm", "endo", "ent", "gi", "hema", "infect", "neph", "neuro", "obgyn", "ophth", "ortho", "resp", "uro"};

constexpr std::array<const char*, 8> kComplaints = {
    "a dull pain in the chest", "an itchy rash",         "tiredness and weight loss", "a sore throat",
    "pain in the belly",        "bruising on the legs", "a high fever",              "swelling of the ankles"};

}  // namespace

TableFixture make_table_fixture() {
  const auto map = SpecialtyMap::load(data_dir() / "specialty_map.tsv");
  std::map<Specialty, std::vector<std::string>> conditions;
  for (const auto& [name, s] : map.entries()) conditions[s].push_back(name);

  // cases per labelled outcome in canonical specialty order; the first
  // `quota` of each kind are common, the rest less common
  struct Key {
    Outcome o;
    bool ref;
    auto operator<=>(const Key&) const = default;
  };
  std::map<Key, int> common_quota = {
      {{Outcome::Top1, true}, 194}, {{Outcome::Top2Only, true}, 8}, {{Outcome::Miss, false}, 3}, {{Outcome::Miss, true}, 17}};
  std::map<Key, int> seen;

  std::vector<ClinicalVignette> vignettes;
  std::vector<TableCase> cases;
  int serial = 0;
  for (const auto& row : reference_counts()) {
    const int t2 = row.top2 - row.top1;
    const int miss = row.total - row.top2;
    const int ref_wrong = row.total - row.referral;
    std::vector<Key> keys;
    keys.insert(keys.end(), row.top1, Key{Outcome::Top1, true});
    keys.insert(keys.end(), t2, Key{Outcome::Top2Only, true});
    keys.insert(keys.end(), ref_wrong, Key{Outcome::Miss, false});
    keys.insert(keys.end(), miss - ref_wrong, Key{Outcome::Miss, true});
    const auto& names = conditions.at(row.specialty);
    for (std::size_t k = 0; k < keys.size(); ++k, ++serial) {
      ClinicalVignette v;
      char id[32];
      std::snprintf(id, sizeof id, "%s-s%03zu", kCodes[index_of(row.specialty)], k + 1);
      v.id = id;
      v.specialty = row.specialty;
      v.gold_specialty = row.specialty;
      v.age = 1 + (serial * 37) % 95;
      v.sex = serial % 2 ? Sex::Female : Sex::Male;
      const char* who = v.age < 18 ? (v.sex == Sex::Male ? "boy" : "girl") : (v.sex == Sex::Male ? "man" : "woman");
      v.narrative = "A " + std::to_string(v.age) + "-year-old " + who + " reports " +
                    kComplaints[static_cast<std::size_t>(serial) % kComplaints.size()] + " for " +
                    std::to_string(2 + serial % 12) + " days.";
      v.gold_diagnosis = names[k % names.size()];
      v.course = serial % 3 == 0 ? DiseaseCourse::Chronic : DiseaseCourse::Acute;
      v.presentation = static_cast<PresentationClass>(serial % 3);
      const auto key = keys[k];
      v.incidence = seen[key]++ < common_quota.at(key) ? IncidenceClass::Common : IncidenceClass::LessCommon;
      vignettes.push_back(std::move(v));
      cases.push_back(TableCase{key.o, key.ref});
    }
  }
  // round-trip through the file format so the hash is the file hash
  const auto corpus = parse_corpus(serialize_corpus(Corpus(std::move(vignettes), "")));
  return TableFixture{corpus, std::move(cases)};
}

CaseJudgment make_judgment(const std::string& id, MatchRule top1, MatchRule top2, std::optional<bool> referral) {
  CaseJudgment j;
  j.case_id = id;
  j.candidates = {"candidate one", "candidate two"};
  j.top1 = {top1};
  j.top2 = {top2};
  j.referral_correct = referral;
  j.judge = std::string(kRuleJudgeId);
  j.timestamp = "2000-01-01T00:00:00.000Z";
  if (!j.top1.resolved() || !j.top2.resolved()) j.escalation = "unresolved pair";
  return j;
}

std::vector<CaseJudgment> table_judgments(const TableFixture& f) {
  std::vector<CaseJudgment> out;
  for (std::size_t i = 0; i < f.cases.size(); ++i) {
    const auto& id = f.corpus.vignettes()[i].id;
    switch (f.cases[i].outcome) {
      case Outcome::Top1: out.push_back(make_judgment(id, MatchRule::M1, MatchRule::M1, f.cases[i].referral_correct)); break;
      case Outcome::Top2Only: out.push_back(make_judgment(id, MatchRule::N3, MatchRule::M2, f.cases[i].referral_correct)); break;
      case Outcome::Miss: out.push_back(make_judgment(id, MatchRule::N3, MatchRule::N3, f.cases[i].referral_correct)); break;
    }
  }
  return out;
}

}  // namespace vgbench::fixtures
