// Hot paths of a benchmark run: rubric matching, candidate scanning,
// cassette lookup, full replayed conversations and report aggregation.
#include <random>

#include <benchmark/benchmark.h>

#include "vgbench/condition_graph.hpp"
#include "vgbench/gateway.hpp"
#include "vgbench/judge.hpp"
#include "vgbench/metrics.hpp"
#include "vgbench/orchestrator.hpp"

using namespace vgbench;

namespace {

const std::filesystem::path kData = VGBENCH_DATA_DIR;

const ConditionGraph& graph() {
  static const auto g = ConditionGraph::load(kData / "conditions.tsv");
  return g;
}

const std::vector<std::string>& lexicon() {
  static const auto l = condition_lexicon(graph(), SpecialtyMap::load(kData / "specialty_map.tsv"));
  return l;
}

const Corpus& corpus400() {
  static const auto c = load_corpus(kData / "fixtures" / "corpus400.jsonl");
  return c;
}

}  // namespace

static void BM_MatchDiagnosis(benchmark::State& state) {
  const auto names = graph().names();
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& a = names[i % names.size()];
    const auto& b = names[(i * 7 + 3) % names.size()];
    benchmark::DoNotOptimize(match_diagnosis(a, b, graph()));
    ++i;
  }
}
BENCHMARK(BM_MatchDiagnosis);

static void BM_MatchDiagnosisAllPairs(benchmark::State& state) {
  const auto names = graph().names();
  for (auto _ : state) {
    for (const auto& a : names) {
      for (const auto& b : names) benchmark::DoNotOptimize(match_diagnosis(a, b, graph()));
    }
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(names.size() * names.size()));
}
BENCHMARK(BM_MatchDiagnosisAllPairs)->Unit(benchmark::kMillisecond);

static void BM_FindConditions(benchmark::State& state) {
  const std::string text =
      "Based on what you've told me, this sounds like it could be rotator cuff tendinitis, possibly with some "
      "shoulder impingement. Less likely would be a frozen shoulder or a referred pain from the neck. I'd suggest "
      "rest, ice and seeing an orthopedic specialist if it does not improve within two weeks.";
  for (auto _ : state) benchmark::DoNotOptimize(find_conditions(text, lexicon()));
  state.SetBytesProcessed(state.iterations() * static_cast<int64_t>(text.size()));
}
BENCHMARK(BM_FindConditions);

static void BM_CassetteLookup(benchmark::State& state) {
  const auto n = static_cast<int>(state.range(0));
  Cassette cassette;
  std::vector<std::string> fps;
  for (int i = 0; i < n; ++i) {
    ChatRequest req{"m", {{ChatRole::User, "message " + std::to_string(i)}}, {}, {}};
    fps.push_back(fingerprint(req));
    cassette.record(fps.back(), "reply " + std::to_string(i));
  }
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(cassette.find(fps[i++ % fps.size()]));
}
BENCHMARK(BM_CassetteLookup)->Range(64, 16384);

static void BM_Fingerprint(benchmark::State& state) {
  ChatRequest req{"m", {{ChatRole::System, std::string(4000, 'x')}}, {}, {}};
  for (int i = 0; i < 20; ++i) {
    req.messages.push_back({i % 2 ? ChatRole::Assistant : ChatRole::User, "How long has this been going on?"});
  }
  for (auto _ : state) benchmark::DoNotOptimize(fingerprint(req));
}
BENCHMARK(BM_Fingerprint);

static void BM_ReplayConversation(benchmark::State& state) {
  const auto trio = load_corpus(kData / "fixtures" / "vignettes.jsonl");
  const auto actor_c = Cassette::open(kData / "fixtures" / "actor.cassette");
  const auto sut_c = Cassette::open(kData / "fixtures" / "sut.cassette");
  const SystemUnderTest sut{"fixture", "1", "fixture-sut",
                            std::make_shared<const ModelGateway>(ModelGateway::replay(sut_c))};
  const auto actor = ModelGateway::replay(actor_c);
  LoopPolicy policy;
  policy.actor.model = "patient-actor";
  for (auto _ : state) {
    LogicalClock clock;
    ConversationEnv env;
    env.run_id = "bench";
    env.clock = &clock;
    benchmark::DoNotOptimize(run_conversation(*trio.find("ortho-001"), sut, actor, policy, env));
  }
}
BENCHMARK(BM_ReplayConversation)->Unit(benchmark::kMicrosecond);

static void BM_Aggregate400(benchmark::State& state) {
  std::mt19937 rng(1);
  const MatchRule rules[] = {MatchRule::M1, MatchRule::M2, MatchRule::M4, MatchRule::N1, MatchRule::N3};
  std::vector<CaseJudgment> js;
  for (const auto& v : corpus400()) {
    CaseJudgment j;
    j.case_id = v.id;
    j.top1 = MatchVerdict{rules[rng() % std::size(rules)]};
    j.top2 = combine_top2(j.top1, MatchVerdict{rules[rng() % std::size(rules)]});
    j.referral_correct = rng() % 10 != 0;
    js.push_back(std::move(j));
  }
  for (auto _ : state) benchmark::DoNotOptimize(aggregate(js, {}, corpus400()));
}
BENCHMARK(BM_Aggregate400)->Unit(benchmark::kMicrosecond);

static void BM_RenderReport(benchmark::State& state) {
  std::vector<CaseJudgment> js;
  for (const auto& v : corpus400()) {
    CaseJudgment j;
    j.case_id = v.id;
    j.top1 = j.top2 = MatchVerdict{MatchRule::M1};
    j.referral_correct = true;
    js.push_back(std::move(j));
  }
  const auto report = aggregate(js, {}, corpus400());
  const auto format = static_cast<ReportFormat>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(render(report, format));
}
BENCHMARK(BM_RenderReport)->DenseRange(0, 2);
BENCHMARK_MAIN();
