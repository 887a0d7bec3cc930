#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <set>
#include <thread>

#include "vgbench/clock.hpp"
#include "vgbench/condition_graph.hpp"
#include "vgbench/error.hpp"
#include "vgbench/judge.hpp"
#include "vgbench/openai_provider.hpp"
#include "vgbench/orchestrator.hpp"
#include "vgbench/patient_actor.hpp"
#include "vgbench/review_service.hpp"
#include "vgbench/run_store.hpp"

#ifndef VGBENCH_DATA_DIR
#define VGBENCH_DATA_DIR "data"
#endif

namespace vgbench::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

int exit_code_for(const Error& e) noexcept {
  switch (e.code()) {
    case ErrorCode::Io:
    case ErrorCode::GatewayUnavailable:
    case ErrorCode::ProviderFailure:
    case ErrorCode::CorruptManifest:
    case ErrorCode::Unauthorized:
      return kEnvironment;
    default:
      return kDomain;
  }
}

// ---- config ---------------------------------------------------------------

namespace {

const std::set<std::string> kKeys = {
    "corpus",          "filter",         "runs_dir",       "run_id",           "sut_name",
    "sut_version",     "sut_model",      "sut_base_url",   "sut_key_env",      "actor_model",
    "actor_base_url",  "provider_base_url", "judge_model", "mode",             "actor_cassette",
    "sut_cassette",    "judge_cassette", "workers",        "max_turns",        "retries",
    "timeout_ms",      "rate_limit_requests", "rate_limit_interval_ms", "knowledge_graph", "specialty_map",
    "baseline",
};

Error bad_config(const std::string& what) { return Error(ErrorCode::InvalidConfig, what); }

std::string get_string(const json& j, const std::string& key) {
  const auto& v = j.at(key);
  if (!v.is_string()) throw bad_config(key + " must be a string");
  return v.get<std::string>();
}

long long get_int(const json& j, const std::string& key) {
  const auto& v = j.at(key);
  if (v.is_number_integer()) return v.get<long long>();
  if (v.is_string()) {
    // environment values arrive as text
    const auto s = v.get<std::string>();
    long long out = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec == std::errc{} && p == s.data() + s.size()) return out;
  }
  throw bad_config(key + " must be an integer");
}

json filter_object(const json& j) {
  if (!j.contains("filter") || j["filter"].is_null()) return json::object();
  if (!j["filter"].is_object()) throw bad_config("filter must be an object");
  json f = j["filter"];
  for (const char* k : {"min_age", "max_age"}) {
    if (f.contains(k)) f[k] = get_int(f, k);
  }
  return f;
}

}  // namespace

const std::map<std::string, std::string>& config_env_vars() {
  static const std::map<std::string, std::string> vars = {
      {"VG_CORPUS", "corpus"},
      {"VG_RUNS_DIR", "runs_dir"},
      {"VG_MODE", "mode"},
      {"VG_SUT_NAME", "sut_name"},
      {"VG_SUT_VERSION", "sut_version"},
      {"VG_SUT_MODEL", "sut_model"},
      {"VG_SUT_BASE_URL", "sut_base_url"},
      {"VG_ACTOR_MODEL", "actor_model"},
      {"VG_JUDGE_MODEL", "judge_model"},
      {"VG_PROVIDER_BASE_URL", "provider_base_url"},
      {"VG_ACTOR_CASSETTE", "actor_cassette"},
      {"VG_SUT_CASSETTE", "sut_cassette"},
      {"VG_JUDGE_CASSETTE", "judge_cassette"},
      {"VG_WORKERS", "workers"},
      {"VG_MAX_TURNS", "max_turns"},
      {"VG_KNOWLEDGE_GRAPH", "knowledge_graph"},
      {"VG_SPECIALTY_MAP", "specialty_map"},
      {"VG_BASELINE", "baseline"},
  };
  return vars;
}

std::map<std::string, std::string> read_env() {
  std::map<std::string, std::string> out;
  auto grab = [&](const std::string& name) {
    if (const char* v = std::getenv(name.c_str()); v && *v) out[name] = v;
  };
  for (const auto& [name, key] : config_env_vars()) grab(name);
  grab("VG_PROVIDER_API_KEY");
  return out;
}

HarnessConfig resolve_config(const json& file, const std::map<std::string, std::string>& env, const json& flags) {
  if (!file.is_null() && !file.is_object()) throw bad_config("config file must hold a JSON object");
  json merged = file.is_null() ? json::object() : file;
  json from_env = json::object();
  for (const auto& [name, key] : config_env_vars()) {
    if (auto it = env.find(name); it != env.end()) from_env[key] = it->second;
  }
  merged.merge_patch(from_env);
  if (!flags.is_null()) merged.merge_patch(flags);

  for (const auto& [k, v] : merged.items()) {
    if (!kKeys.count(k)) throw bad_config("unknown config key: " + k);
  }

  HarnessConfig c;
  c.knowledge_graph = fs::path(VGBENCH_DATA_DIR) / "conditions.tsv";
  c.specialty_map = fs::path(VGBENCH_DATA_DIR) / "specialty_map.tsv";
  c.baseline = fs::path(VGBENCH_DATA_DIR) / "baseline_questions.tsv";

  auto str = [&](const char* key, auto& field) {
    if (merged.contains(key) && !merged[key].is_null()) field = get_string(merged, key);
  };
  auto path = [&](const char* key, auto& field) {
    if (merged.contains(key) && !merged[key].is_null()) field = fs::path(get_string(merged, key));
  };

  path("corpus", c.corpus);
  path("runs_dir", c.runs_dir);
  str("run_id", c.run_id);
  str("sut_name", c.sut_name);
  str("sut_version", c.sut_version);
  str("sut_model", c.sut_model);
  str("sut_key_env", c.sut_key_env);
  str("actor_model", c.actor_model);
  str("judge_model", c.judge_model);
  // the shared provider URL applies unless a more specific one is set
  str("provider_base_url", c.sut_base_url);
  str("provider_base_url", c.actor_base_url);
  str("sut_base_url", c.sut_base_url);
  str("actor_base_url", c.actor_base_url);
  path("actor_cassette", c.actor_cassette);
  path("sut_cassette", c.sut_cassette);
  path("judge_cassette", c.judge_cassette);
  path("knowledge_graph", c.knowledge_graph);
  path("specialty_map", c.specialty_map);
  if (merged.contains("baseline")) {
    if (merged["baseline"].is_null() || merged["baseline"] == "") {
      c.baseline.reset();
    } else {
      c.baseline = fs::path(get_string(merged, "baseline"));
    }
  }

  if (merged.contains("mode")) {
    const auto m = parse_gateway_mode(get_string(merged, "mode"));
    if (!m) throw bad_config("mode must be live, record or replay");
    c.mode = *m;
  }
  if (merged.contains("workers")) c.workers = static_cast<int>(get_int(merged, "workers"));
  if (merged.contains("max_turns")) c.max_turns = static_cast<int>(get_int(merged, "max_turns"));
  if (merged.contains("retries")) c.retries = static_cast<int>(get_int(merged, "retries"));
  if (merged.contains("timeout_ms")) c.timeout_ms = get_int(merged, "timeout_ms");
  if (merged.contains("rate_limit_requests") || merged.contains("rate_limit_interval_ms")) {
    if (!merged.contains("rate_limit_requests") || !merged.contains("rate_limit_interval_ms")) {
      throw bad_config("rate limit needs both rate_limit_requests and rate_limit_interval_ms");
    }
    c.rate_limit = RateLimit{static_cast<int>(get_int(merged, "rate_limit_requests")),
                             std::chrono::milliseconds{get_int(merged, "rate_limit_interval_ms")}};
  }
  try {
    c.filter = corpus_filter_from_json(filter_object(merged));
  } catch (const json::exception& e) {
    throw bad_config(std::string("filter: ") + e.what());
  }
  return c;
}

void check_config(const HarnessConfig& c, const std::map<std::string, std::string>& env) {
  if (c.corpus.empty()) throw bad_config("no corpus given");
  if (c.workers < 1) throw bad_config("workers must be at least 1");
  if (c.max_turns < 2) throw bad_config("max_turns must be at least 2");
  if (c.retries < 1) throw bad_config("retries must be at least 1");
  if (c.timeout_ms <= 0) throw bad_config("timeout_ms must be positive");
  if (c.rate_limit && (c.rate_limit->requests <= 0 || c.rate_limit->interval.count() <= 0)) {
    throw bad_config("rate limit values must be positive");
  }
  if (c.sut_model.empty()) throw bad_config("sut_model is required");
  if (c.mode != GatewayMode::Live && (!c.actor_cassette || !c.sut_cassette)) {
    throw bad_config(std::string(to_string(c.mode)) + " mode needs actor_cassette and sut_cassette");
  }
  if (c.mode == GatewayMode::Replay && c.judge_model && !c.judge_cassette) {
    throw bad_config("replay with a judge model needs judge_cassette");
  }
  if (c.mode != GatewayMode::Replay) {
    if (!env.count("VG_PROVIDER_API_KEY")) throw Error(ErrorCode::Unauthorized, "VG_PROVIDER_API_KEY is not set");
    if (!env.count(c.sut_key_env) && !std::getenv(c.sut_key_env.c_str())) {
      throw Error(ErrorCode::Unauthorized, c.sut_key_env + " is not set");
    }
  }
}

// ---- validate -------------------------------------------------------------

int cmd_validate(const fs::path& corpus, const std::optional<fs::path>& specialty_map, std::ostream& out,
                 std::ostream& err) {
  std::string bytes;
  try {
    bytes = read_file(corpus);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kEnvironment;
  }
  const auto check = check_corpus(bytes);
  for (const auto& issue : check.issues) {
    out << "violation line " << issue.line;
    if (!issue.record_id.empty()) out << " id " << issue.record_id;
    out << " " << to_string(issue.code) << ": " << issue.message << "\n";
  }
  std::set<Specialty> specialties;
  for (const auto& v : check.vignettes) specialties.insert(v.specialty);

  std::size_t uncovered = 0;
  if (specialty_map && check.issues.empty()) {
    try {
      const auto map = SpecialtyMap::load(*specialty_map);
      const Corpus parsed(check.vignettes, "");
      for (const auto& name : map.uncovered(parsed)) {
        out << "violation gold diagnosis without specialty mapping: " << name << "\n";
        ++uncovered;
      }
    } catch (const Error& e) {
      err << "error: " << e.what() << "\n";
      return exit_code_for(e);
    }
  }
  if (check.records == 0 && check.issues.empty()) {
    out << "violation corpus is empty\n";
    return kDomain;
  }
  out << check.vignettes.size() << " vignettes, " << specialties.size() << " specialties";
  if (!check.issues.empty() || uncovered) out << ", " << check.issues.size() + uncovered << " violations";
  out << "\n";
  return check.issues.empty() && uncovered == 0 ? kOk : kDomain;
}

// ---- run ------------------------------------------------------------------

namespace {

ModelGateway make_gateway(GatewayMode mode, const std::string& base_url, const std::string& key,
                          const std::optional<fs::path>& cassette_path, const GatewayPolicy& policy) {
  std::shared_ptr<ChatProvider> provider;
  if (mode != GatewayMode::Replay) provider = std::make_shared<OpenAiCompatibleProvider>(base_url, key);
  std::shared_ptr<Cassette> cassette;
  if (mode != GatewayMode::Live) cassette = Cassette::open(*cassette_path, mode == GatewayMode::Record);
  return ModelGateway(mode, provider, cassette).with_policy(policy);
}

std::string env_or(const std::map<std::string, std::string>& env, const std::string& name) {
  if (auto it = env.find(name); it != env.end()) return it->second;
  if (const char* v = std::getenv(name.c_str())) return v;
  return {};
}

void write_reports(RunStore& store, const std::string& run_id, const BenchmarkReport& r) {
  for (auto f : {ReportFormat::Table, ReportFormat::Csv, ReportFormat::Markdown}) {
    store.write_report(run_id, f, render(r, f));
  }
}

void print_summary(const BenchmarkReport& r, const LoadedRun& run, const fs::path& dir, std::ostream& out) {
  std::size_t verdicts = run.verdicts.size();
  out << "run " << r.run_id << " " << (r.provisional ? "provisional" : "final") << ": "
      << run.conversations.size() << " conversations, " << verdicts << " verdicts, " << r.unresolved
      << " unresolved\n";
  for (const auto& id : r.unresolved_cases) out << "unresolved " << id << "\n";
  out << "report " << (dir / "report.txt").string() << "\n";
}

}  // namespace

RunOutcome cmd_run(const HarnessConfig& config, const std::map<std::string, std::string>& env, std::ostream& out,
                   std::ostream& err, std::stop_token stop) {
  RunOutcome outcome;
  try {
    check_config(config, env);
    const auto full = load_corpus(config.corpus);
    const auto corpus = stratify(full, config.filter);
    if (corpus.empty()) throw bad_config("filter selects no vignettes");
    const auto kg = ConditionGraph::load(config.knowledge_graph);
    const auto map = SpecialtyMap::load(config.specialty_map);
    std::optional<std::string> baseline_bytes;
    if (config.baseline) {
      baseline_bytes = read_file(*config.baseline);
      BaselineTable::parse(*baseline_bytes);
    }
    for (const auto& name : map.uncovered(corpus, &kg)) {
      err << "warning: no specialty mapping for gold diagnosis \"" << name << "\"\n";
    }

    GatewayPolicy policy;
    policy.retries = config.retries;
    policy.timeout = std::chrono::milliseconds{config.timeout_ms};
    policy.rate_limit = config.rate_limit;
    const auto actor_key = env_or(env, "VG_PROVIDER_API_KEY");
    const auto actor_gw = make_gateway(config.mode, config.actor_base_url, actor_key, config.actor_cassette, policy);
    const auto sut_gw = make_gateway(config.mode, config.sut_base_url, env_or(env, config.sut_key_env),
                                     config.sut_cassette, policy);
    std::optional<LlmJudge> llm;
    if (config.judge_model) {
      llm.emplace(make_gateway(config.mode, config.actor_base_url, actor_key, config.judge_cassette, policy),
                  *config.judge_model);
    }

    SystemClock system_clock;
    RunManifest m;
    m.run_id = config.run_id.value_or(make_run_id(system_clock.now()));
    m.corpus_hash = corpus.hash();
    m.filter = config.filter;
    m.case_count = corpus.size();
    m.sut_name = config.sut_name;
    m.sut_version = config.sut_version;
    m.sut_model = config.sut_model;
    m.mode = config.mode;
    m.actor_model = config.actor_model;
    m.judge_model = config.judge_model;
    if (config.actor_cassette) m.actor_cassette = config.actor_cassette->string();
    if (config.sut_cassette) m.sut_cassette = config.sut_cassette->string();
    m.guideline_version = std::string(kGuidelineVersion);
    m.max_turns = config.max_turns;
    m.retries = config.retries;
    m.timeout_ms = config.timeout_ms;
    m.rate_limit = config.rate_limit;
    m.workers = config.workers;
    m.started_at = format_timestamp(system_clock.now());

    RunStore store(config.runs_dir);
    store.open_run(m);
    outcome.run_id = m.run_id;
    store.write_corpus_snapshot(m.run_id, corpus);
    if (baseline_bytes) store.write_baseline_snapshot(m.run_id, *baseline_bytes);
    out << "run " << m.run_id << " started: " << corpus.size() << " cases, " << config.workers << " workers\n";
    out.flush();

    SystemUnderTest sut{config.sut_name, config.sut_version, config.sut_model,
                        std::make_shared<const ModelGateway>(sut_gw)};
    LoopPolicy loop;
    loop.max_turns = config.max_turns;
    loop.actor.model = config.actor_model;
    const ActorLinter linter;
    const JudgeContext ctx{kg, map, llm ? &*llm : nullptr};

    std::mutex out_mu;
    auto emit = [&](const std::string& id, std::string_view state) {
      std::lock_guard lock(out_mu);
      out << "case " << id << " " << state << "\n";
      out.flush();
    };

    std::atomic<std::size_t> next{0};
    const auto& cases = corpus.vignettes();
    auto work = [&] {
      for (;;) {
        if (stop.stop_requested()) return;
        const auto i = next.fetch_add(1);
        if (i >= cases.size()) return;
        const auto& v = cases[i];
        emit(v.id, "started");
        try {
          store.begin_transcript(m.run_id, v.id);
          // replayed transcripts get logical timestamps so reruns are
          // byte-identical
          LogicalClock logical;
          ConversationEnv cenv;
          cenv.run_id = m.run_id;
          cenv.clock = config.mode == GatewayMode::Replay ? static_cast<Clock*>(&logical) : nullptr;
          cenv.linter = &linter;
          cenv.on_turn = [&](const Conversation&, const Turn& t) { store.append_turn(m.run_id, v.id, t); };
          const auto c = run_conversation(v, sut, actor_gw, loop, cenv);
          store.end_transcript(m.run_id, c);
          emit(v.id, to_string(c.terminal_state()));
          if (c.terminal_state() == TerminalState::GatewayFailure) {
            {
              std::lock_guard lock(out_mu);
              err << "case " << v.id << ": " << c.failure().value_or("gateway failure") << "\n";
            }
            emit(v.id, "unresolved");
            continue;
          }
          const auto stamp = c.empty() ? format_timestamp(system_clock.now()) : c.turns().back().timestamp;
          const auto j = judge_case(c, v, ctx, stamp);
          store.append_verdict(m.run_id, j);
          emit(v.id, j.pending() ? "pending" : "judged");
        } catch (const Error& e) {
          {
            std::lock_guard lock(out_mu);
            err << "case " << v.id << ": " << e.what() << "\n";
          }
          emit(v.id, "error");
        }
      }
    };
    {
      std::vector<std::jthread> pool;
      const auto n = std::min<std::size_t>(static_cast<std::size_t>(config.workers), cases.size());
      for (std::size_t w = 0; w < n; ++w) pool.emplace_back(work);
    }
    outcome.interrupted = stop.stop_requested() && next.load() < cases.size();
    if (outcome.interrupted) out << "run " << m.run_id << " interrupted; in-flight cases finished\n";

    store.close_run(m.run_id, format_timestamp(system_clock.now()));
    const auto loaded = store.load_run(m.run_id);
    const auto report = aggregate_run(loaded);
    write_reports(store, m.run_id, report);
    print_summary(report, loaded, store.run_dir(m.run_id), out);
    outcome.exit_code = outcome.interrupted ? kEnvironment : kOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    outcome.exit_code = exit_code_for(e);
  }
  return outcome;
}

// ---- judge ----------------------------------------------------------------

int cmd_judge(const fs::path& runs_dir, const std::string& run_id, const fs::path& knowledge_graph,
              const fs::path& specialty_map, std::ostream& out, std::ostream& err) {
  try {
    RunStore store(runs_dir);
    const auto run = store.load_run(run_id);
    if (!run.corpus) throw Error(ErrorCode::CorruptManifest, "run " + run_id + " has no corpus snapshot");
    const auto kg = ConditionGraph::load(knowledge_graph);
    const auto map = SpecialtyMap::load(specialty_map);
    const JudgeContext ctx{kg, map, nullptr};

    std::map<std::string, const CaseJudgment*> latest;
    for (const auto& j : run.verdicts) latest[j.case_id] = &j;
    int judged = 0, kept = 0;
    for (const auto& c : run.conversations) {
      if (c.terminal_state() == TerminalState::GatewayFailure || c.terminal_state() == TerminalState::InProgress) {
        out << "case " << c.id() << " skipped " << to_string(c.terminal_state()) << "\n";
        continue;
      }
      if (auto it = latest.find(c.id()); it != latest.end() && it->second->judge_kind == JudgeKind::Human) {
        out << "case " << c.id() << " kept human\n";
        ++kept;
        continue;
      }
      const auto* v = run.corpus->find(c.id());
      if (!v) throw Error(ErrorCode::ReferentialIntegrity, "transcript " + c.id() + " not in corpus snapshot");
      const auto stamp = c.empty() ? std::string{} : c.turns().back().timestamp;
      auto j = judge_case(c, *v, ctx, stamp);
      if (auto it = latest.find(c.id()); it != latest.end()) {
        // keep the audit trail of earlier automated verdicts
        j.history = it->second->history;
        if (!(it->second->current() == j.current())) j.history.push_back(it->second->current());
      }
      store.append_verdict(run_id, j);
      out << "case " << c.id() << " " << (j.pending() ? "pending" : "judged") << "\n";
      ++judged;
    }
    const auto loaded = store.load_run(run_id);
    const auto report = aggregate_run(loaded);
    write_reports(store, run_id, report);
    out << judged << " judged, " << kept << " human verdicts kept\n";
    print_summary(report, loaded, store.run_dir(run_id), out);
    return kOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

// ---- report ---------------------------------------------------------------

int cmd_report(const fs::path& runs_dir, const std::string& run_id, ReportFormat format, bool to_stdout,
               std::ostream& out, std::ostream& err) {
  try {
    RunStore store(runs_dir);
    const auto run = store.load_run(run_id);
    const auto report = aggregate_run(run);
    const auto text = render(report, format);
    store.write_report(run_id, format, text);
    if (to_stdout) {
      out << text;
    } else {
      out << (store.run_dir(run_id) / ("report." + std::string(file_extension(format)))).string() << "\n";
    }
    if (report.provisional) err << "provisional: " << report.unresolved << " unresolved\n";
    if (run.partial) err << "warning: run is partial (" << run.skipped_records << " unreadable records)\n";
    return kOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

// ---- serve-review ---------------------------------------------------------

std::pair<std::string, int> parse_bind_address(const std::string& bind) {
  const auto colon = bind.rfind(':');
  if (colon == std::string::npos) throw bad_config("bind address must be host:port: " + bind);
  std::string host = bind.substr(0, colon);
  const auto port_text = std::string_view(bind).substr(colon + 1);
  int port = -1;
  auto [p, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
  if (ec != std::errc{} || p != port_text.data() + port_text.size() || port < 0 || port > 65535) {
    throw bad_config("bad port in bind address: " + bind);
  }
  if (host.empty()) host = "127.0.0.1";
  return {host, port};
}

int cmd_serve_review(const ServeOptions& options, std::ostream& out, std::ostream& err, std::stop_token stop) {
  try {
    const auto [host, port] = parse_bind_address(options.bind);
    if (options.lease_minutes <= 0) throw bad_config("lease minutes must be positive");
    RunStore store(options.runs_dir);
    if (!store.exists(options.run_id)) throw Error(ErrorCode::UnknownRun, options.run_id);
    SystemClock clock;
    ReviewService service(store, options.run_id, clock, std::chrono::minutes{options.lease_minutes});

    TokenAuthority tokens;
    if (options.tokens_file) tokens.allow_file(*options.tokens_file);
    auto judges = options.judges;
    if (judges.empty() && !options.tokens_file) judges.push_back("reviewer");
    for (const auto& j : judges) out << "token " << j << " " << tokens.issue(j) << "\n";

    ReviewServer server(service, tokens, ServerOptions{host, port, options.ui_dir});
    int bound = 0;
    try {
      bound = server.bind();
    } catch (const Error& e) {
      err << "error: " << e.what() << "\n";
      return kEnvironment;
    }
    out << "serving run " << options.run_id << " on http://" << host << ":" << bound << "\n";
    out << service.list_pending(options.run_id).size() << " pending cases\n";
    out.flush();

    std::jthread listener([&] { server.listen(); });
    server.wait_until_ready();
    std::stop_callback on_stop(stop, [&] { server.stop(); });
    listener.join();
    out << "stopped\n";
    return kOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    if (e.code() == ErrorCode::InvalidConfig) return kEnvironment;
    return exit_code_for(e);
  }
}

}  // namespace vgbench::cli
