#include <algorithm>
#include <csignal>
#include <fstream>
#include <iostream>
#include <stop_token>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "commands.hpp"
#include "vgbench/error.hpp"

using namespace vgbench;
using json = nlohmann::json;

namespace {

// SIGINT/SIGTERM are blocked in every thread and picked up here, so a
// signal turns into a stop request instead of killing workers mid-write.
class SignalWatcher {
 public:
  SignalWatcher() {
    sigemptyset(&set_);
    sigaddset(&set_, SIGINT);
    sigaddset(&set_, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set_, nullptr);
    thread_ = std::jthread([this](std::stop_token self) {
      const timespec tick{0, 200'000'000};
      while (!self.stop_requested()) {
        if (sigtimedwait(&set_, nullptr, &tick) > 0) {
          if (source_.stop_requested()) std::_Exit(130);
          std::cerr << "stopping: finishing in-flight work (signal again to abort)\n";
          source_.request_stop();
        }
      }
    });
  }

  std::stop_token token() const { return source_.get_token(); }

 private:
  sigset_t set_{};
  std::stop_source source_;
  std::jthread thread_;
};

json load_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read config " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, path + ": " + e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vgbench: conversational diagnostic benchmark harness"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "vgbench 0.1.0");

  // validate
  auto* validate = app.add_subcommand("validate", "Check a corpus file");
  std::string v_corpus, v_map;
  validate->add_option("corpus", v_corpus, "Corpus JSONL file")->required();
  validate->add_option("--specialty-map", v_map, "Also check that every gold diagnosis has a specialty");

  // run
  auto* run = app.add_subcommand("run", "Run conversations, judge them and write a provisional report");
  std::string config_path;
  run->add_option("--config", config_path, "JSON config file");
  json flags = json::object();
  std::map<std::string, std::string> str_flags;
  std::map<std::string, long long> int_flags;
  auto str_flag = [&](const std::string& name, const std::string& key, const std::string& help) {
    run->add_option(name, str_flags[key], help);
  };
  auto int_flag = [&](const std::string& name, const std::string& key, const std::string& help) {
    run->add_option(name, int_flags[key], help);
  };
  str_flag("--corpus", "corpus", "Corpus JSONL file");
  str_flag("--runs-dir", "runs_dir", "Run store root");
  str_flag("--run-id", "run_id", "Explicit run id (default: time-based)");
  str_flag("--mode", "mode", "live, record or replay");
  str_flag("--sut-name", "sut_name", "System under test name");
  str_flag("--sut-version", "sut_version", "System under test version");
  str_flag("--sut-model", "sut_model", "Model id sent to the SUT endpoint");
  str_flag("--sut-base-url", "sut_base_url", "SUT chat-completions base URL");
  str_flag("--sut-key-env", "sut_key_env", "Environment variable holding the SUT key");
  str_flag("--actor-model", "actor_model", "Patient-actor model id");
  str_flag("--actor-base-url", "actor_base_url", "Patient-actor base URL");
  str_flag("--judge-model", "judge_model", "Optional model for pairs the graph cannot decide");
  str_flag("--actor-cassette", "actor_cassette", "Actor cassette file");
  str_flag("--sut-cassette", "sut_cassette", "SUT cassette file");
  str_flag("--judge-cassette", "judge_cassette", "Judge cassette file");
  str_flag("--kg", "knowledge_graph", "Condition graph TSV");
  str_flag("--specialty-map", "specialty_map", "Condition to specialty TSV");
  str_flag("--baseline", "baseline", "Baseline question counts TSV (empty string: none)");
  int_flag("--workers", "workers", "Concurrent conversations");
  int_flag("--max-turns", "max_turns", "Turn cap per conversation");
  int_flag("--retries", "retries", "Retries per model call");
  int_flag("--timeout-ms", "timeout_ms", "Timeout per model call");
  int_flag("--rate-limit-requests", "rate_limit_requests", "Requests per rate-limit window");
  int_flag("--rate-limit-interval-ms", "rate_limit_interval_ms", "Rate-limit window");
  std::map<std::string, std::string> filter_str;
  std::map<std::string, long long> filter_int;
  for (const char* k : {"specialty", "incidence", "course", "presentation", "sex"}) {
    run->add_option(std::string("--") + k, filter_str[k], std::string("Only cases with this ") + k);
  }
  run->add_option("--min-age", filter_int["min_age"], "Only cases at least this old");
  run->add_option("--max-age", filter_int["max_age"], "Only cases at most this old");

  // judge
  auto* judge = app.add_subcommand("judge", "Re-run automated judging over a stored run");
  std::string j_runs = "runs", j_run, j_kg = std::string(VGBENCH_DATA_DIR) + "/conditions.tsv",
              j_map = std::string(VGBENCH_DATA_DIR) + "/specialty_map.tsv";
  judge->add_option("run_id", j_run, "Run id")->required();
  judge->add_option("--runs-dir", j_runs, "Run store root")->capture_default_str();
  judge->add_option("--kg", j_kg, "Condition graph TSV")->capture_default_str();
  judge->add_option("--specialty-map", j_map, "Condition to specialty TSV")->capture_default_str();

  // report
  auto* report = app.add_subcommand("report", "Render the report of a stored run");
  std::string r_runs = "runs", r_run, r_format = "table";
  bool r_stdout = false;
  report->add_option("run_id", r_run, "Run id")->required();
  report->add_option("--runs-dir", r_runs, "Run store root")->capture_default_str();
  report->add_option("--format", r_format, "table, csv or md")->capture_default_str();
  report->add_flag("--stdout", r_stdout, "Print the rendering instead of its path");

  // serve-review
  auto* serve = app.add_subcommand("serve-review", "Serve the adjudication API for one run");
  cli::ServeOptions s_opts;
  std::string s_runs = "runs", s_ui, s_tokens;
  serve->add_option("run_id", s_opts.run_id, "Run id")->required();
  serve->add_option("--runs-dir", s_runs, "Run store root")->capture_default_str();
  serve->add_option("--bind", s_opts.bind, "host:port (port 0 picks one)")->capture_default_str();
  serve->add_option("--ui-dir", s_ui, "Static review UI assets");
  serve->add_option("--tokens", s_tokens, "JSON file with static judge tokens");
  serve->add_option("--judge", s_opts.judges, "Issue a signed token for this judge (repeatable)");
  serve->add_option("--lease-minutes", s_opts.lease_minutes, "Checkout lease length")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*validate) {
      return cli::cmd_validate(v_corpus, v_map.empty() ? std::nullopt : std::optional<std::filesystem::path>(v_map),
                               std::cout, std::cerr);
    }
    if (*run) {
      // only flags given on the command line override lower layers
      for (auto* o : run->get_options()) {
        if (o->count() == 0) continue;
        const auto name = o->get_name();
        std::string key = name.substr(name.find_first_not_of('-'));
        std::replace(key.begin(), key.end(), '-', '_');
        if (key == "config") continue;
        if (key == "kg") key = "knowledge_graph";
        if (str_flags.count(key)) {
          flags[key] = str_flags[key];
        } else if (int_flags.count(key)) {
          flags[key] = int_flags[key];
        } else if (filter_str.count(key)) {
          flags["filter"][key] = filter_str[key];
        } else if (filter_int.count(key)) {
          flags["filter"][key] = filter_int[key];
        }
      }
      const auto env = cli::read_env();
      const auto config = cli::resolve_config(load_config_file(config_path), env, flags);
      SignalWatcher signals;
      return cli::cmd_run(config, env, std::cout, std::cerr, signals.token()).exit_code;
    }
    if (*judge) return cli::cmd_judge(j_runs, j_run, j_kg, j_map, std::cout, std::cerr);
    if (*report) {
      return cli::cmd_report(r_runs, r_run, parse_report_format(r_format), r_stdout, std::cout, std::cerr);
    }
    if (*serve) {
      s_opts.runs_dir = s_runs;
      if (!s_ui.empty()) s_opts.ui_dir = s_ui;
      if (!s_tokens.empty()) s_opts.tokens_file = s_tokens;
      SignalWatcher signals;
      return cli::cmd_serve_review(s_opts, std::cout, std::cerr, signals.token());
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::exit_code_for(e);
  }
  return cli::kDomain;
}
