#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stop_token>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vgbench/corpus.hpp"
#include "vgbench/gateway.hpp"
#include "vgbench/metrics.hpp"

namespace vgbench::cli {

enum ExitCode : int { kOk = 0, kDomain = 1, kEnvironment = 2 };

/// Exit status for an error escaping a command: 2 for I/O, provider and
/// storage trouble, 1 for everything else.
int exit_code_for(const Error& e) noexcept;

/// Operator settings for `run`. Keys mirror the config-file fields.
struct HarnessConfig {
  std::filesystem::path corpus;
  CorpusFilter filter;
  std::filesystem::path runs_dir = "runs";
  std::optional<std::string> run_id;

  std::string sut_name = "sut";
  std::string sut_version = "unversioned";
  std::string sut_model;
  std::string sut_base_url = kDefaultBaseUrl;
  /// Name of the environment variable that holds the SUT key.
  std::string sut_key_env = "VG_PROVIDER_API_KEY";

  std::string actor_model = "patient-actor";
  std::string actor_base_url = kDefaultBaseUrl;
  std::optional<std::string> judge_model;

  GatewayMode mode = GatewayMode::Replay;
  std::optional<std::filesystem::path> actor_cassette;
  std::optional<std::filesystem::path> sut_cassette;
  std::optional<std::filesystem::path> judge_cassette;

  int workers = 1;
  int max_turns = 60;
  int retries = 3;
  long long timeout_ms = 60'000;
  std::optional<RateLimit> rate_limit;

  std::filesystem::path knowledge_graph;
  std::filesystem::path specialty_map;
  std::optional<std::filesystem::path> baseline;

  static constexpr const char* kDefaultBaseUrl = "https://api.openai.com/v1";
};

/// Builds a config from, in rising precedence, the JSON config file,
/// environment variables and explicit flags (each a JSON object with the
/// config keys). `env` maps variable names to values. Throws
/// Error(InvalidConfig) for unknown keys or bad values.
HarnessConfig resolve_config(const nlohmann::json& file, const std::map<std::string, std::string>& env,
                             const nlohmann::json& flags);

/// Environment variables consulted by resolve_config, with their keys.
const std::map<std::string, std::string>& config_env_vars();

/// Snapshot of the process environment restricted to the variables the
/// harness reads.
std::map<std::string, std::string> read_env();

/// Structural checks done before any work: replay and record need both
/// cassettes, live and record need the API key in `env`. Throws
/// Error(InvalidConfig).
void check_config(const HarnessConfig& c, const std::map<std::string, std::string>& env);

int cmd_validate(const std::filesystem::path& corpus, const std::optional<std::filesystem::path>& specialty_map,
                 std::ostream& out, std::ostream& err);

struct RunOutcome {
  int exit_code = kOk;
  std::string run_id;
  bool interrupted = false;
};

/// Full pipeline. Progress lines "case <id> <state>" go to `out`. A stop
/// request lets in-flight conversations finish, then closes the run.
RunOutcome cmd_run(const HarnessConfig& config, const std::map<std::string, std::string>& env, std::ostream& out,
                   std::ostream& err, std::stop_token stop = {});

/// Re-judges stored transcripts that have no human verdict and re-renders
/// the reports.
int cmd_judge(const std::filesystem::path& runs_dir, const std::string& run_id,
              const std::filesystem::path& knowledge_graph, const std::filesystem::path& specialty_map,
              std::ostream& out, std::ostream& err);

/// Renders the stored run to report.<ext> and prints the path; with
/// `to_stdout` the rendering itself is printed instead.
int cmd_report(const std::filesystem::path& runs_dir, const std::string& run_id, ReportFormat format, bool to_stdout,
               std::ostream& out, std::ostream& err);

struct ServeOptions {
  std::filesystem::path runs_dir = "runs";
  std::string run_id;
  std::string bind = "127.0.0.1:8080";
  std::optional<std::filesystem::path> ui_dir;
  std::optional<std::filesystem::path> tokens_file;
  /// Judges that get a freshly signed token printed at startup.
  std::vector<std::string> judges;
  int lease_minutes = 15;
};

/// "host:port" or ":port". Throws Error(InvalidConfig).
std::pair<std::string, int> parse_bind_address(const std::string& bind);

/// Serves until `stop` is requested.
int cmd_serve_review(const ServeOptions& options, std::ostream& out, std::ostream& err, std::stop_token stop);

}  // namespace vgbench::cli
