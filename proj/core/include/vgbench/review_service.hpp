#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "vgbench/clock.hpp"
#include "vgbench/judge.hpp"
#include "vgbench/metrics.hpp"
#include "vgbench/run_store.hpp"

namespace vgbench {

/// Judge credentials. Issued tokens are "<judge>.<hmac>" signed with a
/// per-process secret; tokens from a static list are accepted verbatim.
class TokenAuthority {
 public:
  /// A random secret is drawn when `secret` is empty.
  explicit TokenAuthority(std::string secret = {});

  std::string issue(const std::string& judge) const;
  void allow(const std::string& token, const std::string& judge);

  /// Reads {"tokens": [{"judge": ..., "token": ...}, ...]}. Throws
  /// Error(InvalidConfig) or Error(Io).
  void allow_file(const std::filesystem::path& path);

  /// Judge identity for a valid token.
  std::optional<std::string> verify(std::string_view token) const;

 private:
  std::string secret_;
  std::map<std::string, std::string, std::less<>> static_;
};

struct Lease {
  std::string judge;
  TimePoint expires;
};

/// Everything a reviewer needs for one case.
struct ReviewCase {
  std::string case_id;
  const ClinicalVignette* vignette = nullptr;
  std::optional<Conversation> conversation;
  CaseJudgment judgment;
  /// True when the case has no stored judgment (for example a failed
  /// conversation) and `judgment` is a placeholder.
  bool placeholder = false;
  std::optional<Lease> lease;
};

/// Queue row. The gold diagnosis stays hidden so the queue does not prime
/// the reviewer.
nlohmann::json summary_json(const ReviewCase& c);
/// Full case. Gold diagnosis and automated verdict are included only with
/// `reveal_gold`, which the server sets for the lease holder.
nlohmann::json detail_json(const ReviewCase& c, bool reveal_gold);

/// Adjudication over one stored run. Thread-safe.
class ReviewService {
 public:
  ReviewService(RunStore& store, std::string run_id, Clock& clock,
                std::chrono::milliseconds lease_duration = std::chrono::minutes{15});

  const std::string& run_id() const noexcept { return run_id_; }
  std::chrono::milliseconds lease_duration() const noexcept { return lease_duration_; }

  std::vector<RunManifest> list_runs() const;

  /// Pending cases, oldest first. Throws Error(UnknownRun) for any run other
  /// than the served one.
  std::vector<ReviewCase> list_pending(std::string_view run_id) const;

  /// Throws Error(UnknownCase).
  ReviewCase get_case(std::string_view case_id) const;

  /// Grants a lease when the case is free, its lease expired, or the same
  /// judge already holds it. Throws Error(LeaseConflict).
  ReviewCase checkout(std::string_view case_id, const std::string& judge);

  /// Requires a live lease held by `judge` (Error(NoLease)). The verdict is
  /// persisted before the in-memory state changes; the lease is released.
  CaseJudgment submit_verdict(std::string_view case_id, const HumanVerdict& verdict, const std::string& judge);

  /// Throws Error(UnknownRun) for any run other than the served one.
  BenchmarkReport report_snapshot(std::string_view run_id) const;

 private:
  ReviewCase make_case(const std::string& id) const;
  void require_run(std::string_view run_id) const;
  std::optional<Lease> live_lease(const std::string& id) const;

  RunStore& store_;
  std::string run_id_;
  Clock& clock_;
  std::chrono::milliseconds lease_duration_;

  mutable std::mutex mu_;
  LoadedRun run_;
  std::map<std::string, Conversation> conversations_;
  JudgmentBook book_;
  std::map<std::string, Lease> leases_;
};

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;
  /// Static files served under "/" when set.
  std::optional<std::filesystem::path> ui_dir;
};

/// HTTP front end for ReviewService; see docs/review-api.md.
class ReviewServer {
 public:
  ReviewServer(ReviewService& service, const TokenAuthority& tokens, ServerOptions options);
  ~ReviewServer();
  ReviewServer(const ReviewServer&) = delete;
  ReviewServer& operator=(const ReviewServer&) = delete;

  /// Binds the socket. Port 0 picks a free port. Throws Error(InvalidConfig)
  /// when the address cannot be bound.
  int bind();
  /// Serves until stop(); call bind() first.
  void listen();
  /// Blocks until listen() is accepting connections.
  void wait_until_ready() const;
  void stop();
  int port() const noexcept;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace vgbench
