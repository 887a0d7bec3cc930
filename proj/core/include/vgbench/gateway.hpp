#pragma once

#include <chrono>
#include <deque>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "vgbench/error.hpp"

namespace vgbench {

enum class ChatRole { System, User, Assistant };

std::string_view to_string(ChatRole r) noexcept;

struct ChatMessage {
  ChatRole role;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

struct SamplingControls {
  double temperature = 0.0;
  int max_output_tokens = 1024;
};

/// Identifies where a request came from; never part of the fingerprint.
struct RequestTag {
  std::string conversation_id;
  int turn_index = 0;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  SamplingControls sampling;
  RequestTag tag;
};

/// Throws Error(InvalidRequest) unless the list is non-empty, any system
/// message comes first, and user/assistant messages alternate starting with
/// user.
void validate_request(const ChatRequest& req);

/// SHA-256 over a canonical JSON form of (model, messages, sampling) with
/// every message's whitespace collapsed. The tag is excluded.
std::string fingerprint(const ChatRequest& req);

struct Usage {
  int prompt_tokens = 0;
  int completion_tokens = 0;
};

struct ChatResponse {
  std::string text;
  Usage usage;
};

/// Provider-side failure. Transient failures (timeouts, 429, 5xx) are retried
/// by the gateway; permanent ones are not.
class ProviderError : public Error {
 public:
  ProviderError(bool transient, const std::string& message)
      : Error(ErrorCode::ProviderFailure, message), transient_(transient) {}
  bool transient() const noexcept { return transient_; }

 private:
  bool transient_;
};

/// A chat-completion backend: a remote model, or a test stub.
class ChatProvider {
 public:
  virtual ~ChatProvider() = default;
  virtual ChatResponse complete(const ChatRequest& req, std::chrono::milliseconds timeout) = 0;
};

/// Fingerprint -> response log. Thread-safe; in record mode appends are
/// serialized and written through to the backing file.
class Cassette {
 public:
  struct Entry {
    std::string fingerprint;
    std::string response;
  };

  /// Empty cassette not backed by a file.
  Cassette() = default;

  /// Loads an existing cassette file. With `create_if_missing`, a missing file
  /// yields an empty cassette that will be created on first record.
  static std::shared_ptr<Cassette> open(const std::filesystem::path& path, bool create_if_missing = false);

  /// Parses cassette bytes. Throws Error(MalformedRecord) on a bad line or a
  /// repeated fingerprint.
  static std::shared_ptr<Cassette> parse(std::string_view bytes);

  std::optional<std::string> find(const std::string& fp) const;

  /// Adds an entry unless the fingerprint is already present. Returns true
  /// when something was added.
  bool record(const std::string& fp, const std::string& response);

  std::size_t size() const;
  std::vector<Entry> entries() const;
  std::string serialize() const;

  /// One cassette line, newline included.
  static std::string serialize_entry(const Entry& e);

 private:
  mutable std::mutex mu_;
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
  std::optional<std::filesystem::path> path_;
};

struct RateLimit {
  int requests = 0;
  std::chrono::milliseconds interval{0};
};

struct GatewayPolicy {
  int retries = 3;
  std::chrono::milliseconds timeout{60'000};
  std::optional<RateLimit> rate_limit;
  std::chrono::milliseconds backoff{500};
};

/// Sliding-window limiter: at most `requests` starts inside any window of
/// length `interval`.
class RateLimiter {
 public:
  explicit RateLimiter(RateLimit limit);
  void acquire();

 private:
  RateLimit limit_;
  std::mutex mu_;
  std::deque<std::chrono::steady_clock::time_point> starts_;
};

enum class GatewayMode { Live, Record, Replay };

std::string_view to_string(GatewayMode m) noexcept;
std::optional<GatewayMode> parse_gateway_mode(std::string_view s);

struct ChatMetadata {
  Usage usage;
  int retries = 0;
  bool from_cassette = false;
  std::string fingerprint;
};

struct ChatResult {
  std::string text;
  ChatMetadata meta;
};

/// Uniform access to a chat model with record/replay. Copies share the
/// provider, cassette and limiter.
class ModelGateway {
 public:
  /// Live and record modes need a provider; record and replay need a
  /// cassette. Throws Error(InvalidConfig) otherwise.
  ModelGateway(GatewayMode mode, std::shared_ptr<ChatProvider> provider, std::shared_ptr<Cassette> cassette);

  static ModelGateway live(std::shared_ptr<ChatProvider> provider);
  static ModelGateway record(std::shared_ptr<ChatProvider> provider, std::shared_ptr<Cassette> cassette);
  static ModelGateway replay(std::shared_ptr<Cassette> cassette);

  /// Throws Error(InvalidPolicy) for non-positive values.
  ModelGateway with_policy(int retries, std::chrono::milliseconds timeout, RateLimit rate_limit) const;
  ModelGateway with_policy(const GatewayPolicy& policy) const;

  /// Replay never touches the provider: a missing fingerprint is
  /// Error(CassetteMiss). Live failures that outlast the retry budget become
  /// Error(GatewayUnavailable).
  ChatResult chat(const ChatRequest& req) const;

  GatewayMode mode() const noexcept { return mode_; }
  const GatewayPolicy& policy() const noexcept { return policy_; }
  const std::shared_ptr<Cassette>& cassette() const noexcept { return cassette_; }

 private:
  GatewayMode mode_;
  std::shared_ptr<ChatProvider> provider_;
  std::shared_ptr<Cassette> cassette_;
  GatewayPolicy policy_;
  std::shared_ptr<RateLimiter> limiter_;
};

void validate_policy(const GatewayPolicy& policy);

}  // namespace vgbench
