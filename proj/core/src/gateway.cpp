#include "vgbench/gateway.hpp"

#include <fstream>
#include <sstream>
#include <thread>

#include "vgbench/digest.hpp"
#include "vgbench/text.hpp"

namespace vgbench {

using nlohmann::json;

std::string_view to_string(ChatRole r) noexcept {
  switch (r) {
    case ChatRole::System: return "system";
    case ChatRole::User: return "user";
    case ChatRole::Assistant: return "assistant";
  }
  return "user";
}

std::string_view to_string(GatewayMode m) noexcept {
  switch (m) {
    case GatewayMode::Live: return "live";
    case GatewayMode::Record: return "record";
    case GatewayMode::Replay: return "replay";
  }
  return "live";
}

std::optional<GatewayMode> parse_gateway_mode(std::string_view s) {
  const auto t = text::to_lower(text::trim(s));
  if (t == "live") return GatewayMode::Live;
  if (t == "record") return GatewayMode::Record;
  if (t == "replay") return GatewayMode::Replay;
  return std::nullopt;
}

void validate_request(const ChatRequest& req) {
  if (req.messages.empty()) throw Error(ErrorCode::InvalidRequest, "message list is empty");
  std::size_t i = 0;
  if (req.messages.front().role == ChatRole::System) ++i;
  ChatRole expected = ChatRole::User;
  for (; i < req.messages.size(); ++i) {
    const auto role = req.messages[i].role;
    if (role == ChatRole::System) throw Error(ErrorCode::InvalidRequest, "system message must come first");
    if (role != expected) {
      throw Error(ErrorCode::InvalidRequest, "roles must alternate user/assistant at message " + std::to_string(i));
    }
    expected = expected == ChatRole::User ? ChatRole::Assistant : ChatRole::User;
  }
}

std::string fingerprint(const ChatRequest& req) {
  json messages = json::array();
  for (const auto& m : req.messages) {
    messages.push_back({{"role", to_string(m.role)}, {"content", text::collapse_whitespace(m.content)}});
  }
  const json canonical = {
      {"model", req.model},
      {"messages", messages},
      {"temperature", req.sampling.temperature},
      {"max_tokens", req.sampling.max_output_tokens},
  };
  return sha256_hex(canonical.dump());
}

// ---------------------------------------------------------------------------
// Cassette

std::shared_ptr<Cassette> Cassette::parse(std::string_view bytes) {
  auto cassette = std::make_shared<Cassette>();
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < bytes.size()) {
    auto end = bytes.find('\n', start);
    if (end == std::string_view::npos) end = bytes.size();
    const auto line = bytes.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (text::trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::MalformedRecord, "cassette line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("fingerprint") || !j.contains("response") || !j["fingerprint"].is_string() ||
        !j["response"].is_string()) {
      throw Error(ErrorCode::MalformedRecord, "cassette line " + std::to_string(line_no) + ": bad shape");
    }
    const auto fp = j["fingerprint"].get<std::string>();
    if (cassette->index_.count(fp)) {
      throw Error(ErrorCode::MalformedRecord, "cassette line " + std::to_string(line_no) + ": repeated fingerprint");
    }
    cassette->index_[fp] = cassette->entries_.size();
    cassette->entries_.push_back({fp, j["response"].get<std::string>()});
  }
  return cassette;
}

std::shared_ptr<Cassette> Cassette::open(const std::filesystem::path& path, bool create_if_missing) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    if (!create_if_missing) throw Error(ErrorCode::Io, "cannot read cassette " + path.string());
    auto empty = std::make_shared<Cassette>();
    empty->path_ = path;
    return empty;
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  auto cassette = parse(buf.str());
  cassette->path_ = path;
  return cassette;
}

std::optional<std::string> Cassette::find(const std::string& fp) const {
  std::lock_guard lock(mu_);
  const auto it = index_.find(fp);
  if (it == index_.end()) return std::nullopt;
  return entries_[it->second].response;
}

bool Cassette::record(const std::string& fp, const std::string& response) {
  std::lock_guard lock(mu_);
  if (index_.count(fp)) return false;
  Entry e{fp, response};
  if (path_) {
    if (path_->has_parent_path()) std::filesystem::create_directories(path_->parent_path());
    std::ofstream out(*path_, std::ios::binary | std::ios::app);
    if (!out) throw Error(ErrorCode::Io, "cannot append to cassette " + path_->string());
    out << serialize_entry(e);
    out.flush();
  }
  index_[fp] = entries_.size();
  entries_.push_back(std::move(e));
  return true;
}

std::size_t Cassette::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

std::vector<Cassette::Entry> Cassette::entries() const {
  std::lock_guard lock(mu_);
  return entries_;
}

std::string Cassette::serialize() const {
  std::string out;
  for (const auto& e : entries()) out += serialize_entry(e);
  return out;
}

std::string Cassette::serialize_entry(const Entry& e) {
  json j = {{"fingerprint", e.fingerprint}, {"response", e.response}};
  return j.dump() + "\n";
}

// ---------------------------------------------------------------------------
// Rate limiting

RateLimiter::RateLimiter(RateLimit limit) : limit_(limit) {}

void RateLimiter::acquire() {
  std::unique_lock lock(mu_);
  for (;;) {
    const auto now = std::chrono::steady_clock::now();
    while (!starts_.empty() && now - starts_.front() >= limit_.interval) starts_.pop_front();
    if (starts_.size() < static_cast<std::size_t>(limit_.requests)) {
      starts_.push_back(now);
      return;
    }
    const auto wake = starts_.front() + limit_.interval;
    lock.unlock();
    std::this_thread::sleep_until(wake);
    lock.lock();
  }
}

// ---------------------------------------------------------------------------
// Gateway

void validate_policy(const GatewayPolicy& p) {
  if (p.retries <= 0) throw Error(ErrorCode::InvalidPolicy, "retries must be positive");
  if (p.timeout.count() <= 0) throw Error(ErrorCode::InvalidPolicy, "timeout must be positive");
  if (p.backoff.count() < 0) throw Error(ErrorCode::InvalidPolicy, "backoff must not be negative");
  if (p.rate_limit) {
    if (p.rate_limit->requests <= 0) throw Error(ErrorCode::InvalidPolicy, "rate limit count must be positive");
    if (p.rate_limit->interval.count() <= 0) {
      throw Error(ErrorCode::InvalidPolicy, "rate limit interval must be positive");
    }
  }
}

ModelGateway::ModelGateway(GatewayMode mode, std::shared_ptr<ChatProvider> provider,
                           std::shared_ptr<Cassette> cassette)
    : mode_(mode), provider_(std::move(provider)), cassette_(std::move(cassette)) {
  if (mode_ != GatewayMode::Replay && !provider_) {
    throw Error(ErrorCode::InvalidConfig, std::string(to_string(mode_)) + " mode needs a provider");
  }
  if (mode_ != GatewayMode::Live && !cassette_) {
    throw Error(ErrorCode::InvalidConfig, std::string(to_string(mode_)) + " mode needs a cassette");
  }
}

ModelGateway ModelGateway::live(std::shared_ptr<ChatProvider> provider) {
  return ModelGateway(GatewayMode::Live, std::move(provider), nullptr);
}

ModelGateway ModelGateway::record(std::shared_ptr<ChatProvider> provider, std::shared_ptr<Cassette> cassette) {
  return ModelGateway(GatewayMode::Record, std::move(provider), std::move(cassette));
}

ModelGateway ModelGateway::replay(std::shared_ptr<Cassette> cassette) {
  return ModelGateway(GatewayMode::Replay, nullptr, std::move(cassette));
}

ModelGateway ModelGateway::with_policy(int retries, std::chrono::milliseconds timeout, RateLimit rate_limit) const {
  GatewayPolicy p = policy_;
  p.retries = retries;
  p.timeout = timeout;
  p.rate_limit = rate_limit;
  return with_policy(p);
}

ModelGateway ModelGateway::with_policy(const GatewayPolicy& policy) const {
  validate_policy(policy);
  ModelGateway copy = *this;
  copy.policy_ = policy;
  copy.limiter_ = policy.rate_limit ? std::make_shared<RateLimiter>(*policy.rate_limit) : nullptr;
  return copy;
}

ChatResult ModelGateway::chat(const ChatRequest& req) const {
  validate_request(req);
  ChatResult result;
  result.meta.fingerprint = fingerprint(req);

  if (mode_ == GatewayMode::Replay) {
    auto hit = cassette_->find(result.meta.fingerprint);
    if (!hit) {
      throw Error(ErrorCode::CassetteMiss, "no recorded response for " + req.tag.conversation_id + " turn " +
                                               std::to_string(req.tag.turn_index) + " (fingerprint " +
                                               result.meta.fingerprint + ")");
    }
    result.text = std::move(*hit);
    result.meta.from_cassette = true;
    return result;
  }

  std::string last_error;
  for (int attempt = 0; attempt <= policy_.retries; ++attempt) {
    if (attempt > 0 && policy_.backoff.count() > 0) {
      std::this_thread::sleep_for(policy_.backoff * (1 << std::min(attempt - 1, 6)));
    }
    if (limiter_) limiter_->acquire();
    try {
      auto resp = provider_->complete(req, policy_.timeout);
      result.text = std::move(resp.text);
      result.meta.usage = resp.usage;
      result.meta.retries = attempt;
      if (mode_ == GatewayMode::Record) cassette_->record(result.meta.fingerprint, result.text);
      return result;
    } catch (const ProviderError& e) {
      last_error = e.what();
      if (!e.transient()) break;
    }
  }
  throw Error(ErrorCode::GatewayUnavailable, req.tag.conversation_id + " turn " + std::to_string(req.tag.turn_index) +
                                                 ": " + last_error);
}

}  // namespace vgbench
