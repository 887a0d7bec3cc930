#pragma once

#include <optional>
#include <string>

#include "vgbench/gateway.hpp"

namespace vgbench {

/// Provider speaking the common chat-completions wire shape:
/// POST {base_url}/chat/completions with a bearer token.
class OpenAiCompatibleProvider : public ChatProvider {
 public:
  /// `base_url` such as "https://api.example.com/v1" or "http://127.0.0.1:8080".
  OpenAiCompatibleProvider(std::string base_url, std::string api_key);

  /// Reads VG_PROVIDER_BASE_URL and VG_PROVIDER_API_KEY. Returns nullopt when
  /// the key is missing.
  static std::optional<OpenAiCompatibleProvider> from_env();

  ChatResponse complete(const ChatRequest& req, std::chrono::milliseconds timeout) override;

  /// Request body for `req`; exposed for tests.
  static nlohmann::json request_body(const ChatRequest& req);

  const std::string& base_url() const noexcept { return base_url_; }

 private:
  std::string base_url_;
  std::string api_key_;
};

inline constexpr const char* kDefaultProviderBaseUrl = "https://api.openai.com/v1";

}  // namespace vgbench
