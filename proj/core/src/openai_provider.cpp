#include "vgbench/openai_provider.hpp"

#include <cstdlib>

#include "httplib.h"

namespace vgbench {

using nlohmann::json;

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // without trailing slash
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  const auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  const auto path_start = url.find('/', host_start);
  SplitUrl out;
  out.origin = path_start == std::string::npos ? url : url.substr(0, path_start);
  out.path = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
  return out;
}

}  // namespace

OpenAiCompatibleProvider::OpenAiCompatibleProvider(std::string base_url, std::string api_key)
    : base_url_(std::move(base_url)), api_key_(std::move(api_key)) {}

std::optional<OpenAiCompatibleProvider> OpenAiCompatibleProvider::from_env() {
  const char* key = std::getenv("VG_PROVIDER_API_KEY");
  if (!key || !*key) return std::nullopt;
  const char* url = std::getenv("VG_PROVIDER_BASE_URL");
  return OpenAiCompatibleProvider(url && *url ? url : kDefaultProviderBaseUrl, key);
}

json OpenAiCompatibleProvider::request_body(const ChatRequest& req) {
  json messages = json::array();
  for (const auto& m : req.messages) messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  return {
      {"model", req.model},
      {"messages", messages},
      {"temperature", req.sampling.temperature},
      {"max_tokens", req.sampling.max_output_tokens},
  };
}

ChatResponse OpenAiCompatibleProvider::complete(const ChatRequest& req, std::chrono::milliseconds timeout) {
  const auto url = split_url(base_url_);
  httplib::Client client(url.origin);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());
  httplib::Headers headers = {{"Authorization", "Bearer " + api_key_}};

  auto res = client.Post(url.path + "/chat/completions", headers, request_body(req).dump(), "application/json");
  if (!res) throw ProviderError(true, "transport error: " + httplib::to_string(res.error()));
  if (res->status == 429 || res->status >= 500) {
    throw ProviderError(true, "HTTP " + std::to_string(res->status));
  }
  if (res->status != 200) throw ProviderError(false, "HTTP " + std::to_string(res->status) + ": " + res->body);

  json body;
  try {
    body = json::parse(res->body);
  } catch (const json::exception& e) {
    throw ProviderError(false, std::string("unparseable response: ") + e.what());
  }
  ChatResponse out;
  try {
    out.text = body.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception&) {
    throw ProviderError(false, "response has no choices[0].message.content");
  }
  if (const auto usage = body.find("usage"); usage != body.end() && usage->is_object()) {
    out.usage.prompt_tokens = usage->value("prompt_tokens", 0);
    out.usage.completion_tokens = usage->value("completion_tokens", 0);
  }
  return out;
}

}  // namespace vgbench
