#include <atomic>
#include <filesystem>
#include <fstream>
#include <thread>

#include <gmock/gmock.h>
#include <gtest/gtest.h>
#include <httplib.h>

#include "vgbench/digest.hpp"
#include "vgbench/error.hpp"
#include "vgbench/gateway.hpp"
#include "vgbench/openai_provider.hpp"

using namespace vgbench;
using namespace std::chrono_literals;
using ::testing::_;
using ::testing::Return;
using ::testing::Throw;
namespace fs = std::filesystem;

namespace {

class MockProvider : public ChatProvider {
 public:
  MOCK_METHOD(ChatResponse, complete, (const ChatRequest&, std::chrono::milliseconds), (override));
};

ChatRequest hello(std::string model = "m") {
  ChatRequest r;
  r.model = std::move(model);
  r.messages = {{ChatRole::System, "You are terse."}, {ChatRole::User, "Hello"}};
  r.sampling = {0.0, 64};
  r.tag = {"case-1", 1};
  return r;
}

GatewayPolicy quick(int retries) {
  GatewayPolicy p;
  p.retries = retries;
  p.timeout = 1000ms;
  p.backoff = 0ms;
  return p;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error";
  return ErrorCode::Io;
}

fs::path temp_path(const std::string& name) {
  auto p = fs::temp_directory_path() / ("vgbench-" + random_hex(6) + "-" + name);
  return p;
}

}  // namespace

TEST(Fingerprint, IgnoresTagAndWhitespace) {
  auto a = hello();
  auto b = hello();
  b.tag = {"other", 9};
  b.messages[1].content = "  Hello \n";
  EXPECT_EQ(fingerprint(a), fingerprint(b));
  EXPECT_EQ(fingerprint(a).size(), 64u);
}

TEST(Fingerprint, CoversModelMessagesAndSampling) {
  const auto base = fingerprint(hello());
  EXPECT_NE(fingerprint(hello("other")), base);
  auto t = hello();
  t.sampling.temperature = 0.7;
  EXPECT_NE(fingerprint(t), base);
  auto n = hello();
  n.sampling.max_output_tokens = 65;
  EXPECT_NE(fingerprint(n), base);
  auto m = hello();
  m.messages[1].content = "Hello!";
  EXPECT_NE(fingerprint(m), base);
  auto r = hello();
  r.messages[0].role = ChatRole::User;
  r.messages.push_back({ChatRole::Assistant, "x"});
  EXPECT_NE(fingerprint(r), base);
}

TEST(ValidateRequest, RoleOrder) {
  EXPECT_NO_THROW(validate_request(hello()));
  ChatRequest empty;
  EXPECT_EQ(code_of([&] { validate_request(empty); }), ErrorCode::InvalidRequest);
  auto late_system = hello();
  late_system.messages.push_back({ChatRole::System, "again"});
  EXPECT_EQ(code_of([&] { validate_request(late_system); }), ErrorCode::InvalidRequest);
  auto assistant_first = hello();
  assistant_first.messages = {{ChatRole::Assistant, "hi"}};
  EXPECT_EQ(code_of([&] { validate_request(assistant_first); }), ErrorCode::InvalidRequest);
  auto two_users = hello();
  two_users.messages.push_back({ChatRole::User, "again"});
  EXPECT_EQ(code_of([&] { validate_request(two_users); }), ErrorCode::InvalidRequest);
}

TEST(Cassette, ParseSerializeRoundTrip) {
  Cassette c;
  EXPECT_TRUE(c.record("fp1", "one"));
  EXPECT_TRUE(c.record("fp2", "two\nlines"));
  EXPECT_FALSE(c.record("fp1", "changed"));
  const auto again = Cassette::parse(c.serialize());
  EXPECT_EQ(again->size(), 2u);
  EXPECT_EQ(again->find("fp2"), "two\nlines");
  EXPECT_EQ(again->find("fp1"), "one");
  EXPECT_EQ(again->find("nope"), std::nullopt);
  EXPECT_EQ(again->serialize(), c.serialize());
}

TEST(Cassette, RejectsBadLinesAndDuplicates) {
  EXPECT_EQ(code_of([] { Cassette::parse("not json\n"); }), ErrorCode::MalformedRecord);
  const auto line = Cassette::serialize_entry({"fp", "x"});
  EXPECT_EQ(code_of([&] { Cassette::parse(line + line); }), ErrorCode::MalformedRecord);
}

TEST(Cassette, RecordWritesThroughToFile) {
  const auto path = temp_path("rec.cassette");
  {
    auto c = Cassette::open(path, true);
    EXPECT_EQ(c->size(), 0u);
    c->record("fp", "answer");
  }
  EXPECT_EQ(Cassette::open(path)->find("fp"), "answer");
  fs::remove(path);
  EXPECT_EQ(code_of([&] { Cassette::open(path); }), ErrorCode::Io);
}

TEST(Gateway, ReplayNeverCallsProvider) {
  auto cassette = std::make_shared<Cassette>();
  cassette->record(fingerprint(hello()), "recorded");
  const auto gw = ModelGateway::replay(cassette);
  const auto r = gw.chat(hello());
  EXPECT_EQ(r.text, "recorded");
  EXPECT_TRUE(r.meta.from_cassette);
  EXPECT_EQ(code_of([&] { gw.chat(hello("unseen")); }), ErrorCode::CassetteMiss);
}

TEST(Gateway, RecordThenReplayGivesSameText) {
  auto provider = std::make_shared<MockProvider>();
  EXPECT_CALL(*provider, complete(_, _)).WillOnce(Return(ChatResponse{"live answer", {10, 3}}));
  auto cassette = std::make_shared<Cassette>();
  const auto rec = ModelGateway::record(provider, cassette).with_policy(quick(1)).chat(hello());
  EXPECT_EQ(rec.meta.usage.prompt_tokens, 10);
  EXPECT_EQ(ModelGateway::replay(cassette).chat(hello()).text, "live answer");
}

TEST(Gateway, TransientFailuresAreRetried) {
  auto provider = std::make_shared<MockProvider>();
  EXPECT_CALL(*provider, complete(_, _))
      .WillOnce(Throw(ProviderError(true, "HTTP 503")))
      .WillOnce(Throw(ProviderError(true, "HTTP 429")))
      .WillOnce(Return(ChatResponse{"ok", {}}));
  const auto r = ModelGateway::live(provider).with_policy(quick(3)).chat(hello());
  EXPECT_EQ(r.text, "ok");
  EXPECT_EQ(r.meta.retries, 2);
}

TEST(Gateway, RetryBudgetExhaustedIsUnavailable) {
  auto provider = std::make_shared<MockProvider>();
  EXPECT_CALL(*provider, complete(_, _)).Times(3).WillRepeatedly(Throw(ProviderError(true, "timeout")));
  const auto gw = ModelGateway::live(provider).with_policy(quick(2));
  EXPECT_EQ(code_of([&] { gw.chat(hello()); }), ErrorCode::GatewayUnavailable);
}

TEST(Gateway, PermanentFailuresAreNotRetried) {
  auto provider = std::make_shared<MockProvider>();
  EXPECT_CALL(*provider, complete(_, _)).Times(1).WillOnce(Throw(ProviderError(false, "HTTP 400")));
  const auto gw = ModelGateway::live(provider).with_policy(quick(5));
  EXPECT_EQ(code_of([&] { gw.chat(hello()); }), ErrorCode::GatewayUnavailable);
}

TEST(Gateway, MalformedRequestNeverReachesProvider) {
  auto provider = std::make_shared<MockProvider>();
  EXPECT_CALL(*provider, complete(_, _)).Times(0);
  ChatRequest bad;
  EXPECT_EQ(code_of([&] { ModelGateway::live(provider).chat(bad); }), ErrorCode::InvalidRequest);
}

TEST(Gateway, ConstructionAndPolicyChecks) {
  EXPECT_EQ(code_of([] { ModelGateway::live(nullptr); }), ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of([] { ModelGateway::replay(nullptr); }), ErrorCode::InvalidConfig);
  const auto gw = ModelGateway::replay(std::make_shared<Cassette>());
  EXPECT_EQ(code_of([&] { gw.with_policy(0, 1000ms, {1, 1000ms}); }), ErrorCode::InvalidPolicy);
  EXPECT_EQ(code_of([&] { gw.with_policy(1, 0ms, {1, 1000ms}); }), ErrorCode::InvalidPolicy);
  EXPECT_EQ(code_of([&] { gw.with_policy(1, 1000ms, {0, 1000ms}); }), ErrorCode::InvalidPolicy);
  EXPECT_EQ(parse_gateway_mode("record"), GatewayMode::Record);
  EXPECT_EQ(parse_gateway_mode("tape"), std::nullopt);
}

// Audit: no window of `interval` ever holds more than `requests` starts.
TEST(RateLimiter, SlidingWindowHoldsUnderConcurrency) {
  const RateLimit limit{3, 100ms};
  RateLimiter limiter(limit);
  std::mutex mu;
  std::vector<std::chrono::steady_clock::time_point> starts;
  std::vector<std::jthread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&] {
      for (int i = 0; i < 3; ++i) {
        limiter.acquire();
        std::lock_guard lock(mu);
        starts.push_back(std::chrono::steady_clock::now());
      }
    });
  }
  threads.clear();
  ASSERT_EQ(starts.size(), 12u);
  std::sort(starts.begin(), starts.end());
  for (std::size_t i = 0; i + limit.requests < starts.size(); ++i) {
    // allow a little scheduler slack on the timestamp taken after acquire
    EXPECT_GE(starts[i + limit.requests] - starts[i], limit.interval - 5ms) << "window at " << i;
  }
}

class ProviderServer : public ::testing::Test {
 protected:
  void SetUp() override {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      last_auth_ = req.get_header_value("Authorization");
      last_body_ = req.body;
      const int n = ++hits_;
      if (mode_ == "flaky" && n == 1) {
        res.status = 503;
        return;
      }
      if (mode_ == "denied") {
        res.status = 401;
        res.set_content(R"({"error":"bad key"})", "application/json");
        return;
      }
      if (mode_ == "garbage") {
        res.set_content("<html>", "text/html");
        return;
      }
      res.set_content(
          R"({"choices":[{"message":{"role":"assistant","content":"pong"}}],"usage":{"prompt_tokens":7,"completion_tokens":1}})",
          "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::jthread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  void TearDown() override { server_.stop(); }

  std::string base() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

  httplib::Server server_;
  int port_ = 0;
  std::jthread thread_;
  std::string mode_ = "ok";
  std::atomic<int> hits_{0};
  std::string last_auth_, last_body_;
};

TEST_F(ProviderServer, SendsChatCompletionsWithBearerToken) {
  OpenAiCompatibleProvider p(base(), "sk-test");
  const auto r = p.complete(hello(), 2000ms);
  EXPECT_EQ(r.text, "pong");
  EXPECT_EQ(r.usage.prompt_tokens, 7);
  EXPECT_EQ(last_auth_, "Bearer sk-test");
  const auto body = nlohmann::json::parse(last_body_);
  EXPECT_EQ(body["model"], "m");
  EXPECT_EQ(body["messages"][0]["role"], "system");
  EXPECT_EQ(body["messages"][1]["content"], "Hello");
  EXPECT_EQ(body["max_tokens"], 64);
  EXPECT_EQ(body, OpenAiCompatibleProvider::request_body(hello()));
}

TEST_F(ProviderServer, ServerErrorsAreTransientThroughTheGateway) {
  mode_ = "flaky";
  auto gw = ModelGateway::live(std::make_shared<OpenAiCompatibleProvider>(base(), "k")).with_policy(quick(2));
  const auto r = gw.chat(hello());
  EXPECT_EQ(r.text, "pong");
  EXPECT_EQ(r.meta.retries, 1);
}

TEST_F(ProviderServer, AuthFailureIsPermanent) {
  mode_ = "denied";
  OpenAiCompatibleProvider p(base(), "bad");
  try {
    p.complete(hello(), 2000ms);
    FAIL();
  } catch (const ProviderError& e) {
    EXPECT_FALSE(e.transient());
  }
}

TEST_F(ProviderServer, UnparseableReplyIsPermanent) {
  mode_ = "garbage";
  OpenAiCompatibleProvider p(base(), "k");
  try {
    p.complete(hello(), 2000ms);
    FAIL();
  } catch (const ProviderError& e) {
    EXPECT_FALSE(e.transient());
  }
}

TEST(OpenAiProvider, UnreachableHostIsTransient) {
  OpenAiCompatibleProvider p("http://127.0.0.1:1", "k");
  try {
    p.complete(hello(), 500ms);
    FAIL();
  } catch (const ProviderError& e) {
    EXPECT_TRUE(e.transient());
  }
}
