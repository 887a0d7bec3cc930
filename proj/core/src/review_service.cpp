#include "vgbench/review_service.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <tuple>

#include <httplib.h>

#include "vgbench/digest.hpp"
#include "vgbench/error.hpp"

namespace vgbench {

using json = nlohmann::json;

// ---- tokens ---------------------------------------------------------------

TokenAuthority::TokenAuthority(std::string secret) : secret_(std::move(secret)) {
  if (secret_.empty()) secret_ = random_hex(32);
}

std::string TokenAuthority::issue(const std::string& judge) const {
  if (judge.empty() || judge.find('.') != std::string::npos) {
    throw Error(ErrorCode::InvalidConfig, "judge name must be non-empty and contain no '.': " + judge);
  }
  return judge + "." + hmac_sha256_hex(secret_, judge);
}

void TokenAuthority::allow(const std::string& token, const std::string& judge) {
  if (token.empty() || judge.empty()) throw Error(ErrorCode::InvalidConfig, "empty token or judge");
  static_[token] = judge;
}

void TokenAuthority::allow_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read token file " + path.string());
  json j;
  try {
    j = json::parse(in);
    for (const auto& t : j.at("tokens")) allow(t.at("token").get<std::string>(), t.at("judge").get<std::string>());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, path.string() + ": " + e.what());
  }
}

std::optional<std::string> TokenAuthority::verify(std::string_view token) const {
  if (auto it = static_.find(token); it != static_.end()) return it->second;
  const auto dot = token.rfind('.');
  if (dot == std::string_view::npos || dot == 0) return std::nullopt;
  const std::string judge(token.substr(0, dot));
  const auto expected = hmac_sha256_hex(secret_, judge);
  const auto given = token.substr(dot + 1);
  if (given.size() != expected.size()) return std::nullopt;
  // constant-time compare
  unsigned char diff = 0;
  for (std::size_t i = 0; i < given.size(); ++i) diff |= static_cast<unsigned char>(given[i] ^ expected[i]);
  if (diff != 0) return std::nullopt;
  return judge;
}

// ---- json views -----------------------------------------------------------

namespace {

json lease_json(const std::optional<Lease>& l) {
  if (!l) return json{{"state", "free"}};
  return json{{"state", "leased"}, {"judge", l->judge}, {"expires", format_timestamp(l->expires)}};
}

json components_json(const CaseJudgment& j) {
  json out{{"top1", to_string(j.top1.rule)},
           {"top2", to_string(j.top2.rule)},
           {"referral_correct", nullptr},
           {"judge_kind", to_string(j.judge_kind)},
           {"judge", j.judge},
           {"rationale", j.rationale},
           {"timestamp", j.timestamp}};
  if (j.referral_correct) out["referral_correct"] = *j.referral_correct;
  return out;
}

std::string_view sort_stamp(const ReviewCase& c) {
  if (!c.judgment.timestamp.empty()) return c.judgment.timestamp;
  if (c.conversation && !c.conversation->empty()) return c.conversation->turns().back().timestamp;
  return {};
}

}  // namespace

json summary_json(const ReviewCase& c) {
  json out{{"case_id", c.case_id},
           {"pending", c.judgment.pending()},
           {"placeholder", c.placeholder},
           {"escalation", c.judgment.escalation ? json(*c.judgment.escalation) : json(nullptr)},
           {"candidates", c.judgment.candidates},
           {"lease", lease_json(c.lease)},
           {"turns", c.conversation ? c.conversation->size() : 0}};
  if (c.vignette) {
    out["specialty"] = specialty_name(c.vignette->specialty);
    out["incidence"] = to_string(c.vignette->incidence);
  }
  if (c.conversation) out["terminal_state"] = to_string(c.conversation->terminal_state());
  return out;
}

json detail_json(const ReviewCase& c, bool reveal_gold) {
  json out = summary_json(c);
  json transcript = json::array();
  if (c.conversation) {
    for (const auto& t : c.conversation->turns()) transcript.push_back(to_json(t));
    if (c.conversation->failure()) out["failure"] = *c.conversation->failure();
  }
  out["transcript"] = std::move(transcript);
  out["referral_specialty"] =
      c.judgment.referral_specialty ? json(specialty_name(*c.judgment.referral_specialty)) : json(nullptr);
  out["blinded"] = !reveal_gold;
  if (reveal_gold) {
    if (c.vignette) {
      out["vignette"] = {{"gold_diagnosis", c.vignette->gold_diagnosis},
                         {"gold_synonyms", c.vignette->gold_synonyms},
                         {"gold_specialty", specialty_name(c.vignette->gold_specialty)},
                         {"incidence", to_string(c.vignette->incidence)},
                         {"narrative", c.vignette->narrative}};
    }
    if (!c.placeholder) out["verdict"] = components_json(c.judgment);
    json history = json::array();
    for (const auto& h : c.judgment.history) {
      json r{{"top1", to_string(h.top1.rule)},
             {"top2", to_string(h.top2.rule)},
             {"referral_correct", h.referral_correct ? json(*h.referral_correct) : json(nullptr)},
             {"judge_kind", to_string(h.judge_kind)},
             {"judge", h.judge},
             {"rationale", h.rationale},
             {"timestamp", h.timestamp}};
      history.push_back(std::move(r));
    }
    out["history"] = std::move(history);
  }
  return out;
}

// ---- service --------------------------------------------------------------

ReviewService::ReviewService(RunStore& store, std::string run_id, Clock& clock,
                             std::chrono::milliseconds lease_duration)
    : store_(store), run_id_(std::move(run_id)), clock_(clock), lease_duration_(lease_duration) {
  if (lease_duration_ <= std::chrono::milliseconds::zero()) {
    throw Error(ErrorCode::InvalidConfig, "lease duration must be positive");
  }
  run_ = store_.load_run(run_id_);
  if (!run_.corpus) throw Error(ErrorCode::CorruptManifest, "run " + run_id_ + " has no corpus snapshot");
  for (const auto& c : run_.conversations) conversations_.emplace(c.id(), c);
  book_ = JudgmentBook(run_.verdicts);
}

void ReviewService::require_run(std::string_view run_id) const {
  if (run_id != run_id_) throw Error(ErrorCode::UnknownRun, "not served here: " + std::string(run_id));
}

std::vector<RunManifest> ReviewService::list_runs() const { return store_.list_runs(); }

std::optional<Lease> ReviewService::live_lease(const std::string& id) const {
  auto it = leases_.find(id);
  if (it == leases_.end() || it->second.expires <= clock_.now()) return std::nullopt;
  return it->second;
}

ReviewCase ReviewService::make_case(const std::string& id) const {
  ReviewCase rc;
  rc.case_id = id;
  rc.vignette = run_.corpus->find(id);
  if (auto it = conversations_.find(id); it != conversations_.end()) rc.conversation = it->second;
  if (auto j = book_.find(id)) {
    rc.judgment = std::move(*j);
  } else {
    // failed or unjudged conversation: nothing was scored, a human decides
    rc.placeholder = true;
    rc.judgment.case_id = id;
    rc.judgment.top1 = {MatchRule::Unresolved};
    rc.judgment.top2 = {MatchRule::Unresolved};
    std::string why = "no automated judgment";
    if (rc.conversation && rc.conversation->failure()) why += ": " + *rc.conversation->failure();
    rc.judgment.escalation = why;
  }
  rc.lease = live_lease(id);
  return rc;
}

std::vector<ReviewCase> ReviewService::list_pending(std::string_view run_id) const {
  require_run(run_id);
  std::lock_guard lock(mu_);
  std::vector<ReviewCase> out;
  for (const auto& j : book_.pending()) out.push_back(make_case(j.case_id));
  for (const auto& [id, c] : conversations_) {
    if (!book_.contains(id)) out.push_back(make_case(id));
  }
  std::stable_sort(out.begin(), out.end(), [](const ReviewCase& a, const ReviewCase& b) {
    return std::tuple(sort_stamp(a), std::string_view(a.case_id)) <
           std::tuple(sort_stamp(b), std::string_view(b.case_id));
  });
  return out;
}

ReviewCase ReviewService::get_case(std::string_view case_id) const {
  const std::string id(case_id);
  std::lock_guard lock(mu_);
  if (!book_.contains(id) && !conversations_.count(id)) throw Error(ErrorCode::UnknownCase, id);
  return make_case(id);
}

ReviewCase ReviewService::checkout(std::string_view case_id, const std::string& judge) {
  const std::string id(case_id);
  std::lock_guard lock(mu_);
  if (!book_.contains(id) && !conversations_.count(id)) throw Error(ErrorCode::UnknownCase, id);
  if (auto l = live_lease(id); l && l->judge != judge) {
    throw Error(ErrorCode::LeaseConflict, id + " leased to " + l->judge + " until " + format_timestamp(l->expires));
  }
  leases_[id] = Lease{judge, clock_.now() + lease_duration_};
  return make_case(id);
}

CaseJudgment ReviewService::submit_verdict(std::string_view case_id, const HumanVerdict& verdict,
                                           const std::string& judge) {
  const std::string id(case_id);
  std::lock_guard lock(mu_);
  if (!book_.contains(id) && !conversations_.count(id)) throw Error(ErrorCode::UnknownCase, id);
  auto l = live_lease(id);
  if (!l || l->judge != judge) throw Error(ErrorCode::NoLease, id + " is not checked out by " + judge);

  const ReviewCase current = make_case(id);
  const auto next = apply_human_verdict(current.judgment, verdict, judge, format_timestamp(clock_.now()));
  // the stored record carries its own history, so one append is both the
  // judgment and its audit trail
  store_.append_verdict(run_id_, next);
  book_.put(next);
  leases_.erase(id);
  return next;
}

BenchmarkReport ReviewService::report_snapshot(std::string_view run_id) const {
  require_run(run_id);
  std::lock_guard lock(mu_);
  std::vector<Conversation> conversations;
  conversations.reserve(conversations_.size());
  for (const auto& [id, c] : conversations_) conversations.push_back(c);
  return aggregate(book_.all(), conversations, *run_.corpus, run_.baseline.value_or(BaselineTable{}), run_id_);
}

// ---- http -----------------------------------------------------------------

struct ReviewServer::Impl {
  ReviewService& service;
  const TokenAuthority& tokens;
  ServerOptions options;
  httplib::Server server;
  std::atomic<int> port{0};

  Impl(ReviewService& s, const TokenAuthority& t, ServerOptions o)
      : service(s), tokens(t), options(std::move(o)) {}

  static void send(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static int status_for(ErrorCode code) {
    switch (code) {
      case ErrorCode::Unauthorized: return 401;
      case ErrorCode::UnknownCase:
      case ErrorCode::UnknownRun: return 404;
      case ErrorCode::LeaseConflict:
      case ErrorCode::NoLease: return 409;
      case ErrorCode::MalformedRule:
      case ErrorCode::InvalidVerdict: return 422;
      case ErrorCode::InvalidRequest:
      case ErrorCode::UnknownFormat: return 400;
      default: return 500;
    }
  }

  std::string authenticate(const httplib::Request& req) const {
    const auto header = req.get_header_value("Authorization");
    constexpr std::string_view prefix = "Bearer ";
    if (header.rfind(prefix, 0) != 0) throw Error(ErrorCode::Unauthorized, "missing bearer token");
    auto judge = tokens.verify(std::string_view(header).substr(prefix.size()));
    if (!judge) throw Error(ErrorCode::Unauthorized, "invalid token");
    return *judge;
  }

  template <typename F>
  httplib::Server::Handler guarded(F f) {
    return [this, f](const httplib::Request& req, httplib::Response& res) {
      try {
        const auto judge = authenticate(req);
        f(req, res, judge);
      } catch (const Error& e) {
        send(res, status_for(e.code()), json{{"error", std::string(to_string(e.code()))}, {"message", e.what()}});
      } catch (const std::exception& e) {
        send(res, 500, json{{"error", "Internal"}, {"message", e.what()}});
      }
    };
  }

  static HumanVerdict parse_verdict(const std::string& body) {
    json j;
    try {
      j = json::parse(body);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::InvalidRequest, std::string("body is not JSON: ") + e.what());
    }
    if (!j.is_object()) throw Error(ErrorCode::InvalidRequest, "body must be an object");
    auto rule = [&](const char* key) {
      if (!j.contains(key) || !j[key].is_string()) throw Error(ErrorCode::MalformedRule, std::string(key) + " missing");
      const auto s = j[key].get<std::string>();
      auto r = parse_match_rule(s);
      if (!r || *r == MatchRule::Unresolved) throw Error(ErrorCode::MalformedRule, std::string(key) + ": " + s);
      return *r;
    };
    HumanVerdict v;
    v.top1 = rule("top1");
    v.top2 = rule("top2");
    if (j.contains("referral_correct") && !j["referral_correct"].is_null()) {
      if (!j["referral_correct"].is_boolean()) throw Error(ErrorCode::InvalidRequest, "referral_correct must be bool");
      v.referral_correct = j["referral_correct"].get<bool>();
    }
    if (j.contains("rationale")) {
      if (!j["rationale"].is_string()) throw Error(ErrorCode::InvalidRequest, "rationale must be a string");
      v.rationale = j["rationale"].get<std::string>();
    }
    return v;
  }

  void routes() {
    // httplib defaults to SO_REUSEPORT, which would let a second server share
    // the port and split the in-process leases between them
    server.set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    server.Get("/runs", guarded([this](const httplib::Request&, httplib::Response& res, const std::string&) {
      json runs = json::array();
      for (const auto& m : service.list_runs()) {
        json r = to_json(m);
        r["served"] = m.run_id == service.run_id();
        runs.push_back(std::move(r));
      }
      send(res, 200, json{{"runs", std::move(runs)}});
    }));

    server.Get(R"(/runs/([^/]+)/pending)",
               guarded([this](const httplib::Request& req, httplib::Response& res, const std::string&) {
                 json cases = json::array();
                 for (const auto& c : service.list_pending(req.matches[1].str())) cases.push_back(summary_json(c));
                 send(res, 200, json{{"run_id", service.run_id()}, {"count", cases.size()}, {"cases", cases}});
               }));

    server.Get(R"(/runs/([^/]+)/report)",
               guarded([this](const httplib::Request& req, httplib::Response& res, const std::string&) {
                 const auto report = service.report_snapshot(req.matches[1].str());
                 if (req.has_param("format")) {
                   const auto f = parse_report_format(req.get_param_value("format"));
                   res.status = 200;
                   const char* type = f == ReportFormat::Csv        ? "text/csv"
                                      : f == ReportFormat::Markdown ? "text/markdown"
                                                                    : "text/plain";
                   res.set_content(render(report, f), type);
                   return;
                 }
                 send(res, 200, to_json(report));
               }));

    server.Get(R"(/cases/([^/]+))",
               guarded([this](const httplib::Request& req, httplib::Response& res, const std::string& judge) {
                 const auto c = service.get_case(req.matches[1].str());
                 send(res, 200, detail_json(c, c.lease && c.lease->judge == judge));
               }));

    server.Post(R"(/cases/([^/]+)/checkout)",
                guarded([this](const httplib::Request& req, httplib::Response& res, const std::string& judge) {
                  const auto c = service.checkout(req.matches[1].str(), judge);
                  send(res, 200, detail_json(c, true));
                }));

    server.Post(R"(/cases/([^/]+)/verdict)",
                guarded([this](const httplib::Request& req, httplib::Response& res, const std::string& judge) {
                  const auto v = parse_verdict(req.body);
                  const auto j = service.submit_verdict(req.matches[1].str(), v, judge);
                  send(res, 200, to_json(j));
                }));

    if (options.ui_dir) {
      if (!server.set_mount_point("/", options.ui_dir->string())) {
        throw Error(ErrorCode::InvalidConfig, "ui dir not found: " + options.ui_dir->string());
      }
    }
  }
};

ReviewServer::ReviewServer(ReviewService& service, const TokenAuthority& tokens, ServerOptions options)
    : impl_(std::make_unique<Impl>(service, tokens, std::move(options))) {
  impl_->routes();
}

ReviewServer::~ReviewServer() { stop(); }

int ReviewServer::bind() {
  auto& o = impl_->options;
  int port = o.port;
  if (port == 0) {
    port = impl_->server.bind_to_any_port(o.host);
    if (port < 0) port = 0;
  } else if (!impl_->server.bind_to_port(o.host, port)) {
    port = 0;
  }
  if (port == 0) throw Error(ErrorCode::InvalidConfig, "cannot bind " + o.host + ":" + std::to_string(o.port));
  impl_->port = port;
  return port;
}

void ReviewServer::listen() { impl_->server.listen_after_bind(); }

void ReviewServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

void ReviewServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

int ReviewServer::port() const noexcept { return impl_->port; }

}  // namespace vgbench
