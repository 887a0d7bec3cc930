#include "vgbench/orchestrator.hpp"

#include "vgbench/error.hpp"
#include "vgbench/text.hpp"

namespace vgbench {

void validate_loop_policy(const LoopPolicy& p) {
  if (p.max_turns < 2) throw Error(ErrorCode::InvalidPolicy, "max_turns must be at least 2");
}

ChatRequest sut_request(const SystemUnderTest& sut, const Conversation& c) {
  ChatRequest req;
  req.model = sut.model;
  req.sampling = sut.sampling;
  req.tag = RequestTag{c.vignette_id(), static_cast<int>(c.size())};
  for (const auto& t : c.turns()) {
    req.messages.push_back({t.role == Speaker::PatientActor ? ChatRole::User : ChatRole::Assistant, t.text});
  }
  return req;
}

Conversation run_conversation(const ClinicalVignette& v, const SystemUnderTest& sut, const ModelGateway& actor_gateway,
                              const LoopPolicy& policy, const ConversationEnv& env) {
  validate_loop_policy(policy);
  if (!sut.gateway) throw Error(ErrorCode::InvalidConfig, "system under test has no gateway");

  SystemClock system_clock;
  Clock& clock = env.clock ? *env.clock : system_clock;
  const ActorLinter default_linter;
  const ActorLinter& linter = env.linter ? *env.linter : default_linter;

  Conversation c(v.id, env.run_id);
  auto push = [&](std::string text, std::vector<LintViolation> lint = {}) {
    const auto& t = c.append(std::move(text), format_timestamp(clock.now()), std::move(lint));
    if (env.on_turn) env.on_turn(c, t);
  };

  PatientPersona persona;
  PromptSpec prompt;
  try {
    persona = build_persona(v, linter.lexicon());
    prompt = compose_actor_prompt(persona, v);
  } catch (const Error& e) {
    c.finish(TerminalState::GatewayFailure, std::string("persona: ") + e.what());
    return c;
  }

  while (true) {
    if (static_cast<int>(c.size()) >= policy.max_turns) {
      c.finish(TerminalState::MaxTurnsReached);
      break;
    }

    std::string actor_text;
    try {
      actor_text = next_patient_message(prompt, c, actor_gateway, policy.actor);
    } catch (const Error& e) {
      c.finish(TerminalState::GatewayFailure, "actor turn " + std::to_string(c.size()) + ": " + e.what());
      break;
    }
    auto lint = linter.lint(actor_text, persona, c);
    push(std::move(actor_text), std::move(lint));
    const bool closing = detect_close(c, linter.lexicon());

    if (static_cast<int>(c.size()) >= policy.max_turns) {
      c.finish(closing ? TerminalState::ClosedNormally : TerminalState::MaxTurnsReached);
      break;
    }

    std::string reply;
    try {
      reply = text::trim(sut.gateway->chat(sut_request(sut, c)).text);
      if (reply.empty()) throw Error(ErrorCode::ProviderFailure, "empty reply");
    } catch (const Error& e) {
      c.finish(TerminalState::GatewayFailure, "sut turn " + std::to_string(c.size()) + ": " + e.what());
      break;
    }
    push(std::move(reply));
    if (closing) {
      c.finish(TerminalState::ClosedNormally);
      break;
    }
  }
  return c;
}

}  // namespace vgbench
