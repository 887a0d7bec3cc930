#pragma once

#include <functional>
#include <memory>
#include <string>

#include "vgbench/clock.hpp"
#include "vgbench/conversation.hpp"
#include "vgbench/corpus.hpp"
#include "vgbench/gateway.hpp"
#include "vgbench/patient_actor.hpp"

namespace vgbench {

/// The external health AI, reached through its own gateway.
struct SystemUnderTest {
  std::string name;
  std::string version;
  std::string model;
  std::shared_ptr<const ModelGateway> gateway;
  SamplingControls sampling{0.0, 1024};
};

struct LoopPolicy {
  /// Hard cap on turns, actor and AI together.
  int max_turns = 60;
  ActorSettings actor;
};

/// Throws Error(InvalidPolicy) when max_turns < 2.
void validate_loop_policy(const LoopPolicy& p);

/// Request sent to the SUT: the patient speaks as user, the SUT as assistant.
ChatRequest sut_request(const SystemUnderTest& sut, const Conversation& c);

struct ConversationEnv {
  std::string run_id;
  /// Timestamps for turns; a SystemClock is used when null.
  Clock* clock = nullptr;
  /// Built-in lexicon linter when null.
  const ActorLinter* linter = nullptr;
  /// Called after every appended turn, before the next request goes out.
  std::function<void(const Conversation&, const Turn&)> on_turn;
};

/// Runs one vignette to a terminal state. Gateway or SUT errors end the
/// conversation as gateway_failure with every completed turn kept; they are
/// not rethrown.
Conversation run_conversation(const ClinicalVignette& v, const SystemUnderTest& sut, const ModelGateway& actor_gateway,
                              const LoopPolicy& policy, const ConversationEnv& env = {});

}  // namespace vgbench
