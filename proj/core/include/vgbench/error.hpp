#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vgbench {

enum class ErrorCode {
  // corpus
  Io,
  EmptyCorpus,
  MalformedRecord,
  DuplicateId,
  UnknownSpecialty,
  InvalidVignette,
  // actor
  NoChiefComplaint,
  EmptyActorMessage,
  // gateway
  GatewayUnavailable,
  CassetteMiss,
  InvalidPolicy,
  InvalidRequest,
  ProviderFailure,
  // judge
  InvalidGraph,
  NoDiagnosisExtracted,
  UnknownCase,
  MalformedRule,
  InvalidVerdict,
  // metrics
  ReferentialIntegrity,
  UnknownFormat,
  MalformedReport,
  // run store
  RunExists,
  UnknownRun,
  RunClosed,
  CorruptManifest,
  InvalidConfig,
  // review
  LeaseConflict,
  NoLease,
  Unauthorized,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Base exception for every failure the harness reports. The code is stable and
/// is what callers and tests branch on; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace vgbench
