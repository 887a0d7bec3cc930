#include "vgbench/error.hpp"

namespace vgbench {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Io: return "IoError";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::MalformedRecord: return "MalformedRecord";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::UnknownSpecialty: return "UnknownSpecialty";
    case ErrorCode::InvalidVignette: return "InvalidVignette";
    case ErrorCode::NoChiefComplaint: return "NoChiefComplaint";
    case ErrorCode::EmptyActorMessage: return "EmptyActorMessage";
    case ErrorCode::GatewayUnavailable: return "GatewayUnavailable";
    case ErrorCode::CassetteMiss: return "CassetteMiss";
    case ErrorCode::InvalidPolicy: return "InvalidPolicy";
    case ErrorCode::InvalidRequest: return "InvalidRequest";
    case ErrorCode::ProviderFailure: return "ProviderFailure";
    case ErrorCode::InvalidGraph: return "InvalidGraph";
    case ErrorCode::NoDiagnosisExtracted: return "NoDiagnosisExtracted";
    case ErrorCode::UnknownCase: return "UnknownCase";
    case ErrorCode::MalformedRule: return "MalformedRule";
    case ErrorCode::InvalidVerdict: return "InvalidVerdict";
    case ErrorCode::ReferentialIntegrity: return "ReferentialIntegrity";
    case ErrorCode::UnknownFormat: return "UnknownFormat";
    case ErrorCode::MalformedReport: return "MalformedReport";
    case ErrorCode::RunExists: return "RunExists";
    case ErrorCode::UnknownRun: return "UnknownRun";
    case ErrorCode::RunClosed: return "RunClosed";
    case ErrorCode::CorruptManifest: return "CorruptManifest";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::LeaseConflict: return "LeaseConflict";
    case ErrorCode::NoLease: return "NoLease";
    case ErrorCode::Unauthorized: return "Unauthorized";
  }
  return "Unknown";
}

}  // namespace vgbench
