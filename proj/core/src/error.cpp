#include "ledgergate/error.hpp"

namespace ledgergate {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::EncodeUnrepresentable: return "ENCODE_UNREPRESENTABLE";
    case ErrorCode::UnknownEntity: return "UNKNOWN_ENTITY";
    case ErrorCode::InvalidTx: return "INVALID_TX";
    case ErrorCode::NotMember: return "NOT_MEMBER";
    case ErrorCode::IoFailure: return "IO_FAILURE";
    case ErrorCode::CorruptStore: return "CORRUPT_STORE";
    case ErrorCode::ReplayInconsistent: return "REPLAY_INCONSISTENT";
    case ErrorCode::RevokeWithoutGrant: return "REVOKE_WITHOUT_GRANT";
    case ErrorCode::PeerUnreachable: return "PEER_UNREACHABLE";
    case ErrorCode::ScenarioInvalid: return "SCENARIO_INVALID";
    case ErrorCode::BindFailure: return "BIND_FAILURE";
    case ErrorCode::UnknownRecord: return "UNKNOWN_RECORD";
    case ErrorCode::ConfigInvalid: return "CONFIG_INVALID";
    case ErrorCode::BadKey: return "BAD_KEY";
    case ErrorCode::Malformed: return "MALFORMED";
  }
  return "UNKNOWN";
}

Error::Error(ErrorCode code, const std::string& detail)
    : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

}  // namespace ledgergate
