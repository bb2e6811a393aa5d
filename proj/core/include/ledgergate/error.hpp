#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ledgergate {

// Stable failure codes. The names are part of the public surface: the CLI
// prints them and the gateway returns them in error bodies.
enum class ErrorCode {
  EncodeUnrepresentable,
  UnknownEntity,
  InvalidTx,
  NotMember,
  IoFailure,
  CorruptStore,
  ReplayInconsistent,
  RevokeWithoutGrant,
  PeerUnreachable,
  ScenarioInvalid,
  BindFailure,
  UnknownRecord,
  ConfigInvalid,
  BadKey,
  Malformed,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail);

  ErrorCode code() const noexcept { return code_; }
  std::string_view code_name() const noexcept { return to_string(code_); }

 private:
  ErrorCode code_;
};

}  // namespace ledgergate
