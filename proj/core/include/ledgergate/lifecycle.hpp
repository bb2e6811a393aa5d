#pragma once

// Transaction admissibility. Three coupled state machines are encoded as
// rules over the current snapshot:
//
//   record:      CREATE -> UPDATE* -> REMOVE (terminal)
//   access:      REQUEST -> REQUIRE -> WAITING_AUTH_CHECK -> GRANTED | DENIED
//                GRANTED -> REVOKED once live grants fall below the quorum
//   individual:  one slot per keeper at REQUIRE time; each keeper votes
//                AUTH_GRANT or AUTH_DENY once, and may AUTH_REVOKE its grant
//
// Aggregate transitions and REQUIRE_ACTION slots are derived from the
// individual votes; they are never authored as transactions.

#include <map>
#include <span>
#include <string>
#include <string_view>

#include "ledgergate/model.hpp"

namespace ledgergate {

class Snapshot;

enum class Reason {
  Ok,
  RecordTerminal,
  DuplicateVote,
  NotKeeper,
  PolicyExists,
  RevokeWithoutGrant,
  BadAuthor,
  UnknownRecord,
  RecordExists,
  UnknownRequest,
  RequestTerminal,
  OutOfOrder,
  DerivedTransition,
  DuplicateTx,
  UnknownEntity,
  InvalidPayload,
};

std::string_view to_string(Reason reason) noexcept;

struct Admission {
  Reason reason = Reason::Ok;
  std::string detail;

  bool ok() const noexcept { return reason == Reason::Ok; }
  explicit operator bool() const noexcept { return ok(); }
};

enum class Vote { Grant, Deny, RevokedGrant };
enum class RequestState { Requested, WaitingAuthCheck, Granted, Denied, Revoked };
enum class Aggregate { Pending, Granted, Denied };

std::string_view to_string(Vote v) noexcept;
std::string_view to_string(RequestState s) noexcept;
std::string_view to_string(Aggregate a) noexcept;

using Votes = std::map<EntityId, Vote>;

/// Progress of one access request. The keeper slots and agreement rule are
/// fixed when the REQUIRE transaction is applied.
struct RequestProgress {
  RequestId id;
  EntityId party;
  RecordId record;
  PermissionLevel level = PermissionLevel::Read;
  std::optional<Timestamp> expiry;
  RequestState state = RequestState::Requested;
  std::vector<EntityId> keepers;
  AgreementRule agreement = AgreementRule::Any;
  Votes votes;
  Timestamp requested_at = 0;
  std::optional<Timestamp> required_at;

  bool terminal() const noexcept {
    return state == RequestState::Denied || state == RequestState::Revoked;
  }
  friend bool operator==(const RequestProgress&, const RequestProgress&) = default;
};

PolicyStatus policy_status(RequestState state) noexcept;

/// GRANTED iff live GRANT votes reach required_grants; DENIED iff the
/// threshold is no longer reachable; PENDING otherwise. Votes from entities
/// outside `keepers` are ignored.
Aggregate aggregate_decision(AgreementRule rule, std::span<const EntityId> keepers,
                             const Votes& votes);
Aggregate aggregate_decision(const Record& record, const Votes& votes);

/// Turns `keeper`'s GRANT into REVOKED_GRANT and returns the new status of a
/// previously GRANTED request: GRANTED if the quorum still holds, REVOKED
/// otherwise. Throws Error(RevokeWithoutGrant) if `keeper` holds no GRANT.
RequestState apply_revocation(const Record& record, Votes& votes, const EntityId& keeper);

/// Whether `tx` is a legal transition given `snap`. The signature is assumed
/// to have been verified already.
Admission admissible(const Transaction& tx, const Snapshot& snap);

}  // namespace ledgergate
