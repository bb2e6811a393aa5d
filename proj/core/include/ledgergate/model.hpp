#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ledgergate/crypto.hpp"

namespace ledgergate {

using Timestamp = std::int64_t;  // seconds since epoch

/// Opaque identifier: URL-safe, 1-64 characters, compared byte-exactly.
template <class Tag>
class Id {
 public:
  Id() = default;
  explicit Id(std::string value) : value_(std::move(value)) {}

  const std::string& str() const noexcept { return value_; }
  bool valid() const noexcept;

  friend auto operator<=>(const Id&, const Id&) = default;
  friend bool operator==(const Id&, const Id&) = default;

 private:
  std::string value_;
};

bool is_valid_identifier(std::string_view value) noexcept;

template <class Tag>
bool Id<Tag>::valid() const noexcept {
  return is_valid_identifier(value_);
}

using EntityId = Id<struct EntityTag>;
using RecordId = Id<struct RecordTag>;
using RequestId = Id<struct RequestTag>;
using TxId = Id<struct TxTag>;

enum class Role { DataKeeper, ThirdParty, ConsortiumNode };

enum class PermissionLevel { None = 0, Read = 1, Write = 2 };

enum class AgreementRule { Any, Majority, All };

/// Grants needed to reach agreement among `keepers` keepers (keepers >= 1).
constexpr std::size_t required_grants(AgreementRule rule, std::size_t keepers) noexcept {
  switch (rule) {
    case AgreementRule::Any: return keepers == 0 ? 0 : 1;
    case AgreementRule::Majority: return keepers / 2 + 1 > keepers ? keepers : keepers / 2 + 1;
    case AgreementRule::All: return keepers;
  }
  return keepers;
}

enum class RecordStatus { Active, Removed };

enum class PolicyStatus { Pending, Granted, Denied, Revoked };

enum class TxKind { RecordOp, PolicyOp, IndividualAuth };

// One closed label set per transaction kind; see `valid_for`.
enum class StateTag {
  Create,
  Update,
  Remove,
  Request,
  Require,
  RequireAction,
  AuthGrant,
  AuthDeny,
  AuthRevoke,
};

bool valid_for(TxKind kind, StateTag tag) noexcept;

std::string_view to_string(Role v) noexcept;
std::string_view to_string(PermissionLevel v) noexcept;
std::string_view to_string(AgreementRule v) noexcept;
std::string_view to_string(RecordStatus v) noexcept;
std::string_view to_string(PolicyStatus v) noexcept;
std::string_view to_string(TxKind v) noexcept;
std::string_view to_string(StateTag v) noexcept;

std::optional<Role> parse_role(std::string_view s) noexcept;
std::optional<PermissionLevel> parse_level(std::string_view s) noexcept;
std::optional<AgreementRule> parse_agreement(std::string_view s) noexcept;
std::optional<TxKind> parse_kind(std::string_view s) noexcept;
std::optional<StateTag> parse_tag(std::string_view s) noexcept;

struct Entity {
  EntityId id;
  Role role = Role::ThirdParty;
  PublicKey key;
};

struct Record {
  RecordId id;
  std::vector<EntityId> keepers;  // insertion order, no duplicates
  AgreementRule agreement = AgreementRule::Any;
  std::string location;
  RecordStatus status = RecordStatus::Active;

  bool has_keeper(const EntityId& e) const;
  friend bool operator==(const Record&, const Record&) = default;
};

struct Policy {
  RequestId request;
  EntityId party;
  RecordId record;
  PermissionLevel level = PermissionLevel::Read;
  PolicyStatus status = PolicyStatus::Pending;
  std::optional<Timestamp> expiry;

  friend bool operator==(const Policy&, const Policy&) = default;
};

// Transaction payloads. Which alternative is legal depends on the state tag:
// CREATE/UPDATE carry a RecordDescriptor, REMOVE a RecordRef, REQUEST an
// AccessRequest, and every other tag a RequestRef.
struct RecordDescriptor {
  RecordId record;
  std::vector<EntityId> keepers;
  AgreementRule agreement = AgreementRule::Any;
  std::string location;
  friend bool operator==(const RecordDescriptor&, const RecordDescriptor&) = default;
};

struct RecordRef {
  RecordId record;
  friend bool operator==(const RecordRef&, const RecordRef&) = default;
};

struct AccessRequest {
  RequestId request;
  EntityId party;
  RecordId record;
  PermissionLevel level = PermissionLevel::Read;
  std::optional<Timestamp> expiry;
  friend bool operator==(const AccessRequest&, const AccessRequest&) = default;
};

struct RequestRef {
  RequestId request;
  friend bool operator==(const RequestRef&, const RequestRef&) = default;
};

using Payload = std::variant<RecordDescriptor, RecordRef, AccessRequest, RequestRef>;

/// True if `payload` holds the alternative `tag` requires.
bool payload_matches(StateTag tag, const Payload& payload) noexcept;

struct Transaction {
  TxId id;
  TxKind kind = TxKind::RecordOp;
  StateTag tag = StateTag::Create;
  Payload payload;
  EntityId author;
  Timestamp timestamp = 0;
  Bytes signature;

  friend bool operator==(const Transaction&, const Transaction&) = default;
};

/// (txId, stateTag): unique across the whole chain.
struct TxKey {
  TxId id;
  StateTag tag;
  friend auto operator<=>(const TxKey&, const TxKey&) = default;
  friend bool operator==(const TxKey&, const TxKey&) = default;
};

inline TxKey key_of(const Transaction& tx) { return {tx.id, tx.tag}; }

/// The request or record a transaction refers to, whichever applies.
std::optional<RequestId> request_of(const Transaction& tx);
std::optional<RecordId> record_of(const Transaction& tx);

// Builders for well-formed unsigned transactions.
Transaction record_create(TxId id, EntityId author, Timestamp ts, RecordDescriptor desc);
Transaction record_update(TxId id, EntityId author, Timestamp ts, RecordDescriptor desc);
Transaction record_remove(TxId id, EntityId author, Timestamp ts, RecordId record);
Transaction access_request(TxId id, Timestamp ts, AccessRequest req);
Transaction access_require(TxId id, EntityId node, Timestamp ts, RequestId request);
Transaction keeper_vote(TxId id, EntityId keeper, Timestamp ts, RequestId request, bool grant);
Transaction keeper_revoke(TxId id, EntityId keeper, Timestamp ts, RequestId request);

}  // namespace ledgergate

template <class Tag>
struct std::hash<ledgergate::Id<Tag>> {
  std::size_t operator()(const ledgergate::Id<Tag>& id) const noexcept {
    return std::hash<std::string>{}(id.str());
  }
};
