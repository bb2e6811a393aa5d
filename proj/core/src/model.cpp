#include "ledgergate/model.hpp"

#include <algorithm>
#include <array>
#include <utility>

namespace ledgergate {

namespace {

template <class E, std::size_t N>
using Table = std::array<std::pair<E, std::string_view>, N>;

constexpr Table<Role, 3> kRoles{{
    {Role::DataKeeper, "DATA_KEEPER"},
    {Role::ThirdParty, "THIRD_PARTY"},
    {Role::ConsortiumNode, "CONSORTIUM_NODE"},
}};
constexpr Table<PermissionLevel, 3> kLevels{{
    {PermissionLevel::None, "NONE"},
    {PermissionLevel::Read, "READ"},
    {PermissionLevel::Write, "WRITE"},
}};
constexpr Table<AgreementRule, 3> kRules{{
    {AgreementRule::Any, "ANY"},
    {AgreementRule::Majority, "MAJORITY"},
    {AgreementRule::All, "ALL"},
}};
constexpr Table<RecordStatus, 2> kRecordStatus{{
    {RecordStatus::Active, "ACTIVE"},
    {RecordStatus::Removed, "REMOVED"},
}};
constexpr Table<PolicyStatus, 4> kPolicyStatus{{
    {PolicyStatus::Pending, "PENDING"},
    {PolicyStatus::Granted, "GRANTED"},
    {PolicyStatus::Denied, "DENIED"},
    {PolicyStatus::Revoked, "REVOKED"},
}};
constexpr Table<TxKind, 3> kKinds{{
    {TxKind::RecordOp, "RECORD_OP"},
    {TxKind::PolicyOp, "POLICY_OP"},
    {TxKind::IndividualAuth, "INDIVIDUAL_AUTH"},
}};
constexpr Table<StateTag, 9> kTags{{
    {StateTag::Create, "CREATE"},
    {StateTag::Update, "UPDATE"},
    {StateTag::Remove, "REMOVE"},
    {StateTag::Request, "REQUEST"},
    {StateTag::Require, "REQUIRE"},
    {StateTag::RequireAction, "REQUIRE_ACTION"},
    {StateTag::AuthGrant, "AUTH_GRANT"},
    {StateTag::AuthDeny, "AUTH_DENY"},
    {StateTag::AuthRevoke, "AUTH_REVOKE"},
}};

template <class E, std::size_t N>
std::string_view name_of(const Table<E, N>& table, E value) noexcept {
  for (const auto& [v, name] : table) {
    if (v == value) return name;
  }
  return "?";
}

template <class E, std::size_t N>
std::optional<E> value_of(const Table<E, N>& table, std::string_view name) noexcept {
  for (const auto& [v, n] : table) {
    if (n == name) return v;
  }
  return std::nullopt;
}

}  // namespace

bool is_valid_identifier(std::string_view value) noexcept {
  if (value.empty() || value.size() > 64) return false;
  return std::all_of(value.begin(), value.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
           c == '_' || c == '.' || c == '~';
  });
}

bool valid_for(TxKind kind, StateTag tag) noexcept {
  switch (kind) {
    case TxKind::RecordOp:
      return tag == StateTag::Create || tag == StateTag::Update || tag == StateTag::Remove;
    case TxKind::PolicyOp:
      return tag == StateTag::Request || tag == StateTag::Require || tag == StateTag::AuthGrant ||
             tag == StateTag::AuthDeny || tag == StateTag::AuthRevoke;
    case TxKind::IndividualAuth:
      return tag == StateTag::RequireAction || tag == StateTag::AuthGrant ||
             tag == StateTag::AuthDeny || tag == StateTag::AuthRevoke;
  }
  return false;
}

std::string_view to_string(Role v) noexcept { return name_of(kRoles, v); }
std::string_view to_string(PermissionLevel v) noexcept { return name_of(kLevels, v); }
std::string_view to_string(AgreementRule v) noexcept { return name_of(kRules, v); }
std::string_view to_string(RecordStatus v) noexcept { return name_of(kRecordStatus, v); }
std::string_view to_string(PolicyStatus v) noexcept { return name_of(kPolicyStatus, v); }
std::string_view to_string(TxKind v) noexcept { return name_of(kKinds, v); }
std::string_view to_string(StateTag v) noexcept { return name_of(kTags, v); }

std::optional<Role> parse_role(std::string_view s) noexcept { return value_of(kRoles, s); }
std::optional<PermissionLevel> parse_level(std::string_view s) noexcept {
  return value_of(kLevels, s);
}
std::optional<AgreementRule> parse_agreement(std::string_view s) noexcept {
  return value_of(kRules, s);
}
std::optional<TxKind> parse_kind(std::string_view s) noexcept { return value_of(kKinds, s); }
std::optional<StateTag> parse_tag(std::string_view s) noexcept { return value_of(kTags, s); }

bool Record::has_keeper(const EntityId& e) const {
  return std::find(keepers.begin(), keepers.end(), e) != keepers.end();
}

bool payload_matches(StateTag tag, const Payload& payload) noexcept {
  switch (tag) {
    case StateTag::Create:
    case StateTag::Update: return std::holds_alternative<RecordDescriptor>(payload);
    case StateTag::Remove: return std::holds_alternative<RecordRef>(payload);
    case StateTag::Request: return std::holds_alternative<AccessRequest>(payload);
    default: return std::holds_alternative<RequestRef>(payload);
  }
}

std::optional<RequestId> request_of(const Transaction& tx) {
  if (const auto* r = std::get_if<AccessRequest>(&tx.payload)) return r->request;
  if (const auto* r = std::get_if<RequestRef>(&tx.payload)) return r->request;
  return std::nullopt;
}

std::optional<RecordId> record_of(const Transaction& tx) {
  if (const auto* r = std::get_if<RecordDescriptor>(&tx.payload)) return r->record;
  if (const auto* r = std::get_if<RecordRef>(&tx.payload)) return r->record;
  if (const auto* r = std::get_if<AccessRequest>(&tx.payload)) return r->record;
  return std::nullopt;
}

namespace {

Transaction make(TxId id, TxKind kind, StateTag tag, Payload payload, EntityId author,
                 Timestamp ts) {
  Transaction tx;
  tx.id = std::move(id);
  tx.kind = kind;
  tx.tag = tag;
  tx.payload = std::move(payload);
  tx.author = std::move(author);
  tx.timestamp = ts;
  return tx;
}

}  // namespace

Transaction record_create(TxId id, EntityId author, Timestamp ts, RecordDescriptor desc) {
  return make(std::move(id), TxKind::RecordOp, StateTag::Create, std::move(desc), std::move(author),
              ts);
}

Transaction record_update(TxId id, EntityId author, Timestamp ts, RecordDescriptor desc) {
  return make(std::move(id), TxKind::RecordOp, StateTag::Update, std::move(desc), std::move(author),
              ts);
}

Transaction record_remove(TxId id, EntityId author, Timestamp ts, RecordId record) {
  return make(std::move(id), TxKind::RecordOp, StateTag::Remove, RecordRef{std::move(record)},
              std::move(author), ts);
}

Transaction access_request(TxId id, Timestamp ts, AccessRequest req) {
  EntityId party = req.party;
  return make(std::move(id), TxKind::PolicyOp, StateTag::Request, std::move(req), std::move(party),
              ts);
}

Transaction access_require(TxId id, EntityId node, Timestamp ts, RequestId request) {
  return make(std::move(id), TxKind::PolicyOp, StateTag::Require, RequestRef{std::move(request)},
              std::move(node), ts);
}

Transaction keeper_vote(TxId id, EntityId keeper, Timestamp ts, RequestId request, bool grant) {
  return make(std::move(id), TxKind::IndividualAuth,
              grant ? StateTag::AuthGrant : StateTag::AuthDeny, RequestRef{std::move(request)},
              std::move(keeper), ts);
}

Transaction keeper_revoke(TxId id, EntityId keeper, Timestamp ts, RequestId request) {
  return make(std::move(id), TxKind::IndividualAuth, StateTag::AuthRevoke,
              RequestRef{std::move(request)}, std::move(keeper), ts);
}

}  // namespace ledgergate
