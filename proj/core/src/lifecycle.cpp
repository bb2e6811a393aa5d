#include "ledgergate/lifecycle.hpp"

#include <algorithm>

#include "ledgergate/error.hpp"
#include "ledgergate/snapshot.hpp"

namespace ledgergate {

std::string_view to_string(Reason reason) noexcept {
  switch (reason) {
    case Reason::Ok: return "OK";
    case Reason::RecordTerminal: return "RECORD_TERMINAL";
    case Reason::DuplicateVote: return "DUPLICATE_VOTE";
    case Reason::NotKeeper: return "NOT_KEEPER";
    case Reason::PolicyExists: return "POLICY_EXISTS";
    case Reason::RevokeWithoutGrant: return "REVOKE_WITHOUT_GRANT";
    case Reason::BadAuthor: return "BAD_AUTHOR";
    case Reason::UnknownRecord: return "UNKNOWN_RECORD";
    case Reason::RecordExists: return "RECORD_EXISTS";
    case Reason::UnknownRequest: return "UNKNOWN_REQUEST";
    case Reason::RequestTerminal: return "REQUEST_TERMINAL";
    case Reason::OutOfOrder: return "OUT_OF_ORDER";
    case Reason::DerivedTransition: return "DERIVED_TRANSITION";
    case Reason::DuplicateTx: return "DUPLICATE_TX";
    case Reason::UnknownEntity: return "UNKNOWN_ENTITY";
    case Reason::InvalidPayload: return "INVALID_PAYLOAD";
  }
  return "?";
}

std::string_view to_string(Vote v) noexcept {
  switch (v) {
    case Vote::Grant: return "GRANT";
    case Vote::Deny: return "DENY";
    case Vote::RevokedGrant: return "REVOKED_GRANT";
  }
  return "?";
}

std::string_view to_string(RequestState s) noexcept {
  switch (s) {
    case RequestState::Requested: return "REQUESTED";
    case RequestState::WaitingAuthCheck: return "WAITING_AUTH_CHECK";
    case RequestState::Granted: return "GRANTED";
    case RequestState::Denied: return "DENIED";
    case RequestState::Revoked: return "REVOKED";
  }
  return "?";
}

std::string_view to_string(Aggregate a) noexcept {
  switch (a) {
    case Aggregate::Pending: return "PENDING";
    case Aggregate::Granted: return "GRANTED";
    case Aggregate::Denied: return "DENIED";
  }
  return "?";
}

PolicyStatus policy_status(RequestState state) noexcept {
  switch (state) {
    case RequestState::Requested:
    case RequestState::WaitingAuthCheck: return PolicyStatus::Pending;
    case RequestState::Granted: return PolicyStatus::Granted;
    case RequestState::Denied: return PolicyStatus::Denied;
    case RequestState::Revoked: return PolicyStatus::Revoked;
  }
  return PolicyStatus::Pending;
}

Aggregate aggregate_decision(AgreementRule rule, std::span<const EntityId> keepers,
                             const Votes& votes) {
  const std::size_t n = keepers.size();
  const std::size_t required = required_grants(rule, n);
  std::size_t grants = 0;
  std::size_t blocked = 0;
  for (const auto& keeper : keepers) {
    auto it = votes.find(keeper);
    if (it == votes.end()) continue;
    if (it->second == Vote::Grant) {
      ++grants;
    } else {
      ++blocked;
    }
  }
  if (grants >= required) return Aggregate::Granted;
  if (blocked > n - required) return Aggregate::Denied;
  return Aggregate::Pending;
}

Aggregate aggregate_decision(const Record& record, const Votes& votes) {
  return aggregate_decision(record.agreement, record.keepers, votes);
}

RequestState apply_revocation(const Record& record, Votes& votes, const EntityId& keeper) {
  auto it = votes.find(keeper);
  if (it == votes.end() || it->second != Vote::Grant) {
    throw Error(ErrorCode::RevokeWithoutGrant,
                "keeper '" + keeper.str() + "' holds no grant to revoke");
  }
  it->second = Vote::RevokedGrant;
  return aggregate_decision(record, votes) == Aggregate::Granted ? RequestState::Granted
                                                                 : RequestState::Revoked;
}

namespace {

Admission reject(Reason reason, std::string detail) { return {reason, std::move(detail)}; }

Admission check_keepers(const Directory& directory, const std::vector<EntityId>& keepers) {
  for (const auto& k : keepers) {
    const Entity* e = directory.find(k);
    if (e == nullptr || e->role != Role::DataKeeper) {
      return reject(Reason::NotKeeper, "'" + k.str() + "' is not a registered data keeper");
    }
  }
  return {};
}

Admission record_op(const Transaction& tx, const Snapshot& snap, const Entity& author) {
  if (tx.tag == StateTag::Create) {
    const auto& desc = std::get<RecordDescriptor>(tx.payload);
    if (snap.record(desc.record) != nullptr) {
      return reject(Reason::RecordExists, "record '" + desc.record.str() + "' already exists");
    }
    if (author.role != Role::DataKeeper) {
      return reject(Reason::BadAuthor, "records are created by data keepers");
    }
    return check_keepers(snap.directory(), desc.keepers);
  }
  const RecordId& id = tx.tag == StateTag::Update ? std::get<RecordDescriptor>(tx.payload).record
                                                  : std::get<RecordRef>(tx.payload).record;
  const Record* record = snap.record(id);
  if (record == nullptr) return reject(Reason::UnknownRecord, "record '" + id.str() + "'");
  if (record->status == RecordStatus::Removed) {
    return reject(Reason::RecordTerminal, "record '" + id.str() + "' was removed");
  }
  if (!record->has_keeper(tx.author)) {
    return reject(Reason::NotKeeper, "'" + tx.author.str() + "' does not keep '" + id.str() + "'");
  }
  if (tx.tag == StateTag::Update) {
    const auto& desc = std::get<RecordDescriptor>(tx.payload);
    if (desc.keepers.empty()) return reject(Reason::InvalidPayload, "keeper set is empty");
    return check_keepers(snap.directory(), desc.keepers);
  }
  return {};
}

bool live_grant(const RequestProgress& req, Timestamp at) {
  return req.state == RequestState::Granted && (!req.expiry || *req.expiry > at);
}

Admission policy_op(const Transaction& tx, const Snapshot& snap, const Entity& author) {
  if (tx.tag == StateTag::Request) {
    const auto& req = std::get<AccessRequest>(tx.payload);
    if (tx.author != req.party || author.role != Role::ThirdParty) {
      return reject(Reason::BadAuthor, "requests are signed by the requesting third party");
    }
    if (req.level == PermissionLevel::None) {
      return reject(Reason::InvalidPayload, "requested level must be READ or WRITE");
    }
    const Record* record = snap.record(req.record);
    if (record == nullptr) return reject(Reason::UnknownRecord, "record '" + req.record.str() + "'");
    if (record->status == RecordStatus::Removed) {
      return reject(Reason::RecordTerminal, "record '" + req.record.str() + "' was removed");
    }
    if (snap.request(req.request) != nullptr) {
      return reject(Reason::PolicyExists, "request id '" + req.request.str() + "' already used");
    }
    if (auto policy = snap.policy(req.party, req.record)) {
      const RequestProgress* prior = snap.request(policy->request);
      if (prior->state == RequestState::Requested ||
          prior->state == RequestState::WaitingAuthCheck || live_grant(*prior, tx.timestamp)) {
        return reject(Reason::PolicyExists, "a live request '" + prior->id.str() + "' exists");
      }
    }
    return {};
  }
  if (tx.tag != StateTag::Require) {
    return reject(Reason::DerivedTransition,
                  "aggregate decisions follow from individual authorizations");
  }
  if (author.role != Role::ConsortiumNode) {
    return reject(Reason::BadAuthor, "REQUIRE is issued by a consortium node");
  }
  const auto& id = std::get<RequestRef>(tx.payload).request;
  const RequestProgress* req = snap.request(id);
  if (req == nullptr) return reject(Reason::UnknownRequest, "request '" + id.str() + "'");
  if (req->terminal()) return reject(Reason::RequestTerminal, "request '" + id.str() + "' is final");
  if (req->state != RequestState::Requested) {
    return reject(Reason::OutOfOrder, "request '" + id.str() + "' was already required");
  }
  if (snap.record(req->record)->status == RecordStatus::Removed) {
    return reject(Reason::RecordTerminal, "record '" + req->record.str() + "' was removed");
  }
  return {};
}

Admission individual_auth(const Transaction& tx, const Snapshot& snap) {
  if (tx.tag == StateTag::RequireAction) {
    return reject(Reason::DerivedTransition, "vote slots are opened by REQUIRE");
  }
  const auto& id = std::get<RequestRef>(tx.payload).request;
  const RequestProgress* req = snap.request(id);
  if (req == nullptr) return reject(Reason::UnknownRequest, "request '" + id.str() + "'");
  if (snap.record(req->record)->status == RecordStatus::Removed) {
    return reject(Reason::RecordTerminal, "record '" + req->record.str() + "' was removed");
  }
  if (req->terminal()) return reject(Reason::RequestTerminal, "request '" + id.str() + "' is final");
  if (req->state == RequestState::Requested) {
    return reject(Reason::OutOfOrder, "request '" + id.str() + "' has not been required yet");
  }
  if (std::find(req->keepers.begin(), req->keepers.end(), tx.author) == req->keepers.end()) {
    return reject(Reason::NotKeeper, "'" + tx.author.str() + "' has no vote on '" + id.str() + "'");
  }
  auto vote = req->votes.find(tx.author);
  if (tx.tag == StateTag::AuthRevoke) {
    if (vote == req->votes.end() || vote->second != Vote::Grant) {
      return reject(Reason::RevokeWithoutGrant, "'" + tx.author.str() + "' holds no grant");
    }
    return {};
  }
  if (vote != req->votes.end()) {
    return reject(Reason::DuplicateVote, "'" + tx.author.str() + "' already voted");
  }
  return {};
}

}  // namespace

Admission admissible(const Transaction& tx, const Snapshot& snap) {
  const Entity* author = snap.directory().find(tx.author);
  if (author == nullptr) {
    return reject(Reason::UnknownEntity, "author '" + tx.author.str() + "' is not registered");
  }
  if (!valid_for(tx.kind, tx.tag) || !payload_matches(tx.tag, tx.payload)) {
    return reject(Reason::InvalidPayload, "state tag and payload do not fit the kind");
  }
  if (snap.seen(key_of(tx))) {
    return reject(Reason::DuplicateTx, "(txId, stateTag) already applied");
  }
  switch (tx.kind) {
    case TxKind::RecordOp: return record_op(tx, snap, *author);
    case TxKind::PolicyOp: return policy_op(tx, snap, *author);
    case TxKind::IndividualAuth: return individual_auth(tx, snap);
  }
  return reject(Reason::InvalidPayload, "unknown kind");
}

}  // namespace ledgergate
