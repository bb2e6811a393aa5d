#include "ledgergate/snapshot.hpp"

#include <algorithm>

#include "ledgergate/error.hpp"
#include "ledgergate/ledger.hpp"

namespace ledgergate {

namespace {

std::vector<EntityId> dedup(std::vector<EntityId> ids) {
  std::vector<EntityId> out;
  for (auto& id : ids) {
    if (std::find(out.begin(), out.end(), id) == out.end()) out.push_back(std::move(id));
  }
  return out;
}

}  // namespace

Snapshot::Snapshot(std::shared_ptr<const Directory> directory) : directory_(std::move(directory)) {}

const Record* Snapshot::record(const RecordId& id) const {
  auto it = records_.find(id);
  return it == records_.end() ? nullptr : &it->second;
}

const RequestProgress* Snapshot::request(const RequestId& id) const {
  auto it = requests_.find(id);
  return it == requests_.end() ? nullptr : &it->second;
}

namespace {

Policy as_policy(const RequestProgress& req) {
  return Policy{req.id, req.party, req.record, req.level, policy_status(req.state), req.expiry};
}

}  // namespace

std::optional<Policy> Snapshot::policy(const EntityId& party, const RecordId& record) const {
  auto it = latest_.find({party, record});
  if (it == latest_.end()) return std::nullopt;
  return as_policy(requests_.at(it->second));
}

std::vector<Policy> Snapshot::policies_for(const RecordId& record) const {
  std::vector<Policy> out;
  for (const auto& [id, req] : requests_) {
    if (req.record == record) out.push_back(as_policy(req));
  }
  return out;
}

const std::vector<AuditEntry>* Snapshot::audit(const RecordId& record) const {
  auto it = audit_.find(record);
  return it == audit_.end() ? nullptr : &it->second;
}

Admission Snapshot::apply(const Transaction& tx, std::uint64_t block_index) {
  Admission verdict = admissible(tx, *this);
  if (verdict) apply_unchecked(tx, block_index);
  return verdict;
}

void Snapshot::apply_unchecked(const Transaction& tx, std::uint64_t block_index) {
  seen_.insert(key_of(tx));
  RecordId touched;
  switch (tx.tag) {
    case StateTag::Create: {
      const auto& desc = std::get<RecordDescriptor>(tx.payload);
      std::vector<EntityId> keepers{tx.author};
      keepers.insert(keepers.end(), desc.keepers.begin(), desc.keepers.end());
      records_[desc.record] =
          Record{desc.record, dedup(std::move(keepers)), desc.agreement, desc.location,
                 RecordStatus::Active};
      touched = desc.record;
      break;
    }
    case StateTag::Update: {
      const auto& desc = std::get<RecordDescriptor>(tx.payload);
      Record& r = records_.at(desc.record);
      r.keepers = dedup(desc.keepers);
      r.agreement = desc.agreement;
      r.location = desc.location;
      touched = desc.record;
      break;
    }
    case StateTag::Remove: {
      const auto& ref = std::get<RecordRef>(tx.payload);
      records_.at(ref.record).status = RecordStatus::Removed;
      touched = ref.record;
      break;
    }
    case StateTag::Request: {
      const auto& req = std::get<AccessRequest>(tx.payload);
      RequestProgress progress;
      progress.id = req.request;
      progress.party = req.party;
      progress.record = req.record;
      progress.level = req.level;
      progress.expiry = req.expiry;
      progress.requested_at = tx.timestamp;
      requests_[req.request] = std::move(progress);
      latest_[{req.party, req.record}] = req.request;
      touched = req.record;
      break;
    }
    case StateTag::Require: {
      RequestProgress& req = requests_.at(std::get<RequestRef>(tx.payload).request);
      const Record& record = records_.at(req.record);
      req.state = RequestState::WaitingAuthCheck;
      req.keepers = record.keepers;
      req.agreement = record.agreement;
      req.required_at = tx.timestamp;
      touched = req.record;
      break;
    }
    case StateTag::AuthGrant:
    case StateTag::AuthDeny:
    case StateTag::AuthRevoke: {
      RequestProgress& req = requests_.at(std::get<RequestRef>(tx.payload).request);
      req.votes[tx.author] = tx.tag == StateTag::AuthGrant  ? Vote::Grant
                             : tx.tag == StateTag::AuthDeny ? Vote::Deny
                                                            : Vote::RevokedGrant;
      const Aggregate agg = aggregate_decision(req.agreement, req.keepers, req.votes);
      if (req.state == RequestState::WaitingAuthCheck) {
        if (agg == Aggregate::Granted) req.state = RequestState::Granted;
        if (agg == Aggregate::Denied) req.state = RequestState::Denied;
      } else if (req.state == RequestState::Granted && agg != Aggregate::Granted) {
        req.state = RequestState::Revoked;
      }
      touched = req.record;
      break;
    }
    case StateTag::RequireAction: break;
  }
  audit_[touched].push_back(AuditEntry{block_index, tx});
}

void Snapshot::apply_block(const Block& block) {
  auto step = [&](const Transaction& tx) {
    Admission verdict = apply(tx, block.index);
    if (!verdict) {
      throw Error(ErrorCode::ReplayInconsistent,
                  "block " + std::to_string(block.index) + " transaction " + tx.id.str() + ": " +
                      std::string(to_string(verdict.reason)) + " (" + verdict.detail + ")");
    }
  };
  block.data.for_each(step);
  at_index_ = block.index;
}

bool operator==(const Snapshot& a, const Snapshot& b) {
  return a.at_index_ == b.at_index_ && a.records_ == b.records_ && a.requests_ == b.requests_ &&
         a.latest_ == b.latest_ && a.seen_ == b.seen_ && a.audit_ == b.audit_;
}

Snapshot replay(std::span<const Block> blocks, std::shared_ptr<const Directory> directory,
                std::uint64_t up_to) {
  Snapshot snap(std::move(directory));
  for (const auto& block : blocks) {
    if (block.index > up_to) break;
    snap.apply_block(block);
  }
  return snap;
}

Snapshot replay(const Chain& chain, std::uint64_t up_to) {
  return replay(chain.blocks(), chain.params().shared_directory(), up_to);
}

Snapshot replay(const Chain& chain) { return replay(chain, chain.height()); }

Snapshot fold(Snapshot snap, const Block& block) {
  snap.apply_block(block);
  return snap;
}

std::string_view to_string(Outcome o) noexcept {
  switch (o) {
    case Outcome::Grant: return "GRANT";
    case Outcome::Deny: return "DENY";
    case Outcome::Unknown: return "UNKNOWN";
  }
  return "?";
}

AccessDecision evaluate(const Snapshot& snap, const EntityId& party, const RecordId& record,
                        PermissionLevel level, Timestamp now) {
  const Record* r = snap.record(record);
  if (r == nullptr) return {Outcome::Unknown, "UNKNOWN_RECORD", std::nullopt};
  if (r->status == RecordStatus::Removed) return {Outcome::Deny, "RECORD_REMOVED", std::nullopt};
  const auto policy = snap.policy(party, record);
  if (!policy) return {Outcome::Unknown, "NO_POLICY", std::nullopt};
  switch (policy->status) {
    case PolicyStatus::Pending: return {Outcome::Unknown, "PENDING", policy->request};
    case PolicyStatus::Denied: return {Outcome::Deny, "DENIED", policy->request};
    case PolicyStatus::Revoked: return {Outcome::Deny, "REVOKED", policy->request};
    case PolicyStatus::Granted: break;
  }
  if (policy->expiry && *policy->expiry <= now) {
    return {Outcome::Deny, "EXPIRED", policy->request};
  }
  if (level > policy->level) return {Outcome::Deny, "INSUFFICIENT_LEVEL", policy->request};
  return {Outcome::Grant, "GRANTED", policy->request};
}

std::vector<AuditEntry> audit_trail(const Snapshot& snap, const RecordId& record) {
  if (snap.record(record) == nullptr) {
    throw Error(ErrorCode::UnknownRecord, "record '" + record.str() + "'");
  }
  const auto* entries = snap.audit(record);
  return entries == nullptr ? std::vector<AuditEntry>{} : *entries;
}

std::vector<PendingAction> pending_for(const Snapshot& snap, const EntityId& keeper) {
  std::vector<PendingAction> out;
  for (const auto& [id, req] : snap.requests()) {
    if (req.state != RequestState::WaitingAuthCheck) continue;
    if (std::find(req.keepers.begin(), req.keepers.end(), keeper) == req.keepers.end()) continue;
    if (req.votes.count(keeper) != 0) continue;
    const Record* record = snap.record(req.record);
    if (record == nullptr || record->status == RecordStatus::Removed) continue;
    out.push_back(PendingAction{req.id, req.record, req.party, req.level, keeper,
                                req.required_at.value_or(req.requested_at)});
  }
  return out;
}

Admission admit_block_data(const Snapshot& snap, const BlockData& data) {
  Snapshot scratch = snap;
  Admission verdict;
  data.for_each([&](const Transaction& tx) {
    if (verdict) verdict = scratch.apply(tx, snap.at_index() + 1);
  });
  return verdict;
}

}  // namespace ledgergate
