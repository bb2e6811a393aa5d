#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include "ledgergate/block.hpp"
#include "ledgergate/directory.hpp"
#include "ledgergate/lifecycle.hpp"

namespace ledgergate {

class Chain;

struct AuditEntry {
  std::uint64_t block_index = 0;
  Transaction tx;
  friend bool operator==(const AuditEntry&, const AuditEntry&) = default;
};

/// Open vote slot: the request waits for `keeper`.
struct PendingAction {
  RequestId request;
  RecordId record;
  EntityId party;
  PermissionLevel level = PermissionLevel::Read;
  EntityId keeper;
  Timestamp since = 0;
};

/// State derived by replaying transactions in chain order. A value type:
/// copies are independent and never change underneath a reader.
class Snapshot {
 public:
  explicit Snapshot(std::shared_ptr<const Directory> directory);

  const Directory& directory() const noexcept { return *directory_; }
  std::uint64_t at_index() const noexcept { return at_index_; }

  const std::map<RecordId, Record>& records() const noexcept { return records_; }
  const std::map<RequestId, RequestProgress>& requests() const noexcept { return requests_; }
  const Record* record(const RecordId& id) const;
  const RequestProgress* request(const RequestId& id) const;
  bool seen(const TxKey& key) const { return seen_.count(key) != 0; }

  /// The latest request made by `party` for `record`, viewed as a policy.
  std::optional<Policy> policy(const EntityId& party, const RecordId& record) const;
  std::vector<Policy> policies_for(const RecordId& record) const;
  const std::vector<AuditEntry>* audit(const RecordId& record) const;

  /// Applies `tx` if admissible; leaves the snapshot untouched otherwise.
  Admission apply(const Transaction& tx, std::uint64_t block_index);

  /// Applies every transaction of `block` in replay order and advances
  /// at_index. Throws Error(ReplayInconsistent) on an inadmissible
  /// transaction; the snapshot is then unspecified.
  void apply_block(const Block& block);

  friend bool operator==(const Snapshot& a, const Snapshot& b);

 private:
  void apply_unchecked(const Transaction& tx, std::uint64_t block_index);

  std::shared_ptr<const Directory> directory_;
  std::uint64_t at_index_ = 0;
  std::map<RecordId, Record> records_;
  std::map<RequestId, RequestProgress> requests_;
  std::map<std::pair<EntityId, RecordId>, RequestId> latest_;
  std::set<TxKey> seen_;
  std::map<RecordId, std::vector<AuditEntry>> audit_;
};

/// Replays blocks[0..up_to] (inclusive). Throws Error(ReplayInconsistent).
Snapshot replay(std::span<const Block> blocks, std::shared_ptr<const Directory> directory,
                std::uint64_t up_to);
Snapshot replay(const Chain& chain, std::uint64_t up_to);
Snapshot replay(const Chain& chain);

/// replay(chain, k+1) == fold(replay(chain, k), blocks[k+1]).
Snapshot fold(Snapshot snap, const Block& block);

enum class Outcome { Grant, Deny, Unknown };
std::string_view to_string(Outcome o) noexcept;

struct AccessDecision {
  Outcome outcome = Outcome::Unknown;
  std::string reason;
  std::optional<RequestId> policy_ref;
};

/// GRANT iff a live GRANTED policy covers `level` on an active record at
/// `now`; DENY for denied, revoked, expired or insufficient policies and for
/// removed records; UNKNOWN when no decided policy exists.
AccessDecision evaluate(const Snapshot& snap, const EntityId& party, const RecordId& record,
                        PermissionLevel level, Timestamp now);

/// Every transaction touching `record` or its requests, in chain order.
/// Throws Error(UnknownRecord).
std::vector<AuditEntry> audit_trail(const Snapshot& snap, const RecordId& record);

/// Open vote slots for `keeper`, ordered by request id.
std::vector<PendingAction> pending_for(const Snapshot& snap, const EntityId& keeper);

/// Checks that `data` folds cleanly on top of `snap` in replay order.
Admission admit_block_data(const Snapshot& snap, const BlockData& data);

}  // namespace ledgergate
