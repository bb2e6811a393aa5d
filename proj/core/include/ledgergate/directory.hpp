#pragma once

#include <map>
#include <vector>

#include "ledgergate/model.hpp"

namespace ledgergate {

/// Registry of known entities and their verification keys. Consortium
/// members are the entities with role CONSORTIUM_NODE.
class Directory {
 public:
  Directory() = default;
  explicit Directory(std::vector<Entity> entities);

  /// Throws Error(ConfigInvalid) on duplicate or invalid ids.
  void add(Entity entity);

  const Entity* find(const EntityId& id) const;
  bool is_member(const EntityId& id) const;
  std::vector<const Entity*> members() const;
  /// The member whose key equals `key`, if any.
  const Entity* member_with_key(const PublicKey& key) const;
  const std::map<EntityId, Entity>& entities() const noexcept { return entities_; }

 private:
  std::map<EntityId, Entity> entities_;
};

/// True iff `tx.signature` verifies over its signing preimage under the
/// author's registered key. Throws Error(UnknownEntity) if the author is not
/// registered.
bool verify_transaction_signature(const Transaction& tx, const Directory& directory);

}  // namespace ledgergate
