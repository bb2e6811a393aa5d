#include "ledgergate/directory.hpp"

#include "ledgergate/encoding.hpp"
#include "ledgergate/error.hpp"

namespace ledgergate {

Directory::Directory(std::vector<Entity> entities) {
  for (auto& e : entities) add(std::move(e));
}

void Directory::add(Entity entity) {
  if (!entity.id.valid()) throw Error(ErrorCode::ConfigInvalid, "invalid entity id '" + entity.id.str() + "'");
  const EntityId id = entity.id;
  if (!entities_.emplace(id, std::move(entity)).second) {
    throw Error(ErrorCode::ConfigInvalid, "duplicate entity id '" + id.str() + "'");
  }
}

const Entity* Directory::find(const EntityId& id) const {
  auto it = entities_.find(id);
  return it == entities_.end() ? nullptr : &it->second;
}

bool Directory::is_member(const EntityId& id) const {
  const Entity* e = find(id);
  return e != nullptr && e->role == Role::ConsortiumNode;
}

std::vector<const Entity*> Directory::members() const {
  std::vector<const Entity*> out;
  for (const auto& [id, e] : entities_) {
    if (e.role == Role::ConsortiumNode) out.push_back(&e);
  }
  return out;
}

const Entity* Directory::member_with_key(const PublicKey& key) const {
  for (const auto& [id, e] : entities_) {
    if (e.role == Role::ConsortiumNode && e.key == key) return &e;
  }
  return nullptr;
}

bool verify_transaction_signature(const Transaction& tx, const Directory& directory) {
  const Entity* author = directory.find(tx.author);
  if (author == nullptr) {
    throw Error(ErrorCode::UnknownEntity, "author '" + tx.author.str() + "' is not registered");
  }
  std::string preimage;
  try {
    preimage = signing_preimage(tx);
  } catch (const Error&) {
    return false;
  }
  return author->key.verify(preimage, tx.signature);
}

}  // namespace ledgergate
