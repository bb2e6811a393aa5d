#include "ledgergate/mempool.hpp"

#include <algorithm>

namespace ledgergate {

bool Mempool::add(Transaction tx) {
  if (!keys_.insert(key_of(tx)).second) return false;
  entries_.push_back(std::move(tx));
  return true;
}

bool Mempool::remove(const TxKey& key) {
  if (keys_.erase(key) == 0) return false;
  entries_.erase(std::find_if(entries_.begin(), entries_.end(),
                              [&](const Transaction& tx) { return key_of(tx) == key; }));
  return true;
}

void Mempool::clear() {
  entries_.clear();
  keys_.clear();
}

}  // namespace ledgergate
