#pragma once

#include <cstddef>
#include <set>
#include <vector>

#include "ledgergate/model.hpp"

namespace ledgergate {

/// Pending transactions in arrival order, unique by (txId, stateTag).
class Mempool {
 public:
  bool contains(const TxKey& key) const { return keys_.count(key) != 0; }
  bool empty() const noexcept { return entries_.empty(); }
  std::size_t size() const noexcept { return entries_.size(); }
  const std::vector<Transaction>& entries() const noexcept { return entries_; }

  /// Returns false if the key is already present.
  bool add(Transaction tx);
  bool remove(const TxKey& key);
  /// Keeps only the entries for which `keep` returns true, preserving order.
  template <class Pred>
  void retain(Pred keep) {
    std::vector<Transaction> kept;
    for (auto& tx : entries_) {
      if (keep(tx)) {
        kept.push_back(std::move(tx));
      } else {
        keys_.erase(key_of(tx));
      }
    }
    entries_ = std::move(kept);
  }
  void clear();

 private:
  std::vector<Transaction> entries_;
  std::set<TxKey> keys_;
};

}  // namespace ledgergate
