#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ledgergate/model.hpp"

namespace ledgergate {

/// Transactions carried by one block, bucketed by kind. Replay order inside a
/// block is records, then policies, then individual authorizations.
struct BlockData {
  std::vector<Transaction> records;
  std::vector<Transaction> policies;
  std::vector<Transaction> individual_auths;

  bool empty() const noexcept {
    return records.empty() && policies.empty() && individual_auths.empty();
  }
  std::size_t size() const noexcept {
    return records.size() + policies.size() + individual_auths.size();
  }
  /// Places `tx` in the bucket matching its kind.
  void add(Transaction tx);

  template <class F>
  void for_each(F&& f) const {
    for (const auto& tx : records) f(tx);
    for (const auto& tx : policies) f(tx);
    for (const auto& tx : individual_auths) f(tx);
  }

  friend bool operator==(const BlockData&, const BlockData&) = default;
};

inline constexpr char kZeroHash[] =
    "0000000000000000000000000000000000000000000000000000000000000000";

struct Block {
  std::uint64_t index = 0;
  Timestamp timestamp = 0;
  std::string previous_hash = kZeroHash;  // lowercase hex
  Bytes digital_sign;
  BlockData data;
  std::uint64_t nonce = 0;
  std::string hash;  // lowercase hex

  friend bool operator==(const Block&, const Block&) = default;
};

}  // namespace ledgergate
