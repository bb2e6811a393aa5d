#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "ledgergate/ledger.hpp"
#include "ledgergate/mempool.hpp"
#include "ledgergate/snapshot.hpp"
#include "ledgergate/wire.hpp"

namespace ledgergate {

using PeerId = std::string;

struct Outgoing {
  PeerId to;
  WireMessage msg;
};
using Outbox = std::vector<Outgoing>;

enum class SubmitStatus { Accepted, Duplicate, BadSignature, Rejected };
std::string_view to_string(SubmitStatus s) noexcept;

struct SubmitResult {
  SubmitStatus status = SubmitStatus::Accepted;
  Admission admission;

  bool ok() const noexcept { return status == SubmitStatus::Accepted; }
};

/// Receives chain mutations before they are applied in memory. Throwing
/// aborts the mutation.
class ChainSink {
 public:
  virtual ~ChainSink() = default;
  virtual void appended(const Block& block) = 0;
  virtual void replaced(std::span<const Block> blocks) = 0;
};

struct NodeOptions {
  std::size_t max_block_txs = 256;
  /// Mine even when there is nothing to include.
  bool continuous = false;
};

struct MiningJob {
  Block prev;
  BlockData data;
  Timestamp timestamp = 0;
  unsigned difficulty = 0;
};

struct NodeStats {
  std::uint64_t blocks_mined = 0;
  std::uint64_t blocks_from_peers = 0;
  std::uint64_t chains_adopted = 0;
  std::uint64_t blocks_rejected = 0;
  std::uint64_t chains_rejected = 0;
  std::string last_rejection;
};

/// The peer protocol as a pure state machine: every input returns the
/// messages to send. Not thread-safe; the host serializes calls.
class Node {
 public:
  Node(std::string name, Chain chain, std::optional<PrivateKey> key, NodeOptions options = {});

  const std::string& name() const noexcept { return name_; }
  const Chain& chain() const noexcept { return chain_; }
  const ChainParams& params() const noexcept { return chain_.params(); }
  const Mempool& mempool() const noexcept { return mempool_; }
  const NodeStats& stats() const noexcept { return stats_; }
  const std::set<PeerId>& peers() const noexcept { return peers_; }
  const std::optional<PrivateKey>& key() const noexcept { return key_; }

  /// Snapshot at the tip of the adopted chain.
  std::shared_ptr<const Snapshot> snapshot() const noexcept { return tip_snap_; }
  /// Tip snapshot with the mempool applied in arrival order.
  const Snapshot& provisional() const noexcept { return provisional_; }

  /// True if the node holds a consortium member key.
  bool can_mine() const noexcept { return can_mine_; }
  /// Set when a peer's tip has our height but a different hash.
  bool fork_tie() const noexcept { return fork_tie_; }

  void set_sink(ChainSink* sink) noexcept { sink_ = sink; }

  Outbox connect(const PeerId& peer);
  void disconnect(const PeerId& peer);

  /// Verifies, checks admissibility against the provisional snapshot and
  /// queues `tx`; accepted transactions are gossiped to every peer except
  /// `from`.
  SubmitResult submit(const Transaction& tx, Outbox& out, const PeerId& from = {});

  Outbox receive(const PeerId& from, const WireMessage& msg);

  /// Work for the miner, or nullopt when there is nothing to mine. `force`
  /// yields a job even for an empty block.
  std::optional<MiningJob> mining_job(Timestamp now, bool force = false) const;

  /// Appends a freshly mined block if it still extends the tip and
  /// announces it. Stale or invalid blocks are dropped with an empty outbox.
  Outbox accept_mined(Block block);

 private:
  void on_block(const PeerId& from, const Block& block, Outbox& out);
  void on_chain(const PeerId& from, std::vector<Block> blocks, Outbox& out);
  bool append_block(Block block);
  void remember(std::shared_ptr<const Snapshot> snap);
  std::shared_ptr<const Snapshot> snapshot_at(std::uint64_t index) const;
  void rebuild_mempool(std::vector<Transaction> candidates);
  void broadcast(const WireMessage& msg, Outbox& out, const PeerId& except) const;
  void reject(std::string why, bool whole_chain);

  std::string name_;
  Chain chain_;
  std::optional<PrivateKey> key_;
  NodeOptions options_;
  bool can_mine_ = false;
  bool fork_tie_ = false;
  ChainSink* sink_ = nullptr;
  std::set<PeerId> peers_;
  Mempool mempool_;
  std::shared_ptr<const Snapshot> tip_snap_;
  Snapshot provisional_;
  std::map<std::uint64_t, std::shared_ptr<const Snapshot>> recent_;
  NodeStats stats_;
};

}  // namespace ledgergate
