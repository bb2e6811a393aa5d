#include "ledgergate/node.hpp"

#include "ledgergate/error.hpp"

namespace ledgergate {

namespace {

constexpr std::size_t kRecentSnapshots = 32;

std::optional<Snapshot> fold_data(const Snapshot& base, const BlockData& data) {
  Snapshot scratch = base;
  bool ok = true;
  data.for_each([&](const Transaction& tx) {
    if (ok) ok = scratch.apply(tx, base.at_index() + 1).ok();
  });
  if (!ok) return std::nullopt;
  return scratch;
}

}  // namespace

std::string_view to_string(SubmitStatus s) noexcept {
  switch (s) {
    case SubmitStatus::Accepted: return "ACCEPTED";
    case SubmitStatus::Duplicate: return "DUPLICATE";
    case SubmitStatus::BadSignature: return "BAD_SIGNATURE";
    case SubmitStatus::Rejected: return "REJECTED";
  }
  return "?";
}

Node::Node(std::string name, Chain chain, std::optional<PrivateKey> key, NodeOptions options)
    : name_(std::move(name)),
      chain_(std::move(chain)),
      key_(std::move(key)),
      options_(options),
      tip_snap_(std::make_shared<const Snapshot>(replay(chain_))),
      provisional_(*tip_snap_) {
  can_mine_ = key_ && chain_.params().directory().member_with_key(key_->public_key()) != nullptr;
  remember(tip_snap_);
}

Outbox Node::connect(const PeerId& peer) {
  peers_.insert(peer);
  return {{peer, WireMessage::hello(name_, chain_.height())}, {peer, WireMessage::get_latest()}};
}

void Node::disconnect(const PeerId& peer) { peers_.erase(peer); }

SubmitResult Node::submit(const Transaction& tx, Outbox& out, const PeerId& from) {
  const TxKey key = key_of(tx);
  if (mempool_.contains(key) || chain_.contains(key)) {
    return {SubmitStatus::Duplicate, {Reason::DuplicateTx, "(txId, stateTag) already known"}};
  }
  try {
    if (!verify_transaction_signature(tx, params().directory())) {
      return {SubmitStatus::BadSignature, {Reason::Ok, "signature does not verify"}};
    }
  } catch (const Error& e) {
    return {SubmitStatus::Rejected, {Reason::UnknownEntity, e.what()}};
  }
  Admission verdict = provisional_.apply(tx, chain_.height() + 1);
  if (!verdict) return {SubmitStatus::Rejected, std::move(verdict)};
  mempool_.add(tx);
  broadcast(WireMessage::submit(tx), out, from);
  return {};
}

Outbox Node::receive(const PeerId& from, const WireMessage& msg) {
  Outbox out;
  switch (msg.kind) {
    case MessageKind::Hello: break;
    case MessageKind::GetLatest: out.push_back({from, WireMessage::latest(chain_.tip())}); break;
    case MessageKind::GetChain: out.push_back({from, WireMessage::chain(chain_.blocks())}); break;
    case MessageKind::Latest:
    case MessageKind::AnnounceBlock:
      if (!msg.blocks.empty()) on_block(from, msg.block(), out);
      break;
    case MessageKind::Chain: on_chain(from, msg.blocks, out); break;
    case MessageKind::SubmitTx:
      if (msg.tx) submit(*msg.tx, out, from);
      break;
  }
  return out;
}

std::optional<MiningJob> Node::mining_job(Timestamp now, bool force) const {
  if (!can_mine_) return std::nullopt;
  // Candidates are taken in arrival order, but a block replays records,
  // then policies, then individual authorizations, so each addition is
  // checked against the bucket-ordered fold.
  const Snapshot& base = *tip_snap_;
  BlockData data;
  Snapshot folded = base;
  for (const auto& tx : mempool_.entries()) {
    if (data.size() >= options_.max_block_txs) break;
    if (tx.kind == TxKind::IndividualAuth) {
      if (folded.apply(tx, base.at_index() + 1)) data.add(tx);
      continue;
    }
    BlockData trial = data;
    trial.add(tx);
    if (auto next = fold_data(base, trial)) {
      data = std::move(trial);
      folded = std::move(*next);
    }
  }
  if (data.empty() && !force && !fork_tie_ && !options_.continuous) return std::nullopt;
  return MiningJob{chain_.tip(), std::move(data), now, params().difficulty()};
}

Outbox Node::accept_mined(Block block) {
  Outbox out;
  const Block& tip = chain_.tip();
  if (block.index != tip.index + 1 || block.previous_hash != tip.hash) return out;
  const Block announced = block;
  if (!append_block(std::move(block))) return out;
  ++stats_.blocks_mined;
  broadcast(WireMessage::announce(announced), out, {});
  return out;
}

void Node::on_block(const PeerId& from, const Block& block, Outbox& out) {
  const Block& tip = chain_.tip();
  if (block.index <= tip.index) {
    if (block.index == tip.index && block.hash != tip.hash) fork_tie_ = true;
    return;
  }
  if (block.index == tip.index + 1 && block.previous_hash == tip.hash) {
    if (append_block(block)) {
      ++stats_.blocks_from_peers;
      broadcast(WireMessage::announce(block), out, from);
    }
    return;
  }
  out.push_back({from, WireMessage::get_chain()});
}

void Node::on_chain(const PeerId& from, std::vector<Block> blocks, Outbox& out) {
  if (blocks.size() <= chain_.size()) {
    if (blocks.size() == chain_.size() && blocks.back().hash != chain_.tip().hash) fork_tie_ = true;
    return;
  }
  const ChainVerdict verdict = validate_chain(blocks, params());
  if (!verdict.valid) {
    reject("chain from " + from + " invalid at block " +
               std::to_string(verdict.first_bad_index.value_or(0)) + ": " +
               std::string(to_string(verdict.fault)),
           true);
    return;
  }
  std::uint64_t fork = 0;
  const auto& ours = chain_.blocks();
  while (fork + 1 < ours.size() && fork + 1 < blocks.size() &&
         ours[fork + 1].hash == blocks[fork + 1].hash) {
    ++fork;
  }

  Snapshot snap = *snapshot_at(fork);
  std::vector<std::shared_ptr<const Snapshot>> fresh;
  try {
    for (std::size_t i = fork + 1; i < blocks.size(); ++i) {
      snap.apply_block(blocks[i]);
      if (blocks.size() - i <= kRecentSnapshots) fresh.push_back(std::make_shared<const Snapshot>(snap));
    }
  } catch (const Error& e) {
    reject("chain from " + from + " does not replay: " + e.what(), true);
    return;
  }

  std::vector<Transaction> candidates;
  for (std::size_t i = fork + 1; i < ours.size(); ++i) {
    ours[i].data.for_each([&](const Transaction& tx) { candidates.push_back(tx); });
  }
  candidates.insert(candidates.end(), mempool_.entries().begin(), mempool_.entries().end());

  if (sink_ != nullptr) sink_->replaced(blocks);
  chain_.replace(std::move(blocks));
  recent_.erase(recent_.upper_bound(fork), recent_.end());
  tip_snap_ = fresh.back();
  for (auto& s : fresh) remember(std::move(s));
  rebuild_mempool(std::move(candidates));
  fork_tie_ = false;
  ++stats_.chains_adopted;
  broadcast(WireMessage::announce(chain_.tip()), out, from);
}

bool Node::append_block(Block block) {
  const BlockVerdict verdict = chain_.check(block);
  if (!verdict) {
    reject("block " + std::to_string(block.index) + ": " + std::string(to_string(verdict.fault)) +
               " " + verdict.detail,
           false);
    return false;
  }
  auto snap = std::make_shared<Snapshot>(*tip_snap_);
  try {
    snap->apply_block(block);
  } catch (const Error& e) {
    reject("block " + std::to_string(block.index) + ": " + e.what(), false);
    return false;
  }
  if (sink_ != nullptr) sink_->appended(block);
  chain_.extend(std::move(block));
  tip_snap_ = snap;
  remember(tip_snap_);
  std::vector<Transaction> pending = mempool_.entries();
  rebuild_mempool(std::move(pending));
  fork_tie_ = false;
  return true;
}

void Node::remember(std::shared_ptr<const Snapshot> snap) {
  recent_[snap->at_index()] = std::move(snap);
  while (recent_.size() > kRecentSnapshots) recent_.erase(recent_.begin());
}

std::shared_ptr<const Snapshot> Node::snapshot_at(std::uint64_t index) const {
  if (auto it = recent_.find(index); it != recent_.end()) return it->second;
  return std::make_shared<const Snapshot>(
      replay(chain_.blocks(), params().shared_directory(), index));
}

void Node::rebuild_mempool(std::vector<Transaction> candidates) {
  mempool_.clear();
  provisional_ = *tip_snap_;
  for (auto& tx : candidates) {
    const TxKey key = key_of(tx);
    if (chain_.contains(key) || mempool_.contains(key)) continue;
    if (provisional_.apply(tx, chain_.height() + 1)) mempool_.add(std::move(tx));
  }
}

void Node::broadcast(const WireMessage& msg, Outbox& out, const PeerId& except) const {
  for (const auto& peer : peers_) {
    if (peer != except) out.push_back({peer, msg});
  }
}

void Node::reject(std::string why, bool whole_chain) {
  ++(whole_chain ? stats_.chains_rejected : stats_.blocks_rejected);
  stats_.last_rejection = std::move(why);
}

}  // namespace ledgergate
