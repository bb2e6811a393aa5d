#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "ledgergate/block.hpp"
#include "ledgergate/directory.hpp"
#include "ledgergate/encoding.hpp"

namespace ledgergate {

inline constexpr unsigned kMaxDifficulty = 32;
inline constexpr unsigned kDefaultDifficulty = 16;

/// Network-wide parameters fixed at chain creation.
struct GenesisConfig {
  SignatureScheme scheme = SignatureScheme::RsaSha256;
  unsigned difficulty = kDefaultDifficulty;
  Timestamp timestamp = 0;
  std::vector<Entity> entities;
};

/// Throws Error(ConfigInvalid).
GenesisConfig genesis_config_from_json(const Json& j);
Json to_json(const GenesisConfig& config);

/// Index 0, zero previous hash, empty data, minimal nonce at the configured
/// difficulty, empty digital signature. Deterministic in `config`.
Block make_genesis(const GenesisConfig& config);

/// Validated, immutable chain parameters shared by every chain of a network.
class ChainParams {
 public:
  /// Throws Error(ConfigInvalid) if there is no consortium member, a key does
  /// not match the configured scheme, or difficulty exceeds kMaxDifficulty.
  static std::shared_ptr<const ChainParams> create(GenesisConfig config);

  const GenesisConfig& config() const noexcept { return config_; }
  const Directory& directory() const noexcept { return *directory_; }
  const std::shared_ptr<const Directory>& shared_directory() const noexcept { return directory_; }
  unsigned difficulty() const noexcept { return config_.difficulty; }
  const Block& genesis() const noexcept { return genesis_; }

 private:
  ChainParams(GenesisConfig config, std::shared_ptr<const Directory> directory, Block genesis);

  GenesisConfig config_;
  std::shared_ptr<const Directory> directory_;
  Block genesis_;
};

/// SHA-256 over index | timestamp | previousHash | canonical(data) | nonce.
Digest compute_block_hash(const Block& block);

enum class BlockFault {
  None,
  BadGenesis,
  BadIndex,
  BadPreviousHash,
  HashMismatch,
  InsufficientWork,
  NotMember,
  UnknownAuthor,
  BadTxSignature,
  MisplacedTx,
  DuplicateTx,
  Unrepresentable,
};

std::string_view to_string(BlockFault fault) noexcept;

struct BlockVerdict {
  BlockFault fault = BlockFault::None;
  std::string detail;

  bool ok() const noexcept { return fault == BlockFault::None; }
  explicit operator bool() const noexcept { return ok(); }
};

/// Checks, in order: index and previousHash linkage, recomputed hash, proof
/// of work, miner signature by a consortium member, transaction authors and
/// signatures, bucket placement, and per-block (txId, stateTag) uniqueness.
/// The first failed check is reported.
BlockVerdict validate_block(const Block& block, const Block& prev, const Directory& directory,
                            unsigned difficulty);

struct ChainVerdict {
  bool valid = true;
  std::optional<std::uint64_t> first_bad_index;
  BlockFault fault = BlockFault::None;
  std::string detail;
};

/// Validates a full candidate block list against `params`: blocks[0] must
/// equal the genesis block and every later block must validate over its
/// predecessor, with (txId, stateTag) unique across the whole list.
ChainVerdict validate_chain(std::span<const Block> blocks, const ChainParams& params);

/// Lifecycle admission hook for mining. Returns an empty string when `data`
/// is admissible, or a reason otherwise.
using AdmissionCheck = std::function<std::string(const BlockData& data)>;

struct MiningContext {
  const Directory& directory;
  Timestamp timestamp = 0;
  AdmissionCheck admit;
  /// Polled during the nonce search; mining is abandoned once it reads true.
  const std::atomic<bool>* cancel = nullptr;
};

/// Builds and mines the successor of `prev`. The nonce search starts at 0
/// and increments by 1, so the nonce found is the minimal one. Throws
/// Error(InvalidTx) if a transaction fails its signature, placement or
/// admission check, and Error(NotMember) if `miner` is not a member key.
/// Returns nullopt only when cancelled.
std::optional<Block> mine_block(const Block& prev, BlockData data, const PrivateKey& miner,
                                unsigned difficulty, const MiningContext& context);

/// Signs and mines the successor of `prev` with no membership, signature or
/// admission checks. Returns nullopt only when cancelled.
std::optional<Block> seal_block(const Block& prev, BlockData data, const PrivateKey& key,
                                unsigned difficulty, Timestamp timestamp,
                                const std::atomic<bool>* cancel = nullptr);

/// Locally adopted chain. Single writer; readers copy what they need.
class Chain {
 public:
  explicit Chain(std::shared_ptr<const ChainParams> params);

  const ChainParams& params() const noexcept { return *params_; }
  const std::shared_ptr<const ChainParams>& shared_params() const noexcept { return params_; }
  const std::vector<Block>& blocks() const noexcept { return blocks_; }
  const Block& tip() const noexcept { return blocks_.back(); }
  std::uint64_t height() const noexcept { return blocks_.back().index; }
  std::size_t size() const noexcept { return blocks_.size(); }
  bool contains(const TxKey& key) const { return keys_.count(key) != 0; }

  /// Validates `block` over the tip (including chain-wide (txId, stateTag)
  /// uniqueness) and appends it when valid.
  BlockVerdict append(Block block);
  /// The validation append() performs, without appending.
  BlockVerdict check(const Block& block) const;
  /// Appends a block that already passed check().
  void extend(Block block);

  /// Replaces the block list with a candidate that already passed
  /// validate_chain.
  void replace(std::vector<Block> blocks);

 private:
  std::shared_ptr<const ChainParams> params_;
  std::vector<Block> blocks_;
  std::set<TxKey> keys_;
};

/// Append-only block file: each record is a 4-byte big-endian length followed
/// by the canonical block encoding.
class BlockStore {
 public:
  explicit BlockStore(std::filesystem::path file);

  const std::filesystem::path& path() const noexcept { return file_; }
  bool exists() const;

  /// Reads every record. Throws Error(CorruptStore) on a torn or unparsable
  /// record and Error(IoFailure) if the file cannot be read.
  std::vector<Block> load() const;
  /// Throws Error(IoFailure).
  void append(const Block& block);
  /// Atomically replaces the file contents (used after a reorg).
  void rewrite(std::span<const Block> blocks);

 private:
  std::filesystem::path file_;
};

/// Validates `block` over the chain tip, writes it, then appends it in memory.
/// Rejected blocks are never written: throws Error(InvalidTx) naming the fault.
void persist_append(Chain& chain, Block block, BlockStore& store);

/// Loads and validates a persisted chain; a missing file yields a new chain
/// holding only genesis, which is written out. Throws Error(CorruptStore) if
/// the store fails framing or validation.
Chain load_chain(std::shared_ptr<const ChainParams> params, BlockStore& store);

}  // namespace ledgergate
