#include "ledgergate/ledger.hpp"

#include <fstream>
#include <system_error>

#include <unistd.h>
#include <fcntl.h>

#include "ledgergate/error.hpp"

namespace ledgergate {

namespace {

std::string hash_prefix(const Block& block, const std::string& encoded_data) {
  std::string prefix;
  prefix.reserve(encoded_data.size() + 96);
  prefix += std::to_string(block.index);
  prefix += '|';
  prefix += std::to_string(block.timestamp);
  prefix += '|';
  prefix += block.previous_hash;
  prefix += '|';
  prefix += encoded_data;
  prefix += '|';
  return prefix;
}

// Nonce search from 0. Returns false if cancelled.
bool search_nonce(Block& block, const std::string& encoded_data, unsigned difficulty,
                  const std::atomic<bool>* cancel) {
  Sha256 base;
  base.update(hash_prefix(block, encoded_data));
  char buf[24];
  for (std::uint64_t nonce = 0;; ++nonce) {
    if (cancel != nullptr && (nonce & 0xfff) == 0 && cancel->load(std::memory_order_relaxed)) {
      return false;
    }
    const int n = std::snprintf(buf, sizeof buf, "%llu", static_cast<unsigned long long>(nonce));
    Sha256 h(base);
    const Digest d = h.update(std::string_view(buf, static_cast<std::size_t>(n))).finish();
    if (leading_zero_bits(d) >= difficulty) {
      block.nonce = nonce;
      block.hash = to_hex(d);
      return true;
    }
  }
}

BlockVerdict fail(BlockFault fault, std::string detail) { return {fault, std::move(detail)}; }

// Placement, authorship, signatures and in-block uniqueness.
BlockVerdict check_transactions(const BlockData& data, const Directory& directory) {
  std::set<TxKey> seen;
  BlockVerdict verdict;
  auto check_list = [&](const std::vector<Transaction>& list, TxKind kind, const char* bucket) {
    for (const auto& tx : list) {
      if (!verdict.ok()) return;
      if (tx.kind != kind) {
        verdict = fail(BlockFault::MisplacedTx,
                       "transaction " + tx.id.str() + " placed in " + bucket);
        return;
      }
      if (directory.find(tx.author) == nullptr) {
        verdict = fail(BlockFault::UnknownAuthor, "author " + tx.author.str() + " not registered");
        return;
      }
      if (!verify_transaction_signature(tx, directory)) {
        verdict = fail(BlockFault::BadTxSignature, "bad signature on transaction " + tx.id.str());
        return;
      }
      if (!seen.insert(key_of(tx)).second) {
        verdict = fail(BlockFault::DuplicateTx, "duplicate (txId, stateTag) " + tx.id.str() + "/" +
                                                    std::string(to_string(tx.tag)));
        return;
      }
    }
  };
  check_list(data.records, TxKind::RecordOp, "records");
  check_list(data.policies, TxKind::PolicyOp, "policies");
  check_list(data.individual_auths, TxKind::IndividualAuth, "individualAuths");
  return verdict;
}

bool signed_by_member(const Block& block, const std::string& encoded_data,
                      const Directory& directory) {
  for (const Entity* member : directory.members()) {
    if (member->key.verify(encoded_data, block.digital_sign)) return true;
  }
  return false;
}

}  // namespace

std::string_view to_string(BlockFault fault) noexcept {
  switch (fault) {
    case BlockFault::None: return "OK";
    case BlockFault::BadGenesis: return "BAD_GENESIS";
    case BlockFault::BadIndex: return "BAD_INDEX";
    case BlockFault::BadPreviousHash: return "BAD_PREVIOUS_HASH";
    case BlockFault::HashMismatch: return "HASH_MISMATCH";
    case BlockFault::InsufficientWork: return "INSUFFICIENT_WORK";
    case BlockFault::NotMember: return "NOT_MEMBER";
    case BlockFault::UnknownAuthor: return "UNKNOWN_AUTHOR";
    case BlockFault::BadTxSignature: return "BAD_TX_SIGNATURE";
    case BlockFault::MisplacedTx: return "MISPLACED_TX";
    case BlockFault::DuplicateTx: return "DUPLICATE_TX";
    case BlockFault::Unrepresentable: return "UNREPRESENTABLE";
  }
  return "?";
}

GenesisConfig genesis_config_from_json(const Json& j) {
  try {
    GenesisConfig config;
    const auto scheme = parse_signature_scheme(j.at("scheme").get<std::string>());
    if (!scheme) throw Error(ErrorCode::ConfigInvalid, "unknown signature scheme");
    config.scheme = *scheme;
    config.difficulty = j.value("difficulty", kDefaultDifficulty);
    config.timestamp = j.value("timestamp", Timestamp{0});
    for (const auto& e : j.at("entities")) {
      const auto role = parse_role(e.at("role").get<std::string>());
      if (!role) throw Error(ErrorCode::ConfigInvalid, "unknown role");
      config.entities.push_back(Entity{EntityId(e.at("id").get<std::string>()), *role,
                                       PublicKey::from_pem(e.at("publicKey").get<std::string>())});
    }
    return config;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, std::string("genesis config: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigInvalid) throw;
    throw Error(ErrorCode::ConfigInvalid, std::string("genesis config: ") + e.what());
  }
}

Json to_json(const GenesisConfig& config) {
  Json entities = Json::array();
  for (const auto& e : config.entities) {
    entities.push_back(
        Json{{"id", e.id.str()}, {"role", to_string(e.role)}, {"publicKey", e.key.pem()}});
  }
  return Json{{"scheme", to_string(config.scheme)},
              {"difficulty", config.difficulty},
              {"timestamp", config.timestamp},
              {"entities", entities}};
}

Block make_genesis(const GenesisConfig& config) {
  Block genesis;
  genesis.index = 0;
  genesis.timestamp = config.timestamp;
  genesis.previous_hash = kZeroHash;
  search_nonce(genesis, canonical_encode(genesis.data), config.difficulty, nullptr);
  return genesis;
}

ChainParams::ChainParams(GenesisConfig config, std::shared_ptr<const Directory> directory,
                         Block genesis)
    : config_(std::move(config)), directory_(std::move(directory)), genesis_(std::move(genesis)) {}

std::shared_ptr<const ChainParams> ChainParams::create(GenesisConfig config) {
  if (config.difficulty > kMaxDifficulty) {
    throw Error(ErrorCode::ConfigInvalid, "difficulty above " + std::to_string(kMaxDifficulty));
  }
  if (config.timestamp < 0) throw Error(ErrorCode::ConfigInvalid, "negative genesis timestamp");
  for (const auto& e : config.entities) {
    if (e.key.scheme() != config.scheme) {
      throw Error(ErrorCode::ConfigInvalid,
                  "key of entity '" + e.id.str() + "' does not use the network signature scheme");
    }
  }
  auto directory = std::make_shared<const Directory>(config.entities);
  if (directory->members().empty()) {
    throw Error(ErrorCode::ConfigInvalid, "genesis lists no consortium member");
  }
  Block genesis = make_genesis(config);
  return std::shared_ptr<const ChainParams>(
      new ChainParams(std::move(config), std::move(directory), std::move(genesis)));
}

Digest compute_block_hash(const Block& block) {
  Sha256 h;
  h.update(hash_prefix(block, canonical_encode(block.data)));
  h.update(std::to_string(block.nonce));
  return h.finish();
}

BlockVerdict validate_block(const Block& block, const Block& prev, const Directory& directory,
                            unsigned difficulty) {
  if (block.index != prev.index + 1) {
    return fail(BlockFault::BadIndex, "expected index " + std::to_string(prev.index + 1) +
                                          ", found " + std::to_string(block.index));
  }
  if (block.previous_hash != prev.hash) {
    return fail(BlockFault::BadPreviousHash, "previousHash does not match predecessor");
  }
  std::string encoded;
  try {
    encoded = canonical_encode(block.data);
    if (block.timestamp < 0) throw Error(ErrorCode::EncodeUnrepresentable, "negative timestamp");
  } catch (const Error& e) {
    return fail(BlockFault::Unrepresentable, e.what());
  }
  Sha256 h;
  h.update(hash_prefix(block, encoded));
  const Digest digest = h.update(std::to_string(block.nonce)).finish();
  if (to_hex(digest) != block.hash) {
    return fail(BlockFault::HashMismatch, "recomputed hash differs from stored hash");
  }
  if (leading_zero_bits(digest) < difficulty) {
    return fail(BlockFault::InsufficientWork,
                "hash has fewer than " + std::to_string(difficulty) + " leading zero bits");
  }
  if (!signed_by_member(block, encoded, directory)) {
    return fail(BlockFault::NotMember, "digitalSign does not verify under any member key");
  }
  return check_transactions(block.data, directory);
}

ChainVerdict validate_chain(std::span<const Block> blocks, const ChainParams& params) {
  auto bad = [](std::uint64_t index, BlockFault fault, std::string detail) {
    return ChainVerdict{false, index, fault, std::move(detail)};
  };
  if (blocks.empty() || blocks.front() != params.genesis()) {
    return bad(0, BlockFault::BadGenesis, "first block is not the configured genesis");
  }
  std::set<TxKey> keys;
  for (std::size_t i = 1; i < blocks.size(); ++i) {
    BlockVerdict v =
        validate_block(blocks[i], blocks[i - 1], params.directory(), params.difficulty());
    if (!v) return bad(i, v.fault, std::move(v.detail));
    bool duplicate = false;
    blocks[i].data.for_each([&](const Transaction& tx) {
      if (!keys.insert(key_of(tx)).second) duplicate = true;
    });
    if (duplicate) {
      return bad(i, BlockFault::DuplicateTx, "(txId, stateTag) already present earlier in chain");
    }
  }
  return {};
}

std::optional<Block> mine_block(const Block& prev, BlockData data, const PrivateKey& miner,
                                unsigned difficulty, const MiningContext& context) {
  if (context.directory.member_with_key(miner.public_key()) == nullptr) {
    throw Error(ErrorCode::NotMember, "mining key is not a consortium member key");
  }
  BlockVerdict txs = check_transactions(data, context.directory);
  if (!txs) throw Error(ErrorCode::InvalidTx, std::string(to_string(txs.fault)) + ": " + txs.detail);
  if (context.admit) {
    const std::string reason = context.admit(data);
    if (!reason.empty()) throw Error(ErrorCode::InvalidTx, reason);
  }
  return seal_block(prev, std::move(data), miner, difficulty, context.timestamp, context.cancel);
}

std::optional<Block> seal_block(const Block& prev, BlockData data, const PrivateKey& key,
                                unsigned difficulty, Timestamp timestamp,
                                const std::atomic<bool>* cancel) {
  Block block;
  block.index = prev.index + 1;
  block.timestamp = timestamp;
  block.previous_hash = prev.hash;
  block.data = std::move(data);
  const std::string encoded = canonical_encode(block.data);
  block.digital_sign = key.sign(encoded);
  if (!search_nonce(block, encoded, difficulty, cancel)) return std::nullopt;
  return block;
}

Chain::Chain(std::shared_ptr<const ChainParams> params) : params_(std::move(params)) {
  blocks_.push_back(params_->genesis());
}

BlockVerdict Chain::check(const Block& block) const {
  BlockVerdict v = validate_block(block, tip(), params_->directory(), params_->difficulty());
  if (!v) return v;
  bool duplicate = false;
  block.data.for_each([&](const Transaction& tx) { duplicate = duplicate || contains(key_of(tx)); });
  if (duplicate) return fail(BlockFault::DuplicateTx, "(txId, stateTag) already in chain");
  return {};
}

BlockVerdict Chain::append(Block block) {
  BlockVerdict v = check(block);
  if (v) extend(std::move(block));
  return v;
}

void Chain::extend(Block block) {
  block.data.for_each([&](const Transaction& tx) { keys_.insert(key_of(tx)); });
  blocks_.push_back(std::move(block));
}

void Chain::replace(std::vector<Block> blocks) {
  blocks_ = std::move(blocks);
  keys_.clear();
  for (const auto& b : blocks_) {
    b.data.for_each([&](const Transaction& tx) { keys_.insert(key_of(tx)); });
  }
}

BlockStore::BlockStore(std::filesystem::path file) : file_(std::move(file)) {}

bool BlockStore::exists() const { return std::filesystem::exists(file_); }

std::vector<Block> BlockStore::load() const {
  std::ifstream in(file_, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open block store " + file_.string());
  std::vector<Block> blocks;
  std::uint64_t offset = 0;
  for (;;) {
    unsigned char len_bytes[4];
    in.read(reinterpret_cast<char*>(len_bytes), 4);
    const auto got = in.gcount();
    if (got == 0 && in.eof()) break;
    if (got != 4) {
      throw Error(ErrorCode::CorruptStore, "torn length prefix at offset " + std::to_string(offset));
    }
    const std::uint32_t len = (std::uint32_t{len_bytes[0]} << 24) |
                              (std::uint32_t{len_bytes[1]} << 16) |
                              (std::uint32_t{len_bytes[2]} << 8) | std::uint32_t{len_bytes[3]};
    std::string body(len, '\0');
    in.read(body.data(), len);
    if (static_cast<std::uint32_t>(in.gcount()) != len) {
      throw Error(ErrorCode::CorruptStore, "torn block record at offset " + std::to_string(offset));
    }
    try {
      blocks.push_back(block_from_json(Json::parse(body)));
    } catch (const std::exception& e) {
      throw Error(ErrorCode::CorruptStore,
                  "unparsable block record at offset " + std::to_string(offset) + ": " + e.what());
    }
    offset += 4 + len;
  }
  return blocks;
}

namespace {

std::string frame(const Block& block) {
  const std::string body = canonical_encode(block);
  const auto len = static_cast<std::uint32_t>(body.size());
  std::string out;
  out.reserve(body.size() + 4);
  out.push_back(static_cast<char>((len >> 24) & 0xff));
  out.push_back(static_cast<char>((len >> 16) & 0xff));
  out.push_back(static_cast<char>((len >> 8) & 0xff));
  out.push_back(static_cast<char>(len & 0xff));
  out += body;
  return out;
}

// One write(2) per record so a killed process never leaves half a frame
// behind unless the disk itself fails mid-write.
void write_all(int fd, const std::string& bytes, const std::filesystem::path& path) {
  std::size_t done = 0;
  while (done < bytes.size()) {
    const ssize_t n = ::write(fd, bytes.data() + done, bytes.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::IoFailure, "write failed on " + path.string());
    }
    done += static_cast<std::size_t>(n);
  }
}

}  // namespace

void BlockStore::append(const Block& block) {
  const std::string bytes = frame(block);
  const int fd = ::open(file_.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  if (fd < 0) throw Error(ErrorCode::IoFailure, "cannot open " + file_.string() + " for append");
  try {
    write_all(fd, bytes, file_);
  } catch (...) {
    ::close(fd);
    throw;
  }
  ::fsync(fd);
  ::close(fd);
}

void BlockStore::rewrite(std::span<const Block> blocks) {
  std::string bytes;
  for (const auto& b : blocks) bytes += frame(b);
  const auto tmp = std::filesystem::path(file_.string() + ".tmp");
  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  if (fd < 0) throw Error(ErrorCode::IoFailure, "cannot open " + tmp.string());
  try {
    write_all(fd, bytes, tmp);
  } catch (...) {
    ::close(fd);
    throw;
  }
  ::fsync(fd);
  ::close(fd);
  std::error_code ec;
  std::filesystem::rename(tmp, file_, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot replace " + file_.string() + ": " + ec.message());
}

void persist_append(Chain& chain, Block block, BlockStore& store) {
  BlockVerdict v = validate_block(block, chain.tip(), chain.params().directory(),
                                  chain.params().difficulty());
  bool duplicate = false;
  block.data.for_each(
      [&](const Transaction& tx) { duplicate = duplicate || chain.contains(key_of(tx)); });
  if (v.ok() && duplicate) v = fail(BlockFault::DuplicateTx, "(txId, stateTag) already in chain");
  if (!v) throw Error(ErrorCode::InvalidTx, std::string(to_string(v.fault)) + ": " + v.detail);
  store.append(block);
  chain.append(std::move(block));
}

Chain load_chain(std::shared_ptr<const ChainParams> params, BlockStore& store) {
  Chain chain(params);
  if (!store.exists()) {
    store.append(chain.tip());
    return chain;
  }
  std::vector<Block> blocks = store.load();
  ChainVerdict v = validate_chain(blocks, *params);
  if (!v.valid) {
    throw Error(ErrorCode::CorruptStore, "stored chain invalid at index " +
                                             std::to_string(v.first_bad_index.value_or(0)) + " (" +
                                             std::string(to_string(v.fault)) + ")");
  }
  chain.replace(std::move(blocks));
  return chain;
}

}  // namespace ledgergate
