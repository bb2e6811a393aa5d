#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "ledgergate/encoding.hpp"
#include "ledgergate/error.hpp"
#include "ledgergate/ledger.hpp"
#include "support/ref_sha256.hpp"
#include "support/workload.hpp"
#include "support/world.hpp"

using namespace ledgergate;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "ledgergate-unit";
  fs::create_directories(dir);
  const fs::path p = dir / name;
  fs::remove(p);
  return p;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::Malformed;
}

}  // namespace

TEST_CASE("required grants per rule") {
  CHECK(required_grants(AgreementRule::Any, 1) == 1);
  CHECK(required_grants(AgreementRule::Any, 5) == 1);
  CHECK(required_grants(AgreementRule::Majority, 1) == 1);
  CHECK(required_grants(AgreementRule::Majority, 2) == 2);
  CHECK(required_grants(AgreementRule::Majority, 3) == 2);
  CHECK(required_grants(AgreementRule::Majority, 4) == 3);
  CHECK(required_grants(AgreementRule::Majority, 5) == 3);
  CHECK(required_grants(AgreementRule::All, 4) == 4);
  for (std::size_t n = 1; n < 30; ++n) {
    CHECK(required_grants(AgreementRule::Any, n) <= required_grants(AgreementRule::Majority, n));
    CHECK(required_grants(AgreementRule::Majority, n) <= required_grants(AgreementRule::All, n));
    CHECK(2 * required_grants(AgreementRule::Majority, n) > n);
  }
}

TEST_CASE("kind and tag pairing") {
  CHECK(valid_for(TxKind::RecordOp, StateTag::Remove));
  CHECK_FALSE(valid_for(TxKind::RecordOp, StateTag::Request));
  CHECK(valid_for(TxKind::PolicyOp, StateTag::Require));
  CHECK(valid_for(TxKind::IndividualAuth, StateTag::AuthRevoke));
  CHECK_FALSE(valid_for(TxKind::IndividualAuth, StateTag::Create));
  CHECK(payload_matches(StateTag::Remove, RecordRef{RecordId("r")}));
  CHECK_FALSE(payload_matches(StateTag::Remove, RequestRef{RequestId("q")}));
}

TEST_CASE("transaction signatures are checked against the directory") {
  const auto w = lgtest::make_world(0);
  const Transaction tx = w.sign(record_create(TxId("c1"), EntityId("k1"), 1, lgtest::descriptor("r1", {})));
  CHECK(verify_transaction_signature(tx, w.dir()));
  Transaction forged = tx;
  forged.author = EntityId("k2");
  CHECK_FALSE(verify_transaction_signature(forged, w.dir()));
  Transaction edited = tx;
  std::get<RecordDescriptor>(edited.payload).location = "vault://elsewhere";
  CHECK_FALSE(verify_transaction_signature(edited, w.dir()));
  Transaction ghost = tx;
  ghost.author = EntityId("ghost");
  CHECK(code_of([&] { verify_transaction_signature(ghost, w.dir()); }) == ErrorCode::UnknownEntity);
}

TEST_CASE("genesis is deterministic and mined at the configured difficulty") {
  const auto w0 = lgtest::make_world(0);
  CHECK(w0.params->genesis().nonce == 0);
  CHECK(w0.params->genesis().index == 0);
  CHECK(w0.params->genesis().previous_hash == kZeroHash);
  CHECK(w0.params->genesis().digital_sign.empty());
  CHECK(make_genesis(w0.params->config()) == w0.params->genesis());
  const Block b = w0.mine_txs(w0.params->genesis(), {});
  CHECK(b.nonce == 0);

  const auto w8 = lgtest::make_world(8);
  CHECK(w8.params->genesis().hash.substr(0, 2) == "00");
  const Block b8 = w8.mine_txs(w8.params->genesis(), {});
  CHECK(b8.hash.substr(0, 2) == "00");
  CHECK(lgtest::ref_leading_zero_bits(b8.hash) >= 8);
  // The nonce is the smallest that meets the target.
  for (std::uint64_t n = 0; n < b8.nonce; ++n) {
    Block probe = b8;
    probe.nonce = n;
    REQUIRE(leading_zero_bits(compute_block_hash(probe)) < 8);
  }
}

TEST_CASE("genesis config JSON round trip and refusal") {
  const auto w = lgtest::make_world(6);
  const GenesisConfig again = genesis_config_from_json(to_json(w.params->config()));
  CHECK(make_genesis(again) == w.params->genesis());
  GenesisConfig no_members = again;
  std::erase_if(no_members.entities, [](const Entity& e) { return e.role == Role::ConsortiumNode; });
  CHECK(code_of([&] { ChainParams::create(no_members); }) == ErrorCode::ConfigInvalid);
  GenesisConfig too_hard = again;
  too_hard.difficulty = kMaxDifficulty + 1;
  CHECK(code_of([&] { ChainParams::create(too_hard); }) == ErrorCode::ConfigInvalid);
  CHECK(code_of([&] { genesis_config_from_json(Json{{"difficulty", "x"}}); }) == ErrorCode::ConfigInvalid);
}

TEST_CASE("a changed nonce at block 2 is the first bad index") {
  const auto w = lgtest::make_world(4);
  auto chain = lgtest::random_chain(w, 11, 5);
  REQUIRE(validate_chain(chain, *w.params).valid);
  chain[2].nonce += 1;
  const ChainVerdict v = validate_chain(chain, *w.params);
  CHECK_FALSE(v.valid);
  REQUIRE(v.first_bad_index.has_value());
  CHECK(*v.first_bad_index == 2);
  CHECK(v.fault == BlockFault::HashMismatch);
}

TEST_CASE("swapping blocks 3 and 4 is caught at 3") {
  const auto w = lgtest::make_world(4);
  auto chain = lgtest::random_chain(w, 12, 6);
  std::swap(chain[3], chain[4]);
  const ChainVerdict v = validate_chain(chain, *w.params);
  CHECK_FALSE(v.valid);
  CHECK(v.first_bad_index == std::optional<std::uint64_t>(3));
}

TEST_CASE("bad transaction signatures are refused by mining and validation") {
  const auto w = lgtest::make_world(4);
  Transaction tx = w.sign(record_create(TxId("c1"), EntityId("k1"), 1, lgtest::descriptor("r1", {})));
  tx.signature[0] ^= 0x01;
  BlockData data;
  data.add(tx);
  CHECK(code_of([&] { w.mine(w.params->genesis(), data); }) == ErrorCode::InvalidTx);

  const Block sealed = *seal_block(w.params->genesis(), data, w.key("m1"), 4, 1700000100);
  const BlockVerdict v = validate_block(sealed, w.params->genesis(), w.dir(), 4);
  CHECK(v.fault == BlockFault::BadTxSignature);
}

TEST_CASE("blocks signed by non-members are refused") {
  const auto w = lgtest::make_world(4);
  CHECK(code_of([&] { w.mine(w.params->genesis(), {}, "k1"); }) == ErrorCode::NotMember);
  const Block sealed = *seal_block(w.params->genesis(), {}, w.key("k1"), 4, 1700000100);
  CHECK(validate_block(sealed, w.params->genesis(), w.dir(), 4).fault == BlockFault::NotMember);
  const Block outsider = *seal_block(w.params->genesis(), {}, PrivateKey::derive("outsider"), 4, 1700000100);
  CHECK(validate_block(outsider, w.params->genesis(), w.dir(), 4).fault == BlockFault::NotMember);
}

TEST_CASE("validation faults for linkage, work and placement") {
  const auto w = lgtest::make_world(4);
  const Block& g = w.params->genesis();
  const Block good = w.mine_txs(g, {});
  CHECK(validate_block(good, g, w.dir(), 4).ok());

  Block idx = good;
  idx.index = 5;
  CHECK(validate_block(idx, g, w.dir(), 4).fault == BlockFault::BadIndex);
  Block link = good;
  link.previous_hash = std::string(64, 'f');
  CHECK(validate_block(link, g, w.dir(), 4).fault == BlockFault::BadPreviousHash);
  // Valid hash, too little work for a harder network.
  CHECK(validate_block(good, g, w.dir(), 30).fault == BlockFault::InsufficientWork);

  const Transaction vote = w.sign(keeper_vote(TxId("v1"), EntityId("k1"), 1, RequestId("q1"), true));
  BlockData misplaced;
  misplaced.records.push_back(vote);
  const Block bad = *seal_block(g, misplaced, w.key("m1"), 4, 1700000100);
  CHECK(validate_block(bad, g, w.dir(), 4).fault == BlockFault::MisplacedTx);

  const Transaction c = w.sign(record_create(TxId("c1"), EntityId("k1"), 1, lgtest::descriptor("r1", {})));
  BlockData twice;
  twice.add(c);
  twice.add(c);
  const Block dup = *seal_block(g, twice, w.key("m1"), 4, 1700000100);
  CHECK(validate_block(dup, g, w.dir(), 4).fault == BlockFault::DuplicateTx);

  std::vector<Block> wrong_genesis{good};
  CHECK(validate_chain(wrong_genesis, *w.params).fault == BlockFault::BadGenesis);
}

TEST_CASE("a (txId, stateTag) pair may appear once per chain") {
  const auto w = lgtest::make_world(4);
  Chain chain(w.params);
  const Transaction c = w.sign(record_create(TxId("c1"), EntityId("k1"), 1, lgtest::descriptor("r1", {})));
  CHECK(chain.append(w.mine_txs(chain.tip(), {c})).ok());
  CHECK(chain.contains(key_of(c)));
  const BlockVerdict again = chain.append(w.mine_txs(chain.tip(), {c}, "m2", 1700000200));
  CHECK(again.fault == BlockFault::DuplicateTx);
  CHECK(chain.height() == 1);
}

TEST_CASE("mining can be cancelled") {
  const auto w = lgtest::make_world(0);
  std::atomic<bool> cancel{true};
  CHECK_FALSE(seal_block(w.params->genesis(), {}, w.key("m1"), 32, 1, &cancel).has_value());
}

TEST_CASE("block store round trip, durability and corruption") {
  const auto w = lgtest::make_world(4);
  const fs::path file = temp_file("store.dat");
  BlockStore store(file);
  CHECK_FALSE(store.exists());
  Chain chain = load_chain(w.params, store);
  CHECK(chain.size() == 1);
  CHECK(store.exists());

  const auto blocks = lgtest::random_chain(w, 3, 4);
  for (std::size_t i = 1; i < blocks.size(); ++i) persist_append(chain, blocks[i], store);
  CHECK(store.load() == blocks);
  Chain reloaded = load_chain(w.params, store);
  CHECK(reloaded.blocks() == blocks);

  CHECK(code_of([&] { persist_append(chain, blocks[2], store); }) == ErrorCode::InvalidTx);
  CHECK(store.load().size() == blocks.size());

  // Drop the last few bytes: a torn final record.
  const auto size = fs::file_size(file);
  fs::resize_file(file, size - 5);
  CHECK(code_of([&] { store.load(); }) == ErrorCode::CorruptStore);
  CHECK(code_of([&] { load_chain(w.params, store); }) == ErrorCode::CorruptStore);

  // A well-framed store whose content no longer validates.
  std::vector<Block> tampered = blocks;
  tampered[2].timestamp += 1;
  store.rewrite(tampered);
  CHECK(code_of([&] { load_chain(w.params, store); }) == ErrorCode::CorruptStore);
}

TEST_CASE("store records are length-prefixed canonical blocks") {
  const auto w = lgtest::make_world(2);
  const fs::path file = temp_file("framing.dat");
  BlockStore store(file);
  store.append(w.params->genesis());
  std::ifstream in(file, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string body = canonical_encode(w.params->genesis());
  REQUIRE(bytes.size() == 4 + body.size());
  const std::uint32_t len = (std::uint32_t(std::uint8_t(bytes[0])) << 24) |
                            (std::uint32_t(std::uint8_t(bytes[1])) << 16) |
                            (std::uint32_t(std::uint8_t(bytes[2])) << 8) | std::uint8_t(bytes[3]);
  CHECK(len == body.size());
  CHECK(bytes.substr(4) == body);
}
