#include "doctest.h"
#include "ledgergate/encoding.hpp"
#include "ledgergate/error.hpp"
#include "ledgergate/ledger.hpp"
#include "support/ref_sha256.hpp"
#include "support/world.hpp"

using namespace ledgergate;

namespace {

Transaction fixture_tx() {
  RecordDescriptor d{RecordId("r1"), {EntityId("k2"), EntityId("k3")}, AgreementRule::Majority, "vault://a"};
  Transaction tx = record_create(TxId("tx1"), EntityId("k1"), 1700000100, d);
  tx.signature = {0xab, 0x01};
  return tx;
}

// Written by hand from the encoding rules: sorted keys, no whitespace.
const char* const kFixtureTx =
    R"({"author":"k1","kind":"RECORD_OP","payload":{"agreement":"MAJORITY","keepers":["k2","k3"],)"
    R"("location":"vault://a","record":"r1"},"signature":"ab01","stateTag":"CREATE",)"
    R"("timestamp":1700000100,"txId":"tx1"})";

const char* const kFixturePreimage =
    R"({"author":"k1","kind":"RECORD_OP","payload":{"agreement":"MAJORITY","keepers":["k2","k3"],)"
    R"("location":"vault://a","record":"r1"},"stateTag":"CREATE","timestamp":1700000100,"txId":"tx1"})";

}  // namespace

TEST_CASE("transaction encoding equals the hand-written fixture") {
  CHECK(canonical_encode(fixture_tx()) == kFixtureTx);
  CHECK(signing_preimage(fixture_tx()) == kFixturePreimage);
}

TEST_CASE("block data and block hash preimage fixtures") {
  BlockData data;
  data.add(fixture_tx());
  CHECK(canonical_encode(data) == std::string(R"({"individualAuths":[],"policies":[],"records":[)") +
                                      kFixtureTx + "]}");

  Block b;
  b.index = 1;
  b.timestamp = 1700000100;
  b.previous_hash = std::string(64, 'a');
  b.data = data;
  b.nonce = 42;
  const std::string preimage = "1|1700000100|" + std::string(64, 'a') + "|" + canonical_encode(data) + "|42";
  CHECK(to_hex(compute_block_hash(b)) == lgtest::ref_sha256_hex(preimage));
}

TEST_CASE("request and vote payload fixtures") {
  AccessRequest a{RequestId("q1"), EntityId("t1"), RecordId("r1"), PermissionLevel::Write, 1700009999};
  Transaction req = access_request(TxId("tx2"), 5, a);
  CHECK(signing_preimage(req) ==
        R"({"author":"t1","kind":"POLICY_OP","payload":{"expiry":1700009999,"level":"WRITE","party":"t1",)"
        R"("record":"r1","requestId":"q1"},"stateTag":"REQUEST","timestamp":5,"txId":"tx2"})");
  Transaction vote = keeper_vote(TxId("tx3"), EntityId("k1"), 6, RequestId("q1"), false);
  CHECK(signing_preimage(vote) ==
        R"({"author":"k1","kind":"INDIVIDUAL_AUTH","payload":{"requestId":"q1"},"stateTag":"AUTH_DENY",)"
        R"("timestamp":6,"txId":"tx3"})");
}

TEST_CASE("encoding is deterministic and separates differing fields") {
  const Transaction a = fixture_tx();
  CHECK(canonical_encode(a) == canonical_encode(a));
  Transaction b = a;
  b.id = TxId("tx2");
  CHECK(canonical_encode(a) != canonical_encode(b));
  Transaction c = a;
  c.timestamp += 1;
  CHECK(signing_preimage(a) != signing_preimage(c));
  Transaction d = a;
  d.signature = {0x00};
  CHECK(signing_preimage(a) == signing_preimage(d));
}

TEST_CASE("strings keep UTF-8 and escape control characters") {
  Transaction tx = fixture_tx();
  std::get<RecordDescriptor>(tx.payload).location = "caf\xc3\xa9\n";
  CHECK(canonical_encode(tx).find("\"location\":\"caf\xc3\xa9\\n\"") != std::string::npos);
}

TEST_CASE("unrepresentable values are refused") {
  auto code_of = [](const Transaction& tx) {
    try {
      canonical_encode(tx);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Malformed;
  };
  Transaction bad_utf8 = fixture_tx();
  std::get<RecordDescriptor>(bad_utf8.payload).location = "\xff\xfe";
  CHECK(code_of(bad_utf8) == ErrorCode::EncodeUnrepresentable);
  Transaction bad_id = fixture_tx();
  bad_id.id = TxId("has space");
  CHECK(code_of(bad_id) == ErrorCode::EncodeUnrepresentable);
  Transaction negative = fixture_tx();
  negative.timestamp = -1;
  CHECK(code_of(negative) == ErrorCode::EncodeUnrepresentable);
  Transaction mismatch = fixture_tx();
  mismatch.tag = StateTag::Remove;
  CHECK(code_of(mismatch) == ErrorCode::EncodeUnrepresentable);
}

TEST_CASE("transactions and blocks round trip through JSON") {
  const auto w = lgtest::make_world(2);
  const Transaction tx = w.sign(record_create(TxId("c1"), EntityId("k1"), 10, lgtest::descriptor("r1", {"k2"})));
  CHECK(transaction_from_json(to_json(tx)) == tx);
  const Block b = w.mine_txs(w.params->genesis(), {tx});
  CHECK(block_from_json(to_json(b)) == b);
  CHECK(block_from_json(Json::parse(canonical_encode(b))) == b);
  CHECK_THROWS_AS(transaction_from_json(Json{{"txId", "x"}}), Error);
  Json wrong = to_json(tx);
  wrong["stateTag"] = "AUTH_GRANT";
  CHECK_THROWS_AS(transaction_from_json(wrong), Error);
}

TEST_CASE("identifier rules") {
  CHECK(is_valid_identifier("r1"));
  CHECK(is_valid_identifier("A-b_c.d~9"));
  CHECK(is_valid_identifier(std::string(64, 'x')));
  CHECK_FALSE(is_valid_identifier(""));
  CHECK_FALSE(is_valid_identifier(std::string(65, 'x')));
  CHECK_FALSE(is_valid_identifier("a/b"));
  CHECK_FALSE(is_valid_identifier("a b"));
  CHECK(EntityId("K1") != EntityId("k1"));
}
