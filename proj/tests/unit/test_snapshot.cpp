#include "doctest.h"
#include "ledgergate/error.hpp"
#include "ledgergate/snapshot.hpp"
#include "support/oracle.hpp"
#include "support/workload.hpp"
#include "support/world.hpp"

using namespace ledgergate;

namespace {

std::vector<Transaction> flatten(std::span<const Block> blocks) {
  std::vector<Transaction> out;
  for (const auto& b : blocks) b.data.for_each([&](const Transaction& tx) { out.push_back(tx); });
  return out;
}

std::string state_name(RequestState s) {
  switch (s) {
    case RequestState::Requested: return "REQUESTED";
    case RequestState::WaitingAuthCheck: return "WAITING";
    case RequestState::Granted: return "GRANTED";
    case RequestState::Denied: return "DENIED";
    case RequestState::Revoked: return "REVOKED";
  }
  return "?";
}

// One block per step so the decision clock is easy to follow.
struct Ledger {
  lgtest::World w = lgtest::make_world(2);
  std::vector<Block> blocks{w.params->genesis()};
  int n = 0;

  void add(const std::vector<Transaction>& txs) {
    std::vector<Transaction> signed_txs;
    for (const auto& tx : txs) signed_txs.push_back(w.sign(tx));
    blocks.push_back(w.mine_txs(blocks.back(), signed_txs, "m1", 1700000000 + 10 * Timestamp(blocks.size())));
  }
  TxId id() { return TxId("t" + std::to_string(++n)); }
  Snapshot snap() const { return replay(blocks, w.shared_dir(), blocks.size() - 1); }
};

}  // namespace

TEST_CASE("access decisions") {
  Ledger l;
  l.add({record_create(l.id(), EntityId("k1"), 1, lgtest::descriptor("r1", {}, AgreementRule::Any, "vault://r1")),
         record_create(l.id(), EntityId("k1"), 1, lgtest::descriptor("r2", {}))});
  CHECK(evaluate(l.snap(), EntityId("t1"), RecordId("r1"), PermissionLevel::Read, 5).outcome == Outcome::Unknown);
  CHECK(evaluate(l.snap(), EntityId("t1"), RecordId("zz"), PermissionLevel::Read, 5).reason == "UNKNOWN_RECORD");

  l.add({access_request(l.id(), 2, {RequestId("q1"), EntityId("t1"), RecordId("r1"), PermissionLevel::Write, 1000}),
         access_request(l.id(), 2, {RequestId("q2"), EntityId("t2"), RecordId("r1"), PermissionLevel::Read, {}}),
         access_request(l.id(), 2, {RequestId("q3"), EntityId("t3"), RecordId("r2"), PermissionLevel::Read, {}})});
  auto pending = evaluate(l.snap(), EntityId("t1"), RecordId("r1"), PermissionLevel::Read, 5);
  CHECK(pending.outcome == Outcome::Unknown);
  CHECK(pending.reason == "PENDING");
  CHECK(pending.policy_ref == RequestId("q1"));

  l.add({access_require(l.id(), EntityId("m1"), 3, RequestId("q1")),
         access_require(l.id(), EntityId("m2"), 3, RequestId("q2")),
         access_require(l.id(), EntityId("m1"), 3, RequestId("q3"))});
  l.add({keeper_vote(l.id(), EntityId("k1"), 4, RequestId("q1"), true),
         keeper_vote(l.id(), EntityId("k1"), 4, RequestId("q2"), false),
         keeper_vote(l.id(), EntityId("k1"), 4, RequestId("q3"), true)});
  const Snapshot s = l.snap();

  SUBCASE("a WRITE policy answers READ queries") {
    const auto d = evaluate(s, EntityId("t1"), RecordId("r1"), PermissionLevel::Read, 5);
    CHECK(d.outcome == Outcome::Grant);
    CHECK(d.reason == "GRANTED");
    CHECK(d.policy_ref == RequestId("q1"));
    CHECK(evaluate(s, EntityId("t1"), RecordId("r1"), PermissionLevel::Write, 5).outcome == Outcome::Grant);
  }
  SUBCASE("a READ policy does not answer WRITE queries") {
    CHECK(evaluate(s, EntityId("t3"), RecordId("r2"), PermissionLevel::Write, 5).reason == "INSUFFICIENT_LEVEL");
  }
  SUBCASE("expired grants deny") {
    const auto d = evaluate(s, EntityId("t1"), RecordId("r1"), PermissionLevel::Read, 1001);
    CHECK(d.outcome == Outcome::Deny);
    CHECK(d.reason == "EXPIRED");
    CHECK(evaluate(s, EntityId("t1"), RecordId("r1"), PermissionLevel::Read, 1000).reason == "EXPIRED");
    CHECK(evaluate(s, EntityId("t1"), RecordId("r1"), PermissionLevel::Read, 999).outcome == Outcome::Grant);
  }
  SUBCASE("denied policies deny") {
    CHECK(evaluate(s, EntityId("t2"), RecordId("r1"), PermissionLevel::Read, 5).reason == "DENIED");
  }
  SUBCASE("revoked and removed") {
    l.add({keeper_revoke(l.id(), EntityId("k1"), 6, RequestId("q1")),
           record_remove(l.id(), EntityId("k1"), 6, RecordId("r2"))});
    const Snapshot after = l.snap();
    CHECK(evaluate(after, EntityId("t1"), RecordId("r1"), PermissionLevel::Read, 7).reason == "REVOKED");
    CHECK(evaluate(after, EntityId("t3"), RecordId("r2"), PermissionLevel::Read, 7).reason == "RECORD_REMOVED");
    // The earlier view is unaffected.
    CHECK(evaluate(s, EntityId("t1"), RecordId("r1"), PermissionLevel::Read, 7).outcome == Outcome::Grant);
  }
}

TEST_CASE("audit trail equals a scan over the chain") {
  const auto w = lgtest::make_world(2);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto chain = lgtest::random_chain(w, seed, 25);
    const Snapshot snap = replay(chain, w.shared_dir(), chain.size() - 1);
    for (const auto& [rid, rec] : snap.records()) {
      std::set<std::string> requests_of_record;
      std::vector<AuditEntry> grep;
      for (const auto& b : chain) {
        b.data.for_each([&](const Transaction& tx) {
          bool hit = false;
          if (tx.tag == StateTag::Create || tx.tag == StateTag::Update) {
            hit = std::get<RecordDescriptor>(tx.payload).record == rid;
          } else if (tx.tag == StateTag::Remove) {
            hit = std::get<RecordRef>(tx.payload).record == rid;
          } else if (tx.tag == StateTag::Request) {
            const auto& a = std::get<AccessRequest>(tx.payload);
            hit = a.record == rid;
            if (hit) requests_of_record.insert(a.request.str());
          } else {
            hit = requests_of_record.count(std::get<RequestRef>(tx.payload).request.str()) != 0;
          }
          if (hit) grep.push_back(AuditEntry{b.index, tx});
        });
      }
      REQUIRE(audit_trail(snap, rid) == grep);
    }
  }
  Snapshot empty(w.shared_dir());
  CHECK_THROWS_AS(audit_trail(empty, RecordId("r1")), Error);
}

TEST_CASE("replay agrees with the naive history scan") {
  const auto w = lgtest::make_world(2);
  for (std::uint64_t seed = 100; seed < 130; ++seed) {
    const auto chain = lgtest::random_chain(w, seed, 20);
    const Snapshot snap = replay(chain, w.shared_dir(), chain.size() - 1);
    const lgtest::RefState ref = lgtest::ref_derive(flatten(chain));
    REQUIRE(snap.records().size() == ref.records.size());
    for (const auto& [rid, rec] : ref.records) {
      const Record* got = snap.record(RecordId(rid));
      REQUIRE(got != nullptr);
      CHECK((got->status == RecordStatus::Removed) == rec.removed);
      std::vector<std::string> keepers;
      for (const auto& k : got->keepers) keepers.push_back(k.str());
      CHECK(keepers == rec.keepers);
    }
    REQUIRE(snap.requests().size() == ref.requests.size());
    for (const auto& [qid, req] : ref.requests) {
      const RequestProgress* got = snap.request(RequestId(qid));
      REQUIRE(got != nullptr);
      CHECK(state_name(got->state) == req.state);
    }
  }
}

TEST_CASE("replay is incremental and deterministic") {
  const auto w = lgtest::make_world(2);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto chain = lgtest::random_chain(w, seed, 15);
    Snapshot prev = replay(chain, w.shared_dir(), 0);
    for (std::size_t k = 0; k + 1 < chain.size(); ++k) {
      const Snapshot next = replay(chain, w.shared_dir(), k + 1);
      REQUIRE(next == fold(prev, chain[k + 1]));
      REQUIRE(next == replay(chain, w.shared_dir(), k + 1));
      CHECK(next.at_index() == k + 1);
      prev = next;
    }
  }
}

TEST_CASE("at most one live grant per party and record") {
  const auto w = lgtest::make_world(2);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto chain = lgtest::random_chain(w, seed, 30);
    const Snapshot snap = replay(chain, w.shared_dir(), chain.size() - 1);
    std::map<std::pair<EntityId, RecordId>, int> live;
    const Timestamp now = 1700000000;
    for (const auto& [id, r] : snap.requests()) {
      if (r.state == RequestState::Granted && (!r.expiry || *r.expiry > now)) ++live[{r.party, r.record}];
    }
    for (const auto& [key, count] : live) CHECK(count == 1);
  }
}

TEST_CASE("inconsistent blocks fail replay") {
  const auto w = lgtest::make_world(2);
  // Validly sealed, but the vote names a request that does not exist.
  BlockData data;
  data.add(w.sign(keeper_vote(TxId("v1"), EntityId("k1"), 1, RequestId("q1"), true)));
  const Block bad = *seal_block(w.params->genesis(), data, w.key("m1"), 2, 1700000100);
  const std::vector<Block> chain{w.params->genesis(), bad};
  try {
    replay(chain, w.shared_dir(), 1);
    FAIL("expected ReplayInconsistent");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ReplayInconsistent);
  }
  CHECK_FALSE(admit_block_data(Snapshot(w.shared_dir()), data));
}

TEST_CASE("snapshots are independent values") {
  const auto w = lgtest::make_world(2);
  Snapshot a(w.shared_dir());
  REQUIRE(a.apply(record_create(TxId("c"), EntityId("k1"), 1, lgtest::descriptor("r1", {})), 1));
  Snapshot b = a;
  REQUIRE(b.apply(record_remove(TxId("d"), EntityId("k1"), 2, RecordId("r1")), 2));
  CHECK(a.record(RecordId("r1"))->status == RecordStatus::Active);
  CHECK(b.record(RecordId("r1"))->status == RecordStatus::Removed);
  CHECK_FALSE(a == b);
}
