#include <deque>

#include "doctest.h"
#include "ledgergate/encoding.hpp"
#include "ledgergate/error.hpp"
#include "ledgergate/mempool.hpp"
#include "ledgergate/node.hpp"
#include "ledgergate/wire.hpp"
#include "support/world.hpp"

using namespace ledgergate;

namespace {

// Nodes wired together in-process; peer ids are node names.
struct Net {
  lgtest::World w = lgtest::make_world(4);
  std::map<std::string, std::unique_ptr<Node>> nodes;
  std::deque<std::pair<std::string, Outgoing>> queue;
  std::set<std::pair<std::string, std::string>> cut;

  Node& add(const std::string& name, std::optional<std::string> key) {
    std::optional<PrivateKey> k;
    if (key) k = key->rfind("test/", 0) == 0 ? PrivateKey::derive(*key) : w.key(*key);
    auto node = std::make_unique<Node>(name, Chain(w.params), std::move(k));
    return *nodes.emplace(name, std::move(node)).first->second;
  }
  Node& at(const std::string& name) { return *nodes.at(name); }
  void post(const std::string& from, Outbox out) {
    for (auto& o : out) queue.emplace_back(from, std::move(o));
  }
  void link(const std::string& a, const std::string& b) {
    post(a, at(a).connect(b));
    post(b, at(b).connect(a));
    pump();
  }
  void pump() {
    while (!queue.empty()) {
      auto [from, o] = std::move(queue.front());
      queue.pop_front();
      if (cut.count({from, o.to}) || cut.count({o.to, from})) continue;
      post(o.to, at(o.to).receive(from, o.msg));
    }
  }
  SubmitResult submit(const std::string& node, const Transaction& tx) {
    Outbox out;
    SubmitResult r = at(node).submit(tx, out);
    post(node, std::move(out));
    pump();
    return r;
  }
  bool mine(const std::string& node, bool force = false) {
    Node& n = at(node);
    // Distinct clocks per node: the miner signature is not hashed, so equal
    // clocks and equal content would give identical blocks.
    const Timestamp skew = static_cast<Timestamp>(node[0]);
    auto job = n.mining_job(1700000100 + 10 * static_cast<Timestamp>(n.chain().size()) + skew, force);
    if (!job) return false;
    auto block = seal_block(job->prev, job->data, *n.key(), job->difficulty, job->timestamp);
    post(node, n.accept_mined(*block));
    pump();
    return true;
  }
  Transaction create(const std::string& id, const std::string& record) {
    return w.sign(record_create(TxId(id), EntityId("k1"), 1, lgtest::descriptor(record, {"k2"})));
  }
};

struct RecordingSink : ChainSink {
  std::vector<std::uint64_t> appended_at;
  std::size_t replaced_with = 0;
  bool fail = false;
  void appended(const Block& b) override {
    if (fail) throw Error(ErrorCode::IoFailure, "disk full");
    appended_at.push_back(b.index);
  }
  void replaced(std::span<const Block> blocks) override { replaced_with = blocks.size(); }
};

}  // namespace

TEST_CASE("wire messages round trip through JSON frames") {
  const auto w = lgtest::make_world(2);
  const Transaction tx = w.sign(record_create(TxId("c1"), EntityId("k1"), 1, lgtest::descriptor("r1", {})));
  const Block b = w.mine_txs(w.params->genesis(), {tx});
  for (const auto& msg : {WireMessage::hello("n1", 4), WireMessage::get_latest(), WireMessage::latest(b),
                          WireMessage::get_chain(), WireMessage::chain({w.params->genesis(), b}),
                          WireMessage::announce(b), WireMessage::submit(tx)}) {
    CHECK(wire_message_from_json(to_json(msg)) == msg);
    const std::string frame = encode_frame(msg);
    const std::uint32_t len = (std::uint32_t(std::uint8_t(frame[0])) << 24) |
                              (std::uint32_t(std::uint8_t(frame[1])) << 16) |
                              (std::uint32_t(std::uint8_t(frame[2])) << 8) | std::uint8_t(frame[3]);
    CHECK(len == frame.size() - 4);
    CHECK(wire_message_from_json(Json::parse(frame.substr(4))) == msg);
  }
  CHECK(to_json(WireMessage::get_chain())["kind"] == "GET_CHAIN");
  CHECK_THROWS_AS(wire_message_from_json(Json{{"kind", "NOPE"}}), Error);
  CHECK_THROWS_AS(wire_message_from_json(Json{{"kind", "LATEST"}, {"body", Json::object()}}), Error);
}

TEST_CASE("mempool keeps arrival order and unique keys") {
  const auto w = lgtest::make_world(2);
  Mempool pool;
  const Transaction a = record_create(TxId("a"), EntityId("k1"), 1, lgtest::descriptor("r1", {}));
  const Transaction b = record_create(TxId("b"), EntityId("k1"), 1, lgtest::descriptor("r2", {}));
  CHECK(pool.add(b));
  CHECK(pool.add(a));
  CHECK_FALSE(pool.add(a));
  CHECK(pool.entries().front() == b);
  CHECK(pool.contains(key_of(a)));
  pool.retain([](const Transaction& tx) { return tx.id == TxId("a"); });
  CHECK(pool.size() == 1);
  CHECK_FALSE(pool.contains(key_of(b)));
  CHECK(pool.remove(key_of(a)));
  CHECK(pool.empty());
}

TEST_CASE("connecting greets the peer and asks for its tip") {
  Net net;
  Node& n = net.add("a", "m1");
  const Outbox out = n.connect("b");
  REQUIRE(out.size() == 2);
  CHECK(out[0].msg.kind == MessageKind::Hello);
  CHECK(out[1].msg.kind == MessageKind::GetLatest);
  CHECK(n.peers().count("b"));
}

TEST_CASE("submissions are verified, admitted and gossiped") {
  Net net;
  net.add("a", "m1");
  net.add("b", "m2");
  net.link("a", "b");
  const Transaction tx = net.create("c1", "r1");
  CHECK(net.submit("a", tx).ok());
  CHECK(net.at("b").mempool().contains(key_of(tx)));
  CHECK(net.submit("b", tx).status == SubmitStatus::Duplicate);

  Transaction forged = net.create("c2", "r2");
  forged.author = EntityId("k2");
  CHECK(net.submit("a", forged).status == SubmitStatus::BadSignature);

  const SubmitResult again = net.submit("a", net.create("c3", "r1"));
  CHECK(again.status == SubmitStatus::Rejected);
  CHECK(again.admission.reason == Reason::RecordExists);

  Transaction ghost = record_create(TxId("g"), EntityId("ghost"), 1, lgtest::descriptor("r9", {}));
  ghost.signature = {1, 2, 3};
  CHECK(net.submit("a", ghost).admission.reason == Reason::UnknownEntity);
}

TEST_CASE("mined blocks propagate and clear mempools") {
  Net net;
  net.add("a", "m1");
  net.add("b", "m2");
  net.add("c", "m3");
  net.link("a", "b");
  net.link("b", "c");
  CHECK_FALSE(net.mine("a"));
  net.submit("c", net.create("c1", "r1"));
  CHECK(net.at("a").mempool().size() == 1);
  CHECK(net.mine("a"));
  for (const char* n : {"a", "b", "c"}) {
    CHECK(net.at(n).chain().height() == 1);
    CHECK(net.at(n).mempool().empty());
    CHECK(net.at(n).snapshot()->record(RecordId("r1")) != nullptr);
  }
  CHECK(net.at("a").stats().blocks_mined == 1);
  CHECK(net.at("c").stats().blocks_from_peers == 1);
  CHECK(net.mine("b", true));
  CHECK(net.at("c").chain().height() == 2);
}

TEST_CASE("nodes without a member key never mine") {
  Net net;
  Node& reader = net.add("r", "k1");
  Node& none = net.add("n", std::nullopt);
  CHECK_FALSE(reader.can_mine());
  CHECK_FALSE(none.can_mine());
  CHECK_FALSE(reader.mining_job(1, true).has_value());
  net.add("m", "m1");
  net.link("r", "m");
  net.submit("r", net.create("c1", "r1"));
  CHECK(net.mine("m"));
  CHECK(reader.chain().height() == 1);
}

TEST_CASE("the longest valid chain wins and orphaned transactions return") {
  Net net;
  net.add("a", "m1");
  net.add("b", "m2");
  net.link("a", "b");
  net.cut.insert({"a", "b"});
  net.submit("a", net.create("c1", "r1"));
  CHECK(net.mine("a"));
  net.submit("b", net.create("c2", "r2"));
  CHECK(net.mine("b"));
  CHECK(net.mine("b", true));
  CHECK(net.at("a").chain().height() == 1);
  CHECK(net.at("b").chain().height() == 2);

  net.cut.clear();
  net.link("a", "b");
  CHECK(net.at("a").chain().blocks() == net.at("b").chain().blocks());
  CHECK(net.at("a").stats().chains_adopted == 1);
  // c1 lived only in a's orphaned block: it is pending again, and gossiped on.
  CHECK(net.at("a").mempool().contains(TxKey{TxId("c1"), StateTag::Create}));
  CHECK(net.mine("a"));
  CHECK(net.at("b").snapshot()->record(RecordId("r1")) != nullptr);
}

TEST_CASE("equal-height forks set the tie flag until one side extends") {
  Net net;
  net.add("a", "m1");
  net.add("b", "m2");
  net.link("a", "b");
  net.cut.insert({"a", "b"});
  CHECK(net.mine("a", true));
  CHECK(net.mine("b", true));
  net.cut.clear();
  net.link("a", "b");
  CHECK(net.at("a").fork_tie());
  auto job = net.at("a").mining_job(1700000200);
  REQUIRE(job.has_value());
  CHECK(job->data.empty());
  CHECK(net.mine("a"));
  CHECK(net.at("a").chain().blocks() == net.at("b").chain().blocks());
  CHECK_FALSE(net.at("a").fork_tie());
  CHECK_FALSE(net.at("b").fork_tie());
}

TEST_CASE("blocks and chains from non-members are refused") {
  Net net;
  Node& a = net.add("a", "m1");
  const Block forged = *seal_block(net.w.params->genesis(), {}, PrivateKey::derive("evil"), 4, 1700000100);
  a.receive("evil", WireMessage::announce(forged));
  CHECK(a.chain().height() == 0);
  CHECK(a.stats().blocks_rejected == 1);

  const Block next = *seal_block(forged, {}, PrivateKey::derive("evil"), 4, 1700000110);
  a.receive("evil", WireMessage::chain({net.w.params->genesis(), forged, next}));
  CHECK(a.chain().height() == 0);
  CHECK(a.stats().chains_rejected == 1);
  CHECK(a.stats().last_rejection.find("NOT_MEMBER") != std::string::npos);
}

TEST_CASE("a gap triggers a full chain request") {
  Net net;
  Node& a = net.add("a", "m1");
  Block b1 = net.w.mine_txs(net.w.params->genesis(), {});
  Block b2 = net.w.mine_txs(b1, {}, "m2", 1700000200);
  const Outbox out = a.receive("p", WireMessage::latest(b2));
  REQUIRE(out.size() == 1);
  CHECK(out[0].msg.kind == MessageKind::GetChain);
  CHECK(a.receive("p", WireMessage::get_chain())[0].msg.blocks.size() == 1);
}

TEST_CASE("the sink sees every mutation first and can veto it") {
  Net net;
  Node& a = net.add("a", "m1");
  RecordingSink sink;
  a.set_sink(&sink);
  const Block b1 = net.w.mine_txs(net.w.params->genesis(), {});
  a.receive("p", WireMessage::announce(b1));
  CHECK(sink.appended_at == std::vector<std::uint64_t>{1});

  sink.fail = true;
  const Block b2 = net.w.mine_txs(b1, {}, "m2", 1700000200);
  CHECK_THROWS_AS(a.receive("p", WireMessage::announce(b2)), Error);
  CHECK(a.chain().height() == 1);

  const Block c1 = net.w.mine_txs(net.w.params->genesis(), {}, "m3", 1700000300);
  const Block c2 = net.w.mine_txs(c1, {}, "m3", 1700000310);
  const Block c3 = net.w.mine_txs(c2, {}, "m3", 1700000320);
  a.receive("p", WireMessage::chain({net.w.params->genesis(), c1, c2, c3}));
  CHECK(sink.replaced_with == 4);
  CHECK(a.chain().height() == 3);
}
