#include <benchmark/benchmark.h>

#include "ledgergate/encoding.hpp"
#include "ledgergate/ledger.hpp"
#include "ledgergate/lifecycle.hpp"
#include "ledgergate/snapshot.hpp"

using namespace ledgergate;

namespace {

struct Fixture {
  std::shared_ptr<const ChainParams> params;
  PrivateKey miner = PrivateKey::derive("bench/m1");
  PrivateKey keeper = PrivateKey::derive("bench/k1");
  PrivateKey party = PrivateKey::derive("bench/t1");

  explicit Fixture(unsigned difficulty) {
    GenesisConfig c;
    c.scheme = SignatureScheme::Ed25519Sha256;
    c.difficulty = difficulty;
    c.timestamp = 1700000000;
    c.entities = {{EntityId("m1"), Role::ConsortiumNode, miner.public_key()},
                  {EntityId("k1"), Role::DataKeeper, keeper.public_key()},
                  {EntityId("t1"), Role::ThirdParty, party.public_key()}};
    params = ChainParams::create(std::move(c));
  }

  Transaction signed_tx(Transaction tx) const {
    const PrivateKey& key = tx.author == EntityId("t1") ? party : tx.author == EntityId("m1") ? miner : keeper;
    sign_transaction(tx, key);
    return tx;
  }

  // Each block creates a record, asks for it, and grants the request.
  std::vector<Block> chain(std::size_t blocks) const {
    std::vector<Block> out{params->genesis()};
    for (std::size_t i = 1; i <= blocks; ++i) {
      const std::string n = std::to_string(i);
      const Timestamp ts = 1700000000 + 10 * static_cast<Timestamp>(i);
      BlockData data;
      data.add(signed_tx(record_create(TxId("c" + n), EntityId("k1"), ts,
                                       RecordDescriptor{RecordId("r" + n), {}, AgreementRule::Any, "vault://" + n})));
      data.add(signed_tx(access_request(TxId("a" + n), ts,
                                        {RequestId("q" + n), EntityId("t1"), RecordId("r" + n),
                                         PermissionLevel::Read, {}})));
      data.add(signed_tx(access_require(TxId("p" + n), EntityId("m1"), ts, RequestId("q" + n))));
      data.add(signed_tx(keeper_vote(TxId("v" + n), EntityId("k1"), ts, RequestId("q" + n), true)));
      out.push_back(*seal_block(out.back(), std::move(data), miner, params->difficulty(), ts));
    }
    return out;
  }
};

void BM_SealBlock(benchmark::State& state) {
  const Fixture f(static_cast<unsigned>(state.range(0)));
  Timestamp ts = 1700000100;
  std::uint64_t attempts = 0;
  for (auto _ : state) {
    const auto b = seal_block(f.params->genesis(), {}, f.miner, f.params->difficulty(), ts++);
    attempts += b->nonce + 1;
  }
  state.counters["attempts"] = benchmark::Counter(static_cast<double>(attempts), benchmark::Counter::kAvgIterations);
  state.counters["hashes/s"] = benchmark::Counter(static_cast<double>(attempts), benchmark::Counter::kIsRate);
}
BENCHMARK(BM_SealBlock)->Arg(0)->Arg(8)->Arg(12)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_ValidateChain(benchmark::State& state) {
  const Fixture f(8);
  const auto chain = f.chain(static_cast<std::size_t>(state.range(0)));
  const ChainVerdict v = validate_chain(chain, *f.params);
  if (!v.valid) state.SkipWithError(("invalid chain at " + std::to_string(*v.first_bad_index) + ": " + v.detail).c_str());
  for (auto _ : state) benchmark::DoNotOptimize(validate_chain(chain, *f.params));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ValidateChain)->Arg(10)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_Replay(benchmark::State& state) {
  const Fixture f(0);
  const auto chain = f.chain(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(replay(chain, f.params->shared_directory(), chain.size() - 1));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Replay)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_Evaluate(benchmark::State& state) {
  const Fixture f(0);
  const auto chain = f.chain(200);
  const Snapshot snap = replay(chain, f.params->shared_directory(), chain.size() - 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(evaluate(snap, EntityId("t1"), RecordId("r150"), PermissionLevel::Read, 1700009000));
  }
}
BENCHMARK(BM_Evaluate);

void BM_CanonicalEncodeBlock(benchmark::State& state) {
  const Fixture f(0);
  const auto chain = f.chain(1);
  for (auto _ : state) benchmark::DoNotOptimize(canonical_encode(chain[1].data));
}
BENCHMARK(BM_CanonicalEncodeBlock);

}  // namespace
BENCHMARK_MAIN();
