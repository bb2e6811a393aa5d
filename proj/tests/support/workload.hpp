#pragma once

// Random transaction streams over the make_world() consortium: mostly
// plausible transitions, with a steady share of illegal ones.

#include <random>
#include <string>
#include <vector>

#include "ledgergate/encoding.hpp"
#include "ledgergate/lifecycle.hpp"
#include "support/oracle.hpp"
#include "support/world.hpp"

namespace lgtest {

class TxGen {
 public:
  TxGen(const World& world, std::uint64_t seed) : world_(world), rng_(seed) {}

  /// A random transaction given the accepted `history`. Unsigned.
  Transaction next(const std::vector<Transaction>& history) {
    const RefState s = ref_derive(history);
    const Timestamp ts = 1700000100 + static_cast<Timestamp>(history.size());
    TxId id("tx" + std::to_string(++counter_));
    if (!history.empty() && chance(0.05)) {
      // Replay an accepted (txId, stateTag) pair.
      Transaction dup = pick(history);
      dup.timestamp = ts;
      return dup;
    }
    const int op = static_cast<int>(uniform(0, 99));
    if (op < 12) {
      auto d = descriptor(pick_str(records_), some_keepers(), pick_rule(), "vault://" + std::to_string(counter_));
      return record_create(id, EntityId(author_for(keepers_)), ts, std::move(d));
    }
    if (op < 18) {
      const std::string rec = known_record(s);
      auto d = descriptor(rec, some_keepers(), pick_rule(), "vault://moved");
      return record_update(id, EntityId(record_member(s, rec)), ts, std::move(d));
    }
    if (op < 23) {
      const std::string rec = known_record(s);
      return record_remove(id, EntityId(record_member(s, rec)), ts, RecordId(rec));
    }
    if (op < 38) {
      AccessRequest a;
      a.request = RequestId(fresh_request(s));
      const std::string party = author_for(parties_);
      a.party = EntityId(chance(0.9) ? party : pick_str(parties_));
      a.record = RecordId(known_record(s));
      a.level = chance(0.03) ? PermissionLevel::None : chance(0.5) ? PermissionLevel::Read : PermissionLevel::Write;
      if (chance(0.2)) a.expiry = ts + static_cast<Timestamp>(uniform(0, 20));
      Transaction tx = access_request(id, ts, std::move(a));
      tx.author = EntityId(party);
      return tx;
    }
    if (op < 50) {
      return access_require(id, EntityId(author_for(members_)), ts, RequestId(request_in(s, {"REQUESTED"})));
    }
    if (op < 97) {
      const std::string req = request_in(s, {"WAITING", "GRANTED"});
      const std::string keeper = slot_holder(s, req);
      if (op < 67) return keeper_vote(id, EntityId(keeper), ts, RequestId(req), true);
      if (op < 79) return keeper_vote(id, EntityId(keeper), ts, RequestId(req), false);
      return keeper_revoke(id, EntityId(keeper), ts, RequestId(req));
    }
    // Aggregate or slot transitions that are only ever derived.
    Transaction tx = keeper_vote(id, EntityId(author_for(members_)), ts, RequestId(pick_str(requests_)), true);
    if (chance(0.5)) {
      tx.kind = TxKind::PolicyOp;
    } else {
      tx.tag = StateTag::RequireAction;
    }
    return tx;
  }

  std::mt19937_64& rng() { return rng_; }

 private:
  bool chance(double p) { return std::uniform_real_distribution<double>(0, 1)(rng_) < p; }
  std::uint64_t uniform(std::uint64_t lo, std::uint64_t hi) {
    return std::uniform_int_distribution<std::uint64_t>(lo, hi)(rng_);
  }
  template <class T>
  const T& pick(const std::vector<T>& v) {
    return v[uniform(0, v.size() - 1)];
  }
  std::string pick_str(const std::vector<std::string>& v) { return pick(v); }

  /// Mostly an entity of the intended group, sometimes anyone, rarely an
  /// unregistered id.
  std::string author_for(const std::vector<std::string>& group) {
    if (chance(0.02)) return "ghost";
    if (chance(0.1)) return pick_str(everyone_);
    return pick_str(group);
  }
  /// Mostly a record that exists, otherwise any id from the universe.
  std::string known_record(const RefState& s) {
    if (!s.records.empty() && chance(0.85)) {
      auto it = s.records.begin();
      std::advance(it, static_cast<long>(uniform(0, s.records.size() - 1)));
      return it->first;
    }
    return pick_str(records_);
  }
  /// Mostly a request in one of `states`, otherwise any id.
  std::string request_in(const RefState& s, std::initializer_list<const char*> states) {
    std::vector<std::string> fit;
    for (const auto& [id, r] : s.requests) {
      for (const char* st : states) {
        if (r.state == st) fit.push_back(id);
      }
    }
    if (!fit.empty() && chance(0.85)) return pick(fit);
    return pick_str(requests_);
  }
  std::string fresh_request(const RefState& s) {
    std::vector<std::string> unused;
    for (const auto& id : requests_) {
      if (!s.requests.count(id)) unused.push_back(id);
    }
    if (!unused.empty() && chance(0.85)) return pick(unused);
    return pick_str(requests_);
  }
  std::string record_member(const RefState& s, const std::string& rec) {
    auto it = s.records.find(rec);
    if (it != s.records.end() && chance(0.85)) return pick(it->second.keepers);
    return author_for(keepers_);
  }
  std::string slot_holder(const RefState& s, const std::string& req) {
    auto it = s.requests.find(req);
    if (it != s.requests.end() && !it->second.votes.empty() && chance(0.4)) {
      auto v = it->second.votes.begin();
      std::advance(v, static_cast<long>(uniform(0, it->second.votes.size() - 1)));
      return v->first;
    }
    if (it != s.requests.end() && !it->second.slots.empty() && chance(0.85)) return pick(it->second.slots);
    return author_for(keepers_);
  }
  std::vector<std::string> some_keepers() {
    std::vector<std::string> out;
    const auto n = uniform(0, 3);
    for (std::uint64_t i = 0; i < n; ++i) out.push_back(chance(0.95) ? pick_str(keepers_) : pick_str(parties_));
    return out;
  }
  AgreementRule pick_rule() {
    switch (uniform(0, 2)) {
      case 0: return AgreementRule::Any;
      case 1: return AgreementRule::Majority;
      default: return AgreementRule::All;
    }
  }

  const World& world_;
  std::mt19937_64 rng_;
  std::uint64_t counter_ = 0;
  std::vector<std::string> members_{"m1", "m2", "m3"};
  std::vector<std::string> keepers_{"k1", "k2", "k3", "k4", "k5"};
  std::vector<std::string> parties_{"t1", "t2", "t3"};
  std::vector<std::string> everyone_{"m1", "m2", "m3", "k1", "k2", "k3", "k4", "k5", "t1", "t2", "t3"};
  std::vector<std::string> records_{"r1", "r2", "r3"};
  std::vector<std::string> requests_{"q1", "q2", "q3", "q4", "q5"};
};

/// Signed, admissible transactions grouped into mined blocks on top of
/// genesis. Each block holds up to `max_txs` transactions.
inline std::vector<Block> random_chain(const World& w, std::uint64_t seed, std::size_t blocks,
                                       std::size_t max_txs = 4) {
  TxGen gen(w, seed);
  std::vector<Block> chain{w.params->genesis()};
  std::vector<Transaction> history;
  Snapshot snap(w.shared_dir());
  const std::vector<std::string> miners{"m1", "m2", "m3"};
  for (std::size_t i = 1; i <= blocks; ++i) {
    BlockData data;
    const std::size_t want = std::uniform_int_distribution<std::size_t>(0, max_txs)(gen.rng());
    for (int attempt = 0; attempt < 40 && data.size() < want; ++attempt) {
      Transaction tx = gen.next(history);
      if (w.dir().find(tx.author) == nullptr) continue;
      BlockData trial = data;
      trial.add(w.sign(tx));
      if (!admit_block_data(snap, trial)) continue;
      data = std::move(trial);
      history.push_back(std::move(tx));
    }
    const std::string& miner = miners[i % miners.size()];
    chain.push_back(w.mine(chain.back(), data, miner, 1700000000 + 10 * static_cast<Timestamp>(i)));
    snap.apply_block(chain.back());
  }
  return chain;
}

}  // namespace lgtest
