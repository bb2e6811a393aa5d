#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ledgergate/encoding.hpp"
#include "ledgergate/node.hpp"

namespace ledgergate {

// Virtual time is in milliseconds. Block and transaction timestamps are
// genesis_time + t / 1000.
using SimTime = std::int64_t;

enum class MiningMode { Manual, OnDemand, Continuous };
enum class AdversaryKind { None, NonMember, StolenKey };

struct SimNodeSpec {
  std::string id;
  MiningMode mining = MiningMode::OnDemand;
  /// Hash attempts per virtual second.
  double hash_rate = 1000.0;
  AdversaryKind adversary = AdversaryKind::None;
  /// For StolenKey: the member entity whose key the adversary holds.
  std::string stolen_from;
  /// Offset of this node's clock in seconds. Miners with equal clocks and
  /// equal block content search the same preimages and duplicate work.
  Timestamp clock_skew = 0;
};

struct SimEdge {
  std::string a;
  std::string b;
  SimTime latency = 10;
  SimTime jitter = 0;
};

/// A transaction described by intent; the simulator builds and signs it.
struct SimTxSpec {
  std::string op;  // create, update, remove, request, require, grant, deny, revoke
  std::string id;  // txId, generated when empty
  std::string author;
  std::string record;
  std::vector<std::string> keepers;
  AgreementRule agreement = AgreementRule::Any;
  std::string location;
  std::string request;
  std::string party;
  PermissionLevel level = PermissionLevel::Read;
  std::optional<Timestamp> expiry;
};

enum class SimEventType { Submit, Mine, Partition, Heal, Connect, Attack };

struct SimEvent {
  SimTime at = 0;
  SimEventType type = SimEventType::Submit;
  std::string node;
  SimTxSpec tx;
  std::vector<std::vector<std::string>> groups;
  SimEdge edge;
  std::uint64_t fork_at = 0;
};

struct Scenario {
  std::uint64_t seed = 1;
  unsigned difficulty = 8;
  Timestamp genesis_time = 1700000000;
  /// Hard stop; runs also end when no event is left.
  SimTime until = 600000;
  /// Registered non-node entities (keepers, third parties, idle members).
  std::vector<std::pair<std::string, Role>> entities;
  std::vector<SimNodeSpec> nodes;
  std::vector<SimEdge> edges;
  std::vector<SimEvent> events;
  bool trace = true;
};

/// Throws Error(ScenarioInvalid).
Scenario scenario_from_json(const Json& j);
Json to_json(const Scenario& s);

/// Deterministic signing key of a simulated entity.
PrivateKey sim_key(const std::string& entity);

struct TraceEntry {
  SimTime t = 0;
  std::string node;
  std::string event;
  std::string detail;
};

struct SimNodeResult {
  std::string id;
  bool honest = true;
  std::uint64_t height = 0;
  std::vector<std::string> hashes;
  std::size_t mempool = 0;
  NodeStats stats;
  /// Blocks produced by an adversary that sit in this node's chain.
  std::size_t adversary_blocks = 0;
};

struct SimResult {
  SimTime end_time = 0;
  /// True if the run ended because no events were left.
  bool quiescent = false;
  std::vector<TraceEntry> trace;
  std::vector<SimNodeResult> nodes;
  /// All honest nodes hold identical chains.
  bool converged = false;
  /// Largest number of adversary blocks in any honest chain.
  std::size_t adversary_blocks_adopted = 0;
  /// Submissions accepted somewhere that are neither in every honest chain
  /// nor in any honest mempool.
  std::vector<std::string> lost_transactions;
  std::size_t submitted = 0;
  std::size_t rejected_submissions = 0;

  const SimNodeResult& node(const std::string& id) const;
};

/// Throws Error(ScenarioInvalid) if events reference unknown nodes. A
/// submission by an unregistered author is run and counted as rejected.
SimResult simulate(const Scenario& scenario);
Json to_json(const SimResult& result, bool with_trace = true);

/// Solve attempts needed to forge `length` consecutive blocks at
/// `difficulty`, averaged over `trials` seeded runs. Expected: length * 2^D.
struct ForgeMeasurement {
  double mean_attempts = 0;
  double expected = 0;
  std::vector<std::uint64_t> samples;
};
ForgeMeasurement measure_forge_attempts(unsigned length, unsigned difficulty, unsigned trials,
                                        std::uint64_t seed);

}  // namespace ledgergate
