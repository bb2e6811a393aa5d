#pragma once

// Brute-force reference for transaction admissibility. It keeps no state:
// every query re-derives records and requests by scanning the full history
// of previously accepted transactions, using strings instead of the
// library's enums and snapshot structures.

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ledgergate/directory.hpp"
#include "ledgergate/model.hpp"

namespace lgtest {

using namespace ledgergate;

struct RefRecord {
  std::vector<std::string> keepers;
  std::string rule;
  bool removed = false;
};

struct RefRequest {
  std::string party;
  std::string record;
  std::string state = "REQUESTED";  // REQUESTED, WAITING, GRANTED, DENIED, REVOKED
  std::vector<std::string> slots;
  std::string rule;
  std::map<std::string, std::string> votes;  // keeper -> G, D or R
  std::optional<Timestamp> expiry;
};

struct RefState {
  std::map<std::string, RefRecord> records;
  std::map<std::string, RefRequest> requests;
  std::map<std::pair<std::string, std::string>, std::string> latest;  // (party, record) -> request
  std::set<std::pair<std::string, std::string>> seen;                 // (txId, tag)
};

inline std::size_t ref_required(const std::string& rule, std::size_t n) {
  if (rule == "ANY") return 1;
  if (rule == "MAJORITY") return n / 2 + 1;
  return n;
}

/// "GRANTED", "DENIED" or "PENDING" by counting votes of slot holders.
inline std::string ref_tally(const RefRequest& r) {
  const std::size_t need = ref_required(r.rule, r.slots.size());
  std::size_t yes = 0;
  std::size_t no = 0;
  for (const auto& k : r.slots) {
    auto it = r.votes.find(k);
    if (it == r.votes.end()) continue;
    (it->second == "G" ? yes : no) += 1;
  }
  if (yes >= need) return "GRANTED";
  if (no + need > r.slots.size()) return "DENIED";
  return "PENDING";
}

inline std::string tag_name(const Transaction& tx) { return std::string(to_string(tx.tag)); }

inline RefState ref_derive(const std::vector<Transaction>& history) {
  RefState s;
  for (const auto& tx : history) {
    s.seen.insert({tx.id.str(), tag_name(tx)});
    const std::string tag = tag_name(tx);
    if (tag == "CREATE") {
      const auto& d = std::get<RecordDescriptor>(tx.payload);
      RefRecord r;
      r.keepers.push_back(tx.author.str());
      for (const auto& k : d.keepers) {
        if (std::find(r.keepers.begin(), r.keepers.end(), k.str()) == r.keepers.end()) {
          r.keepers.push_back(k.str());
        }
      }
      r.rule = std::string(to_string(d.agreement));
      s.records[d.record.str()] = r;
    } else if (tag == "UPDATE") {
      const auto& d = std::get<RecordDescriptor>(tx.payload);
      RefRecord& r = s.records[d.record.str()];
      r.keepers.clear();
      for (const auto& k : d.keepers) {
        if (std::find(r.keepers.begin(), r.keepers.end(), k.str()) == r.keepers.end()) {
          r.keepers.push_back(k.str());
        }
      }
      r.rule = std::string(to_string(d.agreement));
    } else if (tag == "REMOVE") {
      s.records[std::get<RecordRef>(tx.payload).record.str()].removed = true;
    } else if (tag == "REQUEST") {
      const auto& a = std::get<AccessRequest>(tx.payload);
      RefRequest q;
      q.party = a.party.str();
      q.record = a.record.str();
      q.expiry = a.expiry;
      s.requests[a.request.str()] = q;
      s.latest[{q.party, q.record}] = a.request.str();
    } else if (tag == "REQUIRE") {
      RefRequest& q = s.requests[std::get<RequestRef>(tx.payload).request.str()];
      q.state = "WAITING";
      q.slots = s.records[q.record].keepers;
      q.rule = s.records[q.record].rule;
    } else {
      RefRequest& q = s.requests[std::get<RequestRef>(tx.payload).request.str()];
      q.votes[tx.author.str()] = tag == "AUTH_GRANT" ? "G" : tag == "AUTH_DENY" ? "D" : "R";
      const std::string tally = ref_tally(q);
      if (q.state == "WAITING" && tally != "PENDING") q.state = tally;
      if (q.state == "GRANTED" && tally != "GRANTED") q.state = "REVOKED";
    }
  }
  return s;
}

/// The reason code admissibility should report for `tx` after `history`, or
/// "OK".
inline std::string ref_reason(const std::vector<Transaction>& history, const Transaction& tx,
                              const Directory& dir) {
  const Entity* author = dir.find(tx.author);
  if (author == nullptr) return "UNKNOWN_ENTITY";
  const std::string tag = tag_name(tx);
  const std::string kind(to_string(tx.kind));
  const bool tag_fits = (kind == "RECORD_OP" && (tag == "CREATE" || tag == "UPDATE" || tag == "REMOVE")) ||
                        (kind == "POLICY_OP" && tag != "CREATE" && tag != "UPDATE" && tag != "REMOVE" &&
                         tag != "REQUIRE_ACTION") ||
                        (kind == "INDIVIDUAL_AUTH" && (tag == "REQUIRE_ACTION" || tag == "AUTH_GRANT" ||
                                                       tag == "AUTH_DENY" || tag == "AUTH_REVOKE"));
  if (!tag_fits || !payload_matches(tx.tag, tx.payload)) return "INVALID_PAYLOAD";

  const RefState s = ref_derive(history);
  if (s.seen.count({tx.id.str(), tag})) return "DUPLICATE_TX";

  auto is_keeper_entity = [&](const std::string& id) {
    const Entity* e = dir.find(EntityId(id));
    return e != nullptr && e->role == Role::DataKeeper;
  };

  if (kind == "RECORD_OP") {
    if (tag == "CREATE") {
      const auto& d = std::get<RecordDescriptor>(tx.payload);
      if (s.records.count(d.record.str())) return "RECORD_EXISTS";
      if (author->role != Role::DataKeeper) return "BAD_AUTHOR";
      for (const auto& k : d.keepers) {
        if (!is_keeper_entity(k.str())) return "NOT_KEEPER";
      }
      return "OK";
    }
    const std::string rid = tag == "UPDATE" ? std::get<RecordDescriptor>(tx.payload).record.str()
                                            : std::get<RecordRef>(tx.payload).record.str();
    auto it = s.records.find(rid);
    if (it == s.records.end()) return "UNKNOWN_RECORD";
    if (it->second.removed) return "RECORD_TERMINAL";
    const auto& ks = it->second.keepers;
    if (std::find(ks.begin(), ks.end(), tx.author.str()) == ks.end()) return "NOT_KEEPER";
    if (tag == "UPDATE") {
      const auto& d = std::get<RecordDescriptor>(tx.payload);
      if (d.keepers.empty()) return "INVALID_PAYLOAD";
      for (const auto& k : d.keepers) {
        if (!is_keeper_entity(k.str())) return "NOT_KEEPER";
      }
    }
    return "OK";
  }

  if (kind == "POLICY_OP") {
    if (tag == "REQUEST") {
      const auto& a = std::get<AccessRequest>(tx.payload);
      if (a.party != tx.author || author->role != Role::ThirdParty) return "BAD_AUTHOR";
      if (a.level == PermissionLevel::None) return "INVALID_PAYLOAD";
      auto rec = s.records.find(a.record.str());
      if (rec == s.records.end()) return "UNKNOWN_RECORD";
      if (rec->second.removed) return "RECORD_TERMINAL";
      if (s.requests.count(a.request.str())) return "POLICY_EXISTS";
      auto prior = s.latest.find({a.party.str(), a.record.str()});
      if (prior != s.latest.end()) {
        const RefRequest& p = s.requests.at(prior->second);
        const bool live = p.state == "GRANTED" && (!p.expiry || *p.expiry > tx.timestamp);
        if (p.state == "REQUESTED" || p.state == "WAITING" || live) return "POLICY_EXISTS";
      }
      return "OK";
    }
    if (tag != "REQUIRE") return "DERIVED_TRANSITION";
    if (author->role != Role::ConsortiumNode) return "BAD_AUTHOR";
    auto q = s.requests.find(std::get<RequestRef>(tx.payload).request.str());
    if (q == s.requests.end()) return "UNKNOWN_REQUEST";
    if (q->second.state == "DENIED" || q->second.state == "REVOKED") return "REQUEST_TERMINAL";
    if (q->second.state != "REQUESTED") return "OUT_OF_ORDER";
    if (s.records.at(q->second.record).removed) return "RECORD_TERMINAL";
    return "OK";
  }

  if (tag == "REQUIRE_ACTION") return "DERIVED_TRANSITION";
  auto q = s.requests.find(std::get<RequestRef>(tx.payload).request.str());
  if (q == s.requests.end()) return "UNKNOWN_REQUEST";
  const RefRequest& r = q->second;
  if (s.records.at(r.record).removed) return "RECORD_TERMINAL";
  if (r.state == "DENIED" || r.state == "REVOKED") return "REQUEST_TERMINAL";
  if (r.state == "REQUESTED") return "OUT_OF_ORDER";
  if (std::find(r.slots.begin(), r.slots.end(), tx.author.str()) == r.slots.end()) return "NOT_KEEPER";
  auto v = r.votes.find(tx.author.str());
  if (tag == "AUTH_REVOKE") return v != r.votes.end() && v->second == "G" ? "OK" : "REVOKE_WITHOUT_GRANT";
  if (v != r.votes.end()) return "DUPLICATE_VOTE";
  return "OK";
}

}  // namespace lgtest
