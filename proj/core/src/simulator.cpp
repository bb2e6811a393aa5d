#include "ledgergate/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <queue>
#include <random>

#include "ledgergate/error.hpp"

namespace ledgergate {

namespace {

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::ScenarioInvalid, what); }

constexpr std::pair<MiningMode, std::string_view> kModes[] = {
    {MiningMode::Manual, "manual"},
    {MiningMode::OnDemand, "on_demand"},
    {MiningMode::Continuous, "continuous"},
};
constexpr std::pair<AdversaryKind, std::string_view> kAdversaries[] = {
    {AdversaryKind::None, "none"},
    {AdversaryKind::NonMember, "non_member"},
    {AdversaryKind::StolenKey, "stolen_key"},
};
constexpr std::pair<SimEventType, std::string_view> kEventTypes[] = {
    {SimEventType::Submit, "submit"},       {SimEventType::Mine, "mine"},
    {SimEventType::Partition, "partition"}, {SimEventType::Heal, "heal"},
    {SimEventType::Connect, "connect"},     {SimEventType::Attack, "attack"},
};
constexpr std::string_view kOps[] = {"create", "update", "remove", "request",
                                     "require", "grant", "deny", "revoke"};

template <class E, std::size_t N>
E lookup(const std::pair<E, std::string_view> (&table)[N], const std::string& name,
         const char* what) {
  for (const auto& [value, text] : table) {
    if (text == name) return value;
  }
  invalid(std::string(what) + " '" + name + "'");
}

template <class E, std::size_t N>
std::string_view name_of(const std::pair<E, std::string_view> (&table)[N], E value) {
  for (const auto& [v, text] : table) {
    if (v == value) return text;
  }
  return "?";
}

SimEdge edge_from_json(const Json& j) {
  SimEdge e;
  e.a = j.at("a").get<std::string>();
  e.b = j.at("b").get<std::string>();
  e.latency = j.value("latency", SimTime{10});
  e.jitter = j.value("jitter", SimTime{0});
  if (e.latency < 0 || e.jitter < 0) invalid("negative latency on edge " + e.a + "-" + e.b);
  return e;
}

Json edge_to_json(const SimEdge& e) {
  return Json{{"a", e.a}, {"b", e.b}, {"latency", e.latency}, {"jitter", e.jitter}};
}

SimTxSpec tx_from_json(const Json& j) {
  SimTxSpec t;
  t.op = j.at("op").get<std::string>();
  if (std::find(std::begin(kOps), std::end(kOps), t.op) == std::end(kOps)) {
    invalid("transaction op '" + t.op + "'");
  }
  t.id = j.value("id", std::string{});
  t.author = j.value("author", std::string{});
  t.record = j.value("record", std::string{});
  t.keepers = j.value("keepers", std::vector<std::string>{});
  if (j.contains("agreement")) {
    const auto rule = parse_agreement(j.at("agreement").get<std::string>());
    if (!rule) invalid("agreement '" + j.at("agreement").get<std::string>() + "'");
    t.agreement = *rule;
  }
  t.location = j.value("location", std::string{});
  t.request = j.value("request", std::string{});
  t.party = j.value("party", std::string{});
  if (j.contains("level")) {
    const auto level = parse_level(j.at("level").get<std::string>());
    if (!level) invalid("level '" + j.at("level").get<std::string>() + "'");
    t.level = *level;
  }
  if (j.contains("expiry")) t.expiry = j.at("expiry").get<Timestamp>();
  return t;
}

Json tx_to_json(const SimTxSpec& t) {
  Json j{{"op", t.op}};
  if (!t.id.empty()) j["id"] = t.id;
  if (!t.author.empty()) j["author"] = t.author;
  if (!t.record.empty()) j["record"] = t.record;
  if (!t.keepers.empty()) j["keepers"] = t.keepers;
  if (t.op == "create" || t.op == "update") j["agreement"] = to_string(t.agreement);
  if (!t.location.empty()) j["location"] = t.location;
  if (!t.request.empty()) j["request"] = t.request;
  if (!t.party.empty()) j["party"] = t.party;
  if (t.op == "request") j["level"] = to_string(t.level);
  if (t.expiry) j["expiry"] = *t.expiry;
  return j;
}

}  // namespace

Scenario scenario_from_json(const Json& j) {
  try {
    Scenario s;
    s.seed = j.value("seed", std::uint64_t{1});
    s.difficulty = j.value("difficulty", 8u);
    if (s.difficulty > kMaxDifficulty) invalid("difficulty above " + std::to_string(kMaxDifficulty));
    s.genesis_time = j.value("genesisTime", Timestamp{1700000000});
    s.until = j.value("until", SimTime{600000});
    s.trace = j.value("trace", true);
    for (const auto& e : j.value("entities", Json::array())) {
      const auto role = parse_role(e.at("role").get<std::string>());
      if (!role) invalid("role '" + e.at("role").get<std::string>() + "'");
      s.entities.emplace_back(e.at("id").get<std::string>(), *role);
    }
    for (const auto& n : j.at("nodes")) {
      SimNodeSpec spec;
      spec.id = n.at("id").get<std::string>();
      spec.mining = lookup(kModes, n.value("mining", std::string("on_demand")), "mining mode");
      spec.hash_rate = n.value("hashRate", 1000.0);
      if (!(spec.hash_rate > 0)) invalid("hashRate of " + spec.id + " must be positive");
      spec.adversary = lookup(kAdversaries, n.value("adversary", std::string("none")), "adversary");
      spec.stolen_from = n.value("stolenFrom", std::string{});
      spec.clock_skew = n.value("clockSkew", Timestamp{0});
      s.nodes.push_back(std::move(spec));
    }
    for (const auto& e : j.value("edges", Json::array())) s.edges.push_back(edge_from_json(e));
    for (const auto& e : j.value("events", Json::array())) {
      SimEvent ev;
      ev.at = e.at("at").get<SimTime>();
      if (ev.at < 0) invalid("event time is negative");
      ev.type = lookup(kEventTypes, e.at("type").get<std::string>(), "event type");
      ev.node = e.value("node", std::string{});
      switch (ev.type) {
        case SimEventType::Submit: ev.tx = tx_from_json(e.at("tx")); break;
        case SimEventType::Partition:
          ev.groups = e.at("groups").get<std::vector<std::vector<std::string>>>();
          break;
        case SimEventType::Connect: ev.edge = edge_from_json(e); break;
        case SimEventType::Attack: ev.fork_at = e.value("forkAt", std::uint64_t{0}); break;
        case SimEventType::Mine:
        case SimEventType::Heal: break;
      }
      s.events.push_back(std::move(ev));
    }
    return s;
  } catch (const Json::exception& e) {
    invalid(std::string("scenario: ") + e.what());
  }
}

Json to_json(const Scenario& s) {
  Json entities = Json::array();
  for (const auto& [id, role] : s.entities) entities.push_back({{"id", id}, {"role", to_string(role)}});
  Json nodes = Json::array();
  for (const auto& n : s.nodes) {
    Json node{{"id", n.id},
              {"mining", name_of(kModes, n.mining)},
              {"hashRate", n.hash_rate},
              {"adversary", name_of(kAdversaries, n.adversary)}};
    if (!n.stolen_from.empty()) node["stolenFrom"] = n.stolen_from;
    if (n.clock_skew != 0) node["clockSkew"] = n.clock_skew;
    nodes.push_back(std::move(node));
  }
  Json edges = Json::array();
  for (const auto& e : s.edges) edges.push_back(edge_to_json(e));
  Json events = Json::array();
  for (const auto& ev : s.events) {
    Json e{{"at", ev.at}, {"type", name_of(kEventTypes, ev.type)}};
    if (!ev.node.empty()) e["node"] = ev.node;
    switch (ev.type) {
      case SimEventType::Submit: e["tx"] = tx_to_json(ev.tx); break;
      case SimEventType::Partition: e["groups"] = ev.groups; break;
      case SimEventType::Connect: e.update(edge_to_json(ev.edge)); break;
      case SimEventType::Attack: e["forkAt"] = ev.fork_at; break;
      case SimEventType::Mine:
      case SimEventType::Heal: break;
    }
    events.push_back(std::move(e));
  }
  return Json{{"seed", s.seed},           {"difficulty", s.difficulty}, {"genesisTime", s.genesis_time},
              {"until", s.until},         {"trace", s.trace},           {"entities", entities},
              {"nodes", nodes},           {"edges", edges},             {"events", events}};
}

PrivateKey sim_key(const std::string& entity) { return PrivateKey::derive("ledgergate-sim/" + entity); }

const SimNodeResult& SimResult::node(const std::string& id) const {
  for (const auto& n : nodes) {
    if (n.id == id) return n;
  }
  throw Error(ErrorCode::ScenarioInvalid, "no node '" + id + "'");
}

namespace {

struct Actor {
  SimNodeSpec spec;
  std::unique_ptr<Node> node;  // honest nodes only

  // Adversary state.
  std::optional<PrivateKey> key;
  std::vector<Block> branch;
  std::set<PeerId> peers;
  bool follow = true;
  bool mine = false;
  bool withhold = false;
  std::uint64_t honest_height = 0;

  bool mining = false;
  bool job_forced = false;
  std::uint64_t job = 0;
  std::string job_prev;
  std::size_t forced = 0;

  bool honest() const { return spec.adversary == AdversaryKind::None; }
  const Block& tip() const { return node ? node->chain().tip() : branch.back(); }
};

struct Link {
  SimEdge edge;
  bool up = true;
  SimTime last_ab = 0;
  SimTime last_ba = 0;
};

struct Event {
  enum class Kind { Deliver, MineDone, Script };
  SimTime t = 0;
  std::uint64_t seq = 0;
  Kind kind = Kind::Script;
  std::string to;
  std::string from;
  std::shared_ptr<const WireMessage> msg;
  std::uint64_t job = 0;
  std::shared_ptr<const Block> block;
  std::size_t script = 0;
};

struct Later {
  bool operator()(const Event& a, const Event& b) const {
    return a.t != b.t ? a.t > b.t : a.seq > b.seq;
  }
};

std::string short_hash(const std::string& h) { return h.substr(0, 12); }

class Simulation {
 public:
  explicit Simulation(const Scenario& s);
  SimResult run();

 private:
  Timestamp ts(const Actor& a) const {
    return scenario_.genesis_time + now_ / 1000 + a.spec.clock_skew;
  }
  Actor& actor(const std::string& id);
  Link* link(const std::string& a, const std::string& b);
  void trace(const std::string& node, std::string event, std::string detail);
  void schedule(Event ev);
  void send(const std::string& from, const Outbox& out);
  void connect(const std::string& a, const std::string& b);
  void deliver(const Event& ev);
  void deliver_adversary(Actor& a, const std::string& from, const WireMessage& msg);
  void mined(const Event& ev);
  void script(const SimEvent& ev);
  void submit(Actor& a, const SimTxSpec& spec);
  void settle(Actor& a);
  void plan(Actor& a);
  void start(Actor& a, const Block& prev, BlockData data, const PrivateKey& key, bool forced);

  const Scenario& scenario_;
  std::shared_ptr<const ChainParams> params_;
  std::map<std::string, Actor> actors_;
  std::map<std::pair<std::string, std::string>, Link> links_;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::mt19937_64 rng_;
  SimTime now_ = 0;
  std::uint64_t seq_ = 0;
  std::uint64_t tx_counter_ = 0;
  std::set<std::string> adversary_blocks_;
  std::vector<TxKey> accepted_;
  SimResult result_;
};

Simulation::Simulation(const Scenario& s) : scenario_(s), rng_(s.seed) {
  std::set<std::string> names;
  auto claim = [&](const std::string& id) {
    if (!is_valid_identifier(id)) invalid("invalid identifier '" + id + "'");
    if (!names.insert(id).second) invalid("duplicate id '" + id + "'");
  };
  GenesisConfig config;
  config.scheme = SignatureScheme::Ed25519Sha256;
  config.difficulty = s.difficulty;
  config.timestamp = s.genesis_time;
  for (const auto& [id, role] : s.entities) {
    claim(id);
    config.entities.push_back(Entity{EntityId(id), role, sim_key(id).public_key()});
  }
  for (const auto& spec : s.nodes) {
    claim(spec.id);
    if (spec.adversary == AdversaryKind::None) {
      config.entities.push_back(
          Entity{EntityId(spec.id), Role::ConsortiumNode, sim_key(spec.id).public_key()});
    }
  }
  if (s.nodes.empty()) invalid("no nodes");
  try {
    params_ = ChainParams::create(config);
  } catch (const Error& e) {
    invalid(e.what());
  }

  for (const auto& spec : s.nodes) {
    Actor a;
    a.spec = spec;
    switch (spec.adversary) {
      case AdversaryKind::None: {
        NodeOptions options;
        options.continuous = spec.mining == MiningMode::Continuous;
        a.node = std::make_unique<Node>(spec.id, Chain(params_), sim_key(spec.id), options);
        break;
      }
      case AdversaryKind::NonMember:
        a.key = sim_key(spec.id);
        a.branch = {params_->genesis()};
        a.mine = spec.mining != MiningMode::Manual;
        break;
      case AdversaryKind::StolenKey: {
        const Entity* victim = params_->directory().find(EntityId(spec.stolen_from));
        if (victim == nullptr || victim->role != Role::ConsortiumNode) {
          invalid("adversary " + spec.id + " must steal a consortium node key");
        }
        a.key = sim_key(spec.stolen_from);
        a.branch = {params_->genesis()};
        break;
      }
    }
    actors_.emplace(spec.id, std::move(a));
  }
  for (const auto& e : s.edges) {
    if (actors_.count(e.a) == 0 || actors_.count(e.b) == 0) invalid("edge to unknown node");
    if (e.a == e.b) invalid("self edge on " + e.a);
    if (link(e.a, e.b) != nullptr) invalid("duplicate edge " + e.a + "-" + e.b);
    links_[std::minmax(e.a, e.b)] = Link{e};
  }
  for (const auto& ev : s.events) {
    const bool needs_node = ev.type == SimEventType::Submit || ev.type == SimEventType::Mine ||
                            ev.type == SimEventType::Attack;
    if (needs_node && actors_.count(ev.node) == 0) invalid("event on unknown node '" + ev.node + "'");
    if (ev.type == SimEventType::Submit && !actors_.at(ev.node).honest()) {
      invalid("submissions go to honest nodes");
    }
    if (ev.type == SimEventType::Attack && actors_.at(ev.node).spec.adversary != AdversaryKind::StolenKey) {
      invalid("attack needs a stolen_key adversary");
    }
    if (ev.type == SimEventType::Connect) {
      if (actors_.count(ev.edge.a) == 0 || actors_.count(ev.edge.b) == 0) invalid("connect to unknown node");
      if (ev.edge.a == ev.edge.b) invalid("self edge on " + ev.edge.a);
    }
    for (const auto& group : ev.groups) {
      for (const auto& id : group) {
        if (actors_.count(id) == 0) invalid("partition names unknown node '" + id + "'");
      }
    }
  }
}

Actor& Simulation::actor(const std::string& id) { return actors_.at(id); }

Link* Simulation::link(const std::string& a, const std::string& b) {
  auto it = links_.find(std::minmax(a, b));
  return it == links_.end() ? nullptr : &it->second;
}

void Simulation::trace(const std::string& node, std::string event, std::string detail) {
  if (scenario_.trace) result_.trace.push_back({now_, node, std::move(event), std::move(detail)});
}

void Simulation::schedule(Event ev) {
  ev.seq = seq_++;
  queue_.push(std::move(ev));
}

void Simulation::send(const std::string& from, const Outbox& out) {
  for (const auto& o : out) {
    Link* l = link(from, o.to);
    if (l == nullptr || !l->up) {
      trace(from, "drop", std::string(to_string(o.msg.kind)) + " to " + o.to);
      continue;
    }
    const SimTime jitter =
        l->edge.jitter > 0 ? static_cast<SimTime>(rng_() % static_cast<std::uint64_t>(l->edge.jitter + 1)) : 0;
    SimTime& last = from < o.to ? l->last_ab : l->last_ba;
    const SimTime at = std::max(now_ + l->edge.latency + jitter, last);
    last = at;
    Event ev;
    ev.t = at;
    ev.kind = Event::Kind::Deliver;
    ev.from = from;
    ev.to = o.to;
    ev.msg = std::make_shared<const WireMessage>(o.msg);
    schedule(std::move(ev));
  }
}

void Simulation::connect(const std::string& a, const std::string& b) {
  for (const auto& [self, peer] : {std::pair{a, b}, std::pair{b, a}}) {
    Actor& act = actor(self);
    if (act.node) {
      send(self, act.node->connect(peer));
    } else {
      act.peers.insert(peer);
      send(self, {{peer, WireMessage::hello(self, act.branch.back().index)},
                  {peer, WireMessage::get_latest()}});
    }
  }
}

void Simulation::deliver(const Event& ev) {
  Link* l = link(ev.from, ev.to);
  if (l == nullptr || !l->up) {
    trace(ev.to, "lost", std::string(to_string(ev.msg->kind)) + " from " + ev.from);
    return;
  }
  Actor& a = actor(ev.to);
  trace(ev.to, "recv", std::string(to_string(ev.msg->kind)) + " from " + ev.from);
  if (!a.node) {
    deliver_adversary(a, ev.from, *ev.msg);
    settle(a);
    return;
  }
  const std::string before = a.node->chain().tip().hash;
  send(ev.to, a.node->receive(ev.from, *ev.msg));
  if (a.node->chain().tip().hash != before) {
    trace(ev.to, "tip", "#" + std::to_string(a.node->chain().height()) + " " +
                            short_hash(a.node->chain().tip().hash));
  }
  settle(a);
}

void Simulation::deliver_adversary(Actor& a, const std::string& from, const WireMessage& msg) {
  switch (msg.kind) {
    case MessageKind::GetLatest:
      if (!a.withhold) send(a.spec.id, {{from, WireMessage::latest(a.branch.back())}});
      break;
    case MessageKind::GetChain:
      if (!a.withhold) send(a.spec.id, {{from, WireMessage::chain(a.branch)}});
      break;
    case MessageKind::Latest:
    case MessageKind::AnnounceBlock: {
      if (msg.blocks.empty()) break;
      const Block& b = msg.block();
      a.honest_height = std::max(a.honest_height, b.index);
      if (!a.follow) break;
      if (b.index == a.branch.back().index + 1 && b.previous_hash == a.branch.back().hash) {
        a.branch.push_back(b);
      } else if (b.index > a.branch.back().index) {
        send(a.spec.id, {{from, WireMessage::get_chain()}});
      }
      break;
    }
    case MessageKind::Chain:
      if (msg.blocks.empty()) break;
      a.honest_height = std::max(a.honest_height, msg.blocks.back().index);
      if (a.follow && msg.blocks.size() > a.branch.size()) a.branch = msg.blocks;
      break;
    case MessageKind::Hello:
    case MessageKind::SubmitTx: break;
  }
}

void Simulation::mined(const Event& ev) {
  Actor& a = actor(ev.to);
  if (!a.mining || ev.job != a.job) return;
  a.mining = false;
  const Block& block = *ev.block;
  if (a.node) {
    const auto before = a.node->stats().blocks_mined;
    send(a.spec.id, a.node->accept_mined(block));
    if (a.node->stats().blocks_mined != before) {
      trace(a.spec.id, "mined", "#" + std::to_string(block.index) + " " + short_hash(block.hash) +
                                    " txs=" + std::to_string(block.data.size()));
    }
  } else if (block.previous_hash == a.branch.back().hash) {
    a.branch.push_back(block);
    adversary_blocks_.insert(block.hash);
    trace(a.spec.id, "forged", "#" + std::to_string(block.index) + " " + short_hash(block.hash));
    if (a.withhold && block.index > a.honest_height) {
      a.withhold = false;
      trace(a.spec.id, "release", "branch height " + std::to_string(block.index));
    }
    if (!a.withhold) {
      Outbox out;
      for (const auto& p : a.peers) out.push_back({p, WireMessage::announce(block)});
      send(a.spec.id, out);
    }
  }
  settle(a);
}

void Simulation::script(const SimEvent& ev) {
  switch (ev.type) {
    case SimEventType::Submit: submit(actor(ev.node), ev.tx); break;
    case SimEventType::Mine: {
      Actor& a = actor(ev.node);
      ++a.forced;
      settle(a);
      break;
    }
    case SimEventType::Partition: {
      std::map<std::string, std::size_t> group;
      for (std::size_t g = 0; g < ev.groups.size(); ++g) {
        for (const auto& id : ev.groups[g]) group[id] = g;
      }
      std::size_t next = ev.groups.size();
      for (const auto& [id, a] : actors_) {
        if (group.count(id) == 0) group[id] = next++;
      }
      for (auto& [ends, l] : links_) {
        const bool up = group[ends.first] == group[ends.second];
        if (l.up && !up) {
          for (const auto& [self, peer] : {ends, std::pair{ends.second, ends.first}}) {
            Actor& a = actor(self);
            if (a.node) a.node->disconnect(peer);
            a.peers.erase(peer);
          }
        }
        l.up = up;
      }
      trace("", "partition", std::to_string(ev.groups.size()) + " groups");
      break;
    }
    case SimEventType::Heal: {
      std::vector<std::pair<std::string, std::string>> healed;
      for (auto& [ends, l] : links_) {
        if (!l.up) healed.push_back(ends);
        l.up = true;
      }
      trace("", "heal", std::to_string(healed.size()) + " links");
      for (const auto& [a, b] : healed) connect(a, b);
      break;
    }
    case SimEventType::Connect: {
      Link* l = link(ev.edge.a, ev.edge.b);
      if (l == nullptr) {
        links_[std::minmax(ev.edge.a, ev.edge.b)] = Link{ev.edge};
      } else {
        l->up = true;
      }
      trace("", "connect", ev.edge.a + "-" + ev.edge.b);
      connect(ev.edge.a, ev.edge.b);
      break;
    }
    case SimEventType::Attack: {
      Actor& a = actor(ev.node);
      const std::uint64_t fork = std::min<std::uint64_t>(ev.fork_at, a.branch.back().index);
      a.branch.resize(fork + 1);
      a.follow = false;
      a.mine = true;
      a.withhold = true;
      trace(a.spec.id, "attack", "fork at #" + std::to_string(fork) + ", honest height " +
                                     std::to_string(a.honest_height));
      settle(a);
      break;
    }
  }
}

void Simulation::submit(Actor& a, const SimTxSpec& spec) {
  const TxId id(spec.id.empty() ? "tx-" + std::to_string(++tx_counter_) : spec.id);
  const Timestamp t = ts(a);
  Transaction tx;
  std::string signer = spec.author;
  if (spec.op == "create" || spec.op == "update") {
    RecordDescriptor desc{RecordId(spec.record), {}, spec.agreement, spec.location};
    for (const auto& k : spec.keepers) desc.keepers.emplace_back(k);
    tx = spec.op == "create" ? record_create(id, EntityId(spec.author), t, std::move(desc))
                             : record_update(id, EntityId(spec.author), t, std::move(desc));
  } else if (spec.op == "remove") {
    tx = record_remove(id, EntityId(spec.author), t, RecordId(spec.record));
  } else if (spec.op == "request") {
    tx = access_request(id, t,
                        AccessRequest{RequestId(spec.request), EntityId(spec.party),
                                      RecordId(spec.record), spec.level, spec.expiry});
    signer = spec.party;
  } else if (spec.op == "require") {
    tx = access_require(id, EntityId(a.spec.id), t, RequestId(spec.request));
    signer = a.spec.id;
  } else if (spec.op == "revoke") {
    tx = keeper_revoke(id, EntityId(spec.author), t, RequestId(spec.request));
  } else {
    tx = keeper_vote(id, EntityId(spec.author), t, RequestId(spec.request), spec.op == "grant");
  }
  sign_transaction(tx, sim_key(signer));
  Outbox out;
  const SubmitResult r = a.node->submit(tx, out);
  ++result_.submitted;
  if (r.ok()) {
    accepted_.push_back(key_of(tx));
  } else {
    ++result_.rejected_submissions;
  }
  trace(a.spec.id, "submit",
        id.str() + " " + std::string(to_string(tx.tag)) + " " + std::string(to_string(r.status)) +
            (r.ok() ? "" : " " + std::string(to_string(r.admission.reason))));
  send(a.spec.id, out);
  settle(a);
}

void Simulation::settle(Actor& a) {
  if (a.mining && a.job_prev != a.tip().hash) {
    a.mining = false;
    ++a.job;
    if (a.job_forced) ++a.forced;
  }
  plan(a);
}

void Simulation::plan(Actor& a) {
  if (a.mining) return;
  if (!a.node) {
    if (a.mine) start(a, a.branch.back(), {}, *a.key, false);
    return;
  }
  if (a.forced > 0) {
    if (auto job = a.node->mining_job(ts(a), true)) {
      --a.forced;
      start(a, job->prev, std::move(job->data), *a.node->key(), true);
    }
    return;
  }
  if (a.spec.mining == MiningMode::Manual) return;
  if (auto job = a.node->mining_job(ts(a))) {
    start(a, job->prev, std::move(job->data), *a.node->key(), false);
  }
}

void Simulation::start(Actor& a, const Block& prev, BlockData data, const PrivateKey& key,
                       bool forced) {
  auto block = seal_block(prev, std::move(data), key, scenario_.difficulty, ts(a));
  const double attempts = static_cast<double>(block->nonce) + 1.0;
  const auto duration =
      std::max<SimTime>(1, static_cast<SimTime>(std::ceil(attempts * 1000.0 / a.spec.hash_rate)));
  a.mining = true;
  a.job_forced = forced;
  a.job_prev = prev.hash;
  ++a.job;
  Event ev;
  ev.t = now_ + duration;
  ev.kind = Event::Kind::MineDone;
  ev.to = a.spec.id;
  ev.job = a.job;
  ev.block = std::make_shared<const Block>(std::move(*block));
  schedule(std::move(ev));
}

SimResult Simulation::run() {
  for (std::size_t i = 0; i < scenario_.events.size(); ++i) {
    Event ev;
    ev.t = scenario_.events[i].at;
    ev.kind = Event::Kind::Script;
    ev.script = i;
    schedule(std::move(ev));
  }
  for (const auto& [ends, l] : links_) connect(ends.first, ends.second);
  for (auto& [id, a] : actors_) plan(a);

  while (!queue_.empty()) {
    if (queue_.top().t > scenario_.until) break;
    Event ev = queue_.top();
    queue_.pop();
    now_ = ev.t;
    switch (ev.kind) {
      case Event::Kind::Deliver: deliver(ev); break;
      case Event::Kind::MineDone: mined(ev); break;
      case Event::Kind::Script: script(scenario_.events[ev.script]); break;
    }
  }
  result_.quiescent = queue_.empty();
  result_.end_time = result_.quiescent ? now_ : scenario_.until;

  for (const auto& spec : scenario_.nodes) {
    const Actor& a = actors_.at(spec.id);
    SimNodeResult r;
    r.id = spec.id;
    r.honest = a.honest();
    const auto& blocks = a.node ? a.node->chain().blocks() : a.branch;
    for (const auto& b : blocks) {
      r.hashes.push_back(b.hash);
      if (adversary_blocks_.count(b.hash) != 0) ++r.adversary_blocks;
    }
    r.height = blocks.back().index;
    if (a.node) {
      r.mempool = a.node->mempool().size();
      r.stats = a.node->stats();
    }
    result_.nodes.push_back(std::move(r));
  }
  result_.converged = true;
  const SimNodeResult* reference = nullptr;
  for (const auto& r : result_.nodes) {
    if (!r.honest) continue;
    result_.adversary_blocks_adopted = std::max(result_.adversary_blocks_adopted, r.adversary_blocks);
    if (reference == nullptr) {
      reference = &r;
    } else if (reference->hashes != r.hashes) {
      result_.converged = false;
    }
  }

  for (const auto& key : accepted_) {
    bool in_all_chains = true;
    bool in_some_mempool = false;
    for (const auto& [id, a] : actors_) {
      if (!a.node) continue;
      in_all_chains = in_all_chains && a.node->chain().contains(key);
      in_some_mempool = in_some_mempool || a.node->mempool().contains(key);
    }
    if (!in_all_chains && !in_some_mempool) {
      result_.lost_transactions.push_back(key.id.str() + "/" + std::string(to_string(key.tag)));
    }
  }
  return std::move(result_);
}

}  // namespace

SimResult simulate(const Scenario& scenario) { return Simulation(scenario).run(); }

Json to_json(const SimResult& result, bool with_trace) {
  Json nodes = Json::array();
  for (const auto& n : result.nodes) {
    nodes.push_back({{"id", n.id},
                     {"honest", n.honest},
                     {"height", n.height},
                     {"tip", n.hashes.empty() ? std::string() : n.hashes.back()},
                     {"mempool", n.mempool},
                     {"adversaryBlocks", n.adversary_blocks},
                     {"blocksMined", n.stats.blocks_mined},
                     {"blocksFromPeers", n.stats.blocks_from_peers},
                     {"chainsAdopted", n.stats.chains_adopted},
                     {"blocksRejected", n.stats.blocks_rejected},
                     {"chainsRejected", n.stats.chains_rejected}});
  }
  Json j{{"endTime", result.end_time},
         {"quiescent", result.quiescent},
         {"converged", result.converged},
         {"adversaryBlocksAdopted", result.adversary_blocks_adopted},
         {"lostTransactions", result.lost_transactions},
         {"submitted", result.submitted},
         {"rejectedSubmissions", result.rejected_submissions},
         {"nodes", nodes}};
  if (with_trace) {
    Json trace = Json::array();
    for (const auto& t : result.trace) {
      trace.push_back({{"t", t.t}, {"node", t.node}, {"event", t.event}, {"detail", t.detail}});
    }
    j["trace"] = std::move(trace);
  }
  return j;
}

ForgeMeasurement measure_forge_attempts(unsigned length, unsigned difficulty, unsigned trials,
                                        std::uint64_t seed) {
  ForgeMeasurement m;
  m.expected = static_cast<double>(length) * std::ldexp(1.0, static_cast<int>(difficulty));
  std::mt19937_64 rng(seed);
  const PrivateKey forger = sim_key("forger");
  double total = 0;
  for (unsigned t = 0; t < trials; ++t) {
    Block prev;
    prev.hash = to_hex(sha256(std::to_string(rng())));
    std::uint64_t attempts = 0;
    for (unsigned i = 0; i < length; ++i) {
      const auto ts = static_cast<Timestamp>(rng() >> 2);
      auto block = seal_block(prev, {}, forger, difficulty, ts);
      attempts += block->nonce + 1;
      prev = std::move(*block);
    }
    m.samples.push_back(attempts);
    total += static_cast<double>(attempts);
  }
  m.mean_attempts = trials == 0 ? 0 : total / trials;
  return m;
}

}  // namespace ledgergate
