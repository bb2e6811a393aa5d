#include "cli.hpp"

#include <CLI11.hpp>
#include <httplib.h>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <iomanip>
#include <thread>

#include "ledgergate/config.hpp"
#include "ledgergate/error.hpp"
#include "ledgergate/gateway.hpp"
#include "ledgergate/ledger.hpp"
#include "ledgergate/node_host.hpp"
#include "ledgergate/simulator.hpp"
#include "ledgergate/snapshot.hpp"

namespace fs = std::filesystem;

namespace ledgergate::cli {

namespace {

std::atomic<bool> g_stop{false};

Timestamp wall_clock() {
  return std::chrono::duration_cast<std::chrono::seconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

// ---- keygen ----

struct KeygenArgs {
  std::string out;
  std::string scheme = "rsa";
};

int keygen(const KeygenArgs& a, std::ostream& out) {
  const auto scheme = a.scheme == "ed25519" ? SignatureScheme::Ed25519Sha256 : SignatureScheme::RsaSha256;
  const PrivateKey key = PrivateKey::generate(scheme);
  const fs::path priv(a.out);
  const fs::path pub(a.out + ".pub");
  write_file(priv, key.pem());
  std::error_code ec;
  fs::permissions(priv, fs::perms::owner_read | fs::perms::owner_write, fs::perm_options::replace, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot restrict " + priv.string() + ": " + ec.message());
  write_file(pub, key.public_key().pem());
  out << entity_id_for(key.public_key()) << "\n";
  return 0;
}

// ---- genesis ----

struct GenesisArgs {
  std::string out;
  std::vector<std::string> entities;
  unsigned difficulty = kDefaultDifficulty;
  std::optional<Timestamp> timestamp;
};

int genesis(const GenesisArgs& a, std::ostream& out) {
  GenesisConfig config;
  config.difficulty = a.difficulty;
  config.timestamp = a.timestamp.value_or(wall_clock());
  for (const auto& spec : a.entities) {
    // ROLE=PUBLIC_KEY_FILE, optionally ROLE=FILE@ID to pick the id.
    const auto eq = spec.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::ConfigInvalid, "expected ROLE=KEYFILE, got '" + spec + "'");
    const auto role = parse_role(spec.substr(0, eq));
    if (!role) throw Error(ErrorCode::ConfigInvalid, "unknown role in '" + spec + "'");
    std::string file = spec.substr(eq + 1);
    std::string id;
    if (const auto at = file.rfind('@'); at != std::string::npos) {
      id = file.substr(at + 1);
      file.resize(at);
    }
    const PublicKey key = PublicKey::from_pem(read_file(file));
    if (id.empty()) id = entity_id_for(key);
    config.entities.push_back(Entity{EntityId(id), *role, key});
  }
  if (config.entities.empty()) throw Error(ErrorCode::ConfigInvalid, "genesis needs at least one --entity");
  config.scheme = config.entities.front().key.scheme();
  const auto params = ChainParams::create(config);
  write_file(a.out, to_json(config).dump(2) + "\n");
  out << params->genesis().hash << "\n";
  return 0;
}

// ---- run ----

struct RunArgs {
  std::string config;
  std::optional<unsigned> difficulty;
  std::string listen;
  std::string http;
  std::vector<std::string> peers;
  std::string data_dir;
  bool no_mine = false;
  bool quiet = false;
};

NodeConfig resolve_config(const RunArgs& a) {
  NodeConfig c = load_node_config(a.config);
  if (a.difficulty) c.difficulty = a.difficulty;
  if (!a.listen.empty()) c.listen = parse_host_port(a.listen);
  if (!a.http.empty()) c.http = parse_host_port(a.http);
  if (!a.peers.empty()) {
    c.peers.clear();
    for (const auto& p : a.peers) c.peers.push_back(parse_host_port(p));
  }
  if (!a.data_dir.empty()) c.data_dir = a.data_dir;
  if (a.no_mine) c.mine = false;
  return c;
}

int run_node(const RunArgs& a, std::ostream& out, std::ostream& err) {
  HostOptions options;
  std::mutex log_mu;
  if (!a.quiet) {
    options.log = [&](const std::string& line) {
      std::lock_guard lock(log_mu);
      err << line << std::endl;
    };
  }
  g_stop = false;
  NodeHost host(resolve_config(a), options);
  host.start();
  out << "ready p2p=" << host.p2p_port() << " http=" << host.http_port()
      << (host.mining() ? " mining" : " read-only") << std::endl;
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(50));
  std::uint64_t height = 0;
  host.run([&](Node& n, Outbox&) { height = n.chain().height(); });
  host.stop();
  out << "stopped height=" << height << std::endl;
  return 0;
}

// ---- inspect ----

struct InspectArgs {
  std::string store;
  std::string data_dir;
  std::string genesis;
  std::string audit;
  bool json = false;
};

void print_tx(std::ostream& out, const Transaction& tx) {
  out << "  tx " << tx.id.str() << " " << to_string(tx.kind) << "/" << to_string(tx.tag)
      << " author=" << tx.author.str() << " ts=" << tx.timestamp;
  if (auto r = record_of(tx)) out << " record=" << r->str();
  if (auto q = request_of(tx)) out << " request=" << q->str();
  out << "\n";
}

int inspect(const InspectArgs& a, std::ostream& out) {
  fs::path store_file = a.store;
  if (store_file.empty()) {
    if (a.data_dir.empty()) throw Error(ErrorCode::ConfigInvalid, "inspect needs a store path or --data-dir");
    store_file = NodeHost::store_path(a.data_dir);
  }
  const fs::path genesis_file =
      a.genesis.empty() ? NodeHost::genesis_copy_path(store_file.parent_path()) : fs::path(a.genesis);
  GenesisConfig config;
  try {
    config = genesis_config_from_json(Json::parse(read_file(genesis_file)));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, genesis_file.string() + ": " + e.what());
  }
  const auto params = ChainParams::create(config);
  BlockStore store(store_file);
  if (!store.exists()) throw Error(ErrorCode::IoFailure, "no block store at " + store_file.string());
  const std::vector<Block> blocks = store.load();
  const ChainVerdict verdict = validate_chain(blocks, *params);
  if (!verdict.valid) {
    const std::uint64_t bad = verdict.first_bad_index.value_or(0);
    throw Error(ErrorCode::CorruptStore, "first bad index " + std::to_string(bad) + " (" +
                                             std::string(to_string(verdict.fault)) + "): " + verdict.detail);
  }
  if (a.json) {
    Json j = Json::array();
    for (const auto& b : blocks) j.push_back(to_json(b));
    out << j.dump(2) << "\n";
    return 0;
  }
  if (!a.audit.empty()) {
    const Snapshot snap = replay(blocks, params->shared_directory(), blocks.back().index);
    for (const auto& e : audit_trail(snap, RecordId(a.audit))) {
      out << "block " << e.block_index;
      print_tx(out, e.tx);
    }
    return 0;
  }
  for (const auto& b : blocks) {
    out << "block " << b.index << " hash=" << b.hash << " prev=" << b.previous_hash << " ts=" << b.timestamp
        << " nonce=" << b.nonce << " txs=" << b.data.size() << "\n";
    b.data.for_each([&](const Transaction& tx) { print_tx(out, tx); });
  }
  out << "valid height=" << blocks.back().index << " blocks=" << blocks.size() << "\n";
  return 0;
}

// ---- sim run ----

struct SimArgs {
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> difficulty;
  bool json = false;
  bool no_trace = false;
};

int sim_run(const SimArgs& a, std::ostream& out) {
  Scenario s;
  try {
    s = scenario_from_json(Json::parse(read_file(a.scenario)));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ScenarioInvalid, a.scenario + ": " + e.what());
  }
  if (a.seed) s.seed = *a.seed;
  if (a.difficulty) s.difficulty = *a.difficulty;
  if (a.no_trace) s.trace = false;
  const SimResult r = simulate(s);
  if (a.json) {
    out << to_json(r, s.trace).dump(2) << "\n";
    return 0;
  }
  for (const auto& t : r.trace) {
    out << std::setw(8) << t.t << " " << t.node << " " << t.event;
    if (!t.detail.empty()) out << " " << t.detail;
    out << "\n";
  }
  out << "end " << r.end_time << (r.quiescent ? " quiescent" : " cut-off") << "\n";
  for (const auto& n : r.nodes) {
    out << "node " << n.id << (n.honest ? "" : " adversary") << " height=" << n.height
        << " tip=" << (n.hashes.empty() ? std::string("-") : n.hashes.back().substr(0, 16))
        << " mempool=" << n.mempool << "\n";
  }
  out << "converged " << (r.converged ? "true" : "false") << "\n";
  out << "adversary-blocks-adopted " << r.adversary_blocks_adopted << "\n";
  out << "lost-transactions " << r.lost_transactions.size() << "\n";
  return 0;
}

// ---- submit ----

struct SubmitArgs {
  std::string node = "http://127.0.0.1:8000";
  std::string key;
  std::string op;
  std::string tx_id;
  std::string author;
  std::string record;
  std::vector<std::string> keepers;
  std::string agreement = "ANY";
  std::string location;
  std::string request;
  std::string party;
  std::string level = "READ";
  std::optional<Timestamp> expiry;
  std::optional<Timestamp> timestamp;
};

Transaction build_tx(const SubmitArgs& a, const PrivateKey& key) {
  const EntityId author(a.author.empty() ? entity_id_for(key.public_key()) : a.author);
  const Timestamp ts = a.timestamp.value_or(wall_clock());
  auto descriptor = [&] {
    RecordDescriptor d;
    d.record = RecordId(a.record);
    for (const auto& k : a.keepers) d.keepers.emplace_back(k);
    const auto rule = parse_agreement(a.agreement);
    if (!rule) throw Error(ErrorCode::Malformed, "agreement must be ANY, MAJORITY or ALL");
    d.agreement = *rule;
    d.location = a.location;
    return d;
  };
  std::string id = a.tx_id;
  if (id.empty()) {
    const Digest d = sha256(a.op + "|" + author.str() + "|" + a.record + "|" + a.request + "|" + std::to_string(ts));
    id = "tx-" + to_hex(d).substr(0, 16);
  }
  const TxId tx_id(id);
  Transaction tx;
  if (a.op == "create") {
    tx = record_create(tx_id, author, ts, descriptor());
  } else if (a.op == "update") {
    tx = record_update(tx_id, author, ts, descriptor());
  } else if (a.op == "remove") {
    tx = record_remove(tx_id, author, ts, RecordId(a.record));
  } else if (a.op == "request") {
    AccessRequest r;
    r.request = RequestId(a.request.empty() ? id : a.request);
    r.party = a.party.empty() ? author : EntityId(a.party);
    r.record = RecordId(a.record);
    const auto level = parse_level(a.level);
    if (!level) throw Error(ErrorCode::Malformed, "level must be READ or WRITE");
    r.level = *level;
    r.expiry = a.expiry;
    tx = access_request(tx_id, ts, std::move(r));
  } else if (a.op == "grant" || a.op == "deny") {
    tx = keeper_vote(tx_id, author, ts, RequestId(a.request), a.op == "grant");
  } else if (a.op == "revoke") {
    tx = keeper_revoke(tx_id, author, ts, RequestId(a.request));
  } else {
    throw Error(ErrorCode::Malformed, "unknown operation '" + a.op + "'");
  }
  sign_transaction(tx, key);
  return tx;
}

int submit(const SubmitArgs& a, std::ostream& out, std::ostream& err) {
  const PrivateKey key = PrivateKey::from_pem(read_file(a.key));
  const ApiCall call = api_call_for(build_tx(a, key));
  httplib::Client client(a.node);
  client.set_connection_timeout(5);
  const httplib::Headers headers{{kSignatureHeader, call.signature}};
  const std::string body = call.body.dump();
  httplib::Result res = call.method == "POST"    ? client.Post(call.path, headers, body, "application/json")
                        : call.method == "PATCH" ? client.Patch(call.path, headers, body, "application/json")
                                                 : client.Delete(call.path, headers, body, "application/json");
  if (!res) throw Error(ErrorCode::PeerUnreachable, a.node + ": " + httplib::to_string(res.error()));
  Json reply = Json::parse(res->body, nullptr, false);
  if (res->status >= 400) {
    const std::string code = reply.is_object() ? reply.value("error", std::string("HTTP_ERROR")) : "HTTP_ERROR";
    const std::string detail = reply.is_object() ? reply.value("detail", res->body) : res->body;
    err << "error: " << code << ": " << detail << " (HTTP " << res->status << ")" << std::endl;
    return 1;
  }
  out << res->status << " " << (reply.is_discarded() ? res->body : reply.dump()) << "\n";
  return 0;
}

}  // namespace

void request_stop() { g_stop = true; }

int main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"ledgergate: consortium ledger for record access control"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "ledgergate 0.1.0");

  KeygenArgs kg;
  auto* keygen_cmd = app.add_subcommand("keygen", "Generate a key pair and print its entity id");
  keygen_cmd->add_option("out", kg.out, "Private key path; the public key goes to <out>.pub")->required();
  keygen_cmd->add_option("--scheme", kg.scheme, "rsa or ed25519")
      ->check(CLI::IsMember({"rsa", "ed25519"}))
      ->envname("LEDGERGATE_SCHEME");

  GenesisArgs gn;
  auto* genesis_cmd = app.add_subcommand("genesis", "Write a network genesis file");
  genesis_cmd->add_option("--out", gn.out, "Genesis file to write")->required();
  genesis_cmd->add_option("--entity", gn.entities, "ROLE=PUBKEY_FILE[@ID], repeatable")->required();
  genesis_cmd->add_option("--difficulty", gn.difficulty, "Leading zero bits")->envname("LEDGERGATE_DIFFICULTY");
  genesis_cmd->add_option("--timestamp", gn.timestamp, "Genesis timestamp (default: now)");

  RunArgs rn;
  auto* run_cmd = app.add_subcommand("run", "Run a node: peer protocol, miner and HTTP gateway");
  run_cmd->add_option("--config", rn.config, "Node config file")->required()->envname("LEDGERGATE_CONFIG");
  run_cmd->add_option("--difficulty", rn.difficulty, "Override difficulty")->envname("LEDGERGATE_DIFFICULTY");
  run_cmd->add_option("--listen", rn.listen, "Peer protocol host:port")->envname("LEDGERGATE_LISTEN");
  run_cmd->add_option("--http", rn.http, "Gateway host:port")->envname("LEDGERGATE_HTTP");
  run_cmd->add_option("--peer", rn.peers, "Peer host:port, repeatable")
      ->envname("LEDGERGATE_PEER")
      ->delimiter(',');
  run_cmd->add_option("--data-dir", rn.data_dir, "Data directory")->envname("LEDGERGATE_DATA_DIR");
  run_cmd->add_flag("--no-mine", rn.no_mine, "Never mine, even with a member key");
  run_cmd->add_flag("--quiet", rn.quiet, "No event log on stderr");

  InspectArgs in;
  auto* inspect_cmd = app.add_subcommand("inspect", "Validate and dump a block store");
  inspect_cmd->add_option("store", in.store, "Block file (default: <data-dir>/chain.dat)");
  inspect_cmd->add_option("--data-dir", in.data_dir, "Data directory")->envname("LEDGERGATE_DATA_DIR");
  inspect_cmd->add_option("--genesis", in.genesis, "Genesis file (default: genesis.json beside the store)");
  inspect_cmd->add_option("--audit", in.audit, "Print the audit trail of one record");
  inspect_cmd->add_flag("--json", in.json, "Dump blocks as JSON");

  SimArgs sm;
  auto* sim_cmd = app.add_subcommand("sim", "Network simulator");
  sim_cmd->require_subcommand(1);
  auto* sim_run_cmd = sim_cmd->add_subcommand("run", "Run a scenario and print trace and verdicts");
  sim_run_cmd->add_option("scenario", sm.scenario, "Scenario file")->required();
  sim_run_cmd->add_option("--seed", sm.seed, "Override the scenario seed")->envname("LEDGERGATE_SEED");
  sim_run_cmd->add_option("--difficulty", sm.difficulty, "Override difficulty")->envname("LEDGERGATE_DIFFICULTY");
  sim_run_cmd->add_flag("--json", sm.json, "Print the result as JSON");
  sim_run_cmd->add_flag("--no-trace", sm.no_trace, "Skip the event trace");

  SubmitArgs sb;
  auto* submit_cmd = app.add_subcommand("submit", "Sign a transaction and send it to a gateway");
  submit_cmd->add_option("op", sb.op, "create, update, remove, request, grant, deny or revoke")
      ->required()
      ->check(CLI::IsMember({"create", "update", "remove", "request", "grant", "deny", "revoke"}));
  submit_cmd->add_option("--node", sb.node, "Gateway base URL")->envname("LEDGERGATE_NODE");
  submit_cmd->add_option("--key", sb.key, "Signing key (PEM)")->required()->envname("LEDGERGATE_KEY");
  submit_cmd->add_option("--tx-id", sb.tx_id, "Transaction id (default: derived)");
  submit_cmd->add_option("--author", sb.author, "Author entity id (default: from the key)");
  submit_cmd->add_option("--record", sb.record, "Record id");
  submit_cmd->add_option("--keeper", sb.keepers, "Keeper entity id, repeatable");
  submit_cmd->add_option("--agreement", sb.agreement, "ANY, MAJORITY or ALL");
  submit_cmd->add_option("--location", sb.location, "Record location reference");
  submit_cmd->add_option("--request", sb.request, "Request id");
  submit_cmd->add_option("--party", sb.party, "Requesting party (default: author)");
  submit_cmd->add_option("--level", sb.level, "READ or WRITE");
  submit_cmd->add_option("--expiry", sb.expiry, "Policy expiry timestamp");
  submit_cmd->add_option("--timestamp", sb.timestamp, "Transaction timestamp (default: now)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 2;
  }

  try {
    if (*keygen_cmd) return keygen(kg, out);
    if (*genesis_cmd) return genesis(gn, out);
    if (*run_cmd) return run_node(rn, out, err);
    if (*inspect_cmd) return inspect(in, out);
    if (*sim_run_cmd) return sim_run(sm, out);
    if (*submit_cmd) return submit(sb, out, err);
  } catch (const Error& e) {
    err << "error: " << e.code_name() << ": " << e.what() << std::endl;
    return 1;
  } catch (const std::exception& e) {
    err << "error: INTERNAL: " << e.what() << std::endl;
    return 1;
  }
  return 2;
}

}  // namespace ledgergate::cli
