#include "ledgergate/node_host.hpp"

#include <httplib.h>

#include <algorithm>
#include <future>
#include <random>

#include "ledgergate/error.hpp"

namespace ledgergate {

class NodeHost::StoreSink final : public ChainSink {
 public:
  explicit StoreSink(std::filesystem::path file) : store(std::move(file)) {}
  void appended(const Block& block) override { store.append(block); }
  void replaced(std::span<const Block> blocks) override { store.rewrite(blocks); }

  BlockStore store;
};

std::filesystem::path NodeHost::store_path(const std::filesystem::path& data_dir) {
  return data_dir / "chain.dat";
}

std::filesystem::path NodeHost::genesis_copy_path(const std::filesystem::path& data_dir) {
  return data_dir / "genesis.json";
}

NodeHost::NodeHost(NodeConfig config, HostOptions options)
    : config_(std::move(config)), options_(std::move(options)) {
  GenesisConfig genesis;
  try {
    genesis = genesis_config_from_json(Json::parse(read_file(config_.genesis)));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, config_.genesis.string() + ": " + e.what());
  }
  if (config_.difficulty) genesis.difficulty = *config_.difficulty;
  auto params = ChainParams::create(genesis);

  std::optional<PrivateKey> key;
  if (!config_.key.empty()) key = PrivateKey::from_pem(read_file(config_.key));

  std::error_code ec;
  std::filesystem::create_directories(config_.data_dir, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + config_.data_dir.string() + ": " + ec.message());
  write_file(genesis_copy_path(config_.data_dir), to_json(genesis).dump(2) + "\n");

  sink_ = std::make_unique<StoreSink>(store_path(config_.data_dir));
  Chain chain = load_chain(params, sink_->store);
  node_ = std::make_unique<Node>(config_.name, std::move(chain), std::move(key), options_.node);
  node_->set_sink(sink_.get());
  mining_ = config_.mine && node_->can_mine();
  last_tip_ = node_->chain().tip().hash;
}

NodeHost::~NodeHost() { stop(); }

void NodeHost::log(const std::string& line) const {
  if (options_.log) options_.log(config_.name + ": " + line);
}

Timestamp NodeHost::now() const {
  return std::chrono::duration_cast<std::chrono::seconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

void NodeHost::start() {
  if (started_.exchange(true)) return;
  Transport::Handlers handlers;
  handlers.on_connect = [this](const PeerId& peer) {
    post([this, peer] {
      execute([&](Node& n, Outbox& out) {
        auto o = n.connect(peer);
        out.insert(out.end(), o.begin(), o.end());
      });
    });
  };
  handlers.on_disconnect = [this](const PeerId& peer) {
    post([this, peer] { execute([&](Node& n, Outbox&) { n.disconnect(peer); }); });
  };
  handlers.on_message = [this](const PeerId& peer, WireMessage msg) {
    post([this, peer, msg = std::move(msg)] {
      execute([&](Node& n, Outbox& out) {
        auto o = n.receive(peer, msg);
        out.insert(out.end(), o.begin(), o.end());
      });
    });
  };
  transport_ = std::make_unique<Transport>(std::move(handlers));

  loop_thread_ = std::thread([this] { loop(); });
  try {
    p2p_port_ = transport_->listen(config_.listen);

    gateway_ = std::make_unique<Gateway>(*this);
    http_ = std::make_unique<httplib::Server>();
    // httplib defaults to SO_REUSEPORT, which lets a second node share a busy port.
    http_->set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    bind_http(*http_, *gateway_);
    if (config_.http.port == 0) {
      http_port_ = http_->bind_to_any_port(config_.http.host);
    } else if (http_->bind_to_port(config_.http.host, config_.http.port)) {
      http_port_ = config_.http.port;
    } else {
      http_port_ = -1;
    }
    if (http_port_ <= 0) throw Error(ErrorCode::BindFailure, "http " + config_.http.str());
  } catch (...) {
    stop();
    throw;
  }
  http_thread_ = std::thread([this] { http_->listen_after_bind(); });
  http_->wait_until_ready();
  if (mining_) miner_thread_ = std::thread([this] { mine_loop(); });
  dial_thread_ = std::thread([this] { dial_loop(); });
  log("p2p on " + config_.listen.host + ":" + std::to_string(p2p_port_) + ", http on " +
      config_.http.host + ":" + std::to_string(http_port_) + ", height " +
      std::to_string(node_->chain().height()) + (mining_ ? ", mining" : ", read-only"));
}

void NodeHost::stop() {
  if (stopping_.exchange(true)) return;
  cancel_mining_ = true;
  {
    std::lock_guard lock(mu_);
    wake_miner_ = true;
  }
  miner_cv_.notify_all();
  dial_cv_.notify_all();
  cv_.notify_all();
  if (http_) http_->stop();
  if (http_thread_.joinable()) http_thread_.join();
  if (miner_thread_.joinable()) miner_thread_.join();
  if (dial_thread_.joinable()) dial_thread_.join();
  if (transport_) transport_->stop();
  if (loop_thread_.joinable()) loop_thread_.join();
}

void NodeHost::post(std::function<void()> task) {
  {
    std::lock_guard lock(mu_);
    if (stopping_) return;
    tasks_.push_back(std::move(task));
  }
  cv_.notify_one();
}

void NodeHost::loop() {
  {
    std::lock_guard lock(mu_);
    loop_id_ = std::this_thread::get_id();
  }
  for (;;) {
    std::function<void()> task;
    {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [this] { return stopping_ || !tasks_.empty(); });
      if (tasks_.empty()) return;
      task = std::move(tasks_.front());
      tasks_.pop_front();
    }
    try {
      task();
    } catch (const std::exception& e) {
      log(std::string("event failed: ") + e.what());
    }
  }
}

// Runs on the loop thread: applies `fn`, sends its outbox and wakes the
// miner when the tip or the mempool moved.
void NodeHost::execute(const std::function<void(Node&, Outbox&)>& fn) {
  Outbox out;
  try {
    fn(*node_, out);
  } catch (...) {
    for (const auto& o : out) transport_->send(o.to, o.msg);
    throw;
  }
  for (const auto& o : out) transport_->send(o.to, o.msg);
  const std::string& tip = node_->chain().tip().hash;
  const bool tip_moved = tip != last_tip_;
  const bool pool_moved = node_->mempool().size() != last_mempool_;
  if (tip_moved) {
    last_tip_ = tip;
    cancel_mining_ = true;
    log("height " + std::to_string(node_->chain().height()) + " tip " + tip.substr(0, 16));
  }
  last_mempool_ = node_->mempool().size();
  if (tip_moved || pool_moved || node_->fork_tie()) {
    {
      std::lock_guard lock(mu_);
      wake_miner_ = true;
    }
    miner_cv_.notify_one();
  }
}

void NodeHost::run(const std::function<void(Node&, Outbox&)>& fn) {
  bool on_loop = false;
  {
    std::lock_guard lock(mu_);
    on_loop = loop_id_ == std::this_thread::get_id();
  }
  if (on_loop) {
    execute(fn);
    return;
  }
  if (!started_ || stopping_) {
    throw Error(ErrorCode::PeerUnreachable, "node '" + config_.name + "' is not running");
  }
  std::promise<void> done;
  auto result = done.get_future();
  {
    std::lock_guard lock(mu_);
    if (stopping_) throw Error(ErrorCode::PeerUnreachable, "node '" + config_.name + "' is stopping");
    tasks_.push_back([&] {
      try {
        execute(fn);
        done.set_value();
      } catch (...) {
        done.set_exception(std::current_exception());
      }
    });
  }
  cv_.notify_one();
  result.get();
}

void NodeHost::mine_loop() {
  const PrivateKey& key = *node_->key();
  std::mt19937_64 rng{std::random_device{}()};
  while (!stopping_) {
    {
      std::unique_lock lock(mu_);
      miner_cv_.wait(lock, [this] { return stopping_ || wake_miner_; });
      wake_miner_ = false;
    }
    if (stopping_) return;
    std::optional<MiningJob> job;
    try {
      run([&](Node& n, Outbox&) {
        job = n.mining_job(now());
        cancel_mining_ = false;
      });
    } catch (const Error&) {
      return;
    }
    if (!job) continue;
    if (job->data.empty() && !options_.node.continuous && job->prev.hash != tie_waited_) {
      // An empty block only breaks an equal-height fork. Wait a random
      // while first so the tied miners do not keep tying each other.
      tie_waited_ = job->prev.hash;
      std::uniform_int_distribution<long> pick(0, options_.tie_backoff.count());
      const auto until = std::chrono::steady_clock::now() + std::chrono::milliseconds(pick(rng));
      while (!stopping_ && !cancel_mining_ && std::chrono::steady_clock::now() < until) {
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
      }
      std::lock_guard lock(mu_);
      wake_miner_ = true;
      continue;
    }
    auto block = seal_block(job->prev, std::move(job->data), key, job->difficulty, job->timestamp,
                            &cancel_mining_);
    if (!block) continue;
    try {
      run([&](Node& n, Outbox& out) {
        auto o = n.accept_mined(std::move(*block));
        out.insert(out.end(), o.begin(), o.end());
      });
    } catch (const Error& e) {
      log(std::string("mined block not stored: ") + e.what());
    }
    std::lock_guard lock(mu_);
    wake_miner_ = true;
  }
}

void NodeHost::dial_loop() {
  while (!stopping_) {
    const auto connected = transport_->peers();
    for (const auto& peer : config_.peers) {
      if (stopping_) return;
      if (std::find(connected.begin(), connected.end(), peer.str()) != connected.end()) continue;
      try {
        transport_->connect(peer);
        log("connected to " + peer.str());
      } catch (const Error&) {
      }
    }
    std::unique_lock lock(mu_);
    dial_cv_.wait_for(lock, options_.peer_retry, [this] { return stopping_.load(); });
  }
}

}  // namespace ledgergate
