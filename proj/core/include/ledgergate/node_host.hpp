#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "ledgergate/config.hpp"
#include "ledgergate/gateway.hpp"
#include "ledgergate/node.hpp"
#include "ledgergate/transport.hpp"

namespace ledgergate {

struct HostOptions {
  NodeOptions node;
  std::chrono::milliseconds peer_retry{1000};
  /// Upper bound of the random delay before mining an empty block to break
  /// an equal-height fork.
  std::chrono::milliseconds tie_backoff{1500};
  /// Receives one line per notable event. Silent when empty.
  std::function<void(const std::string&)> log;
};

/// A node running for real: event loop, miner thread, TCP peers, HTTP
/// gateway and a block store under the data directory.
class NodeHost final : public NodeRunner {
 public:
  /// Loads genesis, key and persisted chain. Throws Error(ConfigInvalid),
  /// Error(BadKey), Error(IoFailure) or Error(CorruptStore).
  explicit NodeHost(NodeConfig config, HostOptions options = {});
  ~NodeHost() override;
  NodeHost(const NodeHost&) = delete;
  NodeHost& operator=(const NodeHost&) = delete;

  /// Binds both listeners and starts every thread. Throws Error(BindFailure).
  void start();
  /// Stops all threads. Idempotent.
  void stop();

  int p2p_port() const noexcept { return p2p_port_; }
  int http_port() const noexcept { return http_port_; }
  /// True if this host mines: a member key and mining enabled in config.
  bool mining() const noexcept { return mining_; }
  const NodeConfig& config() const noexcept { return config_; }

  void run(const std::function<void(Node&, Outbox&)>& fn) override;
  Timestamp now() const override;

  /// Location of the block file and the genesis copy for `data_dir`.
  static std::filesystem::path store_path(const std::filesystem::path& data_dir);
  static std::filesystem::path genesis_copy_path(const std::filesystem::path& data_dir);

 private:
  class StoreSink;

  void post(std::function<void()> task);
  void loop();
  void execute(const std::function<void(Node&, Outbox&)>& fn);
  void mine_loop();
  void dial_loop();
  void log(const std::string& line) const;

  NodeConfig config_;
  HostOptions options_;
  std::unique_ptr<StoreSink> sink_;
  std::unique_ptr<Node> node_;
  std::unique_ptr<Transport> transport_;
  std::unique_ptr<Gateway> gateway_;
  std::unique_ptr<httplib::Server> http_;
  bool mining_ = false;
  int p2p_port_ = 0;
  int http_port_ = 0;

  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::function<void()>> tasks_;
  std::thread::id loop_id_;
  std::string last_tip_;
  std::size_t last_mempool_ = 0;
  std::string tie_waited_;

  std::atomic<bool> started_{false};
  std::atomic<bool> stopping_{false};
  std::atomic<bool> cancel_mining_{false};
  bool wake_miner_ = true;
  std::condition_variable miner_cv_;
  std::condition_variable dial_cv_;

  std::thread loop_thread_;
  std::thread miner_thread_;
  std::thread dial_thread_;
  std::thread http_thread_;
};

}  // namespace ledgergate
