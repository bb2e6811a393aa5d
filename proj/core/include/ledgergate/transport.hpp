#pragma once

#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "ledgergate/node.hpp"
#include "ledgergate/wire.hpp"

namespace ledgergate {

struct HostPort {
  std::string host;
  int port = 0;
  std::string str() const { return host + ":" + std::to_string(port); }
};

/// Parses "host:port". Throws Error(ConfigInvalid).
HostPort parse_host_port(const std::string& s);

/// Length-prefixed JSON frames over TCP. Every connection gets a reader
/// thread; handlers run on those threads, so the owner must serialize.
class Transport {
 public:
  struct Handlers {
    std::function<void(const PeerId&)> on_connect;
    std::function<void(const PeerId&)> on_disconnect;
    std::function<void(const PeerId&, WireMessage)> on_message;
  };

  /// Frames larger than this are treated as a protocol violation.
  static constexpr std::uint32_t kMaxFrame = 64u << 20;

  explicit Transport(Handlers handlers);
  ~Transport();
  Transport(const Transport&) = delete;
  Transport& operator=(const Transport&) = delete;

  /// Binds and starts accepting. Returns the bound port (useful with port 0).
  /// Throws Error(BindFailure).
  int listen(const HostPort& addr);
  /// Dials `addr`; the peer id is the dialed address. Throws
  /// Error(PeerUnreachable).
  PeerId connect(const HostPort& addr);
  bool send(const PeerId& peer, const WireMessage& msg);
  std::vector<PeerId> peers() const;
  void stop();

 private:
  struct Conn;
  void accept_loop();
  void adopt(int fd, PeerId id);
  void read_loop(std::shared_ptr<Conn> conn);
  void drop(const PeerId& id);

  Handlers handlers_;
  std::atomic<bool> stopping_{false};
  int listen_fd_ = -1;
  std::uint64_t inbound_ = 0;
  mutable std::mutex mu_;
  std::map<PeerId, std::shared_ptr<Conn>> conns_;
  std::vector<std::thread> threads_;
};

}  // namespace ledgergate
