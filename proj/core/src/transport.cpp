#include "ledgergate/transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "ledgergate/error.hpp"

namespace ledgergate {

HostPort parse_host_port(const std::string& s) {
  const auto colon = s.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == s.size()) {
    throw Error(ErrorCode::ConfigInvalid, "expected host:port, got '" + s + "'");
  }
  HostPort hp;
  hp.host = s.substr(0, colon);
  try {
    std::size_t used = 0;
    hp.port = std::stoi(s.substr(colon + 1), &used);
    if (used != s.size() - colon - 1 || hp.port < 0 || hp.port > 65535) throw std::out_of_range("port");
  } catch (const std::exception&) {
    throw Error(ErrorCode::ConfigInvalid, "bad port in '" + s + "'");
  }
  return hp;
}

struct Transport::Conn {
  PeerId id;
  int fd = -1;
  std::mutex write_mu;
};

namespace {

bool write_all(int fd, const char* data, std::size_t n) {
  while (n > 0) {
    const ssize_t w = ::send(fd, data, n, MSG_NOSIGNAL);
    if (w < 0 && errno == EINTR) continue;
    if (w <= 0) return false;
    data += w;
    n -= static_cast<std::size_t>(w);
  }
  return true;
}

bool read_all(int fd, char* data, std::size_t n) {
  while (n > 0) {
    const ssize_t r = ::recv(fd, data, n, 0);
    if (r < 0 && errno == EINTR) continue;
    if (r <= 0) return false;
    data += r;
    n -= static_cast<std::size_t>(r);
  }
  return true;
}

addrinfo* resolve(const HostPort& addr, bool passive) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  if (passive) hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  const std::string port = std::to_string(addr.port);
  if (::getaddrinfo(addr.host.empty() ? nullptr : addr.host.c_str(), port.c_str(), &hints, &res) != 0) {
    return nullptr;
  }
  return res;
}

}  // namespace

Transport::Transport(Handlers handlers) : handlers_(std::move(handlers)) {}

Transport::~Transport() { stop(); }

int Transport::listen(const HostPort& addr) {
  addrinfo* res = resolve(addr, true);
  if (res == nullptr) throw Error(ErrorCode::BindFailure, "cannot resolve " + addr.str());
  const int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  const int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (fd < 0 || ::bind(fd, res->ai_addr, res->ai_addrlen) != 0 || ::listen(fd, 16) != 0) {
    const std::string why = std::strerror(errno);
    ::freeaddrinfo(res);
    if (fd >= 0) ::close(fd);
    throw Error(ErrorCode::BindFailure, addr.str() + ": " + why);
  }
  ::freeaddrinfo(res);
  sockaddr_in bound{};
  socklen_t len = sizeof bound;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&bound), &len);
  listen_fd_ = fd;
  std::lock_guard lock(mu_);
  threads_.emplace_back([this] { accept_loop(); });
  return ntohs(bound.sin_port);
}

PeerId Transport::connect(const HostPort& addr) {
  addrinfo* res = resolve(addr, false);
  if (res == nullptr) throw Error(ErrorCode::PeerUnreachable, "cannot resolve " + addr.str());
  const int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  if (fd < 0 || ::connect(fd, res->ai_addr, res->ai_addrlen) != 0) {
    const std::string why = std::strerror(errno);
    ::freeaddrinfo(res);
    if (fd >= 0) ::close(fd);
    throw Error(ErrorCode::PeerUnreachable, addr.str() + ": " + why);
  }
  ::freeaddrinfo(res);
  adopt(fd, addr.str());
  return addr.str();
}

void Transport::accept_loop() {
  while (!stopping_) {
    sockaddr_in from{};
    socklen_t len = sizeof from;
    const int fd = ::accept(listen_fd_, reinterpret_cast<sockaddr*>(&from), &len);
    if (fd < 0) {
      if (errno == EINTR) continue;
      return;
    }
    if (stopping_) {
      ::close(fd);
      return;
    }
    char ip[INET_ADDRSTRLEN] = {};
    ::inet_ntop(AF_INET, &from.sin_addr, ip, sizeof ip);
    PeerId id;
    {
      std::lock_guard lock(mu_);
      id = "in" + std::to_string(++inbound_) + "@" + ip + ":" + std::to_string(ntohs(from.sin_port));
    }
    adopt(fd, id);
  }
}

void Transport::adopt(int fd, PeerId id) {
  const int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  auto conn = std::make_shared<Conn>();
  conn->id = id;
  conn->fd = fd;
  {
    std::lock_guard lock(mu_);
    if (stopping_) {
      ::close(fd);
      return;
    }
    if (auto old = conns_.find(id); old != conns_.end()) ::shutdown(old->second->fd, SHUT_RDWR);
    conns_[id] = conn;
  }
  if (handlers_.on_connect) handlers_.on_connect(id);
  std::lock_guard lock(mu_);
  threads_.emplace_back([this, conn] { read_loop(conn); });
}

void Transport::read_loop(std::shared_ptr<Conn> conn) {
  for (;;) {
    unsigned char len_bytes[4];
    if (!read_all(conn->fd, reinterpret_cast<char*>(len_bytes), 4)) break;
    const std::uint32_t len = (std::uint32_t{len_bytes[0]} << 24) | (std::uint32_t{len_bytes[1]} << 16) |
                              (std::uint32_t{len_bytes[2]} << 8) | std::uint32_t{len_bytes[3]};
    if (len > kMaxFrame) break;
    std::string body(len, '\0');
    if (!read_all(conn->fd, body.data(), len)) break;
    WireMessage msg;
    try {
      msg = wire_message_from_json(Json::parse(body));
    } catch (const std::exception&) {
      break;
    }
    if (handlers_.on_message) handlers_.on_message(conn->id, std::move(msg));
  }
  bool current = false;
  {
    std::lock_guard lock(mu_);
    auto it = conns_.find(conn->id);
    if (it != conns_.end() && it->second == conn) {
      conns_.erase(it);
      current = true;
    }
  }
  ::shutdown(conn->fd, SHUT_RDWR);
  ::close(conn->fd);
  if (current && !stopping_ && handlers_.on_disconnect) handlers_.on_disconnect(conn->id);
}

bool Transport::send(const PeerId& peer, const WireMessage& msg) {
  std::shared_ptr<Conn> conn;
  {
    std::lock_guard lock(mu_);
    auto it = conns_.find(peer);
    if (it == conns_.end()) return false;
    conn = it->second;
  }
  const std::string frame = encode_frame(msg);
  std::lock_guard lock(conn->write_mu);
  if (!write_all(conn->fd, frame.data(), frame.size())) {
    ::shutdown(conn->fd, SHUT_RDWR);
    return false;
  }
  return true;
}

std::vector<PeerId> Transport::peers() const {
  std::lock_guard lock(mu_);
  std::vector<PeerId> out;
  for (const auto& [id, c] : conns_) out.push_back(id);
  return out;
}

void Transport::stop() {
  std::vector<std::thread> threads;
  {
    std::lock_guard lock(mu_);
    if (stopping_.exchange(true)) return;
    if (listen_fd_ >= 0) {
      ::shutdown(listen_fd_, SHUT_RDWR);
      ::close(listen_fd_);
      listen_fd_ = -1;
    }
    for (auto& [id, c] : conns_) ::shutdown(c->fd, SHUT_RDWR);
  }
  // Reader threads may still register new threads while we join, so drain
  // until the list stays empty.
  for (;;) {
    {
      std::lock_guard lock(mu_);
      threads.swap(threads_);
    }
    if (threads.empty()) break;
    for (auto& t : threads) t.join();
    threads.clear();
  }
}

}  // namespace ledgergate
