#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>

#include "ledgergate/encoding.hpp"
#include "ledgergate/node.hpp"

namespace httplib {
class Server;
}

namespace ledgergate {

/// Serialized access to a running node. `run` executes `fn` on the node's
/// event loop and returns once it finished; messages queued in the outbox
/// are sent afterwards.
class NodeRunner {
 public:
  virtual ~NodeRunner() = default;
  virtual void run(const std::function<void(Node&, Outbox&)>& fn) = 0;
  virtual Timestamp now() const = 0;
};

struct ApiRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  /// Hex signature over the transaction's signing preimage (X-Signature).
  std::string signature;
  std::string body;
};

struct ApiResponse {
  int status = 200;
  Json body;
};

inline constexpr const char* kSignatureHeader = "X-Signature";

/// The HTTP API as a pure request handler. Mutations funnel into the node
/// through NodeRunner; decisions read the mined snapshot only.
class Gateway {
 public:
  explicit Gateway(NodeRunner& runner) : runner_(runner) {}

  ApiResponse handle(const ApiRequest& req) const;

 private:
  ApiResponse access_request(const ApiRequest& req) const;
  ApiResponse pending(const ApiRequest& req) const;
  ApiResponse authorization(const ApiRequest& req) const;
  ApiResponse revocation(const ApiRequest& req) const;
  ApiResponse record_write(const ApiRequest& req, const std::string& id) const;
  ApiResponse record_read(const ApiRequest& req, const std::string& id) const;
  ApiResponse audit(const ApiRequest& req) const;
  ApiResponse chain() const;
  ApiResponse validate() const;
  ApiResponse status() const;

  NodeRunner& runner_;
};

/// Registers every route of `gateway` on `server`, with CORS headers.
void bind_http(httplib::Server& server, const Gateway& gateway);

/// A signed transaction as the HTTP call that carries it.
struct ApiCall {
  std::string method;
  std::string path;
  Json body;
  std::string signature;
};

/// Maps a signed transaction to its endpoint. Throws Error(InvalidTx) for
/// transactions no endpoint accepts (REQUIRE is issued by the gateway).
ApiCall api_call_for(const Transaction& tx);

/// Inverse of api_call_for: rebuilds the transaction a call describes, with
/// the signature attached. Throws Error(Malformed).
Transaction transaction_from_call(const std::string& method, const std::string& path,
                                  const Json& body, const std::string& signature);

}  // namespace ledgergate
