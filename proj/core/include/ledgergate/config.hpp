#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ledgergate/encoding.hpp"
#include "ledgergate/transport.hpp"

namespace ledgergate {

/// Settings of one running node. Relative paths in the file resolve against
/// the directory that holds it.
struct NodeConfig {
  std::string name = "node";
  std::filesystem::path genesis;
  /// Signing key (PEM). Without a member key the node runs read-only.
  std::filesystem::path key;
  std::filesystem::path data_dir = "data";
  HostPort listen{"127.0.0.1", 7000};
  HostPort http{"127.0.0.1", 8000};
  std::vector<HostPort> peers;
  bool mine = true;
  /// Overrides the difficulty stored in the genesis file. Every node of a
  /// network must agree on it.
  std::optional<unsigned> difficulty;
};

/// Throws Error(ConfigInvalid).
NodeConfig node_config_from_json(const Json& j, const std::filesystem::path& base_dir = {});
Json to_json(const NodeConfig& config);

/// Reads and parses a config file. Throws Error(IoFailure) or
/// Error(ConfigInvalid).
NodeConfig load_node_config(const std::filesystem::path& file);

/// Whole-file helpers shared by the tools. Throw Error(IoFailure).
std::string read_file(const std::filesystem::path& file);
void write_file(const std::filesystem::path& file, const std::string& content);

}  // namespace ledgergate
