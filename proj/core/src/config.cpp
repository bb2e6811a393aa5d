#include "ledgergate/config.hpp"

#include <fstream>
#include <sstream>

#include "ledgergate/error.hpp"

namespace ledgergate {

namespace {

std::filesystem::path resolve(const std::filesystem::path& p, const std::filesystem::path& base) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

}  // namespace

NodeConfig node_config_from_json(const Json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw Error(ErrorCode::ConfigInvalid, "node config must be a JSON object");
  try {
    NodeConfig c;
    c.name = j.value("name", c.name);
    if (!j.contains("genesis")) throw Error(ErrorCode::ConfigInvalid, "node config needs 'genesis'");
    c.genesis = resolve(j.at("genesis").get<std::string>(), base_dir);
    if (j.contains("key") && !j.at("key").is_null()) {
      c.key = resolve(j.at("key").get<std::string>(), base_dir);
    }
    c.data_dir = resolve(j.value("dataDir", c.data_dir.string()), base_dir);
    if (j.contains("listen")) c.listen = parse_host_port(j.at("listen").get<std::string>());
    if (j.contains("http")) c.http = parse_host_port(j.at("http").get<std::string>());
    for (const auto& p : j.value("peers", Json::array())) {
      c.peers.push_back(parse_host_port(p.get<std::string>()));
    }
    c.mine = j.value("mine", true);
    if (j.contains("difficulty") && !j.at("difficulty").is_null()) {
      c.difficulty = j.at("difficulty").get<unsigned>();
    }
    return c;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, std::string("node config: ") + e.what());
  }
}

Json to_json(const NodeConfig& c) {
  Json peers = Json::array();
  for (const auto& p : c.peers) peers.push_back(p.str());
  Json j{{"name", c.name},
         {"genesis", c.genesis.string()},
         {"dataDir", c.data_dir.string()},
         {"listen", c.listen.str()},
         {"http", c.http.str()},
         {"peers", peers},
         {"mine", c.mine}};
  j["key"] = c.key.empty() ? Json(nullptr) : Json(c.key.string());
  if (c.difficulty) j["difficulty"] = *c.difficulty;
  return j;
}

NodeConfig load_node_config(const std::filesystem::path& file) {
  Json j;
  try {
    j = Json::parse(read_file(file));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, file.string() + ": " + e.what());
  }
  return node_config_from_json(j, file.parent_path());
}

std::string read_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot read " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& file, const std::string& content) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  out << content;
  out.close();
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + file.string());
}

}  // namespace ledgergate
