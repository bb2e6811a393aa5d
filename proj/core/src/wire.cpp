#include "ledgergate/wire.hpp"

#include <array>

#include "ledgergate/error.hpp"

namespace ledgergate {

namespace {

constexpr std::array<std::pair<MessageKind, std::string_view>, 7> kKinds{{
    {MessageKind::Hello, "HELLO"},
    {MessageKind::GetLatest, "GET_LATEST"},
    {MessageKind::Latest, "LATEST"},
    {MessageKind::GetChain, "GET_CHAIN"},
    {MessageKind::Chain, "CHAIN"},
    {MessageKind::AnnounceBlock, "ANNOUNCE_BLOCK"},
    {MessageKind::SubmitTx, "SUBMIT_TX"},
}};

}  // namespace

std::string_view to_string(MessageKind kind) noexcept {
  for (const auto& [k, name] : kKinds) {
    if (k == kind) return name;
  }
  return "?";
}

std::optional<MessageKind> parse_message_kind(std::string_view s) noexcept {
  for (const auto& [k, name] : kKinds) {
    if (name == s) return k;
  }
  return std::nullopt;
}

WireMessage WireMessage::hello(std::string node, std::uint64_t height) {
  WireMessage m;
  m.kind = MessageKind::Hello;
  m.node = std::move(node);
  m.height = height;
  return m;
}

WireMessage WireMessage::get_latest() {
  WireMessage m;
  m.kind = MessageKind::GetLatest;
  return m;
}

WireMessage WireMessage::latest(Block block) {
  WireMessage m;
  m.kind = MessageKind::Latest;
  m.blocks.push_back(std::move(block));
  return m;
}

WireMessage WireMessage::get_chain() {
  WireMessage m;
  m.kind = MessageKind::GetChain;
  return m;
}

WireMessage WireMessage::chain(std::vector<Block> blocks) {
  WireMessage m;
  m.kind = MessageKind::Chain;
  m.blocks = std::move(blocks);
  return m;
}

WireMessage WireMessage::announce(Block block) {
  WireMessage m;
  m.kind = MessageKind::AnnounceBlock;
  m.blocks.push_back(std::move(block));
  return m;
}

WireMessage WireMessage::submit(Transaction tx) {
  WireMessage m;
  m.kind = MessageKind::SubmitTx;
  m.tx = std::move(tx);
  return m;
}

Json to_json(const WireMessage& msg) {
  Json body = Json::object();
  switch (msg.kind) {
    case MessageKind::Hello:
      body = Json{{"node", msg.node}, {"height", msg.height}};
      break;
    case MessageKind::Latest:
    case MessageKind::AnnounceBlock:
      body = Json{{"block", to_json(msg.block())}};
      break;
    case MessageKind::Chain: {
      Json blocks = Json::array();
      for (const auto& b : msg.blocks) blocks.push_back(to_json(b));
      body = Json{{"blocks", blocks}};
      break;
    }
    case MessageKind::SubmitTx:
      body = Json{{"tx", to_json(*msg.tx)}};
      break;
    case MessageKind::GetLatest:
    case MessageKind::GetChain:
      break;
  }
  return Json{{"kind", to_string(msg.kind)}, {"body", body}};
}

WireMessage wire_message_from_json(const Json& j) {
  try {
    const auto kind = parse_message_kind(j.at("kind").get<std::string>());
    if (!kind) throw Error(ErrorCode::Malformed, "unknown message kind");
    const Json& body = j.at("body");
    switch (*kind) {
      case MessageKind::Hello:
        return WireMessage::hello(body.at("node").get<std::string>(),
                                  body.at("height").get<std::uint64_t>());
      case MessageKind::GetLatest: return WireMessage::get_latest();
      case MessageKind::GetChain: return WireMessage::get_chain();
      case MessageKind::Latest: return WireMessage::latest(block_from_json(body.at("block")));
      case MessageKind::AnnounceBlock:
        return WireMessage::announce(block_from_json(body.at("block")));
      case MessageKind::Chain: {
        std::vector<Block> blocks;
        for (const auto& b : body.at("blocks")) blocks.push_back(block_from_json(b));
        return WireMessage::chain(std::move(blocks));
      }
      case MessageKind::SubmitTx: return WireMessage::submit(transaction_from_json(body.at("tx")));
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Malformed, std::string("wire message: ") + e.what());
  }
  throw Error(ErrorCode::Malformed, "wire message");
}

std::string encode_frame(const WireMessage& msg) {
  const std::string body = to_json(msg).dump();
  const auto len = static_cast<std::uint32_t>(body.size());
  std::string out;
  out.reserve(body.size() + 4);
  out.push_back(static_cast<char>((len >> 24) & 0xff));
  out.push_back(static_cast<char>((len >> 16) & 0xff));
  out.push_back(static_cast<char>((len >> 8) & 0xff));
  out.push_back(static_cast<char>(len & 0xff));
  out += body;
  return out;
}

}  // namespace ledgergate
