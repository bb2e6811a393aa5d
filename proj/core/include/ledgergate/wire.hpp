#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ledgergate/encoding.hpp"

namespace ledgergate {

enum class MessageKind { Hello, GetLatest, Latest, GetChain, Chain, AnnounceBlock, SubmitTx };

std::string_view to_string(MessageKind kind) noexcept;
std::optional<MessageKind> parse_message_kind(std::string_view s) noexcept;

/// One protocol message. Which fields are meaningful depends on `kind`:
/// HELLO carries node/height, LATEST and ANNOUNCE_BLOCK one block, CHAIN the
/// full block list, SUBMIT_TX one transaction.
struct WireMessage {
  MessageKind kind = MessageKind::Hello;
  std::string node;
  std::uint64_t height = 0;
  std::vector<Block> blocks;
  std::optional<Transaction> tx;

  static WireMessage hello(std::string node, std::uint64_t height);
  static WireMessage get_latest();
  static WireMessage latest(Block block);
  static WireMessage get_chain();
  static WireMessage chain(std::vector<Block> blocks);
  static WireMessage announce(Block block);
  static WireMessage submit(Transaction tx);

  /// The single block of LATEST / ANNOUNCE_BLOCK.
  const Block& block() const { return blocks.at(0); }

  friend bool operator==(const WireMessage&, const WireMessage&) = default;
};

/// {"kind": "<UPPERCASE TAG>", "body": {...}}
Json to_json(const WireMessage& msg);
/// Throws Error(Malformed).
WireMessage wire_message_from_json(const Json& j);

/// 4-byte big-endian length followed by the JSON text.
std::string encode_frame(const WireMessage& msg);

}  // namespace ledgergate
