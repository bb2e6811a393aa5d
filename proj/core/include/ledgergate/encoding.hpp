#pragma once

// Canonical byte encoding and the JSON shapes used on the wire and the API.
//
// The canonical form is JSON with object keys in lexicographic order, arrays
// in insertion order, integers as decimal ASCII, strings as UTF-8 and no
// insignificant whitespace. It is the only preimage ever hashed or signed.

#include <string>

#include <nlohmann/json.hpp>

#include "ledgergate/block.hpp"
#include "ledgergate/model.hpp"

namespace ledgergate {

using Json = nlohmann::json;

Json to_json(const Payload& payload);
Json to_json(const Transaction& tx);
Json to_json(const BlockData& data);
Json to_json(const Block& block);

// The from_json family throws Error(Malformed) on shape or value errors.
Transaction transaction_from_json(const Json& j);
BlockData block_data_from_json(const Json& j);
Block block_from_json(const Json& j);

// These throw Error(EncodeUnrepresentable) when a field holds a value the
// encoding cannot represent (invalid identifier, negative timestamp, payload
// alternative that does not match the state tag, invalid UTF-8).
std::string canonical_encode(const Transaction& tx);
std::string canonical_encode(const BlockData& data);
std::string canonical_encode(const Block& block);

/// Bytes a transaction author signs: the canonical encoding of every field
/// except the signature.
std::string signing_preimage(const Transaction& tx);

/// Signs `tx` in place with `key`.
void sign_transaction(Transaction& tx, const PrivateKey& key);

}  // namespace ledgergate
