#include "ledgergate/encoding.hpp"

#include "ledgergate/error.hpp"

namespace ledgergate {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::EncodeUnrepresentable, what);
}

template <class Tag>
void require_id(const Id<Tag>& id, const char* field) {
  if (!id.valid()) {
    throw Error(ErrorCode::EncodeUnrepresentable,
                std::string("invalid identifier in ") + field + ": '" + id.str() + "'");
  }
}

void check_payload(const Payload& payload) {
  std::visit(
      [](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, RecordDescriptor>) {
          require_id(p.record, "record");
          for (const auto& k : p.keepers) require_id(k, "keepers");
        } else if constexpr (std::is_same_v<T, RecordRef>) {
          require_id(p.record, "record");
        } else if constexpr (std::is_same_v<T, AccessRequest>) {
          require_id(p.request, "requestId");
          require_id(p.party, "party");
          require_id(p.record, "record");
          require(!p.expiry || *p.expiry >= 0, "negative expiry");
        } else {
          require_id(p.request, "requestId");
        }
      },
      payload);
}

void check(const Transaction& tx) {
  require_id(tx.id, "txId");
  require_id(tx.author, "author");
  require(tx.timestamp >= 0, "negative timestamp");
  require(valid_for(tx.kind, tx.tag), "state tag not valid for transaction kind");
  require(payload_matches(tx.tag, tx.payload), "payload does not match state tag");
  check_payload(tx.payload);
}

std::string dump(const Json& j) {
  try {
    return j.dump();
  } catch (const Json::type_error& e) {
    throw Error(ErrorCode::EncodeUnrepresentable, e.what());
  }
}

Json ids(const std::vector<EntityId>& v) {
  Json arr = Json::array();
  for (const auto& id : v) arr.push_back(id.str());
  return arr;
}

Json signing_object(const Transaction& tx) {
  return Json{{"author", tx.author.str()},
              {"kind", to_string(tx.kind)},
              {"payload", to_json(tx.payload)},
              {"stateTag", to_string(tx.tag)},
              {"timestamp", tx.timestamp},
              {"txId", tx.id.str()}};
}

[[noreturn]] void malformed(const std::string& what) { throw Error(ErrorCode::Malformed, what); }

const Json& field(const Json& j, const char* name) {
  if (!j.is_object()) malformed("expected object");
  auto it = j.find(name);
  if (it == j.end()) malformed(std::string("missing field '") + name + "'");
  return *it;
}

std::string str_field(const Json& j, const char* name) {
  const Json& v = field(j, name);
  if (!v.is_string()) malformed(std::string("field '") + name + "' must be a string");
  return v.get<std::string>();
}

std::uint64_t uint_field(const Json& j, const char* name) {
  const Json& v = field(j, name);
  if (!v.is_number_unsigned()) malformed(std::string("field '") + name + "' must be unsigned");
  return v.get<std::uint64_t>();
}

Timestamp time_field(const Json& j, const char* name) {
  const Json& v = field(j, name);
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
    malformed(std::string("field '") + name + "' must be a non-negative integer");
  }
  return v.get<std::int64_t>();
}

template <class E>
E enum_field(const Json& j, const char* name, std::optional<E> (*parse)(std::string_view)) {
  const auto s = str_field(j, name);
  auto v = parse(s);
  if (!v) malformed(std::string("field '") + name + "' has unknown value '" + s + "'");
  return *v;
}

Bytes hex_field(const Json& j, const char* name) { return from_hex(str_field(j, name)); }

Payload payload_from_json(StateTag tag, const Json& j) {
  switch (tag) {
    case StateTag::Create:
    case StateTag::Update: {
      RecordDescriptor d;
      d.record = RecordId(str_field(j, "record"));
      const Json& keepers = field(j, "keepers");
      if (!keepers.is_array()) malformed("keepers must be an array");
      for (const auto& k : keepers) {
        if (!k.is_string()) malformed("keeper ids must be strings");
        d.keepers.emplace_back(k.get<std::string>());
      }
      d.agreement = enum_field<AgreementRule>(j, "agreement", &parse_agreement);
      d.location = str_field(j, "location");
      return d;
    }
    case StateTag::Remove: return RecordRef{RecordId(str_field(j, "record"))};
    case StateTag::Request: {
      AccessRequest r;
      r.request = RequestId(str_field(j, "requestId"));
      r.party = EntityId(str_field(j, "party"));
      r.record = RecordId(str_field(j, "record"));
      r.level = enum_field<PermissionLevel>(j, "level", &parse_level);
      if (j.contains("expiry")) r.expiry = time_field(j, "expiry");
      return r;
    }
    default: return RequestRef{RequestId(str_field(j, "requestId"))};
  }
}

}  // namespace

void BlockData::add(Transaction tx) {
  switch (tx.kind) {
    case TxKind::RecordOp: records.push_back(std::move(tx)); break;
    case TxKind::PolicyOp: policies.push_back(std::move(tx)); break;
    case TxKind::IndividualAuth: individual_auths.push_back(std::move(tx)); break;
  }
}

Json to_json(const Payload& payload) {
  return std::visit(
      [](const auto& p) -> Json {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, RecordDescriptor>) {
          return Json{{"agreement", to_string(p.agreement)},
                      {"keepers", ids(p.keepers)},
                      {"location", p.location},
                      {"record", p.record.str()}};
        } else if constexpr (std::is_same_v<T, RecordRef>) {
          return Json{{"record", p.record.str()}};
        } else if constexpr (std::is_same_v<T, AccessRequest>) {
          Json j{{"level", to_string(p.level)},
                 {"party", p.party.str()},
                 {"record", p.record.str()},
                 {"requestId", p.request.str()}};
          if (p.expiry) j["expiry"] = *p.expiry;
          return j;
        } else {
          return Json{{"requestId", p.request.str()}};
        }
      },
      payload);
}

Json to_json(const Transaction& tx) {
  Json j = signing_object(tx);
  j["signature"] = to_hex(tx.signature);
  return j;
}

Json to_json(const BlockData& data) {
  auto list = [](const std::vector<Transaction>& txs) {
    Json arr = Json::array();
    for (const auto& tx : txs) arr.push_back(to_json(tx));
    return arr;
  };
  return Json{{"individualAuths", list(data.individual_auths)},
              {"policies", list(data.policies)},
              {"records", list(data.records)}};
}

Json to_json(const Block& b) {
  return Json{{"data", to_json(b.data)},
              {"digitalSign", to_hex(b.digital_sign)},
              {"hash", b.hash},
              {"index", b.index},
              {"nonce", b.nonce},
              {"previousHash", b.previous_hash},
              {"timestamp", b.timestamp}};
}

Transaction transaction_from_json(const Json& j) {
  Transaction tx;
  tx.id = TxId(str_field(j, "txId"));
  tx.kind = enum_field<TxKind>(j, "kind", &parse_kind);
  tx.tag = enum_field<StateTag>(j, "stateTag", &parse_tag);
  if (!valid_for(tx.kind, tx.tag)) malformed("state tag not valid for transaction kind");
  tx.payload = payload_from_json(tx.tag, field(j, "payload"));
  tx.author = EntityId(str_field(j, "author"));
  tx.timestamp = time_field(j, "timestamp");
  tx.signature = j.contains("signature") ? hex_field(j, "signature") : Bytes{};
  return tx;
}

BlockData block_data_from_json(const Json& j) {
  BlockData data;
  auto load = [&](const char* name, TxKind kind, std::vector<Transaction>& out) {
    const Json& arr = field(j, name);
    if (!arr.is_array()) malformed(std::string(name) + " must be an array");
    for (const auto& item : arr) {
      Transaction tx = transaction_from_json(item);
      if (tx.kind != kind) malformed(std::string("transaction of wrong kind in ") + name);
      out.push_back(std::move(tx));
    }
  };
  load("records", TxKind::RecordOp, data.records);
  load("policies", TxKind::PolicyOp, data.policies);
  load("individualAuths", TxKind::IndividualAuth, data.individual_auths);
  return data;
}

Block block_from_json(const Json& j) {
  Block b;
  b.index = uint_field(j, "index");
  b.timestamp = time_field(j, "timestamp");
  b.previous_hash = str_field(j, "previousHash");
  b.digital_sign = hex_field(j, "digitalSign");
  b.data = block_data_from_json(field(j, "data"));
  b.nonce = uint_field(j, "nonce");
  b.hash = str_field(j, "hash");
  return b;
}

std::string canonical_encode(const Transaction& tx) {
  check(tx);
  return dump(to_json(tx));
}

std::string canonical_encode(const BlockData& data) {
  data.for_each([](const Transaction& tx) { check(tx); });
  return dump(to_json(data));
}

std::string canonical_encode(const Block& block) {
  require(block.timestamp >= 0, "negative block timestamp");
  block.data.for_each([](const Transaction& tx) { check(tx); });
  return dump(to_json(block));
}

std::string signing_preimage(const Transaction& tx) {
  check(tx);
  return dump(signing_object(tx));
}

void sign_transaction(Transaction& tx, const PrivateKey& key) {
  tx.signature = key.sign(signing_preimage(tx));
}

}  // namespace ledgergate
