#include "ledgergate/gateway.hpp"

#include <httplib.h>

#include "ledgergate/directory.hpp"
#include "ledgergate/error.hpp"
#include "ledgergate/snapshot.hpp"

namespace ledgergate {

namespace {

ApiResponse error(int status, std::string_view code, const std::string& detail) {
  return {status, Json{{"error", code}, {"detail", detail}}};
}

ApiResponse rejection(const SubmitResult& r) {
  switch (r.status) {
    case SubmitStatus::Accepted: break;
    case SubmitStatus::BadSignature: return error(401, "BAD_SIGNATURE", r.admission.detail);
    case SubmitStatus::Duplicate: return error(409, "DUPLICATE_TX", r.admission.detail);
    case SubmitStatus::Rejected: {
      const auto code = to_string(r.admission.reason);
      switch (r.admission.reason) {
        case Reason::UnknownRecord:
        case Reason::UnknownRequest:
        case Reason::UnknownEntity: return error(404, code, r.admission.detail);
        case Reason::NotKeeper:
        case Reason::BadAuthor: return error(403, code, r.admission.detail);
        default: return error(409, code, r.admission.detail);
      }
    }
  }
  return error(500, "INTERNAL", "unexpected submit status");
}

/// 401/404 for requests whose author or signature does not check out.
std::optional<ApiResponse> authenticate(const Transaction& tx, const Directory& dir) {
  try {
    if (!verify_transaction_signature(tx, dir)) {
      return error(401, "BAD_SIGNATURE", "signature does not verify for '" + tx.author.str() + "'");
    }
  } catch (const Error& e) {
    return error(e.code() == ErrorCode::UnknownEntity ? 404 : 400, e.code_name(), e.what());
  }
  return std::nullopt;
}

std::string_view aggregate_name(RequestState s) {
  switch (s) {
    case RequestState::Requested:
    case RequestState::WaitingAuthCheck: return "PENDING";
    case RequestState::Granted: return "GRANTED";
    case RequestState::Denied: return "DENIED";
    case RequestState::Revoked: return "REVOKED";
  }
  return "?";
}

Json record_json(const Record& r) {
  Json keepers = Json::array();
  for (const auto& k : r.keepers) keepers.push_back(k.str());
  return Json{{"record", r.id.str()},
              {"keepers", keepers},
              {"agreement", to_string(r.agreement)},
              {"location", r.location},
              {"status", to_string(r.status)}};
}

Json policy_json(const Policy& p) {
  Json j{{"requestId", p.request.str()},
         {"party", p.party.str()},
         {"record", p.record.str()},
         {"level", to_string(p.level)},
         {"status", to_string(p.status)}};
  j["expiry"] = p.expiry ? Json(*p.expiry) : Json(nullptr);
  return j;
}

Json request_json(const RequestProgress& r) {
  Json votes = Json::object();
  for (const auto& [k, v] : r.votes) votes[k.str()] = to_string(v);
  return Json{{"requestId", r.id.str()}, {"state", aggregate_name(r.state)}, {"votes", votes}};
}

const Entity* node_entity(const Node& node) {
  if (!node.key()) return nullptr;
  return node.params().directory().member_with_key(node.key()->public_key());
}

std::string param(const ApiRequest& req, const std::string& name) {
  auto it = req.query.find(name);
  return it == req.query.end() ? std::string{} : it->second;
}

std::string str_field(const Json& body, const char* name) {
  return body.at(name).get<std::string>();
}

template <class IdT>
IdT id_field(const Json& body, const char* name) {
  IdT id(str_field(body, name));
  if (!id.valid()) throw Error(ErrorCode::Malformed, std::string("invalid identifier in '") + name + "'");
  return id;
}

RecordDescriptor descriptor_from(const Json& body, RecordId record) {
  RecordDescriptor d;
  d.record = std::move(record);
  for (const auto& k : body.value("keepers", Json::array())) {
    EntityId id(k.get<std::string>());
    if (!id.valid()) throw Error(ErrorCode::Malformed, "invalid keeper id");
    d.keepers.push_back(std::move(id));
  }
  const auto rule = parse_agreement(body.value("agreement", std::string("ANY")));
  if (!rule) throw Error(ErrorCode::Malformed, "agreement must be ANY, MAJORITY or ALL");
  d.agreement = *rule;
  d.location = body.value("location", std::string{});
  return d;
}

constexpr std::string_view kRecordsPrefix = "/records/";

}  // namespace

Transaction transaction_from_call(const std::string& method, const std::string& path,
                                  const Json& body, const std::string& signature) {
  try {
    if (!body.is_object()) throw Error(ErrorCode::Malformed, "body must be a JSON object");
    const TxId id = id_field<TxId>(body, "txId");
    const Timestamp ts = body.at("timestamp").get<Timestamp>();
    Transaction tx;
    if (method == "POST" && path == "/access-requests") {
      AccessRequest req;
      req.request = id_field<RequestId>(body, "requestId");
      req.party = id_field<EntityId>(body, "party");
      req.record = id_field<RecordId>(body, "record");
      const auto level = parse_level(body.value("level", std::string("READ")));
      if (!level) throw Error(ErrorCode::Malformed, "level must be READ or WRITE");
      req.level = *level;
      if (body.contains("expiry") && !body.at("expiry").is_null()) {
        req.expiry = body.at("expiry").get<Timestamp>();
      }
      tx = access_request(id, ts, std::move(req));
    } else if (method == "POST" && path == "/authorizations") {
      const std::string verdict = str_field(body, "verdict");
      if (verdict != "GRANT" && verdict != "DENY") {
        throw Error(ErrorCode::Malformed, "verdict must be GRANT or DENY");
      }
      tx = keeper_vote(id, id_field<EntityId>(body, "keeper"), ts, id_field<RequestId>(body, "requestId"),
                       verdict == "GRANT");
    } else if (method == "POST" && path == "/revocations") {
      tx = keeper_revoke(id, id_field<EntityId>(body, "keeper"), ts,
                         id_field<RequestId>(body, "requestId"));
    } else if (method == "POST" && path == "/records") {
      tx = record_create(id, id_field<EntityId>(body, "author"), ts,
                         descriptor_from(body, id_field<RecordId>(body, "record")));
    } else if ((method == "PATCH" || method == "DELETE") && path.rfind(kRecordsPrefix, 0) == 0) {
      RecordId record(path.substr(kRecordsPrefix.size()));
      if (!record.valid()) throw Error(ErrorCode::Malformed, "invalid record id in path");
      const EntityId author = id_field<EntityId>(body, "author");
      tx = method == "PATCH" ? record_update(id, author, ts, descriptor_from(body, std::move(record)))
                             : record_remove(id, author, ts, std::move(record));
    } else {
      throw Error(ErrorCode::Malformed, "no transaction for " + method + " " + path);
    }
    tx.signature = from_hex(signature);
    return tx;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Malformed, std::string("request body: ") + e.what());
  }
}

ApiCall api_call_for(const Transaction& tx) {
  ApiCall call;
  call.signature = to_hex(tx.signature);
  call.body = Json{{"txId", tx.id.str()}, {"timestamp", tx.timestamp}};
  auto put_descriptor = [&](const RecordDescriptor& d) {
    Json keepers = Json::array();
    for (const auto& k : d.keepers) keepers.push_back(k.str());
    call.body["keepers"] = keepers;
    call.body["agreement"] = to_string(d.agreement);
    call.body["location"] = d.location;
  };
  switch (tx.tag) {
    case StateTag::Create: {
      const auto& d = std::get<RecordDescriptor>(tx.payload);
      call.method = "POST";
      call.path = "/records";
      call.body["author"] = tx.author.str();
      call.body["record"] = d.record.str();
      put_descriptor(d);
      break;
    }
    case StateTag::Update: {
      const auto& d = std::get<RecordDescriptor>(tx.payload);
      call.method = "PATCH";
      call.path = std::string(kRecordsPrefix) + d.record.str();
      call.body["author"] = tx.author.str();
      put_descriptor(d);
      break;
    }
    case StateTag::Remove:
      call.method = "DELETE";
      call.path = std::string(kRecordsPrefix) + std::get<RecordRef>(tx.payload).record.str();
      call.body["author"] = tx.author.str();
      break;
    case StateTag::Request: {
      const auto& r = std::get<AccessRequest>(tx.payload);
      call.method = "POST";
      call.path = "/access-requests";
      call.body["requestId"] = r.request.str();
      call.body["party"] = r.party.str();
      call.body["record"] = r.record.str();
      call.body["level"] = to_string(r.level);
      if (r.expiry) call.body["expiry"] = *r.expiry;
      break;
    }
    case StateTag::AuthGrant:
    case StateTag::AuthDeny:
      if (tx.kind != TxKind::IndividualAuth) break;
      call.method = "POST";
      call.path = "/authorizations";
      call.body["requestId"] = std::get<RequestRef>(tx.payload).request.str();
      call.body["keeper"] = tx.author.str();
      call.body["verdict"] = tx.tag == StateTag::AuthGrant ? "GRANT" : "DENY";
      break;
    case StateTag::AuthRevoke:
      if (tx.kind != TxKind::IndividualAuth) break;
      call.method = "POST";
      call.path = "/revocations";
      call.body["requestId"] = std::get<RequestRef>(tx.payload).request.str();
      call.body["keeper"] = tx.author.str();
      break;
    case StateTag::Require:
    case StateTag::RequireAction: break;
  }
  if (call.method.empty()) {
    throw Error(ErrorCode::InvalidTx, std::string("no endpoint accepts ") +
                                          std::string(to_string(tx.kind)) + "/" +
                                          std::string(to_string(tx.tag)));
  }
  return call;
}

ApiResponse Gateway::handle(const ApiRequest& req) const {
  try {
    const std::string& m = req.method;
    const std::string& p = req.path;
    if (m == "POST" && p == "/access-requests") return access_request(req);
    if (m == "GET" && p == "/pending") return pending(req);
    if (m == "POST" && p == "/authorizations") return authorization(req);
    if (m == "POST" && p == "/revocations") return revocation(req);
    if (m == "POST" && p == "/records") return record_write(req, {});
    if (p.rfind(kRecordsPrefix, 0) == 0 && p.size() > kRecordsPrefix.size()) {
      const std::string id = p.substr(kRecordsPrefix.size());
      if (m == "PATCH" || m == "DELETE") return record_write(req, id);
      if (m == "GET") return record_read(req, id);
    }
    if (m == "GET" && p == "/audit") return audit(req);
    if (m == "GET" && p == "/chain") return chain();
    if (m == "GET" && p == "/chain/validate") return validate();
    if (m == "GET" && p == "/status") return status();
    return error(404, "NOT_FOUND", m + " " + p);
  } catch (const Error& e) {
    return error(400, e.code_name(), e.what());
  } catch (const Json::exception& e) {
    return error(400, "MALFORMED", e.what());
  }
}

namespace {

Json parse_body(const ApiRequest& req) {
  try {
    return Json::parse(req.body);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Malformed, std::string("body is not JSON: ") + e.what());
  }
}

}  // namespace

ApiResponse Gateway::access_request(const ApiRequest& req) const {
  const Transaction tx = transaction_from_call(req.method, req.path, parse_body(req), req.signature);
  const auto& ar = std::get<AccessRequest>(tx.payload);
  const Timestamp now = runner_.now();
  ApiResponse response;
  runner_.run([&](Node& node, Outbox& out) {
    if (auto denied = authenticate(tx, node.params().directory())) {
      response = *denied;
      return;
    }
    const auto snap = node.snapshot();
    const AccessDecision d = evaluate(*snap, ar.party, ar.record, ar.level, now);
    if (d.outcome != Outcome::Unknown) {
      Json body{{"outcome", to_string(d.outcome)}, {"reason", d.reason}};
      body["policyRef"] = d.policy_ref ? Json(d.policy_ref->str()) : Json(nullptr);
      if (d.outcome == Outcome::Grant) body["location"] = snap->record(ar.record)->location;
      response = {200, body};
      return;
    }
    if (d.reason == "PENDING") {
      response = error(409, "POLICY_EXISTS", "request '" + d.policy_ref->str() + "' is pending");
      return;
    }
    if (node.provisional().record(ar.record) == nullptr) {
      response = error(404, "UNKNOWN_RECORD", "record '" + ar.record.str() + "'");
      return;
    }
    const Entity* self = node_entity(node);
    if (self == nullptr || !node.can_mine()) {
      response = error(503, "NOT_MEMBER", "this node holds no consortium key and cannot issue REQUIRE");
      return;
    }
    const SubmitResult r = node.submit(tx, out);
    if (!r.ok()) {
      response = r.status == SubmitStatus::Duplicate
                     ? error(409, "POLICY_EXISTS", "request already submitted")
                     : rejection(r);
      return;
    }
    Transaction require = access_require(tx.id, self->id, now, ar.request);
    sign_transaction(require, *node.key());
    const SubmitResult rr = node.submit(require, out);
    if (!rr.ok()) {
      response = rejection(rr);
      return;
    }
    response = {202, Json{{"outcome", "UNKNOWN"},
                          {"status", "PENDING"},
                          {"requestId", ar.request.str()},
                          {"txId", tx.id.str()}}};
  });
  return response;
}

ApiResponse Gateway::pending(const ApiRequest& req) const {
  const EntityId keeper(param(req, "keeper"));
  if (keeper.str().empty()) return error(400, "MALFORMED", "missing keeper parameter");
  ApiResponse response;
  runner_.run([&](Node& node, Outbox&) {
    const Entity* e = node.params().directory().find(keeper);
    if (e == nullptr || e->role != Role::DataKeeper) {
      response = error(404, "UNKNOWN_ENTITY", "'" + keeper.str() + "' is not a registered data keeper");
      return;
    }
    Json items = Json::array();
    for (const auto& a : pending_for(node.provisional(), keeper)) {
      items.push_back({{"requestId", a.request.str()},
                       {"record", a.record.str()},
                       {"party", a.party.str()},
                       {"level", to_string(a.level)},
                       {"keeper", a.keeper.str()},
                       {"since", a.since}});
    }
    response = {200, Json{{"keeper", keeper.str()}, {"pending", items}}};
  });
  return response;
}

ApiResponse Gateway::authorization(const ApiRequest& req) const {
  const Transaction tx = transaction_from_call(req.method, req.path, parse_body(req), req.signature);
  const RequestId request = std::get<RequestRef>(tx.payload).request;
  ApiResponse response;
  runner_.run([&](Node& node, Outbox& out) {
    if (auto denied = authenticate(tx, node.params().directory())) {
      response = *denied;
      return;
    }
    const SubmitResult r = node.submit(tx, out);
    if (!r.ok()) {
      response = rejection(r);
      return;
    }
    const RequestProgress* progress = node.provisional().request(request);
    response = {202, Json{{"txId", tx.id.str()},
                          {"requestId", request.str()},
                          {"aggregate", aggregate_name(progress->state)}}};
  });
  return response;
}

ApiResponse Gateway::revocation(const ApiRequest& req) const {
  const Transaction tx = transaction_from_call(req.method, req.path, parse_body(req), req.signature);
  const RequestId request = std::get<RequestRef>(tx.payload).request;
  ApiResponse response;
  runner_.run([&](Node& node, Outbox& out) {
    if (auto denied = authenticate(tx, node.params().directory())) {
      response = *denied;
      return;
    }
    const SubmitResult r = node.submit(tx, out);
    if (!r.ok()) {
      response = rejection(r);
      return;
    }
    const RequestProgress* progress = node.provisional().request(request);
    response = {202, Json{{"txId", tx.id.str()},
                          {"requestId", request.str()},
                          {"status", to_string(policy_status(progress->state))}}};
  });
  return response;
}

ApiResponse Gateway::record_write(const ApiRequest& req, const std::string& id) const {
  (void)id;
  const Transaction tx = transaction_from_call(req.method, req.path, parse_body(req), req.signature);
  ApiResponse response;
  runner_.run([&](Node& node, Outbox& out) {
    if (auto denied = authenticate(tx, node.params().directory())) {
      response = *denied;
      return;
    }
    const SubmitResult r = node.submit(tx, out);
    if (!r.ok()) {
      response = rejection(r);
      return;
    }
    response = {202, Json{{"txId", tx.id.str()},
                          {"record", record_of(tx)->str()},
                          {"stateTag", to_string(tx.tag)}}};
  });
  return response;
}

ApiResponse Gateway::record_read(const ApiRequest& req, const std::string& id) const {
  const RecordId record(id);
  const bool provisional = param(req, "view") == "provisional";
  ApiResponse response;
  runner_.run([&](Node& node, Outbox&) {
    const Snapshot& snap = provisional ? node.provisional() : *node.snapshot();
    const Record* r = snap.record(record);
    if (r == nullptr) {
      response = error(404, "UNKNOWN_RECORD", "record '" + id + "'");
      return;
    }
    Json policies = Json::array();
    Json requests = Json::array();
    for (const auto& p : snap.policies_for(record)) {
      policies.push_back(policy_json(p));
      requests.push_back(request_json(*snap.request(p.request)));
    }
    response = {200, Json{{"record", record_json(*r)},
                          {"policies", policies},
                          {"requests", requests},
                          {"view", provisional ? "provisional" : "mined"},
                          {"atIndex", snap.at_index()}}};
  });
  return response;
}

ApiResponse Gateway::audit(const ApiRequest& req) const {
  const RecordId record(param(req, "record"));
  std::shared_ptr<const Snapshot> snap;
  runner_.run([&](Node& node, Outbox&) { snap = node.snapshot(); });
  if (snap->record(record) == nullptr) {
    return error(404, "UNKNOWN_RECORD", "record '" + record.str() + "'");
  }
  Json entries = Json::array();
  for (const auto& e : audit_trail(*snap, record)) {
    entries.push_back({{"blockIndex", e.block_index}, {"tx", to_json(e.tx)}});
  }
  return {200, Json{{"record", record.str()}, {"entries", entries}}};
}

ApiResponse Gateway::chain() const {
  Json blocks = Json::array();
  std::uint64_t height = 0;
  runner_.run([&](Node& node, Outbox&) {
    height = node.chain().height();
    for (const auto& b : node.chain().blocks()) blocks.push_back(to_json(b));
  });
  return {200, Json{{"height", height}, {"blocks", blocks}}};
}

ApiResponse Gateway::validate() const {
  ChainVerdict v;
  std::uint64_t height = 0;
  runner_.run([&](Node& node, Outbox&) {
    height = node.chain().height();
    v = validate_chain(node.chain().blocks(), node.params());
  });
  Json body{{"valid", v.valid}, {"height", height}, {"fault", to_string(v.fault)}, {"detail", v.detail}};
  body["firstBadIndex"] = v.first_bad_index ? Json(*v.first_bad_index) : Json(nullptr);
  return {200, body};
}

ApiResponse Gateway::status() const {
  Json body;
  runner_.run([&](Node& node, Outbox&) {
    const Entity* self = node_entity(node);
    Json peers = Json::array();
    for (const auto& p : node.peers()) peers.push_back(p);
    body = Json{{"node", node.name()},
                {"height", node.chain().height()},
                {"tip", node.chain().tip().hash},
                {"mempool", node.mempool().size()},
                {"peers", peers},
                {"canMine", node.can_mine()},
                {"difficulty", node.params().difficulty()},
                {"scheme", to_string(node.params().config().scheme)}};
    body["entity"] = self ? Json(self->id.str()) : Json(nullptr);
  });
  return {200, body};
}

void bind_http(httplib::Server& server, const Gateway& gateway) {
  auto adapter = [&gateway](const httplib::Request& req, httplib::Response& res) {
    ApiRequest a;
    a.method = req.method;
    a.path = req.path;
    for (const auto& [k, v] : req.params) a.query.emplace(k, v);
    a.signature = req.get_header_value(kSignatureHeader);
    a.body = req.body;
    const ApiResponse r = gateway.handle(a);
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  server.Get(".*", adapter);
  server.Post(".*", adapter);
  server.Patch(".*", adapter);
  server.Delete(".*", adapter);
  server.Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  server.set_post_routing_handler([](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_header("Access-Control-Allow-Methods", "GET, POST, PATCH, DELETE, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", std::string("Content-Type, ") + kSignatureHeader);
  });
}

}  // namespace ledgergate
