#include "ndcp/wire.hpp"

#include <json.hpp>

#include "ndcp/error.hpp"

namespace ndcp {

namespace {

using Json = nlohmann::ordered_json;

WireMessage::Type type_from_name(const std::string& name) {
  if (name == "hello") return WireMessage::Type::Hello;
  if (name == "hello_ack") return WireMessage::Type::HelloAck;
  if (name == "predict_request") return WireMessage::Type::PredictRequest;
  if (name == "predict_response") return WireMessage::Type::PredictResponse;
  if (name == "error") return WireMessage::Type::Error;
  if (name == "shutdown") return WireMessage::Type::Shutdown;
  throw Error(ErrorCode::ProtocolError, "unknown message type '" + name + "'");
}

void require_fields(const Json& j, std::initializer_list<const char*> fields) {
  for (const char* f : fields) {
    if (!j.contains(f)) {
      throw Error(ErrorCode::ProtocolError, std::string("missing field '") + f + "'");
    }
  }
  if (j.size() != fields.size()) {
    for (const auto& [key, value] : j.items()) {
      bool allowed = false;
      for (const char* f : fields) {
        if (key == f) allowed = true;
      }
      if (!allowed) {
        throw Error(ErrorCode::ProtocolError, "unexpected field '" + key + "'");
      }
    }
  }
}

std::uint64_t get_u64(const Json& j, const char* field) {
  const auto& v = j.at(field);
  if (!v.is_number_unsigned()) {
    throw Error(ErrorCode::ProtocolError, std::string("field '") + field +
                                              "' must be an unsigned integer");
  }
  return v.get<std::uint64_t>();
}

double get_number(const Json& j, const char* field) {
  const auto& v = j.at(field);
  if (!v.is_number()) {
    throw Error(ErrorCode::ProtocolError, std::string("field '") + field + "' must be a number");
  }
  return v.get<double>();
}

}  // namespace

WireMessage WireMessage::hello(int protocol_version) {
  WireMessage m;
  m.type = Type::Hello;
  m.protocol_version = protocol_version;
  return m;
}

WireMessage WireMessage::hello_ack(std::size_t feature_dim) {
  WireMessage m;
  m.type = Type::HelloAck;
  m.feature_dim = feature_dim;
  return m;
}

WireMessage WireMessage::predict_request(std::uint64_t request_id,
                                         std::vector<double> features) {
  WireMessage m;
  m.type = Type::PredictRequest;
  m.request_id = request_id;
  m.features = std::move(features);
  return m;
}

WireMessage WireMessage::predict_response(std::uint64_t request_id, double p0, double p1) {
  WireMessage m;
  m.type = Type::PredictResponse;
  m.request_id = request_id;
  m.p0 = p0;
  m.p1 = p1;
  return m;
}

WireMessage WireMessage::error(std::uint64_t request_id, std::string message) {
  WireMessage m;
  m.type = Type::Error;
  m.request_id = request_id;
  m.message = std::move(message);
  return m;
}

WireMessage WireMessage::shutdown() {
  WireMessage m;
  m.type = Type::Shutdown;
  return m;
}

const char* wire_type_name(WireMessage::Type type) {
  switch (type) {
    case WireMessage::Type::Hello: return "hello";
    case WireMessage::Type::HelloAck: return "hello_ack";
    case WireMessage::Type::PredictRequest: return "predict_request";
    case WireMessage::Type::PredictResponse: return "predict_response";
    case WireMessage::Type::Error: return "error";
    case WireMessage::Type::Shutdown: return "shutdown";
  }
  return "unknown";
}

std::string encode_message(const WireMessage& msg) {
  Json j;
  j["type"] = wire_type_name(msg.type);
  switch (msg.type) {
    case WireMessage::Type::Hello:
      if (msg.protocol_version <= 0) {
        throw Error(ErrorCode::InvalidMessage, "hello needs a positive protocol_version");
      }
      j["protocol_version"] = msg.protocol_version;
      break;
    case WireMessage::Type::HelloAck:
      if (msg.feature_dim == 0) {
        throw Error(ErrorCode::InvalidMessage, "hello_ack needs a positive feature_dim");
      }
      j["feature_dim"] = msg.feature_dim;
      break;
    case WireMessage::Type::PredictRequest:
      if (msg.features.empty()) {
        throw Error(ErrorCode::InvalidMessage, "predict_request needs features");
      }
      j["request_id"] = msg.request_id;
      j["features"] = msg.features;
      break;
    case WireMessage::Type::PredictResponse:
      j["request_id"] = msg.request_id;
      j["p0"] = msg.p0;
      j["p1"] = msg.p1;
      break;
    case WireMessage::Type::Error:
      j["request_id"] = msg.request_id;
      j["message"] = msg.message;
      break;
    case WireMessage::Type::Shutdown:
      break;
  }
  return j.dump() + "\n";
}

WireMessage decode_message(std::string_view line) {
  while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) {
    line.remove_suffix(1);
  }
  const Json j = Json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw Error(ErrorCode::MalformedJson, "input is not a JSON object");
  }
  if (!j.contains("type") || !j.at("type").is_string()) {
    throw Error(ErrorCode::ProtocolError, "missing or non-string 'type'");
  }

  WireMessage m;
  m.type = type_from_name(j.at("type").get<std::string>());
  switch (m.type) {
    case WireMessage::Type::Hello:
      require_fields(j, {"type", "protocol_version"});
      if (!j.at("protocol_version").is_number_integer()) {
        throw Error(ErrorCode::ProtocolError, "protocol_version must be an integer");
      }
      m.protocol_version = j.at("protocol_version").get<int>();
      break;
    case WireMessage::Type::HelloAck:
      require_fields(j, {"type", "feature_dim"});
      m.feature_dim = static_cast<std::size_t>(get_u64(j, "feature_dim"));
      break;
    case WireMessage::Type::PredictRequest: {
      require_fields(j, {"type", "request_id", "features"});
      m.request_id = get_u64(j, "request_id");
      const auto& feats = j.at("features");
      if (!feats.is_array() || feats.empty()) {
        throw Error(ErrorCode::ProtocolError, "features must be a non-empty array");
      }
      for (const auto& v : feats) {
        if (!v.is_number()) {
          throw Error(ErrorCode::ProtocolError, "features must be numbers");
        }
        m.features.push_back(v.get<double>());
      }
      break;
    }
    case WireMessage::Type::PredictResponse:
      require_fields(j, {"type", "request_id", "p0", "p1"});
      m.request_id = get_u64(j, "request_id");
      m.p0 = get_number(j, "p0");
      m.p1 = get_number(j, "p1");
      break;
    case WireMessage::Type::Error:
      require_fields(j, {"type", "request_id", "message"});
      m.request_id = get_u64(j, "request_id");
      if (!j.at("message").is_string()) {
        throw Error(ErrorCode::ProtocolError, "message must be a string");
      }
      m.message = j.at("message").get<std::string>();
      break;
    case WireMessage::Type::Shutdown:
      require_fields(j, {"type"});
      break;
  }
  return m;
}

}  // namespace ndcp
