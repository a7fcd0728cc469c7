#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace ndcp {

/// Coordinator <-> source protocol envelope. The schema is closed: no
/// variant has a field that could carry training rows or labels, and
/// decode rejects anything outside the fields listed here.
struct WireMessage {
  enum class Type { Hello, HelloAck, PredictRequest, PredictResponse, Error, Shutdown };

  Type type = Type::Hello;
  std::uint64_t request_id = 0;       // request / response / error
  std::vector<double> features;       // predict_request only
  double p0 = 0.0;                    // predict_response only
  double p1 = 0.0;                    // predict_response only
  std::string message;                // error only
  int protocol_version = 0;           // hello only
  std::size_t feature_dim = 0;        // hello_ack only

  static WireMessage hello(int protocol_version);
  static WireMessage hello_ack(std::size_t feature_dim);
  static WireMessage predict_request(std::uint64_t request_id, std::vector<double> features);
  static WireMessage predict_response(std::uint64_t request_id, double p0, double p1);
  static WireMessage error(std::uint64_t request_id, std::string message);
  static WireMessage shutdown();

  bool operator==(const WireMessage&) const = default;
};

inline constexpr int kProtocolVersion = 1;

const char* wire_type_name(WireMessage::Type type);

/// One single-line UTF-8 JSON object terminated by '\n', fields in
/// declaration order, numbers at full round-trip precision.
std::string encode_message(const WireMessage& msg);

/// Strict inverse of encode_message for one complete line. Unknown types
/// and any extra or missing field are protocol errors; anything that is
/// not a JSON object is malformed.
WireMessage decode_message(std::string_view line);

}  // namespace ndcp
