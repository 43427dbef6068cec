// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace jubilee::protocol {

/// Wire protocol version; each TCP connection opens with this single byte,
/// and every message carries it in the "v" field.
inline constexpr int kProtocolVersion = 1;
inline constexpr unsigned char kVersionByte = 0x01;

/// Canonical party identifiers, in deterministic ordering: creditors by
/// index, then the debtor, then the evaluators.
inline const std::vector<std::string>& party_order() {
  static const std::vector<std::string> order = {"c1", "c2", "debtor", "E1", "E2"};
  return order;
}

/// One protocol message. Payload kinds: "share" (creditor input shares to an
/// evaluator), "mask" (evaluator mask-seed exchange), "reveal" (masked
/// solvency difference or transfer shares), "outcome" (decision broadcast
/// and per-party results). Field elements travel as decimal strings.
struct Message {
  int v = kProtocolVersion;
  std::string session;
  std::string from;
  std::string to;
  std::string kind;
  nlohmann::json body;
};

inline nlohmann::json to_json(const Message& m) {
  return nlohmann::json{
      {"v", m.v}, {"session", m.session}, {"from", m.from},
      {"to", m.to}, {"kind", m.kind},     {"body", m.body},
  };
}

/// Raised when a peer speaks a protocol version this build does not
/// understand (either the transport hello byte or the envelope `v` field).
struct VersionMismatchError : std::runtime_error {
  explicit VersionMismatchError(const std::string& what) : std::runtime_error(what) {}
};

inline Message message_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("v") || !j.at("v").is_number_integer() ||
      !j.contains("session") || !j.at("session").is_string() || !j.contains("from") ||
      !j.at("from").is_string() || !j.contains("to") || !j.at("to").is_string() ||
      !j.contains("kind") || !j.at("kind").is_string() || !j.contains("body")) {
    throw std::invalid_argument("protocol message: malformed JSON envelope");
  }
  Message m;
  m.v = j.at("v").get<int>();
  if (m.v != kProtocolVersion) {
    throw VersionMismatchError("protocol message: unsupported version");
  }
  m.session = j.at("session").get<std::string>();
  m.from = j.at("from").get<std::string>();
  m.to = j.at("to").get<std::string>();
  m.kind = j.at("kind").get<std::string>();
  if (m.kind != "share" && m.kind != "mask" && m.kind != "reveal" && m.kind != "outcome") {
    throw std::invalid_argument("protocol message: unknown payload kind");
  }
  m.body = j.at("body");
  return m;
}

/// Length-prefixed framing: 4-byte big-endian payload length, then the JSON
/// bytes.
inline std::vector<unsigned char> frame_message(const Message& m) {
  const std::string payload = to_json(m).dump();
  if (payload.size() > 0xFFFFFFFFull) {
    throw std::length_error("protocol message: payload too large to frame");
  }
  std::vector<unsigned char> frame;
  frame.reserve(4 + payload.size());
  const std::uint32_t len = static_cast<std::uint32_t>(payload.size());
  frame.push_back(static_cast<unsigned char>((len >> 24) & 0xFF));
  frame.push_back(static_cast<unsigned char>((len >> 16) & 0xFF));
  frame.push_back(static_cast<unsigned char>((len >> 8) & 0xFF));
  frame.push_back(static_cast<unsigned char>(len & 0xFF));
  frame.insert(frame.end(), payload.begin(), payload.end());
  return frame;
}

/// Parse one frame's payload bytes (after the length prefix was consumed).
inline Message parse_frame_payload(const std::string& payload) {
  nlohmann::json j = nlohmann::json::parse(payload, nullptr, false);
  if (j.is_discarded()) throw std::invalid_argument("protocol message: payload is not valid JSON");
  return message_from_json(j);
}

}  // namespace jubilee::protocol
