// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "jubilee/mechanism.hpp"
#include "jubilee/protocol/fixed_point.hpp"
#include "jubilee/protocol/message.hpp"

namespace jubilee::protocol {

inline std::string outcome_flag_name(OutcomeFlag flag) {
  switch (flag) {
    case OutcomeFlag::TransferExceedsDebt: return "transfer-exceeds-debt";
    case OutcomeFlag::PivotalClampedLow: return "pivotal-clamped-low";
    case OutcomeFlag::PivotalClampedHigh: return "pivotal-clamped-high";
  }
  return "unknown";
}

/// Ordered record of a protocol session: every message in canonical order,
/// the final outcome, and the disclosure notes accumulated along the way.
struct ProtocolTranscript {
  std::string session_id;
  std::vector<Message> messages;
  Outcome outcome;
  std::vector<std::string> leakage_notes;
  bool near_quantization_band = false;
  bool ideal_model = false;  ///< true when produced by the trusted-party reference run
};

inline nlohmann::json outcome_record_json(const ProtocolTranscript& t) {
  nlohmann::json flags = nlohmann::json::array();
  for (OutcomeFlag f : t.outcome.flags) flags.push_back(outcome_flag_name(f));
  return nlohmann::json{
      {"record", "outcome"},
      {"session", t.session_id},
      {"solvent", t.outcome.solvent},
      {"transfers", t.outcome.transfers},
      {"forgiveness", t.outcome.forgiveness},
      {"flags", flags},
      {"leakage-notes", t.leakage_notes},
      {"near-quantization-band", t.near_quantization_band},
      {"ideal-model", t.ideal_model},
  };
}

/// Serialize as JSON lines: one message per line, the outcome record last.
inline std::string transcript_to_jsonl(const ProtocolTranscript& t) {
  std::ostringstream out;
  for (const Message& m : t.messages) out << to_json(m).dump() << '\n';
  out << outcome_record_json(t).dump() << '\n';
  return out.str();
}

inline void write_transcript(const ProtocolTranscript& t, const std::string& path) {
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw std::runtime_error("transcript: cannot open " + path + " for writing");
  file << transcript_to_jsonl(t);
  if (!file) throw std::runtime_error("transcript: write to " + path + " failed");
}

/// Scan every message for a creditor input appearing outside messages the
/// owner sent or received. Checked forms: the input as a JSON number
/// (within 1e-12) and its fixed-point encoding as a decimal string or
/// number. Outcome payloads are deliberate disclosures (transfers are
/// functions of the counterparty type) and carry real-valued outputs, not
/// encodings, so the numeric check skips them while the encoding check
/// still applies.
inline bool transcript_discloses_input(const ProtocolTranscript& t, double theta,
                                       const std::string& owner, const FixedPointCodec& codec) {
  const std::string encoded = std::to_string(field_to_signed(codec.encode(theta)));

  // Walk arbitrary JSON recursively.
  const auto leaf_matches = [&](const nlohmann::json& leaf, bool numeric_check) {
    if (leaf.is_string()) {
      if (leaf.get<std::string>() == encoded) return true;
    } else if (leaf.is_number()) {
      const double v = leaf.get<double>();
      if (v == static_cast<double>(field_to_signed(codec.encode(theta)))) return true;
      if (numeric_check && std::abs(v - theta) <= 1e-12) return true;
    }
    return false;
  };
  const std::function<bool(const nlohmann::json&, bool)> walk =
      [&](const nlohmann::json& node, bool numeric_check) -> bool {
    if (node.is_object() || node.is_array()) {
      for (const auto& child : node) {
        if (walk(child, numeric_check)) return true;
      }
      return false;
    }
    return leaf_matches(node, numeric_check);
  };

  for (const Message& m : t.messages) {
    if (m.from == owner || m.to == owner) continue;
    if (walk(m.body, /*numeric_check=*/m.kind != "outcome")) return true;
  }
  return false;
}

/// True when any transfer-share reveal appears in the transcript (must never
/// happen for bankrupt sessions).
inline bool transcript_opens_transfers(const ProtocolTranscript& t) {
  for (const Message& m : t.messages) {
    if (m.kind == "reveal" && m.body.is_object() && m.body.contains("what") &&
        m.body.at("what").is_string() && m.body.at("what").get<std::string>() == "transfer") {
      return true;
    }
  }
  return false;
}

}  // namespace jubilee::protocol
