// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "jubilee/distributions.hpp"
#include "jubilee/mechanism.hpp"
#include "jubilee/protocol/tcp.hpp"
#include "jubilee/quadrature.hpp"

namespace jubilee {

/// Any malformed, unknown-key, wrong-type or semantically invalid
/// configuration is a ConfigError (the CLI maps it to exit code 1).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (const char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

namespace config_detail {

inline void require_object(const nlohmann::json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError("config: " + where + " must be an object");
}

inline void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                                const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (allowed.find(it.key()) == allowed.end()) {
      throw ConfigError("config: unknown key '" + it.key() + "' in " + where);
    }
  }
}

inline double get_number(const nlohmann::json& j, const std::string& key,
                         const std::string& where) {
  if (!j.contains(key) || !j.at(key).is_number()) {
    throw ConfigError("config: " + where + " requires numeric '" + key + "'");
  }
  return j.at(key).get<double>();
}

inline double get_number_or(const nlohmann::json& j, const std::string& key, double fallback,
                            const std::string& where) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number()) {
    throw ConfigError("config: " + where + " key '" + key + "' must be numeric");
  }
  return j.at(key).get<double>();
}

inline std::int64_t get_integer(const nlohmann::json& j, const std::string& key,
                                std::int64_t fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number_integer()) {
    throw ConfigError("config: " + where + " key '" + key + "' must be an integer");
  }
  return j.at(key).get<std::int64_t>();
}

inline std::string get_string(const nlohmann::json& j, const std::string& key,
                              const std::string& where) {
  if (!j.contains(key) || !j.at(key).is_string()) {
    throw ConfigError("config: " + where + " requires string '" + key + "'");
  }
  return j.at(key).get<std::string>();
}

}  // namespace config_detail

inline TypeDistribution dist_from_json(const nlohmann::json& j) {
  using config_detail::get_number;
  using config_detail::get_string;
  config_detail::require_object(j, "market.dist");
  const std::string kind = get_string(j, "kind", "market.dist");
  try {
    if (kind == "uniform") {
      config_detail::reject_unknown_keys(j, {"kind", "lo", "hi"}, "market.dist");
      return TypeDistribution::uniform(get_number(j, "lo", "market.dist"),
                                       get_number(j, "hi", "market.dist"));
    }
    if (kind == "truncated-exponential") {
      config_detail::reject_unknown_keys(j, {"kind", "rate", "lo", "hi"}, "market.dist");
      return TypeDistribution::truncated_exponential(get_number(j, "rate", "market.dist"),
                                                     get_number(j, "lo", "market.dist"),
                                                     get_number(j, "hi", "market.dist"));
    }
    if (kind == "truncated-pareto") {
      config_detail::reject_unknown_keys(j, {"kind", "shape", "scale", "lo", "hi"}, "market.dist");
      return TypeDistribution::truncated_pareto(get_number(j, "shape", "market.dist"),
                                                get_number(j, "scale", "market.dist"),
                                                get_number(j, "lo", "market.dist"),
                                                get_number(j, "hi", "market.dist"));
    }
    if (kind == "truncated-positive-normal") {
      config_detail::reject_unknown_keys(j, {"kind", "sigma", "lo", "hi"}, "market.dist");
      return TypeDistribution::truncated_positive_normal(get_number(j, "sigma", "market.dist"),
                                                         get_number(j, "lo", "market.dist"),
                                                         get_number(j, "hi", "market.dist"));
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: market.dist invalid: ") + e.what());
  }
  throw ConfigError("config: market.dist kind '" + kind + "' is not supported");
}

inline nlohmann::json dist_to_json(const TypeDistribution& d) {
  nlohmann::json j;
  const auto& s = d.support();
  switch (d.family()) {
    case TypeDistribution::Family::Uniform:
      j = {{"kind", "uniform"}};
      break;
    case TypeDistribution::Family::TruncatedExponential:
      j = {{"kind", "truncated-exponential"}, {"rate", d.param1()}};
      break;
    case TypeDistribution::Family::TruncatedPareto:
      j = {{"kind", "truncated-pareto"}, {"shape", d.param1()}, {"scale", d.param2()}};
      break;
    case TypeDistribution::Family::TruncatedPositiveNormal:
      j = {{"kind", "truncated-positive-normal"}, {"sigma", d.param1()}};
      break;
  }
  j["lo"] = s.lo;
  j["hi"] = s.hi;
  return j;
}

inline RevisionSpec revision_from_json(const nlohmann::json& j) {
  config_detail::require_object(j, "market.revision");
  const std::string kind = config_detail::get_string(j, "kind", "market.revision");
  if (kind == "zero") {
    config_detail::reject_unknown_keys(j, {"kind"}, "market.revision");
    return RevisionSpec::zero();
  }
  if (kind == "linear") {
    config_detail::reject_unknown_keys(j, {"kind", "alpha"}, "market.revision");
    return RevisionSpec::linear(config_detail::get_number(j, "alpha", "market.revision"));
  }
  throw ConfigError("config: market.revision kind '" + kind + "' is not supported");
}

inline nlohmann::json revision_to_json(const RevisionSpec& r) {
  if (r.kind == RevisionSpec::Kind::Zero) return {{"kind", "zero"}};
  return {{"kind", "linear"}, {"alpha", r.alpha}};
}

inline MarketParams market_from_json(const nlohmann::json& j) {
  using config_detail::get_number;
  using config_detail::get_number_or;
  config_detail::require_object(j, "market");
  config_detail::reject_unknown_keys(j, {"D", "n", "A", "I", "dist", "revision"}, "market");
  if (!j.contains("dist")) throw ConfigError("config: market requires 'dist'");
  const double total_debt = get_number(j, "D", "market");
  const std::int64_t n = config_detail::get_integer(j, "n", -1, "market");
  if (n < 0) throw ConfigError("config: market requires integer 'n'");
  const double continuation = get_number(j, "A", "market");
  const double investment = get_number_or(j, "I", 0.0, "market");
  TypeDistribution dist = dist_from_json(j.at("dist"));
  RevisionSpec revision =
      j.contains("revision") ? revision_from_json(j.at("revision")) : RevisionSpec::zero();
  try {
    return MarketParams(total_debt, static_cast<int>(n), continuation, investment,
                        std::move(dist), revision);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: market invalid: ") + e.what());
  }
}

inline nlohmann::json market_to_json(const MarketParams& m) {
  return nlohmann::json{{"D", m.total_debt()},       {"n", m.creditor_count()},
                        {"A", m.continuation_value()}, {"I", m.investment()},
                        {"dist", dist_to_json(m.dist())},
                        {"revision", revision_to_json(m.revision())}};
}

inline QuadratureSpec quadrature_from_json(const nlohmann::json& j) {
  config_detail::require_object(j, "quadrature");
  config_detail::reject_unknown_keys(j, {"scheme", "nodes", "samples", "seed"}, "quadrature");
  QuadratureSpec q;
  const std::string scheme = config_detail::get_string(j, "scheme", "quadrature");
  if (scheme == "gauss-legendre") {
    q.scheme = QuadratureSpec::Scheme::GaussLegendre;
  } else if (scheme == "monte-carlo") {
    q.scheme = QuadratureSpec::Scheme::MonteCarlo;
  } else {
    throw ConfigError("config: quadrature scheme '" + scheme + "' is not supported");
  }
  q.nodes = static_cast<int>(config_detail::get_integer(j, "nodes", q.nodes, "quadrature"));
  const std::int64_t samples = config_detail::get_integer(
      j, "samples", static_cast<std::int64_t>(q.samples), "quadrature");
  if (samples < 0) throw ConfigError("config: quadrature samples must be non-negative");
  q.samples = static_cast<std::size_t>(samples);
  const std::int64_t seed =
      config_detail::get_integer(j, "seed", static_cast<std::int64_t>(q.seed), "quadrature");
  if (seed < 0) throw ConfigError("config: quadrature seed must be non-negative");
  q.seed = static_cast<std::uint64_t>(seed);
  try {
    q.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return q;
}

inline nlohmann::json quadrature_to_json(const QuadratureSpec& q) {
  return nlohmann::json{
      {"scheme", q.scheme == QuadratureSpec::Scheme::GaussLegendre ? "gauss-legendre"
                                                                   : "monte-carlo"},
      {"nodes", q.nodes},
      {"samples", q.samples},
      {"seed", q.seed}};
}

struct ProtocolSettings {
  enum class Transport { InProcess, Tcp };
  Transport transport = Transport::InProcess;
  std::vector<protocol::PartyEndpoint> endpoints;
  std::uint64_t seed = 1;
  int fractional_bits = 20;
  int timeout_ms = 10000;
};

inline ProtocolSettings protocol_from_json(const nlohmann::json& j) {
  config_detail::require_object(j, "protocol");
  config_detail::reject_unknown_keys(
      j, {"transport", "endpoints", "seed", "fractional-bits", "timeout-ms"}, "protocol");
  ProtocolSettings p;
  if (j.contains("transport")) {
    const std::string transport = config_detail::get_string(j, "transport", "protocol");
    if (transport == "in-process") {
      p.transport = ProtocolSettings::Transport::InProcess;
    } else if (transport == "tcp") {
      p.transport = ProtocolSettings::Transport::Tcp;
    } else {
      throw ConfigError("config: protocol transport '" + transport + "' is not supported");
    }
  }
  if (j.contains("endpoints")) {
    if (!j.at("endpoints").is_array()) {
      throw ConfigError("config: protocol.endpoints must be an array");
    }
    for (const auto& e : j.at("endpoints")) {
      config_detail::require_object(e, "protocol.endpoints[]");
      config_detail::reject_unknown_keys(e, {"id", "host", "port"}, "protocol.endpoints[]");
      protocol::PartyEndpoint ep;
      ep.id = config_detail::get_string(e, "id", "protocol.endpoints[]");
      if (e.contains("host")) ep.host = config_detail::get_string(e, "host", "protocol.endpoints[]");
      const std::int64_t port = config_detail::get_integer(e, "port", -1, "protocol.endpoints[]");
      if (port < 1 || port > 65535) {
        throw ConfigError("config: protocol.endpoints[] requires a port in [1, 65535]");
      }
      ep.port = static_cast<int>(port);
      p.endpoints.push_back(std::move(ep));
    }
  }
  const std::int64_t seed = config_detail::get_integer(j, "seed", 1, "protocol");
  if (seed < 0) throw ConfigError("config: protocol seed must be non-negative");
  p.seed = static_cast<std::uint64_t>(seed);
  p.fractional_bits =
      static_cast<int>(config_detail::get_integer(j, "fractional-bits", 20, "protocol"));
  p.timeout_ms = static_cast<int>(config_detail::get_integer(j, "timeout-ms", 10000, "protocol"));
  if (p.timeout_ms < 1) throw ConfigError("config: protocol timeout-ms must be positive");
  return p;
}

inline nlohmann::json protocol_to_json(const ProtocolSettings& p) {
  nlohmann::json endpoints = nlohmann::json::array();
  for (const auto& e : p.endpoints) {
    endpoints.push_back({{"id", e.id}, {"host", e.host}, {"port", e.port}});
  }
  return nlohmann::json{
      {"transport", p.transport == ProtocolSettings::Transport::InProcess ? "in-process" : "tcp"},
      {"endpoints", endpoints},
      {"seed", p.seed},
      {"fractional-bits", p.fractional_bits},
      {"timeout-ms", p.timeout_ms}};
}

struct Config {
  MarketParams market;
  QuadratureSpec quadrature = QuadratureSpec::gauss_legendre(64);
  ProtocolSettings protocol;
  bool has_protocol_section = false;
  std::string output;
  std::uint64_t config_hash = 0;  ///< FNV-1a 64 of the raw config bytes

  explicit Config(MarketParams m) : market(std::move(m)) {}
};

inline Config config_from_json(const nlohmann::json& j, std::uint64_t raw_hash) {
  config_detail::require_object(j, "top level");
  config_detail::reject_unknown_keys(j, {"market", "quadrature", "protocol", "output"},
                                     "top level");
  if (!j.contains("market")) throw ConfigError("config: 'market' section is required");
  Config cfg(market_from_json(j.at("market")));
  if (j.contains("quadrature")) cfg.quadrature = quadrature_from_json(j.at("quadrature"));
  if (j.contains("protocol")) {
    cfg.protocol = protocol_from_json(j.at("protocol"));
    cfg.has_protocol_section = true;
  }
  if (j.contains("output")) {
    if (!j.at("output").is_string()) throw ConfigError("config: output must be a string");
    cfg.output = j.at("output").get<std::string>();
  }
  cfg.config_hash = raw_hash;
  return cfg;
}

inline Config load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string bytes = buf.str();
  const nlohmann::json j = nlohmann::json::parse(bytes, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config: " + path + " is not valid JSON");
  return config_from_json(j, fnv1a64(bytes));
}

/// Config resolution: an explicit --config flag wins, then the
/// JUBILEE_CONFIG environment variable.
inline std::string resolve_config_path(const std::string& cli_value) {
  if (!cli_value.empty()) return cli_value;
  if (const char* env = std::getenv("JUBILEE_CONFIG"); env != nullptr && *env != '\0') {
    return env;
  }
  throw ConfigError("config: no --config given and JUBILEE_CONFIG is not set");
}

/// Crash-safe output: write a sibling temp file, then rename over the target.
inline void write_file_atomic(const std::string& path, const std::string& contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp + " for writing");
    out << contents;
    out.flush();
    if (!out) throw std::runtime_error("write to " + tmp + " failed");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw std::runtime_error("cannot rename " + tmp + " to " + path);
  }
}

}  // namespace jubilee
