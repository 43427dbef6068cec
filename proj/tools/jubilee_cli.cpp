// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: settle | verify | simulate | protocol.
//
// Exit codes:
//   0  success (settlement reached, verification passed, session solvent)
//   1  configuration error (missing/malformed/unknown-key config)
//   2  domain or usage error
//   3  bankruptcy outcome
//   4  verification failure
//   5  protocol timeout
//   6  protocol connection failure
//   7  protocol version mismatch

#include <cstdint>
#include <iostream>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "jubilee/analysis.hpp"
#include "jubilee/config.hpp"
#include "jubilee/mechanism.hpp"
#include "jubilee/protocol/session.hpp"
#include "jubilee/protocol/tcp.hpp"
#include "jubilee/protocol/transcript.hpp"
#include "jubilee/quadrature.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitUsage = 2;
constexpr int kExitBankrupt = 3;
constexpr int kExitVerifyFailed = 4;
constexpr int kExitTimeout = 5;
constexpr int kExitConnection = 6;
constexpr int kExitVersion = 7;

struct GlobalOpts {
  std::string config_path;
  std::string out_override;
  std::uint64_t seed = 0;
  bool seed_given = false;
  bool quiet = false;
};

void emit(const nlohmann::json& doc, const std::string& out_path, bool quiet) {
  if (out_path.empty()) {
    std::cout << doc.dump(2) << "\n";
    return;
  }
  jubilee::write_file_atomic(out_path, doc.dump(2) + "\n");
  if (!quiet) std::cout << out_path << "\n";
}

nlohmann::json flags_to_json(const std::set<jubilee::OutcomeFlag>& flags) {
  nlohmann::json out = nlohmann::json::array();
  for (jubilee::OutcomeFlag f : flags) out.push_back(jubilee::protocol::outcome_flag_name(f));
  return out;
}

int run_settle(const jubilee::Config& cfg, const GlobalOpts& g, const std::vector<double>& theta,
               const std::string& out_path) {
  const jubilee::Outcome outcome = jubilee::settle(cfg.market, theta);
  nlohmann::json doc{
      {"command", "settle"},
      {"config-hash", jubilee::hash_hex(cfg.config_hash)},
      {"seed", g.seed_given ? g.seed : cfg.quadrature.seed},
      {"theta", theta},
      {"decision", outcome.solvent ? "solvent" : "bankrupt"},
      {"pivotal", outcome.pivotal},
      {"transfers", outcome.transfers},
      {"forgiveness", outcome.forgiveness},
      {"flags", flags_to_json(outcome.flags)},
  };
  if (!cfg.market.warnings().empty()) doc["warnings"] = cfg.market.warnings();
  emit(doc, out_path, g.quiet);
  return outcome.solvent ? kExitOk : kExitBankrupt;
}

int run_verify(const jubilee::Config& cfg, const GlobalOpts& g,
               const jubilee::VerificationOptions& options, const std::string& out_path) {
  const jubilee::VerificationReport report = jubilee::run_verification(cfg.market, options);
  const bool expects_revision = cfg.market.revision().slope() > 0.0;
  const jubilee::VerificationThresholds thresholds = jubilee::thresholds_for(options.quad);
  const bool passed = jubilee::verification_passes(report, expects_revision, thresholds);

  nlohmann::json doc = jubilee::to_json(report);
  doc["command"] = "verify";
  doc["config-hash"] = jubilee::hash_hex(cfg.config_hash);
  doc["seed"] = options.seed;
  doc["passed"] = passed;
  doc["thresholds"] = {
      {"ic", thresholds.ic},
      {"ir", thresholds.ir},
      {"top-type", thresholds.top_type},
      {"k-slope", thresholds.k_slope},
      {"envelope", thresholds.envelope},
      {"transfer-identity", thresholds.transfer_identity},
  };
  emit(doc, out_path, g.quiet);
  return passed ? kExitOk : kExitVerifyFailed;
}

std::vector<double> parse_alpha_list(const std::string& csv) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= csv.size()) {
    const std::size_t comma = csv.find(',', start);
    const std::string tok =
        csv.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (tok.empty()) throw std::invalid_argument("simulate: empty entry in --alphas");
    std::size_t pos = 0;
    const double v = std::stod(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument("simulate: bad alpha value '" + tok + "'");
    out.push_back(v);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (out.empty()) throw std::invalid_argument("simulate: --alphas produced no values");
  return out;
}

int run_simulate(const jubilee::Config& cfg, const GlobalOpts& g, const std::string& alphas_csv,
                 std::size_t draws, const std::string& out_path) {
  if (draws < 100) throw std::invalid_argument("simulate: --draws must be at least 100");
  const std::vector<double> alphas = parse_alpha_list(alphas_csv);
  const std::uint64_t seed = g.seed_given ? g.seed : cfg.quadrature.seed;

  nlohmann::json rows = nlohmann::json::array();
  std::string csv = "alpha,settlement-probability,settlement-probability-se,"
                    "expected-forgiveness,expected-forgiveness-se,debtor-profit,debtor-profit-se\n";

  for (std::size_t row = 0; row < alphas.size(); ++row) {
    const double alpha = alphas[row];
    const jubilee::MarketParams market(cfg.market.total_debt(), cfg.market.creditor_count(),
                                       cfg.market.continuation_value(), cfg.market.investment(),
                                       cfg.market.dist(), jubilee::RevisionSpec::linear(alpha));
    std::mt19937_64 gen(seed + row);
    jubilee::RunningMoments settle_prob, forgiveness, profit;
    jubilee::TypeProfile profile(static_cast<std::size_t>(market.creditor_count()));
    for (std::size_t k = 0; k < draws; ++k) {
      for (auto& v : profile) v = market.dist().draw(gen);
      const jubilee::Outcome outcome = jubilee::settle(market, profile);
      settle_prob.add(outcome.solvent ? 1.0 : 0.0);
      double forgiven = 0.0;
      double transfers = 0.0;
      for (double t : outcome.transfers) transfers += t;
      for (double f : outcome.forgiveness) forgiven += f;
      forgiveness.add(outcome.solvent ? forgiven : 0.0);
      profit.add(outcome.solvent ? market.continuation_value() - transfers : 0.0);
    }
    nlohmann::json r{
        {"alpha", alpha},
        {"settlement-probability", settle_prob.mean()},
        {"settlement-probability-se", settle_prob.std_error()},
        {"expected-forgiveness", forgiveness.mean()},
        {"expected-forgiveness-se", forgiveness.std_error()},
        {"debtor-profit", profit.mean()},
        {"debtor-profit-se", profit.std_error()},
    };
    rows.push_back(r);
    char line[256];
    std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", alpha,
                  settle_prob.mean(), settle_prob.std_error(), forgiveness.mean(),
                  forgiveness.std_error(), profit.mean(), profit.std_error());
    csv += line;
  }

  nlohmann::json doc{
      {"command", "simulate"},
      {"config-hash", jubilee::hash_hex(cfg.config_hash)},
      {"seed", seed},
      {"draws", draws},
      {"rows", rows},
  };
  emit(doc, out_path, g.quiet);
  if (!out_path.empty()) {
    std::string csv_path = out_path;
    const std::string suffix = ".json";
    if (csv_path.size() > suffix.size() &&
        csv_path.compare(csv_path.size() - suffix.size(), suffix.size(), suffix) == 0) {
      csv_path.replace(csv_path.size() - suffix.size(), suffix.size(), ".csv");
    } else {
      csv_path += ".csv";
    }
    jubilee::write_file_atomic(csv_path, csv);
    if (!g.quiet) std::cout << csv_path << "\n";
  }
  return kExitOk;
}

int run_protocol(const jubilee::Config& cfg, const GlobalOpts& g, const std::string& party_id,
                 const std::vector<double>& theta, const std::string& session_name,
                 const std::string& transcript_path, const std::string& out_path) {
  using namespace jubilee::protocol;
  if (!cfg.has_protocol_section) {
    throw jubilee::ConfigError("config: 'protocol' section is required for the protocol command");
  }
  const std::uint64_t seed = g.seed_given ? g.seed : cfg.protocol.seed;
  const std::string session_id =
      session_name.empty() ? "session-" + std::to_string(seed) : session_name;
  const FixedPointCodec codec(cfg.protocol.fractional_bits);
  const SessionParams params(cfg.market, session_id, codec, seed);

  nlohmann::json doc{
      {"command", "protocol"},
      {"config-hash", jubilee::hash_hex(cfg.config_hash)},
      {"seed", seed},
      {"session", session_id},
  };

  if (cfg.protocol.transport == jubilee::ProtocolSettings::Transport::InProcess) {
    if (!party_id.empty()) {
      throw std::invalid_argument(
          "protocol: --party only applies to the tcp transport (in-process runs every party)");
    }
    if (theta.size() != 2) {
      throw std::invalid_argument("protocol: in-process transport needs exactly two --theta values");
    }
    const ProtocolTranscript transcript = mpc_run(params, theta);
    if (!transcript_path.empty()) {
      jubilee::write_file_atomic(transcript_path, transcript_to_jsonl(transcript));
    }
    doc["transport"] = "in-process";
    doc["decision"] = transcript.outcome.solvent ? "solvent" : "bankrupt";
    doc["transfers"] = transcript.outcome.transfers;
    doc["forgiveness"] = transcript.outcome.forgiveness;
    doc["flags"] = flags_to_json(transcript.outcome.flags);
    doc["near-quantization-band"] = transcript.near_quantization_band;
    doc["leakage-notes"] = transcript.leakage_notes;
    emit(doc, out_path, g.quiet);
    return transcript.outcome.solvent ? kExitOk : kExitBankrupt;
  }

  // TCP transport: run exactly one party in this process.
  require_protocol_domain(cfg.market, codec);
  std::unique_ptr<Party> party;
  if (party_id == "c1" || party_id == "c2") {
    if (theta.size() != 1) {
      throw std::invalid_argument("protocol: a tcp creditor needs exactly one --theta value");
    }
    party = std::make_unique<CreditorParty>(party_id, params, theta[0],
                                            party_seed(seed, party_id));
  } else if (party_id == "debtor") {
    party = std::make_unique<DebtorParty>(params);
  } else if (party_id == "E1" || party_id == "E2") {
    party = std::make_unique<EvaluatorParty>(party_id, params, party_seed(seed, party_id));
  } else {
    throw std::invalid_argument(
        "protocol: tcp transport needs --party, one of c1, c2, debtor, E1, E2");
  }

  TcpConfig tcp;
  tcp.endpoints = cfg.protocol.endpoints;
  tcp.timeout_ms = cfg.protocol.timeout_ms;
  const TcpRunResult result = run_party_tcp(*party, tcp);

  doc["transport"] = "tcp";
  doc["party"] = party_id;
  switch (result.status) {
    case TcpStatus::Success: break;
    case TcpStatus::Timeout:
      std::cerr << "protocol timeout: " << result.error << "\n";
      return kExitTimeout;
    case TcpStatus::ConnectionFailure:
      std::cerr << "protocol connection failure: " << result.error << "\n";
      return kExitConnection;
    case TcpStatus::VersionMismatch:
      std::cerr << "protocol version mismatch: " << result.error << "\n";
      return kExitVersion;
  }

  ProtocolTranscript local = result.local;
  local.session_id = session_id;
  if (party_id == "debtor") {
    local.outcome = static_cast<DebtorParty*>(party.get())->outcome();
  }
  if (!transcript_path.empty()) {
    jubilee::write_file_atomic(transcript_path, transcript_to_jsonl(local));
  }

  const nlohmann::json summary = party->result_summary();
  for (auto it = summary.begin(); it != summary.end(); ++it) doc[it.key()] = it.value();
  emit(doc, out_path, g.quiet);

  const std::string decision = summary.value("decision", "");
  return decision == "bankrupt" ? kExitBankrupt : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"optimal debt-relief settlement engine"};
  app.require_subcommand(1);
  app.fallthrough();  // global options may appear after the subcommand

  GlobalOpts g;
  app.add_option("--config", g.config_path,
                 "path to the JSON configuration (fallback: JUBILEE_CONFIG env var)");
  auto* seed_opt = app.add_option("--seed", g.seed, "seed override for randomized commands");
  app.add_option("--out", g.out_override, "output file (defaults to the config's 'output')");
  app.add_flag("--quiet", g.quiet, "suppress non-result output");

  // settle
  auto* settle_cmd =
      app.add_subcommand("settle", "compute the settlement outcome for one reported profile");
  std::vector<double> settle_theta;
  settle_cmd->add_option("--theta", settle_theta, "reported recovery values, one per creditor")
      ->required();

  // verify
  auto* verify_cmd = app.add_subcommand(
      "verify", "numerically verify incentive, participation and efficiency properties");
  jubilee::VerificationOptions vopts;
  double corruption = 0.0;
  bool negative_control = false;
  verify_cmd->add_option("--ic-grid", vopts.ic_grid, "grid points per axis for the IC scan");
  verify_cmd->add_option("--envelope-grid", vopts.envelope_grid, "grid points for envelope checks");
  verify_cmd->add_option("--k-grid", vopts.k_grid, "grid points for the K monotonicity check");
  verify_cmd->add_option("--mc-samples", vopts.mc_samples,
                         "Monte Carlo samples for sampled diagnostics");
  verify_cmd->add_option("--corruption", corruption,
                         "transfer corruption coefficient (deliberately breaks IC)");
  verify_cmd->add_flag("--negative-control", negative_control,
                       "run with a corrupted transfer rule; verification is expected to fail");

  // simulate
  auto* simulate_cmd = app.add_subcommand(
      "simulate", "sweep revision slopes and estimate settlement statistics by simulation");
  std::string alphas_csv = "0,0.25,0.5,0.75,1";
  std::size_t draws = 100000;
  simulate_cmd->add_option("--alphas", alphas_csv, "comma-separated revision slopes");
  simulate_cmd->add_option("--draws", draws, "simulated profiles per slope");

  // protocol
  auto* protocol_cmd = app.add_subcommand(
      "protocol", "run the two-evaluator secret-sharing settlement protocol");
  std::string party_id;
  std::vector<double> protocol_theta;
  std::string session_name;
  std::string transcript_path;
  protocol_cmd->add_option("--party", party_id, "party to run (tcp transport only)");
  protocol_cmd->add_option("--theta", protocol_theta,
                           "creditor inputs: two values in-process, one for a tcp creditor");
  protocol_cmd->add_option("--session", session_name, "session identifier");
  protocol_cmd->add_option("--transcript", transcript_path, "write the session transcript (JSONL)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }
  g.seed_given = seed_opt->count() > 0;

  try {
    const jubilee::Config cfg =
        jubilee::load_config_file(jubilee::resolve_config_path(g.config_path));
    const std::string out_path = g.out_override.empty() ? cfg.output : g.out_override;

    if (*settle_cmd) return run_settle(cfg, g, settle_theta, out_path);
    if (*verify_cmd) {
      vopts.quad = cfg.quadrature;
      vopts.seed = g.seed_given ? g.seed : cfg.quadrature.seed;
      vopts.quad.seed = vopts.seed;
      if (negative_control && corruption == 0.0) corruption = 0.5;
      vopts.corruption = corruption;
      return run_verify(cfg, g, vopts, out_path);
    }
    if (*simulate_cmd) return run_simulate(cfg, g, alphas_csv, draws, out_path);
    if (*protocol_cmd) {
      return run_protocol(cfg, g, party_id, protocol_theta, session_name, transcript_path,
                          out_path);
    }
    std::cerr << "no subcommand selected\n";
    return kExitUsage;
  } catch (const jubilee::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  } catch (const std::domain_error& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  }
}
