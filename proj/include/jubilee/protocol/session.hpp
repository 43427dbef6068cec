// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "jubilee/mechanism.hpp"
#include "jubilee/protocol/fixed_point.hpp"
#include "jubilee/protocol/message.hpp"
#include "jubilee/protocol/transcript.hpp"

namespace jubilee::protocol {

/// Two-evaluator session parameters. The market must satisfy the protocol
/// domain guard (see `require_protocol_domain`): two creditors, uniform
/// types on [0,1], a linear revision with slope at most 2, and a settlement
/// threshold inside the type support so the affine transfer circuit agrees
/// with the clamped general mechanism on every solvent profile.
struct SessionParams {
  MarketParams market;
  std::string session_id;
  FixedPointCodec codec;
  std::uint64_t seed = 1;

  SessionParams(MarketParams m, std::string id, FixedPointCodec c = FixedPointCodec{},
                std::uint64_t s = 1)
      : market(std::move(m)), session_id(std::move(id)), codec(c), seed(s) {}
};

inline void require_protocol_domain(const MarketParams& market, const FixedPointCodec& codec) {
  if (market.creditor_count() != 2) {
    throw std::domain_error("protocol: exactly two creditors are supported");
  }
  const auto& support = market.dist().support();
  if (market.dist().family() != TypeDistribution::Family::Uniform ||
      std::abs(support.lo) > 1e-12 || std::abs(support.hi - 1.0) > 1e-12) {
    throw std::domain_error("protocol: types must be uniform on [0,1]");
  }
  const double alpha = market.revision().slope();
  if (alpha > 2.0) {
    throw std::domain_error(
        "protocol: revision slope must not exceed 2 (fixed-point error bound)");
  }
  const double tau = (market.continuation_value() + alpha) / (2.0 + alpha);
  if (tau > 1.0 + 1e-12) {
    throw std::domain_error(
        "protocol: settlement threshold exceeds the top type; the affine transfer "
        "circuit cannot express pivotal clamping (requires continuation value <= 2)");
  }
  if (codec.fractional_bits < 4 || codec.fractional_bits > 20) {
    throw std::domain_error(
        "protocol: fractional bits must lie in [4,20] to keep masked products in range");
  }
}

/// Public fixed-point constants of the two-creditor settlement circuit.
///
/// Scales: inputs at 2^f; the solvency comparison at 2^(2f-2) so that a
/// mask of up to 2^f keeps every product below 2^(3f-2) <= 2^58 plus two
/// guard bits, inside the signed half-range of the 2^61-1 field; transfers
/// at 2^(2f) because the circuit multiplies one encoded input by one
/// encoded coefficient.
struct CircuitConstants {
  double tau = 0.0;       ///< settlement threshold on the report sum
  double tau_eff = 0.0;   ///< threshold clamped to 2 + 2^-10 as overflow defence-in-depth
  double intercept = 0.0; ///< transfer intercept
  double slope = 0.0;     ///< transfer coefficient on the counterparty report
  int compare_scale = 0;  ///< 2f-2
  int transfer_scale = 0; ///< 2f
  std::uint64_t threshold_fp = 0;  ///< round(tau_eff * 2^(2f-2)) as a field element
  std::uint64_t intercept_fp = 0;  ///< round(intercept * 2^(2f)) as a field element
  std::uint64_t slope_fp = 0;      ///< round(slope * 2^f) as a field element (signed embedding)
  std::uint64_t mask_range = 0;    ///< masks are drawn uniformly from [1, 2^f]

  /// Largest masked-gap magnitude that may disagree with the clear-text
  /// decision: one comparison-scale quantum (2^-(f-2) on the report sum,
  /// i.e. 2^-(f-2)/(2+alpha) on the budget gap) times the largest mask.
  double band_threshold(double alpha) const {
    return std::ldexp(1.0, transfer_scale) / (2.0 + alpha);
  }
};

inline CircuitConstants make_circuit_constants(const MarketParams& market,
                                               const FixedPointCodec& codec) {
  CircuitConstants c;
  const double alpha = market.revision().slope();
  const double a = market.continuation_value();
  c.tau = (a + alpha) / (2.0 + alpha);
  c.tau_eff = std::min(c.tau, 2.0 + std::ldexp(1.0, -10));
  c.intercept = (2.0 * a - alpha * alpha) / (2.0 * alpha + 4.0);
  c.slope = alpha - 1.0;
  const int f = codec.fractional_bits;
  c.compare_scale = 2 * f - 2;
  c.transfer_scale = 2 * f;
  c.threshold_fp = codec.encode_at(c.tau_eff, c.compare_scale);
  c.intercept_fp = codec.encode_at(c.intercept, c.transfer_scale);
  c.slope_fp = codec.encode_at(c.slope, f);
  c.mask_range = 1ULL << f;
  return c;
}

/// Both evaluators derive the same comparison mask from the pair of seeds
/// they exchanged; the debtor never sees either seed. The range 2^f divides
/// 2^64, so masking the generator output is bias-free.
inline std::uint64_t mask_from_seeds(std::uint64_t seed1, std::uint64_t seed2,
                                     std::uint64_t range) {
  std::seed_seq sseq{static_cast<std::uint32_t>(seed1), static_cast<std::uint32_t>(seed1 >> 32),
                     static_cast<std::uint32_t>(seed2), static_cast<std::uint32_t>(seed2 >> 32)};
  std::mt19937_64 gen(sseq);
  return (gen() & (range - 1)) + 1;
}

/// Sink through which a party emits messages and transcript annotations.
class PartySink {
 public:
  virtual ~PartySink() = default;
  virtual void send(Message m) = 0;
  virtual void add_note(const std::string& note) = 0;
  virtual void flag_near_band() = 0;
};

class Party {
 public:
  Party(std::string id, SessionParams params)
      : id_(std::move(id)), params_(std::move(params)),
        circuit_(make_circuit_constants(params_.market, params_.codec)) {}
  virtual ~Party() = default;

  virtual void on_start(PartySink& /*sink*/) {}
  virtual void on_message(const Message& m, PartySink& sink) = 0;

  const std::string& id() const { return id_; }
  bool finished() const { return finished_; }
  /// Party-local view of the session result, available once finished().
  virtual nlohmann::json result_summary() const = 0;

 protected:
  Message make(const std::string& to, const std::string& kind, nlohmann::json body) const {
    Message m;
    m.session = params_.session_id;
    m.from = id_;
    m.to = to;
    m.kind = kind;
    m.body = std::move(body);
    return m;
  }

  static std::string field_str(std::uint64_t v) { return std::to_string(v); }
  static std::uint64_t parse_field(const nlohmann::json& j, const char* key) {
    if (!j.is_object() || !j.contains(key) || !j.at(key).is_string()) {
      throw std::runtime_error(std::string("protocol: payload missing field '") + key + "'");
    }
    const std::string& s = j.at(key).get_ref<const std::string&>();
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(s, &pos);
    if (pos != s.size() || v >= kFieldPrime) {
      throw std::runtime_error("protocol: malformed field element");
    }
    return static_cast<std::uint64_t>(v);
  }

  std::string id_;
  SessionParams params_;
  CircuitConstants circuit_;
  bool finished_ = false;
};

/// Creditor: splits its encoded report into two additive shares, hands one
/// to each evaluator, and waits for the outcome (reconstructing its own
/// transfer from the evaluator reveals when the debtor settles).
class CreditorParty : public Party {
 public:
  CreditorParty(std::string id, SessionParams params, double theta, std::uint64_t rng_seed)
      : Party(std::move(id), std::move(params)), theta_(theta), rng_(rng_seed) {
    validate_profile(params_.market, {theta_, theta_});
  }

  void on_start(PartySink& sink) override {
    const auto [to_e1, to_e2] = share_input(theta_, params_.codec, rng_);
    sink.send(make("E1", "share", {{"what", "input"}, {"share", field_str(to_e1.value)}}));
    sink.send(make("E2", "share", {{"what", "input"}, {"share", field_str(to_e2.value)}}));
  }

  void on_message(const Message& m, PartySink& /*sink*/) override {
    if (m.kind == "reveal") {
      if (m.body.value("what", "") != "transfer") {
        throw std::runtime_error("protocol: creditor received unexpected reveal");
      }
      transfer_shares_.push_back(parse_field(m.body, "share"));
    } else if (m.kind == "outcome") {
      decision_ = m.body.value("decision", "");
      have_outcome_ = true;
    } else {
      throw std::runtime_error("protocol: creditor received unexpected kind " + m.kind);
    }
    if (have_outcome_ && (decision_ == "bankrupt" || transfer_shares_.size() == 2)) {
      if (decision_ == "solvent") {
        const std::uint64_t sum = field_add(transfer_shares_[0], transfer_shares_[1]);
        transfer_ = params_.codec.decode_at(sum, circuit_.transfer_scale);
        forgiveness_ = params_.market.per_creditor_debt() - transfer_;
      }
      finished_ = true;
    }
  }

  nlohmann::json result_summary() const override {
    return nlohmann::json{{"party", id_},
                          {"decision", decision_},
                          {"transfer", transfer_},
                          {"forgiveness", forgiveness_}};
  }

  double transfer() const { return transfer_; }
  double forgiveness() const { return forgiveness_; }
  const std::string& decision() const { return decision_; }

 private:
  double theta_;
  std::mt19937_64 rng_;
  std::vector<std::uint64_t> transfer_shares_;
  std::string decision_;
  bool have_outcome_ = false;
  double transfer_ = 0.0;
  double forgiveness_ = 0.0;
};

/// Evaluator: holds one additive share of each report, agrees on a blinding
/// mask with its peer, reveals the masked budget-gap share to the debtor,
/// and — only if the debtor announces settlement — evaluates the affine
/// transfer circuit on shares and opens each transfer to the debtor and the
/// owning creditor alone.
class EvaluatorParty : public Party {
 public:
  EvaluatorParty(std::string id, SessionParams params, std::uint64_t rng_seed)
      : Party(std::move(id), std::move(params)), index_(id_ == "E1" ? 1 : 2), rng_(rng_seed) {
    if (id_ != "E1" && id_ != "E2") throw std::invalid_argument("evaluator id must be E1 or E2");
  }

  void on_start(PartySink& sink) override {
    my_mask_seed_ = rng_();
    const std::string peer = index_ == 1 ? "E2" : "E1";
    sink.send(make(peer, "mask",
                   {{"what", "mask-seed"}, {"seed", std::to_string(my_mask_seed_)}}));
  }

  void on_message(const Message& m, PartySink& sink) override {
    if (m.kind == "share") {
      if (m.from == "c1") {
        share_c1_ = parse_field(m.body, "share");
        have_c1_ = true;
      } else if (m.from == "c2") {
        share_c2_ = parse_field(m.body, "share");
        have_c2_ = true;
      } else {
        throw std::runtime_error("protocol: share from unexpected party " + m.from);
      }
    } else if (m.kind == "mask") {
      if (!m.body.contains("seed") || !m.body.at("seed").is_string()) {
        throw std::runtime_error("protocol: malformed mask-seed payload");
      }
      peer_mask_seed_ = std::stoull(m.body.at("seed").get_ref<const std::string&>());
      have_peer_seed_ = true;
    } else if (m.kind == "outcome") {
      decision_ = m.body.value("decision", "");
      if (decision_ == "solvent") {
        open_transfers(sink);
      }
      finished_ = true;
      return;
    } else {
      throw std::runtime_error("protocol: evaluator received unexpected kind " + m.kind);
    }
    maybe_send_masked_gap(sink);
  }

  nlohmann::json result_summary() const override {
    return nlohmann::json{{"party", id_}, {"decision", decision_}};
  }

 private:
  void maybe_send_masked_gap(PartySink& sink) {
    if (sent_gap_ || !have_c1_ || !have_c2_ || !have_peer_seed_) return;
    sent_gap_ = true;
    const std::uint64_t seed1 = index_ == 1 ? my_mask_seed_ : peer_mask_seed_;
    const std::uint64_t seed2 = index_ == 1 ? peer_mask_seed_ : my_mask_seed_;
    mask_ = mask_from_seeds(seed1, seed2, circuit_.mask_range);

    // Share of the budget gap tau_eff - (x1 + x2) at the comparison scale.
    // Evaluator 1 contributes the public threshold; rescaling an input
    // share from 2^f to 2^(2f-2) is a public multiplication by 2^(f-2).
    const std::uint64_t rescale = 1ULL << (circuit_.compare_scale - params_.codec.fractional_bits);
    const std::uint64_t scaled_sum = field_mul(field_add(share_c1_, share_c2_), rescale);
    std::uint64_t gap_share = field_neg(scaled_sum);
    if (index_ == 1) gap_share = field_add(circuit_.threshold_fp, gap_share);
    const std::uint64_t masked = field_mul(mask_, gap_share);
    sink.send(make("debtor", "reveal",
                   {{"what", "solvency"}, {"share", field_str(masked)}}));
  }

  void open_transfers(PartySink& sink) {
    // Transfer for creditor i depends on the counterparty share only; the
    // intercept is public and contributed by evaluator 1.
    const auto transfer_share = [&](std::uint64_t counterparty_share) {
      std::uint64_t v = field_mul(circuit_.slope_fp, counterparty_share);
      if (index_ == 1) v = field_add(circuit_.intercept_fp, v);
      return v;
    };
    const std::uint64_t t1 = transfer_share(share_c2_);
    const std::uint64_t t2 = transfer_share(share_c1_);
    sink.send(make("c1", "reveal",
                   {{"what", "transfer"}, {"creditor", "c1"}, {"share", field_str(t1)}}));
    sink.send(make("c2", "reveal",
                   {{"what", "transfer"}, {"creditor", "c2"}, {"share", field_str(t2)}}));
    sink.send(make("debtor", "reveal",
                   {{"what", "transfer"}, {"creditor", "c1"}, {"share", field_str(t1)}}));
    sink.send(make("debtor", "reveal",
                   {{"what", "transfer"}, {"creditor", "c2"}, {"share", field_str(t2)}}));
  }

  int index_;
  std::mt19937_64 rng_;
  std::uint64_t share_c1_ = 0, share_c2_ = 0;
  bool have_c1_ = false, have_c2_ = false;
  std::uint64_t my_mask_seed_ = 0, peer_mask_seed_ = 0;
  bool have_peer_seed_ = false;
  bool sent_gap_ = false;
  std::uint64_t mask_ = 0;
  std::string decision_;
};

/// Debtor: adds the two masked gap shares, learns only the sign (plus a
/// mask-scaled magnitude), announces the decision, and on settlement
/// reconstructs both transfers from the evaluator reveals.
class DebtorParty : public Party {
 public:
  DebtorParty(SessionParams params) : Party("debtor", std::move(params)) {}

  void on_message(const Message& m, PartySink& sink) override {
    if (m.kind != "reveal") {
      throw std::runtime_error("protocol: debtor received unexpected kind " + m.kind);
    }
    const std::string what = m.body.value("what", "");
    if (what == "solvency") {
      gap_shares_.push_back(parse_field(m.body, "share"));
      if (gap_shares_.size() == 2) decide(sink);
    } else if (what == "transfer") {
      const std::string creditor = m.body.value("creditor", "");
      const std::uint64_t share = parse_field(m.body, "share");
      auto& slot = creditor == "c1" ? t1_shares_ : t2_shares_;
      slot.push_back(share);
      if (t1_shares_.size() == 2 && t2_shares_.size() == 2) conclude_solvent(sink);
    } else {
      throw std::runtime_error("protocol: debtor received unexpected reveal payload");
    }
  }

  nlohmann::json result_summary() const override {
    return nlohmann::json{{"party", id_},
                          {"decision", outcome_.solvent ? "solvent" : "bankrupt"},
                          {"transfers", outcome_.transfers},
                          {"forgiveness", outcome_.forgiveness},
                          {"near-quantization-band", near_band_}};
  }

  const Outcome& outcome() const { return outcome_; }
  bool near_band() const { return near_band_; }

 private:
  void decide(PartySink& sink) {
    const std::uint64_t masked_gap = field_add(gap_shares_[0], gap_shares_[1]);
    const std::int64_t signed_gap = field_to_signed(masked_gap);
    const double alpha = params_.market.revision().slope();
    outcome_.solvent = signed_gap >= 0;  // zero gap settles: ties favour settlement
    near_band_ = std::abs(static_cast<double>(signed_gap)) < circuit_.band_threshold(alpha);

    sink.add_note(
        "masked-compare: the debtor learns the settlement decision plus a mask-scaled "
        "magnitude of the budget gap, not the gap itself");
    if (near_band_) {
      sink.flag_near_band();
      sink.add_note(
          "near-quantization-band: the masked gap magnitude is within one fixed-point "
          "quantum of zero; the clear-text decision may differ");
    }
    const std::string decision = outcome_.solvent ? "solvent" : "bankrupt";
    sink.send(make("E1", "outcome", {{"decision", decision}, {"near-band", near_band_}}));
    sink.send(make("E2", "outcome", {{"decision", decision}, {"near-band", near_band_}}));
    if (!outcome_.solvent) {
      outcome_.transfers = {0.0, 0.0};
      outcome_.forgiveness = {0.0, 0.0};
      for (const char* c : {"c1", "c2"}) {
        sink.send(make(c, "outcome", {{"decision", decision}, {"near-band", near_band_}}));
      }
      finished_ = true;
    }
  }

  void conclude_solvent(PartySink& sink) {
    sink.add_note(
        "affine-invertibility: an opened transfer is an affine function of the "
        "counterparty report, so its recipient can invert it unless the revision "
        "slope equals 1");
    const double debt_share = params_.market.per_creditor_debt();
    outcome_.transfers = {
        params_.codec.decode_at(field_add(t1_shares_[0], t1_shares_[1]), circuit_.transfer_scale),
        params_.codec.decode_at(field_add(t2_shares_[0], t2_shares_[1]), circuit_.transfer_scale)};
    outcome_.forgiveness = {debt_share - outcome_.transfers[0],
                            debt_share - outcome_.transfers[1]};
    for (std::size_t i = 0; i < 2; ++i) {
      if (liquidation_exceeds_debt(params_.market, outcome_.transfers[i])) {
        outcome_.flags.insert(OutcomeFlag::TransferExceedsDebt);
      }
    }
    for (std::size_t i = 0; i < 2; ++i) {
      const std::string c = i == 0 ? "c1" : "c2";
      sink.send(make(c, "outcome",
                     {{"decision", "solvent"},
                      {"near-band", near_band_},
                      {"transfer", outcome_.transfers[i]},
                      {"forgiveness", outcome_.forgiveness[i]}}));
    }
    finished_ = true;
  }

  std::vector<std::uint64_t> gap_shares_;
  std::vector<std::uint64_t> t1_shares_, t2_shares_;
  Outcome outcome_;
  bool near_band_ = false;
};

/// Deterministic single-process scheduler: parties start in canonical order
/// and messages are delivered strictly first-in first-out, so a session is
/// a pure function of (params, profile, seed) and transcripts are
/// byte-identical across runs.
class InProcessBus : public PartySink {
 public:
  void register_party(Party* p) { parties_[p->id()] = p; }

  void send(Message m) override {
    transcript_.messages.push_back(m);
    queue_.push_back(std::move(m));
  }
  void add_note(const std::string& note) override { transcript_.leakage_notes.push_back(note); }
  void flag_near_band() override { transcript_.near_quantization_band = true; }

  void run() {
    for (const std::string& id : party_order()) {
      auto it = parties_.find(id);
      if (it != parties_.end()) it->second->on_start(*this);
    }
    while (!queue_.empty()) {
      Message m = std::move(queue_.front());
      queue_.pop_front();
      auto it = parties_.find(m.to);
      if (it == parties_.end()) {
        throw std::logic_error("protocol: message addressed to unknown party " + m.to);
      }
      it->second->on_message(m, *this);
    }
  }

  ProtocolTranscript& transcript() { return transcript_; }

 private:
  std::map<std::string, Party*> parties_;
  std::deque<Message> queue_;
  ProtocolTranscript transcript_;
};

/// Seed assignment: each party derives an independent generator from the
/// session seed and its canonical position, so transcripts depend only on
/// (params, profile, seed).
inline std::uint64_t party_seed(std::uint64_t session_seed, const std::string& id) {
  const auto order = party_order();
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (order[i] == id) {
      // splitmix64 step keeps per-party streams decorrelated.
      std::uint64_t z = session_seed + 0x9e3779b97f4a7c15ULL * (i + 1);
      z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
      z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
      return z ^ (z >> 31);
    }
  }
  throw std::invalid_argument("protocol: unknown party id " + id);
}

/// Run one settlement session entirely in-process with both evaluators,
/// both creditors and the debtor driven by a deterministic scheduler.
inline ProtocolTranscript mpc_run(const SessionParams& params, const TypeProfile& theta) {
  require_protocol_domain(params.market, params.codec);
  validate_profile(params.market, theta);

  CreditorParty c1("c1", params, theta[0], party_seed(params.seed, "c1"));
  CreditorParty c2("c2", params, theta[1], party_seed(params.seed, "c2"));
  DebtorParty debtor(params);
  EvaluatorParty e1("E1", params, party_seed(params.seed, "E1"));
  EvaluatorParty e2("E2", params, party_seed(params.seed, "E2"));

  InProcessBus bus;
  for (Party* p : std::vector<Party*>{&c1, &c2, &debtor, &e1, &e2}) bus.register_party(p);
  bus.run();

  for (Party* p : std::vector<Party*>{&c1, &c2, &debtor, &e1, &e2}) {
    if (!p->finished()) {
      throw std::logic_error("protocol: session ended with unfinished party " + p->id());
    }
  }

  ProtocolTranscript t = std::move(bus.transcript());
  t.session_id = params.session_id;
  t.outcome = debtor.outcome();
  return t;
}

/// Reference run against a trusted third party: every creditor sends its
/// report in the clear to "trusted", which computes the settlement and
/// returns each party its outcome. Valid for any market the mechanism
/// itself supports.
inline ProtocolTranscript ideal_run(const MarketParams& market, const TypeProfile& theta,
                                    const std::string& session_id) {
  validate_profile(market, theta);
  ProtocolTranscript t;
  t.session_id = session_id;
  t.ideal_model = true;
  t.leakage_notes.push_back(
      "ideal-model: creditor reports are sent in the clear to the trusted party only");

  const auto creditor_id = [](std::size_t i) { return "c" + std::to_string(i + 1); };
  for (std::size_t i = 0; i < theta.size(); ++i) {
    Message m;
    m.session = session_id;
    m.from = creditor_id(i);
    m.to = "trusted";
    m.kind = "share";
    m.body = {{"what", "report"}, {"value", theta[i]}};
    t.messages.push_back(std::move(m));
  }

  t.outcome = settle(market, theta);
  const std::string decision = t.outcome.solvent ? "solvent" : "bankrupt";

  Message to_debtor;
  to_debtor.session = session_id;
  to_debtor.from = "trusted";
  to_debtor.to = "debtor";
  to_debtor.kind = "outcome";
  to_debtor.body = {{"decision", decision},
                    {"transfers", t.outcome.transfers},
                    {"forgiveness", t.outcome.forgiveness}};
  t.messages.push_back(std::move(to_debtor));

  for (std::size_t i = 0; i < theta.size(); ++i) {
    Message m;
    m.session = session_id;
    m.from = "trusted";
    m.to = creditor_id(i);
    m.kind = "outcome";
    m.body = {{"decision", decision}};
    if (t.outcome.solvent) {
      m.body["transfer"] = t.outcome.transfers[i];
      m.body["forgiveness"] = t.outcome.forgiveness[i];
    }
    t.messages.push_back(std::move(m));
  }
  return t;
}

}  // namespace jubilee::protocol
