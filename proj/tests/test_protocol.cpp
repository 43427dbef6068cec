// SPDX-License-Identifier: Apache-2.0
#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "jubilee/closedform.hpp"
#include "jubilee/distributions.hpp"
#include "jubilee/mechanism.hpp"
#include "jubilee/protocol/message.hpp"
#include "jubilee/protocol/session.hpp"
#include "jubilee/protocol/tcp.hpp"
#include "jubilee/protocol/transcript.hpp"

namespace proto = jubilee::protocol;
using jubilee::MarketParams;
using jubilee::RevisionSpec;
using jubilee::TypeDistribution;
using proto::Message;
using proto::ProtocolTranscript;
using proto::SessionParams;

namespace {

MarketParams protocol_market(double investment = 2.0, double alpha = 1.0) {
  return MarketParams(2.0, 2, investment, 0.0, TypeDistribution::uniform(0.0, 1.0),
                      alpha == 0.0 ? RevisionSpec::zero() : RevisionSpec::linear(alpha));
}

SessionParams anchor_session(const std::string& id = "s-anchor", std::uint64_t seed = 7) {
  return SessionParams(protocol_market(), id, proto::FixedPointCodec{}, seed);
}

int count_kind(const ProtocolTranscript& t, const std::string& kind) {
  int n = 0;
  for (const Message& m : t.messages) {
    if (m.kind == kind) ++n;
  }
  return n;
}

bool has_note_containing(const ProtocolTranscript& t, const std::string& needle) {
  for (const auto& note : t.leakage_notes) {
    if (note.find(needle) != std::string::npos) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("message framing round-trips", "[protocol]") {
  Message m;
  m.session = "s1";
  m.from = "c1";
  m.to = "E1";
  m.kind = "share";
  m.body = {{"what", "input"}, {"share", "12345"}};

  const auto frame = proto::frame_message(m);
  REQUIRE(frame.size() > 4);
  const std::size_t len = (static_cast<std::size_t>(frame[0]) << 24) |
                          (static_cast<std::size_t>(frame[1]) << 16) |
                          (static_cast<std::size_t>(frame[2]) << 8) | frame[3];
  REQUIRE(len == frame.size() - 4);

  const std::string payload(frame.begin() + 4, frame.end());
  const Message back = proto::parse_frame_payload(payload);
  CHECK(back.v == proto::kProtocolVersion);
  CHECK(back.session == m.session);
  CHECK(back.from == m.from);
  CHECK(back.to == m.to);
  CHECK(back.kind == m.kind);
  CHECK(back.body == m.body);
}

TEST_CASE("message parsing rejects bad envelopes", "[protocol]") {
  CHECK_THROWS_AS(proto::parse_frame_payload("not json"), std::invalid_argument);
  CHECK_THROWS_AS(proto::message_from_json(nlohmann::json::array()), std::invalid_argument);

  nlohmann::json good = {{"v", 1},       {"session", "s"}, {"from", "c1"},
                         {"to", "E1"},   {"kind", "share"}, {"body", nlohmann::json::object()}};
  CHECK_NOTHROW(proto::message_from_json(good));

  auto wrong_version = good;
  wrong_version["v"] = 2;
  CHECK_THROWS_AS(proto::message_from_json(wrong_version), proto::VersionMismatchError);

  auto bad_kind = good;
  bad_kind["kind"] = "gossip";
  CHECK_THROWS_AS(proto::message_from_json(bad_kind), std::invalid_argument);

  auto missing = good;
  missing.erase("from");
  CHECK_THROWS_AS(proto::message_from_json(missing), std::invalid_argument);
}

TEST_CASE("trusted-party reference run", "[protocol]") {
  const auto market = protocol_market();
  const auto t = proto::ideal_run(market, {0.3, 0.6}, "s-ideal");
  CHECK(t.ideal_model);
  CHECK(t.session_id == "s-ideal");
  REQUIRE(t.outcome.solvent);
  CHECK(t.outcome.transfers[0] == Catch::Approx(0.5).margin(1e-9));
  CHECK(t.outcome.transfers[1] == Catch::Approx(0.5).margin(1e-9));
  // Two reports in, one debtor outcome, two creditor outcomes.
  REQUIRE(t.messages.size() == 5);
  CHECK(t.messages[0].to == "trusted");
  CHECK(t.messages[0].body.at("value").get<double>() == 0.3);
  CHECK(has_note_containing(t, "ideal-model"));
  CHECK_FALSE(proto::transcript_opens_transfers(t));

  const auto broke = proto::ideal_run(protocol_market(1.0), {0.99, 0.99}, "s-broke");
  CHECK_FALSE(broke.outcome.solvent);
  CHECK(broke.outcome.transfers == std::vector<double>{0.0, 0.0});

  // The trusted-party run handles economies the share protocol cannot.
  const MarketParams wide(3.0, 3, 2.0, 0.0, TypeDistribution::uniform(0.0, 1.0),
                          RevisionSpec::zero());
  const auto three = proto::ideal_run(wide, {0.1, 0.2, 0.3}, "s-three");
  REQUIRE(three.outcome.solvent);
  REQUIRE(three.messages.size() == 7);
  CHECK(three.outcome.transfers[0] == Catch::Approx(0.5).margin(1e-9));
  CHECK(three.outcome.transfers[1] == Catch::Approx(0.6).margin(1e-9));
  CHECK(three.outcome.transfers[2] == Catch::Approx(0.7).margin(1e-9));
}

TEST_CASE("secure session reproduces the settlement", "[protocol]") {
  const auto t = proto::mpc_run(anchor_session(), {0.3, 0.6});
  REQUIRE(t.outcome.solvent);
  CHECK(t.outcome.transfers[0] == Catch::Approx(0.5).margin(1e-9));
  CHECK(t.outcome.transfers[1] == Catch::Approx(0.5).margin(1e-9));
  CHECK(t.outcome.forgiveness[0] == Catch::Approx(0.5).margin(1e-9));
  CHECK(t.outcome.flags.empty());
  CHECK_FALSE(t.ideal_model);

  // 4 input shares, 2 mask seeds, 2 masked solvency reveals, 2 evaluator
  // outcomes, 8 transfer reveals, 2 creditor outcomes.
  CHECK(t.messages.size() == 20);
  CHECK(count_kind(t, "share") == 4);
  CHECK(count_kind(t, "mask") == 2);
  CHECK(count_kind(t, "reveal") == 10);
  CHECK(count_kind(t, "outcome") == 4);
  CHECK(has_note_containing(t, "masked-compare"));
  CHECK(has_note_containing(t, "affine-invertibility"));
  CHECK(proto::transcript_opens_transfers(t));
}

TEST_CASE("bankrupt sessions never open transfers", "[protocol]") {
  const SessionParams params(protocol_market(1.0), "s-bankrupt", proto::FixedPointCodec{}, 7);
  const auto t = proto::mpc_run(params, {0.99, 0.99});
  REQUIRE_FALSE(t.outcome.solvent);
  CHECK(t.outcome.transfers == std::vector<double>{0.0, 0.0});
  CHECK(t.outcome.forgiveness == std::vector<double>{0.0, 0.0});
  CHECK(t.messages.size() == 12);
  CHECK_FALSE(proto::transcript_opens_transfers(t));
  CHECK(has_note_containing(t, "masked-compare"));
  CHECK_FALSE(has_note_containing(t, "affine-invertibility"));
}

TEST_CASE("sessions are deterministic in the seed", "[protocol]") {
  const auto a = proto::mpc_run(anchor_session(), {0.3, 0.6});
  const auto b = proto::mpc_run(anchor_session(), {0.3, 0.6});
  CHECK(proto::transcript_to_jsonl(a) == proto::transcript_to_jsonl(b));

  // A different seed reshuffles every share but cannot move the outcome:
  // the share arithmetic telescopes to the same field elements.
  const auto c = proto::mpc_run(anchor_session("s-anchor", 8), {0.3, 0.6});
  CHECK(proto::transcript_to_jsonl(c) != proto::transcript_to_jsonl(a));
  CHECK(c.outcome.solvent == a.outcome.solvent);
  CHECK(c.outcome.transfers[0] == a.outcome.transfers[0]);
  CHECK(c.outcome.transfers[1] == a.outcome.transfers[1]);
}

TEST_CASE("party seeds are distinct and stable", "[protocol]") {
  std::vector<std::uint64_t> seeds;
  for (const std::string& id : proto::party_order()) {
    seeds.push_back(proto::party_seed(42, id));
  }
  std::sort(seeds.begin(), seeds.end());
  CHECK(std::adjacent_find(seeds.begin(), seeds.end()) == seeds.end());
  CHECK(proto::party_seed(42, "c1") == proto::party_seed(42, "c1"));
  CHECK_THROWS_AS(proto::party_seed(42, "nobody"), std::invalid_argument);
}

TEST_CASE("shared masks agree and stay in range", "[protocol]") {
  const std::uint64_t range = 1ULL << 20;
  for (std::uint64_t s1 : {0ULL, 7ULL, 0xDEADBEEFULL}) {
    for (std::uint64_t s2 : {1ULL, 99ULL}) {
      const std::uint64_t m = proto::mask_from_seeds(s1, s2, range);
      CHECK(m == proto::mask_from_seeds(s1, s2, range));
      CHECK(m >= 1);
      CHECK(m <= range);
    }
  }
}

TEST_CASE("sessions outside the supported domain are rejected", "[protocol]") {
  using jubilee::TypeProfile;
  const proto::FixedPointCodec codec;

  const MarketParams three(3.0, 3, 2.0, 0.0, TypeDistribution::uniform(0.0, 1.0),
                           RevisionSpec::zero());
  CHECK_THROWS_AS(proto::require_protocol_domain(three, codec), std::domain_error);

  const MarketParams skewed(2.0, 2, 1.5, 0.0, TypeDistribution::truncated_exponential(1.0, 0.0, 1.0),
                            RevisionSpec::zero());
  CHECK_THROWS_AS(proto::require_protocol_domain(skewed, codec), std::domain_error);

  const MarketParams wide_support(4.0, 2, 2.0, 0.0, TypeDistribution::uniform(0.0, 2.0),
                                  RevisionSpec::linear(1.0));
  CHECK_THROWS_AS(proto::require_protocol_domain(wide_support, codec), std::domain_error);

  const MarketParams steep(2.0, 2, 2.0, 0.0, TypeDistribution::uniform(0.0, 1.0),
                           RevisionSpec::linear(2.5));
  CHECK_THROWS_AS(proto::require_protocol_domain(steep, codec), std::domain_error);

  const MarketParams rich(2.0, 2, 2.5, 0.0, TypeDistribution::uniform(0.0, 1.0),
                          RevisionSpec::linear(1.0));
  CHECK_THROWS_AS(proto::require_protocol_domain(rich, codec), std::domain_error);

  CHECK_THROWS_AS(proto::require_protocol_domain(protocol_market(), proto::FixedPointCodec(25)),
                  std::domain_error);
  CHECK_THROWS_AS(proto::require_protocol_domain(protocol_market(), proto::FixedPointCodec(3)),
                  std::domain_error);
  CHECK_NOTHROW(proto::require_protocol_domain(protocol_market(), codec));

  CHECK_THROWS_AS(proto::mpc_run(SessionParams(three, "s"), TypeProfile{0.1, 0.2, 0.3}),
                  std::domain_error);
}

TEST_CASE("a zero budget gap settles and is flagged near the band", "[protocol]") {
  // theta1 + theta2 lands exactly on the threshold: every fixed-point value
  // involved is exactly representable, the masked gap is literally zero, and
  // the tie settles.
  const auto t = proto::mpc_run(anchor_session("s-band"), {0.5, 0.5});
  CHECK(t.outcome.solvent);
  CHECK(t.near_quantization_band);
  CHECK(has_note_containing(t, "near-quantization-band"));
  CHECK(t.outcome.transfers[0] == Catch::Approx(0.5).margin(1e-9));

  // A comfortably interior profile does not trip the band flag.
  const auto safe = proto::mpc_run(anchor_session("s-safe"), {0.3, 0.6});
  CHECK_FALSE(safe.near_quantization_band);
}

TEST_CASE("circuit constants match the worked closed forms", "[protocol]") {
  const auto market = protocol_market(1.4, 0.75);
  const auto c = proto::make_circuit_constants(market, proto::FixedPointCodec{});
  const auto cf = jubilee::cf_affine_circuit(jubilee::TwoCreditorEconomy{1.4, 2.0, 0.75});
  CHECK(c.tau == Catch::Approx(cf.pivot_threshold).margin(1e-12));
  CHECK(c.intercept == Catch::Approx(cf.intercept).margin(1e-12));
  CHECK(c.slope == Catch::Approx(cf.slope).margin(1e-12));
  CHECK(c.compare_scale == 38);
  CHECK(c.transfer_scale == 40);
  CHECK(c.mask_range == (1ULL << 20));
}

TEST_CASE("secure sessions agree with the clear-text mechanism", "[protocol]") {
  std::mt19937_64 gen(2718);
  std::uniform_real_distribution<double> theta_draw(0.0, 1.0);
  std::uniform_real_distribution<double> budget_draw(0.6, 2.0);
  std::uniform_real_distribution<double> alpha_draw(0.0, 1.75);

  int compared_decisions = 0;
  for (int rep = 0; rep < 200; ++rep) {
    const double investment = budget_draw(gen);
    const double alpha = alpha_draw(gen);
    const auto market = protocol_market(investment, alpha);
    const jubilee::TypeProfile theta{theta_draw(gen), theta_draw(gen)};

    const SessionParams params(market, "s-diff-" + std::to_string(rep),
                               proto::FixedPointCodec{}, 1000 + rep);
    const auto t = proto::mpc_run(params, theta);
    const auto clear = jubilee::settle(market, theta);

    // Input quantization can legitimately flip the decision when the budget
    // sits within one encoding quantum of the virtual-cost sum.
    const double cost_sum =
        jubilee::cf_virtual_cost_sum(jubilee::TwoCreditorEconomy{investment, 2.0, alpha},
                                     theta[0], theta[1]);
    if (std::abs(investment - cost_sum) >= std::ldexp(1.0, -18)) {
      CHECK(t.outcome.solvent == clear.solvent);
      ++compared_decisions;
    }
    if (t.outcome.solvent && clear.solvent) {
      CHECK(std::abs(t.outcome.transfers[0] - clear.transfers[0]) <= 1e-5);
      CHECK(std::abs(t.outcome.transfers[1] - clear.transfers[1]) <= 1e-5);
      CHECK(std::abs(t.outcome.forgiveness[0] - clear.forgiveness[0]) <= 1e-5);
    }
  }
  // The quantization band is vanishingly small; almost everything compares.
  CHECK(compared_decisions >= 195);
}

TEST_CASE("transcripts never carry a creditor input elsewhere", "[protocol]") {
  const proto::FixedPointCodec codec;
  for (bool solvent_case : {true, false}) {
    const SessionParams params(protocol_market(solvent_case ? 2.0 : 1.0),
                               solvent_case ? "s-priv-a" : "s-priv-b",
                               codec, 7);
    const jubilee::TypeProfile theta = solvent_case ? jubilee::TypeProfile{0.3, 0.6}
                                                    : jubilee::TypeProfile{0.99, 0.99};
    const auto t = proto::mpc_run(params, theta);
    CHECK_FALSE(proto::transcript_discloses_input(t, theta[0], "c1", codec));
    CHECK_FALSE(proto::transcript_discloses_input(t, theta[1], "c2", codec));
  }
}

TEST_CASE("the disclosure scanner catches planted leaks", "[protocol]") {
  const proto::FixedPointCodec codec;
  auto t = proto::mpc_run(anchor_session("s-plant"), {0.3, 0.6});
  REQUIRE_FALSE(proto::transcript_discloses_input(t, 0.3, "c1", codec));

  // Plant the encoded input as a string in a message c1 never touches.
  Message leak;
  leak.session = "s-plant";
  leak.from = "E1";
  leak.to = "E2";
  leak.kind = "mask";
  leak.body = {{"oops", std::to_string(proto::field_to_signed(codec.encode(0.3)))}};
  auto leaked = t;
  leaked.messages.push_back(leak);
  CHECK(proto::transcript_discloses_input(leaked, 0.3, "c1", codec));

  // Plant the raw real number instead.
  leak.body = {{"oops", 0.3}};
  auto numeric = t;
  numeric.messages.push_back(leak);
  CHECK(proto::transcript_discloses_input(numeric, 0.3, "c1", codec));

  // Outcome payloads are deliberate real-valued disclosures, so the raw
  // number is allowed there...
  leak.kind = "outcome";
  auto outcome_value = t;
  outcome_value.messages.push_back(leak);
  CHECK_FALSE(proto::transcript_discloses_input(outcome_value, 0.3, "c1", codec));

  // ...but a fixed-point encoding never is.
  leak.body = {{"oops", std::to_string(proto::field_to_signed(codec.encode(0.3)))}};
  auto outcome_encoding = t;
  outcome_encoding.messages.push_back(leak);
  CHECK(proto::transcript_discloses_input(outcome_encoding, 0.3, "c1", codec));
}

TEST_CASE("input shares look uniform to one evaluator", "[protocol]") {
  // Chi-square on 16 equiprobable buckets of the share c1 sends E1, across
  // sessions with a fixed input. 99th percentile of chi-square(15) is 30.58.
  constexpr int kSessions = 300;
  constexpr int kBuckets = 16;
  std::vector<int> counts(kBuckets, 0);
  for (int i = 0; i < kSessions; ++i) {
    const auto t = proto::mpc_run(anchor_session("s-chi-" + std::to_string(i), 5000 + i),
                                  {0.3, 0.6});
    for (const Message& m : t.messages) {
      if (m.kind == "share" && m.from == "c1" && m.to == "E1") {
        const std::uint64_t v = std::stoull(m.body.at("share").get<std::string>());
        const auto bucket = static_cast<std::size_t>(
            (static_cast<unsigned __int128>(v) * kBuckets) / proto::kFieldPrime);
        counts[std::min<std::size_t>(bucket, kBuckets - 1)]++;
      }
    }
  }
  const double expected = static_cast<double>(kSessions) / kBuckets;
  double chi2 = 0.0;
  for (int c : counts) {
    const double d = static_cast<double>(c) - expected;
    chi2 += d * d / expected;
  }
  CHECK(chi2 < 30.5779);
}

TEST_CASE("transcript files are JSON lines with a final outcome record", "[protocol]") {
  const auto t = proto::mpc_run(anchor_session("s-file"), {0.3, 0.6});
  const std::string jsonl = proto::transcript_to_jsonl(t);
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < jsonl.size()) {
    const std::size_t nl = jsonl.find('\n', start);
    lines.push_back(jsonl.substr(start, nl - start));
    start = nl + 1;
  }
  REQUIRE(lines.size() == t.messages.size() + 1);
  for (const auto& line : lines) {
    CHECK_FALSE(nlohmann::json::parse(line, nullptr, false).is_discarded());
  }
  const auto last = nlohmann::json::parse(lines.back());
  CHECK(last.at("record") == "outcome");
  CHECK(last.at("solvent") == true);
  CHECK(last.at("session") == "s-file");
}

namespace {

proto::TcpConfig local_config(int base_port, int timeout_ms = 10000) {
  proto::TcpConfig cfg;
  for (std::size_t i = 0; i < proto::party_order().size(); ++i) {
    cfg.endpoints.push_back({proto::party_order()[i], "127.0.0.1", base_port + static_cast<int>(i)});
  }
  cfg.timeout_ms = timeout_ms;
  return cfg;
}

int test_port_base() {
  // Processes running this suite concurrently get disjoint port ranges.
  return 20000 + static_cast<int>(::getpid() % 20000);
}

}  // namespace

TEST_CASE("five parties settle over loopback sockets", "[protocol]") {
  const int base = test_port_base();
  const auto cfg = local_config(base);
  const auto params = anchor_session("s-tcp");

  proto::CreditorParty c1("c1", params, 0.3, proto::party_seed(params.seed, "c1"));
  proto::CreditorParty c2("c2", params, 0.6, proto::party_seed(params.seed, "c2"));
  proto::DebtorParty debtor(params);
  proto::EvaluatorParty e1("E1", params, proto::party_seed(params.seed, "E1"));
  proto::EvaluatorParty e2("E2", params, proto::party_seed(params.seed, "E2"));

  std::vector<proto::Party*> parties{&c1, &c2, &debtor, &e1, &e2};
  std::vector<proto::TcpRunResult> results(parties.size());
  std::vector<std::thread> threads;
  threads.reserve(parties.size());
  for (std::size_t i = 0; i < parties.size(); ++i) {
    threads.emplace_back(
        [&, i] { results[i] = proto::run_party_tcp(*parties[i], cfg); });
  }
  for (auto& th : threads) th.join();

  for (std::size_t i = 0; i < results.size(); ++i) {
    INFO("party " << parties[i]->id() << ": " << results[i].error);
    CHECK(results[i].status == proto::TcpStatus::Success);
    CHECK(parties[i]->finished());
  }
  REQUIRE(debtor.outcome().solvent);
  CHECK(debtor.outcome().transfers[0] == Catch::Approx(0.5).margin(1e-9));
  // The creditor reconstructs its own transfer from the evaluator shares.
  CHECK(c1.transfer() == Catch::Approx(0.5).margin(1e-9));
  CHECK(c1.forgiveness() == Catch::Approx(0.5).margin(1e-9));
  CHECK(c2.decision() == "solvent");
}

TEST_CASE("a lone party times out cleanly", "[protocol]") {
  const int base = test_port_base() + 8;
  const auto params = anchor_session("s-timeout");
  proto::DebtorParty debtor(params);
  proto::TcpConfig cfg = local_config(base, 300);
  const auto result = proto::run_party_tcp(debtor, cfg);
  CHECK(result.status == proto::TcpStatus::Timeout);
  CHECK_FALSE(debtor.finished());
}

TEST_CASE("an occupied port reports a connection failure", "[protocol]") {
  const int base = test_port_base() + 16;
  // Occupy the debtor's port before the party tries to listen on it.
  const int blocker = ::socket(AF_INET, SOCK_STREAM, 0);
  REQUIRE(blocker >= 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(base + 2));
  ::inet_pton(AF_INET, "127.0.0.1", &addr.sin_addr);
  REQUIRE(::bind(blocker, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);
  REQUIRE(::listen(blocker, 1) == 0);

  const auto params = anchor_session("s-busy");
  proto::DebtorParty debtor(params);
  const auto result = proto::run_party_tcp(debtor, local_config(base, 500));
  CHECK(result.status == proto::TcpStatus::ConnectionFailure);
  ::close(blocker);
}

TEST_CASE("a peer speaking another version is rejected", "[protocol]") {
  const int base = test_port_base() + 24;
  const auto params = anchor_session("s-version");
  proto::DebtorParty debtor(params);
  proto::TcpConfig cfg = local_config(base, 3000);

  proto::TcpRunResult result;
  std::thread listener([&] { result = proto::run_party_tcp(debtor, cfg); });

  // Connect as soon as the listener is up and introduce ourselves with a
  // version byte this build does not speak.
  int fd = -1;
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(2);
  while (std::chrono::steady_clock::now() < deadline) {
    fd = ::socket(AF_INET, SOCK_STREAM, 0);
    REQUIRE(fd >= 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(base + 2));
    ::inet_pton(AF_INET, "127.0.0.1", &addr.sin_addr);
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0) break;
    ::close(fd);
    fd = -1;
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  REQUIRE(fd >= 0);
  const unsigned char impostor = 0x02;
  REQUIRE(::send(fd, &impostor, 1, 0) == 1);
  listener.join();
  ::close(fd);

  CHECK(result.status == proto::TcpStatus::VersionMismatch);
}
