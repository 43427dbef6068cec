// SPDX-License-Identifier: Apache-2.0
//
// End-to-end tests that drive the installed binary through a shell, checking
// exit codes, emitted JSON, and the TCP transport across real processes.
#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <catch2/catch_amalgamated.hpp>
#include <json.hpp>

using nlohmann::json;

namespace {

std::string cli_path() { return JUBILEE_CLI_PATH; }

int run_cli(const std::string& args) {
  const std::string cmd = "unset JUBILEE_CONFIG; '" + cli_path() + "' " + args;
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

std::string temp_dir() {
  std::string tmpl = "/tmp/jubilee-cli-XXXXXX";
  char* made = ::mkdtemp(tmpl.data());
  REQUIRE(made != nullptr);
  return tmpl;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

json parse_file(const std::string& path) { return json::parse(slurp(path)); }

std::string write_config(const std::string& dir, const std::string& name, const json& body) {
  const std::string path = dir + "/" + name;
  std::ofstream(path) << body.dump(2) << "\n";
  return path;
}

json anchor_market() {
  return json{{"D", 2.0},
              {"n", 2},
              {"A", 2.0},
              {"dist", {{"kind", "uniform"}, {"lo", 0.0}, {"hi", 1.0}}},
              {"revision", {{"kind", "linear"}, {"alpha", 1.0}}}};
}

json flat_market() {
  return json{{"D", 2.0},
              {"n", 2},
              {"A", 1.0},
              {"dist", {{"kind", "uniform"}, {"lo", 0.0}, {"hi", 1.0}}},
              {"revision", {{"kind", "zero"}}}};
}

int test_port_base() { return 20000 + static_cast<int>(::getpid() % 20000); }

json tcp_endpoints(int base) {
  return json::array({{{"id", "c1"}, {"port", base}},
                      {{"id", "c2"}, {"port", base + 1}},
                      {{"id", "debtor"}, {"port", base + 2}},
                      {{"id", "E1"}, {"port", base + 3}},
                      {{"id", "E2"}, {"port", base + 4}}});
}

}  // namespace

TEST_CASE("settle prints the outcome and exits by decision", "[cli]") {
  const std::string dir = temp_dir();
  const std::string cfg = write_config(dir, "econ.json", json{{"market", anchor_market()}});

  const std::string out = dir + "/settle.json";
  REQUIRE(run_cli("settle --config '" + cfg + "' --theta 0.3 --theta 0.6 > '" + out +
                  "' 2> /dev/null") == 0);
  const json doc = parse_file(out);
  CHECK(doc.at("command") == "settle");
  CHECK(doc.at("decision") == "solvent");
  CHECK(doc.at("theta") == json::array({0.3, 0.6}));
  CHECK(doc.at("transfers")[0].get<double>() == Catch::Approx(0.5).margin(1e-9));
  CHECK(doc.at("transfers")[1].get<double>() == Catch::Approx(0.5).margin(1e-9));
  CHECK(doc.at("forgiveness")[0].get<double>() == Catch::Approx(0.5).margin(1e-9));
  CHECK(doc.at("flags").empty());
  CHECK(doc.at("config-hash").get<std::string>().size() == 16);
  CHECK(doc.at("seed") == 1);  // quadrature default seed

  // High reports make liquidation dominate: bankrupt maps to exit 3.
  REQUIRE(run_cli("settle --config '" + cfg +
                  "' --theta 0.99 --theta 0.99 > /dev/null 2> /dev/null") == 3);

  // The seed override is reflected in the output.
  const std::string seeded = dir + "/seeded.json";
  REQUIRE(run_cli("settle --config '" + cfg + "' --seed 42 --theta 0.3 --theta 0.6 > '" + seeded +
                  "' 2> /dev/null") == 0);
  CHECK(parse_file(seeded).at("seed") == 42);
}

TEST_CASE("configuration problems exit 1", "[cli]") {
  const std::string dir = temp_dir();

  std::ofstream(dir + "/broken.json") << "{ not json";
  CHECK(run_cli("settle --config '" + dir +
                "/broken.json' --theta 0.3 --theta 0.6 > /dev/null 2> /dev/null") == 1);

  json unknown{{"market", anchor_market()}, {"surprise", 1}};
  const std::string cfg = write_config(dir, "unknown.json", unknown);
  CHECK(run_cli("settle --config '" + cfg +
                "' --theta 0.3 --theta 0.6 > /dev/null 2> /dev/null") == 1);

  CHECK(run_cli("settle --config '" + dir +
                "/missing.json' --theta 0.3 --theta 0.6 > /dev/null 2> /dev/null") == 1);

  // No --config and no environment fallback.
  CHECK(run_cli("settle --theta 0.3 --theta 0.6 > /dev/null 2> /dev/null") == 1);
}

TEST_CASE("usage and domain problems exit 2", "[cli]") {
  const std::string dir = temp_dir();
  const std::string cfg = write_config(dir, "econ.json", json{{"market", anchor_market()}});

  // One report for a two-creditor market.
  CHECK(run_cli("settle --config '" + cfg + "' --theta 0.3 > /dev/null 2> /dev/null") == 2);
  // Unknown flag and missing subcommand are parse errors.
  CHECK(run_cli("settle --config '" + cfg +
                "' --theta 0.3 --theta 0.6 --frobnicate > /dev/null 2> /dev/null") == 2);
  CHECK(run_cli("> /dev/null 2> /dev/null") == 2);
  // Too few simulation draws.
  CHECK(run_cli("simulate --config '" + cfg + "' --draws 10 > /dev/null 2> /dev/null") == 2);

  // Grid verification only supports two creditors.
  json wide{{"market",
             {{"D", 3.0},
              {"n", 3},
              {"A", 2.0},
              {"dist", {{"kind", "uniform"}, {"lo", 0.0}, {"hi", 1.0}}},
              {"revision", {{"kind", "linear"}, {"alpha", 0.5}}}}}};
  const std::string wide_cfg = write_config(dir, "wide.json", wide);
  CHECK(run_cli("verify --config '" + wide_cfg + "' --ic-grid 5 > /dev/null 2> /dev/null") == 2);

  CHECK(run_cli("--help > /dev/null 2> /dev/null") == 0);
}

TEST_CASE("the environment variable supplies the config path", "[cli]") {
  const std::string dir = temp_dir();
  const std::string cfg = write_config(dir, "econ.json", json{{"market", anchor_market()}});
  const std::string cmd = "JUBILEE_CONFIG='" + cfg + "' '" + cli_path() +
                          "' settle --theta 0.3 --theta 0.6 > /dev/null 2> /dev/null";
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  CHECK(WEXITSTATUS(status) == 0);
}

TEST_CASE("output files and quiet mode", "[cli]") {
  const std::string dir = temp_dir();
  const std::string cfg = write_config(dir, "econ.json", json{{"market", anchor_market()}});

  // --out writes the document and echoes the path on stdout.
  const std::string out = dir + "/result.json";
  const std::string echo = dir + "/echo.txt";
  REQUIRE(run_cli("settle --config '" + cfg + "' --theta 0.3 --theta 0.6 --out '" + out + "' > '" +
                  echo + "' 2> /dev/null") == 0);
  CHECK(parse_file(out).at("decision") == "solvent");
  CHECK(slurp(echo) == out + "\n");

  // --quiet suppresses the echo but still writes the file.
  const std::string out2 = dir + "/quiet.json";
  const std::string echo2 = dir + "/echo2.txt";
  REQUIRE(run_cli("settle --config '" + cfg + "' --theta 0.3 --theta 0.6 --quiet --out '" + out2 +
                  "' > '" + echo2 + "' 2> /dev/null") == 0);
  CHECK(parse_file(out2).at("decision") == "solvent");
  CHECK(slurp(echo2).empty());

  // The config's own "output" entry is the default destination.
  json routed{{"market", anchor_market()}, {"output", dir + "/routed.json"}};
  const std::string routed_cfg = write_config(dir, "routed.json.cfg", routed);
  REQUIRE(run_cli("settle --config '" + routed_cfg +
                  "' --theta 0.3 --theta 0.6 --quiet > /dev/null 2> /dev/null") == 0);
  CHECK(parse_file(dir + "/routed.json").at("command") == "settle");
}

TEST_CASE("verify passes on the reference economy and reports thresholds", "[cli]") {
  const std::string dir = temp_dir();
  const std::string cfg = write_config(dir, "econ.json", json{{"market", anchor_market()}});

  const std::string out = dir + "/verify.json";
  REQUIRE(run_cli("verify --config '" + cfg +
                  "' --ic-grid 13 --envelope-grid 21 --k-grid 21 --mc-samples 20000 > '" + out +
                  "' 2> /dev/null") == 0);
  const json doc = parse_file(out);
  CHECK(doc.at("command") == "verify");
  CHECK(doc.at("passed") == true);
  CHECK(doc.at("max-ic-violation").get<double>() <= 1e-6);
  CHECK(doc.at("feasibility") == true);
  CHECK(doc.at("blessing-integral").get<double>() < 0.0);
  CHECK(doc.at("thresholds").at("ic").get<double>() == 1e-6);

  // A sampling quadrature widens every gate to its noise floor.
  json mc_cfg{{"market", flat_market()},
              {"quadrature", {{"scheme", "monte-carlo"}, {"samples", 10000}, {"seed", 3}}}};
  const std::string mc_path = write_config(dir, "mc.json", mc_cfg);
  const std::string mc_out = dir + "/verify-mc.json";
  REQUIRE(run_cli("verify --config '" + mc_path +
                  "' --ic-grid 5 --envelope-grid 5 --k-grid 11 --mc-samples 10000 > '" + mc_out +
                  "' 2> /dev/null") == 0);
  const json mc_doc = parse_file(mc_out);
  CHECK(mc_doc.at("passed") == true);
  CHECK(mc_doc.at("thresholds").at("ic").get<double>() == Catch::Approx(0.1).margin(1e-12));
}

TEST_CASE("verify negative control fails loudly", "[cli]") {
  const std::string dir = temp_dir();
  const std::string cfg = write_config(dir, "econ.json", json{{"market", anchor_market()}});

  const std::string out = dir + "/negative.json";
  REQUIRE(run_cli("verify --config '" + cfg +
                  "' --negative-control --ic-grid 13 --envelope-grid 21 --k-grid 21 "
                  "--mc-samples 20000 > '" +
                  out + "' 2> /dev/null") == 4);
  const json doc = parse_file(out);
  CHECK(doc.at("passed") == false);
  CHECK(doc.at("max-ic-violation").get<double >() > 0.01);
}

TEST_CASE("simulate is deterministic and statistically calibrated", "[cli]") {
  const std::string dir = temp_dir();
  const std::string cfg = write_config(dir, "flat.json", json{{"market", flat_market()}});

  const std::string out1 = dir + "/sim1.json";
  const std::string out2 = dir + "/sim2.json";
  const std::string args = " --alphas 0,0.5 --draws 20000 --seed 12345 --quiet";
  REQUIRE(run_cli("simulate --config '" + cfg + "'" + args + " --out '" + out1 +
                  "' > /dev/null 2> /dev/null") == 0);
  REQUIRE(run_cli("simulate --config '" + cfg + "'" + args + " --out '" + out2 +
                  "' > /dev/null 2> /dev/null") == 0);

  // Same seed, same bytes — JSON and the CSV companion alike.
  CHECK(slurp(out1) == slurp(out2));
  CHECK(slurp(dir + "/sim1.csv") == slurp(dir + "/sim2.csv"));
  CHECK(slurp(dir + "/sim1.csv").rfind("alpha,", 0) == 0);

  // The zero-slope row reproduces the known expected debtor profit 1/24.
  const json doc = parse_file(out1);
  REQUIRE(doc.at("rows").size() == 2);
  const double profit = doc.at("rows")[0].at("debtor-profit").get<double>();
  const double se = doc.at("rows")[0].at("debtor-profit-se").get<double>();
  CHECK(std::abs(profit - 1.0 / 24.0) <= 3.5 * se);

  // Malformed slope lists are usage errors.
  CHECK(run_cli("simulate --config '" + cfg +
                "' --alphas '0,,1' --draws 200 > /dev/null 2> /dev/null") == 2);
}

TEST_CASE("protocol runs in process and writes a transcript", "[cli]") {
  const std::string dir = temp_dir();
  json cfg_json{{"market", anchor_market()},
                {"protocol", {{"transport", "in-process"}, {"seed", 7}, {"fractional-bits", 20}}}};
  const std::string cfg = write_config(dir, "econ.json", cfg_json);

  const std::string out = dir + "/protocol.json";
  const std::string transcript = dir + "/session.jsonl";
  REQUIRE(run_cli("protocol --config '" + cfg +
                  "' --theta 0.3 --theta 0.6 --session cli-check --transcript '" + transcript +
                  "' > '" + out + "' 2> /dev/null") == 0);
  const json doc = parse_file(out);
  CHECK(doc.at("command") == "protocol");
  CHECK(doc.at("transport") == "in-process");
  CHECK(doc.at("session") == "cli-check");
  CHECK(doc.at("decision") == "solvent");
  CHECK(doc.at("transfers")[0].get<double>() == Catch::Approx(0.5).margin(1e-9));
  CHECK(doc.at("near-quantization-band") == false);

  // Transcript: one line per message plus the closing outcome record.
  std::ifstream lines(transcript);
  std::string line;
  int count = 0;
  std::string last;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    ++count;
    last = line;
  }
  CHECK(count == 21);
  CHECK(json::parse(last).at("record") == "outcome");

  // Misuse of the in-process transport.
  CHECK(run_cli("protocol --config '" + cfg +
                "' --party c1 --theta 0.3 --theta 0.6 > /dev/null 2> /dev/null") == 2);
  CHECK(run_cli("protocol --config '" + cfg + "' --theta 0.3 > /dev/null 2> /dev/null") == 2);

  // The protocol command requires its config section.
  const std::string bare = write_config(dir, "bare.json", json{{"market", anchor_market()}});
  CHECK(run_cli("protocol --config '" + bare +
                "' --theta 0.3 --theta 0.6 > /dev/null 2> /dev/null") == 1);
}

TEST_CASE("protocol runs five parties over tcp", "[cli]") {
  const std::string dir = temp_dir();
  const int base = test_port_base() + 40;
  json cfg_json{{"market", anchor_market()},
                {"protocol",
                 {{"transport", "tcp"},
                  {"seed", 7},
                  {"fractional-bits", 20},
                  {"timeout-ms", 15000},
                  {"endpoints", tcp_endpoints(base)}}}};
  const std::string cfg = write_config(dir, "tcp.json", cfg_json);

  const std::vector<std::pair<std::string, std::string>> parties = {
      {"E1", ""}, {"E2", ""}, {"debtor", ""}, {"c1", " --theta 0.3"}, {"c2", " --theta 0.6"}};
  std::vector<int> codes(parties.size(), -1);
  std::vector<std::thread> threads;
  for (std::size_t i = 0; i < parties.size(); ++i) {
    threads.emplace_back([&, i] {
      const std::string out = dir + "/" + parties[i].first + ".json";
      const std::string cmd = "unset JUBILEE_CONFIG; '" + cli_path() + "' protocol --config '" +
                              cfg + "' --party " + parties[i].first + parties[i].second +
                              " --quiet --out '" + out + "' > /dev/null 2> '" + dir + "/" +
                              parties[i].first + ".err'";
      const int status = std::system(cmd.c_str());
      codes[i] = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    });
  }
  for (auto& t : threads) t.join();
  for (std::size_t i = 0; i < parties.size(); ++i) {
    INFO(parties[i].first << " stderr: " << slurp(dir + "/" + parties[i].first + ".err"));
    CHECK(codes[i] == 0);
  }

  const json debtor = parse_file(dir + "/debtor.json");
  CHECK(debtor.at("decision") == "solvent");
  CHECK(debtor.at("transfers")[0].get<double>() == Catch::Approx(0.5).margin(1e-5));
  CHECK(debtor.at("transfers")[1].get<double>() == Catch::Approx(0.5).margin(1e-5));

  const json c1 = parse_file(dir + "/c1.json");
  CHECK(c1.at("party") == "c1");
  CHECK(c1.at("decision") == "solvent");
  CHECK(c1.at("transfer").get<double>() == Catch::Approx(0.5).margin(1e-5));
  CHECK(c1.at("forgiveness").get<double>() == Catch::Approx(0.5).margin(1e-5));
}

TEST_CASE("tcp transport failures map to distinct exit codes", "[cli]") {
  const std::string dir = temp_dir();

  // A lone debtor listens, hears nothing, and times out.
  {
    const int base = test_port_base() + 48;
    json cfg_json{{"market", anchor_market()},
                  {"protocol",
                   {{"transport", "tcp"},
                    {"seed", 7},
                    {"timeout-ms", 300},
                    {"endpoints", tcp_endpoints(base)}}}};
    const std::string cfg = write_config(dir, "timeout.json", cfg_json);
    CHECK(run_cli("protocol --config '" + cfg +
                  "' --party debtor > /dev/null 2> /dev/null") == 5);
  }

  // A lone creditor must push its shares and cannot reach the evaluators.
  {
    const int base = test_port_base() + 56;
    json cfg_json{{"market", anchor_market()},
                  {"protocol",
                   {{"transport", "tcp"},
                    {"seed", 7},
                    {"timeout-ms", 400},
                    {"endpoints", tcp_endpoints(base)}}}};
    const std::string cfg = write_config(dir, "connfail.json", cfg_json);
    CHECK(run_cli("protocol --config '" + cfg +
                  "' --party c1 --theta 0.3 > /dev/null 2> /dev/null") == 6);
  }

  // A peer speaking a different transport version aborts the session.
  {
    const int base = test_port_base() + 64;
    json cfg_json{{"market", anchor_market()},
                  {"protocol",
                   {{"transport", "tcp"},
                    {"seed", 7},
                    {"timeout-ms", 8000},
                    {"endpoints", tcp_endpoints(base)}}}};
    const std::string cfg = write_config(dir, "version.json", cfg_json);

    int code = -1;
    std::thread debtor([&] {
      const std::string cmd = "unset JUBILEE_CONFIG; '" + cli_path() + "' protocol --config '" +
                              cfg + "' --party debtor > /dev/null 2> /dev/null";
      const int status = std::system(cmd.c_str());
      code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    });

    // Connect to the debtor's listener and lead with a foreign version byte.
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(base + 2));
    REQUIRE(::inet_pton(AF_INET, "127.0.0.1", &addr.sin_addr) == 1);
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(5);
    int fd = -1;
    while (std::chrono::steady_clock::now() < deadline) {
      fd = ::socket(AF_INET, SOCK_STREAM, 0);
      REQUIRE(fd >= 0);
      if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) == 0) break;
      ::close(fd);
      fd = -1;
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    REQUIRE(fd >= 0);
    const unsigned char rogue = 0x02;
    REQUIRE(::send(fd, &rogue, 1, 0) == 1);

    debtor.join();
    ::close(fd);
    CHECK(code == 7);
  }
}
