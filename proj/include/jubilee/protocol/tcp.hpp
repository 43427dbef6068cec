// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <map>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "jubilee/protocol/message.hpp"
#include "jubilee/protocol/session.hpp"
#include "jubilee/protocol/transcript.hpp"

namespace jubilee::protocol {

struct PartyEndpoint {
  std::string id;
  std::string host = "127.0.0.1";
  int port = 0;
};

struct TcpConfig {
  std::vector<PartyEndpoint> endpoints;
  int timeout_ms = 10000;
};

enum class TcpStatus { Success, Timeout, ConnectionFailure, VersionMismatch };

struct TcpRunResult {
  TcpStatus status = TcpStatus::Success;
  std::string error;
  /// Messages this party sent or received, in local processing order, plus
  /// any transcript annotations the party produced.
  ProtocolTranscript local;
};

namespace detail {

struct TransportError {
  TcpStatus status;
  std::string what;
};

inline void close_quiet(int fd) {
  if (fd >= 0) ::close(fd);
}

inline void write_all(int fd, const unsigned char* data, std::size_t len) {
  std::size_t sent = 0;
  while (sent < len) {
    const ssize_t n = ::send(fd, data + sent, len - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError{TcpStatus::ConnectionFailure,
                           std::string("send failed: ") + std::strerror(errno)};
    }
    sent += static_cast<std::size_t>(n);
  }
}

inline int listen_on(const PartyEndpoint& self) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) {
    throw TransportError{TcpStatus::ConnectionFailure,
                         std::string("socket failed: ") + std::strerror(errno)};
  }
  const int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(self.port));
  if (::inet_pton(AF_INET, self.host.c_str(), &addr.sin_addr) != 1) {
    close_quiet(fd);
    throw TransportError{TcpStatus::ConnectionFailure, "invalid listen address " + self.host};
  }
  if (::bind(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0 ||
      ::listen(fd, 8) != 0) {
    const std::string why = std::strerror(errno);
    close_quiet(fd);
    throw TransportError{TcpStatus::ConnectionFailure,
                         "cannot listen on " + self.host + ":" + std::to_string(self.port) +
                             ": " + why};
  }
  return fd;
}

}  // namespace detail

/// Run one party of a session over loopback/LAN TCP. Every party listens on
/// its configured endpoint and opens outbound connections lazily (retrying
/// until the peer's listener is up or the deadline passes). Each outbound
/// connection starts with a single version byte; inbound connections must
/// lead with the same byte. Returns when the party's state machine
/// finishes, or with a timeout/connection/version status.
inline TcpRunResult run_party_tcp(Party& party, const TcpConfig& cfg) {
  using clock = std::chrono::steady_clock;
  const auto deadline = clock::now() + std::chrono::milliseconds(cfg.timeout_ms);

  TcpRunResult result;
  std::map<std::string, PartyEndpoint> directory;
  for (const auto& ep : cfg.endpoints) directory[ep.id] = ep;
  if (directory.find(party.id()) == directory.end()) {
    result.status = TcpStatus::ConnectionFailure;
    result.error = "no endpoint configured for party " + party.id();
    return result;
  }

  int listener = -1;
  std::map<std::string, int> outbound;
  struct Inbound {
    int fd = -1;
    bool got_version = false;
    std::string buffer;
  };
  std::vector<Inbound> inbound;

  const auto cleanup = [&] {
    detail::close_quiet(listener);
    for (auto& [id, fd] : outbound) detail::close_quiet(fd);
    for (auto& conn : inbound) detail::close_quiet(conn.fd);
  };

  // Transport-level sink: records locally and writes frames to lazily
  // established outbound connections.
  class TcpSink : public PartySink {
   public:
    TcpSink(std::map<std::string, PartyEndpoint>& directory, std::map<std::string, int>& outbound,
            ProtocolTranscript& local, clock::time_point deadline)
        : directory_(directory), outbound_(outbound), local_(local), deadline_(deadline) {}

    void send(Message m) override {
      local_.messages.push_back(m);
      const int fd = connection_to(m.to);
      const std::vector<unsigned char> frame = frame_message(m);
      detail::write_all(fd, frame.data(), frame.size());
    }
    void add_note(const std::string& note) override { local_.leakage_notes.push_back(note); }
    void flag_near_band() override { local_.near_quantization_band = true; }

   private:
    int connection_to(const std::string& id) {
      auto existing = outbound_.find(id);
      if (existing != outbound_.end()) return existing->second;
      auto ep_it = directory_.find(id);
      if (ep_it == directory_.end()) {
        throw detail::TransportError{TcpStatus::ConnectionFailure,
                                     "no endpoint configured for peer " + id};
      }
      const PartyEndpoint& ep = ep_it->second;
      sockaddr_in addr{};
      addr.sin_family = AF_INET;
      addr.sin_port = htons(static_cast<std::uint16_t>(ep.port));
      if (::inet_pton(AF_INET, ep.host.c_str(), &addr.sin_addr) != 1) {
        throw detail::TransportError{TcpStatus::ConnectionFailure,
                                     "invalid peer address " + ep.host};
      }
      // The peer's listener may not be up yet; retry until the deadline.
      while (true) {
        const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
        if (fd < 0) {
          throw detail::TransportError{TcpStatus::ConnectionFailure,
                                       std::string("socket failed: ") + std::strerror(errno)};
        }
        if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) == 0) {
          const int one = 1;
          ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
          const unsigned char hello = kVersionByte;
          detail::write_all(fd, &hello, 1);
          outbound_[id] = fd;
          return fd;
        }
        detail::close_quiet(fd);
        if (clock::now() >= deadline_) {
          throw detail::TransportError{TcpStatus::ConnectionFailure,
                                       "cannot connect to " + id + " at " + ep.host + ":" +
                                           std::to_string(ep.port)};
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
      }
    }

    std::map<std::string, PartyEndpoint>& directory_;
    std::map<std::string, int>& outbound_;
    ProtocolTranscript& local_;
    clock::time_point deadline_;
  };

  TcpSink sink(directory, outbound, result.local, deadline);

  try {
    listener = detail::listen_on(directory[party.id()]);
    party.on_start(sink);

    // Drain complete frames from an inbound buffer, delivering each message.
    const auto drain = [&](Inbound& conn) {
      if (!conn.got_version) {
        if (conn.buffer.empty()) return;
        if (static_cast<unsigned char>(conn.buffer[0]) != kVersionByte) {
          throw detail::TransportError{TcpStatus::VersionMismatch,
                                       "peer sent unsupported transport version byte"};
        }
        conn.got_version = true;
        conn.buffer.erase(0, 1);
      }
      while (conn.buffer.size() >= 4) {
        const auto* b = reinterpret_cast<const unsigned char*>(conn.buffer.data());
        const std::uint32_t len = (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) |
                                  (std::uint32_t{b[2]} << 8) | std::uint32_t{b[3]};
        if (len > (1u << 22)) {
          throw detail::TransportError{TcpStatus::ConnectionFailure, "oversized frame"};
        }
        if (conn.buffer.size() < 4u + len) break;
        const std::string payload = conn.buffer.substr(4, len);
        conn.buffer.erase(0, 4u + len);
        Message m;
        try {
          m = parse_frame_payload(payload);
        } catch (const VersionMismatchError& e) {
          throw detail::TransportError{TcpStatus::VersionMismatch, e.what()};
        }
        if (m.to != party.id()) {
          throw detail::TransportError{TcpStatus::ConnectionFailure,
                                       "received message addressed to " + m.to};
        }
        result.local.messages.push_back(m);
        party.on_message(m, sink);
      }
    };

    while (!party.finished()) {
      const auto now = clock::now();
      if (now >= deadline) {
        throw detail::TransportError{TcpStatus::Timeout, "session deadline exceeded"};
      }
      const int wait_ms = static_cast<int>(
          std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count() + 1);

      std::vector<pollfd> fds;
      fds.push_back(pollfd{listener, POLLIN, 0});
      for (const auto& conn : inbound) fds.push_back(pollfd{conn.fd, POLLIN, 0});

      const int ready = ::poll(fds.data(), fds.size(), wait_ms);
      if (ready < 0) {
        if (errno == EINTR) continue;
        throw detail::TransportError{TcpStatus::ConnectionFailure,
                                     std::string("poll failed: ") + std::strerror(errno)};
      }
      if (ready == 0) {
        throw detail::TransportError{TcpStatus::Timeout, "session deadline exceeded"};
      }

      if (fds[0].revents & POLLIN) {
        while (true) {
          const int conn_fd = ::accept(listener, nullptr, nullptr);
          if (conn_fd < 0) break;
          const int one = 1;
          ::setsockopt(conn_fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
          inbound.push_back(Inbound{conn_fd, false, {}});
          break;  // poll again; additional pending accepts surface immediately
        }
      }

      for (std::size_t i = 1; i < fds.size(); ++i) {
        if (!(fds[i].revents & (POLLIN | POLLHUP | POLLERR))) continue;
        Inbound& conn = inbound[i - 1];
        char chunk[4096];
        const ssize_t n = ::recv(conn.fd, chunk, sizeof chunk, 0);
        if (n > 0) {
          conn.buffer.append(chunk, static_cast<std::size_t>(n));
          drain(conn);
          if (party.finished()) break;
        } else if (n == 0 || (n < 0 && errno != EINTR)) {
          detail::close_quiet(conn.fd);
          conn.fd = -1;
        }
      }
      inbound.erase(std::remove_if(inbound.begin(), inbound.end(),
                                   [](const Inbound& c) { return c.fd < 0; }),
                    inbound.end());
    }
  } catch (const detail::TransportError& e) {
    result.status = e.status;
    result.error = e.what;
    cleanup();
    return result;
  } catch (const std::exception& e) {
    result.status = TcpStatus::ConnectionFailure;
    result.error = e.what();
    cleanup();
    return result;
  }

  cleanup();
  return result;
}

}  // namespace jubilee::protocol
