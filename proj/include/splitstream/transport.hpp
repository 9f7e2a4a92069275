#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>

namespace splitstream {

using Millis = std::chrono::milliseconds;

// A reliable, ordered byte stream. send and receive throw TransportError once
// the peer has gone away.
class Connection {
 public:
  virtual ~Connection() = default;
  virtual void send(std::span<const std::uint8_t> bytes) = 0;
  // Waits up to timeout for data; returns the count read, 0 on timeout.
  virtual std::size_t receive(std::span<std::uint8_t> buffer, Millis timeout) = 0;
  virtual void close() noexcept = 0;
};

using ConnectionPtr = std::unique_ptr<Connection>;
// Opens a fresh connection to the server; clients call it again to reconnect.
using Connector = std::function<ConnectionPtr()>;

// Two connected in-memory endpoints. Closing either end closes both.
std::pair<ConnectionPtr, ConnectionPtr> make_memory_pipe();

ConnectionPtr tcp_connect(const std::string& host, std::uint16_t port, Millis timeout = Millis{5000});

// "host:port" -> (host, port).
std::pair<std::string, std::uint16_t> parse_endpoint(const std::string& endpoint);

class TcpListener {
 public:
  // Port 0 picks an ephemeral port; see port().
  TcpListener(const std::string& host, std::uint16_t port);
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  std::uint16_t port() const noexcept { return port_; }
  // nullptr on timeout.
  ConnectionPtr accept(Millis timeout);
  void close() noexcept;

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

// Forwards to an inner connection and severs it after a fixed number of
// send() calls; used to exercise reconnect-and-resume.
class FaultInjectingConnection final : public Connection {
 public:
  FaultInjectingConnection(ConnectionPtr inner, std::size_t sends_before_drop)
      : inner_(std::move(inner)), remaining_(sends_before_drop) {}

  void send(std::span<const std::uint8_t> bytes) override;
  std::size_t receive(std::span<std::uint8_t> buffer, Millis timeout) override;
  void close() noexcept override { inner_->close(); }

 private:
  ConnectionPtr inner_;
  std::size_t remaining_;
};

}  // namespace splitstream
