#include "splitstream/transport.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <mutex>

#include "splitstream/errors.hpp"

namespace splitstream {

namespace {

// One direction of an in-memory pipe.
struct Channel {
  std::deque<std::uint8_t> bytes;
};

struct PipeState {
  std::mutex mutex;
  std::condition_variable cv;
  Channel lanes[2];
  bool closed = false;
};

class MemoryEndpoint final : public Connection {
 public:
  MemoryEndpoint(std::shared_ptr<PipeState> state, int side)
      : state_(std::move(state)), side_(side) {}
  ~MemoryEndpoint() override { close(); }

  void send(std::span<const std::uint8_t> bytes) override {
    std::lock_guard lock(state_->mutex);
    if (state_->closed) throw TransportError("connection closed");
    auto& lane = state_->lanes[1 - side_].bytes;
    lane.insert(lane.end(), bytes.begin(), bytes.end());
    state_->cv.notify_all();
  }

  std::size_t receive(std::span<std::uint8_t> buffer, Millis timeout) override {
    std::unique_lock lock(state_->mutex);
    auto& lane = state_->lanes[side_].bytes;
    const bool ready = state_->cv.wait_for(lock, timeout, [&] {
      return !lane.empty() || state_->closed;
    });
    if (!lane.empty()) {
      const std::size_t n = std::min(buffer.size(), lane.size());
      std::copy_n(lane.begin(), n, buffer.begin());
      lane.erase(lane.begin(), lane.begin() + static_cast<std::ptrdiff_t>(n));
      return n;
    }
    if (!ready) return 0;
    throw TransportError("connection closed");
  }

  void close() noexcept override {
    std::lock_guard lock(state_->mutex);
    state_->closed = true;
    state_->cv.notify_all();
  }

 private:
  std::shared_ptr<PipeState> state_;
  int side_;
};

class TcpConnection final : public Connection {
 public:
  explicit TcpConnection(int fd) : fd_(fd) {
    int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  }
  ~TcpConnection() override { close(); }

  void send(std::span<const std::uint8_t> bytes) override {
    std::size_t sent = 0;
    while (sent < bytes.size()) {
      const ssize_t n = ::send(fd_, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw TransportError(std::string("send failed: ") + std::strerror(errno));
      }
      sent += static_cast<std::size_t>(n);
    }
  }

  std::size_t receive(std::span<std::uint8_t> buffer, Millis timeout) override {
    if (fd_ < 0) throw TransportError("connection closed");
    pollfd p{fd_, POLLIN, 0};
    int rc;
    do {
      rc = ::poll(&p, 1, static_cast<int>(timeout.count()));
    } while (rc < 0 && errno == EINTR);
    if (rc == 0) return 0;
    if (rc < 0) throw TransportError(std::string("poll failed: ") + std::strerror(errno));
    ssize_t n;
    do {
      n = ::recv(fd_, buffer.data(), buffer.size(), 0);
    } while (n < 0 && errno == EINTR);
    if (n == 0) throw TransportError("connection closed by peer");
    if (n < 0) throw TransportError(std::string("recv failed: ") + std::strerror(errno));
    return static_cast<std::size_t>(n);
  }

  void close() noexcept override {
    if (fd_ >= 0) {
      ::shutdown(fd_, SHUT_RDWR);
      ::close(fd_);
      fd_ = -1;
    }
  }

 private:
  int fd_;
};

}  // namespace

std::pair<ConnectionPtr, ConnectionPtr> make_memory_pipe() {
  auto state = std::make_shared<PipeState>();
  return {std::make_unique<MemoryEndpoint>(state, 0), std::make_unique<MemoryEndpoint>(state, 1)};
}

std::pair<std::string, std::uint16_t> parse_endpoint(const std::string& endpoint) {
  const auto colon = endpoint.rfind(':');
  if (colon == std::string::npos) throw ConfigError("endpoint must be host:port, got " + endpoint);
  const std::string host = endpoint.substr(0, colon);
  const unsigned long port = std::stoul(endpoint.substr(colon + 1));
  if (port > 65535) throw ConfigError("port out of range in " + endpoint);
  return {host.empty() ? "127.0.0.1" : host, static_cast<std::uint16_t>(port)};
}

ConnectionPtr tcp_connect(const std::string& host, std::uint16_t port, Millis timeout) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  if (::getaddrinfo(host.c_str(), service.c_str(), &hints, &res) != 0 || !res) {
    throw TransportError("cannot resolve " + host);
  }
  const int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  if (fd < 0) {
    ::freeaddrinfo(res);
    throw TransportError("socket() failed");
  }
  const int flags = ::fcntl(fd, F_GETFL, 0);
  ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
  int rc = ::connect(fd, res->ai_addr, res->ai_addrlen);
  ::freeaddrinfo(res);
  if (rc < 0 && errno == EINPROGRESS) {
    pollfd p{fd, POLLOUT, 0};
    rc = ::poll(&p, 1, static_cast<int>(timeout.count()));
    int err = 0;
    socklen_t len = sizeof(err);
    ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
    rc = (rc == 1 && err == 0) ? 0 : -1;
  }
  if (rc < 0) {
    ::close(fd);
    throw TransportError("connect to " + host + ":" + service + " failed");
  }
  ::fcntl(fd, F_SETFL, flags);
  return std::make_unique<TcpConnection>(fd);
}

TcpListener::TcpListener(const std::string& host, std::uint16_t port) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw TransportError("socket() failed");
  int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    close();
    throw ConfigError("listen address must be an IPv4 literal, got " + host);
  }
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0 ||
      ::listen(fd_, 64) < 0) {
    const std::string why = std::strerror(errno);
    close();
    throw TransportError("cannot listen on " + host + ":" + std::to_string(port) + ": " + why);
  }
  socklen_t len = sizeof(addr);
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() { close(); }

ConnectionPtr TcpListener::accept(Millis timeout) {
  pollfd p{fd_, POLLIN, 0};
  const int rc = ::poll(&p, 1, static_cast<int>(timeout.count()));
  if (rc <= 0) return nullptr;
  const int fd = ::accept(fd_, nullptr, nullptr);
  if (fd < 0) return nullptr;
  return std::make_unique<TcpConnection>(fd);
}

void TcpListener::close() noexcept {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

void FaultInjectingConnection::send(std::span<const std::uint8_t> bytes) {
  if (remaining_ == 0) {
    inner_->close();
    throw TransportError("injected fault: connection dropped");
  }
  --remaining_;
  inner_->send(bytes);
}

std::size_t FaultInjectingConnection::receive(std::span<std::uint8_t> buffer, Millis timeout) {
  return inner_->receive(buffer, timeout);
}

}  // namespace splitstream
