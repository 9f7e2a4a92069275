#pragma once

#include <optional>

#include "splitstream/transport.hpp"
#include "splitstream/wire.hpp"

namespace splitstream::wire {

inline constexpr Millis kDefaultIdleTimeout{30000};

// Frames over a byte connection. Keeps the partial bytes of the next frame
// between calls.
class FrameStream {
 public:
  explicit FrameStream(Connection& conn) : conn_(conn) {}

  // Returns the encoded size.
  std::size_t send(const Frame& frame);
  // Throws TransportError after `timeout` without a complete frame.
  Frame read(Millis timeout);
  // std::nullopt if no complete frame arrives within `timeout`.
  std::optional<Frame> try_read(Millis timeout);

  Connection& connection() noexcept { return conn_; }

 private:
  std::optional<Frame> take_buffered();

  Connection& conn_;
  Bytes pending_;
};

// Reads the next frame and checks its type; throws ProtocolError otherwise.
Frame expect_frame(FrameStream& stream, MsgType type, Millis timeout);

}  // namespace splitstream::wire
