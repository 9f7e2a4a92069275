#include "splitstream/session.hpp"

#include <chrono>

#include "splitstream/errors.hpp"

namespace splitstream::wire {

std::size_t FrameStream::send(const Frame& frame) {
  const Bytes bytes = encode_frame(frame);
  conn_.send(bytes);
  return bytes.size();
}

std::optional<Frame> FrameStream::take_buffered() {
  auto decoded = decode_frame(pending_);
  if (!decoded) return std::nullopt;
  pending_.erase(pending_.begin(), pending_.begin() + static_cast<std::ptrdiff_t>(decoded->consumed));
  return std::move(decoded->frame);
}

std::optional<Frame> FrameStream::try_read(Millis timeout) {
  using Clock = std::chrono::steady_clock;
  const auto deadline = Clock::now() + timeout;
  std::uint8_t buf[64 * 1024];
  for (;;) {
    if (auto f = take_buffered()) return f;
    const auto left = std::chrono::duration_cast<Millis>(deadline - Clock::now());
    const std::size_t n = conn_.receive(buf, std::max(left, Millis{0}));
    if (n == 0) {
      if (Clock::now() >= deadline) return std::nullopt;
      continue;
    }
    pending_.insert(pending_.end(), buf, buf + n);
  }
}

Frame FrameStream::read(Millis timeout) {
  auto f = try_read(timeout);
  if (!f) throw TransportError("idle timeout waiting for frame");
  return std::move(*f);
}

Frame expect_frame(FrameStream& stream, MsgType type, Millis timeout) {
  Frame f = stream.read(timeout);
  if (f.type != type) {
    throw ProtocolError("expected " + std::string(to_string(type)) + " frame, got " +
                        std::string(to_string(f.type)));
  }
  return f;
}

}  // namespace splitstream::wire
