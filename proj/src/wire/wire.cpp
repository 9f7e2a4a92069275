#include "splitstream/wire.hpp"

#include <algorithm>
#include <string>

#include <zlib.h>

#include "splitstream/errors.hpp"

namespace splitstream::wire {

std::string_view to_string(MsgType type) noexcept {
  switch (type) {
    case MsgType::kHello: return "HELLO";
    case MsgType::kFeature: return "FEATURE";
    case MsgType::kAck: return "ACK";
    case MsgType::kDone: return "DONE";
  }
  return "UNKNOWN";
}

std::uint32_t crc32(std::span<const std::uint8_t> bytes) noexcept {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large buffers in chunks.
  std::size_t offset = 0;
  while (offset < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - offset, 1u << 30));
    crc = ::crc32(crc, bytes.data() + offset, chunk);
    offset += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

Bytes encode_frame(const Frame& frame) {
  if (frame.body.size() > kMaxPayloadBytes) throw ConfigError("frame body exceeds 2^31 bytes");
  Bytes out(std::begin(kMagic), std::end(kMagic));
  out.reserve(kHeaderSize + frame.body.size() + kTrailerSize);
  put_u8(out, kVersion);
  put_u8(out, static_cast<std::uint8_t>(frame.type));
  put_u32(out, frame.client_id);
  put_u32(out, static_cast<std::uint32_t>(frame.body.size()));
  out.insert(out.end(), frame.body.begin(), frame.body.end());
  put_u32(out, crc32(out));
  return out;
}

std::optional<Decoded> decode_frame(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderSize) return std::nullopt;
  if (!std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) {
    throw ProtocolError("bad magic");
  }
  if (bytes[4] != kVersion) {
    throw ProtocolError("unsupported version " + std::to_string(bytes[4]));
  }
  const std::uint8_t type = bytes[5];
  if (type < 1 || type > 4) throw ProtocolError("unknown message type " + std::to_string(type));
  const std::uint32_t body_len = get_u32(bytes, 10);
  if (body_len > kMaxPayloadBytes) throw ProtocolError("body length exceeds limit");
  const std::size_t total = kHeaderSize + body_len + kTrailerSize;
  if (bytes.size() < total) return std::nullopt;
  const std::uint32_t expected = get_u32(bytes, kHeaderSize + body_len);
  if (crc32(bytes.first(kHeaderSize + body_len)) != expected) {
    throw ProtocolError("crc mismatch");
  }
  Decoded d;
  d.frame.type = static_cast<MsgType>(type);
  d.frame.client_id = get_u32(bytes, 6);
  d.frame.body.assign(bytes.begin() + kHeaderSize, bytes.begin() + kHeaderSize + body_len);
  d.consumed = total;
  return d;
}

Bytes encode_feature_body(const FeatureRecord& record) {
  const Shape& dims = record.feature.dims();
  if (dims.empty() || dims.size() > kMaxDims) {
    throw ConfigError("feature rank must be 1..4, got " + std::to_string(dims.size()));
  }
  const std::uint64_t payload = 4ULL * record.feature.size();
  if (payload > kMaxPayloadBytes) throw ConfigError("feature payload exceeds 2^31 bytes");
  Bytes out;
  out.reserve(8 + 4 + 1 + 4 * dims.size() + payload + 1);
  put_u64(out, record.sample_id);
  put_f32(out, record.label);
  put_u8(out, static_cast<std::uint8_t>(dims.size()));
  for (const std::size_t d : dims) {
    if (d > 0xFFFFFFFFULL) throw ConfigError("feature dimension exceeds u32");
    put_u32(out, static_cast<std::uint32_t>(d));
  }
  for (const float v : record.feature.data()) put_f32(out, v);
  put_u8(out, record.noise_applied ? 1 : 0);
  return out;
}

FeatureRecord decode_feature_body(std::uint32_t client_id, std::span<const std::uint8_t> body) {
  constexpr std::size_t kFixed = 8 + 4 + 1;
  if (body.size() < kFixed + 1) throw ProtocolError("feature body too short");
  const std::size_t ndims = body[12];
  if (ndims == 0 || ndims > kMaxDims) throw ProtocolError("feature rank out of range");
  if (body.size() < kFixed + 4 * ndims + 1) throw ProtocolError("feature body too short");
  Shape dims(ndims);
  std::uint64_t count = 1;
  for (std::size_t i = 0; i < ndims; ++i) {
    dims[i] = get_u32(body, kFixed + 4 * i);
    if (dims[i] == 0) throw ProtocolError("zero feature dimension");
    count *= dims[i];
    if (count * 4 > kMaxPayloadBytes) throw ProtocolError("feature payload exceeds limit");
  }
  const std::size_t payload_at = kFixed + 4 * ndims;
  if (body.size() != payload_at + 4 * count + 1) {
    throw ProtocolError("feature body length inconsistent with dims");
  }
  const std::uint8_t flags = body[body.size() - 1];
  if (flags & ~std::uint8_t{1}) throw ProtocolError("reserved feature flag bits set");

  std::vector<float> data(count);
  for (std::size_t i = 0; i < count; ++i) data[i] = get_f32(body, payload_at + 4 * i);
  FeatureRecord r;
  r.client_id = client_id;
  r.sample_id = get_u64(body, 0);
  r.label = get_f32(body, 8);
  r.feature = Tensor(std::move(dims), std::move(data));
  r.noise_applied = flags & 1;
  return r;
}

Bytes encode_hello(const HelloBody& hello) {
  Bytes out;
  put_u64(out, hello.config_hash);
  put_u64(out, hello.declared_sample_count);
  put_u8(out, static_cast<std::uint8_t>(hello.reserved));
  put_u8(out, static_cast<std::uint8_t>(hello.reserved >> 8));
  return out;
}

HelloBody decode_hello(std::span<const std::uint8_t> body) {
  if (body.size() != 18) throw ProtocolError("hello body must be 18 bytes");
  return {get_u64(body, 0), get_u64(body, 8),
          static_cast<std::uint16_t>(body[16] | (body[17] << 8))};
}

Bytes encode_ack(const AckBody& ack) {
  Bytes out;
  put_u8(out, static_cast<std::uint8_t>(ack.status));
  put_u64(out, ack.next_expected);
  return out;
}

AckBody decode_ack(std::span<const std::uint8_t> body) {
  if (body.size() != 9) throw ProtocolError("ack body must be 9 bytes");
  if (body[0] > static_cast<std::uint8_t>(AckStatus::kAlreadyDone)) {
    throw ProtocolError("unknown ack status " + std::to_string(body[0]));
  }
  return {static_cast<AckStatus>(body[0]), get_u64(body, 1)};
}

Bytes encode_done(const DoneBody& done) {
  Bytes out;
  put_u64(out, done.records_sent);
  return out;
}

DoneBody decode_done(std::span<const std::uint8_t> body) {
  if (body.size() != 8) throw ProtocolError("done body must be 8 bytes");
  return {get_u64(body, 0)};
}

Bytes encode_record(const FeatureRecord& record) {
  return encode_frame({MsgType::kFeature, record.client_id, encode_feature_body(record)});
}

std::optional<FeatureRecord> decode_record(std::span<const std::uint8_t> bytes) {
  auto decoded = decode_frame(bytes);
  if (!decoded) return std::nullopt;
  if (decoded->frame.type != MsgType::kFeature) {
    throw ProtocolError("expected FEATURE frame, got " +
                        std::string(to_string(decoded->frame.type)));
  }
  return decode_feature_body(decoded->frame.client_id, decoded->frame.body);
}

}  // namespace splitstream::wire
