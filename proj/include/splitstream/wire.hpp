#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>

#include "splitstream/bytes.hpp"
#include "splitstream/record.hpp"

namespace splitstream::wire {

// Frame layout (little-endian):
//   "STSL" | version u8 | type u8 | client_id u32 | body_len u32 | body | crc32 u32
// The CRC (IEEE 802.3) covers every byte before it.
inline constexpr std::uint8_t kMagic[4] = {'S', 'T', 'S', 'L'};
inline constexpr std::uint8_t kVersion = 1;
inline constexpr std::size_t kHeaderSize = 14;
inline constexpr std::size_t kTrailerSize = 4;
inline constexpr std::size_t kMaxDims = 4;
inline constexpr std::uint64_t kMaxPayloadBytes = std::uint64_t{1} << 31;
inline constexpr std::size_t kDefaultAckInterval = 64;

enum class MsgType : std::uint8_t { kHello = 1, kFeature = 2, kAck = 3, kDone = 4 };

std::string_view to_string(MsgType type) noexcept;

enum class AckStatus : std::uint8_t {
  kAccepted = 0,
  kHashMismatch = 1,
  kMalformedHello = 2,
  kUnknownClient = 3,
  kAlreadyDone = 4,
};

struct Frame {
  MsgType type = MsgType::kHello;
  std::uint32_t client_id = 0;
  Bytes body;

  bool operator==(const Frame&) const = default;
};

struct HelloBody {
  std::uint64_t config_hash = 0;
  std::uint64_t declared_sample_count = 0;
  std::uint16_t reserved = 0;

  bool operator==(const HelloBody&) const = default;
};

// status u8 | next_expected u64. next_expected is one past the highest
// contiguous sample_id received from this client (cumulative ack).
struct AckBody {
  AckStatus status = AckStatus::kAccepted;
  std::uint64_t next_expected = 0;

  bool operator==(const AckBody&) const = default;
};

// records_sent u64
struct DoneBody {
  std::uint64_t records_sent = 0;

  bool operator==(const DoneBody&) const = default;
};

std::uint32_t crc32(std::span<const std::uint8_t> bytes) noexcept;

Bytes encode_frame(const Frame& frame);

struct Decoded {
  Frame frame;
  std::size_t consumed = 0;
};

// std::nullopt means more bytes are needed (nothing consumed). Throws
// ProtocolError on bad magic, version, type, length, or CRC.
std::optional<Decoded> decode_frame(std::span<const std::uint8_t> bytes);

Bytes encode_feature_body(const FeatureRecord& record);
FeatureRecord decode_feature_body(std::uint32_t client_id, std::span<const std::uint8_t> body);

Bytes encode_hello(const HelloBody& hello);
HelloBody decode_hello(std::span<const std::uint8_t> body);
Bytes encode_ack(const AckBody& ack);
AckBody decode_ack(std::span<const std::uint8_t> body);
Bytes encode_done(const DoneBody& done);
DoneBody decode_done(std::span<const std::uint8_t> body);

// One FEATURE frame per record. Throws ConfigError for rank > 4 or a payload
// above 2^31 bytes.
Bytes encode_record(const FeatureRecord& record);

// Inverse of encode_record; std::nullopt on truncated input.
std::optional<FeatureRecord> decode_record(std::span<const std::uint8_t> bytes);

}  // namespace splitstream::wire
