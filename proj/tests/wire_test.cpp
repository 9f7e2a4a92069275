#include <gtest/gtest.h>

#include <thread>

#include "splitstream/errors.hpp"
#include "splitstream/rng.hpp"
#include "splitstream/transport.hpp"
#include "splitstream/wire.hpp"

using namespace splitstream;
using namespace splitstream::wire;

namespace {

// Produced by tests/oracles/golden_frame.py (struct + zlib), not by the codec.
const Bytes kGolden = {
    0x53, 0x54, 0x53, 0x4c, 0x01, 0x02, 0x01, 0x00, 0x00, 0x00, 0x16, 0x00, 0x00, 0x00,
    0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x80, 0x3f, 0x01, 0x01,
    0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0xa5, 0x7c, 0x14, 0x21};

FeatureRecord golden_record() {
  FeatureRecord r;
  r.client_id = 1;
  r.sample_id = 0;
  r.label = 1.0f;
  r.feature = Tensor({1}, std::vector<float>{0.0f});
  return r;
}

FeatureRecord random_record(Xorshift64Star& rng) {
  FeatureRecord r;
  r.client_id = static_cast<std::uint32_t>(rng());
  r.sample_id = rng();
  r.label = static_cast<float>(rng.gaussian() * 100);
  r.noise_applied = rng.below(2) == 1;
  const std::size_t rank = 1 + rng.below(4);
  Shape dims(rank);
  for (auto& d : dims) d = 1 + rng.below(5);
  std::vector<float> data(element_count(dims));
  for (auto& v : data) {
    // Arbitrary finite bit patterns, including subnormals and negative zero.
    float f;
    do {
      f = std::bit_cast<float>(static_cast<std::uint32_t>(rng()));
    } while (!std::isfinite(f));
    v = f;
  }
  r.feature = Tensor(dims, std::move(data));
  return r;
}

}  // namespace

TEST(Crc32, CheckValue) {
  const std::string s = "123456789";
  EXPECT_EQ(wire::crc32({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()}), 0xCBF43926u);
}

TEST(Frame, GoldenEncode) { EXPECT_EQ(encode_record(golden_record()), kGolden); }

TEST(Frame, GoldenDecode) {
  const auto r = decode_record(kGolden);
  ASSERT_TRUE(r.has_value());
  EXPECT_EQ(*r, golden_record());
}

TEST(Frame, RandomRoundTripIsBitExact) {
  Xorshift64Star rng(2024);
  for (int i = 0; i < 1000; ++i) {
    const FeatureRecord r = random_record(rng);
    const Bytes bytes = encode_record(r);
    const auto back = decode_record(bytes);
    ASSERT_TRUE(back.has_value());
    // Compare bytes so NaN-free but -0.0/subnormal payloads are checked bitwise.
    EXPECT_EQ(encode_record(*back), bytes);
    EXPECT_EQ(back->client_id, r.client_id);
    EXPECT_EQ(back->sample_id, r.sample_id);
    EXPECT_EQ(back->feature.dims(), r.feature.dims());
  }
}

TEST(Frame, EverySingleByteCorruptionIsRejected) {
  Xorshift64Star rng(77);
  for (int i = 0; i < 1000; ++i) {
    Bytes bytes = encode_record(random_record(rng));
    const std::size_t pos = rng.below(bytes.size());
    bytes[pos] ^= static_cast<std::uint8_t>(1 + rng.below(255));
    // Corrupting body_len may make the frame look truncated; anything but a
    // successful decode is a rejection.
    try {
      EXPECT_FALSE(decode_record(bytes).has_value()) << "position " << pos;
    } catch (const ProtocolError&) {
    }
  }
}

TEST(Frame, TruncatedInputNeedsMoreBytes) {
  for (std::size_t n = 0; n < kGolden.size(); ++n) {
    EXPECT_FALSE(decode_frame(std::span(kGolden).first(n)).has_value()) << n;
  }
}

TEST(Frame, UnsupportedVersion) {
  Bytes bytes = kGolden;
  bytes[4] = 2;
  try {
    decode_frame(bytes);
    FAIL();
  } catch (const ProtocolError& e) {
    EXPECT_NE(std::string(e.what()).find("unsupported version"), std::string::npos);
  }
}

TEST(Frame, BadMagicAndCrc) {
  Bytes bytes = kGolden;
  bytes[0] = 'X';
  EXPECT_THROW(decode_frame(bytes), ProtocolError);
  bytes = kGolden;
  bytes.back() ^= 1;
  try {
    decode_frame(bytes);
    FAIL();
  } catch (const ProtocolError& e) {
    EXPECT_NE(std::string(e.what()).find("crc"), std::string::npos);
  }
}

TEST(Frame, UnknownTypeRejected) {
  Frame f{MsgType::kDone, 3, encode_done({5})};
  Bytes bytes = encode_frame(f);
  bytes[5] = 9;
  EXPECT_THROW(decode_frame(bytes), ProtocolError);
}

TEST(Frame, DecodeReportsConsumedWithTrailingBytes) {
  Bytes two = kGolden;
  two.insert(two.end(), kGolden.begin(), kGolden.end());
  const auto d = decode_frame(two);
  ASSERT_TRUE(d.has_value());
  EXPECT_EQ(d->consumed, kGolden.size());
}

TEST(Frame, RankAboveFourIsConfigError) {
  FeatureRecord r = golden_record();
  r.feature = Tensor({1, 1, 1, 1, 2}, 0.f);
  EXPECT_THROW(encode_record(r), ConfigError);
}

TEST(Frame, ReservedFlagBitsRejected) {
  Bytes body = encode_feature_body(golden_record());
  body.back() = 0x02;
  EXPECT_THROW(decode_feature_body(1, body), ProtocolError);
}

TEST(Bodies, ControlMessagesRoundTrip) {
  const HelloBody h{0x0123456789ABCDEFULL, 56, 0};
  EXPECT_EQ(encode_hello(h).size(), 18u);
  EXPECT_EQ(decode_hello(encode_hello(h)), h);
  const AckBody a{AckStatus::kHashMismatch, 64};
  EXPECT_EQ(encode_ack(a).size(), 9u);
  EXPECT_EQ(decode_ack(encode_ack(a)), a);
  EXPECT_EQ(decode_done(encode_done({80})).records_sent, 80u);
  EXPECT_THROW(decode_hello(Bytes(17)), ProtocolError);
}

TEST(Bodies, ControlFrameGoldenVectors) {
  // From tests/oracles/control_frames.py.
  const Bytes hello = {0x53, 0x54, 0x53, 0x4c, 0x01, 0x01, 0x02, 0x00, 0x00, 0x00, 0x12, 0x00,
                       0x00, 0x00, 0xef, 0xcd, 0xab, 0x89, 0x67, 0x45, 0x23, 0x01, 0x38, 0x00,
                       0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0xce, 0x08, 0x7b, 0xc3};
  const Bytes ack = {0x53, 0x54, 0x53, 0x4c, 0x01, 0x03, 0x02, 0x00, 0x00, 0x00, 0x09, 0x00, 0x00, 0x00,
                     0x00, 0x40, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x78, 0x3d, 0x60, 0x5a};
  const Bytes done = {0x53, 0x54, 0x53, 0x4c, 0x01, 0x04, 0x02, 0x00, 0x00, 0x00, 0x08, 0x00, 0x00,
                      0x00, 0x38, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x4d, 0x1e, 0x9c, 0xc3};
  EXPECT_EQ(encode_frame({MsgType::kHello, 2, encode_hello({0x0123456789ABCDEFULL, 56, 0})}), hello);
  EXPECT_EQ(encode_frame({MsgType::kAck, 2, encode_ack({AckStatus::kAccepted, 64})}), ack);
  EXPECT_EQ(encode_frame({MsgType::kDone, 2, encode_done({56})}), done);
}

TEST(Transport, MemoryPipeCarriesBytesBothWays) {
  auto [a, b] = make_memory_pipe();
  const Bytes msg = {1, 2, 3};
  a->send(msg);
  std::uint8_t buf[8];
  EXPECT_EQ(b->receive(buf, Millis{100}), 3u);
  EXPECT_EQ(buf[2], 3);
  b->send(msg);
  EXPECT_EQ(a->receive(buf, Millis{100}), 3u);
  EXPECT_EQ(a->receive(buf, Millis{10}), 0u);
  b->close();
  EXPECT_THROW(a->send(msg), TransportError);
}

TEST(Transport, TcpLoopback) {
  TcpListener listener("127.0.0.1", 0);
  ASSERT_NE(listener.port(), 0);
  std::thread client([port = listener.port()] {
    auto c = tcp_connect("127.0.0.1", port);
    c->send(kGolden);
    std::uint8_t buf[1];
    c->receive(buf, Millis{2000});
  });
  auto server = listener.accept(Millis{2000});
  ASSERT_TRUE(server);
  Bytes got;
  std::uint8_t buf[64];
  while (got.size() < kGolden.size()) {
    const std::size_t n = server->receive(buf, Millis{2000});
    got.insert(got.end(), buf, buf + n);
  }
  EXPECT_EQ(got, kGolden);
  const Bytes one = {7};
  server->send(one);
  client.join();
}

TEST(Transport, EndpointParsing) {
  EXPECT_EQ(parse_endpoint("127.0.0.1:9000"), (std::pair<std::string, std::uint16_t>{"127.0.0.1", 9000}));
  EXPECT_THROW(parse_endpoint("nope"), ConfigError);
}
