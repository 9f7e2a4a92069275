#include "splitstream/client.hpp"

#include <thread>

#include "splitstream/errors.hpp"
#include "splitstream/rng.hpp"

namespace splitstream {

namespace {

std::string_view reject_reason(wire::AckStatus s) {
  switch (s) {
    case wire::AckStatus::kHashMismatch: return "config hash mismatch";
    case wire::AckStatus::kMalformedHello: return "malformed HELLO";
    case wire::AckStatus::kUnknownClient: return "unknown client id";
    default: return "rejected";
  }
}

// Drains ACKs the server has sent so far without blocking.
void drain_acks(wire::FrameStream& stream) {
  while (auto f = stream.try_read(Millis{0})) {
    if (f->type != wire::MsgType::kAck) throw ProtocolError("unexpected frame from server");
  }
}

}  // namespace

FeatureRecord privacy_forward(const Network& client_part, const Sample& sample,
                              std::uint32_t client_id, double noise_sigma,
                              std::uint64_t noise_seed) {
  if (noise_sigma < 0) throw ConfigError("noise sigma must be >= 0");
  if (sample.features.dims() != client_part.input_shape()) {
    throw ConfigError("sample " + std::to_string(sample.sample_id) + " has shape " +
                      to_string(sample.features.dims()) + ", client part expects " +
                      to_string(client_part.input_shape()));
  }
  FeatureRecord r;
  r.client_id = client_id;
  r.sample_id = sample.sample_id;
  r.label = sample.label;
  r.feature = model_forward(client_part, sample.features);
  if (noise_sigma > 0) {
    Xorshift64Star rng(derive_seed(derive_seed(noise_seed, client_id), sample.sample_id));
    for (auto& v : r.feature.data()) v = static_cast<float>(v + noise_sigma * rng.gaussian());
    r.noise_applied = true;
  }
  return r;
}

std::vector<FeatureRecord> privacy_forward_all(const Network& client_part,
                                               std::span<const Sample> samples,
                                               std::uint32_t client_id, double noise_sigma,
                                               std::uint64_t noise_seed) {
  std::vector<FeatureRecord> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    out.push_back(privacy_forward(client_part, s, client_id, noise_sigma, noise_seed));
  }
  return out;
}

ClientSummary run_client(const ClientOptions& options, std::span<const FeatureRecord> records,
                         const Connector& connect) {
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].sample_id != i || records[i].client_id != options.client_id) {
      throw ConfigError("client records must be numbered 0..n-1 for client " +
                        std::to_string(options.client_id));
    }
  }
  const std::uint64_t n = records.size();
  ClientSummary summary;
  summary.records_sent = n;

  for (std::size_t attempt = 0;; ++attempt) {
    try {
      ConnectionPtr conn = connect();
      wire::FrameStream stream(*conn);
      summary.bytes_sent += stream.send(
          {wire::MsgType::kHello, options.client_id, wire::encode_hello({options.config_hash, n, 0})});
      const auto hello_ack =
          wire::decode_ack(wire::expect_frame(stream, wire::MsgType::kAck, options.timeout).body);
      if (hello_ack.status == wire::AckStatus::kAlreadyDone) return summary;
      if (hello_ack.status != wire::AckStatus::kAccepted) {
        conn->close();
        throw ProtocolError("server rejected client " + std::to_string(options.client_id) + ": " +
                            std::string(reject_reason(hello_ack.status)));
      }
      if (hello_ack.next_expected > n) throw ProtocolError("server resume point beyond stream end");

      for (std::uint64_t i = hello_ack.next_expected; i < n; ++i) {
        summary.bytes_sent += stream.send(
            {wire::MsgType::kFeature, options.client_id, wire::encode_feature_body(records[i])});
        ++summary.frames_sent;
        drain_acks(stream);
      }
      summary.bytes_sent +=
          stream.send({wire::MsgType::kDone, options.client_id, wire::encode_done({n})});
      for (;;) {
        const auto ack =
            wire::decode_ack(wire::expect_frame(stream, wire::MsgType::kAck, options.timeout).body);
        if (ack.status != wire::AckStatus::kAccepted) throw ProtocolError("DONE rejected");
        if (ack.next_expected == n) break;
      }
      conn->close();
      return summary;
    } catch (const TransportError&) {
      if (attempt >= options.max_retries) throw;
      ++summary.reconnects;
      std::this_thread::sleep_for(options.retry_backoff * (attempt + 1));
    }
  }
}

}  // namespace splitstream
