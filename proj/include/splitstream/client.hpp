#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "splitstream/dataset.hpp"
#include "splitstream/network.hpp"
#include "splitstream/record.hpp"
#include "splitstream/session.hpp"

namespace splitstream {

// Runs the frozen client layers on one sample. With noise_sigma > 0, Gaussian
// noise is added to the output; the noise stream depends only on
// (noise_seed, client_id, sample_id), so re-sending a sample reproduces it.
FeatureRecord privacy_forward(const Network& client_part, const Sample& sample,
                              std::uint32_t client_id, double noise_sigma = 0.0,
                              std::uint64_t noise_seed = 0);

std::vector<FeatureRecord> privacy_forward_all(const Network& client_part,
                                               std::span<const Sample> samples,
                                               std::uint32_t client_id, double noise_sigma = 0.0,
                                               std::uint64_t noise_seed = 0);

struct ClientOptions {
  std::uint32_t client_id = 0;
  std::uint64_t config_hash = 0;
  Millis timeout = wire::kDefaultIdleTimeout;
  // Reconnect attempts after a transport failure before giving up.
  std::size_t max_retries = 5;
  Millis retry_backoff{20};
};

struct ClientSummary {
  std::uint64_t records_sent = 0;  // distinct records, as reported in DONE
  std::uint64_t frames_sent = 0;   // FEATURE frames including resends
  std::uint64_t bytes_sent = 0;
  std::size_t reconnects = 0;
};

// Streams `records` (sample_id 0..n-1 in order) to the server: HELLO, FEATURE
// from the server's resume point, DONE, final ACK. On TransportError it calls
// `connect` again and resumes. A rejected HELLO throws ProtocolError.
ClientSummary run_client(const ClientOptions& options, std::span<const FeatureRecord> records,
                         const Connector& connect);

}  // namespace splitstream
