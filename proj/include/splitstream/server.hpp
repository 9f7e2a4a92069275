#pragma once

#include <atomic>
#include <cstdint>
#include <mutex>
#include <set>
#include <stop_token>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "splitstream/queue.hpp"
#include "splitstream/session.hpp"

namespace splitstream {

struct AssembledDataset {
  std::vector<Tensor> features;
  std::vector<float> labels;
  std::vector<std::pair<std::uint32_t, std::uint64_t>> provenance;  // (client_id, sample_id)

  std::size_t size() const noexcept { return features.size(); }
};

// Sorts records by (client_id, sample_id) and checks that every feature has
// the same dims (ConfigError naming the offenders otherwise).
AssembledDataset assemble_records(std::vector<FeatureRecord> records);

// Drains the queue until every expected client has sent DONE and the buffer
// is empty, then assembles. Throws TransportError on timeout.
AssembledDataset assemble_dataset(FeatureQueue& queue, const std::set<std::uint32_t>& expected,
                                  Millis timeout);

struct ServerOptions {
  std::uint64_t config_hash = 0;
  // Empty accepts any client id.
  std::set<std::uint32_t> expected_clients;
  std::size_t queue_capacity = kDefaultQueueCapacity;
  std::size_t ack_interval = wire::kDefaultAckInterval;
  Millis idle_timeout = wire::kDefaultIdleTimeout;
};

class SplitServer {
 public:
  explicit SplitServer(ServerOptions options);
  ~SplitServer();
  SplitServer(const SplitServer&) = delete;
  SplitServer& operator=(const SplitServer&) = delete;

  // Services one client connection to completion. Errors end the session and
  // are recorded in session_errors(); nothing escapes.
  void handle_session(Connection& conn);

  // Accept loop on a background thread; each connection gets its own thread.
  void serve(TcpListener& listener);
  // Runs a session on a background thread (in-process transport).
  void serve(ConnectionPtr conn);
  void stop();

  AssembledDataset collect(Millis timeout);

  FeatureQueue& queue() noexcept { return queue_; }
  const ServerOptions& options() const noexcept { return options_; }
  std::vector<std::string> session_errors() const;
  std::size_t sessions_opened() const noexcept { return sessions_opened_; }

 private:
  void record_error(std::string what);

  ServerOptions options_;
  FeatureQueue queue_;
  std::atomic<std::size_t> sessions_opened_{0};
  mutable std::mutex mutex_;
  std::vector<std::string> errors_;
  std::vector<std::jthread> threads_;
};

}  // namespace splitstream
