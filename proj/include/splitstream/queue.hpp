#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <set>

#include "splitstream/record.hpp"
#include "splitstream/transport.hpp"

namespace splitstream {

inline constexpr std::size_t kDefaultQueueCapacity = 4096;

// Bounded multi-producer / single-consumer buffer of feature records.
// Producers block while the queue is full. Each (client_id, sample_id) is
// admitted at most once; repeats are dropped.
class FeatureQueue {
 public:
  enum class Admit { kAdmitted, kDuplicate };

  struct Stats {
    std::uint64_t received = 0;
    std::uint64_t admitted = 0;
    std::uint64_t duplicates = 0;
    std::uint64_t dequeued = 0;
  };

  explicit FeatureQueue(std::size_t capacity = kDefaultQueueCapacity);

  // Throws ProtocolError for a new record from a client that already sent
  // DONE, or after shutdown().
  Admit push(FeatureRecord record);
  std::optional<FeatureRecord> pop(Millis timeout);

  // Freezes the client's admitted set. Throws ProtocolError if records_sent
  // does not match what has been admitted.
  void mark_done(std::uint32_t client_id, std::uint64_t records_sent);
  bool is_done(std::uint32_t client_id) const;
  // One past the highest contiguous sample_id admitted for the client.
  std::uint64_t next_expected(std::uint32_t client_id) const;
  std::uint64_t admitted(std::uint32_t client_id) const;

  // Every listed client has sent DONE.
  bool all_done(const std::set<std::uint32_t>& clients) const;

  // Wakes blocked producers and consumers; further pushes fail.
  void shutdown();

  Stats stats() const;
  std::size_t size() const;
  std::size_t capacity() const noexcept { return capacity_; }

 private:
  struct ClientState {
    std::set<std::uint64_t> above;  // admitted ids beyond the contiguous prefix
    std::uint64_t contiguous = 0;
    std::uint64_t count = 0;
    bool done = false;
  };

  bool seen(const ClientState& c, std::uint64_t id) const {
    return id < c.contiguous || c.above.contains(id);
  }

  const std::size_t capacity_;
  mutable std::mutex mutex_;
  std::condition_variable not_full_;
  std::condition_variable not_empty_;
  std::deque<FeatureRecord> buffer_;
  std::map<std::uint32_t, ClientState> clients_;
  Stats stats_;
  bool shutdown_ = false;
};

}  // namespace splitstream
