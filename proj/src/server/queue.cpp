#include "splitstream/queue.hpp"

#include "splitstream/errors.hpp"

namespace splitstream {

FeatureQueue::FeatureQueue(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("queue capacity must be positive");
}

FeatureQueue::Admit FeatureQueue::push(FeatureRecord record) {
  std::unique_lock lock(mutex_);
  ++stats_.received;
  auto& c = clients_[record.client_id];
  if (seen(c, record.sample_id)) {
    ++stats_.duplicates;
    return Admit::kDuplicate;
  }
  if (c.done) {
    throw ProtocolError("record " + std::to_string(record.sample_id) + " from client " +
                        std::to_string(record.client_id) + " after DONE");
  }
  not_full_.wait(lock, [&] { return buffer_.size() < capacity_ || shutdown_; });
  if (shutdown_) throw ProtocolError("queue shut down");
  // Another producer for the same client may have admitted it while we waited.
  if (seen(c, record.sample_id)) {
    ++stats_.duplicates;
    return Admit::kDuplicate;
  }
  c.above.insert(record.sample_id);
  while (!c.above.empty() && *c.above.begin() == c.contiguous) {
    c.above.erase(c.above.begin());
    ++c.contiguous;
  }
  ++c.count;
  ++stats_.admitted;
  buffer_.push_back(std::move(record));
  not_empty_.notify_one();
  return Admit::kAdmitted;
}

std::optional<FeatureRecord> FeatureQueue::pop(Millis timeout) {
  std::unique_lock lock(mutex_);
  if (!not_empty_.wait_for(lock, timeout, [&] { return !buffer_.empty() || shutdown_; }) ||
      buffer_.empty()) {
    return std::nullopt;
  }
  FeatureRecord r = std::move(buffer_.front());
  buffer_.pop_front();
  ++stats_.dequeued;
  not_full_.notify_one();
  return r;
}

void FeatureQueue::mark_done(std::uint32_t client_id, std::uint64_t records_sent) {
  std::lock_guard lock(mutex_);
  auto& c = clients_[client_id];
  if (c.count != records_sent || c.contiguous != records_sent) {
    throw ProtocolError("client " + std::to_string(client_id) + " sent DONE(" +
                        std::to_string(records_sent) + ") with " + std::to_string(c.count) +
                        " records admitted");
  }
  c.done = true;
  not_empty_.notify_all();
}

bool FeatureQueue::is_done(std::uint32_t client_id) const {
  std::lock_guard lock(mutex_);
  const auto it = clients_.find(client_id);
  return it != clients_.end() && it->second.done;
}

std::uint64_t FeatureQueue::next_expected(std::uint32_t client_id) const {
  std::lock_guard lock(mutex_);
  const auto it = clients_.find(client_id);
  return it == clients_.end() ? 0 : it->second.contiguous;
}

std::uint64_t FeatureQueue::admitted(std::uint32_t client_id) const {
  std::lock_guard lock(mutex_);
  const auto it = clients_.find(client_id);
  return it == clients_.end() ? 0 : it->second.count;
}

bool FeatureQueue::all_done(const std::set<std::uint32_t>& clients) const {
  std::lock_guard lock(mutex_);
  for (const auto id : clients) {
    const auto it = clients_.find(id);
    if (it == clients_.end() || !it->second.done) return false;
  }
  return true;
}

void FeatureQueue::shutdown() {
  std::lock_guard lock(mutex_);
  shutdown_ = true;
  not_full_.notify_all();
  not_empty_.notify_all();
}

FeatureQueue::Stats FeatureQueue::stats() const {
  std::lock_guard lock(mutex_);
  return stats_;
}

std::size_t FeatureQueue::size() const {
  std::lock_guard lock(mutex_);
  return buffer_.size();
}

}  // namespace splitstream
