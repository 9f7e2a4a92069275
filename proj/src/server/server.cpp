#include "splitstream/server.hpp"

#include <algorithm>
#include <chrono>

#include "splitstream/errors.hpp"

namespace splitstream {

AssembledDataset assemble_records(std::vector<FeatureRecord> records) {
  std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
    return std::pair(a.client_id, a.sample_id) < std::pair(b.client_id, b.sample_id);
  });
  AssembledDataset out;
  if (records.empty()) return out;
  out.features.reserve(records.size());
  const Shape dims = records.front().feature.dims();
  const auto [c0, s0] = std::pair(records.front().client_id, records.front().sample_id);
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].feature.dims() != dims) {
      throw ConfigError("heterogeneous feature dims: client " +
                        std::to_string(records[i].client_id) + " sample " +
                        std::to_string(records[i].sample_id) + " has " +
                        to_string(records[i].feature.dims()) + ", client " + std::to_string(c0) +
                        " sample " + std::to_string(s0) + " has " + to_string(dims));
    }
    out.provenance.emplace_back(records[i].client_id, records[i].sample_id);
    out.labels.push_back(records[i].label);
    out.features.push_back(std::move(records[i].feature));
  }
  return out;
}

AssembledDataset assemble_dataset(FeatureQueue& queue, const std::set<std::uint32_t>& expected,
                                  Millis timeout) {
  using Clock = std::chrono::steady_clock;
  const auto deadline = Clock::now() + timeout;
  std::vector<FeatureRecord> records;
  for (;;) {
    if (auto r = queue.pop(Millis{20})) {
      records.push_back(std::move(*r));
      continue;
    }
    if (queue.all_done(expected) && queue.size() == 0) break;
    if (Clock::now() >= deadline) {
      std::string missing;
      for (const auto id : expected) {
        if (!queue.is_done(id)) missing += " " + std::to_string(id);
      }
      throw TransportError("timed out waiting for DONE from client(s):" + missing);
    }
  }
  return assemble_records(std::move(records));
}

SplitServer::SplitServer(ServerOptions options)
    : options_(std::move(options)), queue_(options_.queue_capacity) {
  if (options_.ack_interval == 0) throw ConfigError("ack interval must be positive");
}

SplitServer::~SplitServer() { stop(); }

void SplitServer::record_error(std::string what) {
  std::lock_guard lock(mutex_);
  errors_.push_back(std::move(what));
}

std::vector<std::string> SplitServer::session_errors() const {
  std::lock_guard lock(mutex_);
  return errors_;
}

void SplitServer::handle_session(Connection& conn) {
  using wire::AckStatus;
  using wire::MsgType;
  ++sessions_opened_;
  wire::FrameStream stream(conn);
  std::uint32_t client = 0;
  auto ack = [&](AckStatus status, std::uint64_t next) {
    stream.send({MsgType::kAck, client, wire::encode_ack({status, next})});
  };
  try {
    const wire::Frame hello_frame = stream.read(options_.idle_timeout);
    client = hello_frame.client_id;
    wire::HelloBody hello;
    try {
      if (hello_frame.type != MsgType::kHello) throw ProtocolError("first frame is not HELLO");
      hello = wire::decode_hello(hello_frame.body);
      if (hello.reserved != 0) throw ProtocolError("reserved HELLO bytes set");
    } catch (const ProtocolError&) {
      ack(AckStatus::kMalformedHello, 0);
      throw;
    }
    if (hello.config_hash != options_.config_hash) {
      ack(AckStatus::kHashMismatch, 0);
      throw ProtocolError("client " + std::to_string(client) + " config hash mismatch");
    }
    if (!options_.expected_clients.empty() && !options_.expected_clients.contains(client)) {
      ack(AckStatus::kUnknownClient, 0);
      throw ProtocolError("unexpected client " + std::to_string(client));
    }
    if (queue_.is_done(client)) {
      ack(AckStatus::kAlreadyDone, queue_.next_expected(client));
      conn.close();
      return;
    }
    ack(AckStatus::kAccepted, queue_.next_expected(client));

    std::size_t since_ack = 0;
    for (;;) {
      const wire::Frame f = stream.read(options_.idle_timeout);
      if (f.client_id != client) throw ProtocolError("client id changed mid-session");
      if (f.type == MsgType::kFeature) {
        queue_.push(wire::decode_feature_body(client, f.body));
        if (++since_ack == options_.ack_interval) {
          since_ack = 0;
          ack(AckStatus::kAccepted, queue_.next_expected(client));
        }
      } else if (f.type == MsgType::kDone) {
        queue_.mark_done(client, wire::decode_done(f.body).records_sent);
        ack(AckStatus::kAccepted, queue_.next_expected(client));
        conn.close();
        return;
      } else {
        throw ProtocolError("unexpected " + std::string(wire::to_string(f.type)) + " frame");
      }
    }
  } catch (const std::exception& e) {
    record_error("client " + std::to_string(client) + ": " + e.what());
    conn.close();
  }
}

void SplitServer::serve(TcpListener& listener) {
  threads_.emplace_back([this, &listener](std::stop_token stop) {
    std::vector<std::jthread> sessions;
    while (!stop.stop_requested()) {
      ConnectionPtr conn = listener.accept(Millis{50});
      if (!conn) continue;
      sessions.emplace_back([this, c = std::shared_ptr<Connection>(std::move(conn))] {
        handle_session(*c);
      });
    }
  });
}

void SplitServer::serve(ConnectionPtr conn) {
  threads_.emplace_back([this, c = std::shared_ptr<Connection>(std::move(conn))] {
    handle_session(*c);
  });
}

void SplitServer::stop() {
  for (auto& t : threads_) t.request_stop();
  // Unblocks sessions stuck on a full queue once nobody is draining it.
  queue_.shutdown();
  threads_.clear();
}

AssembledDataset SplitServer::collect(Millis timeout) {
  if (options_.expected_clients.empty()) throw ConfigError("collect needs the expected client set");
  return assemble_dataset(queue_, options_.expected_clients, timeout);
}

}  // namespace splitstream
