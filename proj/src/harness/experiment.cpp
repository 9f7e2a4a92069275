#include "splitstream/harness.hpp"

#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <iostream>
#include <numeric>
#include <thread>

#include "splitstream/client.hpp"
#include "splitstream/errors.hpp"
#include "splitstream/image.hpp"
#include "splitstream/server.hpp"
#include "splitstream/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace splitstream {

namespace {

constexpr std::uint64_t kPartitionStream = 0x50415254;  // "PART"
constexpr std::uint64_t kTrainStream = 0x5452414E;      // "TRAN"
constexpr std::uint64_t kNoiseStream = 0x4E4F4953;      // "NOIS"
constexpr std::uint64_t kDataStream = 0x44415441;       // "DATA"
constexpr std::uint64_t kPrivacyStream = 0x50524956;    // "PRIV"

std::vector<Sample> pick(const std::vector<Sample>& all, const std::vector<std::size_t>& idx,
                         bool renumber) {
  std::vector<Sample> out;
  out.reserve(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out.push_back(all[idx[i]]);
    if (renumber) out.back().sample_id = i;
  }
  return out;
}

}  // namespace

TrainOptions training_options(const ExperimentConfig& c, const ModelSpec& spec) {
  TrainOptions t;
  t.epochs = c.epochs ? c.epochs : spec.default_epochs;
  t.batch_size = c.batch_size ? c.batch_size : spec.default_batch;
  t.learning_rate = c.learning_rate > 0 ? c.learning_rate : spec.default_learning_rate;
  t.seed = derive_seed(c.seed, kTrainStream);
  t.loss = spec.loss;
  t.task = task_of(c);
  return t;
}

namespace {

// Everything a run needs before any client starts.
struct Prepared {
  ModelSpec spec;
  SplitModel split;
  std::vector<Sample> validation;
  std::vector<Sample> test;
  std::vector<std::vector<Sample>> shards;  // sample ids renumbered per client
  std::vector<Network> client_parts;
  TrainOptions train;
};

Prepared prepare(const ExperimentConfig& c) {
  validate(c);
  Prepared p;
  p.spec = build_experiment_model(c);
  p.split = split_model(p.spec);
  std::vector<Sample> samples = load_experiment_data(c, p.spec.network.input_shape());
  const DataPartition part = split_dataset(samples.size(), c.client_ratios, c.val_fraction,
                                           c.test_fraction, derive_seed(c.seed, kPartitionStream));
  if (task_of(c) == TaskKind::kRegression) {
    // Statistics from the training pool only, applied everywhere.
    const ZScore z = fit_zscore(pick(samples, part.pool, false));
    apply_zscore(z, samples);
  }
  p.validation = pick(samples, part.validation, true);
  p.test = pick(samples, part.test, true);
  if (c.mode == RunMode::kSingleClient) {
    const auto n = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(c.single_fraction * part.pool.size() + 1e-9)));
    p.shards.push_back(pick(samples, {part.pool.begin(), part.pool.begin() + n}, true));
  } else {
    for (const auto& shard : part.client_shards) p.shards.push_back(pick(samples, shard, true));
  }
  const std::size_t cut = p.spec.client_layer_count(p.spec.split_index);
  for (std::size_t k = 0; k < p.shards.size(); ++k) {
    if (!c.per_client_privacy_seed) {
      p.client_parts.push_back(p.split.client_part);
      continue;
    }
    Network net = p.spec.network;
    initialize_parameters(net, derive_seed(c.seed, kPrivacyStream + k), 0, cut);
    p.client_parts.push_back(net.slice(0, cut));
  }
  p.train = training_options(c, p.spec);
  return p;
}

EpochHook validation_hook(const Network& client_part, const std::vector<Sample>& val,
                          const TrainOptions& t) {
  return [&client_part, &val, t](const Network& server_part, EpochMetrics& m) {
    const Evaluation ev = evaluate(client_part, server_part, val, t.loss, t.task);
    m.val_loss = ev.summary.at("loss");
    if (t.task == TaskKind::kClassification) m.val_accuracy = ev.summary.at("accuracy");
  };
}

struct StreamResult {
  AssembledDataset data;
  FeatureQueue::Stats stats;
  std::vector<ClientSummary> clients;
};

StreamResult stream_features(const ExperimentConfig& c, const Prepared& p) {
  const std::size_t k = p.shards.size();
  ServerOptions so;
  so.config_hash = p.split.config_hash;
  for (std::uint32_t i = 0; i < k; ++i) so.expected_clients.insert(i);
  so.queue_capacity = c.queue_capacity;
  so.ack_interval = c.ack_interval;
  so.idle_timeout = Millis(c.idle_timeout_ms);
  SplitServer server(so);

  std::unique_ptr<TcpListener> listener;
  if (c.transport == TransportKind::kTcp) {
    listener = std::make_unique<TcpListener>("127.0.0.1", 0);
    server.serve(*listener);
  }

  StreamResult result;
  result.clients.resize(k);
  std::vector<std::exception_ptr> failures(k);
  {
    std::vector<std::jthread> clients;
    for (std::uint32_t id = 0; id < k; ++id) {
      clients.emplace_back([&, id] {
        try {
          const auto records = privacy_forward_all(p.client_parts[id], p.shards[id], id, c.noise_sigma,
                                                   derive_seed(c.seed, kNoiseStream));
          Connector connect;
          if (listener) {
            connect = [port = listener->port()] { return tcp_connect("127.0.0.1", port); };
          } else {
            connect = [&server] {
              auto [client_end, server_end] = make_memory_pipe();
              server.serve(std::move(server_end));
              return std::move(client_end);
            };
          }
          ClientOptions co;
          co.client_id = id;
          co.config_hash = p.split.config_hash;
          co.timeout = so.idle_timeout;
          result.clients[id] = run_client(co, records, connect);
        } catch (...) {
          failures[id] = std::current_exception();
          server.queue().shutdown();
        }
      });
    }
    try {
      result.data = server.collect(so.idle_timeout);
    } catch (const std::exception&) {
      clients.clear();
      for (auto& f : failures) {
        if (f) std::rethrow_exception(f);
      }
      throw;
    }
  }
  for (auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
  server.stop();
  result.stats = server.queue().stats();
  for (std::uint32_t id = 0; id < k; ++id) {
    if (server.queue().admitted(id) != p.shards[id].size()) {
      throw InternalError("client " + std::to_string(id) + " count mismatch after streaming");
    }
  }
  return result;
}

std::vector<Example> raw_union(const Prepared& p) {
  std::vector<Example> out;
  for (const auto& shard : p.shards) {
    const auto ex = to_examples(shard);
    out.insert(out.end(), ex.begin(), ex.end());
  }
  return out;
}

void write_epochs_csv(const fs::path& path, const std::vector<EpochMetrics>& log) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  auto opt = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string(); };
  out << "epoch,loss,accuracy,val_loss,val_accuracy\n";
  for (const auto& e : log) {
    out << e.epoch << ',' << format_number(e.loss) << ',' << opt(e.accuracy) << ',' << opt(e.val_loss)
        << ',' << opt(e.val_accuracy) << '\n';
  }
}

void export_features(const ExperimentConfig& c, const Prepared& p, const fs::path& dir) {
  if (c.feature_images == 0) return;
  const fs::path fdir = dir / "features";
  fs::create_directories(fdir);
  for (std::size_t k = 0; k < p.shards.size(); ++k) {
    for (std::size_t i = 0; i < std::min(c.feature_images, p.shards[k].size()); ++i) {
      const Sample& s = p.shards[k][i];
      const FeatureRecord r = privacy_forward(p.client_parts[k], s, static_cast<std::uint32_t>(k),
                                              c.noise_sigma, derive_seed(c.seed, kNoiseStream));
      if (r.feature.rank() != 3 || s.features.rank() != 3) return;
      const std::string stem = "client" + std::to_string(k) + "_sample" + std::to_string(i);
      export_feature_image({0, 0, s.features, 0.f, false}, 0, fdir / (stem + "_input.pgm"));
      export_feature_image(r, 0, fdir / (stem + "_feature.pgm"));
    }
  }
}

}  // namespace

TaskKind task_of(const ExperimentConfig& c) {
  return c.model == ModelKind::kCholesterolMlp ? TaskKind::kRegression : TaskKind::kClassification;
}

ModelSpec build_experiment_model(const ExperimentConfig& c) {
  ModelOptions o;
  o.hidden_activation = c.hidden_activation;
  o.pool_mode = c.pool_mode;
  o.privacy_channels = c.privacy_channels;
  o.split_index = c.split_index;
  return build_model(c.model, c.scale, c.seed, o);
}

DataPartition split_dataset(std::size_t n, const std::vector<double>& ratios, double val_fraction,
                            double test_fraction, std::uint64_t seed) {
  if (n < 10) throw ConfigError("data set needs at least 10 samples, got " + std::to_string(n));
  if (ratios.empty()) throw ConfigError("no client ratios");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Xorshift64Star rng(seed);
  shuffle(order.begin(), order.end(), rng);

  auto floor_of = [](double f, std::size_t total) {
    return static_cast<std::size_t>(std::floor(f * static_cast<double>(total) + 1e-9));
  };
  DataPartition p;
  const std::size_t nv = floor_of(val_fraction, n), nt = floor_of(test_fraction, n);
  p.validation.assign(order.begin(), order.begin() + nv);
  p.test.assign(order.begin() + nv, order.begin() + nv + nt);
  p.pool.assign(order.begin() + nv + nt, order.end());

  const std::size_t pool = p.pool.size();
  if (pool < ratios.size()) {
    throw ConfigError("training pool of " + std::to_string(pool) + " cannot fill " +
                      std::to_string(ratios.size()) + " client shards");
  }
  std::vector<std::size_t> sizes;
  for (double r : ratios) sizes.push_back(std::max<std::size_t>(1, floor_of(r, pool)));
  std::size_t used = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
  const std::size_t largest =
      static_cast<std::size_t>(std::max_element(ratios.begin(), ratios.end()) - ratios.begin());
  if (used > pool) {
    throw ConfigError("client ratios leave an empty shard for a pool of " + std::to_string(pool));
  }
  sizes[largest] += pool - used;

  std::size_t at = 0;
  for (std::size_t s : sizes) {
    p.client_shards.emplace_back(p.pool.begin() + at, p.pool.begin() + at + s);
    at += s;
  }
  return p;
}

std::vector<Sample> load_experiment_data(const ExperimentConfig& c, const Shape& input_shape) {
  std::vector<Sample> samples;
  const std::uint64_t data_seed = derive_seed(c.seed, kDataStream);
  switch (c.source) {
    case DataSource::kSyntheticClassification: {
      SyntheticImageOptions o;
      o.noise = c.synthetic_noise;
      samples = synthetic_images(c.synthetic_n ? c.synthetic_n : kSyntheticClassificationSize, data_seed, o);
      break;
    }
    case DataSource::kSyntheticRegression:
      samples = synthetic_cholesterol(c.synthetic_n ? c.synthetic_n : kSyntheticRegressionSize, data_seed);
      break;
    case DataSource::kImageDir:
      return load_image_dataset(c.data_path, input_shape);
    case DataSource::kCsv:
      return load_tabular_csv(c.data_path);
  }
  if (input_shape.size() == 3) {
    for (auto& s : samples) s.features = resize_image(s.features, input_shape[0], input_shape[1]);
  }
  return samples;
}

Network average_parameters(const std::vector<Network>& nets, const std::vector<double>& weights) {
  if (nets.empty() || nets.size() != weights.size()) throw InternalError("average_parameters arity");
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  Network out = nets.front();
  for (const auto& name : out.parameter_names()) {
    Tensor& dst = out.parameter(name);
    std::vector<double> acc(dst.size(), 0.0);
    for (std::size_t k = 0; k < nets.size(); ++k) {
      const Tensor& src = nets[k].parameter(name);
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += weights[k] / total * src[i];
    }
    for (std::size_t i = 0; i < acc.size(); ++i) dst[i] = static_cast<float>(acc[i]);
  }
  return out;
}

std::vector<EpochMetrics> run_centralized_reference(const ExperimentConfig& c) {
  const Prepared p = prepare(c);
  const auto data = raw_union(p);
  TrainState state(p.spec.network, p.train);
  train(state, data, p.spec.client_layer_count(p.spec.split_index));
  return state.log;
}

ExperimentResult run_experiment(const ExperimentConfig& c) {
  using Clock = std::chrono::steady_clock;
  const auto started = Clock::now();
  Prepared p = prepare(c);
  const fs::path out_dir = resolve_output_dir(c);
  fs::create_directories(out_dir);
  if (p.split.client_part.empty()) {
    std::clog << "warning: split_index 0 sends raw inputs to the server (no privacy layer)\n";
  }

  ExperimentResult result;
  result.output_dir = out_dir;
  for (const auto& s : p.shards) result.client_sizes.push_back(s.size());
  MetricsReport& report = result.report;
  report.task = p.train.task;
  report.label = c.name;

  Network eval_client;
  Network eval_server;
  json manifest = json::array();
  json run_info = {{"transport", to_string(c.transport)}};

  if (c.mode == RunMode::kFedAvgLite) {
    const std::size_t rounds = c.fedavg_rounds ? c.fedavg_rounds
                                               : std::max<std::size_t>(1, p.train.epochs / c.local_epochs);
    const Network empty(p.spec.network.input_shape(), {});
    std::vector<std::vector<Example>> data;
    std::vector<TrainState> states;
    std::vector<double> weights;
    for (std::size_t k = 0; k < p.shards.size(); ++k) {
      data.push_back(to_examples(p.shards[k]));
      TrainOptions t = p.train;
      t.epochs = 0;
      t.seed = derive_seed(p.train.seed, k);
      states.emplace_back(p.spec.network, t);
      weights.push_back(static_cast<double>(p.shards[k].size()));
    }
    Network global = p.spec.network;
    for (std::size_t r = 1; r <= rounds; ++r) {
      std::vector<Network> local;
      double loss = 0, acc = 0;
      for (std::size_t k = 0; k < states.size(); ++k) {
        states[k].network = global;
        states[k].options.epochs += c.local_epochs;
        train(states[k], data[k]);
        local.push_back(states[k].network);
        loss += weights[k] * states[k].log.back().loss;
        if (states[k].log.back().accuracy) acc += weights[k] * *states[k].log.back().accuracy;
      }
      global = average_parameters(local, weights);
      const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
      EpochMetrics m;
      m.epoch = r;
      m.loss = loss / total;
      if (p.train.task == TaskKind::kClassification) m.accuracy = acc / total;
      validation_hook(empty, p.validation, p.train)(global, m);
      report.per_epoch.push_back(m);
    }
    eval_client = empty;
    eval_server = global;
    result.trained = p.spec;
    result.trained.network = global;
    for (std::size_t k = 0; k < p.shards.size(); ++k) {
      for (const auto& s : p.shards[k]) manifest.push_back({k, s.sample_id, s.label});
    }
  } else {
    StreamResult streamed = stream_features(c, p);
    TrainState state(p.split.server_part, p.train);
    train_server_model(state, streamed.data, validation_hook(p.client_parts.front(), p.validation, p.train));
    report.per_epoch = state.log;
    eval_client = p.client_parts.front();
    eval_server = state.network;
    std::vector<Layer> joined(eval_client.layers());
    joined.insert(joined.end(), state.network.layers().begin(), state.network.layers().end());
    result.trained = p.spec;
    result.trained.network = Network(p.spec.network.input_shape(), joined);
    for (std::size_t i = 0; i < streamed.data.size(); ++i) {
      manifest.push_back({streamed.data.provenance[i].first, streamed.data.provenance[i].second,
                          streamed.data.labels[i]});
    }
    std::uint64_t bytes = 0, reconnects = 0;
    for (const auto& s : streamed.clients) {
      bytes += s.bytes_sent;
      reconnects += s.reconnects;
    }
    run_info["bytes_sent"] = bytes;
    run_info["reconnects"] = reconnects;
    run_info["queue"] = {{"received", streamed.stats.received},
                         {"admitted", streamed.stats.admitted},
                         {"duplicates", streamed.stats.duplicates},
                         {"dequeued", streamed.stats.dequeued}};
  }

  const Evaluation ev = evaluate(eval_client, eval_server, p.test, p.train.loss, p.train.task);
  report.final = ev.summary;
  report.per_sample_losses = ev.per_sample_losses;
  report.distribution = distribution_export(ev.per_sample_losses);
  report.info = {{"config", config_to_json(c)},
                 {"mode", to_string(c.mode)},
                 {"config_hash", p.split.config_hash},
                 {"client_sizes", result.client_sizes},
                 {"validation_size", p.validation.size()},
                 {"test_size", p.test.size()},
                 {"epochs", p.train.epochs},
                 {"batch_size", p.train.batch_size},
                 {"learning_rate", p.train.learning_rate}};
  // Neither the transport nor the output location may influence metrics.json.
  report.info["config"]["transport"].erase("kind");
  report.info["config"].erase("output_dir");

  write_report(report, out_dir);
  write_epochs_csv(out_dir / "epochs.csv", report.per_epoch);
  save_weights(out_dir / "weights.bin", result.trained);
  {
    std::ofstream m(out_dir / "manifest.csv");
    m << "index,client_id,sample_id,label\n";
    for (std::size_t i = 0; i < manifest.size(); ++i) {
      m << i << ',' << manifest[i][0].get<std::uint64_t>() << ',' << manifest[i][1].get<std::uint64_t>()
        << ',' << format_number(manifest[i][2].get<double>()) << '\n';
    }
  }
  export_features(c, p, out_dir);
  run_info["seconds"] = std::chrono::duration<double>(Clock::now() - started).count();
  std::ofstream(out_dir / "run.json") << run_info.dump(2) << '\n';
  return result;
}

void compare_reports(const std::vector<fs::path>& paths, const fs::path& out_dir) {
  if (paths.size() < 2) throw ConfigError("compare needs at least two reports");
  std::vector<MetricsReport> reports;
  std::vector<std::string> labels;
  for (const auto& p : paths) {
    reports.push_back(read_report(fs::is_directory(p) ? p / "metrics.json" : p));
    std::string label = reports.back().label.empty() ? p.parent_path().filename().string()
                                                     : reports.back().label;
    if (std::find(labels.begin(), labels.end(), label) != labels.end()) {
      label += "_" + std::to_string(labels.size());
    }
    labels.push_back(label);
  }
  const TaskKind task = reports.front().task;
  for (const auto& r : reports) {
    if (r.task != task) throw ConfigError("cannot compare classification and regression reports");
  }
  const std::vector<std::string> keys = task == TaskKind::kClassification
                                            ? std::vector<std::string>{"accuracy", "loss"}
                                            : std::vector<std::string>{"msle", "rmsle", "smape"};
  fs::create_directories(out_dir);
  {
    std::ofstream out(out_dir / "comparison.csv");
    out << "run";
    for (const auto& k : keys) out << ',' << k;
    for (const auto& k : keys) out << ",diff_" << k;
    out << '\n';
    for (std::size_t i = 0; i < reports.size(); ++i) {
      out << labels[i];
      for (const auto& k : keys) out << ',' << format_number(reports[i].final.at(k));
      for (const auto& k : keys) {
        out << ',' << format_number(reports[i].final.at(k) - reports.front().final.at(k));
      }
      out << '\n';
    }
  }
  {
    std::ofstream out(out_dir / "curves.csv");
    std::size_t epochs = 0;
    out << "epoch";
    for (const auto& l : labels) out << ',' << l << "_loss";
    if (task == TaskKind::kClassification) {
      for (const auto& l : labels) out << ',' << l << "_accuracy";
    }
    out << '\n';
    for (const auto& r : reports) epochs = std::max(epochs, r.per_epoch.size());
    for (std::size_t e = 0; e < epochs; ++e) {
      out << e + 1;
      for (const auto& r : reports) {
        out << ',' << (e < r.per_epoch.size() ? format_number(r.per_epoch[e].loss) : "");
      }
      if (task == TaskKind::kClassification) {
        for (const auto& r : reports) {
          const bool has = e < r.per_epoch.size() && r.per_epoch[e].accuracy;
          out << ',' << (has ? format_number(*r.per_epoch[e].accuracy) : "");
        }
      }
      out << '\n';
    }
  }
}

}  // namespace splitstream
