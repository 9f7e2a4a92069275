// Acceptance suite: one [PASS]/[FAIL] line per criterion.
//   acceptance               run all criteria
//   acceptance --criterion N run only criterion N
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>

#include "splitstream/client.hpp"
#include "splitstream/errors.hpp"
#include "splitstream/harness.hpp"
#include "splitstream/server.hpp"
#include "splitstream/wire.hpp"

namespace fs = std::filesystem;
using namespace splitstream;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* title;
  double time_limit_s;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

fs::path work_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "splitstream_acceptance" / name;
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

double mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

constexpr std::uint64_t kSeeds[] = {1, 2, 3, 4, 5};

// ---- AC1 ------------------------------------------------------------------

Outcome engine_oracles() {
  std::mt19937 gen(20240601);
  std::uniform_int_distribution<std::size_t> dim(1, 12), kern(1, 4), chan(1, 3);
  std::uniform_real_distribution<float> val(-1.f, 1.f);
  double worst = 0;
  int conv_cases = 0, pool_cases = 0;
  while (conv_cases < 100) {
    const std::size_t k = kern(gen), h = dim(gen), w = dim(gen), ci = chan(gen), co = chan(gen);
    if (h < k || w < k) continue;
    Tensor x({h, w, ci});
    for (auto& v : x.data()) v = val(gen);
    auto layer = ConvLayer::zeros(k, ci, co);
    for (auto& v : layer.weights.data()) v = val(gen);
    for (auto& v : layer.bias.data()) v = val(gen);
    const Tensor out = conv2d_forward(x, layer);
    const std::size_t oh = h - k + 1, ow = w - k + 1;
    for (std::size_t m = 0; m < oh; ++m)
      for (std::size_t n = 0; n < ow; ++n)
        for (std::size_t o = 0; o < co; ++o) {
          double s = layer.bias[o];
          for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < k; ++j)
              for (std::size_t c = 0; c < ci; ++c)
                s += static_cast<double>(x.at(m + i, n + j, c)) * layer.weights[((i * k + j) * ci + c) * co + o];
          worst = std::max(worst, std::abs(s - out.at(m, n, o)));
        }
    ++conv_cases;
  }
  while (pool_cases < 100) {
    const std::size_t k = std::max<std::size_t>(2, kern(gen)), c = chan(gen);
    const std::size_t oh = dim(gen) / k, ow = dim(gen) / k;
    if (oh == 0 || ow == 0) continue;
    const PoolMode mode = pool_cases % 2 ? PoolMode::kAvg : PoolMode::kMax;
    Tensor x({oh * k, ow * k, c});
    for (auto& v : x.data()) v = val(gen);
    const Tensor out = pool2d_forward(x, PoolLayer{k, mode});
    for (std::size_t m = 0; m < oh; ++m)
      for (std::size_t n = 0; n < ow; ++n)
        for (std::size_t ch = 0; ch < c; ++ch) {
          double best = -1e300, sum = 0;
          for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < k; ++j) {
              const double v = x.at(m * k + i, n * k + j, ch);
              best = std::max(best, v);
              sum += v;
            }
          const double ref = mode == PoolMode::kMax ? best : sum / static_cast<double>(k * k);
          worst = std::max(worst, std::abs(ref - out.at(m, n, ch)));
        }
    ++pool_cases;
  }
  return {worst < 1e-6, "100 conv + 100 pool cases, max abs diff " + fmt("%.3g", worst)};
}

// ---- AC2 ------------------------------------------------------------------

Outcome gradients() {
  std::mt19937 gen(99);
  std::uniform_real_distribution<float> val(-1.f, 1.f);
  auto fill = [&](Tensor& t) {
    for (auto& v : t.data()) v = val(gen);
  };
  auto conv = ConvLayer::zeros(3, 1, 2);
  fill(conv.weights);
  fill(conv.bias);
  auto dense = DenseLayer::zeros(8, 1);
  fill(dense.weights);
  fill(dense.bias);
  const Network toy({6, 6, 1}, {conv, ActivationLayer{ActivationKind::kLeakyRelu, kDefaultLeakySlope},
                                PoolLayer{2, PoolMode::kMax}, FlattenLayer{}, dense,
                                ActivationLayer{ActivationKind::kSigmoid}});
  std::vector<Example> toy_batch;
  for (int i = 0; i < 4; ++i) {
    Tensor x({6, 6, 1});
    fill(x);
    toy_batch.push_back({x, Tensor({1}, static_cast<float>(i % 2))});
  }
  const double toy_err = grad_check(toy, toy_batch, LossKind::kBinaryCrossentropy, 1e-3);

  const ModelSpec mlp = build_model(ModelKind::kCholesterolMlp, 1.0, 5);
  std::vector<Example> mlp_batch;
  for (int i = 0; i < 8; ++i) {
    Tensor x({kTabularFeatures});
    fill(x);
    mlp_batch.push_back({x, Tensor({1}, val(gen))});
  }
  const double mlp_err = grad_check(mlp.network, mlp_batch, mlp.loss, 1e-3);

  // Planted fault: flip the sign of the largest analytic gradient entry of the toy CNN.
  const auto shadow = toy.cast<double>();
  std::vector<BasicExample<double>> b64;
  for (const auto& ex : toy_batch) b64.push_back({ex.input.cast<double>(), ex.target.cast<double>()});
  auto analytic = backprop<double>(shadow, b64, LossKind::kBinaryCrossentropy).grads;
  double* biggest = nullptr;
  for (auto& [name, g] : analytic) {
    for (auto& v : g.data()) {
      if (!biggest || std::abs(v) > std::abs(*biggest)) biggest = &v;
    }
  }
  *biggest = -*biggest;
  const double fault_err =
      max_relative_error(analytic, numeric_gradients(shadow, b64, LossKind::kBinaryCrossentropy, 1e-3));

  const bool ok = toy_err < 1e-4 && mlp_err < 1e-4 && fault_err > 0.3;
  return {ok, "toy CNN " + fmt("%.3g", toy_err) + ", cholesterol MLP " + fmt("%.3g", mlp_err) +
                  ", planted fault " + fmt("%.3g", fault_err)};
}

// ---- experiment helpers ----------------------------------------------------

ExperimentConfig base_config(const std::string& name, std::uint64_t seed) {
  ExperimentConfig c;
  c.name = name + "_s" + std::to_string(seed);
  c.seed = seed;
  c.feature_images = 0;
  c.output_dir = work_dir(c.name);
  return c;
}

ExperimentConfig regression_config(const std::string& name, std::uint64_t seed) {
  ExperimentConfig c = base_config(name, seed);
  c.model = ModelKind::kCholesterolMlp;
  c.source = DataSource::kSyntheticRegression;
  return c;
}

ExperimentConfig with_mode(ExperimentConfig c, RunMode mode, double fraction = 0.1) {
  c.mode = mode;
  c.single_fraction = fraction;
  return c;
}

// Runs are shared between criteria when the whole suite runs.
std::map<std::string, MetricsReport>& run_cache() {
  static std::map<std::string, MetricsReport> cache;
  return cache;
}

const MetricsReport& run(const ExperimentConfig& c) {
  auto& cache = run_cache();
  const std::string key = config_to_json(c).dump();
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, run_experiment(c).report).first;
  return it->second;
}

// ---- AC3 ------------------------------------------------------------------

Outcome split_equals_centralized() {
  ExperimentConfig c = base_config("ac3", 7);
  c.epochs = 20;
  const auto split = run_experiment(c).report.per_epoch;
  const auto reference = run_centralized_reference(c);
  if (split.size() != 20 || reference.size() != 20) return {false, "wrong epoch count"};
  double worst = 0;
  for (std::size_t e = 0; e < 20; ++e) worst = std::max(worst, std::abs(split[e].loss - reference[e].loss));
  return {worst < 1e-5, "3 clients, 20 epochs, max per-epoch loss diff " + fmt("%.3g", worst)};
}

// ---- AC4 / AC6 --------------------------------------------------------------

double mean_accuracy(const std::string& name, RunMode mode, double fraction = 0.1) {
  std::vector<double> acc;
  for (auto seed : kSeeds) acc.push_back(run(with_mode(base_config(name, seed), mode, fraction)).final.at("accuracy"));
  return mean(acc);
}

Outcome single_vs_spatio() {
  const double s01 = mean_accuracy("single10", RunMode::kSingleClient, 0.1);
  const double s02 = mean_accuracy("single20", RunMode::kSingleClient, 0.2);
  const double s07 = mean_accuracy("single70", RunMode::kSingleClient, 0.7);
  const double sp = mean_accuracy("spatio", RunMode::kSpatioTemporal);
  const bool ok = sp >= 90.0 && sp - s01 >= 3.0 && s01 <= s02 && s02 <= s07 && s07 <= sp;
  return {ok, "mean accuracy single(0.1) " + fmt("%.2f", s01) + ", single(0.2) " + fmt("%.2f", s02) +
                  ", single(0.7) " + fmt("%.2f", s07) + ", spatio " + fmt("%.2f", sp)};
}

Outcome fedavg_vs_spatio() {
  const double fed = mean_accuracy("fedavg", RunMode::kFedAvgLite);
  const double sp = mean_accuracy("spatio", RunMode::kSpatioTemporal);
  return {fed <= sp, "mean accuracy fedavg-lite " + fmt("%.2f", fed) + ", spatio " + fmt("%.2f", sp)};
}

// ---- AC5 ------------------------------------------------------------------

Outcome regression_direction() {
  std::vector<double> single, spatio;
  bool identities = true;
  double worst_identity = 0;
  for (auto seed : kSeeds) {
    for (auto mode : {RunMode::kSingleClient, RunMode::kSpatioTemporal}) {
      const auto& f = run(with_mode(regression_config("reg", seed), mode)).final;
      const double gap = std::abs(f.at("rmsle") * f.at("rmsle") - f.at("msle"));
      worst_identity = std::max(worst_identity, gap);
      identities = identities && gap <= 1e-9 && f.at("smape") >= 0 && f.at("smape") <= 100;
      (mode == RunMode::kSingleClient ? single : spatio).push_back(f.at("msle"));
    }
  }
  const double s = mean(single), p = mean(spatio);
  return {identities && p < s, "mean MSLE single(0.1) " + fmt("%.5f", s) + ", spatio " + fmt("%.5f", p) +
                                   ", max |RMSLE^2 - MSLE| " + fmt("%.3g", worst_identity)};
}

// ---- AC7 ------------------------------------------------------------------

Outcome privacy_non_invertible() {
  // Model default privacy layer: 1x1 conv, one channel, leaky ReLU, 2x2 max pool.
  const SplitModel split = split_model(build_model(ModelKind::kCovidCnn, 1.0, 31));
  Xorshift64Star rng(12);
  Tensor base({64, 64, 1});
  for (auto& v : base.data()) v = static_cast<float>(rng.uniform());
  std::set<std::vector<float>> inputs;
  std::vector<FeatureRecord> records;
  for (int k = 0; k < 8; ++k) {
    // Each of the 8 arrangements is a symmetry of the 2x2 window applied to every window.
    Tensor x = base;
    for (std::size_t y = 0; y < 64; y += 2) {
      for (std::size_t c = 0; c < 64; c += 2) {
        float w[4] = {base.at(y, c, 0), base.at(y, c + 1, 0), base.at(y + 1, c + 1, 0), base.at(y + 1, c, 0)};
        std::rotate(w, w + (k % 4), w + 4);
        if (k >= 4) std::swap(w[1], w[3]);
        x.at(y, c, 0) = w[0];
        x.at(y, c + 1, 0) = w[1];
        x.at(y + 1, c + 1, 0) = w[2];
        x.at(y + 1, c, 0) = w[3];
      }
    }
    inputs.insert(x.values());
    records.push_back(privacy_forward(split.client_part, Sample{0, x, 1.f}, 0));
  }
  const bool same = std::all_of(records.begin(), records.end(), [&](const auto& r) {
    return wire::encode_record(r) == wire::encode_record(records.front());
  });
  const std::size_t features = records.front().feature.size();
  const bool ok = inputs.size() >= 8 && same && features * 4 == base.size();
  return {ok, std::to_string(inputs.size()) + " distinct inputs, identical records: " + (same ? "yes" : "no") +
                  ", feature elements " + std::to_string(features) + " of " + std::to_string(base.size())};
}

// ---- AC8 ------------------------------------------------------------------

FeatureRecord random_record(Xorshift64Star& rng) {
  FeatureRecord r;
  r.client_id = static_cast<std::uint32_t>(rng());
  r.sample_id = rng();
  r.label = static_cast<float>(rng.gaussian() * 100);
  r.noise_applied = rng.below(2) == 1;
  Shape dims(1 + rng.below(4));
  for (auto& d : dims) d = 1 + rng.below(6);
  std::vector<float> data(element_count(dims));
  for (auto& v : data) {
    float f;
    do {
      f = std::bit_cast<float>(static_cast<std::uint32_t>(rng()));
    } while (!std::isfinite(f));
    v = f;
  }
  r.feature = Tensor(dims, std::move(data));
  return r;
}

bool resume_scenario(bool tcp, std::string& note) {
  constexpr std::uint64_t kHash = 0xACCE55;
  constexpr std::size_t kRecords = 400;
  const std::size_t drops[] = {37, 101, 250};
  SplitServer server({.config_hash = kHash, .expected_clients = {0, 1, 2}});
  std::unique_ptr<TcpListener> listener;
  if (tcp) {
    listener = std::make_unique<TcpListener>("127.0.0.1", 0);
    server.serve(*listener);
  }
  std::vector<ClientSummary> summaries(3);
  {
    std::vector<std::jthread> clients;
    for (std::uint32_t id = 0; id < 3; ++id) {
      clients.emplace_back([&, id] {
        std::vector<FeatureRecord> records;
        for (std::size_t i = 0; i < kRecords; ++i) {
          records.push_back({id, i, Tensor({3, 3, 2}, static_cast<float>(id * 1000 + i)), 1.f, false});
        }
        int attempts = 0;
        Connector connect = [&]() -> ConnectionPtr {
          ConnectionPtr conn;
          if (tcp) {
            conn = tcp_connect("127.0.0.1", listener->port());
          } else {
            auto [client_end, server_end] = make_memory_pipe();
            server.serve(std::move(server_end));
            conn = std::move(client_end);
          }
          if (attempts++ == 0) return std::make_unique<FaultInjectingConnection>(std::move(conn), drops[id]);
          return conn;
        };
        summaries[id] = run_client({.client_id = id, .config_hash = kHash, .retry_backoff = Millis{1}},
                                   records, connect);
      });
    }
  }
  const AssembledDataset d = server.collect(Millis{10000});
  server.stop();
  bool ok = d.size() == 3 * kRecords;
  for (std::size_t i = 0; ok && i < d.size(); ++i) {
    const auto [c, s] = d.provenance[i];
    ok = c == i / kRecords && s == i % kRecords && d.features[i][0] == static_cast<float>(c * 1000 + s);
  }
  const auto stats = server.queue().stats();
  std::size_t reconnects = 0;
  for (const auto& s : summaries) reconnects += s.reconnects;
  ok = ok && stats.admitted == 3 * kRecords && reconnects == 3;
  note += std::string(tcp ? "tcp" : "in-process") + ": " + std::to_string(d.size()) + " records, " +
          std::to_string(reconnects) + " reconnects, " + std::to_string(stats.duplicates) + " resent duplicates dropped";
  return ok;
}

Outcome protocol_soundness() {
  Xorshift64Star rng(8080);
  int round_trips = 0, rejected = 0;
  for (int i = 0; i < 1000; ++i) {
    const FeatureRecord r = random_record(rng);
    const Bytes bytes = wire::encode_record(r);
    const auto back = wire::decode_record(bytes);
    if (back && wire::encode_record(*back) == bytes) ++round_trips;
  }
  for (int i = 0; i < 1000; ++i) {
    Bytes bytes = wire::encode_record(random_record(rng));
    bytes[rng.below(bytes.size())] ^= static_cast<std::uint8_t>(1 + rng.below(255));
    try {
      if (!wire::decode_record(bytes)) ++rejected;
    } catch (const ProtocolError&) {
      ++rejected;
    }
  }
  std::string note;
  const bool mem = resume_scenario(false, note);
  note += "; ";
  const bool tcp = resume_scenario(true, note);
  return {round_trips == 1000 && rejected == 1000 && mem && tcp,
          std::to_string(round_trips) + "/1000 round trips, " + std::to_string(rejected) +
              "/1000 corruptions rejected; " + note};
}

// ---- AC9 ------------------------------------------------------------------

Outcome determinism() {
  ExperimentConfig a = base_config("ac9_first", 3);
  ExperimentConfig b = a;
  b.output_dir = work_dir("ac9_second");
  ExperimentConfig t = a;
  t.output_dir = work_dir("ac9_tcp");
  t.transport = TransportKind::kTcp;
  const auto ra = run_experiment(a), rb = run_experiment(b), rt = run_experiment(t);
  const std::string ma = slurp(ra.output_dir / "metrics.json");
  const bool repeat = !ma.empty() && ma == slurp(rb.output_dir / "metrics.json");
  const bool metrics_tcp = ma == slurp(rt.output_dir / "metrics.json");
  const std::string wa = slurp(ra.output_dir / "weights.bin");
  const bool weights_tcp = !wa.empty() && wa == slurp(rt.output_dir / "weights.bin");
  return {repeat && metrics_tcp && weights_tcp,
          std::string("metrics.json repeat identical: ") + (repeat ? "yes" : "no") +
              ", in-process vs tcp metrics.json identical: " + (metrics_tcp ? "yes" : "no") +
              ", weights identical: " + (weights_tcp ? "yes" : "no")};
}

// ---- AC10 -----------------------------------------------------------------

Outcome split_sweep() {
  const ModelSpec full = build_model(ModelKind::kCovidCnn, 0.25, 17, {.privacy_channels = 3});
  Xorshift64Star rng(4);
  std::vector<Tensor> inputs;
  for (int i = 0; i < 4; ++i) {
    Tensor x(full.network.input_shape());
    for (auto& v : x.data()) v = static_cast<float>(rng.uniform());
    inputs.push_back(x);
  }
  bool identical = true;
  for (std::size_t s = 0; s <= full.block_count(); ++s) {
    ModelSpec spec = full;
    spec.split_index = s;
    const SplitModel split = split_model(spec);
    for (const auto& x : inputs) {
      const Tensor composed = model_forward(split.server_part, model_forward(split.client_part, x));
      identical = identical && composed == model_forward(full.network, x);
    }
  }
  std::string accs;
  bool completed = true;
  for (std::size_t s = 0; s <= 3; ++s) {
    ExperimentConfig c = base_config("ac10_split" + std::to_string(s), 1);
    c.split_index = s;
    try {
      const auto& f = run_experiment(c).report.final;
      accs += (s ? ", " : "") + std::to_string(s) + ": " + fmt("%.1f", f.at("accuracy"));
    } catch (const std::exception& e) {
      completed = false;
      accs += (s ? ", " : "") + std::to_string(s) + ": failed (" + e.what() + ")";
    }
  }
  return {identical && completed, std::string("composed forward identical across splits 0..") +
                                      std::to_string(full.block_count()) + ": " + (identical ? "yes" : "no") +
                                      "; accuracy by split " + accs};
}

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all = {
      {1, "engine oracle equivalence", 10, engine_oracles},
      {2, "gradient correctness", 60, gradients},
      {3, "split equals centralized", 120, split_equals_centralized},
      {4, "single-client vs spatio-temporal accuracy", 600, single_vs_spatio},
      {5, "regression MSLE direction and identities", 300, regression_direction},
      {6, "fedavg-lite vs spatio-temporal accuracy", 600, fedavg_vs_spatio},
      {7, "privacy layer non-invertibility", 5, privacy_non_invertible},
      {8, "protocol soundness", 30, protocol_soundness},
      {9, "determinism and transport equivalence", 300, determinism},
      {10, "split-depth sweep", 600, split_sweep},
  };
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else {
      std::fprintf(stderr, "usage: %s [--criterion N]\n", argv[0]);
      return 2;
    }
  }
  int failed = 0, ran = 0;
  for (const auto& c : criteria()) {
    if (only && c.id != only) continue;
    ++ran;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < c.time_limit_s;
    const bool pass = o.pass && in_time;
    failed += pass ? 0 : 1;
    std::printf("[%s] AC%d %s: %s (%.1f s, limit %.0f s%s)\n", pass ? "PASS" : "FAIL", c.id, c.title,
                o.detail.c_str(), secs, c.time_limit_s, in_time ? "" : ", over limit");
    std::fflush(stdout);
  }
  if (ran == 0) {
    std::fprintf(stderr, "no criterion %d\n", only);
    return 2;
  }
  return failed ? 1 : 0;
}
