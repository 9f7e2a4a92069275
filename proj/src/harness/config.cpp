#include "splitstream/harness.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>

#include "splitstream/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace splitstream {

namespace {

void reject_unknown(const json& section, const std::string& where,
                    const std::set<std::string>& known) {
  if (!section.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : section.items()) {
    if (!known.contains(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read(const json& section, const char* key, T& into) {
  if (!section.contains(key)) return;
  try {
    into = section.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

const json& section(const json& doc, const char* key) {
  static const json empty = json::object();
  return doc.contains(key) ? doc.at(key) : empty;
}

RunMode parse_mode(const std::string& s) {
  if (s == "spatio_temporal") return RunMode::kSpatioTemporal;
  if (s == "single_client") return RunMode::kSingleClient;
  if (s == "fedavg_lite") return RunMode::kFedAvgLite;
  throw ConfigError("unknown mode '" + s + "'");
}

TransportKind parse_transport(const std::string& s) {
  if (s == "in_process") return TransportKind::kInProcess;
  if (s == "tcp") return TransportKind::kTcp;
  throw ConfigError("unknown transport '" + s + "'");
}

DataSource parse_source(const std::string& s) {
  if (s == "synthetic_cls") return DataSource::kSyntheticClassification;
  if (s == "synthetic_reg") return DataSource::kSyntheticRegression;
  if (s == "image_dir") return DataSource::kImageDir;
  if (s == "csv") return DataSource::kCsv;
  throw ConfigError("unknown data source '" + s + "'");
}

}  // namespace

std::string_view to_string(RunMode mode) noexcept {
  switch (mode) {
    case RunMode::kSpatioTemporal: return "spatio_temporal";
    case RunMode::kSingleClient: return "single_client";
    case RunMode::kFedAvgLite: return "fedavg_lite";
  }
  return "unknown";
}

std::string_view to_string(TransportKind kind) noexcept {
  return kind == TransportKind::kTcp ? "tcp" : "in_process";
}

std::string_view to_string(DataSource source) noexcept {
  switch (source) {
    case DataSource::kSyntheticClassification: return "synthetic_cls";
    case DataSource::kSyntheticRegression: return "synthetic_reg";
    case DataSource::kImageDir: return "image_dir";
    case DataSource::kCsv: return "csv";
  }
  return "unknown";
}

ExperimentConfig config_from_json(const json& doc) {
  reject_unknown(doc, "config",
                 {"name", "seed", "output_dir", "model", "training", "data", "mode", "transport",
                  "noise_sigma", "feature_images"});
  ExperimentConfig c;
  read(doc, "name", c.name);
  read(doc, "seed", c.seed);
  std::string out = c.output_dir.string();
  read(doc, "output_dir", out);
  c.output_dir = out;
  read(doc, "noise_sigma", c.noise_sigma);
  read(doc, "feature_images", c.feature_images);

  const json& m = section(doc, "model");
  reject_unknown(m, "model",
                 {"kind", "scale", "split_index", "hidden_activation", "pool_mode",
                  "privacy_channels", "per_client_privacy_seed"});
  std::string s;
  if (read(m, "kind", s), !s.empty()) c.model = parse_model_kind(s);
  read(m, "scale", c.scale);
  read(m, "split_index", c.split_index);
  s.clear();
  if (read(m, "hidden_activation", s), !s.empty()) c.hidden_activation = parse_activation(s);
  s.clear();
  if (read(m, "pool_mode", s), !s.empty()) c.pool_mode = parse_pool_mode(s);
  read(m, "privacy_channels", c.privacy_channels);
  read(m, "per_client_privacy_seed", c.per_client_privacy_seed);

  const json& t = section(doc, "training");
  reject_unknown(t, "training", {"epochs", "batch_size", "learning_rate"});
  read(t, "epochs", c.epochs);
  read(t, "batch_size", c.batch_size);
  read(t, "learning_rate", c.learning_rate);

  const json& d = section(doc, "data");
  reject_unknown(d, "data", {"source", "n", "noise", "path", "client_ratios", "val_fraction", "test_fraction"});
  s.clear();
  if (read(d, "source", s), !s.empty()) c.source = parse_source(s);
  read(d, "n", c.synthetic_n);
  read(d, "noise", c.synthetic_noise);
  std::string path;
  read(d, "path", path);
  c.data_path = path;
  read(d, "client_ratios", c.client_ratios);
  read(d, "val_fraction", c.val_fraction);
  read(d, "test_fraction", c.test_fraction);

  const json& md = section(doc, "mode");
  reject_unknown(md, "mode", {"kind", "fraction", "rounds", "local_epochs"});
  s.clear();
  if (read(md, "kind", s), !s.empty()) c.mode = parse_mode(s);
  read(md, "fraction", c.single_fraction);
  read(md, "rounds", c.fedavg_rounds);
  read(md, "local_epochs", c.local_epochs);

  const json& tr = section(doc, "transport");
  reject_unknown(tr, "transport", {"kind", "queue_capacity", "ack_interval", "idle_timeout_ms"});
  s.clear();
  if (read(tr, "kind", s), !s.empty()) c.transport = parse_transport(s);
  read(tr, "queue_capacity", c.queue_capacity);
  read(tr, "ack_interval", c.ack_interval);
  read(tr, "idle_timeout_ms", c.idle_timeout_ms);

  validate(c);
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  return {{"name", c.name},
          {"seed", c.seed},
          {"output_dir", c.output_dir.string()},
          {"noise_sigma", c.noise_sigma},
          {"feature_images", c.feature_images},
          {"model",
           {{"kind", to_string(c.model)},
            {"scale", c.scale},
            {"split_index", c.split_index},
            {"hidden_activation", to_string(c.hidden_activation)},
            {"pool_mode", to_string(c.pool_mode)},
            {"privacy_channels", c.privacy_channels},
            {"per_client_privacy_seed", c.per_client_privacy_seed}}},
          {"training",
           {{"epochs", c.epochs}, {"batch_size", c.batch_size}, {"learning_rate", c.learning_rate}}},
          {"data",
           {{"source", to_string(c.source)},
            {"n", c.synthetic_n},
            {"noise", c.synthetic_noise},
            {"path", c.data_path.string()},
            {"client_ratios", c.client_ratios},
            {"val_fraction", c.val_fraction},
            {"test_fraction", c.test_fraction}}},
          {"mode",
           {{"kind", to_string(c.mode)},
            {"fraction", c.single_fraction},
            {"rounds", c.fedavg_rounds},
            {"local_epochs", c.local_epochs}}},
          {"transport",
           {{"kind", to_string(c.transport)},
            {"queue_capacity", c.queue_capacity},
            {"ack_interval", c.ack_interval},
            {"idle_timeout_ms", c.idle_timeout_ms}}}};
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return config_from_json(doc);
}

void validate(const ExperimentConfig& c) {
  auto in_unit = [](double f) { return f > 0 && f < 1; };
  if (!in_unit(c.val_fraction) || !in_unit(c.test_fraction)) {
    throw ConfigError("val_fraction and test_fraction must be in (0, 1)");
  }
  if (c.val_fraction + c.test_fraction >= 1) throw ConfigError("val + test fractions must be < 1");
  if (c.client_ratios.empty()) throw ConfigError("client_ratios is empty");
  double sum = 0;
  for (double r : c.client_ratios) {
    if (!(r > 0)) throw ConfigError("client ratios must be positive");
    sum += r;
  }
  if (std::abs(sum - 1) > 1e-9) throw ConfigError("client ratios must sum to 1");
  if (!(c.learning_rate >= 0)) throw ConfigError("learning_rate must be >= 0");
  if (c.noise_sigma < 0) throw ConfigError("noise_sigma must be >= 0");
  if (c.synthetic_noise < 0) throw ConfigError("data.noise must be >= 0");
  if (c.mode == RunMode::kSingleClient && !(c.single_fraction > 0 && c.single_fraction <= 1)) {
    throw ConfigError("single_client fraction must be in (0, 1]");
  }
  if (c.local_epochs == 0) throw ConfigError("local_epochs must be positive");
  if (c.ack_interval == 0 || c.queue_capacity == 0) {
    throw ConfigError("ack_interval and queue_capacity must be positive");
  }
  if ((c.source == DataSource::kImageDir || c.source == DataSource::kCsv) && c.data_path.empty()) {
    throw ConfigError("data.path is required for " + std::string(to_string(c.source)));
  }
  const bool tabular = c.source == DataSource::kCsv || c.source == DataSource::kSyntheticRegression;
  if (tabular != (c.model == ModelKind::kCholesterolMlp)) {
    throw ConfigError("data source " + std::string(to_string(c.source)) + " does not fit model " +
                      std::string(to_string(c.model)));
  }
}

fs::path resolve_output_dir(const ExperimentConfig& c) {
  if (const char* root = std::getenv("SPLITSTREAM_OUT"); root && *root) return fs::path(root) / c.name;
  return c.output_dir;
}

}  // namespace splitstream
