#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "splitstream/dataset.hpp"
#include "splitstream/metrics.hpp"
#include "splitstream/models.hpp"
#include "splitstream/trainer.hpp"

namespace splitstream {

enum class RunMode { kSpatioTemporal, kSingleClient, kFedAvgLite };
enum class TransportKind { kInProcess, kTcp };
enum class DataSource { kSyntheticClassification, kSyntheticRegression, kImageDir, kCsv };

std::string_view to_string(RunMode mode) noexcept;
std::string_view to_string(TransportKind kind) noexcept;
std::string_view to_string(DataSource source) noexcept;

struct ExperimentConfig {
  std::string name = "run";
  std::uint64_t seed = 1;

  ModelKind model = ModelKind::kCovidCnn;
  double scale = 0.25;
  std::size_t split_index = 1;
  ActivationKind hidden_activation = ActivationKind::kLeakyRelu;
  PoolMode pool_mode = PoolMode::kMax;
  std::size_t privacy_channels = 3;
  // Give every client its own privacy-layer weights instead of the shared set.
  bool per_client_privacy_seed = false;

  // 0 means the model's default.
  std::size_t epochs = 0;
  std::size_t batch_size = 0;
  double learning_rate = 0.0;

  DataSource source = DataSource::kSyntheticClassification;
  std::size_t synthetic_n = 0;  // 0: the generator's default size
  double synthetic_noise = 0.3;  // pixel noise of the synthetic images
  std::filesystem::path data_path;

  std::vector<double> client_ratios = {0.7, 0.2, 0.1};
  double val_fraction = 0.1;
  double test_fraction = 0.1;

  RunMode mode = RunMode::kSpatioTemporal;
  double single_fraction = 0.1;
  std::size_t fedavg_rounds = 0;  // 0: epochs / local_epochs
  std::size_t local_epochs = 1;

  TransportKind transport = TransportKind::kInProcess;
  double noise_sigma = 0.0;
  std::size_t queue_capacity = kDefaultQueueCapacity;
  std::size_t ack_interval = wire::kDefaultAckInterval;
  std::size_t idle_timeout_ms = 30000;
  std::size_t feature_images = 4;  // feature PGMs exported per run

  std::filesystem::path output_dir = "out";
};

// Every key is optional; unknown keys are rejected.
ExperimentConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::filesystem::path& path);
// Range checks: fractions, ratios summing to 1, mode parameters.
void validate(const ExperimentConfig& config);

// SPLITSTREAM_OUT/<name> when the variable is set, else config.output_dir.
std::filesystem::path resolve_output_dir(const ExperimentConfig& config);

ModelSpec build_experiment_model(const ExperimentConfig& config);
TaskKind task_of(const ExperimentConfig& config);
// Configured epochs, batch size and learning rate, falling back to the model defaults.
TrainOptions training_options(const ExperimentConfig& config, const ModelSpec& spec);

struct DataPartition {
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
  std::vector<std::vector<std::size_t>> client_shards;
  // Training pool in shuffled order; shards are consecutive runs of it.
  std::vector<std::size_t> pool;
};

// Seeded shuffle; floor(N * val) validation, floor(N * test) test, the rest
// split by ratio with floor sizes raised to at least 1 and the remainder given
// to the largest shard.
DataPartition split_dataset(std::size_t n, const std::vector<double>& ratios, double val_fraction,
                            double test_fraction, std::uint64_t seed);

// Loads or generates the configured data set, resized to the model input.
std::vector<Sample> load_experiment_data(const ExperimentConfig& config, const Shape& input_shape);

struct ExperimentResult {
  MetricsReport report;
  ModelSpec trained;  // full model with trained server layers
  std::vector<std::size_t> client_sizes;
  std::filesystem::path output_dir;
};

// Runs the configured mode end to end and writes every output file.
ExperimentResult run_experiment(const ExperimentConfig& config);

// Frozen-first-block reference: the whole model trained in one process on
// the client shards in canonical order, client layers excluded from updates.
std::vector<EpochMetrics> run_centralized_reference(const ExperimentConfig& config);

// Shard-size weighted parameter average of identically shaped networks.
Network average_parameters(const std::vector<Network>& nets, const std::vector<double>& weights);

// comparison.csv (final metrics, differences against the first report) and
// curves.csv (per-epoch loss / accuracy, one column per run) in out_dir.
void compare_reports(const std::vector<std::filesystem::path>& reports,
                     const std::filesystem::path& out_dir);

}  // namespace splitstream
