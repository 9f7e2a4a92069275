#pragma once

#include <functional>
#include <span>
#include <vector>

#include "splitstream/dataset.hpp"
#include "splitstream/metrics.hpp"
#include "splitstream/network.hpp"
#include "splitstream/rng.hpp"
#include "splitstream/server.hpp"

namespace splitstream {

struct TrainOptions {
  std::size_t epochs = 1;
  std::size_t batch_size = 32;
  double learning_rate = 0.01;
  std::uint64_t seed = 0;
  LossKind loss = LossKind::kBinaryCrossentropy;
  TaskKind task = TaskKind::kClassification;
};

// Called after each epoch with the updated network; may fill the validation
// fields of the epoch entry.
using EpochHook = std::function<void(const Network&, EpochMetrics&)>;

struct TrainState {
  TrainState(Network net, TrainOptions opts);

  Network network;
  TrainOptions options;
  Xorshift64Star shuffle_rng;
  std::size_t epoch = 0;
  std::vector<EpochMetrics> log;
};

// Mini-batch SGD over `data` in a fresh seeded order each epoch, keeping the
// partial last batch. Layers before first_trainable are run but not updated.
// Epoch loss and accuracy are averaged over the predictions made during the
// epoch. `provenance`, when given, names samples in loss-domain errors.
void train(TrainState& state, std::span<const Example> data, std::size_t first_trainable = 0,
           const EpochHook& hook = {},
           std::span<const std::pair<std::uint32_t, std::uint64_t>> provenance = {});

std::vector<Example> to_examples(const AssembledDataset& data);
std::vector<Example> to_examples(std::span<const Sample> samples);

// Server side of the split: trains every layer of state.network on the
// assembled features.
void train_server_model(TrainState& state, const AssembledDataset& data,
                        const EpochHook& hook = {});

struct Evaluation {
  std::vector<float> predictions;
  std::vector<float> labels;
  std::vector<double> per_sample_losses;
  std::map<std::string, double> summary;
};

// Runs server_part(client_part(x)) on every sample.
Evaluation evaluate(const Network& client_part, const Network& server_part,
                    std::span<const Sample> samples, LossKind loss, TaskKind task);

}  // namespace splitstream
