#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "splitstream/network.hpp"

namespace splitstream {

enum class ModelKind { kCovidCnn, kVgg19Lite, kCholesterolMlp };

std::string_view to_string(ModelKind kind) noexcept;
ModelKind parse_model_kind(std::string_view name);

struct ModelOptions {
  // Hidden-block activation for the image models; the regression model always
  // uses leaky relu in its hidden blocks.
  ActivationKind hidden_activation = ActivationKind::kLeakyRelu;
  PoolMode pool_mode = PoolMode::kMax;
  // Output channels of the client-side (first) conv block.
  std::size_t privacy_channels = 1;
  std::size_t split_index = 1;
};

struct ModelSpec {
  std::string name;
  ModelKind kind = ModelKind::kCovidCnn;
  double scale = 1.0;
  std::uint64_t seed = 0;
  LossKind loss = LossKind::kBinaryCrossentropy;
  // Full layer sequence with seed-derived initial weights.
  Network network;
  // block_ends[b] is one past the last layer of hidden block b. Layers after
  // block_ends.back() form the output head.
  std::vector<std::size_t> block_ends;
  std::size_t split_index = 1;
  std::size_t default_epochs = 0;
  std::size_t default_batch = 0;
  double default_learning_rate = 0.0;

  std::size_t block_count() const noexcept { return block_ends.size(); }
  // Number of leading layers that belong to the client for a split index.
  std::size_t client_layer_count(std::size_t split) const;
};

struct SplitModel {
  Network client_part;
  Network server_part;
  std::uint64_t config_hash = 0;
};

// scale must be one of 1, 1/2, 1/4, 1/8.
ModelSpec build_model(ModelKind kind, double scale, std::uint64_t seed,
                      const ModelOptions& options = {});

// Throws ConfigError when spec.split_index exceeds the block count.
SplitModel split_model(const ModelSpec& spec);

// Glorot-uniform weights, zero biases, drawn in layer order from one stream.
void initialize_parameters(Network& net, std::uint64_t seed, std::size_t first = 0,
                           std::size_t last = static_cast<std::size_t>(-1));

// Architecture description (no weights) with sorted keys.
nlohmann::json canonical_spec(const ModelSpec& spec);
ModelSpec spec_from_canonical(const nlohmann::json& doc);
std::uint64_t fnv1a64(std::string_view bytes) noexcept;
// FNV-1a over the compact dump of canonical_spec.
std::uint64_t config_hash(const ModelSpec& spec);

// Layer descriptors <-> json; parameters are zero-filled on the way in.
nlohmann::json layers_to_json(const Network& net);
Network network_from_json(const Shape& input_shape, const nlohmann::json& layers);

// Header line (canonical spec + parameter manifest) followed by every
// parameter tensor as little-endian float32, weights before bias, layer order.
void save_weights(const std::filesystem::path& path, const ModelSpec& spec);
ModelSpec load_weights(const std::filesystem::path& path);

}  // namespace splitstream
