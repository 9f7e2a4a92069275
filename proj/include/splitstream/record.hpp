#pragma once

#include <cstdint>

#include "splitstream/tensor.hpp"

namespace splitstream {

// One sample after the client-side layers: the only thing a client sends.
struct FeatureRecord {
  std::uint32_t client_id = 0;
  std::uint64_t sample_id = 0;
  Tensor feature;
  float label = 0.f;
  bool noise_applied = false;

  bool operator==(const FeatureRecord&) const = default;
};

}  // namespace splitstream
