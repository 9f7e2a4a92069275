#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "splitstream/dataset.hpp"

namespace splitstream {

inline constexpr std::size_t kSyntheticImageSide = 16;
inline constexpr std::size_t kSyntheticClassificationSize = 600;
inline constexpr std::size_t kSyntheticRegressionSize = 2000;

struct SyntheticImageOptions {
  std::size_t side = kSyntheticImageSide;
  // Standard deviation of the additive pixel noise (image range is [0, 1]
  // before noise).
  double noise = 0.3;
  // Peak brightness of the blob / stripes above the background.
  double contrast = 0.5;
};

// Class 0: Gaussian blob near the center. Class 1: vertical stripes with a
// random phase. Both get additive Gaussian noise and 8-bit quantization.
// Classes alternate so any prefix is balanced.
std::vector<Sample> synthetic_images(std::size_t n, std::uint64_t seed,
                                     const SyntheticImageOptions& options = {});

// Seven cholesterol-panel predictors (raw units, Sex as 0/1) and an LDL-C
// label built from them; see README for the generating formula.
std::vector<Sample> synthetic_cholesterol(std::size_t n, std::uint64_t seed);

// <dir>/neg/NNNNN.pgm and <dir>/pos/NNNNN.pgm for image samples.
void write_image_dataset(const std::filesystem::path& dir, const std::vector<Sample>& samples);
// CSV with the Age,Sex,... header.
void write_tabular_csv(const std::filesystem::path& path, const std::vector<Sample>& samples);

}  // namespace splitstream
