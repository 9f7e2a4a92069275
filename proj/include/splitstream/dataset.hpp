#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "splitstream/tensor.hpp"

namespace splitstream {

struct Sample {
  std::uint64_t sample_id = 0;
  Tensor features;
  float label = 0.f;

  bool operator==(const Sample&) const = default;
};

// Class directory name -> label.
using LabelRule = std::map<std::string, float>;

inline LabelRule default_label_rule() { return {{"neg", 0.f}, {"pos", 1.f}}; }

// Reads <root>/<class>/<image> for every class named in `rule`, resizing to
// target {H, W, 1}. Samples are ordered by (class directory, file name) and
// numbered from 0 in that order.
std::vector<Sample> load_image_dataset(const std::filesystem::path& root, const Shape& target,
                                       const LabelRule& rule = default_label_rule());

inline constexpr std::size_t kTabularFeatures = 7;
inline constexpr const char* kTabularHeader = "Age,Sex,Height,Weight,TC,HDL-C,TG,LDL-C";

// Predictors (Age, Sex, Height, Weight, TC, HDL-C, TG) as a raw 7-vector with
// Male -> 1, Female -> 0; label is LDL-C. Normalization is left to the caller.
std::vector<Sample> load_tabular_csv(const std::filesystem::path& path);

struct ZScore {
  std::array<double, kTabularFeatures> mean{};
  std::array<double, kTabularFeatures> stddev{};
};

inline constexpr double kStdFloor = 1e-8;

// Population statistics over `samples`; stddev is floored at kStdFloor.
ZScore fit_zscore(std::span<const Sample> samples);
void apply_zscore(const ZScore& stats, std::span<Sample> samples);

}  // namespace splitstream
