#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "splitstream/record.hpp"

namespace splitstream {

enum class TaskKind { kClassification, kRegression };

std::string_view to_string(TaskKind task) noexcept;
TaskKind parse_task(std::string_view name);

// Percent of samples with (yhat >= threshold) == y.
double classification_accuracy(std::span<const float> yhat, std::span<const float> y,
                               double threshold = 0.5);

struct RegressionMetrics {
  double msle = 0;
  double rmsle = 0;  // sqrt(msle), from the same accumulator
  double smape = 0;  // percent; pairs with y = yhat = 0 contribute 0
};

RegressionMetrics regression_metrics(std::span<const float> y, std::span<const float> yhat);

struct Distribution {
  // Distinct sorted values with fraction k/N of samples <= value.
  std::vector<std::pair<double, double>> cdf;
  // (bin center, density); sum of density * bin_width is 1.
  std::vector<std::pair<double, double>> pdf;
  double bin_width = 0;
};

inline constexpr std::size_t kDefaultBins = 50;

Distribution distribution_export(std::span<const double> losses, std::size_t bins = kDefaultBins);

// Min-max scales one channel of an H x W x C feature to 0..255.
std::vector<std::uint8_t> feature_image_pixels(const Tensor& feature, std::size_t channel);
void export_feature_image(const FeatureRecord& record, std::size_t channel,
                          const std::filesystem::path& path);

struct EpochMetrics {
  std::size_t epoch = 0;
  double loss = 0;
  std::optional<double> accuracy;
  std::optional<double> val_loss;
  std::optional<double> val_accuracy;

  bool operator==(const EpochMetrics&) const = default;
};

struct MetricsReport {
  TaskKind task = TaskKind::kClassification;
  std::string label;  // run name used by compare
  std::vector<EpochMetrics> per_epoch;
  std::map<std::string, double> final;  // accuracy | msle, rmsle, smape
  std::vector<double> per_sample_losses;
  Distribution distribution;
  nlohmann::json info = nlohmann::json::object();  // run description (mode, sizes, config)
};

nlohmann::json report_to_json(const MetricsReport& report);
MetricsReport report_from_json(const nlohmann::json& doc);

// metrics.json, per_sample_losses.csv, cdf.csv, pdf.csv under dir.
void write_report(const MetricsReport& report, const std::filesystem::path& dir);
MetricsReport read_report(const std::filesystem::path& metrics_json);

// Shortest round-trip decimal form, used by every CSV writer.
std::string format_number(double v);

}  // namespace splitstream
