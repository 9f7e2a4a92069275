#include "splitstream/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

#include "splitstream/errors.hpp"
#include "splitstream/image.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace splitstream {

namespace {

void check_pair(std::size_t a, std::size_t b) {
  if (a != b) throw DataError("length mismatch: " + std::to_string(a) + " vs " + std::to_string(b));
  if (a == 0) throw DataError("metrics need at least one sample");
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> number_or_null(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace

std::string_view to_string(TaskKind task) noexcept {
  return task == TaskKind::kClassification ? "classification" : "regression";
}

TaskKind parse_task(std::string_view name) {
  if (name == "classification") return TaskKind::kClassification;
  if (name == "regression") return TaskKind::kRegression;
  throw ConfigError("unknown task type " + std::string(name));
}

std::string format_number(double v) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

double classification_accuracy(std::span<const float> yhat, std::span<const float> y,
                               double threshold) {
  check_pair(yhat.size(), y.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const float predicted = yhat[i] >= threshold ? 1.f : 0.f;
    hits += predicted == y[i];
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(y.size());
}

RegressionMetrics regression_metrics(std::span<const float> y, std::span<const float> yhat) {
  check_pair(y.size(), yhat.size());
  double sq_log = 0, pct = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double a = y[i], b = yhat[i];
    if (!(a > -1) || !(b > -1)) {
      throw DataError("regression metrics need y, yhat > -1; violated at index " + std::to_string(i));
    }
    const double d = std::log1p(a) - std::log1p(b);
    sq_log += d * d;
    const double denom = std::abs(a) + std::abs(b);
    if (denom > 0) pct += std::abs(a - b) / denom;
  }
  const auto n = static_cast<double>(y.size());
  RegressionMetrics m;
  m.msle = sq_log / n;
  m.rmsle = std::sqrt(m.msle);
  m.smape = 100.0 * pct / n;
  return m;
}

Distribution distribution_export(std::span<const double> losses, std::size_t bins) {
  if (losses.empty()) throw DataError("distribution of zero losses");
  if (bins == 0) throw ConfigError("bin count must be positive");
  for (std::size_t i = 0; i < losses.size(); ++i) {
    if (!std::isfinite(losses[i])) throw DataError("non-finite loss at index " + std::to_string(i));
  }
  std::vector<double> sorted(losses.begin(), losses.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());

  Distribution d;
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    if (k + 1 < sorted.size() && sorted[k + 1] == sorted[k]) continue;
    d.cdf.emplace_back(sorted[k], static_cast<double>(k + 1) / n);
  }

  const double lo = sorted.front(), hi = sorted.back();
  if (lo == hi) {
    d.bin_width = 1.0;
    d.pdf.emplace_back(lo, 1.0);
    return d;
  }
  d.bin_width = (hi - lo) / static_cast<double>(bins);
  std::vector<std::size_t> counts(bins, 0);
  for (const double v : sorted) {
    auto b = static_cast<std::size_t>((v - lo) / d.bin_width);
    counts[std::min(b, bins - 1)]++;
  }
  for (std::size_t b = 0; b < bins; ++b) {
    const double center = lo + (static_cast<double>(b) + 0.5) * d.bin_width;
    d.pdf.emplace_back(center, static_cast<double>(counts[b]) / (n * d.bin_width));
  }
  return d;
}

std::vector<std::uint8_t> feature_image_pixels(const Tensor& feature, std::size_t channel) {
  if (feature.rank() != 3) {
    throw ConfigError("feature image needs an H x W x C feature, got " + to_string(feature.dims()));
  }
  const std::size_t h = feature.dims()[0], w = feature.dims()[1], c = feature.dims()[2];
  if (channel >= c) {
    throw ConfigError("channel " + std::to_string(channel) + " out of range for " +
                      std::to_string(c) + " channels");
  }
  double lo = feature.at(0, 0, channel), hi = lo;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      lo = std::min<double>(lo, feature.at(y, x, channel));
      hi = std::max<double>(hi, feature.at(y, x, channel));
    }
  }
  std::vector<std::uint8_t> px(h * w, 0);
  if (hi == lo) return px;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double v = (feature.at(y, x, channel) - lo) / (hi - lo) * 255.0;
      px[y * w + x] = static_cast<std::uint8_t>(std::lround(v));
    }
  }
  return px;
}

void export_feature_image(const FeatureRecord& record, std::size_t channel, const fs::path& path) {
  const auto px = feature_image_pixels(record.feature, channel);
  write_pgm(path, record.feature.dims()[0], record.feature.dims()[1], px);
}

json report_to_json(const MetricsReport& r) {
  json epochs = json::array();
  for (const auto& e : r.per_epoch) {
    epochs.push_back({{"epoch", e.epoch},
                      {"loss", e.loss},
                      {"accuracy", optional_number(e.accuracy)},
                      {"val_loss", optional_number(e.val_loss)},
                      {"val_accuracy", optional_number(e.val_accuracy)}});
  }
  return {{"task", to_string(r.task)},
          {"label", r.label},
          {"per_epoch", epochs},
          {"final", r.final},
          {"per_sample_count", r.per_sample_losses.size()},
          {"info", r.info}};
}

MetricsReport report_from_json(const json& doc) {
  MetricsReport r;
  r.task = parse_task(doc.at("task").get<std::string>());
  r.label = doc.value("label", "");
  for (const auto& e : doc.at("per_epoch")) {
    r.per_epoch.push_back({e.at("epoch").get<std::size_t>(), e.at("loss").get<double>(),
                           number_or_null(e, "accuracy"), number_or_null(e, "val_loss"),
                           number_or_null(e, "val_accuracy")});
  }
  r.final = doc.at("final").get<std::map<std::string, double>>();
  if (doc.contains("info")) r.info = doc.at("info");
  return r;
}

void write_report(const MetricsReport& r, const fs::path& dir) {
  fs::create_directories(dir);
  open_out(dir / "metrics.json") << report_to_json(r).dump(2) << '\n';
  {
    auto out = open_out(dir / "per_sample_losses.csv");
    out << "index,loss\n";
    for (std::size_t i = 0; i < r.per_sample_losses.size(); ++i) {
      out << i << ',' << format_number(r.per_sample_losses[i]) << '\n';
    }
  }
  {
    auto out = open_out(dir / "cdf.csv");
    out << "loss,fraction\n";
    for (const auto& [v, f] : r.distribution.cdf) out << format_number(v) << ',' << format_number(f) << '\n';
  }
  {
    auto out = open_out(dir / "pdf.csv");
    out << "bin_center,density\n";
    for (const auto& [c, d] : r.distribution.pdf) out << format_number(c) << ',' << format_number(d) << '\n';
  }
}

MetricsReport read_report(const fs::path& metrics_json) {
  std::ifstream in(metrics_json);
  if (!in) throw ConfigError("cannot open report " + metrics_json.string());
  return report_from_json(json::parse(in));
}

}  // namespace splitstream
