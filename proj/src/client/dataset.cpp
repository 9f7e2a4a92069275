#include "splitstream/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

#include "splitstream/errors.hpp"
#include "splitstream/image.hpp"

namespace fs = std::filesystem;

namespace splitstream {

namespace {

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".pgm" || ext == ".png";
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_decimal(const std::string& field, std::size_t line_no) {
  double v = 0;
  const char* first = field.data();
  const char* last = first + field.size();
  while (first < last && *first == ' ') ++first;
  while (last > first && (last[-1] == ' ' || last[-1] == '\r')) --last;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
    throw DataError("line " + std::to_string(line_no) + ": not a decimal: '" + field + "'");
  }
  return v;
}

}  // namespace

std::vector<Sample> load_image_dataset(const fs::path& root, const Shape& target,
                                       const LabelRule& rule) {
  if (target.size() != 3 || target[2] != 1) {
    throw ConfigError("image target must be H x W x 1, got " + to_string(target));
  }
  if (!fs::is_directory(root)) throw ConfigError("not a directory: " + root.string());

  std::vector<fs::path> classes;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (!entry.is_directory()) continue;
    const std::string name = entry.path().filename().string();
    if (!rule.contains(name)) throw ConfigError("no label for class directory " + name);
    classes.push_back(entry.path());
  }
  for (const auto& [name, label] : rule) {
    if (!fs::is_directory(root / name)) throw ConfigError("missing class directory " + name);
  }
  std::sort(classes.begin(), classes.end());

  std::vector<Sample> out;
  for (const auto& dir : classes) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(entry.path());
    }
    if (files.empty()) throw ConfigError("empty class directory " + dir.string());
    std::sort(files.begin(), files.end());
    const float label = rule.at(dir.filename().string());
    for (const auto& f : files) {
      Sample s;
      s.sample_id = out.size();
      s.features = resize_image(read_image(f), target[0], target[1]);
      s.label = label;
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::vector<Sample> load_tabular_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTabularHeader) {
    throw ConfigError(path.string() + ": header must be " + std::string(kTabularHeader) +
                      ", got " + line);
  }
  std::vector<Sample> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != kTabularFeatures + 1) {
      throw DataError("line " + std::to_string(line_no) + ": expected 8 fields, got " +
                      std::to_string(fields.size()));
    }
    std::vector<float> x(kTabularFeatures);
    for (std::size_t i = 0; i < kTabularFeatures; ++i) {
      if (i == 1) {
        if (fields[i] == "Male") {
          x[i] = 1.f;
        } else if (fields[i] == "Female") {
          x[i] = 0.f;
        } else {
          throw DataError("line " + std::to_string(line_no) + ": Sex must be Male or Female");
        }
        continue;
      }
      x[i] = static_cast<float>(parse_decimal(fields[i], line_no));
    }
    Sample s;
    s.sample_id = out.size();
    s.features = Tensor({kTabularFeatures}, std::move(x));
    s.label = static_cast<float>(parse_decimal(fields[kTabularFeatures], line_no));
    out.push_back(std::move(s));
  }
  return out;
}

ZScore fit_zscore(std::span<const Sample> samples) {
  if (samples.empty()) throw DataError("cannot fit normalization on zero samples");
  ZScore z;
  for (const auto& s : samples) {
    if (s.features.size() != kTabularFeatures) throw ConfigError("z-score expects 7 features");
    for (std::size_t i = 0; i < kTabularFeatures; ++i) z.mean[i] += s.features[i];
  }
  for (auto& m : z.mean) m /= static_cast<double>(samples.size());
  for (const auto& s : samples) {
    for (std::size_t i = 0; i < kTabularFeatures; ++i) {
      const double d = s.features[i] - z.mean[i];
      z.stddev[i] += d * d;
    }
  }
  for (auto& v : z.stddev) v = std::max(std::sqrt(v / static_cast<double>(samples.size())), kStdFloor);
  return z;
}

void apply_zscore(const ZScore& stats, std::span<Sample> samples) {
  for (auto& s : samples) {
    if (s.features.size() != kTabularFeatures) throw ConfigError("z-score expects 7 features");
    for (std::size_t i = 0; i < kTabularFeatures; ++i) {
      s.features[i] = static_cast<float>((s.features[i] - stats.mean[i]) / stats.stddev[i]);
    }
  }
}

}  // namespace splitstream
