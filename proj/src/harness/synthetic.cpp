#include "splitstream/synthetic.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "splitstream/errors.hpp"
#include "splitstream/image.hpp"
#include "splitstream/rng.hpp"

namespace fs = std::filesystem;

namespace splitstream {

namespace {

constexpr std::uint64_t kImageStream = 0x494D47;    // "IMG"
constexpr std::uint64_t kTabularStream = 0x544142;  // "TAB"

float quantize(double v) {
  return static_cast<float>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0);
}

// Shortest decimal that reads back as the same float.
std::string float_text(float v) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

std::string numbered(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%05zu", i);
  return buf;
}

}  // namespace

std::vector<Sample> synthetic_images(std::size_t n, std::uint64_t seed,
                                     const SyntheticImageOptions& opt) {
  Xorshift64Star rng(derive_seed(seed, kImageStream));
  const std::size_t s = opt.side;
  const double mid = (static_cast<double>(s) - 1) / 2;
  std::vector<Sample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool stripes = i % 2 == 1;
    Tensor img({s, s, 1});
    // Shared nuisance parameters so neither class is separable by brightness.
    const double background = rng.uniform(0.2, 0.4);
    const double cy = mid + rng.uniform(-2, 2), cx = mid + rng.uniform(-2, 2);
    const double radius = rng.uniform(2.0, 3.5);
    const double period = rng.uniform(3.0, 5.0);
    const double phase = rng.uniform(0, 2 * std::numbers::pi);
    for (std::size_t y = 0; y < s; ++y) {
      for (std::size_t x = 0; x < s; ++x) {
        double v = background;
        if (stripes) {
          v += opt.contrast * 0.5 *
               (1 + std::sin(2 * std::numbers::pi * static_cast<double>(x) / period + phase));
        } else {
          const double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
          v += opt.contrast * std::exp(-d2 / (2 * radius * radius));
        }
        v += opt.noise * rng.gaussian();
        img.at(y, x, 0) = quantize(v);
      }
    }
    out.push_back({i, std::move(img), stripes ? 1.f : 0.f});
  }
  return out;
}

std::vector<Sample> synthetic_cholesterol(std::size_t n, std::uint64_t seed) {
  Xorshift64Star rng(derive_seed(seed, kTabularStream));
  std::vector<Sample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double age = std::round(rng.uniform(20, 85));
    const bool male = rng.below(2) == 1;
    const double height = std::round((male ? 171.0 : 157.5) + 6.5 * rng.gaussian());
    const double bmi = std::clamp(23.5 + 3.2 * rng.gaussian(), 16.0, 38.0);
    const double weight = std::round(bmi * (height / 100) * (height / 100) * 100) / 100;
    const double tc = std::round(std::clamp(150 + 0.6 * age + 1.2 * (bmi - 23.5) + 30 * rng.gaussian(), 90.0, 330.0));
    const double hdl = std::round(std::clamp(56 - 7 * male - 0.8 * (bmi - 23.5) + 11 * rng.gaussian(), 20.0, 110.0));
    const double tg = std::round(std::clamp(std::exp(4.7 + 0.03 * (bmi - 23.5) + 0.45 * rng.gaussian()), 30.0, 600.0));
    // Friedewald-style relation plus small age / sex terms and noise.
    const double ldl = std::max(15.0, tc - hdl - tg / 5 + 0.15 * (age - 50) - 3 * male + 6 * rng.gaussian());
    Sample smp;
    smp.sample_id = i;
    smp.features = Tensor({kTabularFeatures},
                          std::vector<float>{static_cast<float>(age), male ? 1.f : 0.f,
                                             static_cast<float>(height), static_cast<float>(weight),
                                             static_cast<float>(tc), static_cast<float>(hdl),
                                             static_cast<float>(tg)});
    smp.label = static_cast<float>(std::round(ldl));
    out.push_back(std::move(smp));
  }
  return out;
}

void write_image_dataset(const fs::path& dir, const std::vector<Sample>& samples) {
  fs::create_directories(dir / "neg");
  fs::create_directories(dir / "pos");
  for (const auto& s : samples) {
    const auto& d = s.features.dims();
    if (d.size() != 3 || d[2] != 1) throw ConfigError("image samples must be H x W x 1");
    std::vector<std::uint8_t> px(s.features.size());
    for (std::size_t i = 0; i < px.size(); ++i) {
      px[i] = static_cast<std::uint8_t>(std::lround(std::clamp(s.features[i], 0.f, 1.f) * 255));
    }
    write_pgm(dir / (s.label > 0.5f ? "pos" : "neg") / (numbered(s.sample_id) + ".pgm"), d[0], d[1], px);
  }
}

void write_tabular_csv(const fs::path& path, const std::vector<Sample>& samples) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << kTabularHeader << '\n';
  for (const auto& s : samples) {
    if (s.features.size() != kTabularFeatures) throw ConfigError("tabular samples need 7 features");
    for (std::size_t i = 0; i < kTabularFeatures; ++i) {
      if (i == 1) {
        out << (s.features[i] > 0.5f ? "Male" : "Female");
      } else {
        out << float_text(s.features[i]);
      }
      out << ',';
    }
    out << float_text(s.label) << '\n';
  }
}

}  // namespace splitstream
