#include "splitstream/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include "splitstream/errors.hpp"

namespace splitstream {

namespace {

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open image " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Header tokens are separated by whitespace; '#' starts a comment line.
std::size_t pgm_token(const std::vector<std::uint8_t>& b, std::size_t& at,
                      const std::filesystem::path& path) {
  for (;;) {
    while (at < b.size() && std::isspace(b[at])) ++at;
    if (at < b.size() && b[at] == '#') {
      while (at < b.size() && b[at] != '\n') ++at;
      continue;
    }
    break;
  }
  std::size_t v = 0;
  const std::size_t start = at;
  while (at < b.size() && std::isdigit(b[at])) v = v * 10 + (b[at++] - '0');
  if (at == start) throw DataError("malformed PGM header in " + path.string());
  return v;
}

Tensor decode_pgm(const std::vector<std::uint8_t>& b, const std::filesystem::path& path) {
  std::size_t at = 2;
  const std::size_t w = pgm_token(b, at, path);
  const std::size_t h = pgm_token(b, at, path);
  const std::size_t maxval = pgm_token(b, at, path);
  ++at;  // single whitespace before the raster
  if (w == 0 || h == 0 || maxval == 0 || maxval > 65535) {
    throw DataError("bad PGM dimensions in " + path.string());
  }
  const std::size_t bpp = maxval > 255 ? 2 : 1;
  if (b.size() < at + w * h * bpp) throw DataError("truncated PGM raster in " + path.string());
  Tensor out({h, w, 1});
  for (std::size_t i = 0; i < w * h; ++i) {
    const std::size_t v = bpp == 1 ? b[at + i] : (b[at + 2 * i] << 8) | b[at + 2 * i + 1];
    out[i] = static_cast<float>(static_cast<double>(v) / static_cast<double>(maxval));
  }
  return out;
}

Tensor decode_png(const std::vector<std::uint8_t>& b, const std::filesystem::path& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, b.data(), b.size())) {
    throw DataError("cannot decode PNG " + path.string() + ": " + img.message);
  }
  img.format = PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> raster(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, raster.data(), 0, nullptr)) {
    png_image_free(&img);
    throw DataError("cannot decode PNG " + path.string() + ": " + img.message);
  }
  Tensor out({img.height, img.width, 1});
  for (std::size_t i = 0; i < raster.size(); ++i) out[i] = static_cast<float>(raster[i] / 255.0);
  return out;
}

// Source coordinate and blend weight for output index o along one axis.
struct Tap {
  std::size_t lo, hi;
  double frac;
};

Tap axis_tap(std::size_t o, std::size_t in, std::size_t out) {
  double src;
  if (out >= in) {
    src = out == 1 ? 0.0 : static_cast<double>(o * (in - 1)) / static_cast<double>(out - 1);
  } else {
    src = (static_cast<double>(o) + 0.5) * static_cast<double>(in) / static_cast<double>(out) - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
  }
  const auto lo = static_cast<std::size_t>(std::floor(src));
  const std::size_t hi = std::min(lo + 1, in - 1);
  return {lo, hi, src - static_cast<double>(lo)};
}

}  // namespace

Tensor read_image(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') return decode_pgm(bytes, path);
  if (bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0) return decode_png(bytes, path);
  throw DataError("unsupported image format: " + path.string());
}

void write_pgm(const std::filesystem::path& path, std::size_t height, std::size_t width,
               const std::vector<std::uint8_t>& pixels) {
  if (pixels.size() != height * width) throw InternalError("pgm raster size mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "P5\n" << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
}

Tensor resize_image(const Tensor& img, std::size_t out_h, std::size_t out_w) {
  if (img.rank() != 3 || img.dims()[2] != 1) {
    throw ConfigError("resize_image expects H x W x 1, got " + to_string(img.dims()));
  }
  const std::size_t h = img.dims()[0], w = img.dims()[1];
  if (out_h == 0 || out_w == 0) throw ConfigError("resize target must be positive");
  if (out_h == h && out_w == w) return img;
  Tensor out({out_h, out_w, 1});
  for (std::size_t y = 0; y < out_h; ++y) {
    const Tap ty = axis_tap(y, h, out_h);
    for (std::size_t x = 0; x < out_w; ++x) {
      const Tap tx = axis_tap(x, w, out_w);
      const double top = (1 - tx.frac) * img.at(ty.lo, tx.lo, 0) + tx.frac * img.at(ty.lo, tx.hi, 0);
      const double bot = (1 - tx.frac) * img.at(ty.hi, tx.lo, 0) + tx.frac * img.at(ty.hi, tx.hi, 0);
      out[y * out_w + x] = static_cast<float>((1 - ty.frac) * top + ty.frac * bot);
    }
  }
  return out;
}

}  // namespace splitstream
