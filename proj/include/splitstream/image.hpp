#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "splitstream/tensor.hpp"

namespace splitstream {

// Grayscale image as H x W x 1 with values scaled to [0, 1]. PGM (P5, 8 or
// 16 bit) is decoded here; PNG goes through libpng and is converted to gray.
Tensor read_image(const std::filesystem::path& path);

// Writes an 8-bit binary PGM. pixels is row-major, height * width bytes.
void write_pgm(const std::filesystem::path& path, std::size_t height, std::size_t width,
               const std::vector<std::uint8_t>& pixels);

// Bilinear resize of an H x W x 1 image. Each axis samples corner-aligned when
// it grows or keeps its size and at pixel centers when it shrinks, so results
// stay within the source range and same-size resizes are exact copies.
Tensor resize_image(const Tensor& img, std::size_t out_h, std::size_t out_w);

}  // namespace splitstream
