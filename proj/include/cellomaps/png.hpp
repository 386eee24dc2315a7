#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace cellomaps {

struct RgbImage {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<std::uint8_t> pixels;  // row-major RGB triplets

  RgbImage() = default;
  RgbImage(std::uint32_t w, std::uint32_t h) : width(w), height(h), pixels(std::size_t{w} * h * 3, 0) {}

  std::uint8_t* at(std::uint32_t x, std::uint32_t y) { return &pixels[(std::size_t{y} * width + x) * 3]; }
  const std::uint8_t* at(std::uint32_t x, std::uint32_t y) const {
    return &pixels[(std::size_t{y} * width + x) * 3];
  }

  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

/// Standard 8-bit truecolor PNG, no interlace, filter type 0 on every row.
std::vector<std::uint8_t> encode_png(const RgbImage& image);

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

}  // namespace cellomaps
