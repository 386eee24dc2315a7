#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace cellomaps {

/// Binary raster stored row-major, MSB-first, each row padded to a byte
/// boundary. Padding bits are always zero.
class BitPlane {
 public:
  BitPlane() = default;
  BitPlane(std::uint32_t width, std::uint32_t height)
      : width_(width), height_(height), bytes_(row_bytes(width) * std::size_t{height}, 0) {}

  static constexpr std::size_t row_bytes(std::uint32_t width) noexcept { return (width + 7u) / 8u; }

  std::uint32_t width() const noexcept { return width_; }
  std::uint32_t height() const noexcept { return height_; }
  std::size_t stride() const noexcept { return row_bytes(width_); }

  bool get(std::uint32_t x, std::uint32_t y) const noexcept {
    return (bytes_[y * stride() + x / 8] >> (7 - x % 8)) & 1u;
  }
  void set(std::uint32_t x, std::uint32_t y, bool value = true) noexcept {
    auto& b = bytes_[y * stride() + x / 8];
    const auto mask = static_cast<std::uint8_t>(0x80u >> (x % 8));
    b = value ? static_cast<std::uint8_t>(b | mask) : static_cast<std::uint8_t>(b & ~mask);
  }

  std::size_t popcount() const noexcept;

  /// Copy of the window [x0, x0+w) x [y0, y0+h); must lie inside the plane.
  BitPlane crop(std::uint32_t x0, std::uint32_t y0, std::uint32_t w, std::uint32_t h) const;
  BitPlane flipped_horizontal() const;
  BitPlane flipped_vertical() const;

  std::span<const std::uint8_t> bytes() const noexcept { return bytes_; }
  std::span<std::uint8_t> bytes() noexcept { return bytes_; }

  friend bool operator==(const BitPlane&, const BitPlane&) = default;

 private:
  std::uint32_t width_ = 0;
  std::uint32_t height_ = 0;
  std::vector<std::uint8_t> bytes_;
};

BitPlane bitwise_or(const BitPlane& a, const BitPlane& b);

}  // namespace cellomaps
