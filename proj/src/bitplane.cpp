#include "cellomaps/bitplane.hpp"

#include <bit>

#include "cellomaps/error.hpp"

namespace cellomaps {

std::size_t BitPlane::popcount() const noexcept {
  std::size_t n = 0;
  for (auto b : bytes_) n += static_cast<std::size_t>(std::popcount(b));
  return n;
}

BitPlane BitPlane::crop(std::uint32_t x0, std::uint32_t y0, std::uint32_t w, std::uint32_t h) const {
  if (std::uint64_t{x0} + w > width_ || std::uint64_t{y0} + h > height_) {
    throw Error(ErrorCode::OutOfBounds, "crop window exceeds plane");
  }
  BitPlane out(w, h);
  if (x0 % 8 == 0) {
    // Byte-aligned fast path; the trailing byte may carry bits past w.
    const std::size_t full = w / 8;
    const unsigned tail = w % 8;
    for (std::uint32_t y = 0; y < h; ++y) {
      const auto* src = &bytes_[(y0 + y) * stride() + x0 / 8];
      auto* dst = &out.bytes_[y * out.stride()];
      for (std::size_t i = 0; i < full; ++i) dst[i] = src[i];
      if (tail) dst[full] = static_cast<std::uint8_t>(src[full] & (0xFFu << (8 - tail)));
    }
    return out;
  }
  for (std::uint32_t y = 0; y < h; ++y)
    for (std::uint32_t x = 0; x < w; ++x)
      if (get(x0 + x, y0 + y)) out.set(x, y);
  return out;
}

BitPlane BitPlane::flipped_horizontal() const {
  BitPlane out(width_, height_);
  for (std::uint32_t y = 0; y < height_; ++y)
    for (std::uint32_t x = 0; x < width_; ++x)
      if (get(x, y)) out.set(width_ - 1 - x, y);
  return out;
}

BitPlane BitPlane::flipped_vertical() const {
  BitPlane out(width_, height_);
  const std::size_t s = stride();
  for (std::uint32_t y = 0; y < height_; ++y)
    for (std::size_t i = 0; i < s; ++i) out.bytes_[(height_ - 1 - y) * s + i] = bytes_[y * s + i];
  return out;
}

BitPlane bitwise_or(const BitPlane& a, const BitPlane& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw Error(ErrorCode::ShapeMismatch, "bitwise_or on planes of different size");
  }
  BitPlane out = a;
  auto dst = out.bytes();
  auto src = b.bytes();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] |= src[i];
  return out;
}

}  // namespace cellomaps
