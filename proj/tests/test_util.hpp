#pragma once

#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <vector>

#include "cellomaps/bitplane.hpp"
#include "cellomaps/cellomap.hpp"
#include "cellomaps/error.hpp"
#include "cellomaps/png.hpp"
#include "cellomaps/rng.hpp"

namespace testutil {

inline cellomaps::BitPlane random_plane(cellomaps::Rng& rng, std::uint32_t w, std::uint32_t h, double density) {
  cellomaps::BitPlane p(w, h);
  for (std::uint32_t y = 0; y < h; ++y)
    for (std::uint32_t x = 0; x < w; ++x)
      if (rng.bernoulli(density)) p.set(x, y);
  return p;
}

inline cellomaps::CellOMap random_map(cellomaps::Rng& rng, std::uint32_t w, std::uint32_t h, std::size_t channels,
                                      double density) {
  std::vector<cellomaps::CellClass> classes(cellomaps::kAllCellClasses.begin(), cellomaps::kAllCellClasses.end());
  rng.shuffle(std::span(classes));
  classes.resize(channels);
  auto map = cellomaps::make_empty_map(w, h, cellomaps::ChannelSpec(classes));
  for (auto& p : map.planes) p = random_plane(rng, w, h, density);
  return map;
}

// Decoder for the subset written by encode_png: 8-bit RGB, filter 0.
inline cellomaps::RgbImage decode_png(const std::vector<std::uint8_t>& png) {
  auto be32 = [&](std::size_t at) {
    return (std::uint32_t{png[at]} << 24) | (std::uint32_t{png[at + 1]} << 16) | (std::uint32_t{png[at + 2]} << 8) |
           png[at + 3];
  };
  static const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (png.size() < 8 || std::memcmp(png.data(), sig, 8) != 0) throw std::runtime_error("not a PNG");
  std::uint32_t w = 0, h = 0;
  std::vector<std::uint8_t> idat;
  for (std::size_t at = 8; at + 12 <= png.size();) {
    const std::uint32_t len = be32(at);
    const std::string type(reinterpret_cast<const char*>(&png[at + 4]), 4);
    const std::uint8_t* data = &png[at + 8];
    const auto crc = static_cast<std::uint32_t>(crc32(0, &png[at + 4], len + 4));
    if (crc != be32(at + 8 + len)) throw std::runtime_error("bad CRC in " + type);
    if (type == "IHDR") {
      w = be32(at + 8);
      h = be32(at + 12);
      if (data[8] != 8 || data[9] != 2) throw std::runtime_error("unsupported PNG format");
    } else if (type == "IDAT") {
      idat.insert(idat.end(), data, data + len);
    }
    at += 12 + len;
  }
  std::vector<std::uint8_t> raw(std::size_t{h} * (1 + std::size_t{w} * 3));
  uLongf raw_len = raw.size();
  if (uncompress(raw.data(), &raw_len, idat.data(), idat.size()) != Z_OK || raw_len != raw.size()) {
    throw std::runtime_error("bad IDAT");
  }
  cellomaps::RgbImage img(w, h);
  for (std::uint32_t y = 0; y < h; ++y) {
    const std::uint8_t* row = &raw[y * (1 + std::size_t{w} * 3)];
    if (row[0] != 0) throw std::runtime_error("unsupported filter");
    std::memcpy(img.at(0, y), row + 1, std::size_t{w} * 3);
  }
  return img;
}

template <typename F>
cellomaps::ErrorCode error_of(F&& f) {
  try {
    f();
  } catch (const cellomaps::Error& e) {
    return e.code();
  }
  throw std::runtime_error("expected a cellomaps::Error");
}

}  // namespace testutil
