#include "cellomaps/cellomap.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <sstream>

#include "cellomaps/error.hpp"

namespace cellomaps {

// ---------------------------------------------------------------- ChannelSpec

ChannelSpec::ChannelSpec()
    : ChannelSpec({CellClass::NeoplasticEpithelial, CellClass::NonNeoplasticEpithelial,
                   CellClass::Connective}) {}

ChannelSpec::ChannelSpec(std::initializer_list<CellClass> classes)
    : ChannelSpec(std::vector<CellClass>(classes)) {}

ChannelSpec::ChannelSpec(std::vector<CellClass> classes) : classes_(std::move(classes)) {
  if (classes_.empty() || classes_.size() > kCellClassCount) {
    throw Error(ErrorCode::InvalidArgument, "channel spec must list 1 to 5 classes");
  }
  for (std::size_t i = 0; i < classes_.size(); ++i)
    for (std::size_t j = i + 1; j < classes_.size(); ++j)
      if (classes_[i] == classes_[j]) {
        throw Error(ErrorCode::InvalidArgument,
                    "duplicate class " + std::string(cellomaps::to_string(classes_[i])) + " in channel spec");
      }
}

ChannelSpec ChannelSpec::parse(const std::string& text) {
  std::vector<CellClass> classes;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) continue;
    classes.push_back(cell_class_from_string(item.substr(b, e - b + 1)));
  }
  return ChannelSpec(std::move(classes));
}

std::string ChannelSpec::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < classes_.size(); ++i) {
    if (i) out += ',';
    out += cellomaps::to_string(classes_[i]);
  }
  return out;
}

int ChannelSpec::index_of(CellClass c) const noexcept {
  for (std::size_t i = 0; i < classes_.size(); ++i)
    if (classes_[i] == c) return static_cast<int>(i);
  return -1;
}

// ---------------------------------------------------------------- construction

CellOMap make_empty_map(std::uint32_t width, std::uint32_t height, const ChannelSpec& channels, double mpp) {
  CellOMap map;
  map.mpp = mpp;
  map.width = width;
  map.height = height;
  map.channels = channels;
  map.planes.assign(channels.size(), BitPlane(width, height));
  return map;
}

CellOMap build_cellomap(const SlideNucleiSet& scaled, const ChannelSpec& channels) {
  validate(scaled);
  CellOMap map = make_empty_map(scaled.width, scaled.height, channels, scaled.source_mpp);
  map.slide_id = scaled.slide_id;
  map.patient_id = scaled.patient_id;
  for (const auto& r : scaled.records) {
    const int c = channels.index_of(r.cell_class);
    if (c < 0) continue;
    map.planes[static_cast<std::size_t>(c)].set(static_cast<std::uint32_t>(r.x),
                                                static_cast<std::uint32_t>(r.y));
  }
  return map;
}

// ---------------------------------------------------------------- CLOM codec

std::size_t clom_header_bytes(std::size_t channel_count) noexcept {
  return kClomFixedHeaderBytes + channel_count;
}

std::size_t clom_payload_bytes(std::uint32_t width, std::uint32_t height, std::size_t channel_count) noexcept {
  return channel_count * std::size_t{height} * BitPlane::row_bytes(width);
}

namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  return std::uint32_t{b[at]} | std::uint32_t{b[at + 1]} << 8 | std::uint32_t{b[at + 2]} << 16 |
         std::uint32_t{b[at + 3]} << 24;
}

void check_map(const CellOMap& map) {
  if (map.planes.size() != map.channels.size()) {
    throw Error(ErrorCode::Internal, "plane count does not match channel count");
  }
  for (const auto& p : map.planes) {
    if (p.width() != map.width || p.height() != map.height) {
      throw Error(ErrorCode::Internal, "plane dimensions do not match map");
    }
  }
}

}  // namespace

std::vector<std::uint8_t> encode(const CellOMap& map) {
  check_map(map);
  const double mpp_micro = std::round(map.mpp * 1000.0);
  if (!(mpp_micro > 0.0) || mpp_micro > 4294967295.0) {
    throw Error(ErrorCode::InvalidArgument, "mpp not representable in CLOM header");
  }
  const std::size_t channels = map.channels.size();
  std::vector<std::uint8_t> out;
  out.reserve(clom_header_bytes(channels) + clom_payload_bytes(map.width, map.height, channels));
  out.insert(out.end(), {'C', 'L', 'O', 'M'});
  out.push_back(kClomVersion);
  out.push_back(static_cast<std::uint8_t>(channels));
  put_u16(out, 0);
  put_u32(out, map.width);
  put_u32(out, map.height);
  put_u32(out, static_cast<std::uint32_t>(mpp_micro));
  for (CellClass c : map.channels.classes()) out.push_back(static_cast<std::uint8_t>(c));
  for (const auto& plane : map.planes) {
    const auto bytes = plane.bytes();
    out.insert(out.end(), bytes.begin(), bytes.end());
  }
  return out;
}

CellOMap decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || bytes[0] != 'C' || bytes[1] != 'L' || bytes[2] != 'O' || bytes[3] != 'M') {
    throw Error(ErrorCode::BadMagic, "missing CLOM magic");
  }
  if (bytes.size() < kClomFixedHeaderBytes) throw Error(ErrorCode::TruncatedPayload, "header truncated");
  if (bytes[4] != kClomVersion) {
    throw Error(ErrorCode::UnsupportedVersion, "CLOM version " + std::to_string(bytes[4]));
  }
  const std::size_t channels = bytes[5];
  if (channels < 1 || channels > kCellClassCount) {
    throw Error(ErrorCode::MalformedInput, "channel count " + std::to_string(channels));
  }
  if (bytes[6] != 0 || bytes[7] != 0) throw Error(ErrorCode::MalformedInput, "reserved field is nonzero");
  const std::uint32_t width = get_u32(bytes, 8);
  const std::uint32_t height = get_u32(bytes, 12);
  const std::uint32_t mpp_micro = get_u32(bytes, 16);
  if (mpp_micro == 0) throw Error(ErrorCode::MalformedInput, "mpp is zero");

  const std::size_t header = clom_header_bytes(channels);
  if (bytes.size() < header) throw Error(ErrorCode::TruncatedPayload, "channel table truncated");
  std::vector<CellClass> classes;
  for (std::size_t c = 0; c < channels; ++c) {
    auto cls = cell_class_from_code(bytes[kClomFixedHeaderBytes + c]);
    if (!cls) throw Error(ErrorCode::MalformedInput, "unknown channel class code");
    classes.push_back(*cls);
  }
  ChannelSpec spec;
  try {
    spec = ChannelSpec(std::move(classes));
  } catch (const Error& e) {
    throw Error(ErrorCode::MalformedInput, e.what());
  }

  const std::size_t payload = clom_payload_bytes(width, height, channels);
  if (bytes.size() - header < payload) {
    throw Error(ErrorCode::TruncatedPayload, "expected " + std::to_string(payload) + " payload bytes, got " +
                                                 std::to_string(bytes.size() - header));
  }
  if (bytes.size() - header > payload) throw Error(ErrorCode::MalformedInput, "trailing bytes after payload");

  CellOMap map = make_empty_map(width, height, spec, mpp_micro / 1000.0);
  const std::size_t stride = BitPlane::row_bytes(width);
  const unsigned tail = width % 8;
  const std::uint8_t pad_mask = tail ? static_cast<std::uint8_t>(0xFFu >> tail) : 0;
  std::size_t at = header;
  for (auto& plane : map.planes) {
    auto dst = plane.bytes();
    std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(at), dst.size(), dst.begin());
    if (pad_mask) {
      for (std::uint32_t y = 0; y < height; ++y) {
        if (dst[y * stride + stride - 1] & pad_mask) {
          throw Error(ErrorCode::NonzeroPadding, "row " + std::to_string(y) + " has nonzero padding bits");
        }
      }
    }
    at += dst.size();
  }
  return map;
}

void write_clom(const CellOMap& map, const std::filesystem::path& path) { write_file(path, encode(map)); }

CellOMap read_clom(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return decode(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------- rendering

namespace {

constexpr int kRed = 0, kGreen = 1, kBlue = 2;

std::vector<int> colour_slots(const ChannelSpec& spec) {
  if (spec.size() > 3) {
    throw Error(ErrorCode::TooManyChannels, "cannot render " + std::to_string(spec.size()) + " channels as RGB");
  }
  std::vector<int> slot(spec.size(), -1);
  std::array<bool, 3> used{};
  for (std::size_t c = 0; c < spec.size(); ++c) {
    int s = -1;
    switch (spec[c]) {
      case CellClass::NeoplasticEpithelial: s = kGreen; break;
      case CellClass::Connective: s = kRed; break;
      case CellClass::NonNeoplasticEpithelial: s = kBlue; break;
      default: break;
    }
    if (s >= 0) {
      slot[c] = s;
      used[static_cast<std::size_t>(s)] = true;
    }
  }
  // Classes without a fixed colour take whichever component is still free.
  for (std::size_t c = 0; c < spec.size(); ++c) {
    if (slot[c] >= 0) continue;
    for (int s : {kGreen, kRed, kBlue}) {
      if (!used[static_cast<std::size_t>(s)]) {
        slot[c] = s;
        used[static_cast<std::size_t>(s)] = true;
        break;
      }
    }
  }
  return slot;
}

}  // namespace

RgbImage render_rgb(const CellOMap& map, std::uint32_t dot_radius) {
  check_map(map);
  const auto slots = colour_slots(map.channels);
  RgbImage img(map.width, map.height);
  const std::int64_t r = dot_radius;
  for (std::size_t c = 0; c < map.planes.size(); ++c) {
    const auto& plane = map.planes[c];
    const auto comp = static_cast<std::size_t>(slots[c]);
    for (std::uint32_t y = 0; y < map.height; ++y) {
      for (std::uint32_t x = 0; x < map.width; ++x) {
        if (!plane.get(x, y)) continue;
        const auto y0 = std::max<std::int64_t>(0, y - r), y1 = std::min<std::int64_t>(map.height - 1, y + r);
        const auto x0 = std::max<std::int64_t>(0, x - r), x1 = std::min<std::int64_t>(map.width - 1, x + r);
        for (auto yy = y0; yy <= y1; ++yy)
          for (auto xx = x0; xx <= x1; ++xx)
            img.at(static_cast<std::uint32_t>(xx), static_cast<std::uint32_t>(yy))[comp] = 255;
      }
    }
  }
  return img;
}

std::vector<std::uint8_t> render_png(const CellOMap& map, std::uint32_t dot_radius) {
  return encode_png(render_rgb(map, dot_radius));
}

// ---------------------------------------------------------------- entropy

std::vector<std::uint16_t> composite_symbols(const CellOMap& map, std::uint32_t x0, std::uint32_t y0,
                                             std::uint32_t width, std::uint32_t height) {
  if (std::uint64_t{x0} + width > map.width || std::uint64_t{y0} + height > map.height) {
    throw Error(ErrorCode::OutOfBounds, "entropy window exceeds map");
  }
  std::vector<std::uint16_t> symbols(std::size_t{width} * height, 0);
  for (std::size_t c = 0; c < map.planes.size(); ++c) {
    const auto& plane = map.planes[c];
    for (std::uint32_t y = 0; y < height; ++y)
      for (std::uint32_t x = 0; x < width; ++x)
        if (plane.get(x0 + x, y0 + y)) symbols[std::size_t{y} * width + x] |= static_cast<std::uint16_t>(1u << c);
  }
  return symbols;
}

std::vector<std::uint16_t> composite_symbols(std::span<const BitPlane> planes) {
  if (planes.empty()) return {};
  const auto w = planes[0].width(), h = planes[0].height();
  std::vector<std::uint16_t> symbols(std::size_t{w} * h, 0);
  for (std::size_t c = 0; c < planes.size(); ++c) {
    if (planes[c].width() != w || planes[c].height() != h) {
      throw Error(ErrorCode::ShapeMismatch, "planes differ in size");
    }
    for (std::uint32_t y = 0; y < h; ++y)
      for (std::uint32_t x = 0; x < w; ++x)
        if (planes[c].get(x, y)) symbols[std::size_t{y} * w + x] |= static_cast<std::uint16_t>(1u << c);
  }
  return symbols;
}

std::vector<std::uint16_t> luminance_symbols(const RgbImage& image) {
  std::vector<std::uint16_t> out(std::size_t{image.width} * image.height);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto* p = &image.pixels[i * 3];
    const double y = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
    out[i] = static_cast<std::uint16_t>(std::clamp(std::lround(y), 0L, 255L));
  }
  return out;
}

EntropyReport shannon_entropy(std::span<const std::uint16_t> symbols, std::uint32_t alphabet_size) {
  if (alphabet_size == 0) throw Error(ErrorCode::InvalidArgument, "alphabet size must be positive");
  if (symbols.empty()) throw Error(ErrorCode::EmptyTile, "no pixels");
  EntropyReport report;
  report.symbol_histogram.assign(alphabet_size, 0);
  for (auto s : symbols) {
    if (s >= alphabet_size) {
      throw Error(ErrorCode::InvalidArgument,
                  "symbol " + std::to_string(s) + " outside alphabet of " + std::to_string(alphabet_size));
    }
    ++report.symbol_histogram[s];
  }
  const double n = static_cast<double>(symbols.size());
  double h = 0.0;
  for (auto count : report.symbol_histogram) {
    if (count == 0) continue;
    const double p = static_cast<double>(count) / n;
    h -= p * std::log2(p);
  }
  report.bits_per_pixel = std::max(0.0, h);
  return report;
}

double compression_ratio(const CellOMap& map, double reference_bits_per_pixel,
                         std::uint64_t reference_pixel_count) {
  if (!(reference_bits_per_pixel > 0.0) || reference_pixel_count == 0) {
    throw Error(ErrorCode::InvalidArgument, "reference size must be positive");
  }
  const auto encoded = encode(map).size();
  return reference_bits_per_pixel * static_cast<double>(reference_pixel_count) /
         (8.0 * static_cast<double>(encoded));
}

}  // namespace cellomaps
