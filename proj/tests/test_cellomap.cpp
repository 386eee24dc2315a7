#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "cellomaps/cellomap.hpp"
#include "cellomaps/error.hpp"
#include "test_util.hpp"

using namespace cellomaps;
using testutil::error_of;

namespace {

SlideNucleiSet one_per_class() {
  SlideNucleiSet s{"s", "p", 2.0, 16, 8, {}};
  for (std::size_t i = 0; i < kAllCellClasses.size(); ++i) {
    s.records.push_back({double(i * 3), double(i), kAllCellClasses[i], std::nullopt});
  }
  return s;
}

}  // namespace

TEST_CASE("channel spec parsing") {
  CHECK(ChannelSpec().size() == 3);
  CHECK(ChannelSpec()[0] == CellClass::NeoplasticEpithelial);
  CHECK(ChannelSpec()[1] == CellClass::NonNeoplasticEpithelial);
  CHECK(ChannelSpec()[2] == CellClass::Connective);
  const auto spec = ChannelSpec::parse("Connective,Inflammatory");
  CHECK(spec.size() == 2);
  CHECK(ChannelSpec::parse(spec.to_string()) == spec);
  CHECK(spec.index_of(CellClass::Inflammatory) == 1);
  CHECK(spec.index_of(CellClass::Necrotic) == -1);
  CHECK_THROWS_AS(ChannelSpec::parse("Connective,Connective"), Error);
  CHECK_THROWS_AS(ChannelSpec::parse(""), Error);
}

TEST_CASE("build: empty set gives zero planes") {
  SlideNucleiSet s{"s", "p", 2.0, 20, 10, {}};
  const auto m = build_cellomap(s, ChannelSpec());
  REQUIRE(m.planes.size() == 3);
  for (const auto& p : m.planes) CHECK(p.popcount() == 0);
  CHECK(m.width == 20);
  CHECK(m.height == 10);
}

TEST_CASE("build: coincident nuclei set one bit") {
  SlideNucleiSet s{"s", "p", 2.0, 20, 10,
                   {{5, 5, CellClass::NeoplasticEpithelial, {}}, {5, 5, CellClass::NeoplasticEpithelial, {}}}};
  const auto m = build_cellomap(s, ChannelSpec());
  CHECK(m.planes[0].popcount() == 1);
  CHECK(m.planes[0].get(5, 5));
}

TEST_CASE("build: matches a rasterization oracle") {
  const auto s = one_per_class();
  const auto m = build_cellomap(s, ChannelSpec());
  for (std::size_t c = 0; c < 3; ++c) {
    BitPlane oracle(s.width, s.height);
    for (const auto& r : s.records)
      if (r.cell_class == ChannelSpec()[c]) oracle.set(std::uint32_t(r.x), std::uint32_t(r.y));
    CHECK(m.planes[c] == oracle);
    CHECK(m.planes[c].popcount() == 1);
  }
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    SlideNucleiSet r{"s", "p", 2.0, 37, 23, {}};
    for (int i = 0; i < 150; ++i) {
      r.records.push_back({double(rng.below(37)), double(rng.below(23)), kAllCellClasses[rng.below(5)], {}});
    }
    const auto spec = ChannelSpec::parse("Inflammatory,NeoplasticEpithelial,Necrotic,Connective");
    const auto map = build_cellomap(r, spec);
    for (std::size_t c = 0; c < spec.size(); ++c)
      for (std::uint32_t y = 0; y < 23; ++y)
        for (std::uint32_t x = 0; x < 37; ++x) {
          bool any = false;
          for (const auto& n : r.records) any |= n.x == x && n.y == y && n.cell_class == spec[c];
          CHECK(map.planes[c].get(x, y) == any);
        }
  }
}

TEST_CASE("encode: payload size formula") {
  const auto m = make_empty_map(448, 448, ChannelSpec());
  const auto bytes = encode(m);
  CHECK(clom_payload_bytes(448, 448, 3) == 3u * 448u * 56u);
  CHECK(bytes.size() == clom_header_bytes(3) + 75264u);
  CHECK(clom_header_bytes(3) == 23);
}

TEST_CASE("encode: MSB-first bit order") {
  auto m = make_empty_map(1, 1, ChannelSpec{CellClass::Connective});
  m.planes[0].set(0, 0);
  const auto bytes = encode(m);
  REQUIRE(bytes.size() == clom_header_bytes(1) + 1);
  CHECK(bytes.back() == 0x80);
  auto m2 = make_empty_map(10, 1, ChannelSpec{CellClass::Connective});
  m2.planes[0].set(1, 0);
  m2.planes[0].set(9, 0);
  const auto b2 = encode(m2);
  CHECK(b2[b2.size() - 2] == 0x40);
  CHECK(b2[b2.size() - 1] == 0x40);
}

TEST_CASE("encode: header layout") {
  auto m = make_empty_map(300, 7, ChannelSpec{CellClass::Necrotic, CellClass::Connective}, 2.0);
  const auto b = encode(m);
  CHECK(std::string(b.begin(), b.begin() + 4) == "CLOM");
  CHECK(b[4] == kClomVersion);
  CHECK(b[5] == 2);
  CHECK(b[6] == 0);
  CHECK(b[7] == 0);
  CHECK((b[8] | b[9] << 8) == 300);
  CHECK(b[12] == 7);
  CHECK((b[16] | b[17] << 8) == 2000);
  CHECK(b[20] == 4);
  CHECK(b[21] == 2);
}

TEST_CASE("codec round trip over random maps") {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const auto w = static_cast<std::uint32_t>(rng.range(1, 90));
    const auto h = static_cast<std::uint32_t>(rng.range(1, 90));
    const auto c = static_cast<std::size_t>(rng.range(1, 5));
    const auto m = testutil::random_map(rng, w, h, c, rng.uniform(0.0, 0.5));
    const auto bytes = encode(m);
    CHECK(bytes.size() == clom_header_bytes(c) + c * h * ((w + 7) / 8));
    CHECK(decode(bytes) == m);
  }
}

TEST_CASE("decode: error cases") {
  Rng rng(1);
  const auto m = testutil::random_map(rng, 13, 9, 3, 0.3);
  const auto good = encode(m);

  auto bad_magic = good;
  bad_magic[0] = 'X';
  CHECK(error_of([&] { decode(bad_magic); }) == ErrorCode::BadMagic);

  const std::vector<std::uint8_t> truncated(good.begin(), good.end() - 1);
  CHECK(error_of([&] { decode(truncated); }) == ErrorCode::TruncatedPayload);
  const std::vector<std::uint8_t> header_only(good.begin(), good.begin() + 10);
  CHECK(error_of([&] { decode(header_only); }) == ErrorCode::TruncatedPayload);

  auto version = good;
  version[4] = 2;
  CHECK(error_of([&] { decode(version); }) == ErrorCode::UnsupportedVersion);

  auto padding = good;
  padding[clom_header_bytes(3) + 1] |= 0x01;  // width 13: the last 3 bits of each row's second byte are padding
  CHECK(error_of([&] { decode(padding); }) == ErrorCode::NonzeroPadding);

  auto trailing = good;
  trailing.push_back(0);
  CHECK(error_of([&] { decode(trailing); }) == ErrorCode::MalformedInput);

  auto bad_code = good;
  bad_code[20] = 9;
  CHECK(error_of([&] { decode(bad_code); }) == ErrorCode::MalformedInput);
}

TEST_CASE("clom file round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "cellomaps_codec_test";
  std::filesystem::create_directories(dir);
  Rng rng(8);
  const auto m = testutil::random_map(rng, 40, 33, 3, 0.1);
  write_clom(m, dir / "m.clom");
  CHECK(read_clom(dir / "m.clom") == m);
  CHECK(std::filesystem::file_size(dir / "m.clom") == clom_header_bytes(3) + 3 * 33 * 5);
  std::filesystem::remove_all(dir);
}

TEST_CASE("render: black map, green dot, radius") {
  auto m = make_empty_map(9, 9, ChannelSpec());
  auto img = testutil::decode_png(render_png(m, 0));
  for (auto v : img.pixels) CHECK(v == 0);

  m.planes[0].set(4, 4);
  img = testutil::decode_png(render_png(m, 0));
  for (std::uint32_t y = 0; y < 9; ++y)
    for (std::uint32_t x = 0; x < 9; ++x) {
      const auto* p = img.at(x, y);
      const bool dot = x == 4 && y == 4;
      CHECK(p[0] == 0);
      CHECK(p[1] == (dot ? 255 : 0));
      CHECK(p[2] == 0);
    }

  img = testutil::decode_png(render_png(m, 2));
  for (std::uint32_t y = 0; y < 9; ++y)
    for (std::uint32_t x = 0; x < 9; ++x) {
      const bool inside = x >= 2 && x <= 6 && y >= 2 && y <= 6;
      CHECK(img.at(x, y)[1] == (inside ? 255 : 0));
    }
}

TEST_CASE("render: connective red, non-neoplastic blue, too many channels") {
  auto m = make_empty_map(4, 1, ChannelSpec());
  m.planes[1].set(1, 0);
  m.planes[2].set(2, 0);
  const auto img = render_rgb(m, 0);
  CHECK(img.at(1, 0)[2] == 255);
  CHECK(img.at(1, 0)[0] == 0);
  CHECK(img.at(2, 0)[0] == 255);
  CHECK(img.at(2, 0)[2] == 0);
  const auto four = make_empty_map(4, 4, ChannelSpec::parse(
                                             "NeoplasticEpithelial,NonNeoplasticEpithelial,Connective,Necrotic"));
  CHECK(error_of([&] { render_rgb(four, 0); }) == ErrorCode::TooManyChannels);
}

TEST_CASE("entropy: base cases and oracle") {
  const std::vector<std::uint16_t> zeros(448 * 448, 0);
  CHECK(shannon_entropy(zeros, 8).bits_per_pixel == 0.0);
  std::vector<std::uint16_t> uniform;
  for (int i = 0; i < 800; ++i) uniform.push_back(static_cast<std::uint16_t>(i % 8));
  CHECK(std::abs(shannon_entropy(uniform, 8).bits_per_pixel - 3.0) < 1e-9);
  CHECK(error_of([] { shannon_entropy(std::span<const std::uint16_t>{}, 8); }) == ErrorCode::EmptyTile);

  Rng rng(6);
  std::vector<std::uint16_t> symbols;
  for (int i = 0; i < 1000; ++i) symbols.push_back(static_cast<std::uint16_t>(rng.below(5)));
  double counts[5] = {};
  for (auto s : symbols) counts[s] += 1;
  double h = 0;
  for (double c : counts)
    if (c > 0) h -= c / 1000 * std::log2(c / 1000);
  CHECK(shannon_entropy(symbols, 8).bits_per_pixel == doctest::Approx(h).epsilon(1e-12));
}

TEST_CASE("composite symbols combine the planes bitwise") {
  auto m = make_empty_map(4, 2, ChannelSpec());
  m.planes[0].set(0, 0);
  m.planes[1].set(0, 0);
  m.planes[2].set(3, 1);
  const auto sym = composite_symbols(m, 0, 0, 4, 2);
  REQUIRE(sym.size() == 8);
  CHECK(sym[0] == 3);
  CHECK(sym[7] == 4);
  CHECK(sym[1] == 0);
  const auto window = composite_symbols(m, 3, 1, 1, 1);
  CHECK(window == std::vector<std::uint16_t>{4});
  CHECK(composite_symbols(m.planes) == sym);
}

TEST_CASE("compression ratio against 24-bit rasters") {
  const auto m = make_empty_map(448, 448, ChannelSpec());
  const double header = double(clom_header_bytes(3));
  const double payload = 75264.0;
  const double same_field = compression_ratio(m, 24.0, 448ull * 448);
  CHECK(same_field == doctest::Approx(24.0 * 448 * 448 / (8 * (payload + header))));
  CHECK(same_field == doctest::Approx(8.0).epsilon(1e-3));
  const double source_field = compression_ratio(m, 24.0, 1792ull * 1792);
  CHECK(source_field == doctest::Approx(128.0).epsilon(1e-3));
  CHECK(source_field / same_field == doctest::Approx(16.0));
  // 1x1: the header dominates; only sanity is checked here.
  CHECK(compression_ratio(make_empty_map(1, 1, ChannelSpec()), 24.0, 1) > 0.0);
}
