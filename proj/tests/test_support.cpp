#include <doctest.h>

#include <filesystem>
#include <set>

#include "cellomaps/csv.hpp"
#include "cellomaps/dataset.hpp"
#include "cellomaps/error.hpp"
#include "cellomaps/format.hpp"
#include "cellomaps/parallel.hpp"
#include "cellomaps/prediction.hpp"
#include "test_util.hpp"

using namespace cellomaps;
using testutil::error_of;

TEST_CASE("csv quoting round trip") {
  const csv::Row row = {"plain", "with,comma", "with \"quote\"", "", "multi\nline"};
  CHECK(csv::parse_line(csv::format_row(row)) == row);
  csv::Table t;
  t.header = {"a", "b"};
  t.rows = {{"1", "x,y"}, {"2", ""}};
  const auto back = csv::parse(csv::to_string(t));
  CHECK(back.header == t.header);
  CHECK(back.rows == t.rows);
  CHECK(back.column("b") == 1);
  CHECK_THROWS_AS(back.column("c"), Error);
  CHECK(csv::to_double("0.25") == 0.25);
  CHECK(csv::to_int("-7") == -7);
  CHECK_THROWS_AS(csv::to_double("abc"), Error);
}

TEST_CASE("rng: determinism and ranges") {
  Rng a(5), b(5);
  for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
  Rng r(1);
  double sum = 0, sq = 0;
  for (int i = 0; i < 20000; ++i) {
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const double z = r.normal();
    sum += z;
    sq += z * z;
    const auto k = r.range(-2, 2);
    CHECK(k >= -2);
    CHECK(k <= 2);
  }
  CHECK(std::abs(sum / 20000) < 0.05);
  CHECK(std::abs(sq / 20000 - 1.0) < 0.05);
  CHECK(derive_seed(1, 2, 3) != derive_seed(1, 3, 2));
  std::vector<int> v = {1, 2, 3, 4, 5, 6};
  r.shuffle(std::span(v));
  CHECK(std::multiset<int>(v.begin(), v.end()) == std::multiset<int>{1, 2, 3, 4, 5, 6});
}

TEST_CASE("bitplane crop, flips and popcount") {
  Rng rng(2);
  const auto p = testutil::random_plane(rng, 29, 17, 0.3);
  std::size_t count = 0;
  for (std::uint32_t y = 0; y < 17; ++y)
    for (std::uint32_t x = 0; x < 29; ++x) count += p.get(x, y);
  CHECK(p.popcount() == count);
  const auto c = p.crop(3, 2, 19, 9);
  for (std::uint32_t y = 0; y < 9; ++y)
    for (std::uint32_t x = 0; x < 19; ++x) CHECK(c.get(x, y) == p.get(x + 3, y + 2));
  const auto aligned = p.crop(8, 1, 16, 5);
  for (std::uint32_t y = 0; y < 5; ++y)
    for (std::uint32_t x = 0; x < 16; ++x) CHECK(aligned.get(x, y) == p.get(x + 8, y + 1));
  const auto h = p.flipped_horizontal(), v = p.flipped_vertical();
  for (std::uint32_t y = 0; y < 17; ++y)
    for (std::uint32_t x = 0; x < 29; ++x) {
      CHECK(h.get(x, y) == p.get(28 - x, y));
      CHECK(v.get(x, y) == p.get(x, 16 - y));
    }
  CHECK(h.flipped_horizontal() == p);
  // Padding bits stay clear so equality and encoding remain well defined.
  CHECK((h.bytes()[3] & 0x07) == 0);
}

TEST_CASE("png encoder output decodes") {
  RgbImage img(5, 3);
  for (std::uint32_t y = 0; y < 3; ++y)
    for (std::uint32_t x = 0; x < 5; ++x) {
      img.at(x, y)[0] = std::uint8_t(x * 40);
      img.at(x, y)[2] = std::uint8_t(y * 80);
    }
  CHECK(testutil::decode_png(encode_png(img)) == img);
}

TEST_CASE("predictions CSV") {
  const std::vector<PredictionRecord> p = {make_prediction("s1", 0, 448, {0.1, 0.2, 0.3, 0.1, 0.2, 0.1}),
                                           make_prediction("s2", 896, 0, {0, 0, 0, 0, 0, 1})};
  CHECK(p[0].predicted == 2);
  const auto back = parse_predictions_csv(predictions_csv(p));
  REQUIRE(back.size() == 2);
  CHECK(back[0].probabilities == p[0].probabilities);
  CHECK(back[1].predicted == 5);
  CHECK(error_of([] {
          parse_predictions_csv("slide_id,x,y,p0,p1,p2,p3,p4,p5,predicted\ns,0,0,0.5,0.1,0,0,0,0,0\n");
        }) == ErrorCode::MalformedInput);
  const double tie[] = {0.5, 0.5};
  CHECK(argmax(tie) == 0);
}

TEST_CASE("format_double round trips") {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.normal() * std::pow(10.0, rng.range(-20, 20));
    CHECK(std::strtod(format_double(v).c_str(), nullptr) == v);
  }
  CHECK(format_double(0.5) == "0.5");
}

TEST_CASE("parallel_for writes every slot once for any worker count") {
  for (std::size_t workers : {1u, 2u, 3u, 8u}) {
    std::vector<int> out(37, 0);
    parallel_for(out.size(), workers, [&](std::size_t i, std::size_t) { out[i] += int(i); });
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == int(i));
  }
  CHECK_THROWS_AS(parallel_for(4, 2, [](std::size_t i, std::size_t) {
                    if (i == 3) throw Error(ErrorCode::Internal, "boom");
                  }),
                  Error);
}

TEST_CASE("map index and manifest tile loading") {
  const auto dir = std::filesystem::temp_directory_path() / "cellomaps_dataset_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  Rng rng(4);
  auto map = testutil::random_map(rng, 64, 32, 3, 0.1);
  write_clom(map, dir / "a.clom");
  const std::vector<MapIndexEntry> index = {{"A", "P", "a.clom"}};
  write_map_index(dir, index);
  CHECK(read_map_index(dir) == index);
  const std::vector<ManifestEntry> manifest = {{"A", "P", 32, 0, 32, PatternClass::Solid}};
  const auto tiles = load_manifest_tiles(dir, manifest);
  REQUIRE(tiles.size() == 1);
  CHECK(tiles[0].label == PatternClass::Solid);
  CHECK(tiles[0].patient_id == "P");
  CHECK(tiles[0].planes[1] == map.planes[1].crop(32, 0, 32, 32));
  const std::vector<ManifestEntry> missing = {{"B", "P", 0, 0, 32, PatternClass::Solid}};
  CHECK(error_of([&] { load_manifest_tiles(dir, missing); }) == ErrorCode::MalformedInput);
  const std::vector<std::string> ids = {"A:32:0"};
  CHECK(select_tiles(manifest, ids).size() == 1);
  std::filesystem::remove_all(dir);
}
