#include <doctest.h>

#include <filesystem>
#include <set>

#include "cellomaps/dataset.hpp"
#include "cellomaps/error.hpp"
#include "cellomaps/synth.hpp"
#include "test_util.hpp"

using namespace cellomaps;

namespace {

std::size_t count_class(const SlideNucleiSet& s, CellClass c) {
  std::size_t n = 0;
  for (const auto& r : s.records) n += r.cell_class == c;
  return n;
}

}  // namespace

TEST_CASE("solid tiles are mostly neoplastic") {
  SynthConfig cfg;
  for (std::size_t i = 0; i < 20; ++i) {
    const auto t = generate_class_tile(PatternClass::Solid, cfg, i);
    REQUIRE_FALSE(t.records.empty());
    CHECK(double(count_class(t, CellClass::NeoplasticEpithelial)) >= 0.9 * double(t.records.size()));
  }
}

TEST_CASE("normal tiles carry no neoplastic cells before noise") {
  SynthConfig cfg;
  cfg.noise_fraction = 0.0;
  for (std::size_t i = 0; i < 20; ++i) {
    const auto t = generate_class_tile(PatternClass::Normal, cfg, i);
    CHECK(count_class(t, CellClass::NeoplasticEpithelial) == 0);
    CHECK(count_class(t, CellClass::NonNeoplasticEpithelial) > 0);
  }
}

TEST_CASE("tiles are deterministic and in bounds") {
  SynthConfig cfg;
  for (auto p : kAllPatterns) {
    const auto a = generate_class_tile(p, cfg, 3);
    CHECK(a == generate_class_tile(p, cfg, 3));
    CHECK_FALSE(a == generate_class_tile(p, cfg, 4));
    CHECK_NOTHROW(validate(a));
    const double area = double(cfg.tile_size) * cfg.tile_size / (256.0 * 256.0);
    CHECK(a.records.size() <= std::size_t(double(cfg.max_points) * area) + 1);
    CHECK(a.records.size() >= std::size_t(0.9 * double(cfg.min_points) * area));
  }
  SynthConfig other = cfg;
  other.seed = cfg.seed + 1;
  CHECK_FALSE(generate_class_tile(PatternClass::Acinar, cfg, 0) == generate_class_tile(PatternClass::Acinar, other, 0));
}

TEST_CASE("config validation") {
  SynthConfig cfg;
  cfg.noise_fraction = 0.3;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.target_mpp = 1.7;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.max_points = cfg.min_points - 1;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("corpus: 60 tiles per class give 360 labelled tiles over 12 patients") {
  SynthConfig cfg;
  const auto corpus = generate_corpus(cfg);
  CHECK(corpus.truth.size() == 360);
  std::set<std::string> patients;
  std::array<int, kPatternCount> per_class{};
  for (const auto& e : corpus.truth) {
    patients.insert(e.patient_id);
    ++per_class[std::size_t(index_of(e.label))];
  }
  CHECK(patients.size() >= 6);
  for (int n : per_class) CHECK(n == 60);

  // Running the real pipeline recovers the truth manifest.
  std::vector<ManifestEntry> recovered;
  for (std::size_t s = 0; s < corpus.slides.size(); ++s) {
    CHECK_NOTHROW(validate(corpus.slides[s]));
    const auto map = build_cellomap(scale_coordinates(corpus.slides[s], cfg.target_mpp), ChannelSpec());
    for (const auto& t : tile_and_label(map, corpus.annotations[s].regions, cfg.tile_size, cfg.tile_size,
                                        kDefaultMinOverlap, default_min_nuclei(cfg.tile_size))) {
      recovered.push_back(manifest_entry(t));
    }
  }
  CHECK(recovered == corpus.truth);
}

TEST_CASE("corpus files") {
  SynthConfig cfg;
  cfg.tiles_per_class = 12;
  cfg.patients = 6;
  const auto corpus = generate_corpus(cfg);
  const auto dir = std::filesystem::temp_directory_path() / "cellomaps_synth_test";
  std::filesystem::remove_all(dir);
  write_corpus(corpus, dir);
  CHECK(read_manifest(dir / "truth.csv") == corpus.truth);
  for (const auto& s : corpus.slides) {
    CHECK(parse_nuclei_file(dir / (s.slide_id + ".json")) == s);
    CHECK(std::filesystem::exists(dir / "annotations" / (s.slide_id + ".json")));
  }
  std::filesystem::remove_all(dir);
}
