#include "cellomaps/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <numbers>

#include "cellomaps/error.hpp"
#include "cellomaps/rng.hpp"

namespace cellomaps {

void SynthConfig::validate() const {
  if (tiles_per_class == 0 || tile_size == 0 || patients == 0 || min_points == 0 || max_points < min_points) {
    throw Error(ErrorCode::InvalidArgument, "synthetic sizes must be positive");
  }
  if (!(gland_radius > 0 && cluster_radius > 0 && wall_spacing > 0 && lining_offset > 0)) {
    throw Error(ErrorCode::InvalidArgument, "synthetic geometry parameters must be positive");
  }
  if (!(noise_fraction >= 0.0 && noise_fraction <= 0.2)) {
    throw Error(ErrorCode::InvalidArgument, "noise fraction must lie in [0, 0.2]");
  }
  if (!(source_mpp > 0.0 && target_mpp >= source_mpp)) throw Error(ErrorCode::InvalidScale, "bad mpp pair");
  const double ratio = target_mpp / source_mpp;
  if (std::abs(ratio - std::round(ratio)) > 1e-9) {
    throw Error(ErrorCode::InvalidScale, "target/source mpp ratio must be an integer");
  }
}

namespace {

constexpr double kTau = 2.0 * std::numbers::pi;

struct Canvas {
  std::uint32_t side;
  Rng& rng;
  std::vector<NucleusRecord>& out;

  bool add(double x, double y, CellClass c) {
    if (!(x >= 0.0 && y >= 0.0 && x < side && y < side)) return false;
    out.push_back({std::floor(x), std::floor(y), c, std::nullopt});
    return true;
  }
  // Retries a sampler until it lands inside the tile (bounded).
  void place(std::size_t count, CellClass c, const std::function<std::pair<double, double>()>& sample) {
    for (std::size_t i = 0; i < count; ++i)
      for (int attempt = 0; attempt < 64; ++attempt) {
        const auto [x, y] = sample();
        if (add(x, y, c)) break;
      }
  }
};

void solid(Canvas& cv, std::size_t n) {
  const double s = cv.side;
  const double cx = s * cv.rng.uniform(0.4, 0.6), cy = s * cv.rng.uniform(0.4, 0.6);
  const double rx = s * cv.rng.uniform(0.38, 0.5), ry = s * cv.rng.uniform(0.38, 0.5);
  cv.place(n, CellClass::NeoplasticEpithelial, [&] {
    for (;;) {
      const double u = cv.rng.uniform(-1, 1), v = cv.rng.uniform(-1, 1);
      if (u * u + v * v <= 1.0) return std::pair{cx + u * rx, cy + v * ry};
    }
  });
}

void acinar(Canvas& cv, std::size_t n, const SynthConfig& cfg, CellClass lining) {
  struct Gland {
    double x, y, r;
  };
  std::vector<Gland> glands;
  const double s = cv.side;
  for (int attempt = 0; attempt < 400 && glands.size() < 14; ++attempt) {
    const double r = cfg.gland_radius * cv.rng.uniform(0.7, 1.3);
    const Gland g{cv.rng.uniform(r, s - r), cv.rng.uniform(r, s - r), r};
    bool clear = true;
    for (const auto& o : glands)
      if (std::hypot(g.x - o.x, g.y - o.y) < g.r + o.r + 6.0) clear = false;
    if (clear) glands.push_back(g);
  }
  const std::size_t ring = n * 7 / 10;
  double perimeter = 0.0;
  for (const auto& g : glands) perimeter += g.r;
  cv.place(ring, lining, [&] {
    double pick = cv.rng.uniform() * perimeter;
    const Gland* g = &glands.back();
    for (const auto& o : glands) {
      if (pick < o.r) {
        g = &o;
        break;
      }
      pick -= o.r;
    }
    const double a = cv.rng.uniform() * kTau, r = g->r + 0.8 * cv.rng.normal();
    return std::pair{g->x + r * std::cos(a), g->y + r * std::sin(a)};
  });
  cv.place(n - ring, CellClass::Connective, [&] {
    for (int k = 0; k < 256; ++k) {
      const double x = cv.rng.uniform(0, s), y = cv.rng.uniform(0, s);
      bool outside = true;
      for (const auto& g : glands)
        if (std::hypot(x - g.x, y - g.y) < g.r + 3.0) outside = false;
      if (outside) return std::pair{x, y};
    }
    return std::pair{-1.0, -1.0};
  });
}

struct CurvePoint {
  double x, y, nx, ny;  // position and unit normal
};

void papillary(Canvas& cv, std::size_t n, const SynthConfig& cfg) {
  const double s = cv.side;
  std::vector<CurvePoint> curve;
  struct Walker {
    double x, y, heading;
    int steps;
  };
  std::vector<Walker> walkers;
  for (int k = 0; k < 3; ++k) {
    walkers.push_back({cv.rng.uniform(0.1, 0.9) * s, cv.rng.uniform(0.1, 0.9) * s, cv.rng.uniform() * kTau,
                       static_cast<int>(s * 0.5)});
  }
  const double step = 2.0;
  for (std::size_t w = 0; w < walkers.size() && w < 10; ++w) {
    Walker cur = walkers[w];
    for (int i = 0; i < cur.steps; ++i) {
      cur.heading += 0.15 * cv.rng.normal();
      cur.x += step * std::cos(cur.heading);
      cur.y += step * std::sin(cur.heading);
      if (cur.x < 0 || cur.y < 0 || cur.x >= s || cur.y >= s) break;
      curve.push_back({cur.x, cur.y, -std::sin(cur.heading), std::cos(cur.heading)});
      if (cv.rng.bernoulli(0.015) && walkers.size() < 10) {
        walkers.push_back({cur.x, cur.y, cur.heading + (cv.rng.bernoulli(0.5) ? 0.9 : -0.9),
                           static_cast<int>(s * 0.25)});
      }
    }
  }
  if (curve.empty()) curve.push_back({s / 2, s / 2, 0.0, 1.0});
  const std::size_t lining = n * 3 / 4;
  cv.place(lining, CellClass::NeoplasticEpithelial, [&] {
    const auto& c = curve[cv.rng.below(curve.size())];
    const double off = (cv.rng.bernoulli(0.5) ? 1.0 : -1.0) * cfg.lining_offset + 0.7 * cv.rng.normal();
    return std::pair{c.x + off * c.nx, c.y + off * c.ny};
  });
  cv.place(n - lining, CellClass::Connective, [&] {
    const auto& c = curve[cv.rng.below(curve.size())];
    return std::pair{c.x + cv.rng.normal(), c.y + cv.rng.normal()};
  });
}

void micropapillary(Canvas& cv, std::size_t n, const SynthConfig& cfg) {
  const double s = cv.side;
  constexpr std::size_t kClusterSize = 8;
  const std::size_t clusters = std::max<std::size_t>(1, n / kClusterSize);
  std::vector<std::pair<double, double>> centres;
  for (std::size_t k = 0; k < clusters; ++k) centres.emplace_back(cv.rng.uniform(4, s - 4), cv.rng.uniform(4, s - 4));
  cv.place(n, CellClass::NeoplasticEpithelial, [&] {
    const auto& c = centres[cv.rng.below(centres.size())];
    return std::pair{c.first + cfg.cluster_radius * cv.rng.normal(), c.second + cfg.cluster_radius * cv.rng.normal()};
  });
}

// Points on the walls of a jittered Voronoi lattice (alveolar septa).
void lattice(Canvas& cv, std::size_t n, const SynthConfig& cfg, CellClass main, CellClass minor, double minor_share) {
  const double s = cv.side;
  std::vector<std::pair<double, double>> seeds;
  const int cells = std::max(2, static_cast<int>(std::lround(s / cfg.wall_spacing)) + 2);
  for (int i = -1; i < cells; ++i)
    for (int j = -1; j < cells; ++j)
      seeds.emplace_back((j + 0.5 + 0.35 * cv.rng.uniform(-1, 1)) * cfg.wall_spacing,
                         (i + 0.5 + 0.35 * cv.rng.uniform(-1, 1)) * cfg.wall_spacing);
  auto wall_point = [&] {
    for (int k = 0; k < 512; ++k) {
      const double x = cv.rng.uniform(0, s), y = cv.rng.uniform(0, s);
      double d1 = 1e300, d2 = 1e300;
      for (const auto& [sx, sy] : seeds) {
        const double d = std::hypot(x - sx, y - sy);
        if (d < d1) {
          d2 = d1;
          d1 = d;
        } else if (d < d2) {
          d2 = d;
        }
      }
      if (d2 - d1 < 2.0) return std::pair{x, y};
    }
    return std::pair{-1.0, -1.0};
  };
  const auto n_minor = static_cast<std::size_t>(std::lround(static_cast<double>(n) * minor_share));
  cv.place(n - n_minor, main, wall_point);
  cv.place(n_minor, minor, wall_point);
}

}  // namespace

SlideNucleiSet generate_class_tile(PatternClass pattern, const SynthConfig& config, std::size_t tile_index) {
  config.validate();
  SlideNucleiSet set;
  set.slide_id = "synth-" + std::string(to_string(pattern)) + "-" + std::to_string(tile_index);
  set.patient_id = "synth";
  set.source_mpp = config.target_mpp;
  set.width = set.height = config.tile_size;

  Rng rng(derive_seed(config.seed, 0x7115, static_cast<std::uint64_t>(index_of(pattern)), tile_index));
  const double area = static_cast<double>(config.tile_size) * config.tile_size / (256.0 * 256.0);
  const auto lo = static_cast<int>(std::lround(static_cast<double>(config.min_points) * area));
  const auto hi = static_cast<int>(std::lround(static_cast<double>(config.max_points) * area));
  const auto total = static_cast<std::size_t>(rng.range(std::max(lo, 1), std::max(hi, 1)));
  const auto noise = static_cast<std::size_t>(std::lround(static_cast<double>(total) * config.noise_fraction));
  const std::size_t n = total - noise;

  Canvas cv{config.tile_size, rng, set.records};
  switch (pattern) {
    case PatternClass::Solid: solid(cv, n); break;
    case PatternClass::Acinar: acinar(cv, n, config, CellClass::NeoplasticEpithelial); break;
    case PatternClass::Papillary: papillary(cv, n, config); break;
    case PatternClass::Micropapillary: micropapillary(cv, n, config); break;
    case PatternClass::Lepidic:
      lattice(cv, n, config, CellClass::NeoplasticEpithelial, CellClass::NeoplasticEpithelial, 0.0);
      break;
    case PatternClass::Normal:
      // Alternates alveolar walls and bronchial glands.
      if (tile_index % 2 == 0) {
        lattice(cv, n, config, CellClass::NonNeoplasticEpithelial, CellClass::Connective, 0.2);
      } else {
        acinar(cv, n, config, CellClass::NonNeoplasticEpithelial);
      }
      break;
  }
  const double s = config.tile_size;
  for (std::size_t i = 0; i < noise; ++i) {
    const auto cls = kAllCellClasses[rng.below(kCellClassCount)];
    cv.add(rng.uniform(0, s), rng.uniform(0, s), cls);
  }
  return set;
}

SynthCorpus generate_corpus(const SynthConfig& config) {
  config.validate();
  const auto factor = static_cast<std::uint32_t>(std::lround(config.target_mpp / config.source_mpp));
  const std::uint32_t t = config.tile_size;

  std::vector<std::vector<std::pair<PatternClass, std::size_t>>> per_patient(config.patients);
  for (auto pattern : kAllPatterns)
    for (std::size_t k = 0; k < config.tiles_per_class; ++k) per_patient[k % config.patients].emplace_back(pattern, k);

  SynthCorpus corpus;
  for (std::size_t p = 0; p < config.patients; ++p) {
    auto& tiles = per_patient[p];
    if (tiles.empty()) continue;
    Rng rng(derive_seed(config.seed, 0x9A7, p));
    rng.shuffle(std::span(tiles));
    const auto cols = static_cast<std::uint32_t>(std::ceil(std::sqrt(static_cast<double>(tiles.size()))));
    const auto rows = static_cast<std::uint32_t>((tiles.size() + cols - 1) / cols);

    char id[32];
    std::snprintf(id, sizeof id, "P%03zu", p);
    SlideNucleiSet slide;
    slide.patient_id = id;
    slide.slide_id = std::string("S") + (id + 1);
    slide.source_mpp = config.source_mpp;
    slide.width = cols * t * factor;
    slide.height = rows * t * factor;
    SlideAnnotations ann;
    ann.slide_id = slide.slide_id;

    for (std::size_t i = 0; i < tiles.size(); ++i) {
      const auto [pattern, index] = tiles[i];
      const std::uint32_t ox = static_cast<std::uint32_t>(i % cols) * t;
      const std::uint32_t oy = static_cast<std::uint32_t>(i / cols) * t;
      const auto tile = generate_class_tile(pattern, config, index);
      for (const auto& r : tile.records) {
        NucleusRecord src = r;
        src.x = (ox + r.x) * factor + static_cast<double>(rng.below(factor));
        src.y = (oy + r.y) * factor + static_cast<double>(rng.below(factor));
        slide.records.push_back(src);
      }
      const double x0 = ox, y0 = oy, x1 = ox + t, y1 = oy + t;
      ann.regions.push_back({{{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}, pattern});
      corpus.truth.push_back({slide.slide_id, slide.patient_id, ox, oy, t, pattern});
    }
    corpus.slides.push_back(std::move(slide));
    corpus.annotations.push_back(std::move(ann));
  }
  return corpus;
}

void write_corpus(const SynthCorpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "annotations");
  for (const auto& s : corpus.slides) write_nuclei_file(s, dir / (s.slide_id + ".json"));
  for (const auto& a : corpus.annotations) {
    std::ofstream out(dir / "annotations" / (a.slide_id + ".json"), std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write annotations for " + a.slide_id);
    out << serialize_annotations_json(a) << '\n';
  }
  write_manifest(dir / "truth.csv", corpus.truth);
}

}  // namespace cellomaps
