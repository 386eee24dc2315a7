// Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>

#include "cellomaps/cellomap.hpp"
#include "cellomaps/classifier.hpp"
#include "cellomaps/dataset.hpp"
#include "cellomaps/error.hpp"
#include "cellomaps/eval.hpp"
#include "cellomaps/loss.hpp"
#include "cellomaps/synth.hpp"
#include "cellomaps/tmb.hpp"
#include "test_util.hpp"

using namespace cellomaps;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::string detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

int failures = 0;

void report(int id, const char* name, const std::function<Outcome()>& body) {
  const auto t0 = Clock::now();
  Outcome out;
  try {
    out = body();
  } catch (const std::exception& e) {
    out.pass = false;
    out.detail = std::string("exception: ") + e.what();
  }
  if (!out.pass) ++failures;
  std::printf("[%s] criterion %d: %s (%.1f s)%s%s\n", out.pass ? "PASS" : "FAIL", id, name, seconds_since(t0),
              out.detail.empty() ? "" : " | ", out.detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, double v) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

BitPlane front_oracle(const BitPlane& in) {
  const int w = int(in.width()), h = int(in.height());
  BitPlane out(in.width() / 2, in.height() / 2);
  for (int y = 0; y < h / 2; ++y)
    for (int x = 0; x < w / 2; ++x) {
      bool any = false;
      for (int py = 2 * y; py < 2 * y + 2; ++py)
        for (int px = 2 * x; px < 2 * x + 2; ++px)
          for (int dy = -2; dy <= 2; ++dy)
            for (int dx = -2; dx <= 2; ++dx) {
              const int xx = px + dx, yy = py + dy;
              if (xx >= 0 && yy >= 0 && xx < w && yy < h && in.get(std::uint32_t(xx), std::uint32_t(yy))) any = true;
            }
      if (any) out.set(std::uint32_t(x), std::uint32_t(y));
    }
  return out;
}

Outcome codec() {
  Outcome o;
  const auto t0 = Clock::now();
  Rng rng(1);
  int mismatches = 0, size_errors = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto w = std::uint32_t(rng.range(1, 200));
    const auto h = std::uint32_t(rng.range(1, 200));
    const auto c = std::size_t(rng.range(1, 5));
    const auto m = testutil::random_map(rng, w, h, c, rng.uniform(0.0, 0.3));
    const auto bytes = encode(m);
    size_errors += bytes.size() != clom_header_bytes(c) + c * h * ((w + 7) / 8);
    mismatches += !(decode(bytes) == m);
  }
  const double secs = seconds_since(t0);
  o.require(mismatches == 0, std::to_string(mismatches) + " round-trip mismatches");
  o.require(size_errors == 0, std::to_string(size_errors) + " size mismatches");
  o.require(secs < 10.0, fmt("runtime %.2f s", secs));
  o.detail += (o.detail.empty() ? "" : "; ") + fmt("1000 maps in %.2f s", secs);
  return o;
}

Outcome dilation() {
  Outcome o;
  Rng rng(2);
  int bad = 0;
  for (int i = 0; i < 100; ++i) {
    const auto in = testutil::random_plane(rng, 64, 64, rng.uniform(0.0, 0.08));
    bad += !(dilate_front(in) == front_oracle(in));
  }
  o.require(bad == 0, std::to_string(bad) + " of 100 differ");
  return o;
}

Outcome focal() {
  Outcome o;
  Rng rng(3);
  double worst = 0.0;
  int dominance = 0;
  for (int i = 0; i < 10000; ++i) {
    const std::size_t k = 2 + rng.below(6);
    std::vector<double> p(k);
    double s = 0;
    for (auto& v : p) s += v = rng.uniform(1e-4, 1.0);
    for (auto& v : p) v /= s;
    const std::size_t t = rng.below(k);
    const double fl0 = focal_loss(p, t, {0.0, {}}).loss;
    worst = std::max(worst, std::abs(fl0 - -std::log(p[t])));
    dominance += focal_loss(p, t, {0.7, {}}).loss > fl0;
  }
  o.require(worst <= 1e-12, fmt("max |FL0 - CE| = %.3g", worst));
  o.require(dominance == 0, std::to_string(dominance) + " cases with FL(0.7) > FL(0)");
  o.detail += (o.detail.empty() ? "" : "; ") + fmt("max |FL0 - CE| = %.2g", worst);
  return o;
}

Outcome gradients() {
  Outcome o;
  Rng rng(4);
  double full = 0, head = 0, mlp = 0, gnn = 0;
  for (int trial = 0; trial < 3; ++trial) {
    ClassifierConfig cfg;
    cfg.tile_size = 16;
    auto model = ClassifierModel::create(cfg, 100 + trial);
    for (auto& v : model.params().values()) v += 0.05 * rng.normal();
    Tile tile;
    tile.size = 16;
    for (int c = 0; c < 3; ++c) tile.planes.push_back(testutil::random_plane(rng, 16, 16, 0.08));
    full = std::max(full, gradient_check(model, tile, std::size_t(trial), 1e-5));

    ClassifierConfig big;
    big.tile_size = 64;
    const auto m64 = ClassifierModel::create(big, 200 + trial);
    Tile t64;
    t64.size = 64;
    for (int c = 0; c < 3; ++c) t64.planes.push_back(testutil::random_plane(rng, 64, 64, 0.02));
    // A 1e-5 step is roundoff-dominated for the head weights.
    head = std::max(head, gradient_check(m64, t64, std::size_t(trial + 2), 1e-4, {}, GradientScope::HeadOnly));

    std::vector<PatternFeatures> xs;
    std::vector<TMBLabel> ys;
    for (int i = 0; i < 8; ++i) {
      PatternFeatures f{};
      for (auto& v : f) v = rng.uniform();
      xs.push_back(f);
      ys.push_back(i % 2 ? TMBLabel::High : TMBLabel::Low);
    }
    mlp = std::max(mlp, mlp_gradient_check(MLPModel::create(8, 300 + trial), xs, ys, 1e-5));

    std::vector<GridNode> nodes;
    std::set<std::pair<int, int>> used;
    while (nodes.size() < 15) {
      const int x = rng.range(0, 5), y = rng.range(0, 5);
      if (used.insert({x, y}).second) nodes.push_back({x, y, xs[nodes.size() % xs.size()]});
    }
    gnn = std::max(gnn, gnn_gradient_check(GNNModel::create(8, 400 + trial), build_tile_graph(nodes),
                                           TMBLabel::High, 1e-5));
  }
  o.require(full < 1e-4, fmt("classifier %.3g", full));
  o.require(mlp < 1e-4, fmt("MLP %.3g", mlp));
  o.require(gnn < 1e-4, fmt("GNN %.3g", gnn));
  o.require(head < 1e-6, fmt("linear head %.3g", head));
  char buf[160];
  std::snprintf(buf, sizeof buf, "max rel err: classifier %.2g, MLP %.2g, GNN %.2g, linear head %.2g", full, mlp, gnn,
                head);
  o.detail += (o.detail.empty() ? "" : "; ") + std::string(buf);
  return o;
}

Outcome metrics() {
  Outcome o;
  Rng rng(5);
  double worst = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(60);
    std::vector<double> s(n);
    std::unique_ptr<bool[]> pos(new bool[n]);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = rng.bernoulli(0.5) ? double(rng.below(5)) / 4.0 : rng.uniform();
      pos[i] = rng.bernoulli(0.5);
    }
    pos[0] = true;
    pos[1] = false;
    double num = 0, pairs = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (pos[i] && !pos[j]) {
          pairs += 1;
          num += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
        }
    worst = std::max(worst, std::abs(rank_auc(s, std::span<const bool>(pos.get(), n)) - num / pairs));
  }
  o.require(worst <= 1e-12, fmt("max AUC deviation %.3g", worst));

  std::vector<PredictionRecord> preds;
  std::vector<PatternClass> truths;
  for (std::uint32_t i = 0; i < 60; ++i) {
    std::array<double, kPatternCount> p{};
    p.fill(0.04);
    p[i % 6] = 0.8;
    preds.push_back(make_prediction("s", i, 0, p));
    truths.push_back(kAllPatterns[i % 6]);
  }
  const auto r = compute_metrics(preds, truths);
  o.require(r.accuracy == 1.0 && r.macro_f1 == 1.0 && r.macro_auc_roc == 1.0, "perfect case is not 1/1/1");
  o.detail += (o.detail.empty() ? "" : "; ") + fmt("max AUC deviation %.2g", worst);
  return o;
}

Outcome splitting() {
  Outcome o;
  Rng rng(6);
  int leaks = 0, nondeterministic = 0, failed = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t patients = 3 + rng.below(14);
    const std::size_t tiles = 30 + rng.below(150);
    std::vector<ManifestEntry> m;
    for (std::size_t i = 0; i < tiles; ++i) {
      const auto p = rng.below(patients);
      m.push_back({"S" + std::to_string(p), "P" + std::to_string(p), std::uint32_t(i * 448), 0, 448,
                   kAllPatterns[rng.below(kPatternCount)]});
    }
    SplitOptions opt;
    opt.test_patient_count = 1 + rng.below(std::min<std::size_t>(patients - 1, 4));
    opt.seed = rng.next();
    SplitPlan plan;
    try {
      plan = make_split(m, opt);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::StratificationFailed) throw;
      ++failed;
      continue;
    }
    nondeterministic += !(plan == make_split(m, opt));
    std::map<std::string, std::string> patient_of;
    for (const auto& e : m) patient_of[e.tile_id()] = e.patient_id;
    std::set<std::string> held_out;
    for (const auto& id : plan.test) held_out.insert(patient_of[id]);
    for (const auto* part : {&plan.train, &plan.val})
      for (const auto& id : *part) leaks += held_out.count(patient_of[id]) > 0;
  }
  o.require(leaks == 0, std::to_string(leaks) + " tiles leak across the test boundary");
  o.require(nondeterministic == 0, std::to_string(nondeterministic) + " plans differ under the same seed");
  o.detail += (o.detail.empty() ? "" : "; ") + std::to_string(500 - failed) + " plans checked, " +
              std::to_string(failed) + " unstratifiable manifests rejected";
  return o;
}

struct Corpus {
  SynthConfig config;
  std::vector<CellOMap> maps;
  std::vector<LabeledTile> tiles;
};

Corpus build_corpus() {
  Corpus c;
  c.config.seed = 7;
  c.config.tiles_per_class = 60;
  const auto synth = generate_corpus(c.config);
  for (std::size_t s = 0; s < synth.slides.size(); ++s) {
    c.maps.push_back(build_cellomap(scale_coordinates(synth.slides[s], c.config.target_mpp), ChannelSpec()));
    auto t = tile_and_label(c.maps.back(), synth.annotations[s].regions, c.config.tile_size, c.config.tile_size,
                            kDefaultMinOverlap, default_min_nuclei(c.config.tile_size));
    c.tiles.insert(c.tiles.end(), t.begin(), t.end());
  }
  return c;
}

Outcome entropy(const Corpus& corpus) {
  Outcome o;
  const std::vector<std::uint16_t> zeros(448 * 448, 0);
  const double zero_bits = shannon_entropy(zeros, 8).bits_per_pixel;
  std::vector<std::uint16_t> uniform(448 * 448);
  for (std::size_t i = 0; i < uniform.size(); ++i) uniform[i] = std::uint16_t(i % 8);
  const double uniform_bits = shannon_entropy(uniform, 8).bits_per_pixel;
  double sum = 0;
  for (const auto& t : corpus.tiles) sum += shannon_entropy(composite_symbols(t.planes), 8).bits_per_pixel;
  const double mean = sum / double(corpus.tiles.size());
  o.require(zero_bits == 0.0, fmt("zero tile %.3g bits", zero_bits));
  o.require(std::abs(uniform_bits - 3.0) <= 1e-9, fmt("uniform tile %.12f bits", uniform_bits));
  o.require(mean < 1.5, fmt("corpus mean %.3f bits", mean));
  o.detail += (o.detail.empty() ? "" : "; ") + fmt("corpus mean composite entropy %.3f bits/pixel", mean) + " over " +
              std::to_string(corpus.tiles.size()) + " tiles";
  return o;
}

Outcome end_to_end(const Corpus& corpus) {
  Outcome o;
  const auto t0 = Clock::now();
  std::vector<ManifestEntry> manifest;
  for (const auto& t : corpus.tiles) manifest.push_back(manifest_entry(t));
  SplitOptions split;
  split.test_patient_count = 2;
  split.seed = 1;
  const auto plan = make_split(manifest, split);
  std::map<std::string, const LabeledTile*> by_id;
  for (const auto& t : corpus.tiles) by_id[manifest_entry(t).tile_id()] = &t;
  auto gather = [&](const std::vector<std::string>& ids) {
    std::vector<LabeledTile> out;
    for (const auto& id : ids) out.push_back(*by_id.at(id));
    return out;
  };
  const auto train_set = gather(plan.train), val_set = gather(plan.val), test_set = gather(plan.test);

  TrainConfig tc;
  tc.epochs = 30;
  tc.seed = 11;
  auto run = [&](bool merged) {
    ClassifierConfig mc;
    mc.tile_size = corpus.config.tile_size;
    mc.merge_channels = merged;
    const auto result = train(ClassifierModel::create(mc, 5), train_set, val_set, tc);
    const auto preds = predict_all(result.model, test_set);
    std::vector<PatternClass> truths;
    for (const auto& t : test_set) truths.push_back(t.label);
    return compute_metrics(preds, truths).macro_f1;
  };
  const double f1 = run(false);
  const double f1_merged = run(true);
  const double secs = seconds_since(t0);
  o.require(corpus.tiles.size() == 360, std::to_string(corpus.tiles.size()) + " tiles");
  o.require(f1 >= 0.85, fmt("3-channel macro-F1 %.3f", f1));
  o.require(f1 - f1_merged >= 0.15, fmt("ablation gap %.3f", f1 - f1_merged));
  o.require(secs < 600.0, fmt("runtime %.0f s", secs));
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "%zu tiles, test %zu tiles from 2 patients, 3-channel macro-F1 %.3f, single-channel %.3f, gap %.3f, "
                "%.0f s",
                corpus.tiles.size(), test_set.size(), f1, f1_merged, f1 - f1_merged, secs);
  o.detail += (o.detail.empty() ? "" : "; ") + std::string(buf);
  return o;
}

Outcome tile_graph() {
  Outcome o;
  Rng rng(9);
  int wrong = 0, degree = 0, variant = 0;
  const auto model = GNNModel::create(16, 9);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<GridNode> nodes;
    std::set<std::pair<int, int>> used;
    const std::size_t n = 1 + rng.below(60);
    const int extent = rng.range(2, 15);
    while (nodes.size() < n && used.size() < std::size_t((extent + 1) * (extent + 1))) {
      const int x = rng.range(0, extent), y = rng.range(0, extent);
      if (!used.insert({x, y}).second) continue;
      PatternFeatures f{};
      for (auto& v : f) v = rng.uniform();
      nodes.push_back({x, y, f});
    }
    const auto g = build_tile_graph(nodes);
    std::set<std::pair<std::size_t, std::size_t>> oracle;
    for (std::size_t i = 0; i < nodes.size(); ++i)
      for (std::size_t j = i + 1; j < nodes.size(); ++j)
        if (std::abs(nodes[i].gx - nodes[j].gx) + std::abs(nodes[i].gy - nodes[j].gy) == 1) oracle.insert({i, j});
    wrong += std::set(g.edges.begin(), g.edges.end()) != oracle || g.edges.size() != oracle.size();
    for (const auto& nb : g.adjacency()) degree += nb.size() > 4;
    const auto a = gnn_forward(model, g);
    rng.shuffle(std::span(nodes));
    const auto b = gnn_forward(model, build_tile_graph(nodes));
    variant += a != b;
  }
  o.require(wrong == 0, std::to_string(wrong) + " graphs differ from the oracle");
  o.require(degree == 0, std::to_string(degree) + " nodes over degree 4");
  o.require(variant == 0, std::to_string(variant) + " GNN outputs change under permutation");
  return o;
}

Outcome tmb_toy() {
  Outcome o;
  Rng rng(10);
  std::vector<PatternFeatures> xs;
  std::vector<TMBLabel> ys;
  for (int i = 0; i < 60; ++i) {
    const bool high = i % 2 == 0;
    PatternFeatures f{};
    for (auto& v : f) v = rng.uniform();
    // Solid plus micropapillary dominate the High slides.
    const double boost = high ? rng.uniform(3.0, 6.0) : 0.0;
    f[index_of(PatternClass::Micropapillary)] += boost;
    f[index_of(PatternClass::Solid)] += boost;
    double s = 0;
    for (double v : f) s += v;
    for (auto& v : f) v /= s;
    xs.push_back(f);
    ys.push_back(high ? TMBLabel::High : TMBLabel::Low);
  }
  MlpConfig cfg;
  cfg.epochs = 200;
  cfg.seed = 21;
  const auto a = train_mlp(xs, ys, cfg);
  const auto b = train_mlp(xs, ys, cfg);
  o.require(a.train_accuracy == 1.0, fmt("training accuracy %.3f", a.train_accuracy));
  o.require(a.epochs_to_perfect >= 1 && a.epochs_to_perfect <= 200, "never reached accuracy 1");
  o.require(a.model == b.model && a.loss_curve == b.loss_curve, "same seed gives different models");
  o.detail += (o.detail.empty() ? "" : "; ") + std::string("accuracy 1.0 first reached at epoch ") +
              std::to_string(a.epochs_to_perfect);
  return o;
}

}  // namespace

int main() {
  report(1, "codec round trip and payload size", codec);
  report(2, "dilation front equals brute-force oracle", dilation);
  report(3, "focal loss reduces to cross-entropy and is dominated by it", focal);
  report(4, "analytic gradients match finite differences", gradients);
  report(5, "rank AUC equals pair counting; perfect case", metrics);
  report(6, "patient-level splits are disjoint and deterministic", splitting);
  std::unique_ptr<Corpus> corpus;
  const auto t0 = Clock::now();
  try {
    corpus = std::make_unique<Corpus>(build_corpus());
    std::printf("synthetic corpus: %zu labelled tiles in %.1f s\n", corpus->tiles.size(), seconds_since(t0));
  } catch (const std::exception& e) {
    std::printf("synthetic corpus failed: %s\n", e.what());
  }
  report(7, "entropy base cases and corpus mean below 1.5 bits", [&] {
    if (!corpus) throw std::runtime_error("no corpus");
    return entropy(*corpus);
  });
  report(8, "end-to-end synthetic classification and single-channel ablation", [&] {
    if (!corpus) throw std::runtime_error("no corpus");
    return end_to_end(*corpus);
  });
  report(9, "tile graph adjacency and GNN permutation invariance", tile_graph);
  report(10, "TMB toy MLP separates within 200 epochs", tmb_toy);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
