#include "cellomaps/tmb.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "cellomaps/csv.hpp"
#include "cellomaps/error.hpp"
#include "cellomaps/loss.hpp"
#include "cellomaps/rng.hpp"

namespace cellomaps {

TMBLabel tmb_label(double mutations_per_mb) noexcept {
  return mutations_per_mb >= kHighTmbMutationsPerMb ? TMBLabel::High : TMBLabel::Low;
}

std::string_view to_string(TMBLabel label) noexcept { return label == TMBLabel::High ? "High" : "Low"; }

TMBLabel tmb_label_from_string(std::string_view name) {
  if (name == "High" || name == "high") return TMBLabel::High;
  if (name == "Low" || name == "low") return TMBLabel::Low;
  throw Error(ErrorCode::MalformedInput, "TMB label must be High or Low, got '" + std::string(name) + "'");
}

std::vector<TmbRecord> read_tmb_labels(const std::filesystem::path& path) {
  const auto t = csv::read(path);
  const auto patient = t.column("patient_id");
  const auto has = [&](const char* name) { return std::find(t.header.begin(), t.header.end(), name) != t.header.end(); };
  std::vector<TmbRecord> out;
  for (const auto& row : t.rows) {
    TmbRecord r;
    r.patient_id = row[patient];
    if (has("mut_per_mb") && !row[t.column("mut_per_mb")].empty()) {
      r.mutations_per_mb = csv::to_double(row[t.column("mut_per_mb")]);
      r.label = tmb_label(*r.mutations_per_mb);
    } else if (has("label")) {
      r.label = tmb_label_from_string(row[t.column("label")]);
    } else {
      throw Error(ErrorCode::MalformedInput, "TMB CSV needs a mut_per_mb or label column");
    }
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------- tile graph

std::vector<std::vector<std::size_t>> TileGraph::adjacency() const {
  std::vector<std::vector<std::size_t>> adj(nodes.size());
  for (const auto& [a, b] : edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  for (auto& n : adj) std::sort(n.begin(), n.end());
  return adj;
}

TileGraph build_tile_graph(std::vector<GridNode> nodes) {
  TileGraph g;
  std::map<std::pair<std::int64_t, std::int64_t>, std::size_t> index;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (!index.emplace(std::pair{nodes[i].gx, nodes[i].gy}, i).second) {
      throw Error(ErrorCode::DuplicateCoordinate, "two nodes at grid (" + std::to_string(nodes[i].gx) + ", " +
                                                      std::to_string(nodes[i].gy) + ")");
    }
  }
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    // Right and down neighbours only, so each edge is found once.
    for (const auto& [dx, dy] : {std::pair<std::int64_t, std::int64_t>{1, 0}, {0, 1}}) {
      auto it = index.find({nodes[i].gx + dx, nodes[i].gy + dy});
      if (it != index.end()) g.edges.emplace_back(std::min(i, it->second), std::max(i, it->second));
    }
  }
  std::sort(g.edges.begin(), g.edges.end());
  g.nodes = std::move(nodes);
  return g;
}

TileGraph tile_graph_from_predictions(std::span<const PredictionRecord> predictions, std::uint32_t tile_size) {
  if (tile_size == 0) throw Error(ErrorCode::InvalidArgument, "tile size must be positive");
  std::vector<GridNode> nodes;
  nodes.reserve(predictions.size());
  for (const auto& p : predictions) {
    if (p.x % tile_size || p.y % tile_size) throw Error(ErrorCode::OffGridOrigin, "prediction origin off the tile grid");
    nodes.push_back({p.x / tile_size, p.y / tile_size, p.probabilities});
  }
  return build_tile_graph(std::move(nodes));
}

nlohmann::json graph_json(const TileGraph& graph) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : graph.nodes) nodes.push_back({{"gx", n.gx}, {"gy", n.gy}, {"features", n.features}});
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& [a, b] : graph.edges) edges.push_back({a, b});
  return {{"nodes", nodes}, {"edges", edges}};
}

TileGraph graph_from_json(const nlohmann::json& doc) {
  try {
    std::vector<GridNode> nodes;
    for (const auto& n : doc.at("nodes")) {
      nodes.push_back({n.at("gx").get<std::int64_t>(), n.at("gy").get<std::int64_t>(),
                       n.at("features").get<PatternFeatures>()});
    }
    // Edges are a pure function of the coordinates; rebuild rather than trust.
    return build_tile_graph(std::move(nodes));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedInput, e.what());
  }
}

// ---------------------------------------------------------------- shared

namespace {

constexpr std::size_t kTmbClasses = 2;

void init_dense(ParamStore& p, const std::string& weight, const std::string& bias, double bias_value, Rng& rng) {
  const auto& e = p.entry(weight);
  const double sd = std::sqrt(2.0 / static_cast<double>(e.shape[1]));
  for (auto& w : p.view(e)) w = sd * rng.normal();
  for (auto& b : p.view(bias)) b = bias_value;
}

std::size_t label_index(TMBLabel l) { return static_cast<std::size_t>(l); }

void check_labels(std::span<const TMBLabel> labels) {
  const bool has_high = std::find(labels.begin(), labels.end(), TMBLabel::High) != labels.end();
  const bool has_low = std::find(labels.begin(), labels.end(), TMBLabel::Low) != labels.end();
  if (!has_high || !has_low) throw Error(ErrorCode::SingleClassDataset, "training data needs both High and Low examples");
}

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

// Gradient checks use the same floor as the classifier.
constexpr double kRelativeErrorFloor = 1e-7;

}  // namespace

// ---------------------------------------------------------------- MLP

MLPModel MLPModel::create(std::size_t hidden, std::uint64_t seed) {
  if (hidden == 0) throw Error(ErrorCode::InvalidArgument, "hidden width must be positive");
  MLPModel m;
  m.hidden_ = hidden;
  m.params_.add("hidden.weight", {hidden, kPatternCount});
  m.params_.add("hidden.bias", {hidden});
  m.params_.add("out.weight", {kTmbClasses, hidden});
  m.params_.add("out.bias", {kTmbClasses});
  Rng rng(derive_seed(seed, 0x3E1));
  init_dense(m.params_, "hidden.weight", "hidden.bias", 0.01, rng);
  init_dense(m.params_, "out.weight", "out.bias", 0.0, rng);
  return m;
}

namespace {

struct MlpActivations {
  std::vector<double> pre;  // hidden pre-activation
  std::array<double, kTmbClasses> logits{};
};

MlpActivations mlp_forward(const MLPModel& m, const PatternFeatures& x) {
  const auto& p = m.params();
  const auto w1 = p.view("hidden.weight"), b1 = p.view("hidden.bias");
  const auto w2 = p.view("out.weight"), b2 = p.view("out.bias");
  const std::size_t h = m.hidden();
  MlpActivations a;
  a.pre.resize(h);
  for (std::size_t j = 0; j < h; ++j) {
    double s = b1[j];
    for (std::size_t i = 0; i < kPatternCount; ++i) s += w1[j * kPatternCount + i] * x[i];
    a.pre[j] = s;
  }
  for (std::size_t k = 0; k < kTmbClasses; ++k) {
    double s = b2[k];
    for (std::size_t j = 0; j < h; ++j) s += w2[k * h + j] * std::max(0.0, a.pre[j]);
    a.logits[k] = s;
  }
  return a;
}

}  // namespace

std::array<double, 2> MLPModel::probabilities(const PatternFeatures& x) const {
  auto z = mlp_forward(*this, x).logits;
  softmax(z);
  return z;
}

TMBLabel MLPModel::predict(const PatternFeatures& x) const {
  const auto p = probabilities(x);
  return p[1] > p[0] ? TMBLabel::High : TMBLabel::Low;
}

nlohmann::json MLPModel::to_json() const {
  return {{"format", "cellomaps-tmb-mlp"}, {"version", 1}, {"hidden", hidden_}, {"parameters", params_.to_json()}};
}

MLPModel MLPModel::from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("format").get<std::string>() != "cellomaps-tmb-mlp") {
      throw Error(ErrorCode::MalformedInput, "not an MLP checkpoint");
    }
    MLPModel m = create(doc.at("hidden").get<std::size_t>(), 0);
    m.params_.load_json(doc.at("parameters"));
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedInput, e.what());
  }
}

double mlp_loss_and_gradient(const MLPModel& model, std::span<const PatternFeatures> features,
                             std::span<const TMBLabel> labels, std::vector<double>* grad) {
  if (features.size() != labels.size()) throw Error(ErrorCode::LengthMismatch, "features and labels differ in length");
  if (features.empty()) throw Error(ErrorCode::EmptyDataset, "no examples");
  const auto& p = model.params();
  const std::size_t h = model.hidden();
  const auto w2 = p.view("out.weight");
  const auto o_w1 = p.entry("hidden.weight").offset, o_b1 = p.entry("hidden.bias").offset;
  const auto o_w2 = p.entry("out.weight").offset, o_b2 = p.entry("out.bias").offset;
  if (grad) grad->assign(p.size(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(features.size());
  double total = 0.0;
  for (std::size_t n = 0; n < features.size(); ++n) {
    const auto a = mlp_forward(model, features[n]);
    std::array<double, kTmbClasses> dz{};
    total += cross_entropy_logits(a.logits, label_index(labels[n]), dz);
    if (!grad) continue;
    auto& g = *grad;
    for (std::size_t k = 0; k < kTmbClasses; ++k) {
      const double d = dz[k] * inv_n;
      g[o_b2 + k] += d;
      for (std::size_t j = 0; j < h; ++j) g[o_w2 + k * h + j] += d * std::max(0.0, a.pre[j]);
    }
    for (std::size_t j = 0; j < h; ++j) {
      if (a.pre[j] <= 0.0) continue;
      double d = 0.0;
      for (std::size_t k = 0; k < kTmbClasses; ++k) d += dz[k] * w2[k * h + j];
      d *= inv_n;
      g[o_b1 + j] += d;
      for (std::size_t i = 0; i < kPatternCount; ++i) g[o_w1 + j * kPatternCount + i] += d * features[n][i];
    }
  }
  return total * inv_n;
}

MlpTrainResult train_mlp(std::span<const PatternFeatures> features, std::span<const TMBLabel> labels,
                         const MlpConfig& config) {
  if (features.size() != labels.size()) throw Error(ErrorCode::LengthMismatch, "features and labels differ in length");
  if (features.size() < 2) throw Error(ErrorCode::EmptyDataset, "need at least two examples");
  check_labels(labels);
  MlpTrainResult r{MLPModel::create(config.hidden, config.seed), {}, 0.0, 0};
  Adam adam(r.model.params().size(), AdamConfig{.learning_rate = config.learning_rate});
  std::vector<double> grad;
  auto accuracy = [&] {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < features.size(); ++i) correct += r.model.predict(features[i]) == labels[i];
    return static_cast<double>(correct) / static_cast<double>(features.size());
  };
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    r.loss_curve.push_back(mlp_loss_and_gradient(r.model, features, labels, &grad));
    adam.step(r.model.params().values(), grad);
    if (r.epochs_to_perfect == 0 && accuracy() == 1.0) r.epochs_to_perfect = epoch;
  }
  r.train_accuracy = accuracy();
  return r;
}

double mlp_gradient_check(const MLPModel& model, std::span<const PatternFeatures> features,
                          std::span<const TMBLabel> labels, double epsilon) {
  std::vector<double> analytic;
  mlp_loss_and_gradient(model, features, labels, &analytic);
  MLPModel probe = model;
  const auto idx = all_indices(model.params().size());
  const auto numeric = central_differences(probe.params().values(), idx, epsilon, [&] {
    return mlp_loss_and_gradient(probe, features, labels, nullptr);
  });
  return max_relative_error(analytic, numeric, kRelativeErrorFloor);
}

// ---------------------------------------------------------------- GNN

GNNModel GNNModel::create(std::size_t hidden, std::uint64_t seed) {
  if (hidden == 0) throw Error(ErrorCode::InvalidArgument, "hidden width must be positive");
  GNNModel m;
  m.hidden_ = hidden;
  m.params_.add("message.weight", {hidden, 2 * kPatternCount});
  m.params_.add("message.bias", {hidden});
  m.params_.add("out.weight", {kTmbClasses, hidden});
  m.params_.add("out.bias", {kTmbClasses});
  Rng rng(derive_seed(seed, 0x6E1));
  init_dense(m.params_, "message.weight", "message.bias", 0.01, rng);
  init_dense(m.params_, "out.weight", "out.bias", 0.0, rng);
  return m;
}

nlohmann::json GNNModel::to_json() const {
  return {{"format", "cellomaps-tmb-gnn"}, {"version", 1}, {"hidden", hidden_}, {"parameters", params_.to_json()}};
}

GNNModel GNNModel::from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("format").get<std::string>() != "cellomaps-tmb-gnn") {
      throw Error(ErrorCode::MalformedInput, "not a GNN checkpoint");
    }
    GNNModel m = create(doc.at("hidden").get<std::size_t>(), 0);
    m.params_.load_json(doc.at("parameters"));
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedInput, e.what());
  }
}

namespace {

struct GnnActivations {
  std::vector<std::array<double, 2 * kPatternCount>> inputs;  // [self ; neighbour mean], canonical order
  std::vector<std::vector<double>> pre;
  std::vector<double> pooled;
  std::array<double, kTmbClasses> logits{};
};

GnnActivations gnn_run(const GNNModel& model, const TileGraph& graph) {
  if (graph.nodes.empty()) throw Error(ErrorCode::EmptyGraph, "graph has no nodes");
  const std::size_t n = graph.nodes.size(), h = model.hidden();
  std::vector<std::size_t> order = all_indices(n);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& na = graph.nodes[a];
    const auto& nb = graph.nodes[b];
    return std::pair{na.gy, na.gx} < std::pair{nb.gy, nb.gx};
  });
  std::vector<std::size_t> rank(n);
  for (std::size_t r = 0; r < n; ++r) rank[order[r]] = r;
  auto adj = graph.adjacency();
  for (auto& nb : adj) std::sort(nb.begin(), nb.end(), [&](std::size_t a, std::size_t b) { return rank[a] < rank[b]; });

  const auto& p = model.params();
  const auto w = p.view("message.weight"), b = p.view("message.bias");
  const auto wo = p.view("out.weight"), bo = p.view("out.bias");

  GnnActivations a;
  a.inputs.resize(n);
  a.pre.assign(n, std::vector<double>(h));
  a.pooled.assign(h, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t i = order[r];
    auto& in = a.inputs[r];
    const auto& self = graph.nodes[i].features;
    std::copy(self.begin(), self.end(), in.begin());
    if (adj[i].empty()) {
      std::copy(self.begin(), self.end(), in.begin() + kPatternCount);
    } else {
      for (std::size_t f = 0; f < kPatternCount; ++f) {
        double s = 0.0;
        for (auto j : adj[i]) s += graph.nodes[j].features[f];
        in[kPatternCount + f] = s / static_cast<double>(adj[i].size());
      }
    }
    for (std::size_t k = 0; k < h; ++k) {
      double s = b[k];
      for (std::size_t f = 0; f < 2 * kPatternCount; ++f) s += w[k * 2 * kPatternCount + f] * in[f];
      a.pre[r][k] = s;
    }
  }
  for (std::size_t k = 0; k < h; ++k) {
    double s = 0.0;
    for (std::size_t r = 0; r < n; ++r) s += std::max(0.0, a.pre[r][k]);
    a.pooled[k] = s / static_cast<double>(n);
  }
  for (std::size_t c = 0; c < kTmbClasses; ++c) {
    double s = bo[c];
    for (std::size_t k = 0; k < h; ++k) s += wo[c * h + k] * a.pooled[k];
    a.logits[c] = s;
  }
  return a;
}

}  // namespace

std::array<double, 2> gnn_forward(const GNNModel& model, const TileGraph& graph) {
  auto z = gnn_run(model, graph).logits;
  softmax(z);
  return z;
}

double gnn_loss_and_gradient(const GNNModel& model, const TileGraph& graph, TMBLabel label, std::vector<double>* grad) {
  const auto a = gnn_run(model, graph);
  std::array<double, kTmbClasses> dz{};
  const double loss = cross_entropy_logits(a.logits, label_index(label), dz);
  if (!grad) return loss;
  const auto& p = model.params();
  const std::size_t h = model.hidden(), n = a.inputs.size();
  const auto wo = p.view("out.weight");
  const auto o_w = p.entry("message.weight").offset, o_b = p.entry("message.bias").offset;
  const auto o_wo = p.entry("out.weight").offset, o_bo = p.entry("out.bias").offset;
  auto& g = *grad;
  g.assign(p.size(), 0.0);
  std::vector<double> dpooled(h, 0.0);
  for (std::size_t c = 0; c < kTmbClasses; ++c) {
    g[o_bo + c] = dz[c];
    for (std::size_t k = 0; k < h; ++k) {
      g[o_wo + c * h + k] = dz[c] * a.pooled[k];
      dpooled[k] += dz[c] * wo[c * h + k];
    }
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t k = 0; k < h; ++k) {
      if (a.pre[r][k] <= 0.0) continue;
      const double d = dpooled[k] * inv_n;
      g[o_b + k] += d;
      for (std::size_t f = 0; f < 2 * kPatternCount; ++f) g[o_w + k * 2 * kPatternCount + f] += d * a.inputs[r][f];
    }
  }
  return loss;
}

double gnn_gradient_check(const GNNModel& model, const TileGraph& graph, TMBLabel label, double epsilon) {
  std::vector<double> analytic;
  gnn_loss_and_gradient(model, graph, label, &analytic);
  GNNModel probe = model;
  const auto idx = all_indices(model.params().size());
  const auto numeric = central_differences(probe.params().values(), idx, epsilon,
                                           [&] { return gnn_loss_and_gradient(probe, graph, label, nullptr); });
  return max_relative_error(analytic, numeric, kRelativeErrorFloor);
}

GnnTrainResult train_gnn(std::span<const TileGraph> graphs, std::span<const TMBLabel> labels, const MlpConfig& config) {
  if (graphs.size() != labels.size()) throw Error(ErrorCode::LengthMismatch, "graphs and labels differ in length");
  if (graphs.size() < 2) throw Error(ErrorCode::EmptyDataset, "need at least two graphs");
  check_labels(labels);
  GnnTrainResult r{GNNModel::create(config.hidden, config.seed), {}, 0.0};
  Adam adam(r.model.params().size(), AdamConfig{.learning_rate = config.learning_rate});
  std::vector<double> grad(r.model.params().size()), one;
  const double inv = 1.0 / static_cast<double>(graphs.size());
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double loss = 0.0;
    for (std::size_t i = 0; i < graphs.size(); ++i) {
      loss += gnn_loss_and_gradient(r.model, graphs[i], labels[i], &one);
      for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += one[k] * inv;
    }
    r.loss_curve.push_back(loss * inv);
    adam.step(r.model.params().values(), grad);
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    const auto p = gnn_forward(r.model, graphs[i]);
    correct += (p[1] > p[0] ? TMBLabel::High : TMBLabel::Low) == labels[i];
  }
  r.train_accuracy = static_cast<double>(correct) / static_cast<double>(graphs.size());
  return r;
}

}  // namespace cellomaps
