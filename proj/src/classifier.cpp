#include "cellomaps/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>

#include "cellomaps/csv.hpp"
#include "cellomaps/error.hpp"
#include "cellomaps/eval.hpp"
#include "cellomaps/format.hpp"
#include "cellomaps/parallel.hpp"
#include "cellomaps/rng.hpp"

namespace cellomaps {

// ---------------------------------------------------------------- front layer

BitPlane dilate_front(const BitPlane& channel) {
  const std::uint32_t side = channel.width();
  if (channel.height() != side) throw Error(ErrorCode::ShapeMismatch, "front layer expects square tiles");
  if (side % 2 != 0) throw Error(ErrorCode::OddTileSide, "tile side " + std::to_string(side) + " is odd");
  const std::size_t n = side;
  constexpr std::size_t r = kFrontKernel / 2;

  std::vector<std::uint8_t> in(n * n), horiz(n * n, 0), dil(n * n, 0);
  for (std::uint32_t y = 0; y < side; ++y)
    for (std::uint32_t x = 0; x < side; ++x) in[y * n + x] = channel.get(x, y);

  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t x = 0; x < n; ++x) {
      if (!in[y * n + x]) continue;
      const std::size_t lo = x >= r ? x - r : 0, hi = std::min(n - 1, x + r);
      for (std::size_t k = lo; k <= hi; ++k) horiz[y * n + k] = 1;
    }
  for (std::size_t y = 0; y < n; ++y) {
    const std::size_t lo = y >= r ? y - r : 0, hi = std::min(n - 1, y + r);
    for (std::size_t k = lo; k <= hi; ++k)
      for (std::size_t x = 0; x < n; ++x) dil[y * n + x] |= horiz[k * n + x];
  }

  const std::uint32_t half = side / 2;
  BitPlane out(half, half);
  for (std::uint32_t i = 0; i < half; ++i)
    for (std::uint32_t j = 0; j < half; ++j) {
      const std::size_t y = 2 * std::size_t{i}, x = 2 * std::size_t{j};
      if (dil[y * n + x] | dil[y * n + x + 1] | dil[(y + 1) * n + x] | dil[(y + 1) * n + x + 1]) out.set(j, i);
    }
  return out;
}

std::vector<BitPlane> dilate_front(std::span<const BitPlane> channels) {
  std::vector<BitPlane> out;
  out.reserve(channels.size());
  for (const auto& c : channels) out.push_back(dilate_front(c));
  return out;
}

BitPlane merge_planes(std::span<const BitPlane> channels) {
  if (channels.empty()) throw Error(ErrorCode::ShapeMismatch, "no channels to merge");
  BitPlane out = channels[0];
  for (std::size_t c = 1; c < channels.size(); ++c) out = bitwise_or(out, channels[c]);
  return out;
}

// ---------------------------------------------------------------- model

void ClassifierConfig::validate() const {
  if (tile_size == 0 || tile_size % 8 != 0) {
    throw Error(ErrorCode::ShapeMismatch, "classifier tile size must be a positive multiple of 8");
  }
  if (map_channels < 1 || map_channels > kCellClassCount) {
    throw Error(ErrorCode::InvalidArgument, "classifier needs 1 to 5 input channels");
  }
}

namespace {

const char* kConvWeight[] = {"conv1.weight", "conv2.weight", "conv3.weight"};
const char* kConvBias[] = {"conv1.bias", "conv2.bias", "conv3.bias"};

ParamStore make_layout(const ClassifierConfig& config) {
  ParamStore p;
  std::size_t in = config.network_channels();
  for (std::size_t l = 0; l < kConvWidths.size(); ++l) {
    p.add(kConvWeight[l], {kConvWidths[l], in, 3, 3});
    p.add(kConvBias[l], {kConvWidths[l]});
    in = kConvWidths[l];
  }
  p.add("head.weight", {kPatternCount, kConvWidths.back()});
  p.add("head.bias", {kPatternCount});
  return p;
}

}  // namespace

ClassifierModel ClassifierModel::create(const ClassifierConfig& config, std::uint64_t seed) {
  config.validate();
  ClassifierModel m;
  m.config_ = config;
  m.params_ = make_layout(config);
  Rng rng(derive_seed(seed, 0xC1A55));
  std::size_t in = config.network_channels();
  for (std::size_t l = 0; l < kConvWidths.size(); ++l) {
    const double sd = std::sqrt(2.0 / static_cast<double>(in * 9));
    for (auto& w : m.params_.view(kConvWeight[l])) w = sd * rng.normal();
    for (auto& b : m.params_.view(kConvBias[l])) b = 0.01;
    in = kConvWidths[l];
  }
  const double sd = std::sqrt(1.0 / static_cast<double>(kConvWidths.back()));
  for (auto& w : m.params_.view("head.weight")) w = sd * rng.normal();
  return m;
}

void ClassifierModel::zero_head() {
  for (auto& w : params_.view("head.weight")) w = 0.0;
  for (auto& b : params_.view("head.bias")) b = 0.0;
}

std::vector<std::size_t> ClassifierModel::head_indices() const {
  std::vector<std::size_t> idx;
  for (const char* name : {"head.weight", "head.bias"}) {
    const auto& e = params_.entry(name);
    for (std::size_t i = 0; i < e.size; ++i) idx.push_back(e.offset + i);
  }
  return idx;
}

nlohmann::json ClassifierModel::to_json() const {
  return {{"format", "cellomaps-classifier"},
          {"version", 1},
          {"config",
           {{"tile_size", config_.tile_size},
            {"map_channels", config_.map_channels},
            {"merge_channels", config_.merge_channels}}},
          {"parameters", params_.to_json()}};
}

ClassifierModel ClassifierModel::from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("format").get<std::string>() != "cellomaps-classifier") {
      throw Error(ErrorCode::MalformedInput, "not a classifier checkpoint");
    }
    if (doc.at("version").get<int>() != 1) throw Error(ErrorCode::UnsupportedVersion, "checkpoint version");
    ClassifierConfig cfg;
    const auto& c = doc.at("config");
    cfg.tile_size = c.at("tile_size").get<std::uint32_t>();
    cfg.map_channels = c.at("map_channels").get<std::size_t>();
    cfg.merge_channels = c.at("merge_channels").get<bool>();
    cfg.validate();
    ClassifierModel m;
    m.config_ = cfg;
    m.params_ = make_layout(cfg);
    m.params_.load_json(doc.at("parameters"));
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedInput, e.what());
  }
}

void ClassifierModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << to_json().dump() << '\n';
}

ClassifierModel ClassifierModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::MalformedInput, path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------- network

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const RowMat>;

// Rows ordered (channel, ky, kx) to match the weight layout [out, in, 3, 3].
void im2col(const RowMat& in, std::size_t side, RowMat& cols) {
  const std::size_t channels = static_cast<std::size_t>(in.rows());
  const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(side);
  cols.resize(static_cast<Eigen::Index>(channels * 9), static_cast<Eigen::Index>(side * side));
  for (std::size_t c = 0; c < channels; ++c) {
    const double* src = in.row(static_cast<Eigen::Index>(c)).data();
    for (std::ptrdiff_t ky = 0; ky < 3; ++ky)
      for (std::ptrdiff_t kx = 0; kx < 3; ++kx) {
        double* dst = cols.row(static_cast<Eigen::Index>(c * 9 + static_cast<std::size_t>(ky * 3 + kx))).data();
        for (std::ptrdiff_t y = 0; y < s; ++y) {
          const std::ptrdiff_t sy = y + ky - 1;
          double* out = dst + y * s;
          if (sy < 0 || sy >= s) {
            std::fill(out, out + s, 0.0);
            continue;
          }
          const double* row = src + sy * s;
          const std::ptrdiff_t dx = kx - 1;
          const std::ptrdiff_t x_lo = std::max<std::ptrdiff_t>(0, -dx), x_hi = std::min(s, s - dx);
          for (std::ptrdiff_t x = 0; x < x_lo; ++x) out[x] = 0.0;
          for (std::ptrdiff_t x = x_lo; x < x_hi; ++x) out[x] = row[x + dx];
          for (std::ptrdiff_t x = x_hi; x < s; ++x) out[x] = 0.0;
        }
      }
  }
}

void col2im(const RowMat& cols, std::size_t channels, std::size_t side, RowMat& out) {
  const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(side);
  out.setZero(static_cast<Eigen::Index>(channels), static_cast<Eigen::Index>(side * side));
  for (std::size_t c = 0; c < channels; ++c) {
    double* dst = out.row(static_cast<Eigen::Index>(c)).data();
    for (std::ptrdiff_t ky = 0; ky < 3; ++ky)
      for (std::ptrdiff_t kx = 0; kx < 3; ++kx) {
        const double* src = cols.row(static_cast<Eigen::Index>(c * 9 + static_cast<std::size_t>(ky * 3 + kx))).data();
        for (std::ptrdiff_t y = 0; y < s; ++y) {
          const std::ptrdiff_t sy = y + ky - 1;
          if (sy < 0 || sy >= s) continue;
          double* row = dst + sy * s;
          const double* in = src + y * s;
          const std::ptrdiff_t dx = kx - 1;
          const std::ptrdiff_t x_lo = std::max<std::ptrdiff_t>(0, -dx), x_hi = std::min(s, s - dx);
          for (std::ptrdiff_t x = x_lo; x < x_hi; ++x) row[x + dx] += in[x];
        }
      }
  }
}

void max_pool2(const RowMat& in, std::size_t side, RowMat& out, std::vector<std::uint32_t>& arg) {
  const std::size_t half = side / 2;
  out.resize(in.rows(), static_cast<Eigen::Index>(half * half));
  arg.resize(static_cast<std::size_t>(in.rows()) * half * half);
  for (Eigen::Index c = 0; c < in.rows(); ++c) {
    const double* src = in.row(c).data();
    double* dst = out.row(c).data();
    std::uint32_t* a = arg.data() + static_cast<std::size_t>(c) * half * half;
    for (std::size_t i = 0; i < half; ++i)
      for (std::size_t j = 0; j < half; ++j) {
        const std::size_t base = 2 * i * side + 2 * j;
        std::size_t best = base;
        for (std::size_t cand : {base + 1, base + side, base + side + 1})
          if (src[cand] > src[best]) best = cand;
        dst[i * half + j] = src[best];
        a[i * half + j] = static_cast<std::uint32_t>(best);
      }
  }
}

void unpool2(const RowMat& grad_out, const std::vector<std::uint32_t>& arg, std::size_t side, RowMat& grad_in) {
  const std::size_t pooled = static_cast<std::size_t>(grad_out.cols());
  grad_in.setZero(grad_out.rows(), static_cast<Eigen::Index>(side * side));
  for (Eigen::Index c = 0; c < grad_out.rows(); ++c) {
    const double* g = grad_out.row(c).data();
    double* dst = grad_in.row(c).data();
    const std::uint32_t* a = arg.data() + static_cast<std::size_t>(c) * pooled;
    for (std::size_t k = 0; k < pooled; ++k) dst[a[k]] += g[k];
  }
}

struct Layer {
  CMap weight;
  Eigen::Map<const Eigen::VectorXd> bias;
};

Layer layer(const ParamStore& p, const char* w, const char* b) {
  const auto& we = p.entry(w);
  const auto wv = p.view(we);
  const auto bv = p.view(b);
  const auto rows = static_cast<Eigen::Index>(we.shape[0]);
  return {CMap(wv.data(), rows, static_cast<Eigen::Index>(we.size) / rows),
          Eigen::Map<const Eigen::VectorXd>(bv.data(), static_cast<Eigen::Index>(bv.size()))};
}

struct Workspace {
  std::array<std::size_t, 3> side{};  // spatial side entering each conv layer
  RowMat x0;
  std::array<RowMat, 3> cols;
  std::array<RowMat, 3> act;  // post-ReLU conv outputs
  std::array<RowMat, 2> pooled;
  std::array<std::vector<std::uint32_t>, 2> arg;
  Eigen::VectorXd gap;
  std::array<double, kPatternCount> logits{};
  RowMat dact, dzl, dcols, dinput;  // backward scratch
};

// Buffers are reused across samples on the same thread.
Workspace& scratch() {
  thread_local Workspace ws;
  return ws;
}

void load_input(const FrontTile& input, bool flip_h, bool flip_v, Workspace& ws) {
  const std::size_t channels = input.planes.size();
  const std::uint32_t side = input.planes.front().width();
  ws.x0.resize(static_cast<Eigen::Index>(channels), static_cast<Eigen::Index>(side) * side);
  for (std::size_t c = 0; c < channels; ++c) {
    double* dst = ws.x0.row(static_cast<Eigen::Index>(c)).data();
    const auto& plane = input.planes[c];
    for (std::uint32_t y = 0; y < side; ++y) {
      const std::uint32_t sy = flip_v ? side - 1 - y : y;
      for (std::uint32_t x = 0; x < side; ++x) {
        const std::uint32_t sx = flip_h ? side - 1 - x : x;
        dst[std::size_t{y} * side + x] = plane.get(sx, sy) ? 1.0 : 0.0;
      }
    }
  }
}

void run_forward(const ParamStore& p, Workspace& ws) {
  const std::size_t side0 = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(ws.x0.cols()))));
  ws.side = {side0, side0 / 2, side0 / 4};
  const RowMat* input = &ws.x0;
  for (std::size_t l = 0; l < 3; ++l) {
    const auto L = layer(p, kConvWeight[l], kConvBias[l]);
    im2col(*input, ws.side[l], ws.cols[l]);
    ws.act[l].noalias() = L.weight * ws.cols[l];
    ws.act[l].colwise() += L.bias;
    ws.act[l] = ws.act[l].cwiseMax(0.0);
    if (l < 2) {
      max_pool2(ws.act[l], ws.side[l], ws.pooled[l], ws.arg[l]);
      input = &ws.pooled[l];
    }
  }
  ws.gap = ws.act[2].rowwise().mean();
  const auto head = layer(p, "head.weight", "head.bias");
  Eigen::VectorXd z = head.weight * ws.gap + head.bias;
  for (int k = 0; k < kPatternCount; ++k) ws.logits[static_cast<std::size_t>(k)] = z[k];
}

void run_backward(const ParamStore& p, Workspace& ws, std::span<const double> dlogits, std::vector<double>& grad) {
  grad.assign(p.size(), 0.0);
  auto slot = [&](const char* name) {
    const auto& e = p.entry(name);
    return std::span<double>(grad.data() + e.offset, e.size);
  };
  const Eigen::Map<const Eigen::VectorXd> dz(dlogits.data(), kPatternCount);
  const auto head = layer(p, "head.weight", "head.bias");
  {
    auto gw = slot("head.weight");
    Eigen::Map<RowMat>(gw.data(), kPatternCount, head.weight.cols()).noalias() = dz * ws.gap.transpose();
    auto gb = slot("head.bias");
    Eigen::Map<Eigen::VectorXd>(gb.data(), kPatternCount) = dz;
  }
  const Eigen::VectorXd dgap = head.weight.transpose() * dz;

  // Gradient w.r.t. the post-ReLU output of the current conv layer.
  RowMat& dact = ws.dact;
  dact.resize(ws.act[2].rows(), ws.act[2].cols());
  const double inv = 1.0 / static_cast<double>(ws.act[2].cols());
  for (Eigen::Index c = 0; c < dact.rows(); ++c) dact.row(c).setConstant(dgap[c] * inv);

  RowMat& dcols = ws.dcols;
  RowMat& dinput = ws.dinput;
  RowMat& dzl = ws.dzl;
  for (std::size_t l = 3; l-- > 0;) {
    const auto L = layer(p, kConvWeight[l], kConvBias[l]);
    dzl = (ws.act[l].array() > 0.0).select(dact, 0.0);
    auto gw = slot(kConvWeight[l]);
    Eigen::Map<RowMat>(gw.data(), L.weight.rows(), L.weight.cols()).noalias() = dzl * ws.cols[l].transpose();
    auto gb = slot(kConvBias[l]);
    Eigen::Map<Eigen::VectorXd>(gb.data(), L.bias.size()) = dzl.rowwise().sum();
    if (l == 0) break;  // the front layer has no parameters
    dcols.noalias() = L.weight.transpose() * dzl;
    col2im(dcols, static_cast<std::size_t>(L.weight.cols()) / 9, ws.side[l], dinput);
    unpool2(dinput, ws.arg[l - 1], ws.side[l - 1], dact);
  }
}

std::size_t expected_front_side(const ClassifierModel& model) { return model.config().tile_size / 2; }

void check_front(const ClassifierModel& model, const FrontTile& input) {
  if (input.planes.size() != model.config().network_channels()) {
    throw Error(ErrorCode::ShapeMismatch, "input has " + std::to_string(input.planes.size()) +
                                              " channels, model expects " +
                                              std::to_string(model.config().network_channels()));
  }
  for (const auto& plane : input.planes) {
    if (plane.width() != expected_front_side(model) || plane.height() != expected_front_side(model)) {
      throw Error(ErrorCode::ShapeMismatch, "front input side does not match model tile size");
    }
  }
}

}  // namespace

FrontTile prepare_input(const ClassifierModel& model, std::span<const BitPlane> tile_planes) {
  const auto& cfg = model.config();
  if (tile_planes.size() != cfg.map_channels) {
    throw Error(ErrorCode::ShapeMismatch, "tile has " + std::to_string(tile_planes.size()) +
                                              " channels, model expects " + std::to_string(cfg.map_channels));
  }
  for (const auto& p : tile_planes) {
    if (p.width() != cfg.tile_size || p.height() != cfg.tile_size) {
      throw Error(ErrorCode::ShapeMismatch, "tile side " + std::to_string(p.width()) + " does not match model tile size " +
                                                std::to_string(cfg.tile_size));
    }
  }
  FrontTile front;
  if (cfg.merge_channels) {
    front.planes.push_back(dilate_front(merge_planes(tile_planes)));
  } else {
    front.planes = dilate_front(tile_planes);
  }
  return front;
}

std::array<double, kPatternCount> forward_probabilities(const ClassifierModel& model, const FrontTile& input,
                                                       bool flip_horizontal, bool flip_vertical) {
  check_front(model, input);
  Workspace& ws = scratch();
  load_input(input, flip_horizontal, flip_vertical, ws);
  run_forward(model.params(), ws);
  auto probs = ws.logits;
  softmax(probs);
  return probs;
}

PredictionRecord forward(const ClassifierModel& model, const Tile& tile) {
  const auto probs = forward_probabilities(model, prepare_input(model, tile.planes));
  auto rec = make_prediction(tile.slide_id, tile.x, tile.y, probs);
  rec.patient_id = tile.patient_id;
  return rec;
}

std::vector<PredictionRecord> predict_all(const ClassifierModel& model, std::span<const LabeledTile> tiles,
                                          std::size_t workers) {
  std::vector<PredictionRecord> out(tiles.size());
  parallel_for(tiles.size(), workers, [&](std::size_t i, std::size_t) { out[i] = forward(model, tiles[i]); });
  return out;
}

double LossSpec::evaluate(std::span<const double> logits, std::size_t true_class, std::span<double> grad) const {
  switch (kind) {
    case LossKind::Focal:
      return focal_loss_logits(logits, true_class, focal, grad);
    case LossKind::CrossEntropy:
      return cross_entropy_logits(logits, true_class, grad);
    case LossKind::WeightedCrossEntropy: {
      const double w = class_weights.empty() ? 1.0 : class_weights.at(true_class);
      const double l = cross_entropy_logits(logits, true_class, grad);
      for (auto& g : grad) g *= w;
      return w * l;
    }
  }
  throw Error(ErrorCode::Internal, "unhandled loss kind");
}

double loss_and_gradient(const ClassifierModel& model, const FrontTile& input, std::size_t true_class,
                         const LossSpec& loss, std::vector<double>* grad, bool flip_horizontal, bool flip_vertical) {
  check_front(model, input);
  if (true_class >= kPatternCount) throw Error(ErrorCode::InvalidArgument, "true class out of range");
  Workspace& ws = scratch();
  load_input(input, flip_horizontal, flip_vertical, ws);
  run_forward(model.params(), ws);
  std::array<double, kPatternCount> dlogits{};
  const double value = loss.evaluate(ws.logits, true_class, dlogits);
  if (grad) run_backward(model.params(), ws, dlogits, *grad);
  return value;
}

double gradient_check(const ClassifierModel& model, const Tile& tile, std::size_t true_class, double epsilon,
                      const LossSpec& loss, GradientScope scope) {
  if (!(epsilon >= 1e-7 && epsilon <= 1e-4)) {
    throw Error(ErrorCode::InvalidArgument, "epsilon must lie in [1e-7, 1e-4]");
  }
  const FrontTile input = prepare_input(model, tile.planes);
  std::vector<double> analytic;
  loss_and_gradient(model, input, true_class, loss, &analytic);

  std::vector<std::size_t> indices;
  if (scope == GradientScope::HeadOnly) {
    indices = model.head_indices();
  } else {
    indices.resize(model.params().size());
    std::iota(indices.begin(), indices.end(), std::size_t{0});
  }
  ClassifierModel probe = model;
  const auto numeric = central_differences(probe.params().values(), indices, epsilon, [&] {
    return loss_and_gradient(probe, input, true_class, loss, nullptr);
  });
  std::vector<double> selected;
  selected.reserve(indices.size());
  for (auto i : indices) selected.push_back(analytic[i]);
  return max_relative_error(selected, numeric);
}

// ---------------------------------------------------------------- training

std::pair<bool, bool> flip_decision(const TrainConfig& config, std::size_t epoch, std::size_t tile_index) {
  Rng rng(derive_seed(config.seed, 0xF11B, epoch, tile_index));
  const bool h = rng.bernoulli(config.horizontal_flip);
  const bool v = rng.bernoulli(config.vertical_flip);
  return {h, v};
}

namespace {

LossSpec make_loss_spec(const TrainConfig& config, std::span<const LabeledTile> train_set) {
  LossSpec spec;
  spec.kind = config.loss;
  spec.focal = config.focal;
  spec.focal.validate(kPatternCount);
  if (config.loss == LossKind::WeightedCrossEntropy) {
    std::array<std::size_t, kPatternCount> counts{};
    for (const auto& t : train_set) ++counts[static_cast<std::size_t>(index_of(t.label))];
    spec.class_weights = inverse_frequency_weights(counts);
  }
  return spec;
}

}  // namespace

TrainResult train(const ClassifierModel& initial, std::span<const LabeledTile> train_set,
                  std::span<const LabeledTile> val_set, const TrainConfig& config) {
  if (train_set.empty() || val_set.empty()) throw Error(ErrorCode::EmptyDataset, "training and validation sets must be non-empty");
  if (!(config.learning_rate >= 0.0)) throw Error(ErrorCode::InvalidArgument, "learning rate must be >= 0");
  if (config.batch_size == 0) throw Error(ErrorCode::InvalidArgument, "batch size must be positive");

  const LossSpec loss = make_loss_spec(config, train_set);
  const std::size_t workers = std::max<std::size_t>(1, config.workers);

  std::vector<FrontTile> train_front(train_set.size()), val_front(val_set.size());
  parallel_for(train_set.size(), workers,
               [&](std::size_t i, std::size_t) { train_front[i] = prepare_input(initial, train_set[i].planes); });
  parallel_for(val_set.size(), workers,
               [&](std::size_t i, std::size_t) { val_front[i] = prepare_input(initial, val_set[i].planes); });

  ClassifierModel model = initial;
  Adam adam(model.params().size(), AdamConfig{.learning_rate = config.learning_rate});
  TrainResult result{initial, {}, 0};
  double best_f1 = -1.0;

  std::vector<std::size_t> order(train_set.size());
  std::vector<std::vector<double>> sample_grads;
  std::vector<double> sample_loss;
  std::vector<double> batch_grad(model.params().size());

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(config.seed, 0x5EED, epoch));
    shuffle_rng.shuffle(std::span<std::size_t>(order));

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t n = std::min(config.batch_size, order.size() - start);
      sample_grads.resize(n);
      sample_loss.assign(n, 0.0);
      parallel_for(n, workers, [&](std::size_t b, std::size_t) {
        const std::size_t idx = order[start + b];
        const auto [fh, fv] = flip_decision(config, epoch, idx);
        sample_loss[b] = loss_and_gradient(model, train_front[idx],
                                           static_cast<std::size_t>(index_of(train_set[idx].label)), loss,
                                           &sample_grads[b], fh, fv);
      });
      std::fill(batch_grad.begin(), batch_grad.end(), 0.0);
      for (std::size_t b = 0; b < n; ++b) {
        loss_sum += sample_loss[b];
        for (std::size_t i = 0; i < batch_grad.size(); ++i) batch_grad[i] += sample_grads[b][i];
      }
      const double scale = 1.0 / static_cast<double>(n);
      for (auto& g : batch_grad) g *= scale;
      adam.step(model.params().values(), batch_grad);
    }

    std::vector<PredictionRecord> preds(val_set.size());
    std::vector<double> val_losses(val_set.size());
    parallel_for(val_set.size(), workers, [&](std::size_t i, std::size_t) {
      val_losses[i] = loss_and_gradient(model, val_front[i], static_cast<std::size_t>(index_of(val_set[i].label)),
                                        loss, nullptr);
      auto probs = scratch().logits;  // left behind by the forward pass above
      softmax(probs);
      preds[i] = make_prediction(val_set[i].slide_id, val_set[i].x, val_set[i].y, probs);
    });
    std::vector<PatternClass> truths;
    truths.reserve(val_set.size());
    for (const auto& t : val_set) truths.push_back(t.label);
    const auto metrics = compute_metrics(preds, truths);

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = loss_sum / static_cast<double>(train_set.size());
    log.val_loss = std::accumulate(val_losses.begin(), val_losses.end(), 0.0) / static_cast<double>(val_set.size());
    log.val_macro_f1 = metrics.macro_f1;
    result.curve.push_back(log);
    if (log.val_macro_f1 > best_f1) {
      best_f1 = log.val_macro_f1;
      result.model = model;
      result.best_epoch = epoch;
    }
  }
  return result;
}

void write_training_log(const std::filesystem::path& path, std::span<const EpochLog> curve) {
  csv::Table t;
  t.header = {"epoch", "train_loss", "val_loss", "val_macro_f1"};
  for (const auto& e : curve) {
    t.rows.push_back({std::to_string(e.epoch), format_double(e.train_loss), format_double(e.val_loss),
                      format_double(e.val_macro_f1)});
  }
  csv::write(path, t);
}

}  // namespace cellomaps
