#include "memtrain/network.hpp"

#include <algorithm>
#include <cmath>

#include "memtrain/error.hpp"

namespace memtrain {

namespace {

inline double sigmoid(double z) noexcept { return 1.0 / (1.0 + std::exp(-z)); }

void softmax_inplace(std::vector<double>& z) {
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (auto& v : z) {
    v = std::exp(v - m);
    sum += v;
  }
  for (auto& v : z) v /= sum;
}

void dense_forward(const Layer& layer, std::span<const double> x, std::span<double> z) {
  if (layer.analog()) {
    layer.tile->forward(x, z);
  } else {
    const double* w = layer.weights.data();
    for (std::size_t r = 0; r < layer.outputs; ++r) {
      const double* row = w + r * layer.inputs;
      double acc = 0.0;
      for (std::size_t c = 0; c < layer.inputs; ++c) acc += row[c] * x[c];
      z[r] = acc;
    }
  }
  for (std::size_t r = 0; r < layer.outputs; ++r) z[r] += layer.bias[r];
}

void dense_backward(const Layer& layer, std::span<const double> delta, std::span<double> out) {
  if (layer.analog()) {
    layer.tile->backward(delta, out);
    return;
  }
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t r = 0; r < layer.outputs; ++r) {
    const double d = delta[r];
    if (d == 0.0) continue;
    const double* row = layer.weights.data() + r * layer.inputs;
    for (std::size_t c = 0; c < layer.inputs; ++c) out[c] += row[c] * d;
  }
}

}  // namespace

std::vector<double> Layer::read_weights() const { return analog() ? tile->read_weights() : weights; }

Network::Network(std::vector<Layer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw Error(ErrorKind::config_error, "network needs at least one layer");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& L = layers_[l];
    if (l > 0 && L.inputs != layers_[l - 1].outputs) {
      throw Error(ErrorKind::shape_mismatch, "layer " + std::to_string(l) + " input size mismatch");
    }
    if (L.bias.size() != L.outputs) throw Error(ErrorKind::shape_mismatch, "bias size mismatch");
    if (L.analog()) {
      if (L.tile->rows() != L.outputs || L.tile->cols() != L.inputs) {
        throw Error(ErrorKind::shape_mismatch, "tile shape mismatch in layer " + std::to_string(l));
      }
    } else if (L.weights.size() != L.inputs * L.outputs) {
      throw Error(ErrorKind::shape_mismatch, "weight size mismatch in layer " + std::to_string(l));
    }
  }
}

std::vector<double> glorot_uniform(std::size_t inputs, std::size_t outputs, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(inputs + outputs));
  std::vector<double> w(inputs * outputs);
  for (auto& v : w) v = (2.0 * uniform01(rng) - 1.0) * bound;
  return w;
}

Network Network::digital(const std::vector<std::size_t>& sizes, std::uint64_t seed) {
  if (sizes.size() < 2) throw Error(ErrorKind::config_error, "layer_sizes needs at least two entries");
  Rng rng = make_rng(seed, 10);
  std::vector<Layer> layers;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    Layer L;
    L.inputs = sizes[l];
    L.outputs = sizes[l + 1];
    L.weights = glorot_uniform(L.inputs, L.outputs, rng);
    L.bias.assign(L.outputs, 0.0);
    layers.push_back(std::move(L));
  }
  return Network(std::move(layers));
}

Workspace Network::make_workspace() const {
  Workspace ws;
  ws.act.resize(layers_.size() + 1);
  ws.delta.resize(layers_.size());
  ws.act[0].resize(inputs());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    ws.act[l + 1].resize(layers_[l].outputs);
    ws.delta[l].resize(layers_[l].outputs);
  }
  return ws;
}

void Network::forward(std::span<const double> x, Workspace& ws) const {
  if (x.size() != inputs()) throw Error(ErrorKind::shape_mismatch, "input size mismatch");
  std::copy(x.begin(), x.end(), ws.act[0].begin());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    auto& z = ws.act[l + 1];
    dense_forward(layers_[l], ws.act[l], z);
    if (l + 1 == layers_.size()) {
      softmax_inplace(z);
    } else {
      for (auto& v : z) v = sigmoid(v);
    }
  }
}

void Network::backward(std::size_t label, Workspace& ws) const {
  const std::size_t last = layers_.size() - 1;
  auto& d_out = ws.delta[last];
  const auto& p = ws.act[last + 1];
  for (std::size_t k = 0; k < d_out.size(); ++k) d_out[k] = p[k] - (k == label ? 1.0 : 0.0);
  for (std::size_t l = last; l > 0; --l) {
    auto& d = ws.delta[l - 1];
    dense_backward(layers_[l], ws.delta[l], d);
    const auto& a = ws.act[l];
    for (std::size_t k = 0; k < d.size(); ++k) d[k] *= a[k] * (1.0 - a[k]);
  }
}

double Network::loss(std::span<const double> x, std::size_t label) const {
  auto ws = make_workspace();
  forward(x, ws);
  return -std::log(ws.act.back()[label]);
}

std::size_t Network::predict(std::span<const double> x, Workspace& ws) const {
  forward(x, ws);
  const auto& p = ws.act.back();
  return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

std::vector<double> Network::weight_gradient(std::size_t l, const Workspace& ws) const {
  const auto& L = layers_.at(l);
  std::vector<double> g(L.inputs * L.outputs);
  for (std::size_t r = 0; r < L.outputs; ++r) {
    for (std::size_t c = 0; c < L.inputs; ++c) g[r * L.inputs + c] = ws.delta[l][r] * ws.act[l][c];
  }
  return g;
}

double evaluate(const Network& net, const Dataset& data) {
  if (data.size() == 0) throw Error(ErrorKind::data_error, "empty evaluation set");
  if (data.features() != net.inputs()) throw Error(ErrorKind::data_error, "feature count does not match the network");
  auto ws = net.make_workspace();
  std::vector<double> x(data.features());
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto img = data.image(i);
    std::copy(img.begin(), img.end(), x.begin());
    if (net.predict(x, ws) == data.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

std::int64_t Histogram::total() const noexcept {
  std::int64_t t = 0;
  for (auto c : counts) t += c;
  return t;
}

double Histogram::mode() const noexcept {
  const auto it = std::max_element(counts.begin(), counts.end());
  const auto i = static_cast<std::size_t>(it - counts.begin());
  return 0.5 * (edges[i] + edges[i + 1]);
}

Histogram weight_histogram(std::span<const double> weights, double range, int bins) {
  if (bins < 1) throw Error(ErrorKind::invalid_argument, "bins must be >= 1");
  if (!(range > 0.0)) throw Error(ErrorKind::invalid_argument, "histogram range must be > 0");
  Histogram h;
  h.edges.resize(static_cast<std::size_t>(bins) + 1);
  for (int i = 0; i <= bins; ++i) h.edges[i] = -range + 2.0 * range * i / bins;
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  double sum = 0.0;
  for (double w : weights) {
    auto k = static_cast<long>(std::floor((w + range) / (2.0 * range) * bins));
    k = std::clamp(k, 0L, static_cast<long>(bins) - 1);
    ++h.counts[static_cast<std::size_t>(k)];
    sum += w;
  }
  h.mean = weights.empty() ? 0.0 : sum / static_cast<double>(weights.size());
  return h;
}

Histogram weight_histogram(const AnalogTile& tile, int bins) {
  return weight_histogram(tile.weights(), tile.w_max(), bins);
}

}  // namespace memtrain
