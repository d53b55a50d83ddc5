#pragma once

// Fully connected sigmoid network with a softmax/cross-entropy head. Each
// layer holds either digital float weights or an analog tile; biases are
// always digital.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "memtrain/analog_tile.hpp"
#include "memtrain/mnist.hpp"
#include "memtrain/random.hpp"

namespace memtrain {

struct Layer {
  std::size_t inputs = 0;
  std::size_t outputs = 0;
  std::vector<double> weights;     // digital layers: outputs x inputs, row-major
  std::optional<AnalogTile> tile;  // analog layers
  std::vector<double> bias;

  [[nodiscard]] bool analog() const noexcept { return tile.has_value(); }
  [[nodiscard]] std::vector<double> read_weights() const;
};

/// Activations and back-propagated errors for one sample.
struct Workspace {
  std::vector<std::vector<double>> act;    // act[0] = input, act[l + 1] = output of layer l
  std::vector<std::vector<double>> delta;  // dLoss/dz for layer l
};

class Network {
 public:
  Network() = default;
  explicit Network(std::vector<Layer> layers);

  /// Digital network with Glorot-uniform weights and zero biases.
  static Network digital(const std::vector<std::size_t>& sizes, std::uint64_t seed);

  [[nodiscard]] std::size_t depth() const noexcept { return layers_.size(); }
  [[nodiscard]] std::size_t inputs() const noexcept { return layers_.front().inputs; }
  [[nodiscard]] std::size_t outputs() const noexcept { return layers_.back().outputs; }
  [[nodiscard]] const Layer& layer(std::size_t l) const { return layers_.at(l); }
  [[nodiscard]] Layer& layer(std::size_t l) { return layers_.at(l); }
  [[nodiscard]] std::span<const Layer> layers() const noexcept { return layers_; }

  [[nodiscard]] Workspace make_workspace() const;

  /// Fills ws.act; the last entry holds softmax probabilities.
  void forward(std::span<const double> x, Workspace& ws) const;
  /// Fills ws.delta (dLoss/dz per layer) from ws.act for the given label.
  void backward(std::size_t label, Workspace& ws) const;

  /// Cross-entropy of one sample.
  [[nodiscard]] double loss(std::span<const double> x, std::size_t label) const;

  /// Argmax of the output, ties to the smallest index.
  [[nodiscard]] std::size_t predict(std::span<const double> x, Workspace& ws) const;

  /// Digital layers only: dLoss/dW for layer l from a workspace after forward + backward.
  [[nodiscard]] std::vector<double> weight_gradient(std::size_t l, const Workspace& ws) const;

 private:
  std::vector<Layer> layers_;
};

std::vector<double> glorot_uniform(std::size_t inputs, std::size_t outputs, Rng& rng);

/// Fraction of argmax-correct predictions.
double evaluate(const Network& net, const Dataset& data);

struct Histogram {
  std::vector<double> edges;  // bins + 1, ascending
  std::vector<std::int64_t> counts;
  double mean = 0.0;          // of the raw values

  [[nodiscard]] std::int64_t total() const noexcept;
  /// Center of the fullest bin (first on ties).
  [[nodiscard]] double mode() const noexcept;
};

/// Equal-width bins over [-range, range]; values outside land in the edge bins.
Histogram weight_histogram(std::span<const double> weights, double range, int bins);
Histogram weight_histogram(const AnalogTile& tile, int bins);

}  // namespace memtrain
