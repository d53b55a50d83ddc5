#pragma once

// Training algorithms over analog tiles:
//  - plain SGD: the outer-product update is turned into pulses directly,
//  - mixed-precision SGD: updates accumulate digitally and are transferred
//    to the devices in whole reference steps once they cross a threshold,
//  - symmetry-point-shifted SGD: plain SGD with every reference device
//    parked at its own symmetry point,
// plus an exact floating-point baseline.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "memtrain/analog_tile.hpp"
#include "memtrain/energy.hpp"
#include "memtrain/mnist.hpp"
#include "memtrain/network.hpp"

namespace memtrain {

enum class Algorithm { plain, mixed_precision, symmetry_shifted, digital_baseline };
enum class Rounding { stochastic, deterministic };

/// How a signed conductance update is split over the differential pair.
enum class PairPolicy {
  fixed_reference,   // g_minus is a fixed reference; g_plus is potentiated or depressed
  potentiate_only,   // increases potentiate g_plus, decreases potentiate g_minus
  depress_opposite,  // increases depress g_minus, decreases depress g_plus
};

std::string_view to_string(Algorithm a) noexcept;
std::string_view to_string(Rounding r) noexcept;
std::string_view to_string(PairPolicy p) noexcept;
Algorithm parse_algorithm(const std::string& s);
Rounding parse_rounding(const std::string& s);
PairPolicy parse_pair_policy(const std::string& s);

struct UpdateOptions {
  Rounding rounding = Rounding::stochastic;
  PairPolicy policy = PairPolicy::fixed_reference;
  /// Nominal conductance step per pulse; reference_step(model) when <= 0.
  double ref_step = 0.0;
};

/// Requests `count` pulses that move weight (r, c) up (`increase`) or down.
void emit_pair_pulses(AnalogTile& tile, std::size_t r, std::size_t c, bool increase, std::int64_t count,
                      PairPolicy policy);

/// One plain-SGD step: dW = -lr * delta x^T becomes, per synapse,
/// n = round(|dW| / (w_max * ref_step)) pulses. Returns the pulses emitted.
std::int64_t plain_sgd_update(AnalogTile& tile, std::span<const double> x, std::span<const double> delta,
                              double lr, const UpdateOptions& options, Rng& rng);

struct MpState {
  std::vector<double> chi;  // accumulated conductance update, normalized units
  double threshold = 0.0;   // normalized conductance
};

MpState make_mp_state(const AnalogTile& tile, double threshold);

/// One mixed-precision step: chi -= lr * delta x^T / w_max; synapses with
/// |chi| >= threshold receive floor(|chi| / ref_step) pulses, which are
/// subtracted from chi. Returns the pulses emitted.
std::int64_t mp_sgd_update(AnalogTile& tile, MpState& state, std::span<const double> x,
                           std::span<const double> delta, double lr, const UpdateOptions& options);

struct TrainConfig {
  std::vector<std::size_t> layer_sizes{784, 256, 28, 10};
  double lr = 0.1;
  int epochs = 25;
  Algorithm algorithm = Algorithm::mixed_precision;
  std::uint64_t seed = 1;

  // Analog tiles.
  double w_max = 1.0;
  int dac_bits = 8;
  int adc_bits = 8;
  double adc_range_factor = 2.0;  // ADC range +/- factor * w_max * sqrt(fan)
  InputScaling scaling = InputScaling::abs_max;
  Rounding rounding = Rounding::stochastic;
  PairPolicy pair_policy = PairPolicy::fixed_reference;
  double reference_g = 0.5;       // reference conductance unless symmetry-shifted
  double mp_threshold = 1.0;      // in units of the reference step
  double dtd_sigma = -1.0;        // < 0: keep the device model's value
  int symmetry_grid = 256;        // bracketing grid for per-device symmetry points

  // Reporting.
  EnergyMode energy_mode = EnergyMode::upper_bound;
  SchottkyConstants schottky{};
  int histogram_bins = 41;
  /// Re-count every update and throw std::logic_error if a tile counter
  /// disagrees with the per-synapse emission sum.
  bool audit_pulses = false;
};

struct EpochReport {
  int epoch = 0;
  double test_accuracy = 0.0;
  double train_loss = 0.0;
  std::int64_t pulses_ltp = 0;
  std::int64_t pulses_ltd = 0;
  double energy_j = 0.0;
  std::int64_t cumulative_pulses = 0;
  double cumulative_energy_j = 0.0;
  std::vector<Histogram> weight_hist;  // one per layer
};

struct TrainResult {
  std::vector<EpochReport> reports;
  Network network;
  EnergyLedger ledger;
  std::vector<double> symmetry_points;  // analytic g* of each layer's model
  std::vector<double> ref_steps;        // reference step of each layer's model
};

using EpochCallback = std::function<void(const EpochReport&)>;

/// Builds the initial network for a configuration: Glorot-uniform weights,
/// programmed onto tiles for analog algorithms.
Network build_network(const TrainConfig& config, std::span<const DeviceModel> models);

/// Per-sample SGD over a seeded shuffle of data.train each epoch, evaluated
/// on data.test after every epoch. `models` holds one model per layer, or a
/// single model shared by all layers; it is ignored for the digital baseline.
TrainResult train(const TrainConfig& config, std::span<const DeviceModel> models, const MnistSplit& data,
                  const EpochCallback& on_epoch = {});

}  // namespace memtrain
