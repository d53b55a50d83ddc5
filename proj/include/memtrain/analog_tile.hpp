#pragma once

// Crossbar tile of differential conductance pairs. Weights are stored
// output-stationary (rows = outputs, cols = inputs) and read as
//   w_ij = w_max * (g_plus_ij - g_minus_ij).
// Matrix-vector products go through a DAC on the input side and an ADC on
// the output side.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "memtrain/device_model.hpp"

namespace memtrain {

/// Uniform converter with 2^bits levels lo + k*(hi - lo)/2^bits, k = 0..2^bits-1.
/// Rounds to the nearest level and clips. Zero is a level whenever lo = -hi.
struct ConverterSpec {
  int bits = 8;
  double lo = -1.0;
  double hi = 1.0;

  [[nodiscard]] double step() const noexcept { return (hi - lo) / static_cast<double>(levels()); }
  [[nodiscard]] std::int64_t levels() const noexcept { return std::int64_t{1} << bits; }
  [[nodiscard]] double quantize(double x) const noexcept;

  friend bool operator==(const ConverterSpec&, const ConverterSpec&) = default;
};

/// Validated constructor: bits in [1, 52], lo < hi.
ConverterSpec make_converter(int bits, double lo, double hi);

/// Per-vector input normalization before the DAC. abs_max divides the input
/// by its largest magnitude and rescales the ADC output by the same factor.
enum class InputScaling { none, abs_max };

struct TileOptions {
  double w_max = 1.0;
  ConverterSpec dac{8, -1.0, 1.0};
  /// Defaults to +/- 2 * w_max * sqrt(cols) at the DAC's bit width.
  std::optional<ConverterSpec> adc;
  /// Defaults to +/- 2 * w_max * sqrt(rows) at the forward ADC's bit width.
  std::optional<ConverterSpec> adc_backward;
  InputScaling scaling = InputScaling::abs_max;
  /// Initial normalized conductance of both devices; the model's symmetry point when empty.
  std::optional<double> init_g;
};

enum class Side { plus, minus };

struct PulseCounter {
  std::int64_t potentiation = 0;
  std::int64_t depression = 0;

  [[nodiscard]] std::int64_t total() const noexcept { return potentiation + depression; }
  PulseCounter& operator+=(const PulseCounter& o) noexcept {
    potentiation += o.potentiation;
    depression += o.depression;
    return *this;
  }
  friend PulseCounter operator-(PulseCounter a, const PulseCounter& b) noexcept {
    a.potentiation -= b.potentiation;
    a.depression -= b.depression;
    return a;
  }
  friend bool operator==(const PulseCounter&, const PulseCounter&) = default;
};

class AnalogTile {
 public:
  /// Samples per-device variation factors from `seed`. Throws
  /// Error{invalid_shape} for empty shapes.
  AnalogTile(std::size_t rows, std::size_t cols, DeviceModel model, TileOptions options, std::uint64_t seed);

  [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
  [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
  [[nodiscard]] const DeviceModel& model() const noexcept { return model_; }
  [[nodiscard]] double w_max() const noexcept { return w_max_; }
  [[nodiscard]] const ConverterSpec& dac() const noexcept { return dac_; }
  [[nodiscard]] const ConverterSpec& adc() const noexcept { return adc_; }
  [[nodiscard]] const ConverterSpec& adc_backward() const noexcept { return adc_backward_; }
  [[nodiscard]] InputScaling scaling() const noexcept { return scaling_; }
  [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }

  [[nodiscard]] const DeviceState& state(Side side, std::size_t r, std::size_t c) const {
    return side == Side::plus ? plus_[r * cols_ + c] : minus_[r * cols_ + c];
  }
  [[nodiscard]] std::span<const DeviceState> states(Side side) const noexcept {
    return side == Side::plus ? std::span<const DeviceState>(plus_) : std::span<const DeviceState>(minus_);
  }

  /// Ideal (unpulsed, uncounted) programming of one device. Ignores the freeze flag.
  void set_conductance(Side side, std::size_t r, std::size_t c, double g);

  /// Ideal programming of g_plus so that each weight equals w (clipped to the
  /// conductance range), given the current g_minus.
  void program_weights(std::span<const double> w);

  /// w = w_max * (g_plus - g_minus), row-major. The cached copy is updated on every pulse.
  [[nodiscard]] std::vector<double> read_weights() const;
  [[nodiscard]] std::span<const double> weights() const noexcept { return weights_; }
  [[nodiscard]] double weight(std::size_t r, std::size_t c) const noexcept { return weights_[r * cols_ + c]; }

  /// y = ADC(W * DAC(x)). Throws Error{shape_mismatch}.
  void forward(std::span<const double> x, std::span<double> y) const;
  [[nodiscard]] std::vector<double> forward(std::span<const double> x) const;
  /// y = ADC(W^T * DAC(delta)).
  void backward(std::span<const double> delta, std::span<double> y) const;
  [[nodiscard]] std::vector<double> backward(std::span<const double> delta) const;

  /// Applies `count` sequential pulses to one device and counts them.
  /// Throws Error{reference_frozen} for g_minus once the reference is frozen.
  void pulse(std::size_t r, std::size_t c, Side side, Polarity polarity, std::int64_t count);

  /// Moves every g_minus to its own alternating-pair fixed point and freezes it.
  void set_reference_to_symmetry(int grid_points = 1024);
  /// Moves every g_minus to g and freezes it.
  void set_reference(double g);
  void freeze_reference(bool frozen) noexcept { reference_frozen_ = frozen; }
  [[nodiscard]] bool reference_frozen() const noexcept { return reference_frozen_; }

  [[nodiscard]] const PulseCounter& counter() const noexcept { return counter_; }
  [[nodiscard]] PulseCounter epoch_counter() const noexcept { return counter_ - epoch_start_; }
  void begin_epoch() noexcept { epoch_start_ = counter_; }

  /// Lossless JSON checkpoint (see docs/formats.md).
  [[nodiscard]] std::string to_json() const;
  static AnalogTile from_json(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static AnalogTile load(const std::filesystem::path& path);

  friend bool operator==(const AnalogTile& a, const AnalogTile& b);

 private:
  struct Uninitialized {};
  AnalogTile(Uninitialized, DeviceModel model) : model_(std::move(model)) {}

  void refresh_weight(std::size_t idx) noexcept {
    weights_[idx] = w_max_ * (plus_[idx].g - minus_[idx].g);
  }
  void mvm(std::span<const double> in, std::span<double> out, bool transposed) const;

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  DeviceModel model_;
  double w_max_ = 1.0;
  ConverterSpec dac_;
  ConverterSpec adc_;
  ConverterSpec adc_backward_;
  InputScaling scaling_ = InputScaling::abs_max;
  std::uint64_t seed_ = 0;
  bool reference_frozen_ = false;
  std::vector<DeviceState> plus_;
  std::vector<DeviceState> minus_;
  std::vector<double> weights_;
  PulseCounter counter_;
  PulseCounter epoch_start_;
};

}  // namespace memtrain
