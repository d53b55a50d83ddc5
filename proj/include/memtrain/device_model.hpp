#pragma once

// State-dependent conductance update model for a single ferroelectric synapse.
//
// Conductance is tracked in the normalized domain g in [0, 1], where 0 maps to
// g_min and 1 to g_max siemens. One potentiation pulse moves
//   g -> clamp(g + ltp_scale * P_ltp(g), 0, 1)
// and one depression pulse moves
//   g -> clamp(g - ltd_scale * P_ltd(g), 0, 1).
// P_ltp and P_ltd are degree-5 polynomials (constant coefficient first) that
// must stay strictly positive on [0, 1], except that P_ltp may vanish at g = 1
// and P_ltd at g = 0.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "memtrain/random.hpp"

namespace memtrain {

enum class Polarity { potentiate, depress };

std::string_view to_string(Polarity p) noexcept;

/// A programming operating point. The amplitude is a magnitude; polarity
/// carries the sign.
struct PulseSpec {
  double v_write = 1.0;  // V
  double t_write = 1e-6; // s
  Polarity polarity = Polarity::potentiate;

  friend bool operator==(const PulseSpec&, const PulseSpec&) = default;
};

PulseSpec make_pulse_spec(double v_write, double t_write, Polarity polarity);

using Coeffs = std::array<double, 6>;

inline double eval_poly(const Coeffs& c, double x) noexcept {
  return c[0] + x * (c[1] + x * (c[2] + x * (c[3] + x * (c[4] + x * c[5]))));
}

struct DeviceState {
  double g = 0.0;
  double ltp_scale = 1.0;
  double ltd_scale = 1.0;

  friend bool operator==(const DeviceState&, const DeviceState&) = default;
};

class DeviceModel {
 public:
  /// Validates bounds and polynomial positivity (1024 samples on [0, 1]).
  /// Throws Error{invalid_bounds} or Error{non_positive_gradient}.
  static DeviceModel make(std::span<const double> ltp_coeffs, std::span<const double> ltd_coeffs,
                          double g_min, double g_max, double dtd_sigma,
                          const PulseSpec& ltp_spec, const PulseSpec& ltd_spec);

  [[nodiscard]] double ltp_gradient(double g) const noexcept { return eval_poly(ltp_, g); }
  [[nodiscard]] double ltd_gradient(double g) const noexcept { return eval_poly(ltd_, g); }

  [[nodiscard]] const Coeffs& ltp_coeffs() const noexcept { return ltp_; }
  [[nodiscard]] const Coeffs& ltd_coeffs() const noexcept { return ltd_; }
  [[nodiscard]] double g_min() const noexcept { return g_min_; }
  [[nodiscard]] double g_max() const noexcept { return g_max_; }
  [[nodiscard]] double dtd_sigma() const noexcept { return dtd_sigma_; }
  [[nodiscard]] const PulseSpec& ltp_spec() const noexcept { return ltp_spec_; }
  [[nodiscard]] const PulseSpec& ltd_spec() const noexcept { return ltd_spec_; }

  /// Normalized <-> physical conductance.
  [[nodiscard]] double to_siemens(double g) const noexcept { return g_min_ + g * (g_max_ - g_min_); }
  [[nodiscard]] double to_normalized(double siemens) const noexcept {
    return (siemens - g_min_) / (g_max_ - g_min_);
  }

  /// Same model with a different variation level (re-validated).
  [[nodiscard]] DeviceModel with_dtd_sigma(double sigma) const;

  friend bool operator==(const DeviceModel&, const DeviceModel&) = default;

 private:
  DeviceModel() = default;

  Coeffs ltp_{};
  Coeffs ltd_{};
  double g_min_ = 0.0;
  double g_max_ = 1.0;
  double dtd_sigma_ = 0.0;
  PulseSpec ltp_spec_{};
  PulseSpec ltd_spec_{};
};

/// One pulse, inlined for the tile update loops.
inline double step_conductance(const DeviceModel& m, const DeviceState& s, Polarity p, bool* saturated = nullptr) noexcept {
  double g = p == Polarity::potentiate ? s.g + s.ltp_scale * m.ltp_gradient(s.g)
                                       : s.g - s.ltd_scale * m.ltd_gradient(s.g);
  bool sat = false;
  if (g > 1.0) { g = 1.0; sat = true; }
  if (g < 0.0) { g = 0.0; sat = true; }
  if (saturated != nullptr && sat) *saturated = true;
  return g;
}

struct PulseOutcome {
  DeviceState state;
  bool saturated = false;  // at least one pulse hit a bound
};

/// Applies `count` sequential pulses; every pulse sees the state left by the previous one.
PulseOutcome apply_pulses(const DeviceModel& model, DeviceState state, Polarity polarity, std::int64_t count);

/// Net change of one (potentiate, depress) pair started at g, for a device
/// with the given variation factors. Zero at the symmetry point.
double pair_net_change(const DeviceModel& model, double g, double ltp_scale = 1.0, double ltd_scale = 1.0) noexcept;

/// Fixed point of the (potentiate, depress) pair map for a device with the
/// given variation factors. Roots are bracketed on `grid_points` uniform
/// samples and refined by bisection. The smallest stable root wins; an
/// identically-zero net change yields g = 0. Without a root, the boundary the
/// pair map drifts toward is returned.
double pair_fixed_point(const DeviceModel& model, double ltp_scale, double ltd_scale, int grid_points = 1024);

/// Symmetry point of the nominal device (variation factors = 1).
double analytic_symmetry_point(const DeviceModel& model);

/// Nominal step at the symmetry point: mean of P_ltp(g*) and P_ltd(g*).
double reference_step(const DeviceModel& model);

/// Draws per-device multiplicative variation factors: 1 + sigma*z with z a
/// standard normal truncated to [-3, 3] (rejection), floored at 0.01.
DeviceState sample_device_state(const DeviceModel& model, double g, Rng& rng);

// Bundled synthetic family ---------------------------------------------------

/// Pulse widths with a bundled synthetic model, in seconds, ascending.
std::span<const double> bundled_pulse_widths() noexcept;

/// Bundled synthetic model for one pulse width (relative match 1e-6).
/// Throws Error{unknown_pulse_width} outside the family.
DeviceModel synthetic_device_family(double t_write);

/// Parses family keys such as "20ns", "1us", "0.2ms", "2ms".
double parse_pulse_width_key(const std::string& key);
std::string pulse_width_key(double t_write);

}  // namespace memtrain
