#pragma once

// Write-energy estimate per programming pulse, E = I(V) * V * t, with the
// device current from a modified Schottky emission model
//   I = A * alpha * T^{3/2} * (V/d) * mu * exp(-(phi_B - dphi(V)) / (k_B T))
//   dphi(V) = sqrt(q * (V/d) / (4 pi eps0 eps_r))   [volts, i.e. eV per electron]
// Constants are given in the customary mixed units (cm, eV) and converted
// to SI once, when SchottkyParams is constructed. See docs/energy.md.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "memtrain/analog_tile.hpp"
#include "memtrain/device_model.hpp"

namespace memtrain {

/// Constants as usually quoted, in mixed units.
struct SchottkyConstants {
  double area_um2 = 4.0;           // um^2
  double alpha = 3e-4;             // A s cm^-3 K^-3/2
  double temperature_k = 300.0;    // K
  double thickness_nm = 5.0;       // nm
  double mobility_cm2 = 8.9e-3;    // cm^2 s^-1 V^-1
  double barrier_ev = 0.19;        // eV
  double eps_r = 18.2;
  double k_b_ev = 8.617e-5;        // eV K^-1

  friend bool operator==(const SchottkyConstants&, const SchottkyConstants&) = default;
};

inline constexpr double kElementaryCharge = 1.602176634e-19;  // C
inline constexpr double kVacuumPermittivity = 8.8541878128e-12;  // F m^-1

class SchottkyParams {
 public:
  SchottkyParams() : SchottkyParams(SchottkyConstants{}) {}
  /// Throws Error{invalid_argument} unless every constant is strictly positive.
  explicit SchottkyParams(const SchottkyConstants& c);

  [[nodiscard]] const SchottkyConstants& constants() const noexcept { return constants_; }

  // SI values.
  [[nodiscard]] double area_m2() const noexcept { return area_m2_; }
  [[nodiscard]] double alpha_si() const noexcept { return alpha_si_; }        // A s m^-3 K^-3/2
  [[nodiscard]] double thickness_m() const noexcept { return thickness_m_; }
  [[nodiscard]] double mobility_si() const noexcept { return mobility_si_; }  // m^2 s^-1 V^-1
  [[nodiscard]] double thermal_ev() const noexcept { return thermal_ev_; }    // k_B T in eV

 private:
  SchottkyConstants constants_;
  double area_m2_ = 0.0;
  double alpha_si_ = 0.0;
  double thickness_m_ = 0.0;
  double mobility_si_ = 0.0;
  double thermal_ev_ = 0.0;
};

/// Parses a JSON object with any subset of the SchottkyConstants fields;
/// missing fields keep their defaults. Unknown keys are a SchemaError.
SchottkyConstants schottky_constants_from_json(const std::string& text);
SchottkyParams load_schottky_params(const std::filesystem::path& path);
std::string schottky_params_to_json(const SchottkyParams& p);

/// Image-force barrier lowering in eV at bias v.
double barrier_lowering_ev(double v, const SchottkyParams& p);

/// Device current in amperes. Throws Error{negative_voltage} for v < 0.
double schottky_current(double v, const SchottkyParams& p);

/// E = I(v_write) * v_write * t_write in joules.
double pulse_energy(const PulseSpec& spec, const SchottkyParams& p);

enum class EnergyMode {
  upper_bound,   // every pulse charged at the larger (LTP) amplitude and width
  per_polarity,  // each polarity charged at its own operating point
};

std::string_view to_string(EnergyMode m) noexcept;
EnergyMode parse_energy_mode(const std::string& s);

/// pulses_ltp * E(ltp) + pulses_ltd * E(ltd) under the given mode.
double epoch_energy(const PulseCounter& counter, const PulseSpec& spec_ltp, const PulseSpec& spec_ltd,
                    const SchottkyParams& p, EnergyMode mode = EnergyMode::upper_bound);

struct EnergyRecord {
  std::size_t tile = 0;
  int epoch = 0;
  std::int64_t pulses_ltp = 0;
  std::int64_t pulses_ltd = 0;
  double energy_ltp_pulse_j = 0.0;  // per-pulse energy charged to LTP pulses
  double energy_ltd_pulse_j = 0.0;
  double energy_j = 0.0;
};

/// Per-tile, per-epoch record of write pulses and energy. The running total
/// is accumulated in record order, so it equals the ordered sum of records.
class EnergyLedger {
 public:
  EnergyLedger() = default;
  EnergyLedger(SchottkyParams params, EnergyMode mode) : params_(std::move(params)), mode_(mode) {}

  const EnergyRecord& record(std::size_t tile, int epoch, const PulseCounter& counter, const PulseSpec& spec_ltp,
                             const PulseSpec& spec_ltd);

  [[nodiscard]] const std::vector<EnergyRecord>& records() const noexcept { return records_; }
  [[nodiscard]] double total_j() const noexcept { return total_j_; }
  [[nodiscard]] std::int64_t total_pulses() const noexcept { return total_pulses_; }
  [[nodiscard]] double epoch_total_j(int epoch) const noexcept;
  [[nodiscard]] EnergyMode mode() const noexcept { return mode_; }
  [[nodiscard]] const SchottkyParams& params() const noexcept { return params_; }

 private:
  SchottkyParams params_;
  EnergyMode mode_ = EnergyMode::upper_bound;
  std::vector<EnergyRecord> records_;
  double total_j_ = 0.0;
  std::int64_t total_pulses_ = 0;
};

}  // namespace memtrain
