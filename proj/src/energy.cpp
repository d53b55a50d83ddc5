#include "memtrain/energy.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numbers>
#include <sstream>

#include "memtrain/error.hpp"

namespace memtrain {

SchottkyParams::SchottkyParams(const SchottkyConstants& c) : constants_(c) {
  for (double v : {c.area_um2, c.alpha, c.temperature_k, c.thickness_nm, c.mobility_cm2, c.barrier_ev, c.eps_r,
                   c.k_b_ev}) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw Error(ErrorKind::invalid_argument, "Schottky constants must be finite and > 0");
    }
  }
  area_m2_ = c.area_um2 * 1e-12;    // 1 um^2 = 1e-12 m^2
  alpha_si_ = c.alpha * 1e6;        // cm^-3 -> m^-3
  thickness_m_ = c.thickness_nm * 1e-9;
  mobility_si_ = c.mobility_cm2 * 1e-4;  // cm^2 -> m^2
  thermal_ev_ = c.k_b_ev * c.temperature_k;
}

SchottkyConstants schottky_constants_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (!j.is_object()) throw Error(ErrorKind::schema_error, "Schottky parameters must be a JSON object");
    SchottkyConstants c;
    for (const auto& [key, value] : j.items()) {
      double* field = key == "area_um2"        ? &c.area_um2
                      : key == "alpha"         ? &c.alpha
                      : key == "temperature_k" ? &c.temperature_k
                      : key == "thickness_nm"  ? &c.thickness_nm
                      : key == "mobility_cm2"  ? &c.mobility_cm2
                      : key == "barrier_ev"    ? &c.barrier_ev
                      : key == "eps_r"         ? &c.eps_r
                      : key == "k_b_ev"        ? &c.k_b_ev
                                               : nullptr;
      if (field == nullptr) throw Error(ErrorKind::schema_error, "unknown Schottky parameter '" + key + "'");
      *field = value.get<double>();
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse_error, e.what());
  }
}

SchottkyParams load_schottky_params(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io_error, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return SchottkyParams(schottky_constants_from_json(buf.str()));
}

std::string schottky_params_to_json(const SchottkyParams& p) {
  const auto& c = p.constants();
  nlohmann::ordered_json j{{"area_um2", c.area_um2},         {"alpha", c.alpha},
                           {"temperature_k", c.temperature_k}, {"thickness_nm", c.thickness_nm},
                           {"mobility_cm2", c.mobility_cm2},   {"barrier_ev", c.barrier_ev},
                           {"eps_r", c.eps_r},                 {"k_b_ev", c.k_b_ev}};
  return j.dump(2);
}

double barrier_lowering_ev(double v, const SchottkyParams& p) {
  const double field = v / p.thickness_m();
  return std::sqrt(kElementaryCharge * field /
                   (4.0 * std::numbers::pi * kVacuumPermittivity * p.constants().eps_r));
}

double schottky_current(double v, const SchottkyParams& p) {
  if (v < 0.0 || std::isnan(v)) throw Error(ErrorKind::negative_voltage, "bias must be >= 0 V");
  if (v == 0.0) return 0.0;
  const double t = p.constants().temperature_k;
  const double field = v / p.thickness_m();
  const double prefactor = p.area_m2() * p.alpha_si() * std::pow(t, 1.5) * field * p.mobility_si();
  const double exponent = -(p.constants().barrier_ev - barrier_lowering_ev(v, p)) / p.thermal_ev();
  return prefactor * std::exp(exponent);
}

double pulse_energy(const PulseSpec& spec, const SchottkyParams& p) {
  if (spec.t_write == 0.0) return 0.0;
  return schottky_current(spec.v_write, p) * spec.v_write * spec.t_write;
}

std::string_view to_string(EnergyMode m) noexcept {
  return m == EnergyMode::upper_bound ? "upper_bound" : "per_polarity";
}

EnergyMode parse_energy_mode(const std::string& s) {
  if (s == "upper_bound") return EnergyMode::upper_bound;
  if (s == "per_polarity") return EnergyMode::per_polarity;
  throw Error(ErrorKind::config_error, "unknown energy mode '" + s + "'");
}

namespace {

std::pair<double, double> per_pulse(const PulseSpec& ltp, const PulseSpec& ltd, const SchottkyParams& p,
                                    EnergyMode mode) {
  if (mode == EnergyMode::per_polarity) return {pulse_energy(ltp, p), pulse_energy(ltd, p)};
  const PulseSpec bound{std::max(ltp.v_write, ltd.v_write), std::max(ltp.t_write, ltd.t_write),
                        Polarity::potentiate};
  const double e = pulse_energy(bound, p);
  return {e, e};
}

}  // namespace

double epoch_energy(const PulseCounter& counter, const PulseSpec& spec_ltp, const PulseSpec& spec_ltd,
                    const SchottkyParams& p, EnergyMode mode) {
  const auto [e_ltp, e_ltd] = per_pulse(spec_ltp, spec_ltd, p, mode);
  return static_cast<double>(counter.potentiation) * e_ltp + static_cast<double>(counter.depression) * e_ltd;
}

const EnergyRecord& EnergyLedger::record(std::size_t tile, int epoch, const PulseCounter& counter,
                                         const PulseSpec& spec_ltp, const PulseSpec& spec_ltd) {
  const auto [e_ltp, e_ltd] = per_pulse(spec_ltp, spec_ltd, params_, mode_);
  EnergyRecord r;
  r.tile = tile;
  r.epoch = epoch;
  r.pulses_ltp = counter.potentiation;
  r.pulses_ltd = counter.depression;
  r.energy_ltp_pulse_j = e_ltp;
  r.energy_ltd_pulse_j = e_ltd;
  r.energy_j = static_cast<double>(r.pulses_ltp) * e_ltp + static_cast<double>(r.pulses_ltd) * e_ltd;
  records_.push_back(r);
  total_j_ += r.energy_j;
  total_pulses_ += r.pulses_ltp + r.pulses_ltd;
  return records_.back();
}

double EnergyLedger::epoch_total_j(int epoch) const noexcept {
  double sum = 0.0;
  for (const auto& r : records_) {
    if (r.epoch == epoch) sum += r.energy_j;
  }
  return sum;
}

}  // namespace memtrain
