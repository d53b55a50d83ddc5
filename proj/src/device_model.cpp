#include "memtrain/device_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include "memtrain/error.hpp"

namespace memtrain {

namespace {

constexpr int kPositivitySamples = 1024;

Coeffs to_coeffs(std::span<const double> c, const char* what) {
  if (c.size() != 6) {
    throw Error(ErrorKind::invalid_argument,
                std::string(what) + " needs 6 coefficients, got " + std::to_string(c.size()));
  }
  Coeffs out{};
  std::copy(c.begin(), c.end(), out.begin());
  return out;
}

// A gradient may reach zero only at the bound it saturates against
// (g = 1 for LTP, g = 0 for LTD); soft-bound models such as c(1 - g) need that.
void require_positive(const Coeffs& c, const char* what, double saturating_end) {
  for (int i = 0; i < kPositivitySamples; ++i) {
    const double g = static_cast<double>(i) / (kPositivitySamples - 1);
    const double v = eval_poly(c, g);
    const bool ok = g == saturating_end ? v >= 0.0 : v > 0.0;
    if (!ok) {
      char buf[128];
      std::snprintf(buf, sizeof buf, "%s gradient is %.6g at g=%.6g", what, v, g);
      throw Error(ErrorKind::non_positive_gradient, buf);
    }
  }
}

}  // namespace

std::string_view to_string(Polarity p) noexcept {
  return p == Polarity::potentiate ? "P" : "D";
}

PulseSpec make_pulse_spec(double v_write, double t_write, Polarity polarity) {
  if (!(t_write > 0.0)) throw Error(ErrorKind::invalid_argument, "t_write must be > 0");
  if (!(v_write > 0.0)) throw Error(ErrorKind::invalid_argument, "v_write must be > 0");
  return PulseSpec{v_write, t_write, polarity};
}

DeviceModel DeviceModel::make(std::span<const double> ltp_coeffs, std::span<const double> ltd_coeffs,
                              double g_min, double g_max, double dtd_sigma,
                              const PulseSpec& ltp_spec, const PulseSpec& ltd_spec) {
  DeviceModel m;
  m.ltp_ = to_coeffs(ltp_coeffs, "ltp_coeffs");
  m.ltd_ = to_coeffs(ltd_coeffs, "ltd_coeffs");
  if (!(g_min < g_max) || !std::isfinite(g_min) || !std::isfinite(g_max)) {
    throw Error(ErrorKind::invalid_bounds, "g_min must be below g_max");
  }
  if (!(dtd_sigma >= 0.0)) throw Error(ErrorKind::invalid_argument, "dtd_sigma must be >= 0");
  require_positive(m.ltp_, "LTP", 1.0);
  require_positive(m.ltd_, "LTD", 0.0);
  m.g_min_ = g_min;
  m.g_max_ = g_max;
  m.dtd_sigma_ = dtd_sigma;
  m.ltp_spec_ = make_pulse_spec(ltp_spec.v_write, ltp_spec.t_write, Polarity::potentiate);
  m.ltd_spec_ = make_pulse_spec(ltd_spec.v_write, ltd_spec.t_write, Polarity::depress);
  return m;
}

DeviceModel DeviceModel::with_dtd_sigma(double sigma) const {
  return make(ltp_, ltd_, g_min_, g_max_, sigma, ltp_spec_, ltd_spec_);
}

PulseOutcome apply_pulses(const DeviceModel& model, DeviceState state, Polarity polarity, std::int64_t count) {
  if (count < 0) throw Error(ErrorKind::invalid_argument, "pulse count must be >= 0");
  PulseOutcome out{state, false};
  for (std::int64_t k = 0; k < count; ++k) {
    out.state.g = step_conductance(model, out.state, polarity, &out.saturated);
  }
  return out;
}

double pair_net_change(const DeviceModel& model, double g, double ltp_scale, double ltd_scale) noexcept {
  // The depression gradient is only defined on [0, 1], so the intermediate
  // state is clamped before it is evaluated; the potentiation step itself is
  // not, which keeps saturation artifacts out of the root search.
  const double up = ltp_scale * model.ltp_gradient(g);
  const double mid = std::clamp(g + up, 0.0, 1.0);
  return up - ltd_scale * model.ltd_gradient(mid);
}

double pair_fixed_point(const DeviceModel& model, double ltp_scale, double ltd_scale, int grid_points) {
  if (grid_points < 2) throw Error(ErrorKind::invalid_argument, "grid_points must be >= 2");
  const auto f = [&](double g) { return pair_net_change(model, g, ltp_scale, ltd_scale); };

  std::vector<double> grid(static_cast<std::size_t>(grid_points));
  std::vector<double> values(grid.size());
  for (int i = 0; i < grid_points; ++i) {
    grid[i] = static_cast<double>(i) / (grid_points - 1);
    values[i] = f(grid[i]);
  }

  const auto bisect = [&](double lo, double hi, double f_lo) {
    for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      const double fm = f(mid);
      if (fm == 0.0) return mid;
      if ((fm > 0.0) == (f_lo > 0.0)) {
        lo = mid;
        f_lo = fm;
      } else {
        hi = mid;
      }
    }
    // Return the endpoint with the smaller residual.
    return std::abs(f(lo)) <= std::abs(f(hi)) ? lo : hi;
  };

  // Stable roots (net change goes from positive to negative) attract the
  // alternating-pulse dynamics; prefer the smallest of those.
  double first_any = -1.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (values[i] == 0.0) {
      const bool stable = i == 0 || values[i - 1] >= 0.0;
      if (stable) return grid[i];
      if (first_any < 0.0) first_any = grid[i];
      continue;
    }
    if (i + 1 < grid.size() && values[i + 1] != 0.0 && (values[i] > 0.0) != (values[i + 1] > 0.0)) {
      const double root = bisect(grid[i], grid[i + 1], values[i]);
      if (values[i] > 0.0) return root;
      if (first_any < 0.0) first_any = root;
    }
  }
  if (first_any >= 0.0) return first_any;
  // No root: the pair map drifts monotonically toward one bound.
  return values.front() > 0.0 ? 1.0 : 0.0;
}

double analytic_symmetry_point(const DeviceModel& model) { return pair_fixed_point(model, 1.0, 1.0); }

double reference_step(const DeviceModel& model) {
  const double g = analytic_symmetry_point(model);
  return 0.5 * (model.ltp_gradient(g) + model.ltd_gradient(g));
}

DeviceState sample_device_state(const DeviceModel& model, double g, Rng& rng) {
  const double sigma = model.dtd_sigma();
  const auto draw = [&] {
    if (sigma == 0.0) return 1.0;
    double z = standard_normal(rng);
    while (std::abs(z) > 3.0) z = standard_normal(rng);
    return std::max(0.01, 1.0 + sigma * z);
  };
  DeviceState s;
  s.g = std::clamp(g, 0.0, 1.0);
  s.ltp_scale = draw();
  s.ltd_scale = draw();
  return s;
}

// Synthetic family ------------------------------------------------------------
//
// The measured fits are not available, so each pulse width gets a documented
// synthetic soft-bound model
//   P_ltp(g) = a_ltp * (1 - kappa * (g - 1/2)),
//   P_ltd(g) = a_ltd * (1 + kappa * (g - 1/2)).
// kappa sets the nonlinearity and a_ltp / a_ltd the asymmetry; together they
// place the symmetry point near 1/2 + (a_ltp - a_ltd) / (kappa (a_ltp + a_ltd)).
// Shorter pulses get smaller steps, more nonlinearity and more asymmetry.

namespace {

struct FamilyEntry {
  double t_write;
  double v_write;
  double a_ltp;
  double a_ltd;
  double kappa;
  double g_min;
  double g_max;
};

constexpr std::array<FamilyEntry, 4> kFamily{{
    {20e-9, 3.6, 0.00450, 0.00350, 0.40, 1.0e-7, 1.0e-6},
    {1e-6, 2.8, 0.00530, 0.00470, 0.30, 1.0e-7, 1.2e-6},
    {0.2e-3, 2.0, 0.00612, 0.00588, 0.20, 1.0e-7, 1.5e-6},
    {2e-3, 1.5, 0.00703, 0.00697, 0.15, 1.0e-7, 2.0e-6},
}};

constexpr std::array<double, 4> kWidths{20e-9, 1e-6, 0.2e-3, 2e-3};

}  // namespace

std::span<const double> bundled_pulse_widths() noexcept { return kWidths; }

DeviceModel synthetic_device_family(double t_write) {
  for (const auto& e : kFamily) {
    if (std::abs(t_write - e.t_write) <= 1e-6 * e.t_write) {
      const Coeffs ltp{e.a_ltp * (1.0 + 0.5 * e.kappa), -e.a_ltp * e.kappa, 0.0, 0.0, 0.0, 0.0};
      const Coeffs ltd{e.a_ltd * (1.0 - 0.5 * e.kappa), e.a_ltd * e.kappa, 0.0, 0.0, 0.0, 0.0};
      return DeviceModel::make(ltp, ltd, e.g_min, e.g_max, 0.05,
                               PulseSpec{e.v_write, e.t_write, Polarity::potentiate},
                               PulseSpec{e.v_write, e.t_write, Polarity::depress});
    }
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "no bundled model for t_write=%.6g s", t_write);
  throw Error(ErrorKind::unknown_pulse_width, buf);
}

double parse_pulse_width_key(const std::string& key) {
  std::size_t pos = 0;
  double value = 0.0;
  try {
    value = std::stod(key, &pos);
  } catch (const std::exception&) {
    throw Error(ErrorKind::unknown_pulse_width, "cannot parse pulse width '" + key + "'");
  }
  const std::string unit = key.substr(pos);
  double scale = 0.0;
  if (unit == "ns") scale = 1e-9;
  else if (unit == "us") scale = 1e-6;
  else if (unit == "ms") scale = 1e-3;
  else if (unit == "s") scale = 1.0;
  else throw Error(ErrorKind::unknown_pulse_width, "unknown unit in pulse width '" + key + "'");
  return value * scale;
}

std::string pulse_width_key(double t_write) {
  constexpr std::array<const char*, 4> kKeys{"20ns", "1us", "0.2ms", "2ms"};
  for (std::size_t i = 0; i < kWidths.size(); ++i) {
    if (std::abs(t_write - kWidths[i]) <= 1e-6 * kWidths[i]) return kKeys[i];
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%gs", t_write);
  return buf;
}

}  // namespace memtrain
