#include <doctest.h>

#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "memtrain/device_model.hpp"

using namespace memtrain;
using namespace memtrain::test;

TEST_CASE("make accepts a constant symmetric model") {
  const auto m = constant_model(0.01);
  CHECK(m.ltp_gradient(0.3) == doctest::Approx(0.01));
  CHECK(m.ltd_gradient(0.9) == doctest::Approx(0.01));
  CHECK(m.g_min() == 1e-6);
  CHECK(m.g_max() == 1e-4);
  CHECK(m.to_siemens(0.0) == 1e-6);
  CHECK(m.to_normalized(m.to_siemens(0.25)) == doctest::Approx(0.25));
}

TEST_CASE("make rejects invalid models") {
  const std::vector<double> ok{0.01, 0, 0, 0, 0, 0};
  // P(0.5) = -0.1 via 0.1 - 0.4 g.
  const std::vector<double> neg{0.1, -0.4, 0, 0, 0, 0};
  CHECK(error_kind_of([&] { (void)DeviceModel::make(neg, ok, 1e-6, 1e-4, 0, kLtp, kLtd); }) ==
        ErrorKind::non_positive_gradient);
  CHECK(error_kind_of([&] { (void)DeviceModel::make(ok, neg, 1e-6, 1e-4, 0, kLtp, kLtd); }) ==
        ErrorKind::non_positive_gradient);
  CHECK(error_kind_of([&] { (void)DeviceModel::make(ok, ok, 1e-4, 1e-6, 0, kLtp, kLtd); }) ==
        ErrorKind::invalid_bounds);
  CHECK(error_kind_of([&] { (void)DeviceModel::make(ok, ok, 1e-6, 1e-6, 0, kLtp, kLtd); }) ==
        ErrorKind::invalid_bounds);
  CHECK(error_kind_of([&] { (void)DeviceModel::make(ok, ok, 1e-6, 1e-4, -0.1, kLtp, kLtd); }) ==
        ErrorKind::invalid_argument);
  const std::vector<double> short_coeffs{0.01, 0};
  CHECK(error_kind_of([&] { (void)DeviceModel::make(short_coeffs, ok, 1e-6, 1e-4, 0, kLtp, kLtd); }) ==
        ErrorKind::invalid_argument);
  CHECK(error_kind_of([&] { (void)make_pulse_spec(1.0, 0.0, Polarity::potentiate); }) ==
        ErrorKind::invalid_argument);
  CHECK(error_kind_of([&] { (void)make_pulse_spec(0.0, 1e-6, Polarity::potentiate); }) ==
        ErrorKind::invalid_argument);
}

TEST_CASE("gradients may vanish only at their saturating bound") {
  CHECK_NOTHROW((void)soft_bound_model(0.1));
  // LTP zero at g = 0 is not allowed.
  const std::vector<double> ltp_zero_low{0, 0.1, 0, 0, 0, 0};
  const std::vector<double> ok{0.01, 0, 0, 0, 0, 0};
  CHECK(error_kind_of([&] { (void)DeviceModel::make(ltp_zero_low, ok, 1e-6, 1e-4, 0, kLtp, kLtd); }) ==
        ErrorKind::non_positive_gradient);
}

TEST_CASE("apply_pulses closed forms") {
  const auto m = soft_bound_model(0.1);
  const DeviceState s0{0.0, 1.0, 1.0};
  CHECK(apply_pulses(m, s0, Polarity::potentiate, 0).state == s0);
  CHECK(apply_pulses(m, s0, Polarity::potentiate, 1).state.g == doctest::Approx(0.1).epsilon(1e-15));

  // 50 pulses: g_{n+1} = g_n + 0.1 (1 - g_n), so 1 - g_n = 0.9^n.
  double loop = 0.0;
  for (int i = 0; i < 50; ++i) loop = loop + 0.1 * (1.0 - loop);
  const double got = apply_pulses(m, s0, Polarity::potentiate, 50).state.g;
  CHECK(got == doctest::Approx(1.0 - std::pow(0.9, 50)).epsilon(1e-12));
  CHECK(got == loop);

  CHECK(error_kind_of([&] { (void)apply_pulses(m, s0, Polarity::potentiate, -1); }) == ErrorKind::invalid_argument);
}

TEST_CASE("apply_pulses clamps and reports saturation") {
  const auto m = constant_model(0.3);
  auto out = apply_pulses(m, DeviceState{0.9, 1.0, 1.0}, Polarity::potentiate, 1);
  CHECK(out.state.g == 1.0);
  CHECK(out.saturated);
  out = apply_pulses(m, DeviceState{0.2, 1.0, 1.0}, Polarity::depress, 3);
  CHECK(out.state.g == 0.0);
  CHECK(out.saturated);
  out = apply_pulses(m, DeviceState{0.5, 1.0, 1.0}, Polarity::depress, 1);
  CHECK_FALSE(out.saturated);
}

TEST_CASE("property: g stays in [0, 1] under random pulse sequences") {
  Rng rng = make_rng(7, 0);
  const auto m = linear_model(0.05, 0.03, 0.8, 0.05);
  for (int trial = 0; trial < 200; ++trial) {
    DeviceState s = sample_device_state(m, uniform01(rng), rng);
    for (int k = 0; k < 200; ++k) {
      const auto pol = uniform01(rng) < 0.5 ? Polarity::potentiate : Polarity::depress;
      const auto n = static_cast<std::int64_t>(uniform01(rng) * 5);
      s = apply_pulses(m, s, pol, n).state;
      REQUIRE(s.g >= 0.0);
      REQUIRE(s.g <= 1.0);
    }
  }
}

TEST_CASE("property: repeated same-polarity pulses are monotone and bounded") {
  const auto m = linear_model(0.02, 0.015, 0.5);
  DeviceState s{0.3, 1.0, 1.0};
  double prev = s.g;
  for (int k = 0; k < 500; ++k) {
    s = apply_pulses(m, s, Polarity::potentiate, 1).state;
    CHECK(s.g >= prev);
    CHECK(s.g <= 1.0);
    prev = s.g;
  }
  for (int k = 0; k < 500; ++k) {
    s = apply_pulses(m, s, Polarity::depress, 1).state;
    CHECK(s.g <= prev);
    CHECK(s.g >= 0.0);
    prev = s.g;
  }
}

TEST_CASE("property: two pulses equal one pulse applied twice, bitwise") {
  Rng rng = make_rng(11, 0);
  const auto m = linear_model(0.03, 0.02, 0.7, 0.05);
  for (int trial = 0; trial < 100; ++trial) {
    const DeviceState s = sample_device_state(m, uniform01(rng), rng);
    for (auto pol : {Polarity::potentiate, Polarity::depress}) {
      const auto once = apply_pulses(m, apply_pulses(m, s, pol, 1).state, pol, 1).state;
      CHECK(apply_pulses(m, s, pol, 2).state == once);
    }
  }
}

TEST_CASE("analytic symmetry point") {
  SUBCASE("soft-bound symmetric model sits near 1/2 and matches a pair-simulation oracle") {
    const auto m = soft_bound_model(0.01);
    const double g_star = analytic_symmetry_point(m);
    // Oracle: iterate the (potentiate, depress) pair map to convergence.
    double g = 0.2;
    for (int k = 0; k < 200000; ++k) {
      const double up = std::min(1.0, g + 0.01 * (1.0 - g));
      const double next = std::max(0.0, up - 0.01 * up);
      if (std::abs(next - g) < 1e-15) break;
      g = next;
    }
    CHECK(std::abs(g_star - 0.5) < 0.01);
    CHECK(std::abs(g_star - g) < 1e-6);
  }
  SUBCASE("identical constant gradients: every g is fixed, smallest wins") {
    CHECK(analytic_symmetry_point(constant_model(0.01)) == 0.0);
  }
  SUBCASE("LTP dominating everywhere drifts to the upper bound") {
    const std::vector<double> ltp{0.2, 0, 0, 0, 0, 0};
    const std::vector<double> ltd{0.01, 0, 0, 0, 0, 0};
    CHECK(analytic_symmetry_point(DeviceModel::make(ltp, ltd, 1e-6, 1e-4, 0, kLtp, kLtd)) == 1.0);
  }
  SUBCASE("LTD dominating everywhere drifts to the lower bound") {
    const std::vector<double> ltp{0.01, 0, 0, 0, 0, 0};
    const std::vector<double> ltd{0.2, 0, 0, 0, 0, 0};
    CHECK(analytic_symmetry_point(DeviceModel::make(ltp, ltd, 1e-6, 1e-4, 0, kLtp, kLtd)) == 0.0);
  }
}

TEST_CASE("property: one unsaturated pair from an interior g* returns within 1e-6") {
  Rng rng = make_rng(3, 0);
  int interior = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const double a_ltp = 0.002 + 0.03 * uniform01(rng);
    const double a_ltd = 0.002 + 0.03 * uniform01(rng);
    const double kappa = 0.2 + 1.6 * uniform01(rng);
    const auto m = linear_model(a_ltp, a_ltd, kappa);
    const double g_star = analytic_symmetry_point(m);
    if (g_star <= 0.0 || g_star >= 1.0) continue;
    ++interior;
    const auto up = apply_pulses(m, DeviceState{g_star, 1, 1}, Polarity::potentiate, 1);
    if (up.saturated) continue;
    const auto back = apply_pulses(m, up.state, Polarity::depress, 1);
    REQUIRE_FALSE(back.saturated);
    CHECK(std::abs(back.state.g - g_star) < 1e-6);
  }
  CHECK(interior > 50);
}

TEST_CASE("pair_fixed_point tracks variation factors") {
  const auto m = linear_model(0.01, 0.01, 0.5);
  const double nominal = pair_fixed_point(m, 1.0, 1.0);
  CHECK(pair_fixed_point(m, 1.1, 1.0) > nominal);
  CHECK(pair_fixed_point(m, 1.0, 1.1) < nominal);
  CHECK(error_kind_of([&] { (void)pair_fixed_point(m, 1.0, 1.0, 1); }) == ErrorKind::invalid_argument);
}

TEST_CASE("reference step is the mean gradient at g*") {
  const auto m = linear_model(0.012, 0.008, 0.6);
  const double g = analytic_symmetry_point(m);
  CHECK(reference_step(m) == doctest::Approx(0.5 * (m.ltp_gradient(g) + m.ltd_gradient(g))));
}

TEST_CASE("property: variation factors have the configured spread") {
  const auto m = constant_model(0.01, 0.05);
  Rng rng = make_rng(99, 0);
  const int n = 10000;
  double sum = 0.0, sum2 = 0.0, lo = 10.0, hi = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto s = sample_device_state(m, 0.5, rng);
    sum += s.ltp_scale;
    sum2 += s.ltp_scale * s.ltp_scale;
    lo = std::min(lo, s.ltp_scale);
    hi = std::max(hi, s.ltp_scale);
    CHECK(s.g == 0.5);
  }
  const double mean = sum / n;
  const double sd = std::sqrt(sum2 / n - mean * mean);
  CHECK(std::abs(sd - 0.05) < 0.005);
  CHECK(std::abs(mean - 1.0) < 0.003);
  CHECK(lo >= 1.0 - 3 * 0.05);
  CHECK(hi <= 1.0 + 3 * 0.05);
}

TEST_CASE("variation factors are floored at 0.01") {
  const auto m = constant_model(0.01, 2.0);
  Rng rng = make_rng(5, 0);
  for (int i = 0; i < 2000; ++i) {
    const auto s = sample_device_state(m, 0.5, rng);
    CHECK(s.ltp_scale >= 0.01);
    CHECK(s.ltd_scale >= 0.01);
  }
  const auto ideal = constant_model(0.01, 0.0);
  const auto s = sample_device_state(ideal, 2.0, rng);
  CHECK(s.ltp_scale == 1.0);
  CHECK(s.g == 1.0);
}

TEST_CASE("bundled synthetic family") {
  const auto widths = bundled_pulse_widths();
  REQUIRE(widths.size() == 4);
  double prev_v = 1e9, prev_step = 0.0;
  for (double t : widths) {
    const auto m = synthetic_device_family(t);
    CHECK(m.ltp_spec().t_write == t);
    CHECK(m.ltp_spec().v_write < prev_v);  // shorter pulses need higher amplitude
    CHECK(reference_step(m) > prev_step);  // shorter pulses move less per pulse
    CHECK(m.dtd_sigma() == 0.05);
    prev_v = m.ltp_spec().v_write;
    prev_step = reference_step(m);
  }
  CHECK(std::abs(analytic_symmetry_point(synthetic_device_family(2e-3)) - 0.5) < 0.05);
  CHECK(std::abs(analytic_symmetry_point(synthetic_device_family(20e-9)) - 0.5) >= 0.25);
  CHECK(synthetic_device_family(20e-9).ltp_spec().v_write > synthetic_device_family(2e-3).ltp_spec().v_write);
  // Asymmetry shrinks as pulses lengthen.
  double prev = 1.0;
  for (double t : widths) {
    const double d = std::abs(analytic_symmetry_point(synthetic_device_family(t)) - 0.5);
    CHECK(d < prev);
    prev = d;
  }
  CHECK(error_kind_of([] { (void)synthetic_device_family(5.0); }) == ErrorKind::unknown_pulse_width);
}

TEST_CASE("pulse width keys") {
  CHECK(parse_pulse_width_key("20ns") == doctest::Approx(20e-9));
  CHECK(parse_pulse_width_key("1us") == doctest::Approx(1e-6));
  CHECK(parse_pulse_width_key("0.2ms") == doctest::Approx(0.2e-3));
  CHECK(parse_pulse_width_key("2ms") == doctest::Approx(2e-3));
  CHECK(parse_pulse_width_key("1.5s") == doctest::Approx(1.5));
  CHECK(error_kind_of([] { (void)parse_pulse_width_key("fast"); }) == ErrorKind::unknown_pulse_width);
  CHECK(error_kind_of([] { (void)parse_pulse_width_key("3parsecs"); }) == ErrorKind::unknown_pulse_width);
  for (double t : bundled_pulse_widths()) CHECK(parse_pulse_width_key(pulse_width_key(t)) == doctest::Approx(t));
  CHECK(pulse_width_key(0.2e-3) == "0.2ms");
}
