#pragma once

// Pulsed-measurement ingestion, piecewise polynomial fitting and the
// alternating-pulse symmetry-point protocol.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "memtrain/device_model.hpp"
#include "memtrain/error.hpp"

namespace memtrain {

/// Exact header of the measurement CSV.
inline constexpr std::string_view kMeasurementHeader = "pulse_index,v_write_V,t_write_s,polarity,g_read_S";

struct MeasurementRow {
  long long pulse_index = 0;
  double v_write = 0.0;  // V, magnitude
  double t_write = 0.0;  // s
  Polarity polarity = Polarity::potentiate;
  double g_read = 0.0;   // S
  int ramp = 0;          // index of the contiguous same-polarity block this row belongs to
};

struct MeasurementSeries {
  std::vector<MeasurementRow> rows;
  std::string device_id;
  double read_voltage = 0.1;  // V; reads are bipolar at +/- this magnitude
};

/// Parses a measurement CSV. Leading `# key=value` lines carry metadata
/// (`device_id`, `read_voltage`). Rows are grouped into ramps of contiguous
/// polarity and sorted by pulse_index within each ramp.
MeasurementSeries load_measurements(const std::filesystem::path& path);
MeasurementSeries parse_measurements(std::istream& in, const std::string& source = "<stream>");

void write_measurements(const MeasurementSeries& series, const std::filesystem::path& path);

/// Rows whose (v_write, t_write) match the operating point within 1e-6 relative.
MeasurementSeries select_operating_point(const MeasurementSeries& series, double v_write, double t_write);

struct BranchFit {
  Coeffs coeffs{};
  std::size_t points = 0;
  double rms_residual = 0.0;    // normalized conductance per pulse
  double condition_number = 0.0;  // of the scaled normal matrix
};

struct FitReport {
  BranchFit ltp;
  BranchFit ltd;
  double g_min = 0.0;  // observed, S
  double g_max = 0.0;  // observed, S
};

struct GradientFit {
  Coeffs ltp_coeffs{};
  Coeffs ltd_coeffs{};
  FitReport report;
};

/// Forward-difference gradients between consecutive same-ramp reads,
/// normalized by the observed conductance range, fitted with a degree-5
/// least-squares polynomial against the pre-pulse normalized conductance.
/// Each branch needs at least 7 gradient samples.
GradientFit fit_gradients(const MeasurementSeries& series);

/// Ordinary least-squares degree-5 fit of y against x in [0, 1], solved via the
/// normal equations after mapping x to [-1, 1].
BranchFit fit_quintic(const std::vector<double>& x, const std::vector<double>& y);

/// Fits a series and wraps the result in a validated DeviceModel.
DeviceModel fit_device_model(const MeasurementSeries& series, double v_write, double t_write, double dtd_sigma = 0.05);

/// Generates a noiseless (or noisy, when noise_rel > 0) ramp trace from a
/// model: `pulses` potentiation pulses from g = 0, then `pulses` depression
/// pulses from g = 1. Gaussian read noise with standard deviation
/// noise_rel times the mean absolute gradient is added to every read.
MeasurementSeries synthesize_trace(const DeviceModel& model, int pulses, double noise_rel = 0.0,
                                   std::uint64_t seed = 0);

struct ProtocolOptions {
  int n_prime = 50;
  int max_cycles = 1000;
  double tol = 1e-5;
  double g_start = 0.5;
};

struct ProtocolResult {
  double g_star = 0.0;
  std::vector<double> trace;  // conductance after every pulse, starting with g_start
  int cycles = 0;
};

/// Raised when the alternating phase exhausts max_cycles; carries the best
/// estimate and the trace.
class NoConvergenceError : public Error {
 public:
  NoConvergenceError(const std::string& what, ProtocolResult partial)
      : Error(ErrorKind::no_convergence, what), partial_(std::move(partial)) {}
  [[nodiscard]] const ProtocolResult& partial() const noexcept { return partial_; }

 private:
  ProtocolResult partial_;
};

/// n_prime depression pulses, n_prime potentiation pulses, then alternating
/// (depress, potentiate) pairs on a nominal device until the post-depression
/// conductance changes by less than tol between pairs. g_star is that
/// post-depression conductance, the fixed point of the (potentiate, depress)
/// pair map.
ProtocolResult find_symmetry_point_protocol(const DeviceModel& model, const ProtocolOptions& options = {});

void write_protocol_trace(const ProtocolResult& result, const std::filesystem::path& path);

// Device-model JSON ----------------------------------------------------------

inline constexpr int kModelSchemaVersion = 1;

std::string model_to_json(const DeviceModel& model);
DeviceModel model_from_json(const std::string& text);
void export_model(const DeviceModel& model, const std::filesystem::path& path);
DeviceModel import_model(const std::filesystem::path& path);

}  // namespace memtrain
