#include "memtrain/error.hpp"

namespace memtrain {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::invalid_argument: return "InvalidArgument";
    case ErrorKind::invalid_bounds: return "InvalidBounds";
    case ErrorKind::non_positive_gradient: return "NonPositiveGradient";
    case ErrorKind::unknown_pulse_width: return "UnknownPulseWidth";
    case ErrorKind::parse_error: return "ParseError";
    case ErrorKind::schema_error: return "SchemaError";
    case ErrorKind::schema_version_mismatch: return "SchemaVersionMismatch";
    case ErrorKind::empty_series: return "EmptySeries";
    case ErrorKind::insufficient_points: return "InsufficientPoints";
    case ErrorKind::degenerate_range: return "DegenerateRange";
    case ErrorKind::no_convergence: return "NoConvergence";
    case ErrorKind::io_error: return "IoError";
    case ErrorKind::invalid_shape: return "InvalidShape";
    case ErrorKind::shape_mismatch: return "ShapeMismatch";
    case ErrorKind::reference_frozen: return "ReferenceFrozen";
    case ErrorKind::negative_voltage: return "NegativeVoltage";
    case ErrorKind::config_error: return "ConfigError";
    case ErrorKind::data_error: return "DataError";
    case ErrorKind::bad_magic: return "BadMagic";
    case ErrorKind::truncated_file: return "TruncatedFile";
    case ErrorKind::count_mismatch: return "CountMismatch";
    case ErrorKind::missing_runs: return "MissingRuns";
  }
  return "Unknown";
}

}  // namespace memtrain
