#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace memtrain {

enum class ErrorKind {
  invalid_argument,
  invalid_bounds,
  non_positive_gradient,
  unknown_pulse_width,
  parse_error,
  schema_error,
  schema_version_mismatch,
  empty_series,
  insufficient_points,
  degenerate_range,
  no_convergence,
  io_error,
  invalid_shape,
  shape_mismatch,
  reference_frozen,
  negative_voltage,
  config_error,
  data_error,
  bad_magic,
  truncated_file,
  count_mismatch,
  missing_runs,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Every failure raised by the library carries a machine-checkable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace memtrain
