#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "memtrain/device_model.hpp"
#include "memtrain/error.hpp"

namespace memtrain::test {

inline const PulseSpec kLtp{1.5, 2e-3, Polarity::potentiate};
inline const PulseSpec kLtd{1.5, 2e-3, Polarity::depress};

inline DeviceModel constant_model(double c, double sigma = 0.0) {
  const std::vector<double> k{c, 0, 0, 0, 0, 0};
  return DeviceModel::make(k, k, 1e-6, 1e-4, sigma, kLtp, kLtd);
}

/// P_ltp = c (1 - g), P_ltd = c g.
inline DeviceModel soft_bound_model(double c, double sigma = 0.0) {
  const std::vector<double> ltp{c, -c, 0, 0, 0, 0};
  const std::vector<double> ltd{0, c, 0, 0, 0, 0};
  return DeviceModel::make(ltp, ltd, 1e-6, 1e-4, sigma, kLtp, kLtd);
}

inline DeviceModel linear_model(double a_ltp, double a_ltd, double kappa, double sigma = 0.0) {
  const std::vector<double> ltp{a_ltp * (1 + 0.5 * kappa), -a_ltp * kappa, 0, 0, 0, 0};
  const std::vector<double> ltd{a_ltd * (1 - 0.5 * kappa), a_ltd * kappa, 0, 0, 0, 0};
  return DeviceModel::make(ltp, ltd, 1e-7, 1e-6, sigma, kLtp, kLtd);
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

template <typename F>
ErrorKind error_kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  throw std::runtime_error("expected memtrain::Error");
}

/// Fresh directory under the system temp dir, removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("memtrain-" + tag + "-" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
};

inline std::filesystem::path data_dir() { return std::filesystem::path(MEMTRAIN_TEST_DATA_DIR); }

}  // namespace memtrain::test
