#pragma once

// Experiment configs, single runs, sweeps and report tables.
//
// A run directory holds:
//   config.json   resolved configuration
//   epochs.jsonl  one EpochReport per line
//   epochs.csv    epoch,accuracy,pulses_ltp,pulses_ltd,energy_j
//   status.json   {"run_id", "status": "ok" | "failed", "error"}
// Completed runs are reused when their run id matches.

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "memtrain/mnist.hpp"
#include "memtrain/trainers.hpp"

namespace memtrain {

/// Bumped whenever simulated results change for an unchanged config.
inline constexpr const char* kSimulatorVersion = "memtrain-sim-1";

inline constexpr const char* kEpochCsvHeader = "epoch,accuracy,pulses_ltp,pulses_ltd,energy_j";

struct DataSpec {
  std::string dir;              // empty: MEMTRAIN_DATA_DIR
  std::size_t train_limit = 0;  // 0: all
  std::size_t test_limit = 0;

  friend bool operator==(const DataSpec&, const DataSpec&) = default;
};

struct ExperimentConfig {
  std::string name;
  TrainConfig train;
  std::string device = "2ms";  // bundled family key, used when model_path is empty
  std::string model_path;      // exported DeviceModel JSON
  DataSpec data;
};

/// Applies the keys of a JSON object on top of `base`. Unknown keys are a
/// ConfigError so typos do not silently fall back to defaults.
ExperimentConfig config_from_json(const std::string& text, const ExperimentConfig& base = {});
ExperimentConfig load_config(const std::filesystem::path& path);
/// Every field, with stable key order.
std::string config_to_json(const ExperimentConfig& config);

/// Content hash (16 hex digits) of the result-relevant config: everything
/// except name and data.dir, with a model file replaced by its contents.
std::string run_id(const ExperimentConfig& config);

/// One model per layer (a single shared one here); empty for the digital baseline.
std::vector<DeviceModel> resolve_models(const ExperimentConfig& config);

/// Loads MNIST from spec.dir (or MEMTRAIN_DATA_DIR) and applies the limits.
MnistSplit load_data(const DataSpec& spec);

std::string epoch_report_to_json(const EpochReport& r);
EpochReport epoch_report_from_json(const std::string& line);

struct RunOutcome {
  std::string run_id;
  ExperimentConfig config;
  bool ok = false;
  bool reused = false;
  std::string error;
  double g_star = 0.0;  // analytic symmetry point of the device; 0 for digital
  std::vector<EpochReport> reports;
};

/// Trains one configuration and writes its run directory.
RunOutcome run_experiment(const ExperimentConfig& config, const MnistSplit& data,
                          const std::filesystem::path& run_dir, const EpochCallback& on_epoch = {});

struct SweepPlan {
  std::vector<ExperimentConfig> runs;
  unsigned jobs = 0;  // 0: hardware concurrency
};

/// JSON plan: {"base": {...}, "runs": [{...}, ...], "grid": {"key": [values]}, "jobs": n}.
/// Each entry of "runs" (or a single empty entry) is crossed with the grid.
/// Throws ConfigError on an empty plan or duplicate run ids.
SweepPlan sweep_plan_from_json(const std::string& text);
SweepPlan load_sweep_plan(const std::filesystem::path& path);

struct SweepSummary {
  std::vector<RunOutcome> runs;
  [[nodiscard]] bool all_ok() const noexcept;
};

/// Runs every configuration under out_dir/runs/<run_id>, isolating failures,
/// then writes out_dir/combined.csv and out_dir/summary.csv.
SweepSummary run_sweep(const SweepPlan& plan, const std::filesystem::path& out_dir);

/// Reads all completed runs under out_dir/runs and writes plot-ready tables
/// into out_dir/report. Returns the files written. Throws Error{missing_runs}
/// when nothing completed.
std::vector<std::filesystem::path> write_report(const std::filesystem::path& out_dir, double accuracy_target);

/// Loads the finished runs of a sweep directory, ordered by (name, run_id).
std::vector<RunOutcome> load_runs(const std::filesystem::path& out_dir);

}  // namespace memtrain
