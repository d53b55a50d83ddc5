#include "memtrain/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <map>
#include <sstream>
#include <thread>
#include <tuple>

#include "memtrain/characterization.hpp"
#include "memtrain/error.hpp"

namespace memtrain {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io_error, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

/// Writes via a temporary sibling and a rename so readers never see partial files.
void write_file(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::io_error, "cannot write " + tmp.string());
    out << text;
    if (!out) throw Error(ErrorKind::io_error, "write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

InputScaling parse_scaling(const std::string& s) {
  if (s == "abs_max") return InputScaling::abs_max;
  if (s == "none") return InputScaling::none;
  throw Error(ErrorKind::config_error, "unknown input_scaling '" + s + "'");
}

std::string_view to_string(InputScaling s) { return s == InputScaling::abs_max ? "abs_max" : "none"; }

json config_json(const ExperimentConfig& c) {
  const TrainConfig& t = c.train;
  json schottky = json::parse(schottky_params_to_json(SchottkyParams(t.schottky)));
  return json{
      {"name", c.name},
      {"device", c.device},
      {"model", c.model_path},
      {"data", {{"dir", c.data.dir}, {"train_limit", c.data.train_limit}, {"test_limit", c.data.test_limit}}},
      {"layer_sizes", t.layer_sizes},
      {"lr", t.lr},
      {"epochs", t.epochs},
      {"algorithm", std::string(to_string(t.algorithm))},
      {"seed", t.seed},
      {"w_max", t.w_max},
      {"dac_bits", t.dac_bits},
      {"adc_bits", t.adc_bits},
      {"adc_range_factor", t.adc_range_factor},
      {"input_scaling", std::string(to_string(t.scaling))},
      {"rounding", std::string(to_string(t.rounding))},
      {"pair_policy", std::string(to_string(t.pair_policy))},
      {"reference_g", t.reference_g},
      {"mp_threshold", t.mp_threshold},
      {"dtd_sigma", t.dtd_sigma},
      {"symmetry_grid", t.symmetry_grid},
      {"energy_mode", std::string(to_string(t.energy_mode))},
      {"schottky", schottky},
      {"histogram_bins", t.histogram_bins},
  };
}

void apply_config(ExperimentConfig& c, const json& j) {
  if (!j.is_object()) throw Error(ErrorKind::config_error, "config must be a JSON object");
  TrainConfig& t = c.train;
  for (const auto& [key, v] : j.items()) {
    if (key == "name") c.name = v.get<std::string>();
    else if (key == "device") c.device = v.get<std::string>();
    else if (key == "model") c.model_path = v.get<std::string>();
    else if (key == "data") {
      if (!v.is_object()) throw Error(ErrorKind::config_error, "data must be an object");
      for (const auto& [dk, dv] : v.items()) {
        if (dk == "dir") c.data.dir = dv.get<std::string>();
        else if (dk == "train_limit") c.data.train_limit = dv.get<std::size_t>();
        else if (dk == "test_limit") c.data.test_limit = dv.get<std::size_t>();
        else throw Error(ErrorKind::config_error, "unknown data key '" + dk + "'");
      }
    } else if (key == "layer_sizes") t.layer_sizes = v.get<std::vector<std::size_t>>();
    else if (key == "lr") t.lr = v.get<double>();
    else if (key == "epochs") t.epochs = v.get<int>();
    else if (key == "algorithm") t.algorithm = parse_algorithm(v.get<std::string>());
    else if (key == "seed") t.seed = v.get<std::uint64_t>();
    else if (key == "w_max") t.w_max = v.get<double>();
    else if (key == "dac_bits") t.dac_bits = v.get<int>();
    else if (key == "adc_bits") t.adc_bits = v.get<int>();
    else if (key == "converter_bits") t.dac_bits = t.adc_bits = v.get<int>();
    else if (key == "adc_range_factor") t.adc_range_factor = v.get<double>();
    else if (key == "input_scaling") t.scaling = parse_scaling(v.get<std::string>());
    else if (key == "rounding") t.rounding = parse_rounding(v.get<std::string>());
    else if (key == "pair_policy") t.pair_policy = parse_pair_policy(v.get<std::string>());
    else if (key == "reference_g") t.reference_g = v.get<double>();
    else if (key == "mp_threshold") t.mp_threshold = v.get<double>();
    else if (key == "dtd_sigma") t.dtd_sigma = v.get<double>();
    else if (key == "symmetry_grid") t.symmetry_grid = v.get<int>();
    else if (key == "energy_mode") t.energy_mode = parse_energy_mode(v.get<std::string>());
    else if (key == "schottky") t.schottky = schottky_constants_from_json(v.dump());
    else if (key == "histogram_bins") t.histogram_bins = v.get<int>();
    else throw Error(ErrorKind::config_error, "unknown config key '" + key + "'");
  }
}

std::string device_label(const ExperimentConfig& c) {
  if (c.train.algorithm == Algorithm::digital_baseline) return "none";
  if (!c.model_path.empty()) return fs::path(c.model_path).stem().string();
  return c.device;
}

json histogram_json(const Histogram& h) {
  return json{{"range", h.edges.back()}, {"counts", h.counts}, {"mean", h.mean}};
}

Histogram histogram_from(const json& j) {
  const double range = j.at("range").get<double>();
  Histogram h;
  h.counts = j.at("counts").get<std::vector<std::int64_t>>();
  h.mean = j.at("mean").get<double>();
  const auto bins = static_cast<int>(h.counts.size());
  h.edges.resize(h.counts.size() + 1);
  for (int i = 0; i <= bins; ++i) h.edges[i] = -range + 2.0 * range * i / bins;
  return h;
}

std::string epochs_csv(const std::vector<EpochReport>& reports) {
  std::string out = std::string(kEpochCsvHeader) + "\n";
  for (const auto& r : reports) {
    out += std::to_string(r.epoch) + "," + num(r.test_accuracy) + "," + std::to_string(r.pulses_ltp) + "," +
           std::to_string(r.pulses_ltd) + "," + num(r.energy_j) + "\n";
  }
  return out;
}

std::vector<EpochReport> read_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io_error, "cannot open " + path.string());
  std::vector<EpochReport> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(epoch_report_from_json(line));
  }
  return out;
}

template <typename F>
auto json_guard(F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::config_error, e.what());
  }
}

}  // namespace

ExperimentConfig config_from_json(const std::string& text, const ExperimentConfig& base) {
  return json_guard([&] {
    ExperimentConfig c = base;
    apply_config(c, json::parse(text));
    return c;
  });
}

ExperimentConfig load_config(const fs::path& path) { return config_from_json(read_file(path)); }

std::string config_to_json(const ExperimentConfig& config) { return config_json(config).dump(2); }

std::string run_id(const ExperimentConfig& config) {
  json j = config_json(config);
  j.erase("name");
  j["data"].erase("dir");
  if (!config.model_path.empty()) {
    j.erase("model");
    j["model_json"] = read_file(config.model_path);
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(j.dump() + "|" + kSimulatorVersion)));
  return buf;
}

std::vector<DeviceModel> resolve_models(const ExperimentConfig& config) {
  if (config.train.algorithm == Algorithm::digital_baseline) return {};
  if (!config.model_path.empty()) return {import_model(config.model_path)};
  return {synthetic_device_family(parse_pulse_width_key(config.device))};
}

MnistSplit load_data(const DataSpec& spec) {
  fs::path dir = spec.dir;
  if (dir.empty()) {
    const auto env = data_dir_from_env();
    if (!env) throw Error(ErrorKind::data_error, "no data dir given and MEMTRAIN_DATA_DIR is not set");
    dir = *env;
  }
  MnistSplit split = load_mnist_dir(dir);
  if (spec.train_limit > 0) split.train = head(split.train, spec.train_limit);
  if (spec.test_limit > 0) split.test = head(split.test, spec.test_limit);
  return split;
}

std::string epoch_report_to_json(const EpochReport& r) {
  json hist = json::array();
  for (const auto& h : r.weight_hist) hist.push_back(histogram_json(h));
  return json{{"epoch", r.epoch},
              {"accuracy", r.test_accuracy},
              {"train_loss", r.train_loss},
              {"pulses_ltp", r.pulses_ltp},
              {"pulses_ltd", r.pulses_ltd},
              {"energy_j", r.energy_j},
              {"cumulative_pulses", r.cumulative_pulses},
              {"cumulative_energy_j", r.cumulative_energy_j},
              {"weight_hist", hist}}
      .dump();
}

EpochReport epoch_report_from_json(const std::string& line) {
  try {
    const json j = json::parse(line);
    EpochReport r;
    r.epoch = j.at("epoch").get<int>();
    r.test_accuracy = j.at("accuracy").get<double>();
    r.train_loss = j.at("train_loss").get<double>();
    r.pulses_ltp = j.at("pulses_ltp").get<std::int64_t>();
    r.pulses_ltd = j.at("pulses_ltd").get<std::int64_t>();
    r.energy_j = j.at("energy_j").get<double>();
    r.cumulative_pulses = j.at("cumulative_pulses").get<std::int64_t>();
    r.cumulative_energy_j = j.at("cumulative_energy_j").get<double>();
    for (const auto& h : j.at("weight_hist")) r.weight_hist.push_back(histogram_from(h));
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::parse_error, std::string("epoch report: ") + e.what());
  }
}

RunOutcome run_experiment(const ExperimentConfig& config, const MnistSplit& data, const fs::path& run_dir,
                          const EpochCallback& on_epoch) {
  RunOutcome out;
  out.config = config;
  fs::create_directories(run_dir);
  const fs::path status_path = run_dir / "status.json";
  const fs::path jsonl_path = run_dir / "epochs.jsonl";
  try {
    out.run_id = run_id(config);
    if (fs::exists(status_path) && fs::exists(jsonl_path)) {
      const json st = json::parse(read_file(status_path));
      if (st.value("status", "") == "ok" && st.value("run_id", "") == out.run_id) {
        out.reports = read_jsonl(jsonl_path);
        out.g_star = st.value("g_star", 0.0);
        out.ok = out.reused = true;
        return out;
      }
    }
    write_file(run_dir / "config.json", config_to_json(config) + "\n");
    const auto models = resolve_models(config);
    if (!models.empty()) out.g_star = analytic_symmetry_point(models.front());

    const fs::path partial = jsonl_path.string() + ".tmp";
    std::ofstream jsonl(partial, std::ios::trunc);
    if (!jsonl) throw Error(ErrorKind::io_error, "cannot write " + partial.string());
    TrainResult result = train(config.train, models, data, [&](const EpochReport& r) {
      jsonl << epoch_report_to_json(r) << "\n" << std::flush;
      if (on_epoch) on_epoch(r);
    });
    jsonl.close();
    fs::rename(partial, jsonl_path);
    out.reports = std::move(result.reports);
    write_file(run_dir / "epochs.csv", epochs_csv(out.reports));
    out.ok = true;
  } catch (const std::exception& e) {
    out.ok = false;
    out.error = e.what();
  }
  json st{{"run_id", out.run_id}, {"status", out.ok ? "ok" : "failed"}, {"error", out.error},
          {"g_star", out.g_star}, {"simulator", kSimulatorVersion}};
  write_file(status_path, st.dump(2) + "\n");
  return out;
}

SweepPlan sweep_plan_from_json(const std::string& text) {
  return json_guard([&] {
    const json j = json::parse(text);
    if (!j.is_object()) throw Error(ErrorKind::config_error, "plan must be a JSON object");
    for (const auto& [key, v] : j.items()) {
      (void)v;
      if (key != "base" && key != "runs" && key != "grid" && key != "jobs") {
        throw Error(ErrorKind::config_error, "unknown plan key '" + key + "'");
      }
    }
    const json base = j.value("base", json::object());
    json entries = j.value("runs", json::array());
    if (entries.empty()) entries.push_back(json::object());

    // Cartesian product of the grid, keys in sorted order.
    std::vector<json> combos{json::object()};
    const json grid = j.value("grid", json::object());
    for (const auto& [key, values] : grid.items()) {
      if (!values.is_array() || values.empty()) {
        throw Error(ErrorKind::config_error, "grid entry '" + key + "' must be a non-empty array");
      }
      std::vector<json> next;
      for (const auto& c : combos) {
        for (const auto& v : values) {
          json n = c;
          n[key] = v;
          next.push_back(std::move(n));
        }
      }
      combos = std::move(next);
    }

    SweepPlan plan;
    plan.jobs = j.value("jobs", 0U);
    std::map<std::string, std::size_t> seen;
    for (const auto& e : entries) {
      for (const auto& c : combos) {
        json merged = base;
        merged.merge_patch(e);
        merged.merge_patch(c);
        ExperimentConfig cfg;
        apply_config(cfg, merged);
        if (cfg.name.empty()) {
          cfg.name = std::string(to_string(cfg.train.algorithm)) + "-" + device_label(cfg) + "-s" +
                     std::to_string(cfg.train.seed);
        }
        plan.runs.push_back(std::move(cfg));
      }
    }
    for (const auto& cfg : plan.runs) {
      std::string id;
      try {
        id = run_id(cfg);
      } catch (const Error&) {
        continue;  // unreadable model file: reported as a run failure later
      }
      if (!seen.emplace(id, 0).second) throw Error(ErrorKind::config_error, "duplicate run '" + cfg.name + "'");
    }
    return plan;
  });
}

SweepPlan load_sweep_plan(const fs::path& path) { return sweep_plan_from_json(read_file(path)); }

bool SweepSummary::all_ok() const noexcept {
  return std::all_of(runs.begin(), runs.end(), [](const RunOutcome& r) { return r.ok; });
}

SweepSummary run_sweep(const SweepPlan& plan, const fs::path& out_dir) {
  if (plan.runs.empty()) throw Error(ErrorKind::config_error, "sweep plan has no runs");
  fs::create_directories(out_dir / "runs");

  // Each distinct data spec is loaded once, up front, and shared read-only.
  std::map<std::string, std::shared_ptr<const MnistSplit>> datasets;
  std::map<std::string, std::string> data_errors;
  auto data_key = [](const DataSpec& d) {
    return d.dir + "|" + std::to_string(d.train_limit) + "|" + std::to_string(d.test_limit);
  };
  for (const auto& cfg : plan.runs) {
    const auto key = data_key(cfg.data);
    if (datasets.count(key) || data_errors.count(key)) continue;
    try {
      datasets[key] = std::make_shared<const MnistSplit>(load_data(cfg.data));
    } catch (const std::exception& e) {
      data_errors[key] = e.what();
    }
  }

  SweepSummary summary;
  summary.runs.resize(plan.runs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < plan.runs.size(); i = next++) {
      const auto& cfg = plan.runs[i];
      RunOutcome& out = summary.runs[i];
      const auto key = data_key(cfg.data);
      std::string id;
      try {
        id = run_id(cfg);
      } catch (const std::exception& e) {
        out.config = cfg;
        out.error = e.what();
        out.run_id = "invalid-" + std::to_string(i);
        continue;
      }
      if (const auto it = data_errors.find(key); it != data_errors.end()) {
        out.config = cfg;
        out.run_id = id;
        out.error = it->second;
        continue;
      }
      out = run_experiment(cfg, *datasets.at(key), out_dir / "runs" / id);
    }
  };
  unsigned jobs = plan.jobs ? plan.jobs : std::max(1U, std::thread::hardware_concurrency());
  jobs = std::min<unsigned>(jobs, static_cast<unsigned>(plan.runs.size()));
  {
    std::vector<std::jthread> pool;
    for (unsigned k = 1; k < jobs; ++k) pool.emplace_back(worker);
    worker();
  }

  std::string combined = "run_id,name,algorithm,device,seed," + std::string(kEpochCsvHeader) + "\n";
  std::string sum =
      "run_id,name,algorithm,device,seed,status,final_accuracy,total_pulses,total_energy_j,g_star,error\n";
  for (const auto& r : summary.runs) {
    const auto& t = r.config.train;
    const std::string prefix = r.run_id + "," + csv_field(r.config.name) + "," + std::string(to_string(t.algorithm)) +
                               "," + csv_field(device_label(r.config)) + "," + std::to_string(t.seed);
    for (const auto& e : r.reports) {
      combined += prefix + "," + std::to_string(e.epoch) + "," + num(e.test_accuracy) + "," +
                  std::to_string(e.pulses_ltp) + "," + std::to_string(e.pulses_ltd) + "," + num(e.energy_j) + "\n";
    }
    const bool has = r.ok && !r.reports.empty();
    sum += prefix + "," + (r.ok ? "ok" : "failed") + "," + (has ? num(r.reports.back().test_accuracy) : "") + "," +
           (has ? std::to_string(r.reports.back().cumulative_pulses) : "") + "," +
           (has ? num(r.reports.back().cumulative_energy_j) : "") + "," + num(r.g_star) + "," + csv_field(r.error) +
           "\n";
  }
  write_file(out_dir / "combined.csv", combined);
  write_file(out_dir / "summary.csv", sum);
  return summary;
}

std::vector<RunOutcome> load_runs(const fs::path& out_dir) {
  std::vector<RunOutcome> runs;
  const fs::path root = out_dir / "runs";
  if (!fs::is_directory(root)) return runs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (!entry.is_directory()) continue;
    const fs::path dir = entry.path();
    if (!fs::exists(dir / "status.json") || !fs::exists(dir / "epochs.jsonl")) continue;
    const json st = json_guard([&] { return json::parse(read_file(dir / "status.json")); });
    if (st.value("status", "") != "ok") continue;
    RunOutcome r;
    r.run_id = st.value("run_id", dir.filename().string());
    r.ok = true;
    r.g_star = st.value("g_star", 0.0);
    r.config = load_config(dir / "config.json");
    r.reports = read_jsonl(dir / "epochs.jsonl");
    runs.push_back(std::move(r));
  }
  std::sort(runs.begin(), runs.end(), [](const RunOutcome& a, const RunOutcome& b) {
    return std::tie(a.config.name, a.run_id) < std::tie(b.config.name, b.run_id);
  });
  return runs;
}

std::vector<fs::path> write_report(const fs::path& out_dir, double accuracy_target) {
  const auto runs = load_runs(out_dir);
  if (runs.empty()) throw Error(ErrorKind::missing_runs, "no completed runs under " + (out_dir / "runs").string());
  const fs::path dir = out_dir / "report";
  fs::create_directories(dir);

  std::string by_epoch = "run_id,name,algorithm,device,epoch,accuracy,train_loss\n";
  std::string by_energy = "run_id,name,algorithm,device,epoch,accuracy,energy_j,cumulative_pulses,cumulative_energy_j\n";
  std::string by_gstar = "run_id,name,algorithm,device,g_star,final_accuracy,final_layer_weight_mean\n";
  std::string hist = "run_id,name,algorithm,device,layer,bin_lo,bin_hi,count\n";
  std::string target =
      "run_id,name,algorithm,device,target,reached,epoch,cumulative_pulses,cumulative_energy_j\n";
  for (const auto& r : runs) {
    const bool analog = r.config.train.algorithm != Algorithm::digital_baseline;
    const std::string p = r.run_id + "," + csv_field(r.config.name) + "," +
                          std::string(to_string(r.config.train.algorithm)) + "," +
                          csv_field(device_label(r.config));
    for (const auto& e : r.reports) {
      by_epoch += p + "," + std::to_string(e.epoch) + "," + num(e.test_accuracy) + "," + num(e.train_loss) + "\n";
      by_energy += p + "," + std::to_string(e.epoch) + "," + num(e.test_accuracy) + "," + num(e.energy_j) + "," +
                   std::to_string(e.cumulative_pulses) + "," + num(e.cumulative_energy_j) + "\n";
    }
    if (r.reports.empty()) continue;
    const EpochReport& last = r.reports.back();
    by_gstar += p + "," + (analog ? num(r.g_star) : "") + "," + num(last.test_accuracy) + "," +
                (last.weight_hist.empty() ? "" : num(last.weight_hist.back().mean)) + "\n";
    for (std::size_t l = 0; l < last.weight_hist.size(); ++l) {
      const Histogram& h = last.weight_hist[l];
      for (std::size_t b = 0; b < h.counts.size(); ++b) {
        hist += p + "," + std::to_string(l) + "," + num(h.edges[b]) + "," + num(h.edges[b + 1]) + "," +
                std::to_string(h.counts[b]) + "\n";
      }
    }
    if (analog) {
      const auto it = std::find_if(r.reports.begin(), r.reports.end(),
                                   [&](const EpochReport& e) { return e.test_accuracy >= accuracy_target; });
      target += p + "," + num(accuracy_target) + ",";
      if (it == r.reports.end()) {
        target += "false,,,\n";
      } else {
        target += "true," + std::to_string(it->epoch) + "," + std::to_string(it->cumulative_pulses) + "," +
                  num(it->cumulative_energy_j) + "\n";
      }
    }
  }
  const std::vector<std::pair<std::string, std::string*>> files{
      {"accuracy_vs_epoch.csv", &by_epoch},
      {"accuracy_vs_energy.csv", &by_energy},
      {"final_accuracy_vs_symmetry_point.csv", &by_gstar},
      {"weight_histograms.csv", &hist},
      {"energy_to_target.csv", &target},
  };
  std::vector<fs::path> written;
  for (const auto& [name, body] : files) {
    write_file(dir / name, *body);
    written.push_back(dir / name);
  }
  return written;
}

}  // namespace memtrain
