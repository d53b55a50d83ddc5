// memtrain command-line front end.

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <json.hpp>

#include "memtrain/characterization.hpp"
#include "memtrain/energy.hpp"
#include "memtrain/error.hpp"
#include "memtrain/experiment.hpp"

namespace fs = std::filesystem;
using namespace memtrain;
using nlohmann::ordered_json;

namespace {

DeviceModel pick_model(const std::string& model_path, const std::string& device) {
  if (!model_path.empty()) return import_model(model_path);
  return synthetic_device_family(parse_pulse_width_key(device));
}

ordered_json branch_json(const BranchFit& b) {
  return ordered_json{{"coeffs", b.coeffs},
                      {"points", b.points},
                      {"rms_residual", b.rms_residual},
                      {"condition_number", b.condition_number}};
}

void print_epoch(const EpochReport& r) {
  std::printf("%d,%.6f,%lld,%lld,%.10g\n", r.epoch, r.test_accuracy, static_cast<long long>(r.pulses_ltp),
              static_cast<long long>(r.pulses_ltd), r.energy_j);
  std::fflush(stdout);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Analog in-memory training simulator"};
  app.require_subcommand(1);

  // fit
  auto* fit = app.add_subcommand("fit", "Fit LTP/LTD gradient polynomials to a pulse-response CSV");
  std::string fit_in, fit_out;
  double fit_v = 0.0, fit_t = 0.0, fit_sigma = 0.05;
  fit->add_option("-i,--input", fit_in, "Measurement CSV")->required()->check(CLI::ExistingFile);
  fit->add_option("--v-write", fit_v, "Write amplitude to select (V); default: first row");
  fit->add_option("--t-write", fit_t, "Pulse width to select (s); default: first row");
  fit->add_option("--sigma", fit_sigma, "Device-to-device variation to store in the model");
  fit->add_option("-o,--out", fit_out, "Write the fitted model JSON here");

  // synth
  auto* synth = app.add_subcommand("synth", "Write a synthetic pulse-response CSV from a model");
  std::string synth_model, synth_device = "2ms", synth_out;
  int synth_pulses = 200;
  double synth_noise = 0.0;
  std::uint64_t synth_seed = 0;
  synth->add_option("--model", synth_model, "Model JSON")->check(CLI::ExistingFile);
  synth->add_option("--device", synth_device, "Bundled family key (20ns, 1us, 0.2ms, 2ms)");
  synth->add_option("--pulses", synth_pulses, "Pulses per ramp");
  synth->add_option("--noise", synth_noise, "Relative read noise");
  synth->add_option("--seed", synth_seed, "Noise seed");
  synth->add_option("-o,--out", synth_out, "Output CSV")->required();

  // symmetry
  auto* sym = app.add_subcommand("symmetry", "Symmetry point of a device model");
  std::string sym_model, sym_device = "2ms", sym_trace;
  bool sym_protocol = false;
  ProtocolOptions popt;
  sym->add_option("--model", sym_model, "Model JSON")->check(CLI::ExistingFile);
  sym->add_option("--device", sym_device, "Bundled family key");
  sym->add_flag("--protocol", sym_protocol, "Also run the alternating-pulse protocol");
  sym->add_option("--n-prime", popt.n_prime, "Ramp pulses before alternation");
  sym->add_option("--tol", popt.tol, "Convergence tolerance");
  sym->add_option("--max-cycles", popt.max_cycles, "Alternation cycle limit");
  sym->add_option("--trace", sym_trace, "Write the protocol trace CSV here");

  // energy
  auto* en = app.add_subcommand("energy", "Schottky current and write energy of one pulse");
  double en_v = 0.0, en_t = 0.0;
  std::string en_params;
  en->add_option("--v", en_v, "Write amplitude (V)")->required();
  en->add_option("--t", en_t, "Pulse width (s)")->required();
  en->add_option("--params", en_params, "Schottky parameter JSON")->check(CLI::ExistingFile);

  // train
  auto* tr = app.add_subcommand("train", "Train one configuration");
  std::string tr_config, tr_out, tr_data;
  tr->add_option("--config", tr_config, "Experiment config JSON")->required()->check(CLI::ExistingFile);
  tr->add_option("-o,--out", tr_out, "Run directory (default: runs/<run_id>)");
  tr->add_option("--data-dir", tr_data, "MNIST directory (overrides config and MEMTRAIN_DATA_DIR)");

  // sweep
  auto* sw = app.add_subcommand("sweep", "Run a sweep plan");
  std::string sw_plan, sw_out = "sweep";
  unsigned sw_jobs = 0;
  sw->add_option("--plan", sw_plan, "Sweep plan JSON")->required()->check(CLI::ExistingFile);
  sw->add_option("-o,--out", sw_out, "Output directory");
  sw->add_option("-j,--jobs", sw_jobs, "Concurrent runs (default: plan value or core count)");

  // report
  auto* rep = app.add_subcommand("report", "Write plot-ready tables for a sweep directory");
  std::string rep_dir;
  double rep_target = 0.95;
  rep->add_option("--dir", rep_dir, "Sweep directory")->required()->check(CLI::ExistingDirectory);
  rep->add_option("--target", rep_target, "Accuracy target for energy_to_target.csv");

  // subset
  auto* sub = app.add_subcommand("subset", "Write the first N train/test images as gzip IDX files");
  std::string sub_from, sub_to;
  std::size_t sub_train = 1000, sub_test = 1000;
  sub->add_option("--from", sub_from, "MNIST directory")->required()->check(CLI::ExistingDirectory);
  sub->add_option("--to", sub_to, "Output directory")->required();
  sub->add_option("--train", sub_train, "Training images");
  sub->add_option("--test", sub_test, "Test images");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*fit) {
      MeasurementSeries series = load_measurements(fit_in);
      if (series.rows.empty()) throw Error(ErrorKind::empty_series, fit_in);
      if (fit_v <= 0.0) fit_v = series.rows.front().v_write;
      if (fit_t <= 0.0) fit_t = series.rows.front().t_write;
      series = select_operating_point(series, fit_v, fit_t);
      const GradientFit g = fit_gradients(series);
      const DeviceModel model = fit_device_model(series, fit_v, fit_t, fit_sigma);
      ordered_json out{{"ltp", branch_json(g.report.ltp)},
                       {"ltd", branch_json(g.report.ltd)},
                       {"g_min", g.report.g_min},
                       {"g_max", g.report.g_max},
                       {"symmetry_point", analytic_symmetry_point(model)}};
      std::cout << out.dump(2) << "\n";
      if (!fit_out.empty()) export_model(model, fit_out);
    } else if (*synth) {
      const DeviceModel model = pick_model(synth_model, synth_device);
      write_measurements(synthesize_trace(model, synth_pulses, synth_noise, synth_seed), synth_out);
    } else if (*sym) {
      const DeviceModel model = pick_model(sym_model, sym_device);
      ordered_json out{{"g_star", analytic_symmetry_point(model)}, {"reference_step", reference_step(model)}};
      if (sym_protocol) {
        try {
          const ProtocolResult r = find_symmetry_point_protocol(model, popt);
          out["protocol_g_star"] = r.g_star;
          out["protocol_cycles"] = r.cycles;
          if (!sym_trace.empty()) write_protocol_trace(r, sym_trace);
        } catch (const NoConvergenceError& e) {
          out["protocol_g_star"] = e.partial().g_star;
          out["protocol_error"] = e.what();
          if (!sym_trace.empty()) write_protocol_trace(e.partial(), sym_trace);
          std::cout << out.dump(2) << "\n";
          return 3;
        }
      }
      std::cout << out.dump(2) << "\n";
    } else if (*en) {
      const SchottkyParams params = en_params.empty() ? SchottkyParams{} : load_schottky_params(en_params);
      const double i = schottky_current(en_v, params);
      const double e = pulse_energy(PulseSpec{en_v, en_t, Polarity::potentiate}, params);
      std::printf("current_a=%.10g\nenergy_j=%.10g\n", i, e);
    } else if (*tr) {
      ExperimentConfig cfg = load_config(tr_config);
      if (!tr_data.empty()) cfg.data.dir = tr_data;
      const fs::path dir = tr_out.empty() ? fs::path("runs") / run_id(cfg) : fs::path(tr_out);
      const MnistSplit data = load_data(cfg.data);
      std::printf("%s\n", kEpochCsvHeader);
      const RunOutcome r = run_experiment(cfg, data, dir, print_epoch);
      if (r.reused) {
        for (const auto& e : r.reports) print_epoch(e);
      }
      if (!r.ok) throw std::runtime_error(r.error);
      std::fprintf(stderr, "run %s -> %s\n", r.run_id.c_str(), dir.string().c_str());
    } else if (*sw) {
      SweepPlan plan = load_sweep_plan(sw_plan);
      if (sw_jobs) plan.jobs = sw_jobs;
      const SweepSummary s = run_sweep(plan, sw_out);
      for (const auto& r : s.runs) {
        std::fprintf(stderr, "%-40s %s%s%s\n", r.config.name.c_str(), r.ok ? "ok" : "FAILED",
                     r.ok ? "" : ": ", r.error.c_str());
      }
      return s.all_ok() ? 0 : 1;
    } else if (*rep) {
      for (const auto& p : write_report(rep_dir, rep_target)) std::printf("%s\n", p.string().c_str());
    } else if (*sub) {
      const MnistSplit data = load_mnist_dir(sub_from);
      fs::create_directories(sub_to);
      const fs::path to = sub_to;
      write_idx_pair(head(data.train, sub_train), to / "train-images-idx3-ubyte.gz",
                     to / "train-labels-idx1-ubyte.gz");
      write_idx_pair(head(data.test, sub_test), to / "t10k-images-idx3-ubyte.gz", to / "t10k-labels-idx1-ubyte.gz");
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "memtrain: %s\n", e.what());
    return 1;
  }
  return 0;
}
