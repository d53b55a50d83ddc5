// Acceptance checks. Prints one PASS/FAIL line per criterion and exits 0 only
// when every evaluated criterion passes. At --scale ci the criteria that need
// full MNIST runs are reported as SKIP; --scale full exits 77 (skipped) when
// MEMTRAIN_DATA_DIR is not set.

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "memtrain/characterization.hpp"
#include "memtrain/energy.hpp"
#include "memtrain/error.hpp"
#include "memtrain/experiment.hpp"
#include "schottky_golden.hpp"

namespace fs = std::filesystem;
using namespace memtrain;

namespace {

// Tolerances.
constexpr double kBaselineFull = 0.95;
constexpr double kBaselineCi = 0.85;
constexpr int kCiEpochs = 10;
constexpr double kCiLr = 0.2;  // chosen on the subset, as the default lr was on full MNIST
constexpr double kMpGap = 0.015;
constexpr double kPlainGap = 0.05;
constexpr double kShiftGap = 0.02;
constexpr double kAsymmetry = 0.25;
constexpr double kSchottkyRel = 1e-9;
constexpr double kFitRel = 1e-6;
constexpr double kFitNoisyRms = 0.05;
constexpr double kSymmetryAbs = 1e-4;
constexpr double kGradRel = 1e-4;
constexpr double kStoredEnergyRel = 1e-12;  // stored runs sum per-layer records in a different order

struct Outcome {
  enum { pass, fail, skip } status = fail;
  std::string detail;
};

Outcome verdict(bool ok, std::string detail) { return {ok ? Outcome::pass : Outcome::fail, std::move(detail)}; }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Criterion 5 ------------------------------------------------------------------

Outcome check_energy_exactness(const MnistSplit& small, const std::vector<RunOutcome>& stored) {
  // In-process runs: every ledger record, and the total, equal counts times
  // independently recomputed per-pulse energies with no rounding slack.
  const SchottkyParams params;
  std::size_t records = 0;
  for (auto algo : {Algorithm::plain, Algorithm::mixed_precision, Algorithm::symmetry_shifted}) {
    for (auto mode : {EnergyMode::upper_bound, EnergyMode::per_polarity}) {
      TrainConfig cfg;
      cfg.algorithm = algo;
      cfg.energy_mode = mode;
      cfg.epochs = 2;
      cfg.audit_pulses = true;  // throws if a tile counter disagrees with the emission sum
      const std::vector<DeviceModel> models{synthetic_device_family(20e-9)};
      TrainResult res;
      try {
        res = train(cfg, models, small);
      } catch (const std::logic_error& e) {
        return verdict(false, std::string("pulse audit: ") + e.what());
      }
      const DeviceModel& m = models[0];
      PulseSpec ltp = m.ltp_spec(), ltd = m.ltd_spec();
      if (mode == EnergyMode::upper_bound) {
        ltp = ltd = PulseSpec{std::max(ltp.v_write, ltd.v_write), std::max(ltp.t_write, ltd.t_write),
                              Polarity::potentiate};
      }
      const double e_ltp = pulse_energy(ltp, params), e_ltd = pulse_energy(ltd, params);
      double total = 0.0;
      std::int64_t pulses = 0;
      for (const auto& r : res.ledger.records()) {
        const double e = static_cast<double>(r.pulses_ltp) * e_ltp + static_cast<double>(r.pulses_ltd) * e_ltd;
        if (r.energy_j != e) return verdict(false, fmt("record energy %.17g != %.17g", r.energy_j, e));
        total += e;
        pulses += r.pulses_ltp + r.pulses_ltd;
        ++records;
      }
      std::int64_t counted = 0;
      for (const auto& L : res.network.layers()) counted += L.tile->counter().total();
      if (res.ledger.total_j() != total) return verdict(false, "ledger total differs from the record sum");
      if (counted != pulses) return verdict(false, "tile counters differ from ledger pulses");
    }
  }
  // Stored full-scale runs: epoch energy against epoch pulse counts.
  const SchottkyParams p;
  std::size_t epochs = 0;
  for (const auto& r : stored) {
    if (r.config.train.algorithm == Algorithm::digital_baseline) continue;
    const DeviceModel m = resolve_models(r.config).front();
    const PulseSpec worst{std::max(m.ltp_spec().v_write, m.ltd_spec().v_write),
                          std::max(m.ltp_spec().t_write, m.ltd_spec().t_write), Polarity::potentiate};
    const double e = pulse_energy(worst, p);
    std::int64_t cum = 0;
    for (const auto& ep : r.reports) {
      const double expect = static_cast<double>(ep.pulses_ltp + ep.pulses_ltd) * e;
      if (std::abs(ep.energy_j - expect) > kStoredEnergyRel * expect) {
        return verdict(false, r.config.name + ": stored epoch energy mismatch");
      }
      cum += ep.pulses_ltp + ep.pulses_ltd;
      if (ep.cumulative_pulses != cum) return verdict(false, r.config.name + ": cumulative pulses mismatch");
      ++epochs;
    }
  }
  return verdict(true, fmt("%zu ledger records exact, pulse audit clean; %zu stored epochs consistent", records,
                           epochs));
}

// Criterion 6 ------------------------------------------------------------------

Outcome check_schottky() {
  const SchottkyParams p;
  double worst = 0.0;
  for (const auto& [v, i] : golden::kCurrentGolden) worst = std::max(worst, std::abs(schottky_current(v, p) - i) / i);
  for (const auto& [t, v, e] : golden::kFamilyEnergyGolden) {
    worst = std::max(worst, std::abs(pulse_energy(PulseSpec{v, t, Polarity::potentiate}, p) - e) / e);
  }
  const bool zero = schottky_current(0.0, p) == 0.0;
  return verdict(worst < kSchottkyRel && zero, fmt("max rel err %.2e over 20 voltages and 4 pulses, I(0)=0: %s",
                                                   worst, zero ? "yes" : "no"));
}

// Criterion 7 ------------------------------------------------------------------

int covering_pulses(const DeviceModel& m) {
  DeviceState up{0.0, 1, 1}, down{1.0, 1, 1};
  int n = 0;
  while (up.g < 0.95 || down.g > 0.05) {
    const double u = step_conductance(m, up, Polarity::potentiate);
    const double d = step_conductance(m, down, Polarity::depress);
    if (u >= 1.0 || d <= 0.0) break;
    up.g = u;
    down.g = d;
    ++n;
  }
  return n;
}

Coeffs random_quintic(Rng& rng, double scale) {
  Coeffs c{};
  c[0] = scale;
  for (int k = 1; k < 6; ++k) c[k] = scale * 0.3 * (2 * uniform01(rng) - 1) / k;
  return c;
}

double rms_rel(const Coeffs& fit, const Coeffs& ref) {
  double num = 0.0, den = 0.0;
  for (int i = 0; i <= 200; ++i) {
    const double g = i / 200.0;
    const double d = eval_poly(fit, g) - eval_poly(ref, g);
    num += d * d;
    den += eval_poly(ref, g) * eval_poly(ref, g);
  }
  return std::sqrt(num / den);
}

Outcome check_fit() {
  // Relative error of each coefficient vector in the max norm; single
  // coefficients can sit arbitrarily close to zero.
  const auto rel = [](const Coeffs& fit, const Coeffs& ref) {
    double d = 0.0, n = 0.0;
    for (int k = 0; k < 6; ++k) {
      d = std::max(d, std::abs(fit[k] - ref[k]));
      n = std::max(n, std::abs(ref[k]));
    }
    return d / n;
  };
  Rng rng = make_rng(7, 0);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const Coeffs ltp = random_quintic(rng, 0.002 + 0.004 * uniform01(rng));
    const Coeffs ltd = random_quintic(rng, 0.002 + 0.004 * uniform01(rng));
    const auto m = DeviceModel::make(ltp, ltd, 1e-7, 1e-6, 0.0, PulseSpec{1, 1e-6, Polarity::potentiate},
                                     PulseSpec{1, 1e-6, Polarity::depress});
    const auto fit = fit_gradients(synthesize_trace(m, covering_pulses(m)));
    worst = std::max({worst, rel(fit.ltp_coeffs, ltp), rel(fit.ltd_coeffs, ltd)});
  }
  double noisy = 0.0;
  for (double t : bundled_pulse_widths()) {
    const auto m = synthetic_device_family(t);
    const auto fit = fit_gradients(synthesize_trace(m, covering_pulses(m), 0.01, 1234));
    noisy = std::max({noisy, rms_rel(fit.ltp_coeffs, m.ltp_coeffs()), rms_rel(fit.ltd_coeffs, m.ltd_coeffs())});
  }
  return verdict(worst < kFitRel && noisy < kFitNoisyRms,
                 fmt("noiseless max rel err %.2e (20 quintic pairs); 1%% noise max RMS deviation %.2f%%", worst,
                     100 * noisy));
}

// Criterion 8 ------------------------------------------------------------------

Outcome check_symmetry() {
  Rng rng = make_rng(8, 0);
  int accepted = 0, attempts = 0;
  double worst = 0.0;
  ProtocolOptions opt;
  opt.tol = 1e-9;
  opt.max_cycles = 1000000;
  while (accepted < 100 && attempts < 100000) {
    ++attempts;
    const double scale = 0.002 + 0.01 * uniform01(rng);
    const Coeffs ltp = random_quintic(rng, scale);
    const Coeffs ltd = random_quintic(rng, scale * (0.85 + 0.3 * uniform01(rng)));
    std::optional<DeviceModel> m;
    try {
      m = DeviceModel::make(ltp, ltd, 1e-7, 1e-6, 0.0, PulseSpec{1, 1e-6, Polarity::potentiate},
                            PulseSpec{1, 1e-6, Polarity::depress});
    } catch (const Error&) {
      continue;
    }
    // Keep models whose pair map has exactly one crossing in (0, 1), reached
    // without the potentiating pulse saturating. The crossing must attract
    // (net change positive below it): the pulse protocol cannot settle on a
    // repelling root, while the analytic solver still reports one.
    const auto residual = [&](double g) {
      const double up = m->ltp_gradient(g);
      return up - m->ltd_gradient(std::min(g + up, 1.0));
    };
    int crossings = 0;
    double prev = residual(0.0);
    for (int i = 1; i <= 2000; ++i) {
      const double r = residual(i / 2000.0);
      if ((r > 0) != (prev > 0)) ++crossings;
      prev = r;
    }
    if (crossings != 1 || residual(0.0) <= 0.0) continue;
    const double g = analytic_symmetry_point(*m);
    if (g <= 0.0 || g >= 1.0 || g + m->ltp_gradient(g) >= 1.0) continue;
    ++accepted;
    try {
      const auto r = find_symmetry_point_protocol(*m, opt);
      worst = std::max(worst, std::abs(r.g_star - g));
    } catch (const NoConvergenceError& e) {
      worst = std::max(worst, std::abs(e.partial().g_star - g));
    }
  }
  return verdict(accepted == 100 && worst < kSymmetryAbs,
                 fmt("%d random quintic models with attracting interior roots, max |protocol - analytic| = %.2e", accepted,
                     worst));
}

// Criterion 9 ------------------------------------------------------------------

Outcome check_gradients() {
  Network net = Network::digital({6, 5, 4, 3}, 9);
  Rng rng = make_rng(9, 1);
  for (std::size_t l = 0; l < net.depth(); ++l) {
    for (auto& b : net.layer(l).bias) b = 0.2 * (2 * uniform01(rng) - 1);
  }
  std::vector<double> x(6);
  for (auto& v : x) v = uniform01(rng);
  const std::size_t label = 1;
  auto ws = net.make_workspace();
  net.forward(x, ws);
  net.backward(label, ws);
  double worst = 0.0;
  for (int probe = 0; probe < 100; ++probe) {
    const auto l = static_cast<std::size_t>(uniform01(rng) * net.depth());
    auto& L = net.layer(l);
    const auto i = static_cast<std::size_t>(uniform01(rng) * L.weights.size());
    const double analytic = net.weight_gradient(l, ws)[i];
    const double h = 1e-5, saved = L.weights[i];
    L.weights[i] = saved + h;
    const double up = net.loss(x, label);
    L.weights[i] = saved - h;
    const double down = net.loss(x, label);
    L.weights[i] = saved;
    const double numeric = (up - down) / (2 * h);
    worst = std::max(worst, std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8}));
  }
  return verdict(worst < kGradRel, fmt("100 probes on 6x5x4x3, max rel err %.2e", worst));
}

// Full-scale criteria ------------------------------------------------------------

const RunOutcome* find(const std::vector<RunOutcome>& runs, const std::string& name) {
  for (const auto& r : runs) {
    if (r.config.name == name && r.ok && !r.reports.empty()) return &r;
  }
  return nullptr;
}

double final_acc(const RunOutcome& r) { return r.reports.back().test_accuracy; }

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(std::move(cells));
  }
  return rows;
}

Outcome check_energy_tradeoff(const fs::path& sweep_dir, double target) {
  write_report(sweep_dir, target);
  const auto rows = read_csv(sweep_dir / "report" / "energy_to_target.csv");
  if (rows.empty()) return verdict(false, "empty energy_to_target.csv");
  const auto& h = rows[0];
  const auto col = [&](const std::string& name) {
    return static_cast<std::size_t>(std::find(h.begin(), h.end(), name) - h.begin());
  };
  struct Point {
    double t;
    double pulses;
    double energy;
  };
  std::vector<Point> pts;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r[col("algorithm")] != "mixed_precision") continue;
    if (r[col("reached")] != "true") return verdict(false, r[col("name")] + " never reached the target");
    pts.push_back({parse_pulse_width_key(r[col("device")]), std::stod(r[col("cumulative_pulses")]),
                   std::stod(r[col("cumulative_energy_j")])});
  }
  if (pts.size() != bundled_pulse_widths().size()) return verdict(false, "missing mixed-precision width runs");
  std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) { return a.t < b.t; });
  bool ok = true;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    ok = ok && pts[0].pulses > pts[i].pulses && pts[0].energy < pts[i].energy;
  }
  std::string d = fmt("target %.3f:", target);
  for (const auto& p : pts) d += fmt(" %s %.3g pulses %.3g J;", pulse_width_key(p.t).c_str(), p.pulses, p.energy);
  return verdict(ok, d);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string scale = "ci";
  std::string plan_path, runs_dir, ci_data;
  double target = 0.95;
  app.add_option("--scale", scale, "ci or full")->check(CLI::IsMember({"ci", "full"}));
  app.add_option("--plan", plan_path, "Full-scale sweep plan");
  app.add_option("--runs-dir", runs_dir, "Sweep directory for full-scale runs (cached by run id)");
  app.add_option("--ci-data", ci_data, "Directory with the 1000-image subset")->required();
  app.add_option("--target", target, "Accuracy target for the energy comparison");
  CLI11_PARSE(app, argc, argv);

  const bool full = scale == "full";
  if (full && (!data_dir_from_env() || plan_path.empty() || runs_dir.empty())) {
    std::printf("SKIP full scale: MEMTRAIN_DATA_DIR, --plan and --runs-dir are required\n");
    return 77;
  }

  std::map<int, Outcome> out;
  const MnistSplit subset = load_mnist_dir(ci_data);
  const MnistSplit small{head(subset.train, 200), head(subset.test, 100)};

  std::vector<RunOutcome> runs;
  if (full) {
    const SweepPlan plan = load_sweep_plan(plan_path);
    const SweepSummary s = run_sweep(plan, runs_dir);
    for (const auto& r : s.runs) {
      if (!r.ok) std::fprintf(stderr, "run %s failed: %s\n", r.config.name.c_str(), r.error.c_str());
    }
    runs = s.runs;
  }

  // 1
  if (full) {
    const auto* d = find(runs, "digital");
    out[1] = d ? verdict(final_acc(*d) >= kBaselineFull,
                         fmt("digital baseline %.4f after %zu epochs (>= %.2f)", final_acc(*d), d->reports.size(),
                             kBaselineFull))
               : verdict(false, "digital run missing");
  } else {
    TrainConfig cfg;
    cfg.algorithm = Algorithm::digital_baseline;
    cfg.epochs = kCiEpochs;
    cfg.lr = kCiLr;
    const auto res = train(cfg, {}, subset);
    const double acc = res.reports.back().test_accuracy;
    out[1] = verdict(acc >= kBaselineCi, fmt("ci: 1000-image subset, %d epochs, lr %.1f, accuracy %.4f (>= %.2f)",
                                             kCiEpochs, kCiLr, acc, kBaselineCi));
  }

  if (full) {
    const auto* d = find(runs, "digital");
    const auto* mp2 = find(runs, "mp-2ms");
    const auto* mp20 = find(runs, "mp-20ns");
    const auto* plain = find(runs, "plain-20ns");
    const auto* shifted = find(runs, "shifted-20ns");
    // 2
    if (d && mp2) {
      const double gap = std::abs(final_acc(*d) - final_acc(*mp2));
      out[2] = verdict(gap <= kMpGap, fmt("MP 2ms %.4f vs digital %.4f, gap %.2f points (<= %.1f)", final_acc(*mp2),
                                          final_acc(*d), 100 * gap, 100 * kMpGap));
    } else {
      out[2] = verdict(false, "run missing");
    }
    // 3
    if (mp20 && plain) {
      const double g = plain->g_star;
      const double mean = plain->reports.back().weight_hist.back().mean;
      const bool asym = std::abs(g - 0.5) >= kAsymmetry;
      const bool gap = final_acc(*plain) <= final_acc(*mp20) - kPlainGap;
      const bool sign = mean * (2 * g - 1) > 0.0;
      out[3] = verdict(asym && gap && sign,
                       fmt("g* %.3f; plain %.4f vs MP %.4f (gap %.2f points, >= %.0f); final-layer mean %+.4f", g,
                           final_acc(*plain), final_acc(*mp20), 100 * (final_acc(*mp20) - final_acc(*plain)),
                           100 * kPlainGap, mean));
    } else {
      out[3] = verdict(false, "run missing");
    }
    // 4
    if (mp20 && shifted) {
      const double sigma = resolve_models(shifted->config).front().dtd_sigma();
      const double eff = shifted->config.train.dtd_sigma >= 0 ? shifted->config.train.dtd_sigma : sigma;
      const bool ok = final_acc(*shifted) >= final_acc(*mp20) - kShiftGap && eff == 0.05;
      out[4] = verdict(ok, fmt("shifted %.4f vs MP %.4f (gap %.2f points, <= %.0f), sigma %.2f", final_acc(*shifted),
                               final_acc(*mp20), 100 * (final_acc(*mp20) - final_acc(*shifted)), 100 * kShiftGap, eff));
    } else {
      out[4] = verdict(false, "run missing");
    }
    // 10
    try {
      out[10] = check_energy_tradeoff(runs_dir, target);
    } catch (const std::exception& e) {
      out[10] = verdict(false, e.what());
    }
  } else {
    for (int c : {2, 3, 4, 10}) out[c] = Outcome{Outcome::skip, "needs full MNIST (--scale full)"};
  }

  out[5] = check_energy_exactness(small, runs);
  out[6] = check_schottky();
  out[7] = check_fit();
  out[8] = check_symmetry();
  out[9] = check_gradients();

  bool ok = true;
  for (const auto& [k, o] : out) {
    const char* tag = o.status == Outcome::pass ? "PASS" : o.status == Outcome::fail ? "FAIL" : "SKIP";
    std::printf("%s criterion %d: %s\n", tag, k, o.detail.c_str());
    ok = ok && o.status != Outcome::fail;
  }
  return ok ? 0 : 1;
}
