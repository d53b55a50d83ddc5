#include "memtrain/characterization.hpp"

#include <Eigen/Dense>
#include <json.hpp>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace memtrain {

namespace {

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, sep)) out.push_back(trim(field));
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double parse_double(const std::string& s, bool* ok) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    *ok = false;
    return 0.0;
  }
  *ok = pos == s.size() && std::isfinite(v);
  return v;
}

[[noreturn]] void row_error(const std::string& source, std::size_t line, const std::string& msg) {
  throw Error(ErrorKind::parse_error, source + ":" + std::to_string(line) + ": " + msg);
}

}  // namespace

MeasurementSeries parse_measurements(std::istream& in, const std::string& source) {
  MeasurementSeries series;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::vector<std::string> columns;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    if (line[0] == '#') {
      const auto body = trim(line.substr(1));
      const auto eq = body.find('=');
      if (eq == std::string::npos) continue;
      const auto key = trim(body.substr(0, eq));
      const auto value = trim(body.substr(eq + 1));
      if (key == "device_id") {
        series.device_id = value;
      } else if (key == "read_voltage") {
        bool ok = true;
        series.read_voltage = std::abs(parse_double(value, &ok));
        if (!ok) row_error(source, line_no, "bad read_voltage '" + value + "'");
      }
      continue;
    }
    if (!have_header) {
      columns = split(line, ',');
      if (trim(line) != kMeasurementHeader) {
        for (const auto* need : {"pulse_index", "v_write_V", "t_write_s", "polarity", "g_read_S"}) {
          if (std::find(columns.begin(), columns.end(), need) == columns.end()) {
            throw Error(ErrorKind::schema_error, source + ": missing column '" + need + "'");
          }
        }
        throw Error(ErrorKind::schema_error,
                    source + ": header must be exactly '" + std::string(kMeasurementHeader) + "'");
      }
      have_header = true;
      continue;
    }

    const auto f = split(line, ',');
    if (f.size() != 5) row_error(source, line_no, "expected 5 fields, got " + std::to_string(f.size()));
    MeasurementRow row;
    bool ok = true;
    const double idx = parse_double(f[0], &ok);
    if (!ok || idx != std::floor(idx)) row_error(source, line_no, "bad pulse_index '" + f[0] + "'");
    row.pulse_index = static_cast<long long>(idx);
    row.v_write = std::abs(parse_double(f[1], &ok));
    if (!ok) row_error(source, line_no, "bad v_write_V '" + f[1] + "'");
    row.t_write = parse_double(f[2], &ok);
    if (!ok || !(row.t_write > 0.0)) row_error(source, line_no, "bad t_write_s '" + f[2] + "'");
    if (f[3] == "P") row.polarity = Polarity::potentiate;
    else if (f[3] == "D") row.polarity = Polarity::depress;
    else row_error(source, line_no, "polarity must be P or D, got '" + f[3] + "'");
    row.g_read = parse_double(f[4], &ok);
    if (!ok || !(row.g_read > 0.0)) row_error(source, line_no, "g_read_S must be > 0, got '" + f[4] + "'");

    if (series.rows.empty()) {
      row.ramp = 0;
    } else {
      const auto& prev = series.rows.back();
      row.ramp = prev.polarity == row.polarity ? prev.ramp : prev.ramp + 1;
    }
    series.rows.push_back(row);
  }

  if (!have_header) throw Error(ErrorKind::schema_error, source + ": missing header");
  if (series.rows.empty()) throw Error(ErrorKind::empty_series, source + ": no data rows");

  std::stable_sort(series.rows.begin(), series.rows.end(), [](const auto& a, const auto& b) {
    return a.ramp != b.ramp ? a.ramp < b.ramp : a.pulse_index < b.pulse_index;
  });
  for (std::size_t i = 1; i < series.rows.size(); ++i) {
    const auto& a = series.rows[i - 1];
    const auto& b = series.rows[i];
    if (a.ramp == b.ramp && a.pulse_index == b.pulse_index) {
      throw Error(ErrorKind::parse_error, source + ": duplicate pulse_index " + std::to_string(b.pulse_index) +
                                              " in ramp " + std::to_string(b.ramp));
    }
  }
  return series;
}

MeasurementSeries load_measurements(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io_error, "cannot open " + path.string());
  return parse_measurements(in, path.string());
}

void write_measurements(const MeasurementSeries& series, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io_error, "cannot write " + path.string());
  if (!series.device_id.empty()) out << "# device_id=" << series.device_id << '\n';
  out << "# read_voltage=" << series.read_voltage << '\n';
  out << kMeasurementHeader << '\n';
  out << std::setprecision(17);
  for (const auto& r : series.rows) {
    out << r.pulse_index << ',' << r.v_write << ',' << r.t_write << ',' << to_string(r.polarity) << ','
        << r.g_read << '\n';
  }
}

MeasurementSeries select_operating_point(const MeasurementSeries& series, double v_write, double t_write) {
  MeasurementSeries out;
  out.device_id = series.device_id;
  out.read_voltage = series.read_voltage;
  const auto close = [](double a, double b) { return std::abs(a - b) <= 1e-6 * std::max(std::abs(a), std::abs(b)); };
  for (const auto& r : series.rows) {
    if (close(r.v_write, v_write) && close(r.t_write, t_write)) out.rows.push_back(r);
  }
  if (out.rows.empty()) {
    throw Error(ErrorKind::empty_series, "no rows at the requested operating point");
  }
  return out;
}

BranchFit fit_quintic(const std::vector<double>& x, const std::vector<double>& y) {
  constexpr int kTerms = 6;
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd v(n, kTerms);
  Eigen::VectorXd rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = 2.0 * x[i] - 1.0;
    double p = 1.0;
    for (int k = 0; k < kTerms; ++k) {
      v(i, k) = p;
      p *= u;
    }
    rhs(i) = y[i];
  }
  const Eigen::MatrixXd normal = v.transpose() * v;
  const Eigen::VectorXd a = normal.ldlt().solve(v.transpose() * rhs);

  BranchFit fit;
  fit.points = x.size();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(normal, Eigen::EigenvaluesOnly);
  const auto ev = eig.eigenvalues();
  fit.condition_number = ev.minCoeff() > 0.0 ? ev.maxCoeff() / ev.minCoeff()
                                             : std::numeric_limits<double>::infinity();

  // p(u) with u = 2g - 1:  u^k = sum_j C(k, j) 2^j g^j (-1)^(k - j)
  Coeffs c{};
  for (int k = 0; k < kTerms; ++k) {
    double binom = 1.0;
    for (int j = 0; j <= k; ++j) {
      c[j] += a(k) * binom * std::ldexp(1.0, j) * (((k - j) % 2) ? -1.0 : 1.0);
      binom = binom * (k - j) / (j + 1);
    }
  }
  fit.coeffs = c;

  double ss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = eval_poly(c, x[i]) - y[i];
    ss += r * r;
  }
  fit.rms_residual = x.empty() ? 0.0 : std::sqrt(ss / static_cast<double>(x.size()));
  return fit;
}

GradientFit fit_gradients(const MeasurementSeries& series) {
  if (series.rows.empty()) throw Error(ErrorKind::empty_series, "no measurement rows");
  double lo = series.rows.front().g_read;
  double hi = lo;
  for (const auto& r : series.rows) {
    lo = std::min(lo, r.g_read);
    hi = std::max(hi, r.g_read);
  }
  if (hi - lo < 1e-12) throw Error(ErrorKind::degenerate_range, "observed conductance range below 1e-12 S");
  const double span = hi - lo;

  std::vector<double> x_ltp, y_ltp, x_ltd, y_ltd;
  for (std::size_t i = 0; i + 1 < series.rows.size(); ++i) {
    const auto& a = series.rows[i];
    const auto& b = series.rows[i + 1];
    if (a.ramp != b.ramp) continue;
    const double g0 = (a.g_read - lo) / span;
    const double dg = (b.g_read - a.g_read) / span;
    if (a.polarity == Polarity::potentiate) {
      x_ltp.push_back(g0);
      y_ltp.push_back(dg);
    } else {
      x_ltd.push_back(g0);
      y_ltd.push_back(-dg);
    }
  }
  constexpr std::size_t kMinPoints = 7;
  if (x_ltp.size() < kMinPoints || x_ltd.size() < kMinPoints) {
    throw Error(ErrorKind::insufficient_points,
                "need >= 7 gradient samples per branch, have LTP=" + std::to_string(x_ltp.size()) +
                    " LTD=" + std::to_string(x_ltd.size()));
  }

  GradientFit out;
  out.report.ltp = fit_quintic(x_ltp, y_ltp);
  out.report.ltd = fit_quintic(x_ltd, y_ltd);
  out.report.g_min = lo;
  out.report.g_max = hi;
  out.ltp_coeffs = out.report.ltp.coeffs;
  out.ltd_coeffs = out.report.ltd.coeffs;
  return out;
}

DeviceModel fit_device_model(const MeasurementSeries& series, double v_write, double t_write, double dtd_sigma) {
  const auto selected = select_operating_point(series, v_write, t_write);
  const auto fit = fit_gradients(selected);
  return DeviceModel::make(fit.ltp_coeffs, fit.ltd_coeffs, fit.report.g_min, fit.report.g_max, dtd_sigma,
                           PulseSpec{v_write, t_write, Polarity::potentiate},
                           PulseSpec{v_write, t_write, Polarity::depress});
}

MeasurementSeries synthesize_trace(const DeviceModel& model, int pulses, double noise_rel, std::uint64_t seed) {
  if (pulses < 1) throw Error(ErrorKind::invalid_argument, "pulses must be >= 1");
  std::vector<double> g_ltp{0.0};
  std::vector<double> g_ltd{1.0};
  for (int k = 0; k < pulses; ++k) {
    g_ltp.push_back(step_conductance(model, DeviceState{g_ltp.back(), 1.0, 1.0}, Polarity::potentiate));
    g_ltd.push_back(step_conductance(model, DeviceState{g_ltd.back(), 1.0, 1.0}, Polarity::depress));
  }

  double sigma = 0.0;
  if (noise_rel > 0.0) {
    double mean = 0.0;
    for (int k = 0; k < pulses; ++k) {
      mean += std::abs(g_ltp[k + 1] - g_ltp[k]) + std::abs(g_ltd[k + 1] - g_ltd[k]);
    }
    mean /= 2.0 * pulses;
    sigma = noise_rel * mean;
  }
  Rng rng = make_rng(seed, 0x7A11);

  MeasurementSeries s;
  s.device_id = "synthetic";
  const auto emit = [&](const std::vector<double>& gs, Polarity p, const PulseSpec& spec) {
    for (std::size_t k = 0; k < gs.size(); ++k) {
      double g = gs[k];
      if (sigma > 0.0) g += sigma * standard_normal(rng);
      MeasurementRow r;
      r.pulse_index = static_cast<long long>(k);
      r.v_write = spec.v_write;
      r.t_write = spec.t_write;
      r.polarity = p;
      r.g_read = model.to_siemens(g);
      r.ramp = p == Polarity::potentiate ? 0 : 1;
      s.rows.push_back(r);
    }
  };
  emit(g_ltp, Polarity::potentiate, model.ltp_spec());
  emit(g_ltd, Polarity::depress, model.ltd_spec());
  return s;
}

ProtocolResult find_symmetry_point_protocol(const DeviceModel& model, const ProtocolOptions& options) {
  if (options.n_prime < 1) throw Error(ErrorKind::invalid_argument, "n_prime must be >= 1");
  if (!(options.tol > 0.0)) throw Error(ErrorKind::invalid_argument, "tol must be > 0");
  if (options.max_cycles < 0) throw Error(ErrorKind::invalid_argument, "max_cycles must be >= 0");

  ProtocolResult res;
  DeviceState s{std::clamp(options.g_start, 0.0, 1.0), 1.0, 1.0};
  res.trace.push_back(s.g);
  const auto pulse = [&](Polarity p) {
    s.g = step_conductance(model, s, p);
    res.trace.push_back(s.g);
  };
  for (int k = 0; k < options.n_prime; ++k) pulse(Polarity::depress);
  for (int k = 0; k < options.n_prime; ++k) pulse(Polarity::potentiate);

  res.g_star = s.g;
  for (int cycle = 0; cycle < options.max_cycles; ++cycle) {
    const double before = s.g;
    pulse(Polarity::depress);
    const double low = s.g;
    pulse(Polarity::potentiate);
    res.cycles = cycle + 1;
    res.g_star = low;
    if (std::abs(s.g - before) < options.tol) return res;
  }
  throw NoConvergenceError("alternating phase did not settle within " + std::to_string(options.max_cycles) +
                               " cycles",
                           res);
}

void write_protocol_trace(const ProtocolResult& result, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io_error, "cannot write " + path.string());
  out << "pulse,g_normalized\n" << std::setprecision(17);
  for (std::size_t i = 0; i < result.trace.size(); ++i) out << i << ',' << result.trace[i] << '\n';
}

// JSON ------------------------------------------------------------------------

std::string model_to_json(const DeviceModel& model) {
  nlohmann::ordered_json j;
  j["schema_version"] = kModelSchemaVersion;
  j["ltp_coeffs"] = model.ltp_coeffs();
  j["ltd_coeffs"] = model.ltd_coeffs();
  j["g_min"] = model.g_min();
  j["g_max"] = model.g_max();
  j["dtd_sigma"] = model.dtd_sigma();
  j["pulse_spec_ltp"] = {{"v", model.ltp_spec().v_write}, {"t", model.ltp_spec().t_write}};
  j["pulse_spec_ltd"] = {{"v", model.ltd_spec().v_write}, {"t", model.ltd_spec().t_write}};
  return j.dump(2);
}

DeviceModel model_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse_error, e.what());
  }
  if (!j.is_object() || !j.contains("schema_version")) {
    throw Error(ErrorKind::schema_error, "missing schema_version");
  }
  if (!j["schema_version"].is_number_integer() || j["schema_version"].get<int>() != kModelSchemaVersion) {
    throw Error(ErrorKind::schema_version_mismatch,
                "expected schema_version " + std::to_string(kModelSchemaVersion) + ", got " +
                    j["schema_version"].dump());
  }
  try {
    const auto coeffs = [&](const char* key) {
      const auto& a = j.at(key);
      if (!a.is_array() || a.size() != 6) {
        throw Error(ErrorKind::schema_error, std::string(key) + " must be an array of 6 numbers");
      }
      return a.get<std::vector<double>>();
    };
    const auto spec = [&](const char* key, Polarity p) {
      const auto& s = j.at(key);
      return PulseSpec{s.at("v").get<double>(), s.at("t").get<double>(), p};
    };
    const auto ltp = coeffs("ltp_coeffs");
    const auto ltd = coeffs("ltd_coeffs");
    return DeviceModel::make(ltp, ltd, j.at("g_min").get<double>(), j.at("g_max").get<double>(),
                             j.at("dtd_sigma").get<double>(), spec("pulse_spec_ltp", Polarity::potentiate),
                             spec("pulse_spec_ltd", Polarity::depress));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::schema_error, e.what());
  }
}

void export_model(const DeviceModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io_error, "cannot write " + path.string());
  out << model_to_json(model) << '\n';
  if (!out) throw Error(ErrorKind::io_error, "write failed for " + path.string());
}

DeviceModel import_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io_error, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return model_from_json(ss.str());
}

}  // namespace memtrain
