#include "memtrain/analog_tile.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "memtrain/characterization.hpp"
#include "memtrain/error.hpp"

namespace memtrain {

double ConverterSpec::quantize(double x) const noexcept {
  const double s = step();
  double k = std::floor((x - lo) / s + 0.5);
  k = std::clamp(k, 0.0, static_cast<double>(levels() - 1));
  return lo + k * s;
}

ConverterSpec make_converter(int bits, double lo, double hi) {
  if (bits < 1 || bits > 52) throw Error(ErrorKind::invalid_argument, "converter bits must be in [1, 52]");
  if (!(lo < hi)) throw Error(ErrorKind::invalid_argument, "converter range needs lo < hi");
  return ConverterSpec{bits, lo, hi};
}

AnalogTile::AnalogTile(std::size_t rows, std::size_t cols, DeviceModel model, TileOptions options,
                       std::uint64_t seed)
    : rows_(rows), cols_(cols), model_(std::move(model)), w_max_(options.w_max), seed_(seed) {
  if (rows == 0 || cols == 0) {
    throw Error(ErrorKind::invalid_shape,
                "tile shape must be positive, got " + std::to_string(rows) + "x" + std::to_string(cols));
  }
  if (!(w_max_ > 0.0)) throw Error(ErrorKind::invalid_argument, "w_max must be > 0");
  dac_ = make_converter(options.dac.bits, options.dac.lo, options.dac.hi);
  const double r_fwd = 2.0 * w_max_ * std::sqrt(static_cast<double>(cols));
  const double r_bwd = 2.0 * w_max_ * std::sqrt(static_cast<double>(rows));
  const auto adc = options.adc.value_or(ConverterSpec{dac_.bits, -r_fwd, r_fwd});
  adc_ = make_converter(adc.bits, adc.lo, adc.hi);
  const auto adc_b = options.adc_backward.value_or(ConverterSpec{adc_.bits, -r_bwd, r_bwd});
  adc_backward_ = make_converter(adc_b.bits, adc_b.lo, adc_b.hi);
  scaling_ = options.scaling;

  const double g0 = options.init_g.value_or(analytic_symmetry_point(model_));
  if (!(g0 >= 0.0 && g0 <= 1.0)) throw Error(ErrorKind::invalid_argument, "init_g must be in [0, 1]");

  // Plus devices first, then minus devices, each in row-major order.
  Rng rng = make_rng(seed, 1);
  const std::size_t n = rows * cols;
  plus_.reserve(n);
  minus_.reserve(n);
  for (std::size_t i = 0; i < n; ++i) plus_.push_back(sample_device_state(model_, g0, rng));
  for (std::size_t i = 0; i < n; ++i) minus_.push_back(sample_device_state(model_, g0, rng));
  weights_.resize(n);
  for (std::size_t i = 0; i < n; ++i) refresh_weight(i);
}

void AnalogTile::set_conductance(Side side, std::size_t r, std::size_t c, double g) {
  if (r >= rows_ || c >= cols_) throw Error(ErrorKind::shape_mismatch, "device index out of range");
  const std::size_t idx = r * cols_ + c;
  auto& s = side == Side::plus ? plus_[idx] : minus_[idx];
  s.g = std::clamp(g, 0.0, 1.0);
  refresh_weight(idx);
}

void AnalogTile::program_weights(std::span<const double> w) {
  if (w.size() != rows_ * cols_) throw Error(ErrorKind::shape_mismatch, "weight matrix size mismatch");
  for (std::size_t i = 0; i < w.size(); ++i) {
    plus_[i].g = std::clamp(minus_[i].g + w[i] / w_max_, 0.0, 1.0);
    refresh_weight(i);
  }
}

std::vector<double> AnalogTile::read_weights() const {
  std::vector<double> w(rows_ * cols_);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = w_max_ * (plus_[i].g - minus_[i].g);
  return w;
}

void AnalogTile::mvm(std::span<const double> in, std::span<double> out, bool transposed) const {
  const std::size_t n_in = transposed ? rows_ : cols_;
  const std::size_t n_out = transposed ? cols_ : rows_;
  if (in.size() != n_in || out.size() != n_out) {
    throw Error(ErrorKind::shape_mismatch, std::string(transposed ? "backward" : "forward") + " expects " +
                                               std::to_string(n_in) + " -> " + std::to_string(n_out) +
                                               ", got " + std::to_string(in.size()) + " -> " +
                                               std::to_string(out.size()));
  }
  const ConverterSpec& adc = transposed ? adc_backward_ : adc_;

  double scale = 1.0;
  if (scaling_ == InputScaling::abs_max) {
    scale = 0.0;
    for (double v : in) scale = std::max(scale, std::abs(v));
    if (scale == 0.0) {
      std::fill(out.begin(), out.end(), adc.quantize(0.0));
      return;
    }
  }
  const double inv = 1.0 / scale;
  std::vector<double> xq(n_in);
  for (std::size_t j = 0; j < n_in; ++j) xq[j] = dac_.quantize(in[j] * inv);

  const double* w = weights_.data();
  if (!transposed) {
    for (std::size_t r = 0; r < rows_; ++r) {
      const double* row = w + r * cols_;
      double acc = 0.0;
      for (std::size_t c = 0; c < cols_; ++c) acc += row[c] * xq[c];
      out[r] = acc;
    }
  } else {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t r = 0; r < rows_; ++r) {
      const double d = xq[r];
      if (d == 0.0) continue;
      const double* row = w + r * cols_;
      for (std::size_t c = 0; c < cols_; ++c) out[c] += row[c] * d;
    }
  }
  for (auto& v : out) v = adc.quantize(v) * scale;
}

void AnalogTile::forward(std::span<const double> x, std::span<double> y) const { mvm(x, y, false); }

std::vector<double> AnalogTile::forward(std::span<const double> x) const {
  std::vector<double> y(rows_);
  mvm(x, y, false);
  return y;
}

void AnalogTile::backward(std::span<const double> delta, std::span<double> y) const { mvm(delta, y, true); }

std::vector<double> AnalogTile::backward(std::span<const double> delta) const {
  std::vector<double> y(cols_);
  mvm(delta, y, true);
  return y;
}

void AnalogTile::pulse(std::size_t r, std::size_t c, Side side, Polarity polarity, std::int64_t count) {
  if (count <= 0) return;
  if (side == Side::minus && reference_frozen_) {
    throw Error(ErrorKind::reference_frozen, "reference device is frozen");
  }
  const std::size_t idx = r * cols_ + c;
  DeviceState& s = side == Side::plus ? plus_[idx] : minus_[idx];
  for (std::int64_t k = 0; k < count; ++k) s.g = step_conductance(model_, s, polarity);
  refresh_weight(idx);
  if (polarity == Polarity::potentiate) counter_.potentiation += count;
  else counter_.depression += count;
}

void AnalogTile::set_reference_to_symmetry(int grid_points) {
  for (std::size_t i = 0; i < minus_.size(); ++i) {
    minus_[i].g = pair_fixed_point(model_, minus_[i].ltp_scale, minus_[i].ltd_scale, grid_points);
    refresh_weight(i);
  }
  reference_frozen_ = true;
}

void AnalogTile::set_reference(double g) {
  if (!(g >= 0.0 && g <= 1.0)) throw Error(ErrorKind::invalid_argument, "reference conductance must be in [0, 1]");
  for (std::size_t i = 0; i < minus_.size(); ++i) {
    minus_[i].g = g;
    refresh_weight(i);
  }
  reference_frozen_ = true;
}

bool operator==(const AnalogTile& a, const AnalogTile& b) {
  return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.model_ == b.model_ && a.w_max_ == b.w_max_ &&
         a.dac_ == b.dac_ && a.adc_ == b.adc_ && a.adc_backward_ == b.adc_backward_ && a.scaling_ == b.scaling_ &&
         a.seed_ == b.seed_ && a.reference_frozen_ == b.reference_frozen_ && a.plus_ == b.plus_ &&
         a.minus_ == b.minus_ && a.counter_ == b.counter_ && a.epoch_start_ == b.epoch_start_;
}

// Checkpoint ------------------------------------------------------------------

namespace {

constexpr int kTileFormatVersion = 1;

nlohmann::json converter_json(const ConverterSpec& c) { return {{"bits", c.bits}, {"lo", c.lo}, {"hi", c.hi}}; }

ConverterSpec converter_from(const nlohmann::json& j) {
  return make_converter(j.at("bits").get<int>(), j.at("lo").get<double>(), j.at("hi").get<double>());
}

nlohmann::json counter_json(const PulseCounter& c) {
  return {{"potentiation", c.potentiation}, {"depression", c.depression}};
}

PulseCounter counter_from(const nlohmann::json& j) {
  return PulseCounter{j.at("potentiation").get<std::int64_t>(), j.at("depression").get<std::int64_t>()};
}

}  // namespace

std::string AnalogTile::to_json() const {
  nlohmann::ordered_json j;
  j["format"] = "memtrain-tile";
  j["version"] = kTileFormatVersion;
  j["rows"] = rows_;
  j["cols"] = cols_;
  j["seed"] = seed_;
  j["w_max"] = w_max_;
  j["scaling"] = scaling_ == InputScaling::abs_max ? "abs_max" : "none";
  j["reference_frozen"] = reference_frozen_;
  j["model"] = nlohmann::ordered_json::parse(model_to_json(model_));
  j["dac"] = converter_json(dac_);
  j["adc"] = converter_json(adc_);
  j["adc_backward"] = converter_json(adc_backward_);
  const auto column = [](const std::vector<DeviceState>& v, double DeviceState::*field) {
    std::vector<double> out;
    out.reserve(v.size());
    for (const auto& s : v) out.push_back(s.*field);
    return out;
  };
  j["g_plus"] = column(plus_, &DeviceState::g);
  j["g_minus"] = column(minus_, &DeviceState::g);
  j["ltp_scale_plus"] = column(plus_, &DeviceState::ltp_scale);
  j["ltd_scale_plus"] = column(plus_, &DeviceState::ltd_scale);
  j["ltp_scale_minus"] = column(minus_, &DeviceState::ltp_scale);
  j["ltd_scale_minus"] = column(minus_, &DeviceState::ltd_scale);
  j["counter"] = counter_json(counter_);
  j["epoch_start"] = counter_json(epoch_start_);
  return j.dump();
}

AnalogTile AnalogTile::from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format") != "memtrain-tile") throw Error(ErrorKind::schema_error, "not a tile checkpoint");
    if (j.at("version").get<int>() != kTileFormatVersion) {
      throw Error(ErrorKind::schema_version_mismatch, "unsupported tile checkpoint version");
    }
    AnalogTile t(Uninitialized{}, model_from_json(j.at("model").dump()));
    t.rows_ = j.at("rows").get<std::size_t>();
    t.cols_ = j.at("cols").get<std::size_t>();
    if (t.rows_ == 0 || t.cols_ == 0) throw Error(ErrorKind::invalid_shape, "empty tile in checkpoint");
    t.seed_ = j.at("seed").get<std::uint64_t>();
    t.w_max_ = j.at("w_max").get<double>();
    t.scaling_ = j.at("scaling") == "abs_max" ? InputScaling::abs_max : InputScaling::none;
    t.reference_frozen_ = j.at("reference_frozen").get<bool>();
    t.dac_ = converter_from(j.at("dac"));
    t.adc_ = converter_from(j.at("adc"));
    t.adc_backward_ = converter_from(j.at("adc_backward"));
    const std::size_t n = t.rows_ * t.cols_;
    const auto column = [&](const char* key) {
      auto v = j.at(key).get<std::vector<double>>();
      if (v.size() != n) throw Error(ErrorKind::schema_error, std::string(key) + " has the wrong length");
      return v;
    };
    const auto gp = column("g_plus"), gm = column("g_minus");
    const auto lp = column("ltp_scale_plus"), dp = column("ltd_scale_plus");
    const auto lm = column("ltp_scale_minus"), dm = column("ltd_scale_minus");
    t.plus_.resize(n);
    t.minus_.resize(n);
    t.weights_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      t.plus_[i] = DeviceState{gp[i], lp[i], dp[i]};
      t.minus_[i] = DeviceState{gm[i], lm[i], dm[i]};
      t.refresh_weight(i);
    }
    t.counter_ = counter_from(j.at("counter"));
    t.epoch_start_ = counter_from(j.at("epoch_start"));
    return t;
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::parse_error, e.what());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::schema_error, e.what());
  }
}

void AnalogTile::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io_error, "cannot write " + path.string());
  out << to_json() << '\n';
}

AnalogTile AnalogTile::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io_error, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

}  // namespace memtrain
