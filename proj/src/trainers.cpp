#include "memtrain/trainers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "memtrain/error.hpp"

namespace memtrain {

std::string_view to_string(Algorithm a) noexcept {
  switch (a) {
    case Algorithm::plain: return "plain";
    case Algorithm::mixed_precision: return "mixed_precision";
    case Algorithm::symmetry_shifted: return "symmetry_shifted";
    case Algorithm::digital_baseline: return "digital_baseline";
  }
  return "?";
}

std::string_view to_string(Rounding r) noexcept {
  return r == Rounding::stochastic ? "stochastic" : "deterministic";
}

std::string_view to_string(PairPolicy p) noexcept {
  switch (p) {
    case PairPolicy::fixed_reference: return "fixed_reference";
    case PairPolicy::potentiate_only: return "potentiate_only";
    case PairPolicy::depress_opposite: return "depress_opposite";
  }
  return "?";
}

Algorithm parse_algorithm(const std::string& s) {
  for (auto a : {Algorithm::plain, Algorithm::mixed_precision, Algorithm::symmetry_shifted,
                 Algorithm::digital_baseline}) {
    if (s == to_string(a)) return a;
  }
  throw Error(ErrorKind::config_error, "unknown algorithm '" + s + "'");
}

Rounding parse_rounding(const std::string& s) {
  if (s == "stochastic") return Rounding::stochastic;
  if (s == "deterministic") return Rounding::deterministic;
  throw Error(ErrorKind::config_error, "unknown rounding '" + s + "'");
}

PairPolicy parse_pair_policy(const std::string& s) {
  for (auto p : {PairPolicy::fixed_reference, PairPolicy::potentiate_only, PairPolicy::depress_opposite}) {
    if (s == to_string(p)) return p;
  }
  throw Error(ErrorKind::config_error, "unknown pair policy '" + s + "'");
}

namespace {

/// Values within 1e-9 of an integer count as that integer, so exact multiples
/// of the reference step are not split by rounding noise.
inline double snap(double a) noexcept {
  const double r = std::nearbyint(a);
  return std::abs(a - r) <= 1e-9 * std::max(1.0, a) ? r : a;
}

inline std::int64_t pulse_count(double a, Rounding rounding, Rng& rng) noexcept {
  a = snap(a);
  if (rounding == Rounding::deterministic) return static_cast<std::int64_t>(std::floor(a + 0.5));
  const double fl = std::floor(a);
  const double frac = a - fl;
  auto n = static_cast<std::int64_t>(fl);
  if (frac > 0.0 && uniform01(rng) < frac) ++n;
  return n;
}

void check_update_shapes(const AnalogTile& tile, std::span<const double> x, std::span<const double> delta) {
  if (x.size() != tile.cols() || delta.size() != tile.rows()) {
    throw Error(ErrorKind::shape_mismatch, "update expects x of " + std::to_string(tile.cols()) + " and delta of " +
                                               std::to_string(tile.rows()));
  }
}

std::vector<std::size_t> nonzero(std::span<const double> x) {
  std::vector<std::size_t> nz;
  nz.reserve(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (x[j] != 0.0) nz.push_back(j);
  }
  return nz;
}

}  // namespace

void emit_pair_pulses(AnalogTile& tile, std::size_t r, std::size_t c, bool increase, std::int64_t count,
                      PairPolicy policy) {
  switch (policy) {
    case PairPolicy::fixed_reference:
      tile.pulse(r, c, Side::plus, increase ? Polarity::potentiate : Polarity::depress, count);
      break;
    case PairPolicy::potentiate_only:
      tile.pulse(r, c, increase ? Side::plus : Side::minus, Polarity::potentiate, count);
      break;
    case PairPolicy::depress_opposite:
      tile.pulse(r, c, increase ? Side::minus : Side::plus, Polarity::depress, count);
      break;
  }
}

std::int64_t plain_sgd_update(AnalogTile& tile, std::span<const double> x, std::span<const double> delta,
                              double lr, const UpdateOptions& options, Rng& rng) {
  check_update_shapes(tile, x, delta);
  if (!(lr > 0.0)) throw Error(ErrorKind::invalid_argument, "lr must be > 0");
  const double step = options.ref_step > 0.0 ? options.ref_step : reference_step(tile.model());
  const double scale = lr / (tile.w_max() * step);
  const auto nz = nonzero(x);

  std::int64_t emitted = 0;
  for (std::size_t r = 0; r < tile.rows(); ++r) {
    const double d = delta[r];
    if (d == 0.0) continue;
    for (std::size_t c : nz) {
      // Requested change in units of the reference step; sign gives direction.
      const double a = -scale * d * x[c];
      const std::int64_t n = pulse_count(std::abs(a), options.rounding, rng);
      if (n == 0) continue;
      emit_pair_pulses(tile, r, c, a > 0.0, n, options.policy);
      emitted += n;
    }
  }
  return emitted;
}

MpState make_mp_state(const AnalogTile& tile, double threshold) {
  if (!(threshold > 0.0)) throw Error(ErrorKind::invalid_argument, "MP threshold must be > 0");
  return MpState{std::vector<double>(tile.rows() * tile.cols(), 0.0), threshold};
}

std::int64_t mp_sgd_update(AnalogTile& tile, MpState& state, std::span<const double> x,
                           std::span<const double> delta, double lr, const UpdateOptions& options) {
  check_update_shapes(tile, x, delta);
  if (state.chi.size() != tile.rows() * tile.cols()) throw Error(ErrorKind::shape_mismatch, "chi size mismatch");
  if (!(lr > 0.0)) throw Error(ErrorKind::invalid_argument, "lr must be > 0");
  const double step = options.ref_step > 0.0 ? options.ref_step : reference_step(tile.model());
  const double coef = lr / tile.w_max();
  const auto nz = nonzero(x);

  std::int64_t emitted = 0;
  for (std::size_t r = 0; r < tile.rows(); ++r) {
    const double d = delta[r];
    if (d == 0.0) continue;
    double* chi = state.chi.data() + r * tile.cols();
    for (std::size_t c : nz) {
      chi[c] -= coef * d * x[c];
      const double mag = std::abs(chi[c]);
      if (mag < state.threshold) continue;
      const auto n = static_cast<std::int64_t>(std::floor(snap(mag / step)));
      if (n == 0) continue;
      const bool increase = chi[c] > 0.0;
      emit_pair_pulses(tile, r, c, increase, n, options.policy);
      chi[c] -= (increase ? 1.0 : -1.0) * static_cast<double>(n) * step;
      emitted += n;
    }
  }
  return emitted;
}

// Training loop -----------------------------------------------------------------

namespace {

void validate(const TrainConfig& cfg, std::span<const DeviceModel> models, const MnistSplit& data) {
  if (cfg.layer_sizes.size() < 2) throw Error(ErrorKind::config_error, "layer_sizes needs at least two entries");
  for (auto s : cfg.layer_sizes) {
    if (s == 0) throw Error(ErrorKind::config_error, "layer sizes must be positive");
  }
  if (!(cfg.lr > 0.0)) throw Error(ErrorKind::config_error, "lr must be > 0");
  if (cfg.epochs < 0) throw Error(ErrorKind::config_error, "epochs must be >= 0");
  if (cfg.histogram_bins < 1) throw Error(ErrorKind::config_error, "histogram_bins must be >= 1");
  if (!(cfg.w_max > 0.0)) throw Error(ErrorKind::config_error, "w_max must be > 0");
  if (!(cfg.mp_threshold > 0.0)) throw Error(ErrorKind::config_error, "mp_threshold must be > 0");
  if (!(cfg.reference_g >= 0.0 && cfg.reference_g <= 1.0)) {
    throw Error(ErrorKind::config_error, "reference_g must be in [0, 1]");
  }
  const std::size_t n_layers = cfg.layer_sizes.size() - 1;
  if (cfg.algorithm != Algorithm::digital_baseline && models.size() != 1 && models.size() != n_layers) {
    throw Error(ErrorKind::config_error, "need one device model, or one per layer");
  }
  if (cfg.algorithm == Algorithm::symmetry_shifted && cfg.pair_policy != PairPolicy::fixed_reference) {
    throw Error(ErrorKind::config_error, "symmetry_shifted requires the fixed_reference pair policy");
  }
  if (cfg.layer_sizes.back() > 256) throw Error(ErrorKind::config_error, "at most 256 output classes");
  for (const auto* d : {&data.train, &data.test}) {
    if (d->size() == 0) throw Error(ErrorKind::data_error, "empty dataset split");
    if (d->features() != cfg.layer_sizes.front()) {
      throw Error(ErrorKind::data_error, "input size " + std::to_string(cfg.layer_sizes.front()) +
                                             " does not match " + std::to_string(d->features()) + " features");
    }
    for (auto l : d->labels) {
      if (l >= cfg.layer_sizes.back()) throw Error(ErrorKind::data_error, "label exceeds output size");
    }
  }
}

const DeviceModel& model_for(std::span<const DeviceModel> models, std::size_t l) {
  return models.size() == 1 ? models[0] : models[l];
}

bool is_analog(Algorithm a) noexcept { return a != Algorithm::digital_baseline; }

}  // namespace

Network build_network(const TrainConfig& cfg, std::span<const DeviceModel> models) {
  Network digital = Network::digital(cfg.layer_sizes, cfg.seed);
  if (!is_analog(cfg.algorithm)) return digital;

  std::vector<Layer> layers;
  for (std::size_t l = 0; l < digital.depth(); ++l) {
    const Layer& src = digital.layer(l);
    DeviceModel model = model_for(models, l);
    if (cfg.dtd_sigma >= 0.0) model = model.with_dtd_sigma(cfg.dtd_sigma);

    TileOptions opt;
    opt.w_max = cfg.w_max;
    opt.dac = make_converter(cfg.dac_bits, -1.0, 1.0);
    const double r_fwd = cfg.adc_range_factor * cfg.w_max * std::sqrt(static_cast<double>(src.inputs));
    const double r_bwd = cfg.adc_range_factor * cfg.w_max * std::sqrt(static_cast<double>(src.outputs));
    opt.adc = make_converter(cfg.adc_bits, -r_fwd, r_fwd);
    opt.adc_backward = make_converter(cfg.adc_bits, -r_bwd, r_bwd);
    opt.scaling = cfg.scaling;

    AnalogTile tile(src.outputs, src.inputs, std::move(model), opt, mix_seed(cfg.seed, 100 + l));
    if (cfg.algorithm == Algorithm::symmetry_shifted) {
      tile.set_reference_to_symmetry(cfg.symmetry_grid);
    } else if (cfg.pair_policy == PairPolicy::fixed_reference) {
      tile.set_reference(cfg.reference_g);
    } else {
      for (std::size_t r = 0; r < tile.rows(); ++r) {
        for (std::size_t c = 0; c < tile.cols(); ++c) tile.set_conductance(Side::minus, r, c, cfg.reference_g);
      }
    }
    tile.program_weights(src.weights);

    Layer L;
    L.inputs = src.inputs;
    L.outputs = src.outputs;
    L.bias = src.bias;
    L.tile = std::move(tile);
    layers.push_back(std::move(L));
  }
  return Network(std::move(layers));
}

TrainResult train(const TrainConfig& cfg, std::span<const DeviceModel> models, const MnistSplit& data,
                  const EpochCallback& on_epoch) {
  validate(cfg, models, data);
  TrainResult result;
  result.network = build_network(cfg, models);
  result.ledger = EnergyLedger(SchottkyParams(cfg.schottky), cfg.energy_mode);
  Network& net = result.network;
  const std::size_t depth = net.depth();
  const bool analog = is_analog(cfg.algorithm);

  std::vector<MpState> mp;
  std::vector<UpdateOptions> update(depth);
  for (std::size_t l = 0; l < depth && analog; ++l) {
    const AnalogTile& tile = *net.layer(l).tile;
    result.symmetry_points.push_back(analytic_symmetry_point(tile.model()));
    result.ref_steps.push_back(reference_step(tile.model()));
    update[l].rounding = cfg.rounding;
    update[l].policy = cfg.pair_policy;
    update[l].ref_step = result.ref_steps.back();
    if (cfg.algorithm == Algorithm::mixed_precision) {
      mp.push_back(make_mp_state(tile, cfg.mp_threshold * result.ref_steps.back()));
    }
  }

  Rng shuffle_rng = make_rng(cfg.seed, 20);
  Rng round_rng = make_rng(cfg.seed, 30);
  std::vector<std::size_t> order(data.train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  auto ws = net.make_workspace();
  std::vector<double> x(data.train.features());

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t l = 0; l < depth && analog; ++l) net.layer(l).tile->begin_epoch();
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform01(shuffle_rng) * static_cast<double>(i));
      std::swap(order[i - 1], order[std::min(j, i - 1)]);
    }

    double loss_sum = 0.0;
    for (std::size_t idx : order) {
      const auto img = data.train.image(idx);
      std::copy(img.begin(), img.end(), x.begin());
      const std::size_t label = data.train.labels[idx];
      net.forward(x, ws);
      loss_sum -= std::log(std::max(ws.act.back()[label], 1e-300));
      net.backward(label, ws);

      for (std::size_t l = 0; l < depth; ++l) {
        Layer& L = net.layer(l);
        const auto& in = ws.act[l];
        const auto& d = ws.delta[l];
        for (std::size_t r = 0; r < L.outputs; ++r) L.bias[r] -= cfg.lr * d[r];
        if (!analog) {
          for (std::size_t r = 0; r < L.outputs; ++r) {
            const double g = cfg.lr * d[r];
            if (g == 0.0) continue;
            double* row = L.weights.data() + r * L.inputs;
            for (std::size_t c = 0; c < L.inputs; ++c) row[c] -= g * in[c];
          }
          continue;
        }
        AnalogTile& tile = *L.tile;
        const PulseCounter before = tile.counter();
        std::int64_t emitted = 0;
        if (cfg.algorithm == Algorithm::mixed_precision) {
          emitted = mp_sgd_update(tile, mp[l], in, d, cfg.lr, update[l]);
        } else {
          emitted = plain_sgd_update(tile, in, d, cfg.lr, update[l], round_rng);
        }
        if (cfg.audit_pulses && (tile.counter() - before).total() != emitted) {
          throw std::logic_error("pulse counter disagrees with emitted pulses");
        }
      }
    }

    EpochReport rep;
    rep.epoch = epoch;
    rep.train_loss = loss_sum / static_cast<double>(order.size());
    rep.test_accuracy = evaluate(net, data.test);
    for (std::size_t l = 0; l < depth; ++l) {
      const Layer& L = net.layer(l);
      if (analog) {
        const AnalogTile& tile = *L.tile;
        const PulseCounter pc = tile.epoch_counter();
        rep.pulses_ltp += pc.potentiation;
        rep.pulses_ltd += pc.depression;
        rep.energy_j += result.ledger.record(l, epoch, pc, tile.model().ltp_spec(), tile.model().ltd_spec()).energy_j;
        rep.weight_hist.push_back(weight_histogram(tile, cfg.histogram_bins));
      } else {
        rep.weight_hist.push_back(weight_histogram(L.weights, cfg.w_max, cfg.histogram_bins));
      }
    }
    rep.cumulative_pulses = result.ledger.total_pulses();
    rep.cumulative_energy_j = result.ledger.total_j();
    result.reports.push_back(rep);
    if (on_epoch) on_epoch(result.reports.back());
  }
  return result;
}

}  // namespace memtrain
