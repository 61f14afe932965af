#include "fbl/prenet.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "fbl/io.hpp"
#include "fbl/rng.hpp"

namespace fbl {

std::vector<ActuationSample> collect_data(const CollectOptions& opts) {
  if (opts.n < 1) throw std::invalid_argument("collect_data: n must be >= 1");
  if (opts.hold_steps < 2)
    throw std::invalid_argument("collect_data: hold_steps must be >= 2");
  Rng rng(opts.seed);
  std::vector<ActuationSample> data;
  data.reserve(opts.n);

  double v = 0.0;
  ActuatorState act;
  const double window = static_cast<double>(opts.hold_steps) * opts.dt;
  // Worst case the brake removes brake_max * window of speed in one window;
  // stay above that so no window touches the V = 0 floor.
  const double v_floor = opts.actuator.brake_max * window + 0.5;

  for (std::size_t i = 0; i < opts.n; ++i) {
    // One pedal at a time: simultaneous gas and brake would make the
    // acceleration-to-action map multivalued and the inverse net would
    // learn pedal-riding actions instead of clean ones.
    const bool use_gas = rng.uniform() < 0.5;
    const double mag = rng.uniform();
    const double gas = use_gas ? mag : 0.0;
    const double brake = use_gas ? 0.0 : mag;
    if (v < v_floor) v = rng.uniform(5.0, 30.0);
    const double v_start = v;
    for (std::size_t k = 0; k < opts.hold_steps; ++k) {
      act = actuator_step(act, gas, brake, opts.actuator, opts.dt);
      v = std::max(0.0, v + act.accel * opts.dt);
    }
    data.push_back({(v - v_start) / window, gas, brake});
  }
  return data;
}

void write_dataset_csv(const std::string& path,
                       const std::vector<ActuationSample>& data) {
  CsvWriter csv(path);
  csv.row({"acceleration", "gas", "brake"});
  for (const ActuationSample& s : data) csv.row({s.accel, s.gas, s.brake});
}

std::vector<ActuationSample> read_dataset_csv(const std::string& path) {
  std::vector<ActuationSample> data;
  for (const auto& row : read_csv(path)) {
    if (row.size() != 3)
      throw std::runtime_error("dataset csv: expected 3 columns");
    data.push_back({row[0], row[1], row[2]});
  }
  return data;
}

PreNet PreNet::make(std::size_t hidden) {
  MlpSpec spec;
  spec.layers = {1, hidden, 2};
  spec.act = Activation::leaky_relu;
  spec.output_gain = 1.0;
  spec.input_scale = {0.25};  // accelerations span roughly [-8, 4] m/s^2
  return PreNet{Mlp(std::move(spec))};
}

PrenetTrainResult train_prenet(const std::vector<ActuationSample>& data,
                               const PrenetTrainOptions& opts) {
  if (data.empty())
    throw std::invalid_argument("train_prenet: dataset is empty");
  PreNet net = PreNet::make(opts.hidden);
  net.net.randomize(mix_seed(opts.seed, 0x1417), 1.0);
  Adam adam(net.net.param_count(), opts.lr);

  const std::size_t n = data.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  auto full_mse = [&](const Mlp& m) {
    double sum = 0.0;
    for (const ActuationSample& s : data) {
      Vec y = m.forward({s.accel});
      const double dg = y[0] - s.gas;
      const double db = y[1] - s.brake;
      sum += dg * dg + db * db;
    }
    return sum / (2.0 * static_cast<double>(n));
  };

  PrenetTrainResult result{PreNet::make(opts.hidden), {}, 0.0};
  Vec grad(net.net.param_count());
  Vec last_finite = net.net.params();
  bool have_finite = false;

  for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
    // Deterministic Fisher-Yates shuffle per epoch.
    Rng shuffle_rng(mix_seed(opts.seed, 0x50f, epoch));
    for (std::size_t i = n; i-- > 1;) {
      const std::size_t j =
          static_cast<std::size_t>(shuffle_rng.uniform() * (i + 1));
      std::swap(order[i], order[std::min(j, i)]);
    }
    for (std::size_t start = 0; start < n; start += opts.batch) {
      const std::size_t end = std::min(n, start + opts.batch);
      std::fill(grad.begin(), grad.end(), 0.0);
      const double inv = 1.0 / (2.0 * static_cast<double>(end - start));
      for (std::size_t idx = start; idx < end; ++idx) {
        const ActuationSample& s = data[order[idx]];
        Vec x{s.accel};
        Vec y = net.net.forward(x);
        Vec gy{2.0 * inv * (y[0] - s.gas), 2.0 * inv * (y[1] - s.brake)};
        net.net.forward_backward(x, gy, grad);
      }
      adam.step(net.net.params(), grad);
    }
    const double mse = full_mse(net.net);
    if (!std::isfinite(mse)) {
      if (!have_finite)
        throw NonFiniteLoss("prenet training diverged on the first epoch");
      net.net.params() = last_finite;
      break;
    }
    result.loss_curve.push_back(mse);
    last_finite = net.net.params();
    have_finite = true;
  }

  result.net.net.params() = net.net.params();
  result.final_mse = full_mse(result.net.net);
  return result;
}

std::pair<double, double> accel_to_action(const PreNet& net, double accel) {
  Vec y = net.net.forward({accel});
  auto clamp01 = [](double v) { return std::min(1.0, std::max(0.0, v)); };
  return {clamp01(y[0]), clamp01(y[1])};
}

void save_prenet_json(const std::string& path, const PreNet& net) {
  nlohmann::json j;
  j["layers"] = net.net.spec().layers;
  j["activation"] = "leaky_relu";
  j["output_gain"] = net.net.spec().output_gain;
  j["input_scale"] = net.net.spec().input_scale;
  j["params"] = net.net.params();
  write_text_file(path, j.dump(2) + "\n");
}

PreNet load_prenet_json(const std::string& path) {
  nlohmann::json j = nlohmann::json::parse(read_text_file(path));
  MlpSpec spec;
  spec.layers = j.at("layers").get<std::vector<std::size_t>>();
  spec.act = Activation::leaky_relu;
  spec.output_gain = j.at("output_gain").get<double>();
  spec.input_scale = j.at("input_scale").get<Vec>();
  PreNet net{Mlp(std::move(spec))};
  Vec params = j.at("params").get<Vec>();
  if (params.size() != net.net.param_count())
    throw std::runtime_error("prenet file: parameter count mismatch");
  net.net.params() = std::move(params);
  return net;
}

}  // namespace fbl
