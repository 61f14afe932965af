#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fbl/mlp.hpp"
#include "fbl/vehicle.hpp"

namespace fbl {

struct NonFiniteLoss : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ActuationSample {
  double accel = 0.0;  // measured mean dV/dt over the hold window
  double gas = 0.0;
  double brake = 0.0;
};

struct CollectOptions {
  ActuatorParams actuator;
  std::size_t n = 5000;
  std::size_t hold_steps = 10;
  // At 20 Hz the ten-step hold spans 5 tau, so the window mean is close to
  // the steady-state acceleration of the held action and the inverse net
  // learns a nearly unbiased map.
  double dt = 0.05;
  std::uint64_t seed = 7;
};

/// Samples uniformly random (gas, brake) pairs, holds each for hold_steps
/// on the lagged actuator driving a straight-line vehicle (steering fixed
/// at zero), and labels the window with mean(dV/dt). The speed is reseeded
/// to a cruising value whenever it drops low enough that a braking window
/// could run into the V = 0 floor and corrupt the label.
std::vector<ActuationSample> collect_data(const CollectOptions& opts);

void write_dataset_csv(const std::string& path,
                       const std::vector<ActuationSample>& data);
std::vector<ActuationSample> read_dataset_csv(const std::string& path);

/// Inverse actuator model: commanded acceleration -> (gas, brake).
/// One hidden layer of 200 leaky-ReLU units, two linear outputs.
struct PreNet {
  Mlp net;

  static PreNet make(std::size_t hidden = 200);
};

struct PrenetTrainOptions {
  std::size_t epochs = 200;
  double lr = 0.05;
  std::size_t batch = 32;
  std::uint64_t seed = 7;
  std::size_t hidden = 200;
};

struct PrenetTrainResult {
  PreNet net;
  Vec loss_curve;  // full-dataset MSE after each epoch
  double final_mse = 0.0;
};

/// Minimizes the MSE between predicted and recorded (gas, brake) with Adam.
/// A non-finite epoch loss aborts training and returns the last finite
/// checkpoint (NonFiniteLoss is thrown only if no finite epoch exists).
PrenetTrainResult train_prenet(const std::vector<ActuationSample>& data,
                               const PrenetTrainOptions& opts);

// Forward pass clamped to [0, 1]^2.
std::pair<double, double> accel_to_action(const PreNet& net, double accel);

void save_prenet_json(const std::string& path, const PreNet& net);
PreNet load_prenet_json(const std::string& path);

}  // namespace fbl
