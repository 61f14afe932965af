#pragma once

#include <array>
#include <string>

#include "fbl/learn.hpp"
#include "fbl/planner.hpp"
#include "fbl/prenet.hpp"
#include "fbl/vehicle.hpp"

namespace fbl {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Whole-experiment configuration. Defaults reproduce the mismatch scenario:
/// nominal model l_r = 0.5, plant l_r = 1.0, a 5 s / dt = 0.02 run from
/// (0,0) to (5,5). Everything here round-trips through the text config.
struct ExperimentConfig {
  // [vehicle]
  VehicleParams plant{1.0, 1.0};
  VehicleParams model{0.5, 0.5};

  // [scenario] -- linear-state endpoints for the planner plus the vehicle
  // start pose. The default x0 matches the start pose's linear state.
  std::array<double, 4> x0{0.0, 0.0, 0.0, 0.5};
  std::array<double, 4> xf{5.0, 0.0, 5.0, 0.0};
  double t_final = 5.0;
  double dt = 0.02;
  VehicleState start{0.0, 0.0, 1.5707963267948966, 0.5, 0.0};

  // [controller]
  DriftForm drift = DriftForm::exact;
  double eps_v = 1e-3;
  double a_max = 4.0;
  double b_max = 1.5;
  double blowup = 1e3;

  // [planner] -- the position weight shapes the path so the x-axis
  // acceleration arrives once the car has gathered speed; the initial
  // low-speed slip transient (and with it the discretization loss) shrinks
  // by an order of magnitude versus a pure minimum-energy plan.
  PlanWeights plan_weights{{0.3, 0.0, 0.3, 0.0},
                           {1.0, 1.0},
                           {0.0, 0.0, 0.0, 0.0},
                           10.0};
  double qp_tol = 1e-8;
  int qp_max_iter = 2000;
  int replan_every = 0;  // receding-horizon hook; 0 disables re-planning

  // [tracker] -- deliberately soft: the experiment measures how well the
  // (corrected) linearizing controller follows the plan on its own, so the
  // feedback only has to tame slow drift, not mask model error.
  std::array<double, 4> tracker_q{0.002, 0.002, 0.002, 0.002};
  std::array<double, 2> tracker_r{1.0, 1.0};

  // [trainer]
  TrainerConfig trainer;
  double policy_output_gain = 0.1;
  std::size_t policy_hidden = 32;

  // [actuator] / [prenet]
  ActuatorParams actuator;
  CollectOptions collect;
  PrenetTrainOptions prenet_train;

  // [output]
  std::string out_dir = "out";

  // Steps per episode: round(T/dt) - 1. The plan carries one more state
  // than there are steps.
  std::size_t episode_steps() const;
  std::size_t plan_states() const { return episode_steps() + 1; }

  LinearState x0_state() const;
  LinearState xf_state() const;
  ScenarioRuntime runtime() const;
};

// Throws ConfigError on invalid settings.
void validate(const ExperimentConfig& cfg);

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
std::string serialize_config(const ExperimentConfig& cfg);

}  // namespace fbl
