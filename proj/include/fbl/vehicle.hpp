#pragma once

#include <array>
#include <stdexcept>

namespace fbl {

struct NonFiniteState : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SteeringOutOfRange : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SlipOutOfRange : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ActionOutOfRange : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Kinematic bicycle state: planar position, inertial heading, speed of the
/// centre of mass, and slip angle beta of the velocity vector relative to
/// the longitudinal axis.
struct VehicleState {
  double x = 0.0;
  double y = 0.0;
  double psi = 0.0;
  double v = 0.0;
  double beta = 0.0;
};

/// Inputs: a drives dV/dt, b drives dbeta/dt.
struct ControlInput {
  double a = 0.0;
  double b = 0.0;
};

struct VehicleParams {
  double l_r = 0.5;  // centre of mass to rear axle [m]
  double l_f = 0.5;  // centre of mass to front axle [m]
};

using Deriv5 = std::array<double, 5>;

// d/dt (x, y, psi, V, beta) for the kinematic bicycle.
Deriv5 bicycle_deriv(const VehicleState& s, const ControlInput& u,
                     const VehicleParams& p);

// Classical RK4 step with the input held constant over dt.
// Throws NonFiniteState if any output component is non-finite.
VehicleState step_rk4(const VehicleState& s, const ControlInput& u,
                      const VehicleParams& p, double dt);

// Slip angle from front steering angle: beta = atan(l_r/(l_f+l_r) tan(delta)).
double beta_from_steering(double delta_f, const VehicleParams& p);

// Exact inverse of beta_from_steering for |delta_f| < pi/2.
double steering_from_beta(double beta, const VehicleParams& p);

/// First-order-lag longitudinal actuator: commanded gas/brake fractions pull
/// the realized acceleration toward gas_max*gas - brake_max*brake with time
/// constant tau. Stands in for the racing environment's pedal dynamics.
struct ActuatorParams {
  double gas_max = 4.0;    // [m/s^2]
  double brake_max = 8.0;  // [m/s^2]
  double tau = 0.1;        // [s]
};

struct ActuatorState {
  double gas = 0.0;
  double brake = 0.0;
  double accel = 0.0;  // realized (lagged) acceleration
};

ActuatorState actuator_step(const ActuatorState& act, double gas, double brake,
                            const ActuatorParams& p, double dt);

}  // namespace fbl
