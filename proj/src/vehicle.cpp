#include "fbl/vehicle.hpp"

#include <cmath>

namespace fbl {

Deriv5 bicycle_deriv(const VehicleState& s, const ControlInput& u,
                     const VehicleParams& p) {
  const double heading = s.psi + s.beta;
  return {s.v * std::cos(heading), s.v * std::sin(heading),
          (s.v / p.l_r) * std::sin(s.beta), u.a, u.b};
}

VehicleState step_rk4(const VehicleState& s, const ControlInput& u,
                      const VehicleParams& p, double dt) {
  auto add = [](const VehicleState& base, const Deriv5& d, double h) {
    VehicleState r = base;
    r.x += h * d[0];
    r.y += h * d[1];
    r.psi += h * d[2];
    r.v += h * d[3];
    r.beta += h * d[4];
    return r;
  };
  const Deriv5 k1 = bicycle_deriv(s, u, p);
  const Deriv5 k2 = bicycle_deriv(add(s, k1, 0.5 * dt), u, p);
  const Deriv5 k3 = bicycle_deriv(add(s, k2, 0.5 * dt), u, p);
  const Deriv5 k4 = bicycle_deriv(add(s, k3, dt), u, p);
  VehicleState out = s;
  const double h6 = dt / 6.0;
  out.x += h6 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
  out.y += h6 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
  out.psi += h6 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]);
  out.v += h6 * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3]);
  out.beta += h6 * (k1[4] + 2.0 * k2[4] + 2.0 * k3[4] + k4[4]);
  if (!(std::isfinite(out.x) && std::isfinite(out.y) &&
        std::isfinite(out.psi) && std::isfinite(out.v) &&
        std::isfinite(out.beta)))
    throw NonFiniteState("step_rk4 produced a non-finite state");
  return out;
}

double beta_from_steering(double delta_f, const VehicleParams& p) {
  constexpr double half_pi = 1.57079632679489661923;
  if (!(std::abs(delta_f) < half_pi))
    throw SteeringOutOfRange("|delta_f| must be < pi/2");
  return std::atan(p.l_r / (p.l_f + p.l_r) * std::tan(delta_f));
}

double steering_from_beta(double beta, const VehicleParams& p) {
  constexpr double half_pi = 1.57079632679489661923;
  if (!(std::abs(beta) < half_pi))
    throw SlipOutOfRange("|beta| must be < pi/2");
  return std::atan((p.l_f + p.l_r) / p.l_r * std::tan(beta));
}

ActuatorState actuator_step(const ActuatorState& act, double gas, double brake,
                            const ActuatorParams& p, double dt) {
  if (!(gas >= 0.0 && gas <= 1.0 && brake >= 0.0 && brake <= 1.0))
    throw ActionOutOfRange("gas and brake must lie in [0, 1]");
  ActuatorState out;
  out.gas = gas;
  out.brake = brake;
  const double target = p.gas_max * gas - p.brake_max * brake;
  out.accel = act.accel + (dt / p.tau) * (target - act.accel);
  return out;
}

}  // namespace fbl
