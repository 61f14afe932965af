#include <cmath>

#include <doctest.h>

#include "fbl/rng.hpp"
#include "fbl/vehicle.hpp"

using namespace fbl;

namespace {
constexpr double kPi = 3.14159265358979323846;
}

TEST_CASE("bicycle_deriv straight-line and heading cases") {
  VehicleParams p{0.5, 0.5};

  Deriv5 d = bicycle_deriv({0, 0, 0, 1, 0}, {0, 0}, p);
  CHECK(d[0] == doctest::Approx(1.0));
  CHECK(d[1] == doctest::Approx(0.0));
  CHECK(d[2] == doctest::Approx(0.0));
  CHECK(d[3] == 0.0);
  CHECK(d[4] == 0.0);

  d = bicycle_deriv({0, 0, kPi / 2, 2, 0}, {1, 0}, p);
  CHECK(std::abs(d[0]) < 1e-15);
  CHECK(d[1] == doctest::Approx(2.0));
  CHECK(d[2] == doctest::Approx(0.0));
  CHECK(d[3] == 1.0);

  // Direct substitution with a nonzero slip angle.
  d = bicycle_deriv({0, 0, 0, 1, 0.1}, {0, 0}, p);
  CHECK(d[0] == doctest::Approx(std::cos(0.1)).epsilon(1e-15));
  CHECK(d[1] == doctest::Approx(std::sin(0.1)).epsilon(1e-15));
  CHECK(d[2] == doctest::Approx(2.0 * std::sin(0.1)).epsilon(1e-15));
}

TEST_CASE("step_rk4 trivial flows") {
  VehicleParams p{0.5, 0.5};
  VehicleState rest{1, 2, 0.3, 0, 0.1};
  VehicleState s = step_rk4(rest, {0, 0}, p, 0.02);
  CHECK(s.x == rest.x);
  CHECK(s.y == rest.y);
  CHECK(s.psi == rest.psi);
  CHECK(s.v == rest.v);
  CHECK(s.beta == rest.beta);

  // Linear flow is integrated exactly.
  VehicleState line = step_rk4({0, 0, 0, 1, 0}, {0, 0}, p, 0.02);
  CHECK(line.x == 0.02);
  CHECK(line.y == 0.0);
}

TEST_CASE("constant-beta motion is a circle of radius l_r / sin(beta)") {
  const VehicleParams p{0.5, 0.5};
  const double beta = 0.3;
  const double speed = 1.0;
  const double omega = (speed / p.l_r) * std::sin(beta);  // turn rate
  const double radius = p.l_r / std::sin(beta);
  const double heading0 = 0.0 + beta;
  // Centre of the analytic circle for heading theta, turn rate omega > 0.
  const double cx = 0.0 - (speed / omega) * std::sin(heading0);
  const double cy = 0.0 + (speed / omega) * std::cos(heading0);
  CHECK(speed / omega == doctest::Approx(radius).epsilon(1e-12));

  const double period = 2.0 * kPi / omega;
  const double dt = 0.002;
  const auto steps = static_cast<std::size_t>(std::llround(period / dt));
  VehicleState s{0, 0, 0, speed, beta};
  double max_radius_err = 0.0;
  for (std::size_t k = 0; k < steps; ++k) {
    s = step_rk4(s, {0, 0}, p, dt);
    const double r =
        std::sqrt((s.x - cx) * (s.x - cx) + (s.y - cy) * (s.y - cy));
    max_radius_err = std::max(max_radius_err, std::abs(r - radius));
  }
  // Close the non-integer remainder of the period.
  s = step_rk4(s, {0, 0}, p, period - static_cast<double>(steps) * dt);
  CHECK(max_radius_err < 1e-6);
  CHECK(std::abs(s.x) < 1e-6);
  CHECK(std::abs(s.y) < 1e-6);
}

TEST_CASE("speed is exactly conserved with zero inputs") {
  VehicleParams p{0.7, 0.6};
  VehicleState s{0, 0, 0.2, 1.7, 0.25};
  for (int k = 0; k < 2000; ++k) s = step_rk4(s, {0, 0}, p, 0.02);
  CHECK(s.v == 1.7);
  CHECK(s.beta == 0.25);
}

TEST_CASE("step_rk4 flags non-finite results") {
  VehicleParams p{0.5, 0.5};
  VehicleState big{0, 0, 0, 1e308, 0};
  CHECK_THROWS_AS(step_rk4(big, {1e308, 0}, p, 1e308), NonFiniteState);
}

TEST_CASE("beta_from_steering examples") {
  VehicleParams p{0.5, 0.5};
  CHECK(beta_from_steering(0.0, p) == 0.0);
  CHECK(beta_from_steering(0.3, p) ==
        doctest::Approx(std::atan(0.5 * std::tan(0.3))).epsilon(1e-15));
  // Symmetric wheelbase halves the tangent.
  VehicleParams sym{0.8, 0.8};
  CHECK(beta_from_steering(0.4, sym) ==
        doctest::Approx(std::atan(std::tan(0.4) / 2.0)).epsilon(1e-15));
  CHECK_THROWS_AS(beta_from_steering(1.6, p), SteeringOutOfRange);
}

TEST_CASE("steering_from_beta inverts beta_from_steering") {
  VehicleParams p{0.5, 0.7};
  CHECK(steering_from_beta(0.0, p) == 0.0);
  for (double delta = -1.5; delta <= 1.5; delta += 0.01) {
    const double beta = beta_from_steering(delta, p);
    CHECK(std::abs(steering_from_beta(beta, p) - delta) < 1e-12);
  }
  CHECK_THROWS_AS(steering_from_beta(1.6, p), SlipOutOfRange);
}

TEST_CASE("actuator first-order response") {
  ActuatorParams p;
  const double dt = 0.02;

  ActuatorState idle;
  idle = actuator_step(idle, 0, 0, p, dt);
  CHECK(idle.accel == 0.0);

  // Full gas converges to gas_max within 5 tau to 1%.
  ActuatorState act;
  const auto steps = static_cast<int>(std::llround(5.0 * p.tau / dt));
  for (int k = 0; k < steps; ++k) act = actuator_step(act, 1, 0, p, dt);
  CHECK(std::abs(act.accel - p.gas_max) < 0.01 * p.gas_max);

  // Half gas + half brake superpose to the signed steady state.
  ActuatorState mix;
  for (int k = 0; k < 500; ++k) mix = actuator_step(mix, 0.5, 0.5, p, dt);
  CHECK(mix.accel == doctest::Approx(0.5 * 4.0 - 0.5 * 8.0).epsilon(1e-6));

  CHECK_THROWS_AS(actuator_step(act, 1.2, 0, p, dt), ActionOutOfRange);
  CHECK_THROWS_AS(actuator_step(act, 0, -0.1, p, dt), ActionOutOfRange);
}

TEST_CASE("actuator output stays within its physical range") {
  ActuatorParams p;
  ActuatorState act;
  Rng rng(21);
  for (int k = 0; k < 5000; ++k) {
    act = actuator_step(act, rng.uniform(), rng.uniform(), p, 0.02);
    CHECK(act.accel <= p.gas_max);
    CHECK(act.accel >= -p.brake_max);
  }
}
