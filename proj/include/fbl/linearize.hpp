#pragma once

#include <array>
#include <stdexcept>

#include "fbl/vehicle.hpp"

namespace fbl {

struct SpeedTooLow : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Normal-form state (x, xdot, y, ydot) of the linearized vehicle.
struct LinearState {
  std::array<double, 4> xi{0.0, 0.0, 0.0, 0.0};

  double& operator[](std::size_t i) { return xi[i]; }
  double operator[](std::size_t i) const { return xi[i]; }
};

/// Virtual input to the linearized system: commanded (xddot, yddot).
struct VirtualInput {
  double v1 = 0.0;
  double v2 = 0.0;
};

/// Decoupling matrix A(x) and drift term b(x) of the input-output map
/// (xddot, yddot) = b(x) + A(x) (a, b). det(A) = V identically.
struct Decoupling {
  std::array<double, 4> a{};  // row-major 2x2
  std::array<double, 2> b{};

  double det() const { return a[0] * a[3] - a[1] * a[2]; }
};

// The drift term printed alongside the decoupling matrix omits the factor
// V sin(beta) that the chain rule through psidot = (V/l_r) sin(beta)
// produces. `exact` is the chain-rule form; `as_printed` reproduces the
// display for fidelity experiments.
enum class DriftForm { exact, as_printed };

/// Learned additive corrections to the nominal linearizing terms.
struct Corrections {
  std::array<double, 2> beta{0.0, 0.0};
  std::array<double, 4> alpha{0.0, 0.0, 0.0, 0.0};  // row-major 2x2
};

LinearState extract_linear_state(const VehicleState& s);

Decoupling decoupling_terms(const VehicleState& s, const VehicleParams& p,
                            DriftForm form);

// u = (beta_m + beta_corr) + (alpha_m + alpha_corr) v with beta_m = -A^-1 b
// and alpha_m = A^-1. Throws SpeedTooLow when |V| < eps_v since det(A) = V.
ControlInput corrected_control(const VehicleState& s, const VirtualInput& v,
                               const Corrections& corr, const VehicleParams& p,
                               DriftForm form, double eps_v = 1e-3);

// The uncorrected law; identical floating-point path to corrected_control
// with zero corrections.
ControlInput nominal_control(const VehicleState& s, const VirtualInput& v,
                             const VehicleParams& p, DriftForm form,
                             double eps_v = 1e-3);

}  // namespace fbl
