#include "fbl/linearize.hpp"

#include <cmath>

namespace fbl {

LinearState extract_linear_state(const VehicleState& s) {
  const double heading = s.psi + s.beta;
  LinearState xi;
  xi[0] = s.x;
  xi[1] = s.v * std::cos(heading);
  xi[2] = s.y;
  xi[3] = s.v * std::sin(heading);
  return xi;
}

Decoupling decoupling_terms(const VehicleState& s, const VehicleParams& p,
                            DriftForm form) {
  const double heading = s.psi + s.beta;
  const double c = std::cos(heading);
  const double sn = std::sin(heading);
  Decoupling d;
  d.a = {c, -s.v * sn, sn, s.v * c};
  if (form == DriftForm::exact) {
    const double w = (s.v * s.v / p.l_r) * std::sin(s.beta);
    d.b = {-w * sn, w * c};
  } else {
    const double w = (s.v / p.l_r) * sn;
    d.b = {-w, w};
  }
  return d;
}

ControlInput corrected_control(const VehicleState& s, const VirtualInput& v,
                               const Corrections& corr, const VehicleParams& p,
                               DriftForm form, double eps_v) {
  if (!(std::abs(s.v) >= eps_v))
    throw SpeedTooLow("decoupling matrix is singular: |V| < eps_v");
  const Decoupling d = decoupling_terms(s, p, form);
  const double det = d.det();
  // A^-1 for the 2x2 decoupling matrix.
  const double inv00 = d.a[3] / det;
  const double inv01 = -d.a[1] / det;
  const double inv10 = -d.a[2] / det;
  const double inv11 = d.a[0] / det;
  // beta_m = -A^-1 b, alpha_m = A^-1.
  const double bm0 = -(inv00 * d.b[0] + inv01 * d.b[1]);
  const double bm1 = -(inv10 * d.b[0] + inv11 * d.b[1]);
  ControlInput u;
  u.a = (bm0 + corr.beta[0]) + (inv00 + corr.alpha[0]) * v.v1 +
        (inv01 + corr.alpha[1]) * v.v2;
  u.b = (bm1 + corr.beta[1]) + (inv10 + corr.alpha[2]) * v.v1 +
        (inv11 + corr.alpha[3]) * v.v2;
  return u;
}

ControlInput nominal_control(const VehicleState& s, const VirtualInput& v,
                             const VehicleParams& p, DriftForm form,
                             double eps_v) {
  return corrected_control(s, v, Corrections{}, p, form, eps_v);
}

}  // namespace fbl
