#pragma once

// Shared test oracles. Everything here is independent of the implementation
// paths it is used to check: finite differences against the simulator,
// characteristic-polynomial stability tests, and a fixed-point discrete
// Riccati iteration.

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "fbl/linearize.hpp"
#include "fbl/mat.hpp"
#include "fbl/vehicle.hpp"

namespace fbltest {

// RK4 on the continuously-fed-back closed loop: the control law is
// re-evaluated at every stage state, so with matched parameters and exact
// drift the positions evolve as exact quadratics in t.
inline fbl::VehicleState closed_loop_rk4(const fbl::VehicleState& s,
                                         const fbl::VirtualInput& v,
                                         const fbl::VehicleParams& p,
                                         fbl::DriftForm form, double dt) {
  auto deriv = [&](const fbl::VehicleState& state) {
    fbl::ControlInput u = fbl::nominal_control(state, v, p, form);
    return fbl::bicycle_deriv(state, u, p);
  };
  auto add = [](const fbl::VehicleState& base, const fbl::Deriv5& d,
                double h) {
    fbl::VehicleState r = base;
    r.x += h * d[0];
    r.y += h * d[1];
    r.psi += h * d[2];
    r.v += h * d[3];
    r.beta += h * d[4];
    return r;
  };
  const fbl::Deriv5 k1 = deriv(s);
  const fbl::Deriv5 k2 = deriv(add(s, k1, 0.5 * dt));
  const fbl::Deriv5 k3 = deriv(add(s, k2, 0.5 * dt));
  const fbl::Deriv5 k4 = deriv(add(s, k3, dt));
  fbl::VehicleState out = s;
  const double h6 = dt / 6.0;
  out.x += h6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]);
  out.y += h6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]);
  out.psi += h6 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2]);
  out.v += h6 * (k1[3] + 2 * k2[3] + 2 * k3[3] + k4[3]);
  out.beta += h6 * (k1[4] + 2 * k2[4] + 2 * k3[4] + k4[4]);
  return out;
}

// Central second difference of the closed-loop positions: the acceleration
// the plant actually realizes under commanded v.
inline std::array<double, 2> measured_accel(const fbl::VehicleState& s,
                                            const fbl::VirtualInput& v,
                                            const fbl::VehicleParams& p,
                                            fbl::DriftForm form, double dt) {
  const fbl::VehicleState s1 = closed_loop_rk4(s, v, p, form, dt);
  const fbl::VehicleState s2 = closed_loop_rk4(s1, v, p, form, dt);
  return {(s2.x - 2.0 * s1.x + s.x) / (dt * dt),
          (s2.y - 2.0 * s1.y + s.y) / (dt * dt)};
}

// Characteristic polynomial s^n + c[0] s^(n-1) + ... + c[n-1] via sums of
// principal minors (n <= 4), then the Routh-Hurwitz criterion.
inline std::vector<double> char_poly(const fbl::Mat& a) {
  const std::size_t n = a.rows();
  if (n > 4) throw std::invalid_argument("char_poly: n <= 4 only");
  auto minor_det = [&](const std::vector<std::size_t>& idx) {
    const std::size_t k = idx.size();
    if (k == 1) return a(idx[0], idx[0]);
    if (k == 2)
      return a(idx[0], idx[0]) * a(idx[1], idx[1]) -
             a(idx[0], idx[1]) * a(idx[1], idx[0]);
    if (k == 3) {
      double det = 0.0;
      for (std::size_t c = 0; c < 3; ++c) {
        const double sign = (c % 2 == 0) ? 1.0 : -1.0;
        std::size_t c1 = (c + 1) % 3, c2 = (c + 2) % 3;
        if (c1 > c2) std::swap(c1, c2);
        det += sign * a(idx[0], idx[c]) *
               (a(idx[1], idx[c1]) * a(idx[2], idx[c2]) -
                a(idx[1], idx[c2]) * a(idx[2], idx[c1]));
      }
      return det;
    }
    // k == 4: Laplace expansion along the first row.
    double det = 0.0;
    for (std::size_t c = 0; c < 4; ++c) {
      std::vector<std::size_t> rows{idx[1], idx[2], idx[3]};
      std::vector<std::size_t> cols;
      for (std::size_t cc = 0; cc < 4; ++cc)
        if (cc != c) cols.push_back(idx[cc]);
      fbl::Mat sub(3, 3);
      for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) sub(i, j) = a(rows[i], cols[j]);
      const double sign = (c % 2 == 0) ? 1.0 : -1.0;
      std::vector<std::size_t> sidx{0, 1, 2};
      double sdet =
          sub(0, 0) * (sub(1, 1) * sub(2, 2) - sub(1, 2) * sub(2, 1)) -
          sub(0, 1) * (sub(1, 0) * sub(2, 2) - sub(1, 2) * sub(2, 0)) +
          sub(0, 2) * (sub(1, 0) * sub(2, 1) - sub(1, 1) * sub(2, 0));
      det += sign * a(idx[0], idx[c]) * sdet;
    }
    return det;
  };

  // Sum of k x k principal minors for each k.
  std::vector<double> sums(n + 1, 0.0);
  std::vector<std::size_t> idx;
  auto rec = [&](auto&& self, std::size_t start, std::size_t k) -> void {
    if (idx.size() == k) {
      sums[k] += minor_det(idx);
      return;
    }
    for (std::size_t i = start; i < n; ++i) {
      idx.push_back(i);
      self(self, i + 1, k);
      idx.pop_back();
    }
  };
  for (std::size_t k = 1; k <= n; ++k) rec(rec, 0, k);

  std::vector<double> c(n);
  double sign = -1.0;
  for (std::size_t k = 1; k <= n; ++k) {
    c[k - 1] = sign * sums[k];
    sign = -sign;
  }
  return c;
}

// Routh-Hurwitz: all roots of s^n + c[0] s^(n-1) + ... + c[n-1] in the open
// left half plane.
inline bool routh_hurwitz(const std::vector<double>& c) {
  std::vector<double> coeffs;
  coeffs.push_back(1.0);
  for (double v : c) coeffs.push_back(v);
  const std::size_t n = coeffs.size();
  std::vector<std::vector<double>> table(n);
  for (std::size_t j = 0; j < n; j += 2) table[0].push_back(coeffs[j]);
  for (std::size_t j = 1; j < n; j += 2) table[1].push_back(coeffs[j]);
  if (table[1].empty()) table[1].push_back(0.0);
  for (std::size_t i = 2; i < n; ++i) {
    const auto& r1 = table[i - 2];
    const auto& r2 = table[i - 1];
    const double pivot = r2[0];
    if (pivot == 0.0) return false;
    std::vector<double> row;
    for (std::size_t j = 0; j + 1 < r1.size() || j + 1 < r2.size(); ++j) {
      const double a1 = j + 1 < r1.size() ? r1[j + 1] : 0.0;
      const double a2 = j + 1 < r2.size() ? r2[j + 1] : 0.0;
      row.push_back((pivot * a1 - r1[0] * a2) / pivot);
    }
    if (row.empty()) row.push_back(r1.back());
    table[i] = row;
  }
  for (std::size_t i = 0; i < n; ++i)
    if (table[i][0] <= 0.0) return false;
  return true;
}

// Infinite-horizon discrete LQR cost matrix by value iteration on the
// Riccati recursion (independent of the CARE solver under test).
inline fbl::Mat dare_fixed_point(const fbl::Mat& a, const fbl::Mat& b,
                                 const fbl::Mat& q, const fbl::Mat& r,
                                 int iters = 20000) {
  fbl::Mat p = q;
  for (int it = 0; it < iters; ++it) {
    fbl::Mat btp = b.transpose() * p;
    fbl::Mat s = r + btp * b;  // m x m
    // Invert small s directly (m <= 2 in our uses).
    fbl::Mat sinv(s.rows(), s.cols());
    if (s.rows() == 1) {
      sinv(0, 0) = 1.0 / s(0, 0);
    } else if (s.rows() == 2) {
      const double det = s(0, 0) * s(1, 1) - s(0, 1) * s(1, 0);
      sinv(0, 0) = s(1, 1) / det;
      sinv(0, 1) = -s(0, 1) / det;
      sinv(1, 0) = -s(1, 0) / det;
      sinv(1, 1) = s(0, 0) / det;
    } else {
      throw std::invalid_argument("dare_fixed_point: m <= 2 only");
    }
    fbl::Mat atpa = a.transpose() * p * a;
    fbl::Mat atpb = a.transpose() * p * b;
    fbl::Mat next = q + atpa - atpb * sinv * (btp * a);
    const double delta = (next - p).max_abs();
    p = next;
    if (delta < 1e-14) break;
  }
  return p;
}

}  // namespace fbltest
