#pragma once

#include <string>
#include <vector>

#include "fbl/linearize.hpp"
#include "fbl/mat.hpp"
#include "fbl/numerics.hpp"

namespace fbl {

/// Normal-form model (x, xdot, y, ydot) with inputs (xddot, yddot), plus its
/// exact zero-order-hold discretization at dt: per decoupled double
/// integrator Abar = [[1, dt], [0, 1]], Bbar = [[dt^2/2], [dt]].
struct LinearModel {
  Mat a;     // 4x4
  Mat b;     // 4x2
  Mat c;     // 2x4
  Mat abar;  // 4x4
  Mat bbar;  // 4x2
  double dt = 0.0;
};

// (Abar, Bbar) for the 4-state, 2-input normal form.
std::pair<Mat, Mat> discretize(double dt);

LinearModel linear_model(double dt);

struct PlanResult {
  std::vector<LinearState> states;   // N
  std::vector<VirtualInput> inputs;  // N-1
  double objective = 0.0;
};

/// Diagonal weights for the planning QP. q/qf weigh all N states (the fixed
/// x0 term is a constant offset kept in the reported objective).
struct PlanWeights {
  std::array<double, 4> q{0.0, 0.0, 0.0, 0.0};
  std::array<double, 2> r{1.0, 1.0};
  std::array<double, 4> qf{0.0, 0.0, 0.0, 0.0};
  double v_bnds = 10.0;
};

/// Optional interior equality on the position coordinates at step k.
struct Waypoint {
  std::size_t k = 0;
  double x = 0.0;
  double y = 0.0;
};

/// Finite-horizon planning QP over the stacked inputs (condensed form):
///
///   min  sum_k x_k^T Q x_k + sum_k v_k^T R v_k + x_{N-1}^T Qf x_{N-1}
///   s.t. x_{k+1} = Abar x_k + Bbar v_k,  x_0 fixed,  x_{N-1} = xf,
///        |v_k|_inf <= v_bnds
///
/// States are eliminated through the reachability expansion and
/// reconstructed by forward rollout afterwards; the terminal state is then
/// pinned to xf, so states.front() == x0 and states.back() == xf hold
/// exactly while the dynamics residual stays within the solver tolerance.
/// Throws Infeasible when the minimum-norm reachability certificate proves
/// the endpoint is out of reach under v_bnds.
PlanResult plan(const LinearState& x0, const LinearState& xf, std::size_t n,
                const PlanWeights& w, double dt,
                const std::vector<Waypoint>& waypoints = {},
                double qp_tol = 1e-8, int qp_max_iter = 2000);

/// Continuous-time LQR tracking gain F (2x4) for the normal form.
Mat tracker_gain(const Mat& q, const Mat& r);

// v = v_ref - F (xi - xi_ref).
VirtualInput track(const LinearState& xi, const LinearState& xi_ref,
                   const VirtualInput& v_ref, const Mat& f);

// CSV columns: k, t, x, xdot, y, ydot, v1, v2 (zeros on the final row,
// which has no input).
void write_plan_csv(const std::string& path, const PlanResult& plan,
                    double dt);

}  // namespace fbl
