#include "fbl/planner.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "fbl/io.hpp"

namespace fbl {

std::pair<Mat, Mat> discretize(double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("discretize: dt must be > 0");
  Mat abar = Mat::identity(4);
  abar(0, 1) = dt;
  abar(2, 3) = dt;
  Mat bbar(4, 2);
  bbar(0, 0) = 0.5 * dt * dt;
  bbar(1, 0) = dt;
  bbar(2, 1) = 0.5 * dt * dt;
  bbar(3, 1) = dt;
  return {abar, bbar};
}

LinearModel linear_model(double dt) {
  LinearModel m;
  m.a = Mat(4, 4);
  m.a(0, 1) = 1.0;
  m.a(2, 3) = 1.0;
  m.b = Mat(4, 2);
  m.b(1, 0) = 1.0;
  m.b(3, 1) = 1.0;
  m.c = Mat(2, 4);
  m.c(0, 0) = 1.0;
  m.c(1, 2) = 1.0;
  auto [abar, bbar] = discretize(dt);
  m.abar = abar;
  m.bbar = bbar;
  m.dt = dt;
  return m;
}

namespace {

Vec to_vec(const LinearState& s) { return {s[0], s[1], s[2], s[3]}; }

LinearState to_state(const Vec& v) {
  LinearState s;
  for (std::size_t i = 0; i < 4; ++i) s[i] = v[i];
  return s;
}

}  // namespace

PlanResult plan(const LinearState& x0, const LinearState& xf, std::size_t n,
                const PlanWeights& w, double dt,
                const std::vector<Waypoint>& waypoints, double qp_tol,
                int qp_max_iter) {
  if (n < 2) throw std::invalid_argument("plan: need at least 2 states");
  const std::size_t steps = n - 1;     // inputs
  const std::size_t nv = 2 * steps;    // decision variables
  auto [abar, bbar] = discretize(dt);

  // reach[k][j] = Abar^(k-1-j) Bbar maps input j into state k (j < k).
  // Built by the recurrence reach[k][j] = Abar reach[k-1][j].
  std::vector<std::vector<Mat>> reach(n);
  for (std::size_t k = 1; k < n; ++k) {
    reach[k].resize(k);
    for (std::size_t j = 0; j + 1 < k; ++j) reach[k][j] = abar * reach[k - 1][j];
    reach[k][k - 1] = bbar;
  }
  // Free response Abar^k x0.
  std::vector<Vec> free_resp(n);
  free_resp[0] = to_vec(x0);
  for (std::size_t k = 1; k < n; ++k) free_resp[k] = abar * free_resp[k - 1];

  // Equality rows: terminal state, then optional waypoint positions.
  std::size_t m_eq = 4;
  for (const auto& wp : waypoints) {
    if (wp.k == 0 || wp.k >= n - 1)
      throw std::invalid_argument("plan: waypoint index must be interior");
    m_eq += 2;
  }
  Mat aeq(m_eq, nv);
  Vec beq(m_eq);
  for (std::size_t j = 0; j < steps; ++j) {
    const Mat& t = reach[n - 1][j];
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t c = 0; c < 2; ++c) aeq(i, 2 * j + c) = t(i, c);
  }
  for (std::size_t i = 0; i < 4; ++i) beq[i] = xf[i] - free_resp[n - 1][i];
  {
    std::size_t row = 4;
    for (const auto& wp : waypoints) {
      for (std::size_t j = 0; j < wp.k; ++j) {
        const Mat& t = reach[wp.k][j];
        for (std::size_t c = 0; c < 2; ++c) {
          aeq(row, 2 * j + c) = t(0, c);      // x position row
          aeq(row + 1, 2 * j + c) = t(2, c);  // y position row
        }
      }
      beq[row] = wp.x - free_resp[wp.k][0];
      beq[row + 1] = wp.y - free_resp[wp.k][2];
      row += 2;
    }
  }

  // Reachability certificate: the minimum-2-norm input meeting the
  // equalities lower-bounds every feasible input's 2-norm, and any
  // box-feasible input has 2-norm at most sqrt(nv) * v_bnds. The Gram is
  // regularized so redundant rows (short horizons) pass through; a large
  // consistency residual then means the target is outside the reachable
  // subspace altogether.
  {
    Mat gram = aeq * aeq.transpose();
    const double reg = 1e-12 * (1.0 + gram.max_abs());
    for (std::size_t i = 0; i < m_eq; ++i) gram(i, i) += reg;
    Vec lam = solve_linear(gram, beq);
    Vec v_min = aeq.transpose() * lam;
    Vec resid = aeq * v_min;
    for (std::size_t i = 0; i < m_eq; ++i) resid[i] -= beq[i];
    if (norm_inf(resid) > 1e-8 * (1.0 + norm_inf(beq)))
      throw Infeasible("plan: terminal state unreachable within N steps");
    if (norm2(v_min) >
        std::sqrt(static_cast<double>(nv)) * w.v_bnds * (1.0 + 1e-9))
      throw Infeasible(
          "plan: terminal state unreachable within N steps under v_bnds");
  }

  QpProblem qp;
  qp.aeq = aeq;
  qp.beq = beq;
  qp.lb.assign(nv, -w.v_bnds);
  qp.ub.assign(nv, w.v_bnds);
  qp.f.assign(nv, 0.0);
  qp.h = Mat(nv, nv);
  for (std::size_t j = 0; j < steps; ++j)
    for (std::size_t c = 0; c < 2; ++c)
      qp.h(2 * j + c, 2 * j + c) = 2.0 * w.r[c];

  const bool state_cost =
      w.q[0] != 0.0 || w.q[1] != 0.0 || w.q[2] != 0.0 || w.q[3] != 0.0 ||
      w.qf[0] != 0.0 || w.qf[1] != 0.0 || w.qf[2] != 0.0 || w.qf[3] != 0.0;
  if (state_cost) {
    // H += 2 sum_k T_k^T Qk T_k, f += 2 sum_k T_k^T Qk c_k over states 1..N-1
    // with Qk = Q (+ Qf at the terminal state).
    for (std::size_t k = 1; k < n; ++k) {
      std::array<double, 4> qk = w.q;
      if (k == n - 1)
        for (std::size_t i = 0; i < 4; ++i) qk[i] += w.qf[i];
      if (qk[0] == 0.0 && qk[1] == 0.0 && qk[2] == 0.0 && qk[3] == 0.0)
        continue;
      for (std::size_t j = 0; j < k; ++j) {
        const Mat& tj = reach[k][j];
        for (std::size_t c = 0; c < 2; ++c) {
          double facc = 0.0;
          for (std::size_t i = 0; i < 4; ++i)
            facc += tj(i, c) * qk[i] * free_resp[k][i];
          qp.f[2 * j + c] += 2.0 * facc;
        }
        for (std::size_t jj = j; jj < k; ++jj) {
          const Mat& tjj = reach[k][jj];
          for (std::size_t c = 0; c < 2; ++c)
            for (std::size_t cc = 0; cc < 2; ++cc) {
              double acc = 0.0;
              for (std::size_t i = 0; i < 4; ++i)
                acc += tj(i, c) * qk[i] * tjj(i, cc);
              qp.h(2 * j + c, 2 * jj + cc) += 2.0 * acc;
              if (2 * j + c != 2 * jj + cc)
                qp.h(2 * jj + cc, 2 * j + c) += 2.0 * acc;
            }
        }
      }
    }
  }

  QpSolution sol = solve_qp(qp, qp_tol, qp_max_iter);

  PlanResult out;
  out.states.resize(n);
  out.inputs.resize(steps);
  for (std::size_t j = 0; j < steps; ++j) {
    out.inputs[j].v1 = sol.z[2 * j];
    out.inputs[j].v2 = sol.z[2 * j + 1];
  }
  out.states[0] = x0;
  Vec cur = to_vec(x0);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    Vec next = abar * cur;
    for (std::size_t i = 0; i < 4; ++i)
      next[i] += bbar(i, 0) * out.inputs[k].v1 + bbar(i, 1) * out.inputs[k].v2;
    cur = next;
    out.states[k + 1] = to_state(cur);
  }
  // The rollout lands within the solver tolerance of xf; pin the endpoint.
  out.states[n - 1] = xf;

  double obj = 0.0;
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < 4; ++i)
      obj += w.q[i] * out.states[k][i] * out.states[k][i];
  for (std::size_t i = 0; i < 4; ++i)
    obj += w.qf[i] * out.states[n - 1][i] * out.states[n - 1][i];
  for (std::size_t j = 0; j < steps; ++j)
    obj += w.r[0] * out.inputs[j].v1 * out.inputs[j].v1 +
           w.r[1] * out.inputs[j].v2 * out.inputs[j].v2;
  out.objective = obj;
  return out;
}

Mat tracker_gain(const Mat& q, const Mat& r) {
  LinearModel m = linear_model(1.0);
  return lqr_gain(m.a, m.b, q, r);
}

VirtualInput track(const LinearState& xi, const LinearState& xi_ref,
                   const VirtualInput& v_ref, const Mat& f) {
  VirtualInput v = v_ref;
  for (std::size_t j = 0; j < 4; ++j) {
    const double e = xi[j] - xi_ref[j];
    v.v1 -= f(0, j) * e;
    v.v2 -= f(1, j) * e;
  }
  return v;
}

void write_plan_csv(const std::string& path, const PlanResult& plan,
                    double dt) {
  CsvWriter csv(path);
  csv.row({"k", "t", "x", "xdot", "y", "ydot", "v1", "v2"});
  for (std::size_t k = 0; k < plan.states.size(); ++k) {
    const LinearState& s = plan.states[k];
    const bool has_input = k < plan.inputs.size();
    csv.row({static_cast<double>(k), static_cast<double>(k) * dt, s[0], s[1],
             s[2], s[3], has_input ? plan.inputs[k].v1 : 0.0,
             has_input ? plan.inputs[k].v2 : 0.0});
  }
}

}  // namespace fbl
