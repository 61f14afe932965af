#include "fbl/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace fbl {

LuFactor::LuFactor(const Mat& a, double pivot_floor) : lu_(a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("LuFactor: not square");
  const std::size_t n = a.rows();
  perm_.resize(n);
  for (std::size_t i = 0; i < n; ++i) perm_[i] = i;

  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    double pmax = std::abs(lu_(k, k));
    for (std::size_t i = k + 1; i < n; ++i) {
      const double v = std::abs(lu_(i, k));
      if (v > pmax) {
        pmax = v;
        piv = i;
      }
    }
    if (!(pmax > pivot_floor))
      throw SingularMatrix("LU pivot " + std::to_string(pmax) +
                           " below threshold at column " + std::to_string(k));
    if (piv != k) {
      std::swap(perm_[piv], perm_[k]);
      for (std::size_t j = 0; j < n; ++j) std::swap(lu_(piv, j), lu_(k, j));
    }
    const double inv_p = 1.0 / lu_(k, k);
    for (std::size_t i = k + 1; i < n; ++i) {
      const double l = lu_(i, k) * inv_p;
      lu_(i, k) = l;
      if (l == 0.0) continue;
      for (std::size_t j = k + 1; j < n; ++j) lu_(i, j) -= l * lu_(k, j);
    }
  }
}

Vec LuFactor::solve(const Vec& b) const {
  const std::size_t n = lu_.rows();
  if (b.size() != n) throw std::invalid_argument("LuFactor: rhs size mismatch");
  Vec x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = b[perm_[i]];
  for (std::size_t i = 1; i < n; ++i) {
    double acc = x[i];
    for (std::size_t j = 0; j < i; ++j) acc -= lu_(i, j) * x[j];
    x[i] = acc;
  }
  for (std::size_t ii = n; ii-- > 0;) {
    double acc = x[ii];
    for (std::size_t j = ii + 1; j < n; ++j) acc -= lu_(ii, j) * x[j];
    x[ii] = acc / lu_(ii, ii);
  }
  return x;
}

Vec solve_linear(const Mat& a, const Vec& b) {
  LuFactor lu(a);
  Vec x = lu.solve(b);
  // Iterative refinement with extended-precision residuals; two passes keep
  // the backward error inside the 1e-9 contract even for the badly scaled
  // Lyapunov systems the Riccati iteration can produce.
  const std::size_t n = x.size();
  Vec r(n);
  for (int pass = 0; pass < 2; ++pass) {
    for (std::size_t i = 0; i < n; ++i) {
      long double acc = b[i];
      for (std::size_t j = 0; j < n; ++j)
        acc -= static_cast<long double>(a(i, j)) * x[j];
      r[i] = static_cast<double>(acc);
    }
    Vec dx = lu.solve(r);
    for (std::size_t i = 0; i < n; ++i) x[i] += dx[i];
  }
  return x;
}

Mat solve_lyapunov(const Mat& a, const Mat& q) {
  const std::size_t n = a.rows();
  if (a.cols() != n || q.rows() != n || q.cols() != n)
    throw std::invalid_argument("solve_lyapunov: shape mismatch");
  // Row-major flattening: unknown X(k,j) lives at index k*n+j.
  Mat k(n * n, n * n);
  Vec rhs(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t e = i * n + j;
      for (std::size_t m = 0; m < n; ++m) {
        k(e, m * n + j) += a(m, i);  // (A^T X)(i,j)
        k(e, i * n + m) += a(m, j);  // (X A)(i,j)
      }
      rhs[e] = -q(i, j);
    }
  Vec x = solve_linear(k, rhs);
  Mat out(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) = x[i * n + j];
  return out;
}

Mat expm(const Mat& a) {
  const std::size_t n = a.rows();
  if (a.cols() != n) throw std::invalid_argument("expm: not square");
  int s = 0;
  double nrm = a.norm_inf();
  while (nrm > 0.5) {
    nrm *= 0.5;
    ++s;
  }
  Mat m = a * std::ldexp(1.0, -s);
  Mat result = Mat::identity(n);
  Mat term = Mat::identity(n);
  for (int k = 1; k <= 20; ++k) {
    term = term * m * (1.0 / k);
    result = result + term;
  }
  for (int i = 0; i < s; ++i) result = result * result;
  return result;
}

namespace {

// Cholesky of a symmetric matrix; returns false when not positive definite.
bool cholesky(const Mat& a, Mat& l) {
  const std::size_t n = a.rows();
  l = Mat(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      if (i == j) {
        if (s <= 0.0) return false;
        l(i, i) = std::sqrt(s);
      } else {
        l(i, j) = s / l(j, j);
      }
    }
  }
  return true;
}

// Lyapunov-based Hurwitz test: A is Hurwitz iff A^T X + X A + I = 0 has a
// positive definite solution.
bool is_hurwitz(const Mat& a) {
  try {
    Mat x = solve_lyapunov(a, Mat::identity(a.rows()));
    Mat xs = (x + x.transpose()) * 0.5;
    Mat l;
    return cholesky(xs, l);
  } catch (const SingularMatrix&) {
    return false;
  }
}

void require_symmetric(const Mat& m, const char* name) {
  const double tol = 1e-10 * (1.0 + m.max_abs());
  if ((m - m.transpose()).max_abs() > tol)
    throw std::invalid_argument(std::string(name) + " must be symmetric");
}

// Solves R X = M columnwise for PD R.
Mat solve_spd(const Mat& r, const Mat& m, double pivot_floor = 1e-12) {
  LuFactor lu(r, pivot_floor);
  Mat x(r.rows(), m.cols());
  Vec col(r.rows());
  for (std::size_t j = 0; j < m.cols(); ++j) {
    for (std::size_t i = 0; i < r.rows(); ++i) col[i] = m(i, j);
    Vec sol = lu.solve(col);
    for (std::size_t i = 0; i < r.rows(); ++i) x(i, j) = sol[i];
  }
  return x;
}

Mat care_residual(const Mat& a, const Mat& q, const Mat& p, const Mat& pb,
                  const Mat& gain) {
  return a.transpose() * p + p * a - pb * gain + q;
}

bool is_pd_with_jitter(const Mat& m, double scale) {
  Mat shifted = m;
  const double jitter = 1e-12 * (1.0 + scale);
  for (std::size_t i = 0; i < m.rows(); ++i) shifted(i, i) += jitter;
  Mat l;
  return cholesky(shifted, l);
}

// The converged Newton iterate satisfies Acl^T P + P Acl = -(Q + F^T R F);
// when both P and that cost matrix are positive definite this is itself a
// Lyapunov certificate that Acl is Hurwitz, and it stays valid in the
// huge-gain regimes where an explicit Lyapunov solve on Acl is numerically
// hopeless. Only the semidefinite corner cases need the explicit test.
bool closed_loop_is_stable(const Mat& a, const Mat& b, const Mat& q,
                           const Mat& r, const Mat& p, const Mat& f) {
  Mat cost = q + f.transpose() * r * f;
  Mat l;
  if (cholesky(cost, l) && is_pd_with_jitter(p, p.max_abs())) return true;
  return is_hurwitz(a - b * f);
}

}  // namespace

Mat solve_care(const Mat& a, const Mat& b, const Mat& q, const Mat& r,
               const CareOptions& opts) {
  const std::size_t n = a.rows();
  if (a.cols() != n || b.rows() != n || q.rows() != n || q.cols() != n ||
      r.rows() != b.cols() || r.cols() != b.cols())
    throw std::invalid_argument("solve_care: shape mismatch");
  require_symmetric(q, "Q");
  require_symmetric(r, "R");
  {
    Mat l;
    if (!cholesky(r, l))
      throw std::invalid_argument("solve_care: R must be positive definite");
  }

  // Initial stabilizing gain.
  Mat f(b.cols(), n);
  if (!is_hurwitz(a)) {
    // The shift must push the whole spectrum into the right half plane
    // (sigma above the magnitude of the most stable eigenvalue); 1 + the
    // row-sum bound always works but overshoots badly, which makes Z nearly
    // singular and the initial gain enormous. Walk the shift down while the
    // shifted matrix stays comfortably anti-Hurwitz.
    double sigma = 1.0 + a.norm_inf();
    for (int k = 0; k < 8; ++k) {
      const double cand = 0.5 * sigma;
      if (cand < 0.5) break;
      Mat probe = a;
      for (std::size_t i = 0; i < n; ++i) probe(i, i) += 0.75 * cand;
      if (!is_hurwitz(probe * -1.0)) break;
      sigma = cand;
    }
    Mat m = a;
    for (std::size_t i = 0; i < n; ++i) m(i, i) += sigma;
    Mat bbt = b * b.transpose() * 2.0;
    // M Z + Z M^T = 2 B B^T; with u = -B^T Z^-1 x the loop A - B B^T Z^-1
    // satisfies Z^-1-weighted Lyapunov decay, so F0 = B^T Z^-1 stabilizes A.
    Mat z;
    try {
      z = solve_lyapunov(m.transpose(), bbt * -1.0);
    } catch (const SingularMatrix&) {
      throw NoStabilizingSolution("shifted Lyapunov system is singular");
    }
    z = (z + z.transpose()) * 0.5;
    try {
      // Z is PD but often severely ill conditioned for weakly controllable
      // pairs; any nonzero pivot still yields a stabilizing gain.
      f = solve_spd(z, b, 1e-300).transpose();
    } catch (const SingularMatrix&) {
      // Uncontrollable (but possibly stabilizable) pair: nudge Z.
      Mat zr = z;
      const double eps = 1e-10 * (1.0 + z.max_abs());
      for (std::size_t i = 0; i < n; ++i) zr(i, i) += eps;
      f = solve_spd(zr, b).transpose();
    }
    // Z can be very ill conditioned for weakly controllable pairs, which
    // makes a numerical Hurwitz test of A - B F0 unreliable even though the
    // construction guarantees stability. Let the Newton iteration proceed;
    // a genuinely bad start fails the convergence and final checks below.
  }

  const double target = opts.residual_scale * (1.0 + q.norm_fro());
  Mat p;
  double best_res = std::numeric_limits<double>::infinity();
  int stalled = 0;
  for (int it = 0; it < opts.max_iterations; ++it) {
    Mat acl = a - b * f;
    Mat cost = q + f.transpose() * r * f;
    try {
      p = solve_lyapunov(acl, cost);
    } catch (const SingularMatrix&) {
      throw NoStabilizingSolution("Newton-Kleinman Lyapunov step singular");
    }
    p = (p + p.transpose()) * 0.5;
    Mat pb = p * b;
    Mat gain = solve_spd(r, pb.transpose());  // R^-1 B^T P
    const double res = care_residual(a, q, p, pb, gain).norm_fro();
    f = gain;

    // Rounding floor of the residual evaluation itself: when ||P|| is huge
    // (nearly uncontrollable pairs with unstable modes) the absolute target
    // is unreachable in double precision even though the relative residual
    // is at machine level.
    const double floor = 1e-11 * ((a.transpose() * p).norm_fro() * 2.0 +
                                  (pb * gain).norm_fro() + q.norm_fro());
    if (res < 0.5 * best_res) {
      best_res = res;
      stalled = 0;
    } else {
      ++stalled;
    }
    if (res <= target || (stalled >= 8 && res <= floor)) {
      if (!closed_loop_is_stable(a, b, q, r, p, f))
        throw NoStabilizingSolution("converged P is not stabilizing");
      return p;
    }
  }
  throw NoStabilizingSolution("Newton-Kleinman did not converge within cap");
}

Mat lqr_gain(const Mat& a, const Mat& b, const Mat& q, const Mat& r,
             const CareOptions& opts) {
  Mat p = solve_care(a, b, q, r, opts);
  return solve_spd(r, (p * b).transpose());
}

double power_iteration_lmax(const Mat& h, int iters) {
  const std::size_t n = h.rows();
  Vec v(n, 1.0 / std::sqrt(static_cast<double>(n)));
  double lambda = 0.0;
  for (int it = 0; it < iters; ++it) {
    Vec w = h * v;
    const double nw = norm2(w);
    if (nw == 0.0) return 0.0;
    for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / nw;
    lambda = nw;
  }
  // Rayleigh quotient of the converged direction.
  Vec hv = h * v;
  lambda = dot(v, hv);
  return lambda;
}

namespace {

Vec clamp_box(const Vec& w, const Vec& lb, const Vec& ub) {
  Vec z(w.size());
  for (std::size_t i = 0; i < w.size(); ++i)
    z[i] = std::min(ub[i], std::max(lb[i], w[i]));
  return z;
}

struct BoxAffineProjector {
  const Mat& aeq;
  const Vec& beq;
  const Vec& lb;
  const Vec& ub;
  double scale;  // residual scale for convergence checks

  // Projects w onto {z : Aeq z = beq, lb <= z <= ub}. The dual over the m
  // equality multipliers is concave piecewise quadratic; semismooth Newton
  // with damping converges in a handful of steps for the small m used here.
  Vec operator()(const Vec& w, double* eq_res_out = nullptr) const {
    const std::size_t m = aeq.rows();
    if (m == 0) {
      if (eq_res_out) *eq_res_out = 0.0;
      return clamp_box(w, lb, ub);
    }
    const std::size_t n = w.size();
    Vec lambda(m, 0.0);
    Mat aeq_t = aeq.transpose();

    auto primal = [&](const Vec& lam) {
      Vec shift = aeq_t * lam;
      Vec z(n);
      for (std::size_t i = 0; i < n; ++i)
        z[i] = std::min(ub[i], std::max(lb[i], w[i] - shift[i]));
      return z;
    };
    auto residual = [&](const Vec& z) {
      Vec r = aeq * z;
      for (std::size_t i = 0; i < m; ++i) r[i] -= beq[i];
      return r;
    };

    Vec z = primal(lambda);
    Vec r = residual(z);
    double rn = norm_inf(r);
    const double tol = 1e-12 * scale;
    for (int it = 0; it < 100 && rn > tol; ++it) {
      // Active-free mask at the current multiplier.
      Vec shift = aeq_t * lambda;
      Mat j(m, m);
      for (std::size_t i = 0; i < n; ++i) {
        const double zi = w[i] - shift[i];
        if (zi <= lb[i] || zi >= ub[i]) continue;
        for (std::size_t p = 0; p < m; ++p) {
          const double api = aeq(p, i);
          if (api == 0.0) continue;
          for (std::size_t q = 0; q < m; ++q) j(p, q) += api * aeq(q, i);
        }
      }
      const double mu = 1e-10 * (1.0 + j.max_abs());
      for (std::size_t p = 0; p < m; ++p) j(p, p) += mu;
      Vec dlam = LuFactor(j, 1e-300).solve(r);
      double tstep = 1.0;
      bool improved = false;
      for (int ls = 0; ls < 60; ++ls) {
        Vec lam_try(m);
        for (std::size_t p = 0; p < m; ++p)
          lam_try[p] = lambda[p] + tstep * dlam[p];
        Vec z_try = primal(lam_try);
        Vec r_try = residual(z_try);
        const double rn_try = norm_inf(r_try);
        if (rn_try < rn) {
          lambda = lam_try;
          z = z_try;
          r = r_try;
          rn = rn_try;
          improved = true;
          break;
        }
        tstep *= 0.5;
      }
      if (!improved) break;  // stalled; the residual check below decides
      if (norm_inf(lambda) > 1e12 * (1.0 + scale))
        throw Infeasible("box constraints exclude the equality set");
    }
    if (rn > 1e-9 * scale)
      throw Infeasible("projection onto box/equality intersection failed");
    if (eq_res_out) *eq_res_out = rn;
    return z;
  }
};

}  // namespace

QpSolution solve_qp(const QpProblem& p, double tol, int max_iter) {
  const std::size_t n = p.h.rows();
  const std::size_t m = p.aeq.rows();
  if (p.h.cols() != n || p.f.size() != n || p.lb.size() != n ||
      p.ub.size() != n || (m > 0 && p.aeq.cols() != n) || p.beq.size() != m)
    throw std::invalid_argument("solve_qp: shape mismatch");
  for (std::size_t i = 0; i < n; ++i)
    if (p.lb[i] > p.ub[i]) throw std::invalid_argument("solve_qp: lb > ub");

  double scale = 1.0 + norm_inf(p.beq) + norm_inf(p.f);

  // Consistency of the equalities via row echelon rank comparison.
  if (m > 0) {
    Mat aug(m, n + 1);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) aug(i, j) = p.aeq(i, j);
      aug(i, n) = p.beq[i];
    }
    const double rank_tol = 1e-10 * (1.0 + aug.max_abs());
    std::size_t row = 0;
    for (std::size_t col = 0; col < n && row < m; ++col) {
      std::size_t piv = row;
      double pmax = std::abs(aug(row, col));
      for (std::size_t i = row + 1; i < m; ++i)
        if (std::abs(aug(i, col)) > pmax) {
          pmax = std::abs(aug(i, col));
          piv = i;
        }
      if (pmax <= rank_tol) continue;
      if (piv != row)
        for (std::size_t j = 0; j <= n; ++j) std::swap(aug(piv, j), aug(row, j));
      for (std::size_t i = row + 1; i < m; ++i) {
        const double l = aug(i, col) / aug(row, col);
        if (l == 0.0) continue;
        for (std::size_t j = col; j <= n; ++j) aug(i, j) -= l * aug(row, j);
      }
      ++row;
    }
    for (std::size_t i = row; i < m; ++i)
      if (std::abs(aug(i, n)) > rank_tol)
        throw Infeasible("equality constraints are inconsistent");
  }

  BoxAffineProjector project{p.aeq, p.beq, p.lb, p.ub, scale};

  // KKT solve of the equality-constrained relaxation.
  Vec z;
  bool have_kkt = false;
  try {
    Mat kkt(n + m, n + m);
    Vec rhs(n + m);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) kkt(i, j) = p.h(i, j);
      rhs[i] = -p.f[i];
    }
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        kkt(n + i, j) = p.aeq(i, j);
        kkt(j, n + i) = p.aeq(i, j);
      }
      rhs[n + i] = p.beq[i];
    }
    Vec sol = solve_linear(kkt, rhs);
    z.assign(sol.begin(), sol.begin() + static_cast<std::ptrdiff_t>(n));
    have_kkt = true;
  } catch (const SingularMatrix&) {
    // Singular KKT (e.g. PSD H with free null directions); fall through to
    // projected gradient from a feasible point.
    z.assign(n, 0.0);
  }

  auto grad = [&](const Vec& zz) {
    Vec g = p.h * zz;
    for (std::size_t i = 0; i < n; ++i) g[i] += p.f[i];
    return g;
  };
  auto stationarity = [&](const Vec& zz, const Vec& g) {
    Vec step(n);
    for (std::size_t i = 0; i < n; ++i) step[i] = zz[i] - g[i];
    Vec proj = project(step);
    double r = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      r = std::max(r, std::abs(zz[i] - proj[i]));
    return r;
  };

  if (have_kkt) {
    bool in_box = true;
    for (std::size_t i = 0; i < n; ++i)
      if (z[i] < p.lb[i] || z[i] > p.ub[i]) {
        in_box = false;
        break;
      }
    if (in_box) {
      QpSolution sol;
      sol.z = z;
      Vec r = p.aeq * z;
      for (std::size_t i = 0; i < m; ++i) r[i] -= p.beq[i];
      sol.eq_residual = norm_inf(r);
      sol.kkt_residual = stationarity(z, grad(z));
      sol.iterations = 0;
      return sol;
    }
  }

  const double lmax = std::max(power_iteration_lmax(p.h), 1e-12);
  const double step = 1.0 / lmax;

  double eq_res = 0.0;
  z = project(z, &eq_res);
  for (int it = 1; it <= max_iter; ++it) {
    Vec g = grad(z);
    const double res = stationarity(z, g);
    if (res <= tol) {
      QpSolution sol;
      sol.z = z;
      sol.eq_residual = eq_res;
      sol.kkt_residual = res;
      sol.iterations = it - 1;
      return sol;
    }
    Vec w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = z[i] - step * g[i];
    z = project(w, &eq_res);
  }
  throw MaxIterations("solve_qp: stationarity tolerance not reached");
}

}  // namespace fbl
