#pragma once

#include <cstddef>
#include <stdexcept>

#include "fbl/mat.hpp"

namespace fbl {

struct SingularMatrix : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NoStabilizingSolution : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct Infeasible : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MaxIterations : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// LU factorisation with partial pivoting. Throws SingularMatrix when a
/// pivot magnitude falls below the threshold (default 1e-12).
class LuFactor {
 public:
  explicit LuFactor(const Mat& a, double pivot_floor = 1e-12);
  Vec solve(const Vec& b) const;
  std::size_t size() const { return lu_.rows(); }

 private:
  Mat lu_;
  std::vector<std::size_t> perm_;
};

/// Solves Ax = b by LU with partial pivoting plus one step of iterative
/// refinement. Backward error ||Ax - b||_inf <= 1e-9 (1 + ||b||_inf) on
/// well-conditioned systems.
Vec solve_linear(const Mat& a, const Vec& b);

/// Solves the Sylvester-structured Lyapunov equation A^T X + X A + Q = 0 by
/// LU on the n^2 x n^2 Kronecker system. Intended for n <= ~10.
Mat solve_lyapunov(const Mat& a, const Mat& q);

/// Matrix exponential by scaling and squaring with a truncated Taylor series.
/// Accurate to near machine precision for the small systems used here.
Mat expm(const Mat& a);

struct CareOptions {
  double residual_scale = 1e-8;  // converged when residual <= scale*(1+||Q||_F)
  // The Lyapunov-shift initial gain can start very large for weakly
  // controllable pairs; Newton-Kleinman then needs a few dozen steps just
  // to shed magnitude before its quadratic tail kicks in.
  int max_iterations = 200;
};

/// Solves A^T P + P A - P B R^-1 B^T P + Q = 0 for the stabilizing P >= 0.
///
/// Newton-Kleinman iteration: given a gain F_k with A - B F_k Hurwitz, solve
/// the Lyapunov equation (A - B F_k)^T P + P (A - B F_k) + Q + F_k^T R F_k = 0
/// and set F_{k+1} = R^-1 B^T P. The initial stabilizing gain comes from the
/// Lyapunov-shift (Bass) construction: with sigma = 1 + max row-sum of |A|,
/// solve (A + sigma I) Z + Z (A + sigma I)^T = 2 B B^T and take F0 = B^T Z^-1.
/// When A is already Hurwitz (verified by a Lyapunov solvability test) F0 = 0.
/// Throws NoStabilizingSolution when the iteration fails to converge.
Mat solve_care(const Mat& a, const Mat& b, const Mat& q, const Mat& r,
               const CareOptions& opts = {});

/// LQR state-feedback gain F = R^-1 B^T P with P from solve_care; the closed
/// loop A - B F is Hurwitz.
Mat lqr_gain(const Mat& a, const Mat& b, const Mat& q, const Mat& r,
             const CareOptions& opts = {});

/// Largest eigenvalue of a symmetric PSD matrix by power iteration.
double power_iteration_lmax(const Mat& h, int iters = 200);

/// minimize 0.5 z^T H z + f^T z  s.t.  Aeq z = beq,  lb <= z <= ub.
/// H symmetric PSD, lb <= ub elementwise, rows(Aeq) <= n. Aeq may have zero
/// rows (no equality constraints).
struct QpProblem {
  Mat h;
  Vec f;
  Mat aeq;  // m x n, m == 0 allowed
  Vec beq;
  Vec lb;
  Vec ub;
};

struct QpSolution {
  Vec z;
  double eq_residual = 0.0;
  double kkt_residual = 0.0;
  int iterations = 0;
};

/// Equality-constrained QP with box bounds.
///
/// First solves the KKT system of the equality-constrained problem; if that
/// point already satisfies the bounds it is returned directly. Otherwise
/// projected gradient descent with fixed step 1/lambda_max(H) refines it,
/// where each projection onto (box intersect affine set) is computed through
/// its small dual (semismooth Newton on the m equality multipliers).
/// Throws Infeasible when the equalities are inconsistent (rank check) or the
/// box excludes the affine set; MaxIterations when stationarity is not
/// reached within max_iter steps.
QpSolution solve_qp(const QpProblem& p, double tol = 1e-8, int max_iter = 500);

}  // namespace fbl
