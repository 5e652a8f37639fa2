#pragma once

// Consistency-aware adaptive optimal transport.
//
//   min_{Q,b}  <Q, -log P> + eps1 <Q, log Q - 1> + eps2 sum_j Psi(b_j) - eps3 <S, Q Q^T>
//   s.t.       Q 1 = a,  Q^T 1 = b,  Q >= 0,  b^T 1 = 1,
//
// with Psi(b) = -log b - log(1 - b). The quadratic semantic term makes the
// problem nonconvex; it is handled by a generalized conditional gradient outer
// loop that linearizes the quadratic term and solves the resulting entropic
// problem with alternating dual updates and an adaptive cluster marginal.

#include "pota/core.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace pota {

struct CaotParams {
  double eps1 = 1.0;    // entropy weight
  double eps2 = 100.0;  // marginal penalty weight
  double eps3 = 25.0;   // semantic weight
  int t1 = 10;          // outer (conditional gradient) iterations
  int t2 = 10;          // dual rounds per inner solve
  int newton_iters = 10;
  double armijo_c1 = 1e-4;
  double armijo_shrink = 0.5;
  int armijo_max_backtracks = 20;
  double marginal_tol = 1e-9;
  double prob_floor = kProbFloor;
  // b_0 is uniform unless random_b0 is set, in which case it is drawn from
  // U(0,1) with `seed` and normalized.
  bool random_b0 = false;
  std::uint64_t seed = 0;

  void validate() const;
};

struct OtProblem {
  Mat p;   // N x K predicted probabilities
  Mat s;   // N x N semantic similarity
  RVec a;  // N sample marginal

  /// Problem with a = 1/N.
  static OtProblem uniform(Mat p, Mat s);
  void validate() const;
  Eigen::Index n() const { return p.rows(); }
  Eigen::Index k() const { return p.cols(); }
};

struct TransportPlan {
  Mat q;
  RVec b;
  RVec f;
  RVec g;
  std::vector<double> objective_trace;  // one entry per outer iteration
  std::vector<double> step_sizes;       // accepted alpha, 0 when rejected
};

struct InnerSolution {
  Mat q;
  RVec b;
  RVec f;
  RVec g;
};

/// Gradient of <Q, -log P> - eps3 <S, Q Q^T> with respect to Q.
Mat grad_f(const Mat& q, const Mat& p, const Mat& s, double eps3, double prob_floor = kProbFloor);

/// The linearizable part f(Q) = <Q, -log P> - eps3 <S, Q Q^T>.
double smooth_part(const Mat& q, const Mat& p, const Mat& s, double eps3,
                   double prob_floor = kProbFloor);

/// Full CAOT objective. Throws DomainError when some b_j is outside (0,1) or
/// some Q entry is not positive.
double objective(const Mat& q, const RVec& b, const OtProblem& prob, const CaotParams& params);

/// One f-then-g dual sweep with b fixed (log-domain Sinkhorn step).
std::pair<RVec, RVec> dual_update(const Mat& m_prime, const RVec& f, const RVec& g, const RVec& b,
                                  const RVec& a, double eps1);

/// Coupling exp((f_i + g_j - M'_ij) / eps1).
Mat plan_from_duals(const Mat& m_prime, const RVec& f, const RVec& g, double eps1);

/// Root in (0,1) of (g_j - h) b^2 - (g_j - h + 2 eps2) b + eps2 = 0 for each j.
RVec b_of_h(const RVec& g, double h, double eps2);

/// Solves sum_j b_j(h) = 1 for h. Safeguarded Newton; bisection fallback.
double newton_h(const RVec& g, double eps2, double h0, int iters);

/// Alternating dual/marginal scheme for the linearized problem with cost M'.
InnerSolution inner_solve(const Mat& m_prime, const OtProblem& prob, const CaotParams& params,
                          const RVec& b_init);

/// Generalized conditional gradient with Armijo backtracking.
TransportPlan caot_solve(const OtProblem& prob, const CaotParams& params);

/// Fixed-marginal entropic OT via multiplicative scaling of the Gibbs kernel.
Mat sinkhorn_fixed(const Mat& m, const RVec& a, const RVec& b, double eps1, int iters);

}  // namespace pota
