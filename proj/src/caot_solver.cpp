#include "pota/caot_solver.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace pota {

namespace {

struct Marginal {
  double b;
  double one_minus_b;
};

// Rationalized root of the marginal quadratic. Both branches avoid the
// cancellation in (x + 2 eps2 - sqrt(x^2 + 4 eps2^2)) and are exact at x = 0.
Marginal marginal_root(double x, double eps2) {
  if (std::abs(x) < 1e-12) return {0.5, 0.5};
  const double s = std::hypot(x, 2.0 * eps2);
  if (x > 0.0) {
    const double den = x + 2.0 * eps2 + s;
    return {2.0 * eps2 / den, (x + s) / den};
  }
  const double w = s - x;  // > 0
  const double den = w + 2.0 * eps2;
  return {w / den, 2.0 * eps2 / den};
}

// d b / d x for the root above.
double marginal_slope(double x, const Marginal& m, double eps2) {
  return m.b * m.one_minus_b / (x * (m.b - m.one_minus_b) - 2.0 * eps2);
}

double marginal_penalty(const RVec& b) {
  double acc = 0.0;
  for (Eigen::Index j = 0; j < b.size(); ++j) {
    if (!(b(j) > 0.0 && b(j) < 1.0)) {
      throw DomainError("cluster marginal b_" + std::to_string(j) + " = " + std::to_string(b(j)) +
                        " outside (0,1)");
    }
    acc += -std::log(b(j)) - std::log1p(-b(j));
  }
  return acc;
}

double entropy_term(const Mat& q) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    const double v = q.data()[i];
    if (!(v > 0.0)) throw DomainError("coupling entry not positive");
    acc += v * (std::log(v) - 1.0);
  }
  return acc;
}

// Objective with the marginal penalty optional. With a single cluster b = [1]
// is forced and the penalty is a constant, so it is left out.
double objective_impl(const Mat& q, const RVec& b, const OtProblem& prob, const CaotParams& params,
                      bool with_penalty) {
  double val = smooth_part(q, prob.p, prob.s, params.eps3, params.prob_floor) +
               params.eps1 * entropy_term(q);
  if (with_penalty) val += params.eps2 * marginal_penalty(b);
  return val;
}

double residual(const RVec& g, double h, double eps2, double* slope) {
  double sum = 0.0;
  double ds = 0.0;
  for (Eigen::Index j = 0; j < g.size(); ++j) {
    const double x = g(j) - h;
    const Marginal m = marginal_root(x, eps2);
    sum += m.b;
    ds -= marginal_slope(x, m, eps2);  // dx/dh = -1
  }
  if (slope) *slope = ds;
  return sum - 1.0;
}

}  // namespace

void CaotParams::validate() const {
  auto fail = [](const std::string& msg) { throw ArgumentError("CaotParams: " + msg); };
  if (!(eps1 > 0.0)) fail("eps1 must be > 0");
  if (!(eps2 > 0.0)) fail("eps2 must be > 0");
  if (!(eps3 >= 0.0)) fail("eps3 must be >= 0");
  if (t1 < 1) fail("t1 must be >= 1");
  if (t2 < 1) fail("t2 must be >= 1");
  if (newton_iters < 1) fail("newton_iters must be >= 1");
  if (!(armijo_c1 > 0.0 && armijo_c1 < 1.0)) fail("armijo_c1 must be in (0,1)");
  if (!(armijo_shrink > 0.0 && armijo_shrink < 1.0)) fail("armijo_shrink must be in (0,1)");
  if (armijo_max_backtracks < 0) fail("armijo_max_backtracks must be >= 0");
  if (!(marginal_tol > 0.0)) fail("marginal_tol must be > 0");
  if (!(prob_floor > 0.0)) fail("prob_floor must be > 0");
}

OtProblem OtProblem::uniform(Mat p, Mat s) {
  OtProblem prob;
  const auto n = p.rows();
  prob.a = RVec::Constant(n, n > 0 ? 1.0 / static_cast<double>(n) : 0.0);
  prob.p = std::move(p);
  prob.s = std::move(s);
  return prob;
}

void OtProblem::validate() const {
  const auto n = p.rows();
  if (n < 1 || p.cols() < 1) throw ArgumentError("OtProblem: empty probability matrix");
  require_finite(p, "OtProblem.p");
  require_shape(s, n, n, "OtProblem.s");
  require_finite(s, "OtProblem.s");
  if (a.size() != n) throw ArgumentError("OtProblem.a: length does not match rows of p");
  if ((p.array() < 0.0).any()) throw ArgumentError("OtProblem.p: negative probability");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(p.row(i).sum() - 1.0) > 1e-6) {
      throw ArgumentError("OtProblem.p: row " + std::to_string(i) + " does not sum to 1");
    }
  }
  if (!all_finite(a) || (a.array() <= 0.0).any()) {
    throw ArgumentError("OtProblem.a: entries must be positive");
  }
  if (std::abs(a.sum() - 1.0) > 1e-9) throw ArgumentError("OtProblem.a: must sum to 1");
}

Mat grad_f(const Mat& q, const Mat& p, const Mat& s, double eps3, double prob_floor) {
  require_shape(p, q.rows(), q.cols(), "grad_f: p");
  require_shape(s, q.rows(), q.rows(), "grad_f: s");
  Mat out = -clamp_log(p, prob_floor);
  if (eps3 != 0.0) out.noalias() -= eps3 * ((s + s.transpose()) * q);
  return out;
}

double smooth_part(const Mat& q, const Mat& p, const Mat& s, double eps3, double prob_floor) {
  require_shape(p, q.rows(), q.cols(), "smooth_part: p");
  require_shape(s, q.rows(), q.rows(), "smooth_part: s");
  double val = -(q.array() * clamp_log(p, prob_floor).array()).sum();
  if (eps3 != 0.0) {
    const Mat sq = s * q;
    val -= eps3 * (sq.array() * q.array()).sum();
  }
  return val;
}

double objective(const Mat& q, const RVec& b, const OtProblem& prob, const CaotParams& params) {
  require_shape(q, prob.n(), prob.k(), "objective: q");
  if (b.size() != prob.k()) throw ArgumentError("objective: b length does not match K");
  return objective_impl(q, b, prob, params, true);
}

std::pair<RVec, RVec> dual_update(const Mat& m_prime, const RVec& f, const RVec& g, const RVec& b,
                                  const RVec& a, double eps1) {
  const auto n = m_prime.rows();
  const auto k = m_prime.cols();
  if (f.size() != n || a.size() != n || g.size() != k || b.size() != k) {
    throw ArgumentError("dual_update: dimension mismatch with cost " + shape_string(m_prime));
  }
  RVec f_new(n);
  RVec g_new(k);
  RVec buf(std::max(n, k));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) buf(j) = (g(j) - m_prime(i, j)) / eps1;
    f_new(i) = eps1 * std::log(a(i)) - eps1 * logsumexp(buf.head(k));
  }
  for (Eigen::Index j = 0; j < k; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) buf(i) = (f_new(i) - m_prime(i, j)) / eps1;
    g_new(j) = eps1 * std::log(b(j)) - eps1 * logsumexp(buf.head(n));
  }
  return {std::move(f_new), std::move(g_new)};
}

Mat plan_from_duals(const Mat& m_prime, const RVec& f, const RVec& g, double eps1) {
  Mat q(m_prime.rows(), m_prime.cols());
  for (Eigen::Index i = 0; i < q.rows(); ++i)
    for (Eigen::Index j = 0; j < q.cols(); ++j)
      q(i, j) = std::exp((f(i) + g(j) - m_prime(i, j)) / eps1);
  return q;
}

RVec b_of_h(const RVec& g, double h, double eps2) {
  if (!(eps2 > 0.0)) throw ArgumentError("b_of_h: eps2 must be > 0");
  RVec b(g.size());
  for (Eigen::Index j = 0; j < g.size(); ++j) b(j) = marginal_root(g(j) - h, eps2).b;
  return b;
}

double newton_h(const RVec& g, double eps2, double h0, int iters) {
  if (!(eps2 > 0.0)) throw ArgumentError("newton_h: eps2 must be > 0");
  if (iters < 1) throw ArgumentError("newton_h: iters must be >= 1");
  if (g.size() < 2) throw ArgumentError("newton_h: need at least two clusters");
  if (!all_finite(g)) throw NumericError("newton_h: non-finite dual g");

  // The residual is strictly increasing in h, tends to -1 as h -> -inf and
  // to K - 1 as h -> +inf. At h = max(g) every b_j >= 1/2, and at
  // h = min(g) - 2 K eps2 every b_j <= 1/(2K).
  const double k = static_cast<double>(g.size());
  double lo = g.minCoeff() - 2.0 * k * eps2;
  double hi = g.maxCoeff();
  double r_lo = residual(g, lo, eps2, nullptr);
  double r_hi = residual(g, hi, eps2, nullptr);
  double width = 1.0 + 2.0 * k * eps2;
  for (int e = 0; e < 64 && r_lo > 0.0; ++e, width *= 2.0) {
    lo -= width;
    r_lo = residual(g, lo, eps2, nullptr);
  }
  for (int e = 0; e < 64 && r_hi < 0.0; ++e, width *= 2.0) {
    hi += width;
    r_hi = residual(g, hi, eps2, nullptr);
  }
  if (r_lo > 0.0 || r_hi < 0.0) {
    std::ostringstream os;
    os << "newton_h: no bracketing interval (residuals " << r_lo << ", " << r_hi << ")";
    throw NumericError(os.str());
  }
  if (r_lo == 0.0) return lo;
  if (r_hi == 0.0) return hi;

  constexpr double kTight = 1e-14;
  constexpr int kExtraSteps = 200;
  double h = (h0 > lo && h0 < hi) ? h0 : 0.5 * (lo + hi);
  double slope = 0.0;
  double r = residual(g, h, eps2, &slope);
  for (int it = 0; it < iters + kExtraSteps; ++it) {
    if (std::abs(r) <= kTight) break;
    // Past the nominal Newton budget, keep going only until the tolerance
    // the callers rely on is met.
    if (it >= iters && std::abs(r) < 1e-12) break;
    (r < 0.0 ? lo : hi) = h;
    double next = h - r / slope;
    bool bisect = !(std::isfinite(next) && next > lo && next < hi);
    double next_slope = 0.0;
    double next_r = 0.0;
    if (!bisect) {
      next_r = residual(g, next, eps2, &next_slope);
      bisect = std::abs(next_r) >= std::abs(r);
    }
    if (bisect) {
      next = 0.5 * (lo + hi);
      next_r = residual(g, next, eps2, &next_slope);
    }
    if (next == h || hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(h))) {
      h = next;
      r = next_r;
      break;
    }
    h = next;
    r = next_r;
    slope = next_slope;
  }
  if (!(std::abs(r) < 1e-8)) {
    std::ostringstream os;
    os << "newton_h: failed to reach sum(b) = 1, residual " << r;
    throw NumericError(os.str());
  }
  return h;
}

InnerSolution inner_solve(const Mat& m_prime, const OtProblem& prob, const CaotParams& params,
                          const RVec& b_init) {
  const auto n = prob.n();
  const auto k = prob.k();
  require_shape(m_prime, n, k, "inner_solve: cost");
  if (b_init.size() != k) throw ArgumentError("inner_solve: b_init length does not match K");
  if ((b_init.array() <= 0.0).any() || std::abs(b_init.sum() - 1.0) > 1e-8 ||
      (k > 1 && (b_init.array() >= 1.0).any())) {
    throw ArgumentError("inner_solve: b_init must lie in the open simplex");
  }

  InnerSolution sol;
  sol.b = b_init;
  sol.f = RVec::Zero(n);
  sol.g = RVec::Zero(k);
  double h = 1.0;
  for (int round = 0; round < params.t2; ++round) {
    std::tie(sol.f, sol.g) = dual_update(m_prime, sol.f, sol.g, sol.b, prob.a, params.eps1);
    if (k == 1) {
      sol.b = RVec::Ones(1);
    } else {
      h = newton_h(sol.g, params.eps2, h, params.newton_iters);
      sol.b = b_of_h(sol.g, h, params.eps2);
    }
  }
  // Final f sweep so that the row marginals hold at output.
  for (Eigen::Index i = 0; i < n; ++i) {
    RVec z(k);
    for (Eigen::Index j = 0; j < k; ++j) z(j) = (sol.g(j) - m_prime(i, j)) / params.eps1;
    sol.f(i) = params.eps1 * std::log(prob.a(i)) - params.eps1 * logsumexp(z);
  }
  sol.q = plan_from_duals(m_prime, sol.f, sol.g, params.eps1);
  if (!all_finite(sol.q)) throw NumericError("inner_solve: non-finite coupling");
  return sol;
}

TransportPlan caot_solve(const OtProblem& prob, const CaotParams& params) {
  params.validate();
  prob.validate();
  const auto k = prob.k();
  const bool with_penalty = k > 1;

  RVec b(k);
  if (params.random_b0 && k > 1) {
    std::mt19937_64 rng(params.seed);
    std::uniform_real_distribution<double> unif(0.05, 1.0);
    for (Eigen::Index j = 0; j < k; ++j) b(j) = unif(rng);
    b /= b.sum();
  } else {
    b.setConstant(1.0 / static_cast<double>(k));
  }

  TransportPlan plan;
  plan.q = prob.a * b.transpose();
  plan.b = b;
  plan.f = RVec::Zero(prob.n());
  plan.g = RVec::Zero(k);
  double current = objective_impl(plan.q, plan.b, prob, params, with_penalty);

  for (int it = 0; it < params.t1; ++it) {
    const Mat m_prime = grad_f(plan.q, prob.p, prob.s, params.eps3, params.prob_floor);
    InnerSolution inner = inner_solve(m_prime, prob, params, plan.b);

    const Mat dq = inner.q - plan.q;
    const RVec db = inner.b - plan.b;
    // Directional derivative of the full objective along (dq, db).
    double slope = ((m_prime.array() + params.eps1 * plan.q.array().log()) * dq.array()).sum();
    if (with_penalty) {
      for (Eigen::Index j = 0; j < k; ++j) {
        const double bj = plan.b(j);
        slope += params.eps2 * (-1.0 / bj + 1.0 / (1.0 - bj)) * db(j);
      }
    }
    const double descent = std::min(slope, 0.0);

    double alpha = 1.0;
    bool accepted = false;
    for (int bt = 0; bt <= params.armijo_max_backtracks; ++bt) {
      // Convex form keeps tiny entries positive; q + alpha * dq can cancel to 0.
      Mat q_try = (1.0 - alpha) * plan.q + alpha * inner.q;
      RVec b_try = (1.0 - alpha) * plan.b + alpha * inner.b;
      const double val = objective_impl(q_try, b_try, prob, params, with_penalty);
      if (val <= current + params.armijo_c1 * alpha * descent) {
        plan.q = std::move(q_try);
        plan.b = std::move(b_try);
        current = val;
        accepted = true;
        break;
      }
      alpha *= params.armijo_shrink;
    }
    plan.f = std::move(inner.f);
    plan.g = std::move(inner.g);
    plan.objective_trace.push_back(current);
    plan.step_sizes.push_back(accepted ? alpha : 0.0);
  }
  return plan;
}

Mat sinkhorn_fixed(const Mat& m, const RVec& a, const RVec& b, double eps1, int iters) {
  const auto n = m.rows();
  const auto k = m.cols();
  if (a.size() != n || b.size() != k) throw ArgumentError("sinkhorn_fixed: marginal sizes");
  if (!(eps1 > 0.0)) throw ArgumentError("sinkhorn_fixed: eps1 must be > 0");
  const double shift = m.minCoeff();
  const Mat kernel = ((shift - m.array()) / eps1).exp().matrix();
  RVec u = RVec::Ones(n);
  RVec v = RVec::Ones(k);
  for (int it = 0; it < std::max(iters, 1); ++it) {
    u = a.array() / (kernel * v).array();
    v = b.array() / (kernel.transpose() * u).array();
  }
  u = a.array() / (kernel * v).array();
  return u.asDiagonal() * kernel * v.asDiagonal();
}

}  // namespace pota
