#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace pota {

/// Dense row-major real matrix. Every matrix symbol of the model (couplings,
/// probabilities, similarities, embeddings, weights) uses this type.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RVec = Eigen::VectorXd;

/// Default floor applied to probabilities before taking logarithms.
inline constexpr double kProbFloor = 1e-30;

/// Bad shapes, invalid parameters, malformed inputs.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A value lies outside the mathematical domain of an operation
/// (zero-norm vector, marginal outside (0,1), batch too small).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// An iterative method failed or produced a non-finite value.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.derived().array().isFinite().all();
}

std::string shape_string(const Mat& m);

void require_shape(const Mat& m, Eigen::Index rows, Eigen::Index cols, const char* what);
void require_finite(const Mat& m, const char* what);

/// log(sum(exp(v))) evaluated with a max shift; exact for large equal inputs.
template <typename Derived>
double logsumexp(const Eigen::DenseBase<Derived>& v) {
  if (v.size() == 0) return -std::numeric_limits<double>::infinity();
  const double mx = v.maxCoeff();
  if (!std::isfinite(mx)) return mx;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) acc += std::exp(v.derived().coeff(i) - mx);
  return mx + std::log(acc);
}

/// Row-wise softmax with per-row max subtraction.
Mat softmax_rows(const Mat& m);

/// Elementwise log(max(m_ij, floor)).
Mat clamp_log(const Mat& m, double floor = kProbFloor);

/// Rows of `m` scaled to unit Euclidean norm. Throws DomainError on a zero row.
Mat normalize_rows(const Mat& m);

}  // namespace pota
