#pragma once

#include "pota/core.hpp"

#include <cmath>
#include <random>

namespace pota::test {

inline Mat random_mat(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

inline Mat random_probs(Eigen::Index n, Eigen::Index k, std::mt19937_64& rng, double spread = 2.0) {
  return softmax_rows(random_mat(n, k, rng, -spread, spread));
}

inline double max_abs(const Mat& m) { return m.cwiseAbs().maxCoeff(); }

inline double rel_err(const Mat& a, const Mat& b) {
  return (a - b).norm() / std::max(1e-300, std::max(a.norm(), b.norm()));
}

}  // namespace pota::test
