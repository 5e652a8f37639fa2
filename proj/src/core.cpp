#include "pota/core.hpp"

namespace pota {

std::string shape_string(const Mat& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_shape(const Mat& m, Eigen::Index rows, Eigen::Index cols, const char* what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw ArgumentError(std::string(what) + ": expected " + std::to_string(rows) + "x" +
                        std::to_string(cols) + ", got " + shape_string(m));
  }
}

void require_finite(const Mat& m, const char* what) {
  if (!all_finite(m)) throw ArgumentError(std::string(what) + ": non-finite entry");
}

Mat softmax_rows(const Mat& m) {
  Mat out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double mx = m.row(i).maxCoeff();
    double total = 0.0;
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      out(i, j) = std::exp(m(i, j) - mx);
      total += out(i, j);
    }
    out.row(i) /= total;
  }
  return out;
}

Mat clamp_log(const Mat& m, double floor) {
  if (!(floor > 0.0)) throw ArgumentError("clamp_log: floor must be positive");
  return m.unaryExpr([floor](double x) { return std::log(std::max(x, floor)); });
}

Mat normalize_rows(const Mat& m) {
  Mat out = m;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double n = m.row(i).norm();
    if (!(n > 0.0)) throw DomainError("zero-norm row " + std::to_string(i));
    out.row(i) /= n;
  }
  return out;
}

}  // namespace pota
