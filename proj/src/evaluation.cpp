#include "pota/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pota {

void LabelPair::validate() const {
  if (y_true.size() != y_pred.size()) {
    throw ArgumentError("label vectors differ in length (" + std::to_string(y_true.size()) + " vs " +
                        std::to_string(y_pred.size()) + ")");
  }
  for (const auto* v : {&y_true, &y_pred})
    for (int lab : *v)
      if (lab < 0) throw ArgumentError("negative label " + std::to_string(lab));
}

// Shortest augmenting path with row/column potentials (Kuhn-Munkres,
// Jonker-Volgenant formulation). O(n^3).
std::vector<int> hungarian(const Mat& cost) {
  if (cost.rows() != cost.cols()) {
    throw ArgumentError("hungarian: cost matrix must be square, got " + shape_string(cost));
  }
  require_finite(cost, "hungarian");
  const int n = static_cast<int>(cost.rows());
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based: column 0 is a virtual source.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> match(n + 1, 0), way(n + 1, 0);
  for (int row = 1; row <= n; ++row) {
    match[0] = row;
    int col0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[col0] = 1;
      const int r0 = match[col0];
      double delta = inf;
      int col1 = 0;
      for (int col = 1; col <= n; ++col) {
        if (used[col]) continue;
        const double cur = cost(r0 - 1, col - 1) - u[r0] - v[col];
        if (cur < minv[col]) {
          minv[col] = cur;
          way[col] = col0;
        }
        if (minv[col] < delta) {
          delta = minv[col];
          col1 = col;
        }
      }
      for (int col = 0; col <= n; ++col) {
        if (used[col]) {
          u[match[col]] += delta;
          v[col] -= delta;
        } else {
          minv[col] -= delta;
        }
      }
      col0 = col1;
    } while (match[col0] != 0);
    do {
      const int col1 = way[col0];
      match[col0] = match[col1];
      col0 = col1;
    } while (col0 != 0);
  }
  std::vector<int> assignment(static_cast<std::size_t>(n), -1);
  for (int col = 1; col <= n; ++col) assignment[static_cast<std::size_t>(match[col] - 1)] = col - 1;
  return assignment;
}

Mat contingency(const LabelPair& pair) {
  pair.validate();
  int k = 0;
  for (std::size_t i = 0; i < pair.y_true.size(); ++i)
    k = std::max({k, pair.y_true[i] + 1, pair.y_pred[i] + 1});
  Mat counts = Mat::Zero(k, k);
  for (std::size_t i = 0; i < pair.y_true.size(); ++i) counts(pair.y_true[i], pair.y_pred[i]) += 1.0;
  return counts;
}

double accuracy(const LabelPair& pair) {
  const Mat counts = contingency(pair);
  if (pair.y_true.empty()) return 0.0;
  // Row r of the assignment problem is a predicted label; column is a true label.
  const Mat cost = -counts.transpose();
  const auto assignment = hungarian(cost);
  double matched = 0.0;
  for (std::size_t pred = 0; pred < assignment.size(); ++pred)
    matched += counts(assignment[pred], static_cast<Eigen::Index>(pred));
  return matched / static_cast<double>(pair.y_true.size());
}

namespace {

double entropy_of_counts(const std::vector<double>& counts, double total) {
  double h = 0.0;
  for (double c : counts)
    if (c > 0.0) h -= (c / total) * std::log(c / total);
  return h;
}

}  // namespace

double nmi(const LabelPair& pair) {
  const Mat counts = contingency(pair);
  const double total = static_cast<double>(pair.y_true.size());
  if (total == 0.0) return 0.0;
  const auto k = counts.rows();
  std::vector<double> rows(static_cast<std::size_t>(k)), cols(static_cast<std::size_t>(k));
  for (Eigen::Index i = 0; i < k; ++i) {
    rows[static_cast<std::size_t>(i)] = counts.row(i).sum();
    cols[static_cast<std::size_t>(i)] = counts.col(i).sum();
  }
  const double h_true = entropy_of_counts(rows, total);
  const double h_pred = entropy_of_counts(cols, total);
  if (h_true <= 0.0 || h_pred <= 0.0) return 0.0;

  // Terms are sorted before summation so that swapping the arguments, which
  // transposes the table, yields a bitwise identical result.
  std::vector<double> terms;
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      const double c = counts(i, j);
      if (c <= 0.0) continue;
      const double outer = rows[static_cast<std::size_t>(i)] * cols[static_cast<std::size_t>(j)];
      terms.push_back((c / total) * std::log(total * c / outer));
    }
  }
  std::sort(terms.begin(), terms.end());
  double mi = 0.0;
  for (double t : terms) mi += t;
  return std::clamp(mi / std::sqrt(h_true * h_pred), 0.0, 1.0);
}

}  // namespace pota
