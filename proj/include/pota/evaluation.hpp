#pragma once

#include "pota/core.hpp"

#include <vector>

namespace pota {

struct LabelPair {
  std::vector<int> y_true;
  std::vector<int> y_pred;
  void validate() const;
};

/// Minimum-cost assignment on a square cost matrix; result[r] is the column
/// assigned to row r.
std::vector<int> hungarian(const Mat& cost);

/// Contingency counts, rows indexed by y_true, columns by y_pred, padded to a
/// square matrix of the larger label range.
Mat contingency(const LabelPair& pair);

/// Clustering accuracy under the best one-to-one relabeling of y_pred.
double accuracy(const LabelPair& pair);

/// I(Y; Y~) / sqrt(H(Y) H(Y~)), natural logs. 0 when either entropy is 0.
double nmi(const LabelPair& pair);

}  // namespace pota
