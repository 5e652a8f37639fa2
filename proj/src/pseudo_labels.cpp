#include "pota/pseudo_labels.hpp"

namespace pota {

void PseudoLabels::validate() const {
  if (k < 1) throw ArgumentError("PseudoLabels: k must be >= 1");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= k) {
      throw ArgumentError("PseudoLabels: label " + std::to_string(labels[i]) + " at index " +
                          std::to_string(i) + " outside [0, " + std::to_string(k) + ")");
    }
  }
}

PseudoLabels labels_from_plan(const Mat& q) {
  if (q.cols() < 1) throw ArgumentError("labels_from_plan: no columns");
  PseudoLabels out;
  out.k = static_cast<int>(q.cols());
  out.labels.resize(static_cast<std::size_t>(q.rows()));
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < q.cols(); ++j)
      if (q(i, j) > q(i, best)) best = j;
    out.labels[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

PseudoLabels labels_from_prediction(const Mat& p) { return labels_from_plan(p); }

std::vector<std::vector<int>> same_cluster_sets(const PseudoLabels& labels) {
  labels.validate();
  std::vector<std::vector<int>> members(static_cast<std::size_t>(labels.k));
  for (std::size_t i = 0; i < labels.size(); ++i)
    members[static_cast<std::size_t>(labels.labels[i])].push_back(static_cast<int>(i));
  std::vector<std::vector<int>> sets;
  sets.reserve(labels.size());
  for (int lab : labels.labels) sets.push_back(members[static_cast<std::size_t>(lab)]);
  return sets;
}

}  // namespace pota
