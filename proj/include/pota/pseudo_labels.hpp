#pragma once

#include "pota/core.hpp"

#include <vector>

namespace pota {

struct PseudoLabels {
  std::vector<int> labels;  // 0-based cluster per sample
  int k = 0;

  void validate() const;
  std::size_t size() const { return labels.size(); }
};

/// Row argmax of a coupling; ties go to the lowest column.
PseudoLabels labels_from_plan(const Mat& q);

/// Row argmax of predicted probabilities.
PseudoLabels labels_from_prediction(const Mat& p);

/// For each sample i, the sorted indices j with label_j == label_i (i included).
std::vector<std::vector<int>> same_cluster_sets(const PseudoLabels& labels);

}  // namespace pota
