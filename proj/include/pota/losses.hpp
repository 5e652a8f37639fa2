#pragma once

// Training losses of the clustering model.
//
// The attention and instance losses are evaluated over the 2N stacked rows of
// the two augmented views: rows [0, N) belong to view 1 and rows [N, 2N) to
// view 2. Both follow the printed formulas literally, which differ from the
// usual NT-Xent conventions:
//   * attention loss: for sample i, both anchors (i and N+i) drop only column
//     i from the denominator, and the numerator includes j = i;
//   * instance loss: the denominator skips k = i in both views, so the
//     positive pair itself is absent from it.

#include "pota/core.hpp"
#include "pota/pseudo_labels.hpp"

#include <functional>
#include <vector>

namespace pota {

struct Temperatures {
  double tau_a = 1.0;
  double tau_i = 1.0;
  void validate() const;
};

struct LossValue {
  double value = 0.0;
  std::vector<double> per_sample;  // value is their mean
};

double cos_sim(const RVec& u, const RVec& v);

LossValue attention_loss(const Mat& h1, const Mat& h2, const Mat& s_att,
                         const std::vector<std::vector<int>>& sets, const Temperatures& temps);

/// Cross-entropy of both views against hard pseudo-labels, averaged over N.
LossValue cluster_loss(const PseudoLabels& y_hat, const Mat& p1, const Mat& p2,
                       double prob_floor = kProbFloor);

LossValue instance_loss(const Mat& z1, const Mat& z2, const Temperatures& temps);

enum class Stage { warmup, train };

/// warmup: L_A + lambda L_I; train: L_A + L_P + lambda L_I.
double combined_loss(Stage stage, double l_a, double l_p, double l_i, double lambda);

/// Central differences (L(theta + h e_k) - L(theta - h e_k)) / 2h.
RVec fd_gradient(const std::function<double(const RVec&)>& loss_eval, const RVec& theta,
                 double step);

// Gradients with respect to the direct inputs of each loss.

struct AttentionLossGrad {
  double value = 0.0;
  Mat d_h1;
  Mat d_h2;
  Mat d_s_att;
};
AttentionLossGrad attention_loss_grad(const Mat& h1, const Mat& h2, const Mat& s_att,
                                      const std::vector<std::vector<int>>& sets,
                                      const Temperatures& temps);

struct InstanceLossGrad {
  double value = 0.0;
  Mat d_z1;
  Mat d_z2;
};
InstanceLossGrad instance_loss_grad(const Mat& z1, const Mat& z2, const Temperatures& temps);

/// Gradient of cluster_loss with respect to the pre-softmax logits of each
/// view: (P - Y) / N.
struct ClusterLossGrad {
  double value = 0.0;
  Mat d_logits1;
  Mat d_logits2;
};
ClusterLossGrad cluster_loss_grad(const PseudoLabels& y_hat, const Mat& logits1,
                                  const Mat& logits2, double prob_floor = kProbFloor);

}  // namespace pota
