#pragma once

#include "pota/core.hpp"

#include <random>

namespace pota {

/// Instance-level attention network: two key projections and a value
/// projection, all D2 x D2.
struct AttentionParams {
  Mat w_k1;
  Mat w_k2;
  Mat w_t;
  double scale = 1.0;  // logits are divided by this, sqrt(D2) by default

  static AttentionParams zeros(Eigen::Index d2);
  /// Entries drawn from N(0, init_std^2).
  static AttentionParams random(Eigen::Index d2, std::mt19937_64& rng, double init_std);
  Eigen::Index dim() const { return w_t.rows(); }
  void validate() const;
};

struct AttentionOut {
  Mat s_view;  // N x N, row-stochastic
  Mat h_view;  // N x D2
};

/// S = softmax_rows((Z W_k1)(Z W_k2)^T / scale), H = S (Z W_t).
AttentionOut attention_forward(const Mat& z, const AttentionParams& params);

/// Average of the two view similarities.
Mat attention_similarity(const Mat& s1, const Mat& s2);

/// Row-wise cosine similarity of a probability matrix.
Mat cosine_matrix(const Mat& p0);

Mat combine_similarity(const Mat& s_cos, const Mat& s_att);

}  // namespace pota
