#include "pota/similarity.hpp"

#include <cmath>

namespace pota {

AttentionParams AttentionParams::zeros(Eigen::Index d2) {
  AttentionParams p;
  p.w_k1 = Mat::Zero(d2, d2);
  p.w_k2 = Mat::Zero(d2, d2);
  p.w_t = Mat::Zero(d2, d2);
  p.scale = std::sqrt(static_cast<double>(d2));
  return p;
}

AttentionParams AttentionParams::random(Eigen::Index d2, std::mt19937_64& rng, double init_std) {
  AttentionParams p = zeros(d2);
  std::normal_distribution<double> normal(0.0, init_std);
  for (Mat* w : {&p.w_k1, &p.w_k2, &p.w_t})
    for (Eigen::Index i = 0; i < w->size(); ++i) w->data()[i] = normal(rng);
  return p;
}

void AttentionParams::validate() const {
  const auto d = w_t.rows();
  require_shape(w_k1, d, d, "AttentionParams.w_k1");
  require_shape(w_k2, d, d, "AttentionParams.w_k2");
  require_shape(w_t, d, d, "AttentionParams.w_t");
  require_finite(w_k1, "AttentionParams.w_k1");
  require_finite(w_k2, "AttentionParams.w_k2");
  require_finite(w_t, "AttentionParams.w_t");
  if (!(scale > 0.0) || !std::isfinite(scale)) throw ArgumentError("AttentionParams.scale must be > 0");
}

AttentionOut attention_forward(const Mat& z, const AttentionParams& params) {
  params.validate();
  if (z.rows() < 1) throw ArgumentError("attention_forward: empty input");
  if (z.cols() != params.dim()) {
    throw ArgumentError("attention_forward: input " + shape_string(z) + " does not match D2 = " +
                        std::to_string(params.dim()));
  }
  const Mat k1 = z * params.w_k1;
  const Mat k2 = z * params.w_k2;
  const Mat t = z * params.w_t;
  AttentionOut out;
  out.s_view = softmax_rows((k1 * k2.transpose()) / params.scale);
  out.h_view = out.s_view * t;
  return out;
}

Mat attention_similarity(const Mat& s1, const Mat& s2) {
  if (s1.rows() != s1.cols()) throw ArgumentError("attention_similarity: s1 not square");
  require_shape(s2, s1.rows(), s1.cols(), "attention_similarity: s2");
  return 0.5 * (s1 + s2);
}

Mat cosine_matrix(const Mat& p0) {
  const Mat u = normalize_rows(p0);
  Mat s = u * u.transpose();
  // Exact unit diagonal; the product leaves rounding in the last bit.
  s.diagonal().setOnes();
  return s;
}

Mat combine_similarity(const Mat& s_cos, const Mat& s_att) {
  require_shape(s_att, s_cos.rows(), s_cos.cols(), "combine_similarity");
  return s_cos + s_att;
}

}  // namespace pota
