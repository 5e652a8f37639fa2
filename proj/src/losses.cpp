#include "pota/losses.hpp"

#include <algorithm>
#include <cmath>

namespace pota {

namespace {

Mat stack_views(const Mat& a, const Mat& b) {
  Mat out(a.rows() + b.rows(), a.cols());
  out.topRows(a.rows()) = a;
  out.bottomRows(b.rows()) = b;
  return out;
}

// Backpropagates dU through u = h / |h| row-wise.
Mat normalize_backward(const Mat& h, const Mat& u, const Mat& du) {
  Mat dh(h.rows(), h.cols());
  for (Eigen::Index r = 0; r < h.rows(); ++r) {
    const double n = h.row(r).norm();
    const double proj = u.row(r).dot(du.row(r));
    dh.row(r) = (du.row(r) - proj * u.row(r)) / n;
  }
  return dh;
}

void check_views(const Mat& a, const Mat& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ArgumentError(std::string(what) + ": view shapes differ (" + shape_string(a) + " vs " +
                        shape_string(b) + ")");
  }
  if (a.rows() < 2) throw DomainError(std::string(what) + ": batch needs N >= 2");
}

struct AttentionPass {
  LossValue loss;
  Mat d_h;  // 2N x D
  Mat d_s_att;
};

AttentionPass attention_pass(const Mat& h1, const Mat& h2, const Mat& s_att,
                             const std::vector<std::vector<int>>& sets, const Temperatures& temps,
                             bool want_grad) {
  temps.validate();
  check_views(h1, h2, "attention_loss");
  const auto n = h1.rows();
  require_shape(s_att, n, n, "attention_loss: s_att");
  if (static_cast<Eigen::Index>(sets.size()) != n) {
    throw ArgumentError("attention_loss: one same-cluster set per sample required");
  }
  const double tau = temps.tau_a;
  const Mat h = stack_views(h1, h2);
  const Mat u = normalize_rows(h);
  const Mat c = u * u.transpose();
  // exp((c - 1) / tau): the shift keeps every factor in (0, 1].
  const Mat e = ((c.array() - 1.0) / tau).exp().matrix();
  const double w = 1.0 / (2.0 * static_cast<double>(n));

  AttentionPass out;
  out.loss.per_sample.assign(static_cast<std::size_t>(2 * n), 0.0);
  Mat dc;
  if (want_grad) {
    dc = Mat::Zero(2 * n, 2 * n);
    out.d_s_att = Mat::Zero(n, n);
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = sets[static_cast<std::size_t>(i)];
    for (int view = 0; view < 2; ++view) {
      const Eigen::Index a = i + view * n;
      double num = 0.0;
      for (int j : r) num += s_att(i, j) * (e(a, j) + e(a, n + j));
      double den = 0.0;
      for (Eigen::Index v = 0; v < 2 * n; ++v)
        if (v != i) den += e(a, v);
      const double l = -std::log(num / den);
      out.loss.per_sample[static_cast<std::size_t>(a)] = l;
      total += l;
      if (!want_grad) continue;
      for (int j : r) {
        dc(a, j) -= w * s_att(i, j) * e(a, j) / (num * tau);
        dc(a, n + j) -= w * s_att(i, j) * e(a, n + j) / (num * tau);
        out.d_s_att(i, j) -= w * (e(a, j) + e(a, n + j)) / num;
      }
      for (Eigen::Index v = 0; v < 2 * n; ++v)
        if (v != i) dc(a, v) += w * e(a, v) / (den * tau);
    }
  }
  out.loss.value = total * w;
  if (want_grad) {
    const Mat du = (dc + dc.transpose()) * u;
    out.d_h = normalize_backward(h, u, du);
  }
  return out;
}

struct InstancePass {
  LossValue loss;
  Mat d_z;  // 2N x D
};

InstancePass instance_pass(const Mat& z1, const Mat& z2, const Temperatures& temps,
                           bool want_grad) {
  temps.validate();
  check_views(z1, z2, "instance_loss");
  const auto n = z1.rows();
  const double tau = temps.tau_i;
  const Mat z = stack_views(z1, z2);
  const Mat u = normalize_rows(z);
  const Mat c = u * u.transpose();
  const Mat e = ((c.array() - 1.0) / tau).exp().matrix();
  const double w = 1.0 / (2.0 * static_cast<double>(n));

  InstancePass out;
  out.loss.per_sample.assign(static_cast<std::size_t>(2 * n), 0.0);
  Mat dc;
  if (want_grad) dc = Mat::Zero(2 * n, 2 * n);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int view = 0; view < 2; ++view) {
      const Eigen::Index a = i + view * n;
      const Eigen::Index pos = view == 0 ? n + i : i;
      double den = 0.0;
      for (Eigen::Index k = 0; k < n; ++k) {
        if (k == i) continue;
        den += e(a, k) + e(a, n + k);
      }
      const double l = -std::log(e(a, pos) / den);
      out.loss.per_sample[static_cast<std::size_t>(a)] = l;
      total += l;
      if (!want_grad) continue;
      dc(a, pos) -= w / tau;
      for (Eigen::Index k = 0; k < n; ++k) {
        if (k == i) continue;
        dc(a, k) += w * e(a, k) / (den * tau);
        dc(a, n + k) += w * e(a, n + k) / (den * tau);
      }
    }
  }
  out.loss.value = total * w;
  if (want_grad) {
    const Mat du = (dc + dc.transpose()) * u;
    out.d_z = normalize_backward(z, u, du);
  }
  return out;
}

void check_labels(const PseudoLabels& y_hat, const Mat& p1, const Mat& p2) {
  y_hat.validate();
  const auto n = static_cast<Eigen::Index>(y_hat.size());
  if (n < 1) throw ArgumentError("cluster_loss: empty batch");
  require_shape(p1, n, y_hat.k, "cluster_loss: view 1");
  require_shape(p2, n, y_hat.k, "cluster_loss: view 2");
}

}  // namespace

void Temperatures::validate() const {
  if (!(tau_a > 0.0) || !(tau_i > 0.0)) throw ArgumentError("temperatures must be > 0");
}

double cos_sim(const RVec& u, const RVec& v) {
  if (u.size() != v.size()) throw ArgumentError("cos_sim: length mismatch");
  const double nu = u.norm();
  const double nv = v.norm();
  if (!(nu > 0.0) || !(nv > 0.0)) throw DomainError("cos_sim: zero vector");
  return std::clamp(u.dot(v) / (nu * nv), -1.0, 1.0);
}

LossValue attention_loss(const Mat& h1, const Mat& h2, const Mat& s_att,
                         const std::vector<std::vector<int>>& sets, const Temperatures& temps) {
  return attention_pass(h1, h2, s_att, sets, temps, false).loss;
}

AttentionLossGrad attention_loss_grad(const Mat& h1, const Mat& h2, const Mat& s_att,
                                      const std::vector<std::vector<int>>& sets,
                                      const Temperatures& temps) {
  AttentionPass pass = attention_pass(h1, h2, s_att, sets, temps, true);
  const auto n = h1.rows();
  AttentionLossGrad g;
  g.value = pass.loss.value;
  g.d_h1 = pass.d_h.topRows(n);
  g.d_h2 = pass.d_h.bottomRows(n);
  g.d_s_att = std::move(pass.d_s_att);
  return g;
}

LossValue cluster_loss(const PseudoLabels& y_hat, const Mat& p1, const Mat& p2, double prob_floor) {
  check_labels(y_hat, p1, p2);
  LossValue out;
  out.per_sample.resize(y_hat.size());
  double total = 0.0;
  for (std::size_t i = 0; i < y_hat.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const int y = y_hat.labels[i];
    const double l = -std::log(std::max(p1(r, y), prob_floor)) - std::log(std::max(p2(r, y), prob_floor));
    out.per_sample[i] = l;
    total += l;
  }
  out.value = total / static_cast<double>(y_hat.size());
  return out;
}

ClusterLossGrad cluster_loss_grad(const PseudoLabels& y_hat, const Mat& logits1,
                                  const Mat& logits2, double prob_floor) {
  const Mat p1 = softmax_rows(logits1);
  const Mat p2 = softmax_rows(logits2);
  ClusterLossGrad g;
  g.value = cluster_loss(y_hat, p1, p2, prob_floor).value;
  const double inv_n = 1.0 / static_cast<double>(y_hat.size());
  g.d_logits1 = p1 * inv_n;
  g.d_logits2 = p2 * inv_n;
  for (std::size_t i = 0; i < y_hat.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    g.d_logits1(r, y_hat.labels[i]) -= inv_n;
    g.d_logits2(r, y_hat.labels[i]) -= inv_n;
  }
  return g;
}

LossValue instance_loss(const Mat& z1, const Mat& z2, const Temperatures& temps) {
  return instance_pass(z1, z2, temps, false).loss;
}

InstanceLossGrad instance_loss_grad(const Mat& z1, const Mat& z2, const Temperatures& temps) {
  InstancePass pass = instance_pass(z1, z2, temps, true);
  const auto n = z1.rows();
  InstanceLossGrad g;
  g.value = pass.loss.value;
  g.d_z1 = pass.d_z.topRows(n);
  g.d_z2 = pass.d_z.bottomRows(n);
  return g;
}

double combined_loss(Stage stage, double l_a, double l_p, double l_i, double lambda) {
  if (!(lambda >= 0.0)) throw ArgumentError("combined_loss: lambda must be >= 0");
  return stage == Stage::warmup ? l_a + lambda * l_i : l_a + l_p + lambda * l_i;
}

RVec fd_gradient(const std::function<double(const RVec&)>& loss_eval, const RVec& theta,
                 double step) {
  if (!(step > 0.0)) throw ArgumentError("fd_gradient: step must be > 0");
  RVec grad(theta.size());
  RVec probe = theta;
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    probe(k) = theta(k) + step;
    const double up = loss_eval(probe);
    probe(k) = theta(k) - step;
    const double down = loss_eval(probe);
    probe(k) = theta(k);
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericError("fd_gradient: non-finite loss at coordinate " + std::to_string(k));
    }
    grad(k) = (up - down) / (2.0 * step);
  }
  return grad;
}

}  // namespace pota
