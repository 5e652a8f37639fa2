#include "helpers.hpp"
#include "pota/losses.hpp"
#include "pota/pseudo_labels.hpp"

#include <doctest.h>

#include <numeric>

using namespace pota;

namespace {

double sim(const Mat& h, Eigen::Index a, Eigen::Index b) {
  return h.row(a).dot(h.row(b)) / (h.row(a).norm() * h.row(b).norm());
}

// Attention loss written out term by term.
double attention_direct(const Mat& h1, const Mat& h2, const Mat& s, const std::vector<std::vector<int>>& r,
                        double tau) {
  const auto n = h1.rows();
  Mat h(2 * n, h1.cols());
  h << h1, h2;
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index anchor : {i, n + i}) {
      double num = 0.0, den = 0.0;
      for (int j : r[static_cast<std::size_t>(i)])
        num += s(i, j) * (std::exp(sim(h, anchor, j) / tau) + std::exp(sim(h, anchor, n + j) / tau));
      for (Eigen::Index v = 0; v < 2 * n; ++v)
        if (v != i) den += std::exp(sim(h, anchor, v) / tau);
      total -= std::log(num / den);
    }
  }
  return total / (2.0 * n);
}

double instance_direct(const Mat& z1, const Mat& z2, double tau) {
  const auto n = z1.rows();
  Mat z(2 * n, z1.cols());
  z << z1, z2;
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (auto [a, b] : {std::pair{i, n + i}, std::pair{n + i, i}}) {
      double den = 0.0;
      for (Eigen::Index k = 0; k < n; ++k)
        if (k != i) den += std::exp(sim(z, a, k) / tau) + std::exp(sim(z, a, n + k) / tau);
      total -= std::log(std::exp(sim(z, a, b) / tau) / den);
    }
  }
  return total / (2.0 * n);
}

Mat flat_to_mat(const RVec& v, Eigen::Index r, Eigen::Index c) {
  return Eigen::Map<const Mat>(v.data(), r, c);
}

RVec mat_to_flat(const Mat& m) { return Eigen::Map<const RVec>(m.data(), m.size()); }

Mat fd_wrt(const Mat& x, const std::function<double(const Mat&)>& f, double step = 1e-5) {
  const auto r = x.rows(), c = x.cols();
  return flat_to_mat(fd_gradient([&](const RVec& t) { return f(flat_to_mat(t, r, c)); }, mat_to_flat(x), step), r, c);
}

std::vector<std::vector<int>> sets_of(const std::vector<int>& labels, int k) {
  return same_cluster_sets({labels, k});
}

}  // namespace

TEST_CASE("cos_sim") {
  RVec u(2), v(2);
  u << 1.0, 0.0;
  CHECK(cos_sim(u, u) == doctest::Approx(1.0));
  v << 0.0, 2.0;
  CHECK(cos_sim(u, v) == 0.0);
  v << 1.0, 1.0;
  CHECK(std::abs(cos_sim(u, v) - 1.0 / std::sqrt(2.0)) < 1e-15);
  CHECK_THROWS_AS(cos_sim(u, RVec::Zero(2)), DomainError);
}

TEST_CASE("attention_loss") {
  std::mt19937_64 rng(13);
  Temperatures temps;

  SUBCASE("identical rows, uniform weights") {
    const Mat h = Mat::Ones(2, 3);
    const Mat s = Mat::Constant(2, 2, 0.5);
    const auto r = sets_of({0, 0}, 1);
    const LossValue l = attention_loss(h, h, s, r, temps);
    CHECK(std::abs(l.value - attention_direct(h, h, s, r, 1.0)) < 1e-13);
    // Numerator 2 e, denominator 3 e for every anchor.
    CHECK(std::abs(l.value + std::log(2.0 / 3.0)) < 1e-13);
  }
  SUBCASE("random instance matches the direct transcription") {
    const Mat h1 = test::random_mat(6, 4, rng), h2 = test::random_mat(6, 4, rng);
    const Mat s = softmax_rows(test::random_mat(6, 6, rng));
    const auto r = sets_of({0, 1, 0, 2, 1, 0}, 3);
    temps.tau_a = 0.7;
    const LossValue l = attention_loss(h1, h2, s, r, temps);
    CHECK(std::abs(l.value - attention_direct(h1, h2, s, r, 0.7)) < 1e-12);
    CHECK(l.per_sample.size() == 12);
    CHECK(std::abs(std::accumulate(l.per_sample.begin(), l.per_sample.end(), 0.0) / 12.0 - l.value) < 1e-13);
    CHECK(std::abs(attention_loss(3.0 * h1, 3.0 * h2, s, r, temps).value - l.value) < 1e-12);
  }
  SUBCASE("large temperature limit") {
    const Mat h1 = test::random_mat(3, 2, rng), h2 = test::random_mat(3, 2, rng);
    const Mat s = softmax_rows(test::random_mat(3, 3, rng));
    const auto r = sets_of({0, 0, 1}, 2);
    temps.tau_a = 1e9;
    double limit = 0.0;
    for (int i = 0; i < 3; ++i) {
      double w = 0.0;
      for (int j : r[static_cast<std::size_t>(i)]) w += s(i, j);
      limit += -2.0 * std::log(2.0 * w / 5.0);
    }
    limit /= 6.0;
    CHECK(std::abs(attention_loss(h1, h2, s, r, temps).value - limit) < 1e-7);
  }
  SUBCASE("a single sample has no denominator") {
    CHECK_THROWS_AS(attention_loss(Mat::Ones(1, 2), Mat::Ones(1, 2), Mat::Ones(1, 1), sets_of({0}, 1), temps),
                    DomainError);
  }
}

TEST_CASE("cluster_loss") {
  Mat one_hot = Mat::Zero(3, 2);
  one_hot(0, 0) = one_hot(1, 1) = one_hot(2, 0) = 1.0;
  const PseudoLabels y{{0, 1, 0}, 2};
  CHECK(cluster_loss(y, one_hot, one_hot).value == 0.0);

  const Mat uni = Mat::Constant(3, 2, 0.5);
  CHECK(std::abs(cluster_loss(y, uni, uni).value - 2.0 * std::log(2.0)) < 1e-15);

  std::mt19937_64 rng(17);
  const Mat p1 = test::random_probs(5, 3, rng), p2 = test::random_probs(5, 3, rng);
  const PseudoLabels y5{{2, 0, 1, 1, 0}, 3};
  double direct = 0.0;
  for (int i = 0; i < 5; ++i) direct -= std::log(p1(i, y5.labels[i])) + std::log(p2(i, y5.labels[i]));
  const LossValue l = cluster_loss(y5, p1, p2);
  CHECK(std::abs(l.value - direct / 5.0) < 1e-12);
  CHECK(l.value >= 0.0);
  CHECK_THROWS_AS(cluster_loss(y5, p1, uni), ArgumentError);
}

TEST_CASE("instance_loss") {
  Temperatures temps;
  SUBCASE("identical rows") {
    const Mat z = Mat::Ones(2, 3);
    const LossValue l = instance_loss(z, z, temps);
    // Per sample (both anchors) 2 ln 2; averaged over 2N anchors this is ln 2.
    CHECK(std::abs(l.value - std::log(2.0)) < 1e-14);
    CHECK(std::abs(l.per_sample[0] + l.per_sample[2] - 2.0 * std::log(2.0)) < 1e-14);
  }
  std::mt19937_64 rng(19);
  SUBCASE("direct transcription and rotation invariance") {
    const Mat z1 = test::random_mat(5, 3, rng), z2 = test::random_mat(5, 3, rng);
    temps.tau_i = 0.5;
    const double v = instance_loss(z1, z2, temps).value;
    CHECK(std::abs(v - instance_direct(z1, z2, 0.5)) < 1e-12);
    const Eigen::MatrixXd rot = Eigen::HouseholderQR<Eigen::MatrixXd>(Eigen::MatrixXd::Random(3, 3)).householderQ();
    CHECK(std::abs(instance_loss(z1 * rot, z2 * rot, temps).value - v) < 1e-12);
  }
  SUBCASE("closer positive pair lowers the anchor loss") {
    Mat z1(3, 2), z2(3, 2);
    z1 << 1, 0, 0, 1, -1, 0;
    z2 << std::cos(1.0), std::sin(1.0), 0, -1, -1, 1;
    const double before = instance_loss(z1, z2, temps).per_sample[0];
    z2.row(0) << std::cos(0.3), std::sin(0.3);
    CHECK(instance_loss(z1, z2, temps).per_sample[0] < before);
  }
  CHECK_THROWS_AS(instance_loss(Mat::Ones(1, 2), Mat::Ones(1, 2), temps), DomainError);
}

TEST_CASE("combined_loss") {
  CHECK(combined_loss(Stage::warmup, 1.5, 9.0, 2.0, 0.0) == 1.5);
  CHECK(combined_loss(Stage::train, 1.0, 1.0, 1.0, 10.0) == 12.0);
  CHECK(combined_loss(Stage::train, 0.3, 0.7, 0.2, 10.0) ==
        doctest::Approx(combined_loss(Stage::warmup, 0.3, 0.7, 0.2, 10.0) + 0.7));
}

TEST_CASE("fd_gradient") {
  RVec theta(3);
  theta << 0.5, -1.0, 2.0;
  const RVec g = fd_gradient([](const RVec& t) { return t.squaredNorm(); }, theta, 1e-5);
  CHECK((g - 2.0 * theta).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(fd_gradient([](const RVec&) { return 4.0; }, theta, 1e-5).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(fd_gradient([](const RVec&) { return std::nan(""); }, theta, 1e-5), NumericError);
}

TEST_CASE("analytic loss gradients agree with finite differences") {
  std::mt19937_64 rng(23);
  Temperatures temps;
  temps.tau_a = 0.8;
  temps.tau_i = 0.6;

  SUBCASE("cluster loss through a linear softmax head") {
    const Mat v1 = test::random_mat(6, 4, rng), v2 = test::random_mat(6, 4, rng);
    const Mat w = test::random_mat(4, 3, rng);
    const PseudoLabels y{{0, 2, 1, 1, 0, 2}, 3};
    const ClusterLossGrad g = cluster_loss_grad(y, v1 * w, v2 * w);
    const Mat analytic = v1.transpose() * g.d_logits1 + v2.transpose() * g.d_logits2;
    const Mat fd = fd_wrt(w, [&](const Mat& x) {
      return cluster_loss(y, softmax_rows(v1 * x), softmax_rows(v2 * x)).value;
    });
    CHECK(test::rel_err(analytic, fd) < 1e-5);
  }
  SUBCASE("instance loss") {
    const Mat z1 = test::random_mat(5, 3, rng), z2 = test::random_mat(5, 3, rng);
    const InstanceLossGrad g = instance_loss_grad(z1, z2, temps);
    CHECK(std::abs(g.value - instance_loss(z1, z2, temps).value) < 1e-13);
    CHECK(test::rel_err(g.d_z1, fd_wrt(z1, [&](const Mat& x) { return instance_loss(x, z2, temps).value; })) < 1e-4);
    CHECK(test::rel_err(g.d_z2, fd_wrt(z2, [&](const Mat& x) { return instance_loss(z1, x, temps).value; })) < 1e-4);
  }
  SUBCASE("attention loss") {
    const Mat h1 = test::random_mat(5, 3, rng), h2 = test::random_mat(5, 3, rng);
    const Mat s = softmax_rows(test::random_mat(5, 5, rng));
    const auto r = sets_of({1, 0, 1, 1, 0}, 2);
    const AttentionLossGrad g = attention_loss_grad(h1, h2, s, r, temps);
    CHECK(std::abs(g.value - attention_loss(h1, h2, s, r, temps).value) < 1e-13);
    CHECK(test::rel_err(g.d_h1, fd_wrt(h1, [&](const Mat& x) { return attention_loss(x, h2, s, r, temps).value; })) <
          1e-4);
    CHECK(test::rel_err(g.d_h2, fd_wrt(h2, [&](const Mat& x) { return attention_loss(h1, x, s, r, temps).value; })) <
          1e-4);
    CHECK(test::rel_err(g.d_s_att, fd_wrt(s, [&](const Mat& x) { return attention_loss(h1, h2, x, r, temps).value; })) <
          1e-4);
  }
}

TEST_CASE("losses are permutation equivariant") {
  std::mt19937_64 rng(29);
  Temperatures temps;
  const int n = 6;
  const Mat h1 = test::random_mat(n, 3, rng), h2 = test::random_mat(n, 3, rng);
  const Mat s = softmax_rows(test::random_mat(n, n, rng));
  const std::vector<int> labels = {0, 1, 1, 0, 2, 2};
  const Mat p1 = test::random_probs(n, 3, rng), p2 = test::random_probs(n, 3, rng);

  const std::vector<int> perm = {3, 0, 5, 1, 4, 2};
  Eigen::PermutationMatrix<Eigen::Dynamic> pm(n);
  for (int i = 0; i < n; ++i) pm.indices()(i) = perm[static_cast<std::size_t>(i)];
  const Mat ph1 = pm.transpose() * h1, ph2 = pm.transpose() * h2;
  const Mat ps = pm.transpose() * s * pm;
  std::vector<int> plabels(n);
  for (int i = 0; i < n; ++i) plabels[static_cast<std::size_t>(i)] = labels[static_cast<std::size_t>(perm[i])];

  CHECK(std::abs(attention_loss(h1, h2, s, sets_of(labels, 3), temps).value -
                 attention_loss(ph1, ph2, ps, sets_of(plabels, 3), temps).value) < 1e-12);
  CHECK(std::abs(instance_loss(h1, h2, temps).value - instance_loss(ph1, ph2, temps).value) < 1e-12);
  CHECK(std::abs(cluster_loss({labels, 3}, p1, p2).value -
                 cluster_loss({plabels, 3}, pm.transpose() * p1, pm.transpose() * p2).value) < 1e-12);
}
