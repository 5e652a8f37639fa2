#include "pota/pipeline.hpp"

#include "pota/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace pota {

namespace {

Mat gather_rows(const Mat& m, const std::vector<int>& idx) {
  Mat out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = m.row(idx[r]);
  return out;
}

std::vector<int> gather_labels(const std::vector<int>& y, const std::vector<int>& idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (int i : idx) out.push_back(y[static_cast<std::size_t>(i)]);
  return out;
}

void fill_normal(Mat& m, std::mt19937_64& rng, double stddev) {
  std::normal_distribution<double> normal(0.0, stddev);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
}

// Mini-batches of at most `batch` rows; a short tail that could not host
// k-means (fewer than max(2, k) rows) is merged into the previous batch.
std::vector<std::vector<int>> make_batches(const std::vector<int>& perm, int batch, int k) {
  std::vector<std::vector<int>> out;
  for (std::size_t start = 0; start < perm.size(); start += static_cast<std::size_t>(batch)) {
    const auto stop = std::min(perm.size(), start + static_cast<std::size_t>(batch));
    out.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(start),
                     perm.begin() + static_cast<std::ptrdiff_t>(stop));
  }
  const auto min_rows = static_cast<std::size_t>(std::max(2, k));
  if (out.size() > 1 && out.back().size() < min_rows) {
    auto tail = std::move(out.back());
    out.pop_back();
    out.back().insert(out.back().end(), tail.begin(), tail.end());
  }
  return out;
}

double squared_distance(const Mat& a, Eigen::Index i, const Mat& b, Eigen::Index j) {
  return (a.row(i) - b.row(j)).squaredNorm();
}

// Attention backward pass for one view: accumulates parameter gradients
// given dL/dH and dL/dS for that view.
void attention_backward(const Mat& z, const AttentionParams& params, const AttentionOut& fwd,
                        const Mat& d_h, const Mat& d_s, HeadGrads& grads) {
  const Mat k1 = z * params.w_k1;
  const Mat k2 = z * params.w_k2;
  const Mat t = z * params.w_t;
  const Mat& s = fwd.s_view;
  const Mat d_s_total = d_h * t.transpose() + d_s;
  const Mat d_t = s.transpose() * d_h;
  Mat d_logits(s.rows(), s.cols());
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const double inner = s.row(i).dot(d_s_total.row(i));
    d_logits.row(i) = s.row(i).cwiseProduct(d_s_total.row(i)) - inner * s.row(i);
  }
  d_logits /= params.scale;
  grads.w_k1.noalias() += z.transpose() * (d_logits * k2);
  grads.w_k2.noalias() += z.transpose() * (d_logits.transpose() * k1);
  grads.w_t.noalias() += z.transpose() * d_t;
}

RVec flatten_attention(const AttentionParams& p) {
  const auto n = p.w_t.size();
  RVec theta(3 * n);
  theta.segment(0, n) = Eigen::Map<const RVec>(p.w_k1.data(), n);
  theta.segment(n, n) = Eigen::Map<const RVec>(p.w_k2.data(), n);
  theta.segment(2 * n, n) = Eigen::Map<const RVec>(p.w_t.data(), n);
  return theta;
}

void unflatten_attention(const RVec& theta, AttentionParams& p) {
  const auto n = p.w_t.size();
  Eigen::Map<RVec>(p.w_k1.data(), n) = theta.segment(0, n);
  Eigen::Map<RVec>(p.w_k2.data(), n) = theta.segment(n, n);
  Eigen::Map<RVec>(p.w_t.data(), n) = theta.segment(2 * n, n);
}

RVec flatten(const Mat& m) { return Eigen::Map<const RVec>(m.data(), m.size()); }

Mat unflatten(const RVec& theta, Eigen::Index rows, Eigen::Index cols) {
  return Eigen::Map<const Mat>(theta.data(), rows, cols);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

}  // namespace

void Dataset::validate() const {
  if (k < 2) throw ArgumentError("Dataset: k must be >= 2");
  if (v0.rows() < 1 || v0.cols() < 1) throw ArgumentError("Dataset: empty anchor matrix");
  require_shape(v1, v0.rows(), v0.cols(), "Dataset.v1");
  require_shape(v2, v0.rows(), v0.cols(), "Dataset.v2");
  require_finite(v0, "Dataset.v0");
  require_finite(v1, "Dataset.v1");
  require_finite(v2, "Dataset.v2");
  if (v0.rows() < k) throw ArgumentError("Dataset: fewer samples than clusters");
  if (y_true) {
    if (static_cast<Eigen::Index>(y_true->size()) != v0.rows()) {
      throw ArgumentError("Dataset: label count does not match sample count");
    }
    for (int y : *y_true)
      if (y < 0) throw ArgumentError("Dataset: negative label");
  }
}

Heads Heads::init(Eigen::Index d1, Eigen::Index d2, int k, std::mt19937_64& rng) {
  Heads h;
  h.g_z = Mat(d1, d2);
  h.g_p = Mat(d1, k);
  fill_normal(h.g_z, rng, 1.0 / std::sqrt(static_cast<double>(d1)));
  fill_normal(h.g_p, rng, 0.01);
  h.g_h = AttentionParams::random(d2, rng, 1.0 / std::sqrt(static_cast<double>(d2)));
  return h;
}

void Heads::validate() const {
  if (g_z.rows() != g_p.rows()) throw ArgumentError("Heads: g_z and g_p input dimensions differ");
  if (g_z.cols() != g_h.dim()) throw ArgumentError("Heads: g_z output does not match attention D2");
  require_finite(g_z, "Heads.g_z");
  require_finite(g_p, "Heads.g_p");
  g_h.validate();
}

void RunConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ArgumentError("RunConfig: " + msg); };
  if (e_total < 0) fail("e_total must be >= 0");
  if (e_warm < 0 || e_warm > e_total) fail("e_warm must lie in [0, e_total]");
  if (batch < 2) fail("batch must be >= 2");
  if (d2 < 1) fail("d2 must be >= 1");
  if (!(lambda >= 0.0)) fail("lambda must be >= 0");
  if (!(lr > 0.0)) fail("lr must be > 0");
  if (!(fd_step > 0.0)) fail("fd_step must be > 0");
  if (bench_per_class < 1) fail("bench_per_class must be >= 1");
  if (bench_eps2 && !(*bench_eps2 > 0.0)) fail("bench_eps2 must be > 0");
  temps.validate();
  caot.validate();
}

KMeansResult kmeans_fit(const Mat& v, int k, std::uint64_t seed) {
  const auto n = v.rows();
  if (k < 1) throw ArgumentError("kmeans: k must be >= 1");
  if (n < k) throw ArgumentError("kmeans: fewer points (" + std::to_string(n) + ") than clusters (" +
                                 std::to_string(k) + ")");
  std::mt19937_64 rng(seed);
  KMeansResult res;
  res.centers = Mat(k, v.cols());

  // k-means++ seeding.
  std::vector<double> d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  std::vector<char> taken(static_cast<std::size_t>(n), 0);
  std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
  Eigen::Index pick = first(rng);
  for (int c = 0; c < k; ++c) {
    if (c > 0) {
      const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
      if (total > 0.0) {
        std::discrete_distribution<Eigen::Index> weighted(d2.begin(), d2.end());
        pick = weighted(rng);
      } else {
        pick = static_cast<Eigen::Index>(std::find(taken.begin(), taken.end(), 0) - taken.begin());
      }
    }
    taken[static_cast<std::size_t>(pick)] = 1;
    res.centers.row(c) = v.row(pick);
    for (Eigen::Index i = 0; i < n; ++i)
      d2[static_cast<std::size_t>(i)] =
          std::min(d2[static_cast<std::size_t>(i)], squared_distance(v, i, res.centers, c));
  }

  std::vector<int> assign(static_cast<std::size_t>(n), -1);
  std::vector<double> dist(static_cast<std::size_t>(n), 0.0);
  auto assign_all = [&]() {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = squared_distance(v, i, res.centers, 0);
      for (int c = 1; c < k; ++c) {
        const double d = squared_distance(v, i, res.centers, c);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      const auto si = static_cast<std::size_t>(i);
      // Ties keep the current cluster, so a re-seeded duplicate point stays put.
      if (assign[si] >= 0 && squared_distance(v, i, res.centers, assign[si]) == best_d) best = assign[si];
      changed = changed || assign[si] != best;
      assign[si] = best;
      dist[si] = best_d;
    }
    return changed;
  };

  constexpr int kMaxIter = 300;
  assign_all();
  for (res.iterations = 1; res.iterations <= kMaxIter; ++res.iterations) {
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    Mat sums = Mat::Zero(k, v.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(assign[static_cast<std::size_t>(i)]) += v.row(i);
      ++counts[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        res.centers.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
        continue;
      }
      // Empty cluster: move its centre onto the point farthest from its own
      // centre, taken from a cluster that can spare it.
      Eigen::Index far = -1;
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto si = static_cast<std::size_t>(i);
        if (counts[static_cast<std::size_t>(assign[si])] < 2) continue;
        if (far < 0 || dist[si] > dist[static_cast<std::size_t>(far)]) far = i;
      }
      if (far < 0) throw NumericError("kmeans: cannot re-seed empty cluster");
      const auto sf = static_cast<std::size_t>(far);
      --counts[static_cast<std::size_t>(assign[sf])];
      assign[sf] = c;
      counts[static_cast<std::size_t>(c)] = 1;
      dist[sf] = 0.0;
      res.centers.row(c) = v.row(far);
    }
    if (!assign_all()) break;
  }
  res.iterations = std::min(res.iterations, kMaxIter);
  res.inertia = std::accumulate(dist.begin(), dist.end(), 0.0);
  res.labels.k = k;
  res.labels.labels = std::move(assign);
  return res;
}

PseudoLabels kmeans(const Mat& v, int k, std::uint64_t seed) { return kmeans_fit(v, k, seed).labels; }

Dataset synth_dataset(int k, const std::vector<int>& sizes, int dim, double separation, double noise,
                      std::uint64_t seed) {
  if (k < 2) throw ArgumentError("synth_dataset: k must be >= 2");
  if (static_cast<int>(sizes.size()) != k) throw ArgumentError("synth_dataset: need one size per class");
  if (dim < 1) throw ArgumentError("synth_dataset: dim must be >= 1");
  if (!(separation > 0.0)) throw ArgumentError("synth_dataset: separation must be > 0");
  if (!(noise >= 0.0)) throw ArgumentError("synth_dataset: noise must be >= 0");
  for (int s : sizes)
    if (s < 1) throw ArgumentError("synth_dataset: class sizes must be positive");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  // Scaled basis vectors sit at pairwise distance `separation`; with fewer
  // dimensions than classes the centres are random at the same radius.
  Mat centers = Mat::Zero(k, dim);
  const double radius = separation / std::sqrt(2.0);
  for (int c = 0; c < k; ++c) {
    if (dim >= k) {
      centers(c, c) = radius;
    } else {
      for (int d = 0; d < dim; ++d) centers(c, d) = normal(rng);
      centers.row(c) *= radius / centers.row(c).norm();
    }
  }

  const int total = std::accumulate(sizes.begin(), sizes.end(), 0);
  Dataset data;
  data.k = k;
  data.v0 = Mat(total, dim);
  std::vector<int> y;
  y.reserve(static_cast<std::size_t>(total));
  Eigen::Index row = 0;
  for (int c = 0; c < k; ++c) {
    for (int s = 0; s < sizes[static_cast<std::size_t>(c)]; ++s, ++row) {
      for (int d = 0; d < dim; ++d) data.v0(row, d) = centers(c, d) + normal(rng);
      y.push_back(c);
    }
  }
  data.y_true = std::move(y);
  if (noise == 0.0) {
    data.v1 = data.v0;
    data.v2 = data.v0;
  } else {
    data.v1 = data.v0;
    data.v2 = data.v0;
    for (Mat* view : {&data.v1, &data.v2})
      for (Eigen::Index i = 0; i < view->size(); ++i) view->data()[i] += noise * normal(rng);
  }
  return data;
}

ForwardOut forward_heads(const Mat& v0, const Mat& v1, const Mat& v2, const Heads& heads) {
  heads.validate();
  const auto d1 = heads.g_z.rows();
  for (const Mat* v : {&v0, &v1, &v2}) {
    if (v->cols() != d1) {
      throw ArgumentError("forward_heads: input " + shape_string(*v) + " does not match D1 = " +
                          std::to_string(d1));
    }
  }
  ForwardOut out;
  out.z1 = v1 * heads.g_z;
  out.z2 = v2 * heads.g_z;
  out.logits0 = v0 * heads.g_p;
  out.logits1 = v1 * heads.g_p;
  out.logits2 = v2 * heads.g_p;
  out.p0 = softmax_rows(out.logits0);
  out.p1 = softmax_rows(out.logits1);
  out.p2 = softmax_rows(out.logits2);
  out.att1 = attention_forward(out.z1, heads.g_h);
  out.att2 = attention_forward(out.z2, heads.g_h);
  return out;
}

Mat semantic_matrix(const Mat& p0, const AttentionOut& att1, const AttentionOut& att2, bool warmup,
                    const RunConfig& config) {
  const auto n = p0.rows();
  Mat s = Mat::Zero(n, n);
  if (config.use_cos) s = cosine_matrix(p0);
  if (!warmup && config.use_att) s = combine_similarity(s, attention_similarity(att1.s_view, att2.s_view));
  return s;
}

BatchLosses batch_losses(const Mat& v0, const Mat& v1, const Mat& v2, const Heads& heads,
                         const PseudoLabels& labels, Stage stage, const RunConfig& config) {
  const ForwardOut fwd = forward_heads(v0, v1, v2, heads);
  const auto sets = same_cluster_sets(labels);
  BatchLosses out;
  const Mat s_att = attention_similarity(fwd.att1.s_view, fwd.att2.s_view);
  out.attention = attention_loss(fwd.att1.h_view, fwd.att2.h_view, s_att, sets, config.temps).value;
  if (config.use_instance_loss) out.instance = instance_loss(fwd.z1, fwd.z2, config.temps).value;
  if (stage == Stage::train && config.use_cluster_loss) {
    out.cluster = cluster_loss(labels, fwd.p1, fwd.p2, config.caot.prob_floor).value;
  }
  out.total = combined_loss(stage, out.attention, out.cluster, out.instance, config.lambda);
  return out;
}

HeadGrads head_gradients(const Mat& v0, const Mat& v1, const Mat& v2, const Heads& heads,
                         const PseudoLabels& labels, Stage stage, const RunConfig& config,
                         GradMode mode) {
  const ForwardOut fwd = forward_heads(v0, v1, v2, heads);
  const auto sets = same_cluster_sets(labels);
  const auto d = heads.g_h.dim();
  HeadGrads grads;
  grads.g_z = Mat::Zero(heads.g_z.rows(), heads.g_z.cols());
  grads.g_p = Mat::Zero(heads.g_p.rows(), heads.g_p.cols());
  grads.w_k1 = Mat::Zero(d, d);
  grads.w_k2 = Mat::Zero(d, d);
  grads.w_t = Mat::Zero(d, d);
  const bool train_cluster = stage == Stage::train && config.use_cluster_loss;

  if (mode == GradMode::analytic) {
    const Mat s_att = attention_similarity(fwd.att1.s_view, fwd.att2.s_view);
    const auto ga = attention_loss_grad(fwd.att1.h_view, fwd.att2.h_view, s_att, sets, config.temps);
    const Mat half_ds = 0.5 * ga.d_s_att;
    attention_backward(fwd.z1, heads.g_h, fwd.att1, ga.d_h1, half_ds, grads);
    attention_backward(fwd.z2, heads.g_h, fwd.att2, ga.d_h2, half_ds, grads);
    if (config.use_instance_loss) {
      const auto gi = instance_loss_grad(fwd.z1, fwd.z2, config.temps);
      grads.g_z = config.lambda * (v1.transpose() * gi.d_z1 + v2.transpose() * gi.d_z2);
    }
    if (train_cluster) {
      const auto gc = cluster_loss_grad(labels, fwd.logits1, fwd.logits2, config.caot.prob_floor);
      grads.g_p = v1.transpose() * gc.d_logits1 + v2.transpose() * gc.d_logits2;
    }
    return grads;
  }

  const double h = config.fd_step;
  {
    AttentionParams probe = heads.g_h;
    const RVec g = fd_gradient(
        [&](const RVec& theta) {
          unflatten_attention(theta, probe);
          const AttentionOut a1 = attention_forward(fwd.z1, probe);
          const AttentionOut a2 = attention_forward(fwd.z2, probe);
          return attention_loss(a1.h_view, a2.h_view, attention_similarity(a1.s_view, a2.s_view), sets,
                                config.temps)
              .value;
        },
        flatten_attention(heads.g_h), h);
    AttentionParams out = heads.g_h;
    unflatten_attention(g, out);
    grads.w_k1 = out.w_k1;
    grads.w_k2 = out.w_k2;
    grads.w_t = out.w_t;
  }
  if (config.use_instance_loss) {
    const auto rows = heads.g_z.rows();
    const auto cols = heads.g_z.cols();
    const RVec g = fd_gradient(
        [&](const RVec& theta) {
          const Mat gz = unflatten(theta, rows, cols);
          return config.lambda * instance_loss(v1 * gz, v2 * gz, config.temps).value;
        },
        flatten(heads.g_z), h);
    grads.g_z = unflatten(g, rows, cols);
  }
  if (train_cluster) {
    const auto rows = heads.g_p.rows();
    const auto cols = heads.g_p.cols();
    const RVec g = fd_gradient(
        [&](const RVec& theta) {
          const Mat gp = unflatten(theta, rows, cols);
          return cluster_loss(labels, softmax_rows(v1 * gp), softmax_rows(v2 * gp), config.caot.prob_floor)
              .value;
        },
        flatten(heads.g_p), h);
    grads.g_p = unflatten(g, rows, cols);
  }
  return grads;
}

RunReport run_pota(const Dataset& data, const RunConfig& config) {
  data.validate();
  config.validate();
  const auto n = data.size();
  const int k = data.k;
  std::mt19937_64 rng(config.seed);

  RunReport report;
  report.heads = Heads::init(data.dim(), config.d2, k, rng);
  Heads& heads = report.heads;

  if (data.y_true) {
    const auto base = kmeans(data.v0, k, mix_seed(config.seed, 0, 0));
    const LabelPair pair{*data.y_true, base.labels};
    report.kmeans_acc = accuracy(pair);
    report.kmeans_nmi = nmi(pair);
  }

  const int batch = static_cast<int>(std::min<Eigen::Index>(config.batch, n));
  std::vector<int> perm(static_cast<std::size_t>(n));
  for (int epoch = 1; epoch <= config.e_total; ++epoch) {
    const bool warm = epoch <= config.e_warm;
    const Stage stage = warm ? Stage::warmup : Stage::train;
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto batches = make_batches(perm, batch, k);

    EpochRecord rec;
    rec.epoch = epoch;
    rec.warmup = warm;
    rec.label_source = warm ? "kmeans" : "caot";
    double weight = 0.0;
    double acc_sum = 0.0;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const auto& idx = batches[bi];
      const Mat v0 = gather_rows(data.v0, idx);
      const Mat v1 = gather_rows(data.v1, idx);
      const Mat v2 = gather_rows(data.v2, idx);

      PseudoLabels labels;
      if (warm) {
        labels = kmeans(v0, k, mix_seed(config.seed, static_cast<std::uint64_t>(epoch), bi + 1));
      } else {
        const ForwardOut fwd = forward_heads(v0, v1, v2, heads);
        const Mat s = semantic_matrix(fwd.p0, fwd.att1, fwd.att2, false, config);
        TransportPlan plan = caot_solve(OtProblem::uniform(fwd.p0, s), config.caot);
        labels = labels_from_plan(plan.q);
        if (bi == 0) rec.objective_trace = plan.objective_trace;
        report.last_coupling = std::move(plan.q);
      }

      const BatchLosses losses = batch_losses(v0, v1, v2, heads, labels, stage, config);
      if (!std::isfinite(losses.total)) {
        std::ostringstream os;
        os << "run_pota: non-finite loss at epoch " << epoch << " batch " << bi << " (L_A=" << losses.attention
           << ", L_I=" << losses.instance << ", L_P=" << losses.cluster << ")";
        throw NumericError(os.str());
      }
      const HeadGrads grads = head_gradients(v0, v1, v2, heads, labels, stage, config, config.grad_mode);
      heads.g_h.w_k1 -= config.lr * grads.w_k1;
      heads.g_h.w_k2 -= config.lr * grads.w_k2;
      heads.g_h.w_t -= config.lr * grads.w_t;
      heads.g_z -= config.lr * grads.g_z;
      if (stage == Stage::train) heads.g_p -= config.lr * grads.g_p;
      if (!all_finite(heads.g_z) || !all_finite(heads.g_p) || !all_finite(heads.g_h.w_t) ||
          !all_finite(heads.g_h.w_k1) || !all_finite(heads.g_h.w_k2)) {
        throw NumericError("run_pota: non-finite parameters after epoch " + std::to_string(epoch));
      }

      const double w = static_cast<double>(idx.size());
      weight += w;
      rec.loss_attention += w * losses.attention;
      rec.loss_instance += w * losses.instance;
      rec.loss_cluster += w * losses.cluster;
      rec.loss_total += w * losses.total;
      if (data.y_true) acc_sum += w * accuracy({gather_labels(*data.y_true, idx), labels.labels});
    }
    rec.loss_attention /= weight;
    rec.loss_instance /= weight;
    rec.loss_cluster /= weight;
    rec.loss_total /= weight;
    if (data.y_true) rec.pseudo_label_acc = acc_sum / weight;
    report.epochs.push_back(std::move(rec));
  }

  report.final_labels = labels_from_prediction(softmax_rows(data.v0 * heads.g_p)).labels;
  if (data.y_true) {
    const LabelPair pair{*data.y_true, report.final_labels};
    report.final_acc = accuracy(pair);
    report.final_nmi = nmi(pair);
  }
  return report;
}

BenchResult pseudo_label_bench(const Dataset& data, const RunConfig& config) {
  if (!data.y_true) throw ArgumentError("pseudo_label_bench: ground-truth labels required");
  BenchResult result;
  result.trained = run_pota(data, config);
  const Heads& heads = result.trained.heads;
  const ForwardOut fwd = forward_heads(data.v0, data.v1, data.v2, heads);
  const bool warm_only = config.e_total <= config.e_warm;
  const Mat s = semantic_matrix(fwd.p0, fwd.att1, fwd.att2, warm_only, config);
  const OtProblem prob = OtProblem::uniform(fwd.p0, s);

  CaotParams full = config.caot;
  if (config.bench_eps2) full.eps2 = *config.bench_eps2;
  CaotParams aot = full;
  aot.eps3 = 0.0;
  const TransportPlan aot_plan = caot_solve(prob, aot);
  const TransportPlan caot_plan = caot_solve(prob, full);

  // Each coupling row rescaled to a per-sample soft label.
  const Mat aot_soft = aot_plan.q.array().colwise() / prob.a.array();
  const Mat caot_soft = caot_plan.q.array().colwise() / prob.a.array();
  const std::vector<std::pair<std::string, const Mat*>> methods = {
      {"prediction", &fwd.p0}, {"aot", &aot_soft}, {"caot", &caot_soft}};

  for (const auto& [name, m] : methods) {
    const LabelPair pair{*data.y_true, labels_from_plan(*m).labels};
    result.rows.push_back({name, accuracy(pair), nmi(pair)});
  }

  // Class-contiguous subset, `bench_per_class` random members per class.
  std::mt19937_64 rng(mix_seed(config.seed, 0xbe9c, 0));
  for (int c = 0; c < data.k; ++c) {
    std::vector<int> members;
    for (std::size_t i = 0; i < data.y_true->size(); ++i)
      if ((*data.y_true)[i] == c) members.push_back(static_cast<int>(i));
    std::shuffle(members.begin(), members.end(), rng);
    const auto take = std::min(members.size(), static_cast<std::size_t>(config.bench_per_class));
    std::sort(members.begin(), members.begin() + static_cast<std::ptrdiff_t>(take));
    result.sample_indices.insert(result.sample_indices.end(), members.begin(),
                                 members.begin() + static_cast<std::ptrdiff_t>(take));
  }
  for (const auto& [name, m] : methods) {
    Mat sub(m->cols(), static_cast<Eigen::Index>(result.sample_indices.size()));
    for (std::size_t col = 0; col < result.sample_indices.size(); ++col)
      sub.col(static_cast<Eigen::Index>(col)) = m->row(result.sample_indices[col]).transpose();
    result.couplings.push_back(std::move(sub));
  }
  return result;
}

}  // namespace pota
