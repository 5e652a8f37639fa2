#pragma once

// Desk-scale training loop: k-means warm-up, CAOT pseudo-labelling rounds,
// and gradient descent on the projection, clustering and attention heads of
// a frozen (identity) encoder.

#include "pota/caot_solver.hpp"
#include "pota/core.hpp"
#include "pota/losses.hpp"
#include "pota/pseudo_labels.hpp"
#include "pota/similarity.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace pota {

struct Dataset {
  Mat v0;  // anchors
  Mat v1;  // augmented view 1
  Mat v2;  // augmented view 2
  std::optional<std::vector<int>> y_true;
  int k = 2;

  void validate() const;
  Eigen::Index size() const { return v0.rows(); }
  Eigen::Index dim() const { return v0.cols(); }
};

struct Heads {
  Mat g_z;  // D1 x D2 projection
  Mat g_p;  // D1 x K clustering head, row-softmax output
  AttentionParams g_h;

  static Heads init(Eigen::Index d1, Eigen::Index d2, int k, std::mt19937_64& rng);
  void validate() const;
};

enum class GradMode { finite_difference, analytic };

struct RunConfig {
  int e_total = 200;
  int e_warm = 60;
  int batch = 200;
  int d2 = 8;
  double lambda = 10.0;
  Temperatures temps;
  CaotParams caot;
  double lr = 0.05;
  std::uint64_t seed = 0;
  GradMode grad_mode = GradMode::analytic;
  double fd_step = 1e-5;
  // Ablation switches.
  bool use_cos = true;             // S^cos in the semantic matrix
  bool use_att = true;             // S^att in the semantic matrix
  bool use_instance_loss = true;   // lambda L_I term
  bool use_cluster_loss = true;    // L_P term
  // Samples per class in the bench coupling dump.
  int bench_per_class = 5;
  // Marginal weight of the bench comparison solves; caot.eps2 when unset.
  std::optional<double> bench_eps2;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  bool warmup = true;
  std::string label_source;  // "kmeans" or "caot"
  double loss_attention = 0.0;
  double loss_instance = 0.0;
  double loss_cluster = 0.0;
  double loss_total = 0.0;
  std::optional<double> pseudo_label_acc;
  std::vector<double> objective_trace;  // first CAOT solve of the epoch
};

struct RunReport {
  std::vector<EpochRecord> epochs;
  std::optional<double> kmeans_acc;
  std::optional<double> kmeans_nmi;
  std::optional<double> final_acc;
  std::optional<double> final_nmi;
  std::vector<int> final_labels;
  Mat last_coupling;  // most recent CAOT plan, empty if none was solved
  Heads heads;
};

struct KMeansResult {
  PseudoLabels labels;
  Mat centers;
  double inertia = 0.0;
  int iterations = 0;
};

/// k-means++ seeding followed by Lloyd iterations (at most 300).
KMeansResult kmeans_fit(const Mat& v, int k, std::uint64_t seed);
PseudoLabels kmeans(const Mat& v, int k, std::uint64_t seed);

/// Gaussian mixture with class centres at pairwise distance `separation`
/// and unit within-class spread; views are anchors plus N(0, noise^2).
Dataset synth_dataset(int k, const std::vector<int>& sizes, int dim, double separation, double noise,
                      std::uint64_t seed);

struct ForwardOut {
  Mat z1, z2;
  Mat logits0, logits1, logits2;
  Mat p0, p1, p2;
  AttentionOut att1, att2;
};

ForwardOut forward_heads(const Mat& v0, const Mat& v1, const Mat& v2, const Heads& heads);

/// Loss terms for one batch with the routing of the training step. `labels`
/// drive the same-cluster sets and, in the train stage, the cluster loss.
struct BatchLosses {
  double attention = 0.0;
  double instance = 0.0;
  double cluster = 0.0;
  double total = 0.0;
};
BatchLosses batch_losses(const Mat& v0, const Mat& v1, const Mat& v2, const Heads& heads,
                         const PseudoLabels& labels, Stage stage, const RunConfig& config);

/// Gradients of the routed losses: L_A -> g_h, L_P -> g_p, lambda L_I -> g_z.
struct HeadGrads {
  Mat g_z;
  Mat g_p;
  Mat w_k1, w_k2, w_t;
};
HeadGrads head_gradients(const Mat& v0, const Mat& v1, const Mat& v2, const Heads& heads,
                         const PseudoLabels& labels, Stage stage, const RunConfig& config,
                         GradMode mode);

/// Semantic matrix for CAOT from the current heads.
Mat semantic_matrix(const Mat& p0, const AttentionOut& att1, const AttentionOut& att2, bool warmup,
                    const RunConfig& config);

RunReport run_pota(const Dataset& data, const RunConfig& config);

struct BenchRow {
  std::string method;
  double acc = 0.0;
  double nmi = 0.0;
};

struct BenchResult {
  std::vector<BenchRow> rows;            // prediction, aot, caot
  std::vector<Mat> couplings;            // K x (per_class * K), same order as rows
  std::vector<int> sample_indices;       // columns of the couplings
  RunReport trained;                     // state the comparison was made in
};

BenchResult pseudo_label_bench(const Dataset& data, const RunConfig& config);

}  // namespace pota
