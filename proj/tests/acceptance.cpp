// Acceptance checks. One PASS/FAIL line per criterion; exit status 1 when any
// fails. Usage: acceptance <path to caot binary>

#include "helpers.hpp"
#include "pota/caot_solver.hpp"
#include "pota/evaluation.hpp"
#include "pota/io.hpp"
#include "pota/pipeline.hpp"
#include "pota/pseudo_labels.hpp"
#include "pota/similarity.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>

using namespace pota;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
  std::printf("[%s] C%-2d %-28s %s\n", ok ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

OtProblem random_instance(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> nd(8, 64), kd(2, 8);
  const int n = nd(rng), k = kd(rng);
  const Mat p = test::random_probs(n, k, rng, 3.0);
  return OtProblem::uniform(p, cosine_matrix(p));
}

void feasibility_and_monotone() {
  std::mt19937_64 rng(2024);
  double row_err = 0, mass_err = 0, min_q = 1, min_b = 1, max_b = 0;
  int bad_traces = 0;
  const auto t0 = Clock::now();
  std::vector<TransportPlan> plans;
  for (int i = 0; i < 100; ++i) {
    const OtProblem prob = random_instance(rng);
    const TransportPlan plan = caot_solve(prob, CaotParams{});
    row_err = std::max(row_err, (plan.q.rowwise().sum() - prob.a).cwiseAbs().maxCoeff());
    mass_err = std::max(mass_err, std::abs(plan.b.sum() - 1.0));
    min_q = std::min(min_q, plan.q.minCoeff());
    min_b = std::min(min_b, plan.b.minCoeff());
    max_b = std::max(max_b, plan.b.maxCoeff());
    plans.push_back(plan);
  }
  const double dt = seconds_since(t0);
  for (const auto& plan : plans) {
    for (std::size_t t = 1; t < plan.objective_trace.size(); ++t) {
      if (plan.objective_trace[t] > plan.objective_trace[t - 1]) {
        ++bad_traces;
        break;
      }
    }
  }
  const bool ok = row_err < 1e-9 && mass_err < 1e-8 && min_q > 0 && min_b > 0 && max_b < 1 && dt < 1.0;
  std::ostringstream os;
  os << "row err " << fmt("%.1e", row_err) << ", |sum b - 1| " << fmt("%.1e", mass_err) << ", min Q "
     << fmt("%.1e", min_q) << ", b in [" << fmt("%.3g", min_b) << ", " << fmt("%.3g", max_b) << "], "
     << fmt("%.3f", dt) << " s";
  report(1, "feasibility", ok, os.str());
  report(2, "monotone objective", bad_traces == 0, std::to_string(100 - bad_traces) + "/100 traces non-increasing");
}

void sinkhorn_reduction() {
  std::mt19937_64 rng(77);
  double worst = 0;
  for (int i = 0; i < 20; ++i) {
    const OtProblem prob = random_instance(rng);
    CaotParams params;
    params.eps3 = 0.0;
    params.eps2 = 1e4;
    params.t2 = 200;
    const TransportPlan plan = caot_solve(prob, params);
    const RVec b = RVec::Constant(prob.k(), 1.0 / static_cast<double>(prob.k()));
    const Mat cost = -clamp_log(prob.p, params.prob_floor);
    const Mat ref = sinkhorn_fixed(cost, prob.a, b, params.eps1, 200);
    worst = std::max(worst, test::max_abs(plan.q - ref));
  }
  report(3, "fixed-marginal reduction", worst < 1e-5, "max |Q - Q_sinkhorn| " + fmt("%.2e", worst));
}

void marginal_uniformity() {
  std::mt19937_64 rng(11);
  Mat logits = test::random_mat(48, 4, rng);
  logits.col(0).array() += 2.0;
  logits.col(1).array() += 1.0;
  const Mat p = softmax_rows(logits);
  const OtProblem prob = OtProblem::uniform(p, cosine_matrix(p));
  std::vector<double> dev;
  for (double e2 : {0.03, 3.5, 100.0}) {
    CaotParams params;
    params.eps2 = e2;
    const TransportPlan plan = caot_solve(prob, params);
    dev.push_back((plan.b.array() - 0.25).abs().maxCoeff());
  }
  const bool ok = dev[1] <= dev[0] && dev[2] <= dev[1];
  report(4, "marginal uniformity", ok,
         "max|b - 1/K| = " + fmt("%.4f", dev[0]) + ", " + fmt("%.4f", dev[1]) + ", " + fmt("%.4f", dev[2]));
}

void gradients() {
  std::mt19937_64 rng(5);
  double worst_f = 0;
  for (int i = 0; i < 20; ++i) {
    const OtProblem prob = random_instance(rng);
    const Mat q = test::random_mat(prob.n(), prob.k(), rng, 0.1, 1.0) / static_cast<double>(prob.n() * prob.k());
    const double eps3 = 25.0;
    const Mat g = grad_f(q, prob.p, prob.s, eps3);
    Mat fd(q.rows(), q.cols());
    const double h = 1e-7;
    for (Eigen::Index t = 0; t < q.size(); ++t) {
      Mat qp = q, qm = q;
      qp.data()[t] += h;
      qm.data()[t] -= h;
      fd.data()[t] = (smooth_part(qp, prob.p, prob.s, eps3) - smooth_part(qm, prob.p, prob.s, eps3)) / (2 * h);
    }
    worst_f = std::max(worst_f, test::rel_err(g, fd));
  }

  double worst_h = 0;
  for (int i = 0; i < 4; ++i) {
    const Mat v0 = test::random_mat(10, 6, rng), v1 = test::random_mat(10, 6, rng), v2 = test::random_mat(10, 6, rng);
    const Heads heads = Heads::init(6, 4, 3, rng);
    PseudoLabels labels{std::vector<int>(10), 3};
    for (int j = 0; j < 10; ++j) labels.labels[static_cast<std::size_t>(j)] = j % 3;
    RunConfig c;
    c.d2 = 4;
    for (Stage stage : {Stage::warmup, Stage::train}) {
      const HeadGrads a = head_gradients(v0, v1, v2, heads, labels, stage, c, GradMode::analytic);
      const HeadGrads f = head_gradients(v0, v1, v2, heads, labels, stage, c, GradMode::finite_difference);
      for (auto [x, y] : {std::pair{&a.w_k1, &f.w_k1}, {&a.w_k2, &f.w_k2}, {&a.w_t, &f.w_t}, {&a.g_z, &f.g_z}}) {
        worst_h = std::max(worst_h, test::rel_err(*x, *y));
      }
      if (stage == Stage::train) worst_h = std::max(worst_h, test::rel_err(a.g_p, f.g_p));
    }
  }
  report(5, "gradients", worst_f < 1e-6 && worst_h < 1e-4,
         "grad_f rel " + fmt("%.2e", worst_f) + ", heads rel " + fmt("%.2e", worst_h));
}

// Independent oracle: each b_j(h) by bisection on its quadratic, h by
// bisection on sum_j b_j(h) = 1.
double root_in_unit(double c, double eps2) {
  auto q = [&](double b) { return c * b * b - (c + 2 * eps2) * b + eps2; };
  double lo = 0.0, hi = 1.0;  // q(0) = eps2 > 0, q(1) = -eps2 < 0
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (q(mid) > 0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double mass_at(const RVec& g, double h, double eps2) {
  double s = 0;
  for (Eigen::Index j = 0; j < g.size(); ++j) s += root_in_unit(g(j) - h, eps2);
  return s;
}

double h_bisect(const RVec& g, double eps2) {
  // Mass grows with h.
  double lo = g.minCoeff() - 1.0, hi = g.maxCoeff() + 1.0;
  while (mass_at(g, lo, eps2) > 1.0) lo -= hi - lo;
  while (mass_at(g, hi, eps2) < 1.0) hi += hi - lo;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (mass_at(g, mid, eps2) < 1.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

void newton_solver() {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> kd(2, 8);
  double worst_res = 0, worst_b = 0;
  for (int i = 0; i < 50; ++i) {
    const RVec g = test::random_mat(kd(rng), 1, rng, -3.0, 3.0);
    for (double e2 : {0.03, 1.0, 100.0}) {
      const double h = newton_h(g, e2, 0.0, 10);
      const RVec b = b_of_h(g, h, e2);
      worst_res = std::max(worst_res, std::abs(b.sum() - 1.0));
      const RVec ref = b_of_h(g, h_bisect(g, e2), e2);
      worst_b = std::max(worst_b, (b - ref).cwiseAbs().maxCoeff());
    }
  }
  report(6, "marginal root solve", worst_res < 1e-8 && worst_b < 1e-8,
         "|sum b - 1| " + fmt("%.1e", worst_res) + ", vs bisection " + fmt("%.1e", worst_b));
}

bool partner_consistent(const std::vector<int>& l) { return l[0] == l[1] && l[2] == l[3]; }

void semantic_flip() {
  // Samples 1-2 and 3-4 are partners; the second of each pair leans to the
  // other cluster.
  Mat p(4, 2);
  p << 0.9, 0.1, 0.45, 0.55, 0.1, 0.9, 0.55, 0.45;
  Mat s = Mat::Zero(4, 4);
  s(0, 1) = s(1, 0) = s(2, 3) = s(3, 2) = 5.0;
  const OtProblem prob = OtProblem::uniform(p, s);
  std::string text;
  bool ok = true;
  for (double e3 : {0.0, 25.0}) {
    CaotParams params;
    params.eps3 = e3;
    const auto a = labels_from_plan(caot_solve(prob, params).q).labels;
    const auto b = labels_from_plan(caot_solve(prob, params).q).labels;
    ok = ok && a == b && partner_consistent(a) == (e3 > 0);
    text += (text.empty() ? "" : ", ") + std::string("eps3=") + fmt("%g", e3) + " labels ";
    for (int x : a) text += std::to_string(x);
  }
  report(7, "semantic flip", ok, text);
}

void bench_ordering() {
  RunConfig c;
  c.e_total = 30;
  c.e_warm = 10;
  c.bench_eps2 = 0.06;
  double mean[3] = {0, 0, 0};
  int ordered = 0;
  const int seeds = 20;
  const auto t0 = Clock::now();
  for (int sd = 1; sd <= seeds; ++sd) {
    const Dataset d = synth_dataset(5, {200, 120, 80, 60, 40}, 16, 6.0, 0.5, static_cast<std::uint64_t>(sd));
    c.seed = static_cast<std::uint64_t>(sd);
    const BenchResult r = pseudo_label_bench(d, c);
    for (int m = 0; m < 3; ++m) mean[m] += r.rows[static_cast<std::size_t>(m)].acc / seeds;
    ordered += r.rows[2].acc >= r.rows[1].acc && r.rows[1].acc >= r.rows[0].acc;
  }
  const double dt = seconds_since(t0);
  const bool ok = mean[2] >= mean[1] && mean[1] >= mean[0] && mean[2] - mean[0] >= 0.02 && dt < 60.0;
  std::ostringstream os;
  os << "mean ACC prediction " << fmt("%.4f", mean[0]) << ", aot " << fmt("%.4f", mean[1]) << ", caot "
     << fmt("%.4f", mean[2]) << " (" << ordered << "/20 seeds ordered), " << fmt("%.1f", dt) << " s";
  report(8, "pseudo-label ordering", ok, os.str());
}

void metrics() {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> kd(1, 6);
  int agree = 0;
  for (int t = 0; t < 200; ++t) {
    const int k = kd(rng);
    const Mat cost = test::random_mat(k, k, rng, 0.0, 10.0);
    const auto assign = hungarian(cost);
    double got = 0;
    for (int r = 0; r < k; ++r) got += cost(r, assign[static_cast<std::size_t>(r)]);
    std::vector<int> perm(static_cast<std::size_t>(k));
    std::iota(perm.begin(), perm.end(), 0);
    double best = 1e300;
    do {
      double s = 0;
      for (int r = 0; r < k; ++r) s += cost(r, perm[static_cast<std::size_t>(r)]);
      best = std::min(best, s);
    } while (std::next_permutation(perm.begin(), perm.end()));
    agree += std::abs(got - best) < 1e-9;
  }
  const LabelPair same{{0, 1, 2, 0, 1, 2}, {0, 1, 2, 0, 1, 2}};
  const LabelPair indep{{0, 0, 1, 1}, {0, 1, 0, 1}};
  const double a1 = accuracy(same), n1 = nmi(same), a2 = accuracy(indep), n2 = nmi(indep);
  const bool ok = agree == 200 && std::abs(a1 - 1) < 1e-12 && std::abs(n1 - 1) < 1e-12 &&
                  std::abs(a2 - 0.5) < 1e-12 && std::abs(n2) < 1e-12;
  report(9, "metrics", ok,
         std::to_string(agree) + "/200 assignments optimal, identity " + fmt("%.3f", a1) + "/" + fmt("%.3f", n1) +
             ", independent " + fmt("%.3f", a2) + "/" + fmt("%.3f", n2));
}

void end_to_end() {
  int wins = 0;
  double slowest = 0;
  std::string accs;
  for (int sd = 1; sd <= 10; ++sd) {
    const Dataset d = synth_dataset(5, std::vector<int>(5, 100), 16, 8.0, 0.5, static_cast<std::uint64_t>(sd));
    RunConfig c;
    c.seed = static_cast<std::uint64_t>(sd);
    const auto t0 = Clock::now();
    const RunReport r = run_pota(d, c);
    slowest = std::max(slowest, seconds_since(t0));
    wins += *r.final_acc >= *r.kmeans_acc;
    accs += (accs.empty() ? "" : " ") + fmt("%.3f", *r.final_acc) + "/" + fmt("%.3f", *r.kmeans_acc);
  }
  report(10, "end-to-end run", wins >= 8 && slowest < 120.0,
         std::to_string(wins) + "/10 seeds final >= k-means, slowest " + fmt("%.1f", slowest) +
             " s; final/k-means: " + accs);
}

std::string tree_bytes(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::string all;
  for (const auto& f : files) all += fs::relative(f, dir).string() + "\n" + io::read_file(f);
  return all;
}

bool run_twice(const std::string& bin, const fs::path& root, const std::string& name, const std::string& args) {
  std::string outputs[2];
  for (int rep = 0; rep < 2; ++rep) {
    const fs::path out = root / (name + std::to_string(rep));
    fs::create_directories(out);
    const std::string cmd = "\"" + bin + "\" " + args + " --out" + (name == "eval" ? "" : "-dir") + " \"" +
                            (name == "eval" ? (out / "eval.json").string() : out.string()) + "\" > \"" +
                            (root / (name + std::to_string(rep) + ".stdout")).string() + "\" 2>&1";
    if (std::system(cmd.c_str()) != 0) return false;
    outputs[rep] = tree_bytes(out) + io::read_file(root / (name + std::to_string(rep) + ".stdout"));
  }
  return !outputs[0].empty() && outputs[0] == outputs[1];
}

void determinism(const std::string& bin) {
  if (bin.empty()) {
    report(11, "CLI determinism", false, "no binary given");
    return;
  }
  const fs::path root = fs::temp_directory_path() / "pota_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);
  std::mt19937_64 rng(8);
  io::write_matrix_csv(root / "p.csv", test::random_probs(24, 4, rng));
  io::write_labels(root / "t.txt", {0, 0, 1, 1, 2, 2});
  io::write_labels(root / "q.txt", {1, 1, 0, 2, 2, 2});
  const std::string synth = "--synth k=3,sizes=30/20/10,dim=6,sep=8,noise=0.5,seed=2 --set e_total=4 --set e_warm=2";

  std::string text;
  bool ok = true;
  const std::pair<std::string, std::string> cases[] = {
      {"solve", "solve --probs \"" + (root / "p.csv").string() + "\" --eps3 25"},
      {"pipeline", "pipeline " + synth},
      {"bench", "bench " + synth + " --seeds 2"},
      {"eval", "eval --true \"" + (root / "t.txt").string() + "\" --pred \"" + (root / "q.txt").string() + "\""},
  };
  for (const auto& [name, args] : cases) {
    const bool same = run_twice(bin, root, name, args);
    ok = ok && same;
    text += (text.empty() ? "" : ", ") + name + (same ? " identical" : " DIFFERS");
  }
  fs::remove_all(root);
  report(11, "CLI determinism", ok, text);
}

}  // namespace

int main(int argc, char** argv) {
  const std::string bin = argc > 1 ? argv[1] : "";
  feasibility_and_monotone();
  sinkhorn_reduction();
  marginal_uniformity();
  gradients();
  newton_solver();
  semantic_flip();
  bench_ordering();
  metrics();
  end_to_end();
  determinism(bin);
  std::printf("%d/11 criteria passed\n", 11 - failures);
  return failures ? 1 : 0;
}
