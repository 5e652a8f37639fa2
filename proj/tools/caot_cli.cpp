// caot: command-line front end for the CAOT solver, the training pipeline,
// the pseudo-labeler comparison and the clustering metrics.
//
// Exit status: 0 success, 2 malformed input or usage, 3 solver numeric failure.

#include "pota/caot_solver.hpp"
#include "pota/evaluation.hpp"
#include "pota/io.hpp"
#include "pota/pipeline.hpp"
#include "pota/pseudo_labels.hpp"
#include "pota/report.hpp"
#include "pota/similarity.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pota;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitNumeric = 3;

struct DataOptions {
  std::string embeddings;
  std::string view1;
  std::string view2;
  std::string labels;
  std::string synth;
  int k = 0;
};

struct ConfigOptions {
  std::string file;
  std::vector<std::string> overrides;
};

void add_data_options(CLI::App* cmd, DataOptions& d) {
  cmd->add_option("--embeddings", d.embeddings, "Anchor embeddings (CSV or binary)");
  cmd->add_option("--view1", d.view1, "First augmented view; defaults to the anchors");
  cmd->add_option("--view2", d.view2, "Second augmented view; defaults to the anchors");
  cmd->add_option("--labels", d.labels, "Ground-truth labels, one per line");
  cmd->add_option("--k", d.k, "Number of clusters (file input)");
  cmd->add_option("--synth", d.synth, "Synthetic dataset, e.g. k=5,sizes=100x5,dim=16,sep=8,noise=0.5,seed=1");
}

void add_config_options(CLI::App* cmd, ConfigOptions& c) {
  cmd->add_option("--config", c.file, "key=value configuration file");
  cmd->add_option("--set", c.overrides, "Override one key, key=value (repeatable)");
}

Dataset load_dataset(const DataOptions& d) {
  if (!d.synth.empty()) {
    if (!d.embeddings.empty()) throw ArgumentError("--synth and --embeddings are exclusive");
    return io::parse_synth_spec(d.synth).generate();
  }
  if (d.embeddings.empty()) throw ArgumentError("either --embeddings or --synth is required");
  Dataset data;
  data.v0 = io::read_matrix(d.embeddings);
  data.v1 = d.view1.empty() ? data.v0 : io::read_matrix(d.view1);
  data.v2 = d.view2.empty() ? data.v0 : io::read_matrix(d.view2);
  if (!d.labels.empty()) data.y_true = io::read_labels(d.labels);
  if (d.k > 0) {
    data.k = d.k;
  } else if (data.y_true) {
    int mx = -1;
    for (int y : *data.y_true) mx = std::max(mx, y);
    data.k = mx + 1;
  } else {
    throw ArgumentError("--k is required without --labels");
  }
  data.validate();
  return data;
}

RunConfig load_config(const ConfigOptions& c) {
  RunConfig config;
  if (!c.file.empty()) config = io::parse_config(io::read_file(c.file), c.file);
  for (std::size_t i = 0; i < c.overrides.size(); ++i) {
    const auto& kv = c.overrides[i];
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw io::ParseError("--set", i + 1, "expected key=value, got '" + kv + "'");
    io::apply_config_entry(config, kv.substr(0, eq), kv.substr(eq + 1), "--set", i + 1);
  }
  config.validate();
  return config;
}

std::string format_row(const RVec& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += io::format_real(v(i));
  }
  return out + "\n";
}

// ---------------------------------------------------------------------------
// solve

struct SolveOptions {
  std::string probs;
  std::string logits;
  std::string similarity;
  std::string out_dir;
  CaotParams params;
};

int run_solve(const SolveOptions& o) {
  if (o.probs.empty() == o.logits.empty()) throw ArgumentError("exactly one of --probs or --logits is required");
  Mat p = o.probs.empty() ? softmax_rows(io::read_matrix(o.logits)) : io::read_matrix(o.probs);
  Mat s = o.similarity.empty() ? cosine_matrix(p) : io::read_matrix(o.similarity);
  const OtProblem prob = OtProblem::uniform(std::move(p), std::move(s));
  const TransportPlan plan = caot_solve(prob, o.params);
  const PseudoLabels labels = labels_from_plan(plan.q);

  const fs::path dir(o.out_dir);
  fs::create_directories(dir);
  io::write_matrix_csv(dir / "coupling.csv", plan.q);
  io::write_file(dir / "marginal.csv", format_row(plan.b));
  std::string trace = "iteration,objective,step\n";
  for (std::size_t i = 0; i < plan.objective_trace.size(); ++i)
    trace += std::to_string(i + 1) + "," + io::format_real(plan.objective_trace[i]) + "," +
             io::format_real(plan.step_sizes[i]) + "\n";
  io::write_file(dir / "trace.csv", trace);
  io::write_labels(dir / "labels.txt", labels.labels);

  const auto& pr = o.params;
  json report = {{"plan", plan},
                 {"labels", labels.labels},
                 {"params",
                  {{"eps1", pr.eps1}, {"eps2", pr.eps2}, {"eps3", pr.eps3}, {"t1", pr.t1}, {"t2", pr.t2},
                   {"newton_iters", pr.newton_iters}, {"random_b0", pr.random_b0}, {"seed", pr.seed}}}};
  io::write_file(dir / "report.json", dump_report(report));
  std::printf("objective %s\n", io::format_real(plan.objective_trace.empty() ? 0.0 : plan.objective_trace.back()).c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// pipeline

int run_pipeline(const DataOptions& d, const ConfigOptions& c, const std::string& out_dir) {
  const RunConfig config = load_config(c);
  const Dataset data = load_dataset(d);
  const RunReport report = run_pota(data, config);

  const fs::path dir(out_dir);
  fs::create_directories(dir);
  io::write_file(dir / "config.resolved", io::format_config(config));
  io::write_labels(dir / "labels.txt", report.final_labels);
  json doc = {{"config", config}, {"report", report}};
  if (!d.synth.empty()) doc["synth"] = io::format_synth_spec(io::parse_synth_spec(d.synth));
  io::write_file(dir / "report.json", dump_report(doc));
  if (report.final_acc)
    std::printf("ACC %.4f\nNMI %.4f\n", *report.final_acc, *report.final_nmi);
  return 0;
}

// ---------------------------------------------------------------------------
// bench

int run_bench(const DataOptions& d, const ConfigOptions& c, const std::string& out_dir, int seeds) {
  if (seeds < 1) throw ArgumentError("--seeds must be >= 1");
  const RunConfig base = load_config(c);
  std::optional<io::SynthSpec> synth;
  if (!d.synth.empty()) synth = io::parse_synth_spec(d.synth);

  std::vector<BenchResult> results;
  json per_seed = json::array();
  for (int r = 0; r < seeds; ++r) {
    RunConfig config = base;
    config.seed = base.seed + static_cast<std::uint64_t>(r);
    Dataset data;
    if (synth) {
      io::SynthSpec spec = *synth;
      spec.seed = synth->seed + static_cast<std::uint64_t>(r);
      data = spec.generate();
    } else {
      data = load_dataset(d);
    }
    if (!data.y_true) throw ArgumentError("bench needs ground-truth labels (--labels)");
    results.push_back(pseudo_label_bench(data, config));
    per_seed.push_back({{"seed", config.seed}, {"rows", results.back().rows}});
  }

  std::vector<BenchRow> mean = results.front().rows;
  for (auto& row : mean) row.acc = row.nmi = 0.0;
  for (const auto& res : results)
    for (std::size_t m = 0; m < mean.size(); ++m) {
      mean[m].acc += res.rows[m].acc / seeds;
      mean[m].nmi += res.rows[m].nmi / seeds;
    }

  const fs::path dir(out_dir);
  fs::create_directories(dir);
  const BenchResult& first = results.front();
  for (std::size_t m = 0; m < first.rows.size(); ++m)
    io::write_matrix_csv(dir / (first.rows[m].method + ".csv"), first.couplings[m]);
  json doc = {{"config", base},
              {"seeds", seeds},
              {"mean", mean},
              {"per_seed", per_seed},
              {"sample_indices", first.sample_indices}};
  if (synth) doc["synth"] = io::format_synth_spec(*synth);
  io::write_file(dir / "bench.json", dump_report(doc));

  std::printf("%-12s %8s %8s\n", "method", "ACC", "NMI");
  for (const auto& row : mean) std::printf("%-12s %8.4f %8.4f\n", row.method.c_str(), row.acc, row.nmi);
  return 0;
}

// ---------------------------------------------------------------------------
// eval

int run_eval(const std::string& truth, const std::string& pred, const std::string& out) {
  const LabelPair pair{io::read_labels(truth), io::read_labels(pred)};
  if (pair.y_true.size() != pair.y_pred.size())
    throw ArgumentError("label files differ in length (" + std::to_string(pair.y_true.size()) + " vs " +
                        std::to_string(pair.y_pred.size()) + ")");
  const double acc = accuracy(pair);
  const double nmi_v = nmi(pair);
  std::printf("ACC %.4f\nNMI %.4f\n", acc, nmi_v);
  if (!out.empty()) io::write_file(out, dump_report({{"acc", acc}, {"nmi", nmi_v}, {"n", pair.y_true.size()}}));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Consistency-aware adaptive optimal transport for pseudo-labelling"};
  app.require_subcommand(1);

  SolveOptions solve;
  auto* cmd_solve = app.add_subcommand("solve", "Solve one CAOT problem");
  cmd_solve->add_option("--probs", solve.probs, "N x K probability matrix");
  cmd_solve->add_option("--logits", solve.logits, "N x K logits, row-softmaxed");
  cmd_solve->add_option("--similarity", solve.similarity, "N x N semantic similarity (default: cosine of P)");
  cmd_solve->add_option("--out-dir", solve.out_dir, "Output directory")->required();
  cmd_solve->add_option("--eps1", solve.params.eps1, "Entropy weight")->capture_default_str();
  cmd_solve->add_option("--eps2", solve.params.eps2, "Marginal penalty weight")->capture_default_str();
  cmd_solve->add_option("--eps3", solve.params.eps3, "Semantic weight")->capture_default_str();
  cmd_solve->add_option("--t1", solve.params.t1, "Outer iterations")->capture_default_str();
  cmd_solve->add_option("--t2", solve.params.t2, "Inner rounds")->capture_default_str();
  cmd_solve->add_option("--newton-iters", solve.params.newton_iters, "Newton iterations")->capture_default_str();
  cmd_solve->add_flag("--random-b0", solve.params.random_b0, "Random initial cluster marginal");
  cmd_solve->add_option("--seed", solve.params.seed, "Seed for --random-b0")->capture_default_str();

  DataOptions pipe_data;
  ConfigOptions pipe_cfg;
  std::string pipe_out;
  auto* cmd_pipe = app.add_subcommand("pipeline", "Train the heads and report per-epoch results");
  add_data_options(cmd_pipe, pipe_data);
  add_config_options(cmd_pipe, pipe_cfg);
  cmd_pipe->add_option("--out-dir", pipe_out, "Output directory")->required();

  DataOptions bench_data;
  ConfigOptions bench_cfg;
  std::string bench_out;
  int bench_seeds = 1;
  auto* cmd_bench = app.add_subcommand("bench", "Compare prediction, AOT and CAOT pseudo-labels");
  add_data_options(cmd_bench, bench_data);
  add_config_options(cmd_bench, bench_cfg);
  cmd_bench->add_option("--out-dir", bench_out, "Output directory")->required();
  cmd_bench->add_option("--seeds", bench_seeds, "Number of consecutive seeds")->capture_default_str();

  std::string eval_true, eval_pred, eval_out;
  auto* cmd_eval = app.add_subcommand("eval", "Clustering accuracy and NMI");
  cmd_eval->add_option("--true", eval_true, "Ground-truth labels")->required();
  cmd_eval->add_option("--pred", eval_pred, "Predicted labels")->required();
  cmd_eval->add_option("--out", eval_out, "JSON output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  try {
    if (*cmd_solve) return run_solve(solve);
    if (*cmd_pipe) return run_pipeline(pipe_data, pipe_cfg, pipe_out);
    if (*cmd_bench) return run_bench(bench_data, bench_cfg, bench_out, bench_seeds);
    if (*cmd_eval) return run_eval(eval_true, eval_pred, eval_out);
  } catch (const io::ParseError& e) {
    std::cerr << "caot: " << e.what() << "\n";
    return kExitInput;
  } catch (const NumericError& e) {
    std::cerr << "caot: numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const ArgumentError& e) {
    std::cerr << "caot: " << e.what() << "\n";
    return kExitInput;
  } catch (const DomainError& e) {
    std::cerr << "caot: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "caot: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}
