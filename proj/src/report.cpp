#include "pota/report.hpp"

namespace pota {

using nlohmann::json;

namespace {

template <typename T>
void put_optional(json& j, const char* key, const std::optional<T>& v) {
  j[key] = v ? json(*v) : json(nullptr);
}

template <typename T>
void get_optional(const json& j, const char* key, std::optional<T>& v) {
  if (!j.contains(key) || j.at(key).is_null()) {
    v.reset();
  } else {
    v = j.at(key).get<T>();
  }
}

}  // namespace

json mat_to_json(const Mat& m) {
  json j = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    j.push_back(std::move(row));
  }
  return j;
}

void mat_from_json(const json& j, Mat& m) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows ? static_cast<Eigen::Index>(j.at(0).size()) : 0;
  m.resize(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j.at(static_cast<std::size_t>(i));
    if (static_cast<Eigen::Index>(row.size()) != cols) throw ArgumentError("ragged matrix in JSON");
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = row.at(static_cast<std::size_t>(k)).get<double>();
  }
}

void to_json(json& j, const RunConfig& c) {
  j = json{{"e_total", c.e_total},
           {"e_warm", c.e_warm},
           {"batch", c.batch},
           {"d2", c.d2},
           {"lambda", c.lambda},
           {"tau_a", c.temps.tau_a},
           {"tau_i", c.temps.tau_i},
           {"lr", c.lr},
           {"seed", c.seed},
           {"grad_mode", c.grad_mode == GradMode::analytic ? "analytic" : "fd"},
           {"fd_step", c.fd_step},
           {"eps1", c.caot.eps1},
           {"eps2", c.caot.eps2},
           {"eps3", c.caot.eps3},
           {"t1", c.caot.t1},
           {"t2", c.caot.t2},
           {"newton_iters", c.caot.newton_iters},
           {"armijo_c1", c.caot.armijo_c1},
           {"armijo_shrink", c.caot.armijo_shrink},
           {"armijo_max_backtracks", c.caot.armijo_max_backtracks},
           {"prob_floor", c.caot.prob_floor},
           {"random_b0", c.caot.random_b0},
           {"b0_seed", c.caot.seed},
           {"use_cos", c.use_cos},
           {"use_att", c.use_att},
           {"use_instance_loss", c.use_instance_loss},
           {"use_cluster_loss", c.use_cluster_loss},
           {"bench_per_class", c.bench_per_class}};
  put_optional(j, "bench_eps2", c.bench_eps2);
}

void from_json(const json& j, RunConfig& c) {
  j.at("e_total").get_to(c.e_total);
  j.at("e_warm").get_to(c.e_warm);
  j.at("batch").get_to(c.batch);
  j.at("d2").get_to(c.d2);
  j.at("lambda").get_to(c.lambda);
  j.at("tau_a").get_to(c.temps.tau_a);
  j.at("tau_i").get_to(c.temps.tau_i);
  j.at("lr").get_to(c.lr);
  j.at("seed").get_to(c.seed);
  c.grad_mode = j.at("grad_mode").get<std::string>() == "analytic" ? GradMode::analytic : GradMode::finite_difference;
  j.at("fd_step").get_to(c.fd_step);
  j.at("eps1").get_to(c.caot.eps1);
  j.at("eps2").get_to(c.caot.eps2);
  j.at("eps3").get_to(c.caot.eps3);
  j.at("t1").get_to(c.caot.t1);
  j.at("t2").get_to(c.caot.t2);
  j.at("newton_iters").get_to(c.caot.newton_iters);
  j.at("armijo_c1").get_to(c.caot.armijo_c1);
  j.at("armijo_shrink").get_to(c.caot.armijo_shrink);
  j.at("armijo_max_backtracks").get_to(c.caot.armijo_max_backtracks);
  j.at("prob_floor").get_to(c.caot.prob_floor);
  j.at("random_b0").get_to(c.caot.random_b0);
  j.at("b0_seed").get_to(c.caot.seed);
  j.at("use_cos").get_to(c.use_cos);
  j.at("use_att").get_to(c.use_att);
  j.at("use_instance_loss").get_to(c.use_instance_loss);
  j.at("use_cluster_loss").get_to(c.use_cluster_loss);
  j.at("bench_per_class").get_to(c.bench_per_class);
  get_optional(j, "bench_eps2", c.bench_eps2);
}

void to_json(json& j, const TransportPlan& p) {
  j = json{{"q", mat_to_json(p.q)},
           {"b", std::vector<double>(p.b.data(), p.b.data() + p.b.size())},
           {"f", std::vector<double>(p.f.data(), p.f.data() + p.f.size())},
           {"g", std::vector<double>(p.g.data(), p.g.data() + p.g.size())},
           {"objective_trace", p.objective_trace},
           {"step_sizes", p.step_sizes}};
}

void from_json(const json& j, TransportPlan& p) {
  mat_from_json(j.at("q"), p.q);
  auto vec = [&](const char* key) {
    const auto v = j.at(key).get<std::vector<double>>();
    return RVec(Eigen::Map<const RVec>(v.data(), static_cast<Eigen::Index>(v.size())));
  };
  p.b = vec("b");
  p.f = vec("f");
  p.g = vec("g");
  j.at("objective_trace").get_to(p.objective_trace);
  j.at("step_sizes").get_to(p.step_sizes);
}

void to_json(json& j, const EpochRecord& r) {
  j = json{{"epoch", r.epoch},
           {"warmup", r.warmup},
           {"label_source", r.label_source},
           {"loss_attention", r.loss_attention},
           {"loss_instance", r.loss_instance},
           {"loss_cluster", r.loss_cluster},
           {"loss_total", r.loss_total},
           {"objective_trace", r.objective_trace}};
  put_optional(j, "pseudo_label_acc", r.pseudo_label_acc);
}

void from_json(const json& j, EpochRecord& r) {
  j.at("epoch").get_to(r.epoch);
  j.at("warmup").get_to(r.warmup);
  j.at("label_source").get_to(r.label_source);
  j.at("loss_attention").get_to(r.loss_attention);
  j.at("loss_instance").get_to(r.loss_instance);
  j.at("loss_cluster").get_to(r.loss_cluster);
  j.at("loss_total").get_to(r.loss_total);
  j.at("objective_trace").get_to(r.objective_trace);
  get_optional(j, "pseudo_label_acc", r.pseudo_label_acc);
}

void to_json(json& j, const Heads& h) {
  j = json{{"g_z", mat_to_json(h.g_z)},
           {"g_p", mat_to_json(h.g_p)},
           {"w_k1", mat_to_json(h.g_h.w_k1)},
           {"w_k2", mat_to_json(h.g_h.w_k2)},
           {"w_t", mat_to_json(h.g_h.w_t)},
           {"scale", h.g_h.scale}};
}

void from_json(const json& j, Heads& h) {
  mat_from_json(j.at("g_z"), h.g_z);
  mat_from_json(j.at("g_p"), h.g_p);
  mat_from_json(j.at("w_k1"), h.g_h.w_k1);
  mat_from_json(j.at("w_k2"), h.g_h.w_k2);
  mat_from_json(j.at("w_t"), h.g_h.w_t);
  j.at("scale").get_to(h.g_h.scale);
}

void to_json(json& j, const RunReport& r) {
  j = json{{"epochs", r.epochs},
           {"final_labels", r.final_labels},
           {"last_coupling", mat_to_json(r.last_coupling)},
           {"heads", r.heads}};
  put_optional(j, "kmeans_acc", r.kmeans_acc);
  put_optional(j, "kmeans_nmi", r.kmeans_nmi);
  put_optional(j, "final_acc", r.final_acc);
  put_optional(j, "final_nmi", r.final_nmi);
}

void from_json(const json& j, RunReport& r) {
  j.at("epochs").get_to(r.epochs);
  j.at("final_labels").get_to(r.final_labels);
  mat_from_json(j.at("last_coupling"), r.last_coupling);
  j.at("heads").get_to(r.heads);
  get_optional(j, "kmeans_acc", r.kmeans_acc);
  get_optional(j, "kmeans_nmi", r.kmeans_nmi);
  get_optional(j, "final_acc", r.final_acc);
  get_optional(j, "final_nmi", r.final_nmi);
}

void to_json(json& j, const BenchRow& r) { j = json{{"method", r.method}, {"acc", r.acc}, {"nmi", r.nmi}}; }

void from_json(const json& j, BenchRow& r) {
  j.at("method").get_to(r.method);
  j.at("acc").get_to(r.acc);
  j.at("nmi").get_to(r.nmi);
}

std::string dump_report(const json& j) { return j.dump(2) + "\n"; }

}  // namespace pota
