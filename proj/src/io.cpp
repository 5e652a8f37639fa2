#include "pota/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace pota::io {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

bool parse_double(const std::string& tok, double& out) {
  if (tok.empty()) return false;
  const char* first = tok.data();
  if (*first == '+') ++first;
  const auto res = std::from_chars(first, tok.data() + tok.size(), out);
  return res.ec == std::errc() && res.ptr == tok.data() + tok.size() && std::isfinite(out);
}

template <typename Int>
bool parse_int(const std::string& tok, Int& out) {
  if (tok.empty()) return false;
  const char* first = tok.data();
  if (*first == '+') ++first;
  const auto res = std::from_chars(first, tok.data() + tok.size(), out);
  return res.ec == std::errc() && res.ptr == tok.data() + tok.size();
}

bool is_count(const std::string& tok) {
  return !tok.empty() && std::all_of(tok.begin(), tok.end(), [](char c) { return c >= '0' && c <= '9'; });
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xffu));
}

std::uint32_t get_u32(const std::string& in, std::size_t off) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[off + b])) << (8 * b);
  return v;
}

bool parse_bool(const std::string& tok, bool& out) {
  if (tok == "1" || tok == "true" || tok == "yes" || tok == "on") {
    out = true;
    return true;
  }
  if (tok == "0" || tok == "false" || tok == "no" || tok == "off") {
    out = false;
    return true;
  }
  return false;
}

}  // namespace

ParseError::ParseError(const std::string& source, std::size_t line, const std::string& msg)
    : std::runtime_error(source + (line ? ":" + std::to_string(line) : std::string()) + ": " + msg),
      line_(line) {}

std::string format_real(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

Mat parse_matrix_csv(const std::string& text, const std::string& source) {
  struct Row {
    std::size_t line;
    std::vector<std::string> tokens;
  };
  std::vector<Row> rows;
  const auto lines = lines_of(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string t = trim(lines[i]);
    if (t.empty()) continue;
    rows.push_back({i + 1, split(t, ',')});
  }
  if (rows.empty()) throw ParseError(source, 0, "no data rows");

  std::size_t first = 0;
  std::size_t expect_rows = 0;
  std::size_t expect_cols = 0;
  // "N,D" header: two plain counts that agree with the body that follows.
  const auto& head = rows.front().tokens;
  if (head.size() == 2 && is_count(head[0]) && is_count(head[1])) {
    std::size_t n = 0, d = 0;
    parse_int(head[0], n);
    parse_int(head[1], d);
    const bool shape_matches =
        rows.size() - 1 == n && std::all_of(rows.begin() + 1, rows.end(), [d](const Row& r) { return r.tokens.size() == d; });
    if (shape_matches && n > 0 && d > 0) {
      first = 1;
      expect_rows = n;
      expect_cols = d;
    }
  }
  const std::size_t cols = expect_cols ? expect_cols : rows[first].tokens.size();
  Mat m(static_cast<Eigen::Index>(rows.size() - first), static_cast<Eigen::Index>(cols));
  for (std::size_t r = first; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.tokens.size() != cols) {
      throw ParseError(source, row.line,
                       "expected " + std::to_string(cols) + " values, found " + std::to_string(row.tokens.size()));
    }
    for (std::size_t c = 0; c < cols; ++c) {
      double v = 0.0;
      if (!parse_double(row.tokens[c], v)) {
        throw ParseError(source, row.line, "invalid number '" + row.tokens[c] + "' in column " + std::to_string(c + 1));
      }
      m(static_cast<Eigen::Index>(r - first), static_cast<Eigen::Index>(c)) = v;
    }
  }
  (void)expect_rows;
  return m;
}

std::string format_matrix_csv(const Mat& m, bool with_header) {
  std::string out;
  if (with_header) out += std::to_string(m.rows()) + "," + std::to_string(m.cols()) + "\n";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out += ',';
      out += format_real(m(i, j));
    }
    out += '\n';
  }
  return out;
}

Mat parse_matrix_binary(const std::string& bytes, const std::string& source) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kBinaryMagic, 8) != 0) {
    throw ParseError(source, 0, "missing CAOTEMB1 header");
  }
  const std::uint32_t n = get_u32(bytes, 8);
  const std::uint32_t d = get_u32(bytes, 12);
  const std::size_t expected = 16 + 4ull * n * d;
  if (bytes.size() != expected) {
    throw ParseError(source, 0,
                     "body holds " + std::to_string(bytes.size() - 16) + " bytes, header declares " +
                         std::to_string(n) + "x" + std::to_string(d) + " float32 values");
  }
  Mat m(n, d);
  for (std::size_t i = 0; i < std::size_t{n} * d; ++i) {
    const float f = std::bit_cast<float>(get_u32(bytes, 16 + 4 * i));
    if (!std::isfinite(f)) throw ParseError(source, 0, "non-finite value at index " + std::to_string(i));
    m.data()[i] = static_cast<double>(f);
  }
  return m;
}

std::string format_matrix_binary(const Mat& m) {
  std::string out(kBinaryMagic, 8);
  put_u32(out, static_cast<std::uint32_t>(m.rows()));
  put_u32(out, static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.size(); ++i) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(m.data()[i])));
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string(), 0, "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

Mat read_matrix(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), kBinaryMagic, 8) == 0) {
    return parse_matrix_binary(bytes, path.string());
  }
  return parse_matrix_csv(bytes, path.string());
}

void write_matrix_csv(const std::filesystem::path& path, const Mat& m, bool with_header) {
  write_file(path, format_matrix_csv(m, with_header));
}

void write_matrix_binary(const std::filesystem::path& path, const Mat& m) {
  write_file(path, format_matrix_binary(m));
}

std::vector<int> parse_labels(const std::string& text, const std::string& source) {
  std::vector<int> out;
  const auto lines = lines_of(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string t = trim(lines[i]);
    if (t.empty()) continue;
    int v = 0;
    if (!parse_int(t, v)) throw ParseError(source, i + 1, "invalid label '" + t + "'");
    if (v < 0) throw ParseError(source, i + 1, "negative label " + t);
    out.push_back(v);
  }
  return out;
}

std::string format_labels(const std::vector<int>& labels) {
  std::string out;
  for (int v : labels) out += std::to_string(v) + "\n";
  return out;
}

std::vector<int> read_labels(const std::filesystem::path& path) {
  return parse_labels(read_file(path), path.string());
}

void write_labels(const std::filesystem::path& path, const std::vector<int>& labels) {
  write_file(path, format_labels(labels));
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "e_total",   "e_warm",        "batch",         "d2",          "lambda",
      "tau_a",     "tau_i",         "lr",            "seed",        "grad_mode",
      "fd_step",   "eps1",          "eps2",          "eps3",        "t1",
      "t2",        "newton_iters",  "armijo_c1",     "armijo_shrink", "armijo_max_backtracks",
      "prob_floor", "random_b0",    "b0_seed",       "use_cos",     "use_att",
      "use_instance_loss", "use_cluster_loss", "bench_per_class", "bench_eps2"};
  return keys;
}

void apply_config_entry(RunConfig& c, const std::string& key, const std::string& value,
                        const std::string& source, std::size_t line) {
  auto bad = [&](const std::string& what) {
    throw ParseError(source, line, "invalid value '" + value + "' for " + key + " (" + what + ")");
  };
  auto as_int = [&](int& dst) {
    if (!parse_int(value, dst)) bad("integer expected");
  };
  auto as_real = [&](double& dst) {
    if (!parse_double(value, dst)) bad("real expected");
  };
  auto as_bool = [&](bool& dst) {
    if (!parse_bool(value, dst)) bad("true/false expected");
  };
  auto as_u64 = [&](std::uint64_t& dst) {
    if (!parse_int(value, dst)) bad("unsigned integer expected");
  };

  if (key == "e_total") as_int(c.e_total);
  else if (key == "e_warm") as_int(c.e_warm);
  else if (key == "batch") as_int(c.batch);
  else if (key == "d2") as_int(c.d2);
  else if (key == "lambda") as_real(c.lambda);
  else if (key == "tau_a") as_real(c.temps.tau_a);
  else if (key == "tau_i") as_real(c.temps.tau_i);
  else if (key == "lr") as_real(c.lr);
  else if (key == "seed") as_u64(c.seed);
  else if (key == "grad_mode") {
    if (value == "fd" || value == "finite_difference") c.grad_mode = GradMode::finite_difference;
    else if (value == "analytic") c.grad_mode = GradMode::analytic;
    else bad("fd or analytic expected");
  }
  else if (key == "fd_step") as_real(c.fd_step);
  else if (key == "eps1") as_real(c.caot.eps1);
  else if (key == "eps2") as_real(c.caot.eps2);
  else if (key == "eps3") as_real(c.caot.eps3);
  else if (key == "t1") as_int(c.caot.t1);
  else if (key == "t2") as_int(c.caot.t2);
  else if (key == "newton_iters") as_int(c.caot.newton_iters);
  else if (key == "armijo_c1") as_real(c.caot.armijo_c1);
  else if (key == "armijo_shrink") as_real(c.caot.armijo_shrink);
  else if (key == "armijo_max_backtracks") as_int(c.caot.armijo_max_backtracks);
  else if (key == "prob_floor") as_real(c.caot.prob_floor);
  else if (key == "random_b0") as_bool(c.caot.random_b0);
  else if (key == "b0_seed") as_u64(c.caot.seed);
  else if (key == "use_cos") as_bool(c.use_cos);
  else if (key == "use_att") as_bool(c.use_att);
  else if (key == "use_instance_loss") as_bool(c.use_instance_loss);
  else if (key == "use_cluster_loss") as_bool(c.use_cluster_loss);
  else if (key == "bench_per_class") as_int(c.bench_per_class);
  else if (key == "bench_eps2") {
    if (value == "same") {
      c.bench_eps2.reset();
    } else {
      double v = 0.0;
      as_real(v);
      c.bench_eps2 = v;
    }
  }
  else {
    std::string valid;
    for (const auto& k : config_keys()) valid += (valid.empty() ? "" : ", ") + k;
    throw ParseError(source, line, "unknown key '" + key + "'; valid keys: " + valid);
  }
}

RunConfig parse_config(const std::string& text, const std::string& source, RunConfig base) {
  const auto lines = lines_of(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string t = lines[i];
    if (const auto hash = t.find('#'); hash != std::string::npos) t.erase(hash);
    t = trim(t);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ParseError(source, i + 1, "expected key=value");
    const std::string key = trim(std::string_view(t).substr(0, eq));
    const std::string value = trim(std::string_view(t).substr(eq + 1));
    if (key.empty()) throw ParseError(source, i + 1, "empty key");
    apply_config_entry(base, key, value, source, i + 1);
  }
  return base;
}

std::string format_config(const RunConfig& c) {
  std::ostringstream os;
  auto b = [](bool v) { return v ? "true" : "false"; };
  os << "e_total=" << c.e_total << "\n"
     << "e_warm=" << c.e_warm << "\n"
     << "batch=" << c.batch << "\n"
     << "d2=" << c.d2 << "\n"
     << "lambda=" << format_real(c.lambda) << "\n"
     << "tau_a=" << format_real(c.temps.tau_a) << "\n"
     << "tau_i=" << format_real(c.temps.tau_i) << "\n"
     << "lr=" << format_real(c.lr) << "\n"
     << "seed=" << c.seed << "\n"
     << "grad_mode=" << (c.grad_mode == GradMode::analytic ? "analytic" : "fd") << "\n"
     << "fd_step=" << format_real(c.fd_step) << "\n"
     << "eps1=" << format_real(c.caot.eps1) << "\n"
     << "eps2=" << format_real(c.caot.eps2) << "\n"
     << "eps3=" << format_real(c.caot.eps3) << "\n"
     << "t1=" << c.caot.t1 << "\n"
     << "t2=" << c.caot.t2 << "\n"
     << "newton_iters=" << c.caot.newton_iters << "\n"
     << "armijo_c1=" << format_real(c.caot.armijo_c1) << "\n"
     << "armijo_shrink=" << format_real(c.caot.armijo_shrink) << "\n"
     << "armijo_max_backtracks=" << c.caot.armijo_max_backtracks << "\n"
     << "prob_floor=" << format_real(c.caot.prob_floor) << "\n"
     << "random_b0=" << b(c.caot.random_b0) << "\n"
     << "b0_seed=" << c.caot.seed << "\n"
     << "use_cos=" << b(c.use_cos) << "\n"
     << "use_att=" << b(c.use_att) << "\n"
     << "use_instance_loss=" << b(c.use_instance_loss) << "\n"
     << "use_cluster_loss=" << b(c.use_cluster_loss) << "\n"
     << "bench_per_class=" << c.bench_per_class << "\n"
     << "bench_eps2=" << (c.bench_eps2 ? format_real(*c.bench_eps2) : std::string("same")) << "\n";
  return os.str();
}

Dataset SynthSpec::generate() const {
  return synth_dataset(k, sizes, dim, sep, noise, seed);
}

SynthSpec parse_synth_spec(const std::string& text) {
  const std::string source = "--synth";
  SynthSpec spec;
  std::string sizes_text;
  for (const auto& item : split(text, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ParseError(source, 0, "expected key=value in '" + item + "'");
    const std::string key = trim(std::string_view(item).substr(0, eq));
    const std::string value = trim(std::string_view(item).substr(eq + 1));
    bool ok = true;
    if (key == "k") ok = parse_int(value, spec.k);
    else if (key == "sizes") sizes_text = value;
    else if (key == "dim") ok = parse_int(value, spec.dim);
    else if (key == "sep") ok = parse_double(value, spec.sep);
    else if (key == "noise") ok = parse_double(value, spec.noise);
    else if (key == "seed") ok = parse_int(value, spec.seed);
    else throw ParseError(source, 0, "unknown key '" + key + "'; valid keys: k, sizes, dim, sep, noise, seed");
    if (!ok) throw ParseError(source, 0, "invalid value '" + value + "' for " + key);
  }
  if (sizes_text.empty()) {
    spec.sizes.assign(static_cast<std::size_t>(std::max(spec.k, 0)), 100);
  } else if (const auto x = sizes_text.find('x'); x != std::string::npos) {
    int count = 0, reps = 0;
    if (!parse_int(sizes_text.substr(0, x), count) || !parse_int(sizes_text.substr(x + 1), reps) || reps < 1) {
      throw ParseError(source, 0, "invalid sizes '" + sizes_text + "'");
    }
    spec.sizes.assign(static_cast<std::size_t>(reps), count);
  } else {
    for (const auto& tok : split(sizes_text, '/')) {
      int v = 0;
      if (!parse_int(tok, v)) throw ParseError(source, 0, "invalid sizes '" + sizes_text + "'");
      spec.sizes.push_back(v);
    }
  }
  if (static_cast<int>(spec.sizes.size()) != spec.k) {
    throw ParseError(source, 0, "sizes lists " + std::to_string(spec.sizes.size()) + " classes but k=" +
                                    std::to_string(spec.k));
  }
  return spec;
}

std::string format_synth_spec(const SynthSpec& spec) {
  std::string sizes;
  for (std::size_t i = 0; i < spec.sizes.size(); ++i) sizes += (i ? "/" : "") + std::to_string(spec.sizes[i]);
  return "k=" + std::to_string(spec.k) + ",sizes=" + sizes + ",dim=" + std::to_string(spec.dim) +
         ",sep=" + format_real(spec.sep) + ",noise=" + format_real(spec.noise) + ",seed=" + std::to_string(spec.seed);
}

}  // namespace pota::io
