#pragma once

// File formats of the command-line tool.
//
// Matrices (embeddings, probabilities, similarities, couplings):
//   CSV     one row per line, comma separated; an optional first line "N,D"
//           declares the shape. Written in shortest round-trip form.
//   binary  8-byte magic "CAOTEMB1", uint32 N, uint32 D (little endian), then
//           N*D little-endian float32 values, row-major.
// Labels: one decimal integer per line.
// Config: key=value lines, '#' starts a comment.

#include "pota/core.hpp"
#include "pota/pipeline.hpp"

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace pota::io {

/// Malformed input file. `line` is 1-based, 0 when not line-specific.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& msg);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

inline constexpr char kBinaryMagic[8] = {'C', 'A', 'O', 'T', 'E', 'M', 'B', '1'};

Mat parse_matrix_csv(const std::string& text, const std::string& source = "<csv>");
std::string format_matrix_csv(const Mat& m, bool with_header = false);

Mat parse_matrix_binary(const std::string& bytes, const std::string& source = "<binary>");
std::string format_matrix_binary(const Mat& m);

/// Reads either format, detected by the magic bytes.
Mat read_matrix(const std::filesystem::path& path);
void write_matrix_csv(const std::filesystem::path& path, const Mat& m, bool with_header = false);
void write_matrix_binary(const std::filesystem::path& path, const Mat& m);

std::vector<int> parse_labels(const std::string& text, const std::string& source = "<labels>");
std::string format_labels(const std::vector<int>& labels);
std::vector<int> read_labels(const std::filesystem::path& path);
void write_labels(const std::filesystem::path& path, const std::vector<int>& labels);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& content);

/// Shortest decimal text that parses back to the same double.
std::string format_real(double x);

// Run configuration as key=value text.

const std::vector<std::string>& config_keys();
/// Applies one key=value assignment. Unknown keys throw ParseError naming
/// every valid key.
void apply_config_entry(RunConfig& config, const std::string& key, const std::string& value,
                        const std::string& source = "<config>", std::size_t line = 0);
RunConfig parse_config(const std::string& text, const std::string& source = "<config>",
                       RunConfig base = {});
std::string format_config(const RunConfig& config);

/// Synthetic dataset description, e.g.
/// "k=5,sizes=100x5,dim=16,sep=8,noise=0.5,seed=1". `sizes` is either
/// "<count>x<classes>" or a '/'-separated list.
struct SynthSpec {
  int k = 5;
  std::vector<int> sizes;
  int dim = 16;
  double sep = 8.0;
  double noise = 0.5;
  std::uint64_t seed = 1;

  Dataset generate() const;
};
SynthSpec parse_synth_spec(const std::string& text);
std::string format_synth_spec(const SynthSpec& spec);

}  // namespace pota::io
