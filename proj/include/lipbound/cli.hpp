#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lipbound/bounds.hpp"
#include "lipbound/network.hpp"

namespace lipbound::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kInvalidArgs = 2,
  kIoError = 3,
  kDefinitenessLost = 4,
  kAllInfeasible = 5,
  kValidationFailed = 6,
};

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Bench methods are run at a fixed c each; "best" runs best_of.
struct BenchSpec {
  std::vector<std::size_t> depths;
  std::vector<std::size_t> widths;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> methods = {"product", "fast", "sn", "gc", "gcs", "shift"};
  std::map<std::string, double> c_values = {
      {"sn", 1.0}, {"gc", 1.0}, {"gcs", 1.0}, {"shift", 2.0}, {"interp", 1.0}};
  double theta = 0.5;
  /// Defaults to the width.
  std::optional<std::size_t> in_dim;
  std::size_t out_dim = 10;
  Activation activation = Activation::relu;
  bool certified = false;
  std::size_t jobs = 1;
};

struct BenchRow {
  std::size_t depth = 0;
  std::size_t width = 0;
  std::uint64_t seed = 0;
  std::string method;
  std::optional<double> c;
  std::optional<double> bound;
  double seconds = 0.0;
  bool certified = false;
  std::string status = "ok";
};

/// Rows come back sorted by (depth, width, seed, method order) regardless of
/// how many jobs ran them.
std::vector<BenchRow> run_bench(const BenchSpec& spec);
std::string bench_csv(const std::vector<BenchRow>& rows);

}  // namespace lipbound::cli
