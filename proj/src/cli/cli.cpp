#include "lipbound/cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "lipbound/certifier.hpp"
#include "lipbound/errors.hpp"
#include "lipbound/report_io.hpp"

namespace lipbound::cli {

namespace {

using Clock = std::chrono::steady_clock;

const std::vector<std::string> kMethodOrder = {"product", "fast",   "sn",     "gc",
                                               "gcs",     "shift",  "interp", "best"};

std::size_t method_rank(const std::string& m) {
  const auto it = std::find(kMethodOrder.begin(), kMethodOrder.end(), m);
  return static_cast<std::size_t>(it - kMethodOrder.begin());
}

std::string fmt(double v, int digits = 17) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

std::string join_chain(const std::vector<std::size_t>& dims) {
  std::string s;
  for (std::size_t i = 0; i < dims.size(); ++i) s += (i ? " -> " : "") + std::to_string(dims[i]);
  return s;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw IoError("error writing '" + path + "'");
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("'" + path + "': " + e.what());
  }
}

// "lo:hi:step" or "default".
std::optional<CGrid> parse_sweep(const std::string& spec, Method m) {
  if (spec.empty()) return std::nullopt;
  if (spec == "default") return CGrid::defaults(m);
  double lo = 0, hi = 0, step = 0;
  char c1 = 0, c2 = 0;
  std::istringstream in(spec);
  if (!(in >> lo >> c1 >> hi >> c2 >> step) || c1 != ':' || c2 != ':' || !in.eof()) {
    throw InvalidArgument("--sweep expects lo:hi:step or 'default', got '" + spec + "'");
  }
  return CGrid::range(lo, hi, step);
}

double default_c(Method m) { return m == Method::shift ? 2.0 : 1.0; }

std::vector<std::string> with_program(const std::vector<std::string>& args) {
  std::vector<std::string> all{"lipbound"};
  all.insert(all.end(), args.begin(), args.end());
  return all;
}

struct GenArgs {
  std::size_t layers = 0;
  std::size_t width = 0;
  std::size_t in = 0;
  std::size_t out_dim = 0;
  std::uint64_t seed = 0;
  std::string activation = "relu";
  std::string output;
};

int cmd_gen(const GenArgs& a, std::ostream& out, std::ostream& err) {
  if (a.layers < 1 || a.width < 1 || a.in < 1 || a.out_dim < 1) {
    err << "gen: --layers, --width, --in and --out must all be at least 1\n";
    return kInvalidArgs;
  }
  Activation act;
  try {
    act = activation_from_string(a.activation);
  } catch (const ParseError& e) {
    err << "gen: " << e.what() << "\n";
    return kInvalidArgs;
  }
  const Network net = generate_random(a.layers, a.width, a.in, a.out_dim, a.seed, act);
  if (!a.output.empty()) {
    try {
      save_network(net, a.output);
    } catch (const IoError& e) {
      err << "gen: " << e.what() << "\n";
      return kIoError;
    }
  } else {
    out << network_to_json(net);
  }
  (a.output.empty() ? err : out) << "dimension chain: " << join_chain(net.dimension_chain())
                                 << " (" << net.weights().size() << " weight matrices)\n";
  return kOk;
}

struct ComputeArgs {
  std::string net;
  std::string method = "fast";
  std::optional<double> c;
  std::string sweep;
  bool certified = false;
  double theta = 0.5;
  double d_tilde = kDefaultDTilde;
  std::optional<double> epsilon_q;
  std::vector<double> interp_thetas;
  std::size_t jobs = 1;
  std::string output;
};

int cmd_compute(const ComputeArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  RunManifest manifest;
  manifest.command = "compute";
  manifest.network_path = a.net;
  manifest.methods = {a.method};
  manifest.output_path = a.output;
  manifest.certified = a.certified;
  manifest.started_at = utc_timestamp();
  manifest.argv = argv;

  const Network net = load_network(a.net);

  BoundReport report;
  if (a.method == "best") {
    BestOfConfig cfg;
    cfg.d_tilde = a.d_tilde;
    cfg.epsilon_q = a.epsilon_q;
    cfg.certified = a.certified;
    cfg.jobs = a.jobs;
    cfg.interp_thetas = a.interp_thetas;
    manifest.grids = {{"sn", cfg.sn_grid.values},
                      {"gc", cfg.gc_grid.values},
                      {"gcs", cfg.gcs_grid.values},
                      {"shift", cfg.shift_grid.values}};
    if (!cfg.interp_thetas.empty()) manifest.grids.emplace_back("interp", cfg.interp_grid.values);
    report = best_of(net, cfg);
  } else {
    StrategyConfig cfg;
    cfg.method = method_from_string(a.method);
    cfg.c = a.c.value_or(default_c(cfg.method));
    cfg.theta = a.theta;
    cfg.d_tilde = a.d_tilde;
    cfg.epsilon_q = a.epsilon_q;
    cfg.certified = a.certified;
    const auto grid = parse_sweep(a.sweep, cfg.method);
    if (grid && !method_uses_c(cfg.method)) {
      throw InvalidArgument("--sweep does not apply to method " + a.method);
    }
    if (grid) {
      manifest.grids = {{a.method, grid->values}};
      report = sweep_c(net, cfg, *grid, a.jobs);
    } else {
      if (method_uses_c(cfg.method)) manifest.grids = {{a.method, {cfg.c}}};
      report = run_recursion(net, cfg);
    }
  }
  manifest.finished_at = utc_timestamp();

  nlohmann::json j = to_json(report);
  j["manifest"] = to_json(manifest);
  if (!a.output.empty()) write_text(a.output, j.dump(2) + "\n");

  out << "method=" << to_string(report.method);
  if (method_uses_c(report.method)) out << " c=" << fmt(report.config.c, 6);
  if (report.method == Method::interp) out << " theta=" << fmt(report.config.theta, 6);
  out << " bound=" << fmt(report.bound) << " certified=" << (a.certified ? "true" : "false")
      << " time=" << fmt(report.wall_time.count(), 4) << "s\n";
  return kOk;
}

struct VerifyArgs {
  std::string net;
  std::string report;
  std::size_t samples = 200;
  std::uint64_t seed = 0;
  double radius = kDefaultSampleRadius;
  bool force_lmi = false;
  bool no_lmi = false;
  std::size_t lmi_cap = kDefaultLmiDimensionCap;
  std::size_t jobs = 1;
  std::string output;
};

int cmd_verify(const VerifyArgs& a, const std::vector<std::string>& argv, std::ostream& out,
               std::ostream& err) {
  RunManifest manifest;
  manifest.command = "verify";
  manifest.network_path = a.net;
  manifest.seeds = {a.seed};
  manifest.output_path = a.output;
  manifest.started_at = utc_timestamp();
  manifest.argv = argv;

  const Network net = load_network(a.net);
  const BoundReport report = bound_report_from_json(read_json_file(a.report));
  manifest.methods = {std::string(to_string(report.method))};
  manifest.certified = report.config.certified;

  ValidationOptions opts;
  opts.samples = a.samples;
  opts.seed = a.seed;
  opts.radius = a.radius;
  opts.run_lmi = !a.no_lmi;
  opts.lmi_cap = a.lmi_cap;
  opts.jobs = a.jobs;

  ValidationReport vr;
  int code = kOk;
  try {
    vr = validate(net, report, opts);
  } catch (const ValidationFailed& e) {
    vr = e.report();
    code = kValidationFailed;
  }
  if (!vr.lmi_skipped_reason.empty() && a.force_lmi) {
    err << "verify: DimensionCapExceeded: " << vr.lmi_skipped_reason
        << "; LMI check skipped, empirical check still ran\n";
  }
  manifest.finished_at = utc_timestamp();

  nlohmann::json j = to_json(vr);
  j["manifest"] = to_json(manifest);
  if (!a.output.empty()) write_text(a.output, j.dump(2) + "\n");

  out << "bound=" << fmt(vr.bound) << " empirical_lower=" << fmt(vr.empirical_lower)
      << " margin=" << fmt(vr.margin) << " lmi=";
  if (vr.lmi) {
    out << (vr.lmi->psd ? "psd" : "not-psd");
  } else {
    out << "skipped";
  }
  out << (code == kOk ? " OK\n" : " FAILED\n");
  for (const auto& f : vr.failures) err << "verify: " << f << "\n";
  return code;
}

struct BenchArgs {
  std::vector<std::size_t> depths;
  std::vector<std::size_t> widths;
  std::vector<std::uint64_t> seeds = {0};
  std::vector<std::string> methods;
  std::vector<std::string> c_overrides;
  double theta = 0.5;
  std::optional<std::size_t> in_dim;
  std::size_t out_dim = 10;
  std::string activation = "relu";
  bool certified = false;
  std::size_t jobs = 1;
  std::string output;
};

int cmd_bench(const BenchArgs& a, const std::vector<std::string>& argv, std::ostream& out,
              std::ostream& err) {
  BenchSpec spec;
  spec.depths = a.depths;
  spec.widths = a.widths;
  spec.seeds = a.seeds;
  if (!a.methods.empty()) spec.methods = a.methods;
  for (const auto& m : spec.methods) {
    if (m != "best") method_from_string(m);
  }
  for (const auto& kv : a.c_overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw InvalidArgument("--c expects method=value, got '" + kv + "'");
    const std::string m = kv.substr(0, eq);
    method_from_string(m);
    try {
      spec.c_values[m] = std::stod(kv.substr(eq + 1));
    } catch (const std::exception&) {
      throw InvalidArgument("--c: bad value in '" + kv + "'");
    }
  }
  spec.theta = a.theta;
  spec.in_dim = a.in_dim;
  spec.out_dim = a.out_dim;
  try {
    spec.activation = activation_from_string(a.activation);
  } catch (const ParseError& e) {
    throw InvalidArgument(e.what());
  }
  spec.certified = a.certified;
  spec.jobs = a.jobs;

  RunManifest manifest;
  manifest.command = "bench";
  manifest.methods = spec.methods;
  for (const auto& [m, c] : spec.c_values) manifest.grids.emplace_back(m, std::vector<double>{c});
  manifest.seeds = spec.seeds;
  manifest.output_path = a.output;
  manifest.certified = spec.certified;
  manifest.started_at = utc_timestamp();
  manifest.argv = argv;

  const auto rows = run_bench(spec);
  manifest.finished_at = utc_timestamp();
  const std::string csv = bench_csv(rows);
  if (a.output.empty()) {
    out << csv;
  } else {
    write_text(a.output, csv);
    write_text(a.output + ".manifest.json", to_json(manifest).dump(2) + "\n");
    out << "wrote " << rows.size() << " rows to " << a.output << "\n";
  }
  const bool all_failed =
      std::all_of(rows.begin(), rows.end(), [](const BenchRow& r) { return r.status != "ok"; });
  if (all_failed && !rows.empty()) {
    err << "bench: every run failed\n";
    return kFailure;
  }
  return kOk;
}

}  // namespace

std::vector<BenchRow> run_bench(const BenchSpec& spec) {
  struct Task {
    std::size_t depth, width;
    std::uint64_t seed;
    std::string method;
  };
  std::vector<Task> tasks;
  for (auto d : spec.depths)
    for (auto w : spec.widths)
      for (auto s : spec.seeds)
        for (const auto& m : spec.methods) tasks.push_back({d, w, s, m});

  std::vector<BenchRow> rows(tasks.size());
  std::mutex cache_mutex;
  std::map<std::tuple<std::size_t, std::size_t, std::uint64_t>, std::shared_ptr<const Network>> nets;
  auto network_for = [&](const Task& t) {
    std::lock_guard lock(cache_mutex);
    auto& slot = nets[{t.depth, t.width, t.seed}];
    if (!slot) {
      slot = std::make_shared<const Network>(generate_random(
          t.depth, t.width, spec.in_dim.value_or(t.width), spec.out_dim, t.seed, spec.activation));
    }
    return slot;
  };

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      const Task& t = tasks[i];
      BenchRow& row = rows[i];
      row.depth = t.depth;
      row.width = t.width;
      row.seed = t.seed;
      row.method = t.method;
      row.certified = spec.certified;
      const auto net = network_for(t);
      try {
        const auto start = Clock::now();
        BoundReport r;
        if (t.method == "best") {
          BestOfConfig cfg;
          cfg.certified = spec.certified;
          r = best_of(*net, cfg);
        } else {
          StrategyConfig cfg;
          cfg.method = method_from_string(t.method);
          if (const auto it = spec.c_values.find(t.method); it != spec.c_values.end()) cfg.c = it->second;
          cfg.theta = spec.theta;
          cfg.certified = spec.certified;
          r = run_recursion(*net, cfg);
        }
        row.seconds = std::chrono::duration<double>(Clock::now() - start).count();
        row.bound = r.bound;
        if (method_uses_c(r.method)) row.c = r.config.c;
      } catch (const DefinitenessLost& e) {
        row.status = "definiteness_lost@" + std::to_string(e.layer());
      } catch (const NotConverged&) {
        row.status = "not_converged";
      } catch (const NumericalOverflow& e) {
        row.status = "overflow@" + std::to_string(e.layer());
      } catch (const Error&) {
        row.status = "error";
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(spec.jobs, 1, std::max<std::size_t>(tasks.size(), 1));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  std::stable_sort(rows.begin(), rows.end(), [](const BenchRow& a, const BenchRow& b) {
    return std::tuple(a.depth, a.width, a.seed, method_rank(a.method)) <
           std::tuple(b.depth, b.width, b.seed, method_rank(b.method));
  });
  return rows;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::string csv = "depth,width,seed,method,c,bound,seconds,certified,status\n";
  for (const auto& r : rows) {
    csv += std::to_string(r.depth) + "," + std::to_string(r.width) + "," + std::to_string(r.seed) +
           "," + r.method + "," + (r.c ? fmt(*r.c, 6) : "") + "," + (r.bound ? fmt(*r.bound) : "") +
           "," + fmt(r.seconds, 6) + "," + (r.certified ? "true" : "false") + "," + r.status + "\n";
  }
  return csv;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Closed-form Lipschitz upper bounds for feedforward networks"};
  app.name("lipbound");
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a random network");
  gen_cmd->add_option("--layers", gen.layers, "Number of hidden layers")->required();
  gen_cmd->add_option("--width", gen.width, "Neurons per hidden layer")->required();
  gen_cmd->add_option("--in", gen.in, "Input dimension")->required();
  gen_cmd->add_option("--out", gen.out_dim, "Output dimension")->required();
  gen_cmd->add_option("--seed", gen.seed, "SplitMix64 seed")->required();
  gen_cmd->add_option("--activation", gen.activation, "relu, tanh or sigmoid");
  gen_cmd->add_option("-o,--o,--output", gen.output, "Output path (.lnet writes binary)");

  ComputeArgs compute;
  auto* compute_cmd = app.add_subcommand("compute", "Compute a Lipschitz bound");
  compute_cmd->add_option("--net", compute.net, "Network file")->required();
  compute_cmd->add_option("--method", compute.method,
                          "product, fast, sn, gc, gcs, shift, interp or best");
  compute_cmd->add_option("--c", compute.c, "Hyperparameter c");
  compute_cmd->add_option("--sweep", compute.sweep, "lo:hi:step or 'default'");
  compute_cmd->add_flag("--certified", compute.certified, "Row-sum bound for the final sigma_max");
  compute_cmd->add_option("--theta", compute.theta, "Interpolation weight on SN");
  compute_cmd->add_option("--d-tilde", compute.d_tilde, "Multiplier for zero Gershgorin rows");
  compute_cmd->add_option("--epsilon-q", compute.epsilon_q, "GCS scaling for zero diagonals");
  compute_cmd->add_option("--interp-thetas", compute.interp_thetas, "Thetas tried by best")
      ->delimiter(',');
  compute_cmd->add_option("--jobs", compute.jobs, "Concurrent sweep points");
  compute_cmd->add_option("-o,--out,--output", compute.output, "Report JSON path");

  VerifyArgs verify;
  auto* verify_cmd = app.add_subcommand("verify", "Validate a bound report");
  verify_cmd->add_option("--net", verify.net, "Network file")->required();
  verify_cmd->add_option("--report", verify.report, "Report JSON from compute")->required();
  verify_cmd->add_option("--samples", verify.samples, "Jacobian samples");
  verify_cmd->add_option("--seed", verify.seed, "Sampling seed");
  verify_cmd->add_option("--radius", verify.radius, "Sampling ball radius");
  verify_cmd->add_flag("--lmi", verify.force_lmi, "Require the LMI check (report if too large)");
  verify_cmd->add_flag("--no-lmi", verify.no_lmi, "Skip the LMI check");
  verify_cmd->add_option("--lmi-cap", verify.lmi_cap, "Largest LMI dimension to factor");
  verify_cmd->add_option("--jobs", verify.jobs, "Concurrent samples");
  verify_cmd->add_option("-o,--out,--output", verify.output, "Validation report JSON path");

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "Benchmark methods over random networks");
  bench_cmd->add_option("--depths", bench.depths, "Hidden layer counts")->delimiter(',')->required();
  bench_cmd->add_option("--widths", bench.widths, "Widths")->delimiter(',')->required();
  bench_cmd->add_option("--seeds", bench.seeds, "Seeds")->delimiter(',');
  bench_cmd->add_option("--methods", bench.methods, "Methods (or best)")->delimiter(',');
  bench_cmd->add_option("--c", bench.c_overrides, "Per-method c, e.g. sn=1.3")->delimiter(',');
  bench_cmd->add_option("--theta", bench.theta, "Interpolation weight on SN");
  bench_cmd->add_option("--in", bench.in_dim, "Input dimension (default: width)");
  bench_cmd->add_option("--out-dim", bench.out_dim, "Output dimension");
  bench_cmd->add_option("--activation", bench.activation, "relu, tanh or sigmoid");
  bench_cmd->add_flag("--certified", bench.certified, "Row-sum bound for the final sigma_max");
  bench_cmd->add_option("--jobs", bench.jobs, "Concurrent runs");
  bench_cmd->add_option("-o,--out,--output", bench.output, "CSV path (stdout if omitted)");

  const std::vector<std::string> argv = with_program(args);
  std::vector<const char*> cargv;
  for (const auto& s : argv) cargv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(cargv.size()), cargv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInvalidArgs;
  }

  try {
    if (*gen_cmd) return cmd_gen(gen, out, err);
    if (*compute_cmd) {
      if (std::find(kMethodOrder.begin(), kMethodOrder.end(), compute.method) == kMethodOrder.end()) {
        err << "compute: unknown method '" << compute.method << "'\n";
        return kInvalidArgs;
      }
      return cmd_compute(compute, argv, out);
    }
    if (*verify_cmd) return cmd_verify(verify, argv, out, err);
    if (*bench_cmd) return cmd_bench(bench, argv, out, err);
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return kInvalidArgs;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kIoError;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kIoError;
  } catch (const DimensionChainError& e) {
    err << "error: " << e.what() << "\n";
    return kIoError;
  } catch (const DefinitenessLost& e) {
    err << "error: " << e.what() << "\n";
    return kDefinitenessLost;
  } catch (const AllInfeasible& e) {
    err << "error: " << e.what() << "\n";
    return kAllInfeasible;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kInvalidArgs;
}

}  // namespace lipbound::cli
