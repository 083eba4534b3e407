// Command-line harness over the bdprop C API: network generation, solver
// experiments with oracle verification, benchmark sweeps, and the appendix
// scaling identity check.

#include <cstdio>
#include <fstream>
#include <future>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "bdprop.h"

namespace {

using json = nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitVerifyFailed = 1;
constexpr int kExitError = 2;

struct ApiString {
  char* value = nullptr;
  ~ApiString() { bdp_string_free(value); }
  std::string str() const { return value ? value : ""; }
};

[[noreturn]] void die(const std::string& message) {
  std::cerr << "bdprop: " << message << "\n";
  std::exit(kExitError);
}

void check(bdp_status status) {
  if (status != BDP_OK)
    die(std::string(bdp_status_name(status)) + ": " + bdp_last_error());
}

struct SpecFlags {
  std::string kind = "fnn";
  std::size_t layers = 3;
  std::size_t width = 4;
  std::vector<std::size_t> widths;
  std::size_t tau = 1;
  std::size_t batch = 1;
  std::string activation = "tanh";
  std::string mode = "backward";
  std::string solver = "substitution";
  double tol = 1e-10;
  std::size_t max_iters = 0;
  double omega = 1.0;
  std::uint64_t seed = 1;
  std::size_t leaf_threshold = 2;
  int gamma = -1;
  double verify_tol = 1e-9;
};

void add_network_flags(CLI::App* cmd, SpecFlags& f) {
  cmd->add_option("--kind", f.kind, "network kind: fnn|rnn")
      ->check(CLI::IsMember({"fnn", "rnn"}));
  cmd->add_option("--layers", f.layers, "layer count L");
  cmd->add_option("--width", f.width, "uniform layer width N");
  cmd->add_option("--widths", f.widths, "explicit widths n_0,...,n_l")->delimiter(',');
  cmd->add_option("--tau", f.tau, "time steps (rnn)");
  cmd->add_option("--activation", f.activation,
                  "identity|relu|leaky:SLOPE|tanh|sigmoid");
  cmd->add_option("--seed", f.seed, "generator seed");
}

void add_solver_flags(CLI::App* cmd, SpecFlags& f) {
  cmd->add_option("--batch", f.batch, "mini-batch size R (fnn)");
  cmd->add_option("--mode", f.mode, "forward|backward")
      ->check(CLI::IsMember({"forward", "backward"}));
  cmd->add_option("--solver", f.solver,
                  "substitution|cyclic|jacobi|richardson|bicgstab|hybrid:OUTER+INNER");
  cmd->add_option("--tol", f.tol, "iterative relative residual target");
  cmd->add_option("--max-iters", f.max_iters, "iteration cap (0: 4x block count)");
  cmd->add_option("--omega", f.omega, "Richardson damping");
  cmd->add_option("--leaf-threshold", f.leaf_threshold, "cyclic reduction leaf size");
  cmd->add_option("--gamma", f.gamma, "activation cost constant override");
  cmd->add_option("--verify-tol", f.verify_tol, "oracle verification tolerance");
}

json spec_json(const SpecFlags& f) {
  json j;
  j["kind"] = f.kind;
  if (!f.widths.empty()) {
    j["widths"] = f.widths;
  } else {
    j["layers"] = f.layers;
    j["width"] = f.width;
  }
  j["tau"] = f.tau;
  j["batch"] = f.batch;
  j["activation"] = f.activation;
  j["mode"] = f.mode;
  j["solver"] = f.solver;
  j["tol"] = f.tol;
  j["max_iters"] = f.max_iters;
  j["omega"] = f.omega;
  j["leaf_threshold"] = f.leaf_threshold;
  j["seed"] = f.seed;
  if (f.gamma >= 0) j["gamma"] = f.gamma;
  j["verify_tol"] = f.verify_tol;
  return j;
}

void write_output(const std::string& text, const std::string& path) {
  if (path.empty()) {
    std::cout << text;
    if (text.empty() || text.back() != '\n') std::cout << "\n";
    return;
  }
  std::ofstream out(path);
  if (!out) die("cannot write " + path);
  out << text;
  if (text.empty() || text.back() != '\n') out << "\n";
}

int run_gen(const SpecFlags& flags, const std::string& out_path) {
  bdp_net* net = nullptr;
  check(bdp_net_generate(spec_json(flags).dump().c_str(), &net));
  std::unique_ptr<bdp_net, decltype(&bdp_net_free)> guard(net, &bdp_net_free);
  ApiString text;
  check(bdp_net_to_json(net, &text.value));
  write_output(text.str(), out_path);
  return kExitOk;
}

int run_solve(const SpecFlags& flags, const std::string& out_path, const std::string& format) {
  const std::string spec = spec_json(flags).dump();
  std::string output;
  json report;
  {
    ApiString text;
    check(bdp_run_experiment(spec.c_str(), &text.value));
    report = json::parse(text.str());
    output = text.str();
  }
  if (format == "csv") {
    ApiString header, row;
    check(bdp_report_csv_header(&header.value));
    check(bdp_run_experiment_csv(spec.c_str(), &row.value));
    output = header.str() + "\n" + row.str() + "\n";
  }
  write_output(output, out_path);
  return report.value("verified", false) ? kExitOk : kExitVerifyFailed;
}

int run_verify(const SpecFlags& flags) {
  ApiString text;
  check(bdp_run_experiment(spec_json(flags).dump().c_str(), &text.value));
  const json report = json::parse(text.str());
  const bool verified = report.value("verified", false);
  std::cout << (verified ? "verify: OK" : "verify: FAIL")
            << " solver=" << flags.solver << " mode=" << flags.mode
            << " oracle_max_abs_err=" << report["oracle_max_abs_err"].dump();
  if (report.contains("breakdown"))
    std::cout << " breakdown=" << report["breakdown"].dump();
  std::cout << "\n";
  return verified ? kExitOk : kExitVerifyFailed;
}

int run_appendix(const SpecFlags& flags, const std::string& out_path) {
  ApiString text;
  check(bdp_appendix_check(spec_json(flags).dump().c_str(), &text.value));
  write_output(text.str(), out_path);
  const json report = json::parse(text.str());
  return report.value("ok", false) ? kExitOk : kExitVerifyFailed;
}

struct BenchFlags {
  SpecFlags base;
  std::vector<std::size_t> layer_list;
  std::vector<std::size_t> width_list;
  std::vector<std::string> activation_list;
  std::vector<std::string> solver_list;
  std::size_t seeds = 1;
  std::size_t jobs = 1;
  std::vector<double> stale_sigmas;
};

int run_bench(const BenchFlags& flags, const std::string& out_path) {
  if (!flags.stale_sigmas.empty()) {
    // stale-diagonal sweep: one row per (seed, sigma)
    std::string csv = "sigma,seed,max_abs_err,breakdown";
    for (std::size_t seed = 1; seed <= flags.seeds; ++seed) {
      SpecFlags f = flags.base;
      f.seed = seed;
      f.mode = "forward";
      ApiString text;
      check(bdp_stale_experiment(spec_json(f).dump().c_str(), flags.stale_sigmas.data(),
                                 flags.stale_sigmas.size(), &text.value));
      const json report = json::parse(text.str());
      for (std::size_t i = 0; i < report["sigmas"].size(); ++i) {
        csv += "\n" + report["sigmas"][i].dump() + "," + std::to_string(seed) + "," +
               report["errors"][i].dump() + "," + report["breakdowns"][i].dump();
      }
    }
    write_output(csv + "\n", out_path);
    return kExitOk;
  }

  std::vector<std::string> specs;
  const auto layers = flags.layer_list.empty()
                          ? std::vector<std::size_t>{flags.base.layers}
                          : flags.layer_list;
  const auto widths =
      flags.width_list.empty() ? std::vector<std::size_t>{flags.base.width} : flags.width_list;
  const auto activations = flags.activation_list.empty()
                               ? std::vector<std::string>{flags.base.activation}
                               : flags.activation_list;
  const auto solvers = flags.solver_list.empty()
                           ? std::vector<std::string>{flags.base.solver}
                           : flags.solver_list;
  for (std::size_t l : layers)
    for (std::size_t n : widths)
      for (const std::string& act : activations)
        for (const std::string& solver : solvers)
          for (std::size_t seed = 1; seed <= flags.seeds; ++seed) {
            SpecFlags f = flags.base;
            f.layers = l;
            f.width = n;
            f.widths.clear();
            f.activation = act;
            f.solver = solver;
            f.seed = seed;
            specs.push_back(spec_json(f).dump());
          }

  auto run_one = [](const std::string& spec) {
    ApiString row;
    check(bdp_run_experiment_csv(spec.c_str(), &row.value));
    return row.str();
  };

  std::vector<std::string> rows(specs.size());
  if (flags.jobs <= 1) {
    for (std::size_t i = 0; i < specs.size(); ++i) rows[i] = run_one(specs[i]);
  } else {
    // seed-derived determinism makes the worker pool safe; rows keep spec order
    std::vector<std::future<std::string>> futures;
    futures.reserve(specs.size());
    for (const std::string& spec : specs)
      futures.push_back(std::async(std::launch::async, run_one, spec));
    for (std::size_t i = 0; i < futures.size(); ++i) rows[i] = futures[i].get();
  }

  ApiString header;
  check(bdp_report_csv_header(&header.value));
  std::string csv = header.str();
  for (const std::string& row : rows) csv += "\n" + row;
  write_output(csv + "\n", out_path);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"block bi-diagonal propagation solvers"};
  app.require_subcommand(1);

  SpecFlags gen_flags;
  std::string gen_out;
  CLI::App* gen = app.add_subcommand("gen", "generate a network file");
  add_network_flags(gen, gen_flags);
  gen->add_option("--out", gen_out, "output path")->required();

  SpecFlags solve_flags;
  std::string solve_out, solve_format = "json";
  CLI::App* solve = app.add_subcommand("solve", "run one experiment and write its report");
  add_network_flags(solve, solve_flags);
  add_solver_flags(solve, solve_flags);
  solve->add_option("--out", solve_out, "report path (default stdout)");
  solve->add_option("--format", solve_format, "json|csv")
      ->check(CLI::IsMember({"json", "csv"}));

  SpecFlags verify_flags;
  CLI::App* verify = app.add_subcommand("verify", "oracle-only check, exit 0/1");
  add_network_flags(verify, verify_flags);
  add_solver_flags(verify, verify_flags);

  BenchFlags bench_flags;
  std::string bench_out;
  CLI::App* bench = app.add_subcommand("bench", "sweep a grid of experiments, emit CSV");
  add_network_flags(bench, bench_flags.base);
  add_solver_flags(bench, bench_flags.base);
  bench->add_option("--layers-list", bench_flags.layer_list, "layer counts to sweep")
      ->delimiter(',');
  bench->add_option("--width-list", bench_flags.width_list, "widths to sweep")->delimiter(',');
  bench->add_option("--activation-list", bench_flags.activation_list, "activations to sweep")
      ->delimiter(',');
  bench->add_option("--solver-list", bench_flags.solver_list, "solvers to sweep")
      ->delimiter(',');
  bench->add_option("--seeds", bench_flags.seeds, "run seeds 1..N");
  bench->add_option("--jobs", bench_flags.jobs, "worker pool size");
  bench->add_option("--stale", bench_flags.stale_sigmas,
                    "stale-diagonal sweep over these noise scales")
      ->delimiter(',');
  bench->add_option("--out", bench_out, "CSV path (default stdout)");

  SpecFlags appendix_flags;
  std::string appendix_out;
  CLI::App* appendix =
      app.add_subcommand("appendix-check", "reordered-system scaling identity check");
  add_network_flags(appendix, appendix_flags);
  appendix->add_option("--mode", appendix_flags.mode, "forward|backward")
      ->check(CLI::IsMember({"forward", "backward"}));
  appendix->add_option("--out", appendix_out, "report path (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return run_gen(gen_flags, gen_out);
    if (solve->parsed()) return run_solve(solve_flags, solve_out, solve_format);
    if (verify->parsed()) return run_verify(verify_flags);
    if (bench->parsed()) return run_bench(bench_flags, bench_out);
    if (appendix->parsed()) return run_appendix(appendix_flags, appendix_out);
  } catch (const std::exception& e) {
    die(e.what());
  }
  return kExitError;
}
