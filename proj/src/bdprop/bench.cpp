#include "bdprop/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "json.hpp"

#include "bdprop/direct.hpp"
#include "bdprop/rng.hpp"

namespace bdprop {

using json = nlohmann::ordered_json;

namespace {

// Independent deterministic streams per seed: network weights, sample data,
// stale-weight perturbations.
constexpr std::uint64_t kDataStream = 0x6A09E667F3BCC909ull;
constexpr std::uint64_t kPerturbStream = 0x3C6EF372FE94F82Bull;

Matrix random_matrix(SplitMix64& rng, std::size_t rows, std::size_t cols, double bound) {
  Matrix m(rows, cols);
  for (double& v : m.a) v = rng.next_symmetric(bound);
  return m;
}

Vec random_vec(SplitMix64& rng, std::size_t n, double bound) {
  Vec v(n);
  for (double& x : v) x = rng.next_symmetric(bound);
  return v;
}

struct SampleData {
  std::vector<Vec> inputs;   // one per sample (fnn) or per step (rnn)
  std::vector<Vec> targets;  // one-hot loss targets
};

Vec one_hot(std::size_t n, std::size_t idx) {
  Vec v(n, 0.0);
  v[idx] = 1.0;
  return v;
}

}  // namespace

std::string solver_name(SolverChoice solver, OuterMethod outer, InnerSolver inner) {
  switch (solver) {
    case SolverChoice::Substitution: return "substitution";
    case SolverChoice::Cyclic: return "cyclic";
    case SolverChoice::Jacobi: return "jacobi";
    case SolverChoice::Richardson: return "richardson";
    case SolverChoice::BiCGStab: return "bicgstab";
    case SolverChoice::Hybrid:
      return std::string("hybrid:") + (outer == OuterMethod::Jacobi ? "jacobi" : "bicgstab") +
             "+" + (inner == InnerSolver::Substitution ? "substitution" : "cyclic");
  }
  return "substitution";
}

void ExperimentSpec::validate() const {
  if (kind != "fnn" && kind != "rnn")
    throw std::invalid_argument("spec: kind must be fnn or rnn");
  if (widths.size() < 2) throw std::invalid_argument("spec: need input and output widths");
  for (std::size_t w : widths)
    if (w == 0) throw std::invalid_argument("spec: zero width");
  if (tau == 0) throw std::invalid_argument("spec: tau must be >= 1");
  if (batch == 0) throw std::invalid_argument("spec: batch must be >= 1");
  if (kind == "rnn" && batch != 1)
    throw std::invalid_argument("spec: mini-batches are supported for fnn specs only");
  if (kind == "fnn" && solver == SolverChoice::Hybrid)
    throw std::invalid_argument("spec: hybrid solver applies to rnn systems");
  if (kind == "rnn" && (solver == SolverChoice::Jacobi || solver == SolverChoice::Richardson ||
                        solver == SolverChoice::BiCGStab))
    throw std::invalid_argument("spec: use hybrid:<outer>+<inner> for iterative rnn solves");
  if (leaf_threshold < 2) throw std::invalid_argument("spec: leaf threshold must be >= 2");
  if (!(iter.tol > 0.0)) throw std::invalid_argument("spec: tol must be > 0");
}

FeedForwardNet generate_fnn(const ExperimentSpec& spec) {
  SplitMix64 rng(spec.seed);
  FeedForwardNet net;
  const std::size_t l = spec.depth();
  net.layers.reserve(l);
  for (std::size_t k = 1; k <= l; ++k) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(spec.widths[k - 1]));
    Layer layer;
    layer.weights = random_matrix(rng, spec.widths[k], spec.widths[k - 1], bound);
    layer.bias = random_vec(rng, spec.widths[k], bound);
    layer.act = spec.activation;
    net.layers.push_back(std::move(layer));
  }
  net.validate();
  return net;
}

RecurrentNet generate_rnn(const ExperimentSpec& spec) {
  SplitMix64 rng(spec.seed);
  RecurrentNet net;
  net.horizon = spec.tau;
  const std::size_t l = spec.depth();
  net.layers.reserve(l);
  for (std::size_t k = 1; k <= l; ++k) {
    const double in_bound = 1.0 / std::sqrt(static_cast<double>(spec.widths[k - 1]));
    const double rec_bound = 1.0 / std::sqrt(static_cast<double>(spec.widths[k]));
    RecurrentLayer layer;
    layer.weights = random_matrix(rng, spec.widths[k], spec.widths[k - 1], in_bound);
    layer.recurrent = random_matrix(rng, spec.widths[k], spec.widths[k], rec_bound);
    layer.bias = random_vec(rng, spec.widths[k], in_bound);
    layer.act = spec.activation;
    net.layers.push_back(std::move(layer));
  }
  net.validate();
  return net;
}

namespace {

SampleData generate_samples(const ExperimentSpec& spec, std::size_t count,
                            std::size_t output_width) {
  SplitMix64 rng(spec.seed ^ kDataStream);
  SampleData data;
  data.inputs.reserve(count);
  for (std::size_t i = 0; i < count; ++i)
    data.inputs.push_back(random_vec(rng, spec.widths.front(), 1.0));
  data.targets.resize(count);
  for (std::size_t i = 0; i < count; ++i)
    data.targets[i] = one_hot(output_width, rng.next_below(output_width));
  return data;
}

struct CrSim {
  std::uint64_t fma = 0;
  std::uint64_t act = 0;  // gamma-weighted
  std::uint64_t ps = 0;
};

CrSim simulate_cyclic(const std::vector<std::size_t>& ws, std::size_t r, unsigned gamma,
                      std::size_t leaf) {
  CrSim sim;
  const std::size_t m = ws.size();
  if (m <= leaf) {
    std::uint64_t f = 0, a = 0;
    for (std::size_t k = 1; k < m; ++k) {
      f += ws[k] * ws[k - 1];
      a += ws[k];
    }
    sim.fma = f * r;
    sim.act = static_cast<std::uint64_t>(gamma) * a * r;
    sim.ps = sim.fma;
    return sim;
  }
  std::uint64_t level_ps = 0;
  for (std::size_t k = 1; k < m; ++k) {
    const std::uint64_t g_cost = static_cast<std::uint64_t>(ws[k]) * ws[k - 1];
    const std::uint64_t b_cost =
        k >= 2 ? static_cast<std::uint64_t>(ws[k]) * ws[k - 1] * (ws[k - 2] + 1) : 0;
    sim.fma += b_cost + g_cost * r;
    sim.act += static_cast<std::uint64_t>(gamma) * ws[k - 1] * r;
    level_ps = std::max(level_ps, b_cost + g_cost * r);
  }
  std::vector<std::size_t> odd, even;
  for (std::size_t k = 0; k < m; ++k) (k % 2 == 1 ? odd : even).push_back(ws[k]);
  const CrSim o = simulate_cyclic(odd, r, gamma, leaf);
  const CrSim e = simulate_cyclic(even, r, gamma, leaf);
  sim.fma += o.fma + e.fma;
  sim.act += o.act + e.act;
  sim.ps = level_ps + std::max(o.ps, e.ps);
  return sim;
}

}  // namespace

PredictedWork predict_work(const ExperimentSpec& spec, SolverChoice method, std::size_t eta) {
  const std::vector<std::size_t>& w = spec.widths;
  const std::size_t l = spec.depth();
  const std::uint64_t r = spec.batch;
  const unsigned gamma = spec.gamma();

  std::uint64_t affine = 0, scale = 0, max_row = 0;
  for (std::size_t k = 1; k <= l; ++k) {
    affine += static_cast<std::uint64_t>(w[k]) * w[k - 1];
    scale += w[k];
    max_row = std::max(max_row, static_cast<std::uint64_t>(w[k]) * w[k - 1]);
  }

  PredictedWork out;
  switch (method) {
    case SolverChoice::Substitution:
      out.fma = affine * r;
      out.activation_weighted = static_cast<std::uint64_t>(gamma) * scale * r;
      out.parallel_steps = out.fma;
      break;
    case SolverChoice::Cyclic: {
      std::vector<std::size_t> ws = w;
      if (spec.mode == PropMode::Backward) std::reverse(ws.begin(), ws.end());
      const CrSim sim = simulate_cyclic(ws, r, gamma, spec.leaf_threshold);
      out.fma = sim.fma;
      out.activation_weighted = sim.act;
      out.parallel_steps = sim.ps;
      break;
    }
    case SolverChoice::Jacobi:
    case SolverChoice::Richardson:
      out.fma = affine * r * eta;
      out.activation_weighted = static_cast<std::uint64_t>(gamma) * scale * r * eta;
      out.parallel_steps = max_row * r * eta;
      break;
    case SolverChoice::BiCGStab:
      out.fma = 2 * affine * r * eta;
      out.activation_weighted = 2 * static_cast<std::uint64_t>(gamma) * scale * r * eta;
      out.parallel_steps = 2 * max_row * r * eta;
      break;
    case SolverChoice::Hybrid: {
      // setup solves every step once; each outer sweep re-solves tau-1 steps
      // after one recurrent product
      std::uint64_t recurrent = 0;
      for (std::size_t k = 1; k <= l; ++k)
        recurrent += static_cast<std::uint64_t>(w[k]) * w[k];
      const std::uint64_t per_outer = (spec.tau - 1) * (recurrent + affine);
      const std::uint64_t setup = spec.tau * affine;
      const std::uint64_t sweeps = spec.hybrid_outer == OuterMethod::Jacobi ? 1 : 2;
      out.fma = setup + sweeps * per_outer * eta;
      out.activation_weighted =
          static_cast<std::uint64_t>(gamma) * scale * spec.tau * (1 + sweeps * eta);
      out.parallel_steps = out.fma;
      break;
    }
  }
  return out;
}

namespace {

std::vector<Vec> forward_oracle_blocks(const ForwardTrace& trace, std::size_t step) {
  std::vector<Vec> blocks;
  blocks.push_back(trace.inputs[step]);
  for (const Vec& z : trace.act[step]) blocks.push_back(z);
  return blocks;
}

struct SolveOutcome {
  std::vector<Vec> solution;
  double residual_norm = 0.0;
  std::size_t iterations = 0;
  std::size_t depth = 0;
  std::size_t restarts = 0;
  bool converged = true;
  std::size_t delta_vectors = 0;
  WorkCounters work;
};

SolveOutcome from_direct(SolveReport&& r) {
  SolveOutcome out;
  out.solution = std::move(r.solution);
  out.residual_norm = r.residual_norm;
  out.depth = r.recursion_depth;
  out.work = r.work;
  return out;
}

SolveOutcome from_iterative(IterReport&& r) {
  SolveOutcome out;
  out.solution = std::move(r.solution);
  out.residual_norm = r.residual_norm;
  out.iterations = r.iterations;
  out.restarts = r.restarts;
  out.converged = r.converged;
  out.delta_vectors = r.delta_vectors;
  out.work = r.work;
  return out;
}

}  // namespace

ExperimentReport run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  ExperimentReport report;
  report.spec = spec;
  const auto t0 = std::chrono::steady_clock::now();

  try {
    std::vector<std::vector<Vec>> oracles;   // per sample, block order
    std::vector<SolveOutcome> outcomes;

    if (spec.kind == "fnn") {
      const FeedForwardNet net = generate_fnn(spec);
      SampleData data = generate_samples(spec, spec.batch, net.output_width());
      std::vector<ForwardTrace> traces;
      traces.reserve(spec.batch);
      std::vector<Vec> errors(spec.batch);
      for (std::size_t i = 0; i < spec.batch; ++i) {
        traces.push_back(forward(net, data.inputs[i]));
        if (spec.mode == PropMode::Backward)
          errors[i] =
              softmax_xent(traces[i].act[0].back(), data.targets[i]).grad;
      }

      for (std::size_t i = 0; i < spec.batch; ++i)
        oracles.push_back(spec.mode == PropMode::Forward
                              ? forward_oracle_blocks(traces[i], 0)
                              : backward(net, traces[i], errors[i]).layer_errors[0]);

      auto solve_one = [&](const BlockChainSystem& sys) {
        switch (spec.solver) {
          case SolverChoice::Substitution: return from_direct(solve_substitution(sys));
          case SolverChoice::Cyclic:
            return from_direct(solve_cyclic_reduction(sys, spec.leaf_threshold));
          case SolverChoice::Jacobi: return from_iterative(jacobi_solve(sys, spec.iter));
          case SolverChoice::Richardson:
            return from_iterative(richardson_solve(sys, spec.iter));
          case SolverChoice::BiCGStab: return from_iterative(bicgstab_solve(sys, spec.iter));
          default: throw std::invalid_argument("unsupported solver for fnn");
        }
      };

      if (spec.batch == 1) {
        const BlockChainSystem sys =
            spec.mode == PropMode::Forward
                ? build_forward_system(net, data.inputs[0], traces[0])
                : build_backward_system(net, traces[0], errors[0]);
        outcomes.push_back(solve_one(sys));
      } else {
        const ShiftedBatch batch =
            build_shifted_batch(net, data.inputs, traces, errors, spec.mode);
        if (spec.solver == SolverChoice::Substitution || spec.solver == SolverChoice::Cyclic) {
          for (std::size_t i = 0; i < spec.batch; ++i)
            outcomes.push_back(solve_one(batch.member(i)));
        } else {
          const IterMethod method = spec.solver == SolverChoice::Jacobi
                                        ? IterMethod::Jacobi
                                        : spec.solver == SolverChoice::Richardson
                                              ? IterMethod::Richardson
                                              : IterMethod::BiCGStab;
          for (IterReport& r : solve_shifted_batch(batch, method, spec.iter))
            outcomes.push_back(from_iterative(std::move(r)));
        }
      }
    } else {
      const RecurrentNet net = generate_rnn(spec);
      SampleData data = generate_samples(spec, spec.tau, net.output_width());
      const ForwardTrace trace = rnn_forward(net, data.inputs);
      std::vector<Vec> errors(spec.tau);
      if (spec.mode == PropMode::Backward)
        for (std::size_t s = 0; s < spec.tau; ++s)
          errors[s] = softmax_xent(trace.act[s].back(), data.targets[s]).grad;

      std::vector<Vec> oracle;
      if (spec.mode == PropMode::Forward) {
        for (std::size_t s = 0; s < spec.tau; ++s)
          for (Vec& b : forward_oracle_blocks(trace, s)) oracle.push_back(std::move(b));
      } else {
        GradientSet g = rnn_backward(net, trace, errors);
        for (std::size_t s = 0; s < spec.tau; ++s)
          for (Vec& b : g.layer_errors[s]) oracle.push_back(std::move(b));
      }
      oracles.push_back(std::move(oracle));

      const NestedBlockSystem sys =
          spec.mode == PropMode::Forward
              ? build_rnn_forward_system(net, data.inputs, trace)
              : build_rnn_backward_system(net, trace, errors);
      switch (spec.solver) {
        case SolverChoice::Substitution:
          outcomes.push_back(from_direct(solve_nested_substitution(sys)));
          break;
        case SolverChoice::Cyclic:
          outcomes.push_back(from_direct(solve_nested_rnn(sys, InnerSolver::CyclicReduction)));
          break;
        case SolverChoice::Hybrid:
          outcomes.push_back(from_iterative(
              hybrid_solve_rnn(sys, spec.hybrid_outer, spec.hybrid_inner, spec.iter)));
          break;
        default: throw std::invalid_argument("unsupported solver for rnn");
      }
    }

    for (std::size_t i = 0; i < outcomes.size(); ++i) {
      report.oracle_max_abs_err =
          std::max(report.oracle_max_abs_err, max_abs_diff(outcomes[i].solution, oracles[i]));
      report.residual_norm = std::max(report.residual_norm, outcomes[i].residual_norm);
      report.iterations = std::max(report.iterations, outcomes[i].iterations);
      report.recursion_depth = std::max(report.recursion_depth, outcomes[i].depth);
      report.restarts += outcomes[i].restarts;
      report.converged = report.converged && outcomes[i].converged;
      report.delta_vectors = std::max(report.delta_vectors, outcomes[i].delta_vectors);
      report.work += outcomes[i].work;
    }
    report.verified = report.converged && report.oracle_max_abs_err < spec.verify_tol;
  } catch (const BreakdownError& e) {
    report.breakdown = e.what();
    report.converged = false;
    report.verified = false;
  }

  report.predicted = predict_work(spec, spec.solver, report.iterations);
  report.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

StaleRun stale_diagonal_run(const ExperimentSpec& spec, double sigma) {
  spec.validate();
  if (spec.kind != "fnn")
    throw std::invalid_argument("stale_diagonal_run: fnn specs only");
  if (sigma < 0.0) throw std::invalid_argument("stale_diagonal_run: sigma must be >= 0");

  StaleRun run;
  run.sigma = sigma;

  const FeedForwardNet net = generate_fnn(spec);
  SplitMix64 data_rng(spec.seed ^ kDataStream);
  const Vec input = random_vec(data_rng, spec.widths.front(), 1.0);
  const ForwardTrace stale_trace = forward(net, input);

  FeedForwardNet perturbed = net;
  SplitMix64 noise(spec.seed ^ kPerturbStream);
  for (Layer& layer : perturbed.layers)
    for (double& v : layer.weights.a) v += noise.next_symmetric(sigma);

  try {
    const BlockChainSystem sys = build_forward_system(perturbed, input, stale_trace);
    const SolveReport solved = solve_substitution(sys);
    const ForwardTrace truth = forward(perturbed, input);
    run.max_abs_err = max_abs_diff(solved.solution, forward_oracle_blocks(truth, 0));
  } catch (const BreakdownError&) {
    run.breakdown = true;
  }
  return run;
}

AppendixReport run_appendix_check(const ExperimentSpec& spec) {
  spec.validate();
  if (spec.kind != "fnn")
    throw std::invalid_argument("appendix check: fnn specs only");

  AppendixReport out;
  out.spec = spec;
  const FeedForwardNet net = generate_fnn(spec);
  SampleData data = generate_samples(spec, 1, net.output_width());
  const ForwardTrace trace = forward(net, data.inputs[0]);

  BlockChainSystem sys;
  if (spec.mode == PropMode::Forward) {
    sys = build_forward_system(net, data.inputs[0], trace);
  } else {
    const Vec eps = softmax_xent(trace.act[0].back(), data.targets[0]).grad;
    sys = build_backward_system(net, trace, eps);
  }
  const AppendixCheckResult result = appendix_scaling_check(sys);
  out.matrix_deviation = result.matrix_deviation;
  out.rhs_deviation = result.rhs_deviation;
  out.literal_matrix_deviation = result.literal_matrix_deviation;
  out.ok = result.ok;
  return out;
}

// --- serialization ---------------------------------------------------------

namespace {

json layer_to_json(const Matrix& w, const Matrix* u, const Vec& b, ActivationKind act) {
  json j;
  j["w"] = w.a;
  if (u) j["u"] = u->a;
  j["b"] = b;
  j["act"] = activation_name(act);
  return j;
}

Matrix matrix_from_flat(const std::vector<double>& flat, std::size_t rows, std::size_t cols) {
  if (flat.size() != rows * cols)
    throw std::invalid_argument("net json: weight block has wrong length");
  Matrix m(rows, cols);
  m.a = flat;
  return m;
}

std::string mode_name(PropMode mode) {
  return mode == PropMode::Forward ? "forward" : "backward";
}

PropMode parse_mode(const std::string& s) {
  if (s == "forward") return PropMode::Forward;
  if (s == "backward") return PropMode::Backward;
  throw std::invalid_argument("unknown mode: " + s);
}

json work_to_json(const WorkCounters& w) {
  json j;
  j["fma"] = w.fma;
  j["activation"] = w.activation;
  j["parallel_steps"] = w.parallel_steps;
  j["peak_blocks_live"] = w.peak_live_scalars;
  return j;
}

json predicted_to_json(const PredictedWork& w) {
  json j;
  j["fma"] = w.fma;
  j["activation"] = w.activation_weighted;
  j["parallel_steps"] = w.parallel_steps;
  j["peak_blocks_live"] = 0;
  return j;
}

json spec_to_json_obj(const ExperimentSpec& spec) {
  json j;
  j["kind"] = spec.kind;
  j["widths"] = spec.widths;
  j["tau"] = spec.tau;
  j["batch"] = spec.batch;
  j["activation"] = activation_name(spec.activation);
  j["mode"] = mode_name(spec.mode);
  j["solver"] = solver_name(spec.solver, spec.hybrid_outer, spec.hybrid_inner);
  j["tol"] = spec.iter.tol;
  j["max_iters"] = spec.iter.max_iters;
  j["omega"] = spec.iter.omega;
  j["leaf_threshold"] = spec.leaf_threshold;
  j["seed"] = spec.seed;
  if (spec.gamma_override) j["gamma"] = *spec.gamma_override;
  j["verify_tol"] = spec.verify_tol;
  return j;
}

void parse_solver(const std::string& s, ExperimentSpec& spec) {
  if (s == "substitution") {
    spec.solver = SolverChoice::Substitution;
  } else if (s == "cyclic") {
    spec.solver = SolverChoice::Cyclic;
  } else if (s == "jacobi") {
    spec.solver = SolverChoice::Jacobi;
  } else if (s == "richardson") {
    spec.solver = SolverChoice::Richardson;
  } else if (s == "bicgstab") {
    spec.solver = SolverChoice::BiCGStab;
  } else if (s.rfind("hybrid:", 0) == 0) {
    spec.solver = SolverChoice::Hybrid;
    const std::string rest = s.substr(7);
    const auto plus = rest.find('+');
    if (plus == std::string::npos)
      throw std::invalid_argument("solver: expected hybrid:<outer>+<inner>");
    const std::string outer = rest.substr(0, plus);
    const std::string inner = rest.substr(plus + 1);
    if (outer == "jacobi")
      spec.hybrid_outer = OuterMethod::Jacobi;
    else if (outer == "bicgstab")
      spec.hybrid_outer = OuterMethod::BiCGStab;
    else
      throw std::invalid_argument("solver: unknown hybrid outer: " + outer);
    if (inner == "substitution")
      spec.hybrid_inner = InnerSolver::Substitution;
    else if (inner == "cyclic")
      spec.hybrid_inner = InnerSolver::CyclicReduction;
    else
      throw std::invalid_argument("solver: unknown hybrid inner: " + inner);
  } else {
    throw std::invalid_argument("unknown solver: " + s);
  }
}

}  // namespace

std::string net_to_json(const FeedForwardNet& net) {
  json j;
  j["kind"] = "fnn";
  j["widths"] = net.widths();
  j["layers"] = json::array();
  for (const Layer& layer : net.layers)
    j["layers"].push_back(layer_to_json(layer.weights, nullptr, layer.bias, layer.act));
  return j.dump(2) + "\n";
}

std::string net_to_json(const RecurrentNet& net) {
  json j;
  j["kind"] = "rnn";
  j["widths"] = net.widths();
  j["tau"] = net.horizon;
  j["layers"] = json::array();
  for (const RecurrentLayer& layer : net.layers)
    j["layers"].push_back(
        layer_to_json(layer.weights, &layer.recurrent, layer.bias, layer.act));
  return j.dump(2) + "\n";
}

ParsedNet net_from_json(const std::string& text) {
  const json j = json::parse(text);
  ParsedNet out;
  const std::string kind = j.at("kind").get<std::string>();
  const std::vector<std::size_t> widths = j.at("widths").get<std::vector<std::size_t>>();
  if (widths.size() < 2) throw std::invalid_argument("net json: need at least two widths");
  const json& layers = j.at("layers");
  if (layers.size() + 1 != widths.size())
    throw std::invalid_argument("net json: layer count does not match widths");

  if (kind == "fnn") {
    for (std::size_t k = 1; k <= layers.size(); ++k) {
      const json& lj = layers[k - 1];
      Layer layer;
      layer.weights =
          matrix_from_flat(lj.at("w").get<std::vector<double>>(), widths[k], widths[k - 1]);
      layer.bias = lj.at("b").get<Vec>();
      layer.act = parse_activation(lj.at("act").get<std::string>());
      out.fnn.layers.push_back(std::move(layer));
    }
    out.fnn.validate();
  } else if (kind == "rnn") {
    out.is_rnn = true;
    out.rnn.horizon = j.at("tau").get<std::size_t>();
    for (std::size_t k = 1; k <= layers.size(); ++k) {
      const json& lj = layers[k - 1];
      RecurrentLayer layer;
      layer.weights =
          matrix_from_flat(lj.at("w").get<std::vector<double>>(), widths[k], widths[k - 1]);
      layer.recurrent =
          matrix_from_flat(lj.at("u").get<std::vector<double>>(), widths[k], widths[k]);
      layer.bias = lj.at("b").get<Vec>();
      layer.act = parse_activation(lj.at("act").get<std::string>());
      out.rnn.layers.push_back(std::move(layer));
    }
    out.rnn.validate();
  } else {
    throw std::invalid_argument("net json: unknown kind " + kind);
  }
  return out;
}

std::string spec_to_json(const ExperimentSpec& spec) { return spec_to_json_obj(spec).dump(2) + "\n"; }

ExperimentSpec spec_from_json(const std::string& text) {
  const json j = json::parse(text);
  ExperimentSpec spec;
  if (j.contains("kind")) spec.kind = j.at("kind").get<std::string>();
  if (j.contains("widths")) {
    spec.widths = j.at("widths").get<std::vector<std::size_t>>();
  } else {
    const std::size_t layers = j.at("layers").get<std::size_t>();
    const std::size_t width = j.at("width").get<std::size_t>();
    spec.widths.assign(layers + 1, width);
  }
  if (j.contains("tau")) spec.tau = j.at("tau").get<std::size_t>();
  if (j.contains("batch")) spec.batch = j.at("batch").get<std::size_t>();
  if (j.contains("activation"))
    spec.activation = parse_activation(j.at("activation").get<std::string>());
  if (j.contains("mode")) spec.mode = parse_mode(j.at("mode").get<std::string>());
  if (j.contains("solver")) parse_solver(j.at("solver").get<std::string>(), spec);
  if (j.contains("tol")) spec.iter.tol = j.at("tol").get<double>();
  if (j.contains("max_iters")) spec.iter.max_iters = j.at("max_iters").get<std::size_t>();
  if (j.contains("omega")) spec.iter.omega = j.at("omega").get<double>();
  if (j.contains("leaf_threshold"))
    spec.leaf_threshold = j.at("leaf_threshold").get<std::size_t>();
  if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("gamma")) spec.gamma_override = j.at("gamma").get<unsigned>();
  if (j.contains("verify_tol")) spec.verify_tol = j.at("verify_tol").get<double>();
  spec.validate();
  return spec;
}

std::string report_to_json(const ExperimentReport& report) {
  json j;
  j["spec"] = spec_to_json_obj(report.spec);
  j["oracle_max_abs_err"] = report.oracle_max_abs_err;
  j["residual_norm"] = report.residual_norm;
  j["iterations"] = report.iterations;
  j["recursion_depth"] = report.recursion_depth;
  j["restarts"] = report.restarts;
  j["converged"] = report.converged;
  j["verified"] = report.verified;
  j["delta_vectors"] = report.delta_vectors;
  j["work"] = work_to_json(report.work);
  j["predicted_work"] = predicted_to_json(report.predicted);
  j["wall_ms"] = report.wall_ms;
  if (!report.breakdown.empty()) j["breakdown"] = report.breakdown;
  return j.dump(2) + "\n";
}

std::string appendix_report_to_json(const AppendixReport& report) {
  json j;
  j["spec"] = spec_to_json_obj(report.spec);
  j["matrix_deviation"] = report.matrix_deviation;
  j["rhs_deviation"] = report.rhs_deviation;
  if (std::isnan(report.literal_matrix_deviation))
    j["literal_matrix_deviation"] = nullptr;
  else
    j["literal_matrix_deviation"] = report.literal_matrix_deviation;
  j["ok"] = report.ok;
  return j.dump(2) + "\n";
}

std::string stale_report_to_json(const ExperimentSpec& spec,
                                 const std::vector<StaleRun>& runs) {
  json j;
  j["spec"] = spec_to_json_obj(spec);
  j["sigmas"] = json::array();
  j["errors"] = json::array();
  j["breakdowns"] = json::array();
  for (const StaleRun& run : runs) {
    j["sigmas"].push_back(run.sigma);
    j["errors"].push_back(run.max_abs_err);
    j["breakdowns"].push_back(run.breakdown);
  }
  return j.dump(2) + "\n";
}

std::string report_csv_header() {
  return "kind,layers,widths,tau,batch,activation,mode,solver,seed,oracle_max_abs_err,"
         "residual_norm,iterations,recursion_depth,restarts,converged,verified,fma,"
         "activation_ops,parallel_steps,peak_blocks_live,predicted_fma,"
         "predicted_activation,predicted_parallel_steps,wall_ms";
}

namespace {

std::string dump_double(double v) { return json(v).dump(); }

}  // namespace

std::string report_csv_row(const ExperimentReport& report) {
  const ExperimentSpec& s = report.spec;
  std::string widths;
  for (std::size_t i = 0; i < s.widths.size(); ++i) {
    if (i) widths += ';';
    widths += std::to_string(s.widths[i]);
  }
  std::string row;
  row += s.kind;
  row += ',' + std::to_string(s.depth());
  row += ',' + widths;
  row += ',' + std::to_string(s.tau);
  row += ',' + std::to_string(s.batch);
  row += ',' + activation_name(s.activation);
  row += ',' + mode_name(s.mode);
  row += ',' + solver_name(s.solver, s.hybrid_outer, s.hybrid_inner);
  row += ',' + std::to_string(s.seed);
  row += ',' + dump_double(report.oracle_max_abs_err);
  row += ',' + dump_double(report.residual_norm);
  row += ',' + std::to_string(report.iterations);
  row += ',' + std::to_string(report.recursion_depth);
  row += ',' + std::to_string(report.restarts);
  row += std::string(",") + (report.converged ? "true" : "false");
  row += std::string(",") + (report.verified ? "true" : "false");
  row += ',' + std::to_string(report.work.fma);
  row += ',' + std::to_string(report.work.activation);
  row += ',' + std::to_string(report.work.parallel_steps);
  row += ',' + std::to_string(report.work.peak_live_scalars);
  row += ',' + std::to_string(report.predicted.fma);
  row += ',' + std::to_string(report.predicted.activation_weighted);
  row += ',' + std::to_string(report.predicted.parallel_steps);
  row += ',' + dump_double(report.wall_ms);
  return row;
}

}  // namespace bdprop
