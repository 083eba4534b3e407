#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "bdprop/bench.hpp"
#include "bdprop/direct.hpp"
#include "bdprop/iterative.hpp"
#include "bdprop/rng.hpp"
#include "oracles.hpp"

using namespace bdprop;

namespace {

ExperimentSpec uniform_spec(std::size_t layers, std::size_t width, Activation act,
                            std::uint64_t seed) {
  ExperimentSpec spec;
  spec.widths.assign(layers + 1, width);
  spec.activation = {act, 0.0};
  spec.seed = seed;
  return spec;
}

Vec seeded_input(std::size_t n, std::uint64_t seed) {
  SplitMix64 rng(seed * 65537 + 11);
  Vec x(n);
  for (double& v : x) v = rng.next_symmetric(1.0);
  return x;
}

BlockChainSystem seeded_backward(std::size_t layers, std::size_t width, Activation act,
                                 std::uint64_t seed, std::vector<Vec>* oracle = nullptr) {
  const FeedForwardNet net = generate_fnn(uniform_spec(layers, width, act, seed));
  const Vec input = seeded_input(width, seed + 1);
  const ForwardTrace trace = forward(net, input);
  const Vec eps = seeded_input(width, seed + 2);
  if (oracle) *oracle = backward(net, trace, eps).layer_errors[0];
  return build_backward_system(net, trace, eps);
}

BlockChainSystem identity_system(std::size_t blocks, std::size_t n) {
  BlockChainSystem sys;
  sys.orientation = Orientation::LowerForward;
  Matrix eye(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) eye(i, i) = 1.0;
  for (std::size_t k = 0; k < blocks; ++k) {
    sys.inv_diagonals.push_back(Vec(n, 1.0));
    sys.rhs.push_back(Vec(n, 1.0));
    if (k + 1 < blocks) sys.couplings.push_back(LinearOperator::dense(eye));
  }
  return sys;
}

}  // namespace

TEST_CASE("scaled_matvec: zero stays zero; identity example") {
  const BlockChainSystem sys = identity_system(2, 3);
  std::vector<Vec> zero(2, Vec(3, 0.0));
  for (const Vec& q : scaled_matvec(sys, zero))
    for (double v : q) CHECK(v == 0.0);

  const std::vector<Vec> ones(2, Vec(3, 1.0));
  const std::vector<Vec> q = scaled_matvec(sys, ones);
  for (double v : q[0]) CHECK(v == 1.0);
  for (double v : q[1]) CHECK(v == 0.0);
}

TEST_CASE("scaled_matvec agrees with the dense scaled matrix") {
  std::vector<Vec> oracle;
  const BlockChainSystem sys = seeded_backward(5, 3, Activation::Tanh, 211, &oracle);
  const DenseSystem dense = assemble_dense(sys);

  // scale each dense row by the stored inverse diagonal of its block
  Vec inv_flat;
  for (const Vec& d : sys.inv_diagonals) inv_flat.insert(inv_flat.end(), d.begin(), d.end());
  std::vector<Vec> p;
  Vec p_flat;
  for (std::size_t k = 0; k < sys.block_count(); ++k) {
    p.push_back(seeded_input(sys.block_size(k), 300 + k));
    p_flat.insert(p_flat.end(), p.back().begin(), p.back().end());
  }
  Vec expect(dense.a.rows, 0.0);
  for (std::size_t i = 0; i < dense.a.rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < dense.a.cols; ++j) s += dense.a(i, j) * p_flat[j];
    expect[i] = inv_flat[i] * s;
  }
  const std::vector<Vec> q = scaled_matvec(sys, p);
  std::size_t idx = 0;
  for (const Vec& block : q)
    for (double v : block) CHECK(std::fabs(v - expect[idx++]) < 1e-12);
}

TEST_CASE("jacobi_solve: one-block system converges in one iteration") {
  BlockChainSystem sys;
  sys.orientation = Orientation::LowerForward;
  sys.inv_diagonals.push_back(Vec{0.5, 2.0});
  sys.rhs.push_back(Vec{4.0, 1.0});
  const IterReport rep = jacobi_solve(sys);
  CHECK(rep.iterations == 1);
  CHECK(rep.converged);
  CHECK(rep.solution[0][0] == 2.0);
  CHECK(rep.solution[0][1] == 2.0);
}

TEST_CASE("jacobi_solve: blocks fill in solve order (nilpotency index)") {
  FeedForwardNet net;
  net.layers.push_back({Matrix(1, 1, 2.0), Vec{1.0}, {Activation::Identity, 0.0}});
  const Vec input{3.0};
  const BlockChainSystem sys = build_forward_system(net, input, forward(net, input));
  const IterReport rep = jacobi_solve(sys);
  CHECK(rep.iterations == 2);
  CHECK(rep.converged);
  CHECK(rep.solution[0][0] == 3.0);
  CHECK(rep.solution[1][0] == 7.0);
}

TEST_CASE("jacobi_solve: seeded backward system within block_count iterations") {
  std::vector<Vec> oracle;
  const BlockChainSystem sys = seeded_backward(7, 3, Activation::Tanh, 223, &oracle);
  const IterReport rep = jacobi_solve(sys);
  CHECK(rep.converged);
  CHECK(rep.iterations <= 8);
  CHECK(max_abs_diff(rep.solution, oracle) < 1e-10);
}

TEST_CASE("jacobi_solve: monotone fill-in toward the substitution solution") {
  std::vector<Vec> oracle;
  const BlockChainSystem sys = seeded_backward(6, 2, Activation::Sigmoid, 227, &oracle);
  const std::vector<Vec> exact = solve_substitution(sys).solution;
  const std::size_t blocks = sys.block_count();
  for (std::size_t updates = 1; updates <= blocks; ++updates) {
    IterationConfig cfg;
    cfg.tol = 0.0;  // never stop early
    cfg.max_iters = updates;
    const IterReport rep = jacobi_solve(sys, cfg);
    // UpperBackward solves from the last block down, so the solve-order
    // prefix is the trailing blocks
    for (std::size_t j = 0; j < updates; ++j) {
      const std::size_t k = blocks - 1 - j;
      for (std::size_t i = 0; i < exact[k].size(); ++i)
        CHECK(std::fabs(rep.solution[k][i] - exact[k][i]) < 1e-12);
    }
  }
}

TEST_CASE("jacobi residual history has eta + 1 entries") {
  const BlockChainSystem sys = identity_system(4, 2);
  const IterReport rep = jacobi_solve(sys);
  CHECK(rep.residual_history.size() == rep.iterations + 1);
  CHECK(rep.converged);
}

TEST_CASE("richardson_solve: omega = 1 coincides with Jacobi iterate by iterate") {
  const BlockChainSystem sys = seeded_backward(5, 3, Activation::Tanh, 229);
  IterationConfig cfg;
  cfg.omega = 1.0;
  const IterReport jac = jacobi_solve(sys, cfg);
  const IterReport rich = richardson_solve(sys, cfg);
  CHECK(jac.iterations == rich.iterations);
  CHECK(max_abs_diff(jac.solution, rich.solution) == 0.0);
  for (std::size_t i = 0; i < jac.residual_history.size(); ++i)
    CHECK(jac.residual_history[i] == rich.residual_history[i]);
}

TEST_CASE("richardson_solve: omega = 0 never moves") {
  const BlockChainSystem sys = identity_system(3, 2);
  IterationConfig cfg;
  cfg.omega = 0.0;
  const IterReport rep = richardson_solve(sys, cfg);
  CHECK_FALSE(rep.converged);
  for (const Vec& b : rep.solution)
    for (double v : b) CHECK(v == 0.0);
}

TEST_CASE("richardson_solve: damped iteration still converges") {
  std::vector<Vec> oracle;
  const BlockChainSystem sys = seeded_backward(7, 2, Activation::Tanh, 233, &oracle);
  IterationConfig cfg;
  cfg.omega = 0.5;
  cfg.max_iters = 64;
  cfg.tol = 1e-11;
  const IterReport rep = richardson_solve(sys, cfg);
  CHECK(rep.converged);
  CHECK(max_abs_diff(rep.solution, oracle) < 1e-8);
}

TEST_CASE("bicgstab_solve: zero rhs converges immediately") {
  BlockChainSystem sys = identity_system(3, 2);
  for (Vec& b : sys.rhs) b.assign(b.size(), 0.0);
  const IterReport rep = bicgstab_solve(sys);
  CHECK(rep.converged);
  CHECK(rep.iterations == 0);
  for (const Vec& b : rep.solution)
    for (double v : b) CHECK(v == 0.0);
}

TEST_CASE("bicgstab_solve: one-block system needs one iteration") {
  BlockChainSystem sys;
  sys.orientation = Orientation::LowerForward;
  sys.inv_diagonals.push_back(Vec{1.0, 1.0});
  sys.rhs.push_back(Vec{3.0, -2.0});
  const IterReport rep = bicgstab_solve(sys);
  CHECK(rep.converged);
  CHECK(rep.iterations == 1);
  CHECK(rep.solution[0][0] == doctest::Approx(3.0));
}

TEST_CASE("bicgstab_solve: seeded backward system at depth 15") {
  std::vector<Vec> oracle;
  const BlockChainSystem sys = seeded_backward(15, 4, Activation::Tanh, 239, &oracle);
  const IterReport rep = bicgstab_solve(sys);
  CHECK(rep.converged);
  CHECK(rep.iterations <= 2 * sys.block_count());
  CHECK(max_abs_diff(rep.solution, oracle) < 1e-9);
  const double bnorm = inf_norm_blocks(sys.rhs);
  CHECK(rep.unscaled_residual <= 10.0 * 1e-10 * bnorm);
}

TEST_CASE("solve_shifted_batch: r = 1 equals the single-system report") {
  const FeedForwardNet net = generate_fnn(uniform_spec(5, 3, Activation::Sigmoid, 241));
  const Vec input = seeded_input(3, 400);
  const ForwardTrace trace = forward(net, input);
  const Vec eps = seeded_input(3, 401);
  const ShiftedBatch batch =
      build_shifted_batch(net, {input}, {trace}, {eps}, PropMode::Backward);
  const std::vector<IterReport> reports = solve_shifted_batch(batch, IterMethod::BiCGStab);
  const IterReport single = bicgstab_solve(batch.member(0));
  CHECK(reports.size() == 1);
  CHECK(reports[0].iterations == single.iterations);
  CHECK(max_abs_diff(reports[0].solution, single.solution) == 0.0);
}

TEST_CASE("solve_shifted_batch: identical members produce identical reports") {
  const FeedForwardNet net = generate_fnn(uniform_spec(4, 2, Activation::Tanh, 251));
  const Vec input = seeded_input(2, 402);
  const ForwardTrace trace = forward(net, input);
  const std::vector<Vec> inputs(3, input);
  const std::vector<ForwardTrace> traces(3, trace);
  const ShiftedBatch batch = build_shifted_batch(net, inputs, traces, {}, PropMode::Forward);
  const std::vector<IterReport> reports = solve_shifted_batch(batch, IterMethod::Jacobi);
  for (std::size_t i = 1; i < reports.size(); ++i) {
    CHECK(reports[i].iterations == reports[0].iterations);
    CHECK(max_abs_diff(reports[i].solution, reports[0].solution) == 0.0);
  }
}

TEST_CASE("solve_shifted_batch: members match their per-sample oracles") {
  const FeedForwardNet net = generate_fnn(uniform_spec(6, 3, Activation::Tanh, 257));
  std::vector<Vec> inputs, errors;
  std::vector<ForwardTrace> traces;
  for (int i = 0; i < 4; ++i) {
    inputs.push_back(seeded_input(3, 500 + i));
    traces.push_back(forward(net, inputs.back()));
    errors.push_back(seeded_input(3, 600 + i));
  }
  const ShiftedBatch batch =
      build_shifted_batch(net, inputs, traces, errors, PropMode::Backward);
  for (IterMethod method : {IterMethod::Jacobi, IterMethod::Richardson, IterMethod::BiCGStab}) {
    const std::vector<IterReport> reports = solve_shifted_batch(batch, method);
    for (std::size_t i = 0; i < 4; ++i) {
      const std::vector<Vec> oracle = solve_substitution(batch.member(i)).solution;
      CHECK(max_abs_diff(reports[i].solution, oracle) < 1e-9);
    }
  }
}

TEST_CASE("hybrid_solve_rnn: tau = 1 is one outer iteration around one inner solve") {
  ExperimentSpec spec = uniform_spec(3, 2, Activation::Tanh, 263);
  spec.kind = "rnn";
  spec.tau = 1;
  const RecurrentNet net = generate_rnn(spec);
  const std::vector<Vec> inputs{seeded_input(2, 700)};
  const ForwardTrace trace = rnn_forward(net, inputs);
  const NestedBlockSystem sys = build_rnn_forward_system(net, inputs, trace);
  const IterReport rep = hybrid_solve_rnn(sys, OuterMethod::Jacobi, InnerSolver::Substitution);
  CHECK(rep.converged);
  CHECK(rep.iterations == 1);
}

TEST_CASE("hybrid_solve_rnn: accumulator is exact after tau outer iterations") {
  RecurrentNet net;
  net.horizon = 3;
  net.layers.push_back(
      {Matrix(1, 1, 1.0), Matrix(1, 1, 1.0), Vec{0.0}, {Activation::Identity, 0.0}});
  const std::vector<Vec> inputs{Vec{1.0}, Vec{1.0}, Vec{1.0}};
  const ForwardTrace trace = rnn_forward(net, inputs);
  const NestedBlockSystem sys = build_rnn_forward_system(net, inputs, trace);
  const IterReport rep = hybrid_solve_rnn(sys, OuterMethod::Jacobi, InnerSolver::Substitution);
  CHECK(rep.converged);
  CHECK(rep.iterations == 3);
  CHECK(rep.solution[5][0] == doctest::Approx(3.0));
}

TEST_CASE("hybrid_solve_rnn: outer BiCGStab matches BPTT") {
  ExperimentSpec spec = uniform_spec(3, 3, Activation::Sigmoid, 269);
  spec.kind = "rnn";
  spec.tau = 5;
  const RecurrentNet net = generate_rnn(spec);
  std::vector<Vec> inputs, errors;
  for (std::size_t s = 0; s < 5; ++s) {
    inputs.push_back(seeded_input(3, 800 + s));
    errors.push_back(seeded_input(3, 900 + s));
  }
  const ForwardTrace trace = rnn_forward(net, inputs);
  const GradientSet grads = rnn_backward(net, trace, errors);
  std::vector<Vec> oracle;
  for (std::size_t s = 0; s < 5; ++s)
    for (const Vec& v : grads.layer_errors[s]) oracle.push_back(v);

  const NestedBlockSystem sys = build_rnn_backward_system(net, trace, errors);
  const IterReport rep = hybrid_solve_rnn(sys, OuterMethod::BiCGStab, InnerSolver::Substitution);
  CHECK(rep.converged);
  CHECK(max_abs_diff(rep.solution, oracle) < 1e-9);
}

TEST_CASE("diagonal_dominance_check: identity and empty couplings") {
  const BlockChainSystem sys = identity_system(3, 2);
  const DominanceResult dom = diagonal_dominance_check(sys);
  CHECK(dom.max_ratio == 1.0);  // |I| row sum = diagonal = 1
  for (double r : dom.row_ratios[0]) CHECK(r == 0.0);

  BlockChainSystem zero = sys;
  for (LinearOperator& op : zero.couplings) op = LinearOperator::zero(2, 2);
  const DominanceResult zdom = diagonal_dominance_check(zero);
  CHECK(zdom.max_ratio == 0.0);
}

TEST_CASE("diagonal_dominance_check matches a dense row computation") {
  const BlockChainSystem sys = seeded_backward(5, 3, Activation::Tanh, 271);
  const DenseSystem dense = assemble_dense(sys);
  const DominanceResult dom = diagonal_dominance_check(sys);
  std::size_t row = 0;
  for (std::size_t k = 0; k < sys.block_count(); ++k)
    for (std::size_t i = 0; i < sys.block_size(k); ++i, ++row) {
      double offsum = 0.0;
      for (std::size_t j = 0; j < dense.a.cols; ++j)
        if (j != row) offsum += std::fabs(dense.a(row, j));
      const double expect = offsum / std::fabs(dense.a(row, row));
      CHECK(oracle::rel_err(dom.row_ratios[k][i], expect) < 1e-12);
    }
}

TEST_CASE("iteration vector counts sit inside the worst-case window") {
  const BlockChainSystem sys = seeded_backward(4, 2, Activation::Tanh, 277);
  const IterReport jac = jacobi_solve(sys);
  const IterReport bi = bicgstab_solve(sys);
  CHECK(jac.delta_vectors == 2);
  CHECK(bi.delta_vectors == 7);
  for (std::size_t d : {jac.delta_vectors, bi.delta_vectors}) {
    CHECK(d >= 2);
    CHECK(d <= 7);
  }
}
