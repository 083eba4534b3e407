#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "bdprop/bench.hpp"
#include "bdprop/direct.hpp"
#include "bdprop/rng.hpp"
#include "bdprop/system.hpp"
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
  SplitMix64 rng(seed * 7919 + 1);
  Vec x(n);
  for (double& v : x) v = rng.next_symmetric(1.0);
  return x;
}

std::vector<Vec> forward_blocks(const ForwardTrace& trace) {
  std::vector<Vec> blocks{trace.inputs[0]};
  for (const Vec& z : trace.act[0]) blocks.push_back(z);
  return blocks;
}

}  // namespace

TEST_CASE("diag_ratio_forward corner policy") {
  CHECK(diag_ratio_forward(3.0, 3.0) == 1.0);
  CHECK(diag_ratio_forward(-2.0, 0.0) == 0.0);
  CHECK(diag_ratio_forward(0.0, 0.0) == 1.0);
  CHECK_THROWS_AS(diag_ratio_forward(0.0, 0.5), BreakdownError);
  CHECK_THROWS_AS(diag_ratio_forward(1.0, 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("transposed operator applies the exact transpose") {
  Matrix m(2, 3);
  m.a = {1.0, 2.0, 3.0, 4.0, 5.0, 6.0};
  const LinearOperator op = LinearOperator::transposed(m);
  Vec acc(3, 0.0);
  op.apply_add(Vec{1.0, -1.0}, acc, nullptr);
  CHECK(acc == Vec{-3.0, -3.0, -3.0});
  CHECK(op.materialize() == transpose(m));
}

TEST_CASE("build_forward_system: one affine layer") {
  FeedForwardNet net;
  net.layers.push_back({Matrix(1, 1, 2.0), Vec{1.0}, {Activation::Identity, 0.0}});
  const Vec input{3.0};
  const BlockChainSystem sys = build_forward_system(net, input, forward(net, input));
  const SolveReport rep = solve_substitution(sys);
  CHECK(rep.solution[0][0] == 3.0);
  CHECK(rep.solution[1][0] == 7.0);
}

TEST_CASE("build_forward_system: identity activations give unit inverse diagonals") {
  ExperimentSpec spec = uniform_spec(4, 3, Activation::Identity, 19);
  const FeedForwardNet net = generate_fnn(spec);
  const Vec input = seeded_input(3, 1);
  const BlockChainSystem sys = build_forward_system(net, input, forward(net, input));
  for (const Vec& d : sys.inv_diagonals)
    for (double v : d) CHECK(v == 1.0);
}

TEST_CASE("build_forward_system: substitution reproduces the trace") {
  const ExperimentSpec spec = uniform_spec(5, 4, Activation::Tanh, 23);
  const FeedForwardNet net = generate_fnn(spec);
  const Vec input = seeded_input(4, 2);
  const ForwardTrace trace = forward(net, input);
  const SolveReport rep = solve_substitution(build_forward_system(net, input, trace));
  CHECK(max_abs_diff(rep.solution, forward_blocks(trace)) < 1e-12);
}

TEST_CASE("build_forward_system: breakdown at y = 0 with f(y) != 0") {
  FeedForwardNet net;
  net.layers.push_back({Matrix(1, 1, 1.0), Vec{-1.0}, {Activation::Sigmoid, 0.0}});
  const Vec input{1.0};  // y = 1 - 1 = 0, sigmoid(0) = 0.5
  try {
    build_forward_system(net, input, forward(net, input));
    FAIL("expected BreakdownError");
  } catch (const BreakdownError& e) {
    CHECK(e.block() == 1);
    CHECK(e.entry() == 0);
  }
}

TEST_CASE("build_backward_system: zero error gives the zero solution") {
  const ExperimentSpec spec = uniform_spec(3, 2, Activation::Tanh, 29);
  const FeedForwardNet net = generate_fnn(spec);
  const Vec input = seeded_input(2, 3);
  const ForwardTrace trace = forward(net, input);
  const SolveReport rep =
      solve_substitution(build_backward_system(net, trace, Vec(2, 0.0)));
  for (const Vec& b : rep.solution)
    for (double v : b) CHECK(v == 0.0);
}

TEST_CASE("build_backward_system: single linear layer") {
  FeedForwardNet net;
  net.layers.push_back({Matrix(1, 1, 2.0), Vec{0.0}, {Activation::Identity, 0.0}});
  const Vec input{3.0};
  const BlockChainSystem sys =
      build_backward_system(net, forward(net, input), Vec{1.0});
  const SolveReport rep = solve_substitution(sys);
  CHECK(rep.solution[0][0] == 2.0);
  CHECK(rep.solution[1][0] == 1.0);
}

TEST_CASE("backward substitution equals the sequential backward pass exactly") {
  for (Activation act : {Activation::ReLU, Activation::Tanh, Activation::Sigmoid}) {
    const ExperimentSpec spec = uniform_spec(7, 3, act, 31);
    const FeedForwardNet net = generate_fnn(spec);
    const Vec input = seeded_input(3, 4);
    const ForwardTrace trace = forward(net, input);
    const Vec eps = seeded_input(3, 5);
    const GradientSet grads = backward(net, trace, eps);
    const SolveReport rep = solve_substitution(build_backward_system(net, trace, eps));
    CHECK(max_abs_diff(rep.solution, grads.layer_errors[0]) == 0.0);  // same arithmetic
  }
}

TEST_CASE("rnn systems: tau = 1 block matches the feedforward system") {
  ExperimentSpec spec = uniform_spec(3, 2, Activation::Tanh, 37);
  spec.kind = "rnn";
  spec.tau = 1;
  const RecurrentNet rnet = generate_rnn(spec);
  const Vec input = seeded_input(2, 6);
  const ForwardTrace trace = rnn_forward(rnet, {input});
  const NestedBlockSystem nested = build_rnn_forward_system(rnet, {input}, trace);
  CHECK(nested.steps() == 1);

  const FeedForwardNet fnn = rnet.as_feed_forward();
  const ForwardTrace ft = forward(fnn, input);
  const BlockChainSystem flat = build_forward_system(fnn, input, ft);
  CHECK(nested.time_blocks[0].inv_diagonals == flat.inv_diagonals);
  CHECK(nested.time_blocks[0].couplings == flat.couplings);
  CHECK(nested.time_blocks[0].rhs == flat.rhs);
}

TEST_CASE("rnn forward system: accumulator substitution") {
  RecurrentNet net;
  net.horizon = 3;
  net.layers.push_back(
      {Matrix(1, 1, 1.0), Matrix(1, 1, 1.0), Vec{0.0}, {Activation::Identity, 0.0}});
  const std::vector<Vec> inputs{Vec{1.0}, Vec{1.0}, Vec{1.0}};
  const ForwardTrace trace = rnn_forward(net, inputs);
  const NestedBlockSystem sys = build_rnn_forward_system(net, inputs, trace);
  const SolveReport rep = solve_nested_substitution(sys);
  // blocks are (input, z) per step
  CHECK(rep.solution[1][0] == 1.0);
  CHECK(rep.solution[3][0] == 2.0);
  CHECK(rep.solution[5][0] == 3.0);
}

TEST_CASE("rnn systems: substitution reproduces rnn_forward and rnn_backward") {
  ExperimentSpec spec = uniform_spec(3, 3, Activation::Tanh, 41);
  spec.kind = "rnn";
  spec.tau = 5;
  const RecurrentNet net = generate_rnn(spec);
  std::vector<Vec> inputs, errors;
  for (std::size_t s = 0; s < 5; ++s) {
    inputs.push_back(seeded_input(3, 10 + s));
    errors.push_back(seeded_input(3, 20 + s));
  }
  const ForwardTrace trace = rnn_forward(net, inputs);

  std::vector<Vec> forward_oracle;
  for (std::size_t s = 0; s < 5; ++s) {
    forward_oracle.push_back(trace.inputs[s]);
    for (const Vec& z : trace.act[s]) forward_oracle.push_back(z);
  }
  const SolveReport fwd =
      solve_nested_substitution(build_rnn_forward_system(net, inputs, trace));
  CHECK(max_abs_diff(fwd.solution, forward_oracle) < 1e-12);

  const GradientSet grads = rnn_backward(net, trace, errors);
  std::vector<Vec> backward_oracle;
  for (std::size_t s = 0; s < 5; ++s)
    for (const Vec& v : grads.layer_errors[s]) backward_oracle.push_back(v);
  const SolveReport bwd =
      solve_nested_substitution(build_rnn_backward_system(net, trace, errors));
  CHECK(max_abs_diff(bwd.solution, backward_oracle) < 1e-12);
}

TEST_CASE("shifted batch: r = 1 equals the single-system builder") {
  const ExperimentSpec spec = uniform_spec(4, 2, Activation::Sigmoid, 43);
  const FeedForwardNet net = generate_fnn(spec);
  const Vec input = seeded_input(2, 7);
  const ForwardTrace trace = forward(net, input);
  const Vec eps = seeded_input(2, 8);
  const ShiftedBatch batch = build_shifted_batch(net, {input}, {trace}, {eps},
                                                 PropMode::Backward);
  const BlockChainSystem single = build_backward_system(net, trace, eps);
  CHECK(batch.member(0).inv_diagonals == single.inv_diagonals);
  CHECK(batch.member(0).couplings == single.couplings);
  CHECK(batch.member(0).rhs == single.rhs);
}

TEST_CASE("shifted batch: identical samples share identical diagonals") {
  const ExperimentSpec spec = uniform_spec(3, 2, Activation::Tanh, 47);
  const FeedForwardNet net = generate_fnn(spec);
  const Vec input = seeded_input(2, 9);
  const ForwardTrace trace = forward(net, input);
  const ShiftedBatch batch = build_shifted_batch(net, {input, input}, {trace, trace}, {},
                                                 PropMode::Forward);
  CHECK(batch.inv_diagonals[0] == batch.inv_diagonals[1]);
  CHECK(batch.rhs[0] == batch.rhs[1]);
}

TEST_CASE("shifted batch: couplings are stored once") {
  const ExperimentSpec spec = uniform_spec(5, 3, Activation::Tanh, 53);
  const FeedForwardNet net = generate_fnn(spec);
  std::vector<Vec> inputs;
  std::vector<ForwardTrace> traces;
  for (int i = 0; i < 4; ++i) {
    inputs.push_back(seeded_input(3, 30 + i));
    traces.push_back(forward(net, inputs.back()));
  }
  const ShiftedBatch batch =
      build_shifted_batch(net, inputs, traces, {}, PropMode::Forward);
  CHECK(batch.sample_count() == 4);
  CHECK(batch.coupling_scalars() == net.weight_scalars());

  for (std::size_t i = 0; i < 4; ++i) {
    const SolveReport rep = solve_substitution(batch.member(i));
    CHECK(max_abs_diff(rep.solution, forward_blocks(traces[i])) < 1e-12);
  }
}

TEST_CASE("shifted batch: breakdown reports the offending sample") {
  FeedForwardNet net;
  net.layers.push_back({Matrix(1, 1, 1.0), Vec{-1.0}, {Activation::Sigmoid, 0.0}});
  const Vec good{0.5}, bad{1.0};
  const std::vector<Vec> inputs{good, bad};
  const std::vector<ForwardTrace> traces{forward(net, good), forward(net, bad)};
  try {
    build_shifted_batch(net, inputs, traces, {}, PropMode::Forward);
    FAIL("expected BreakdownError");
  } catch (const BreakdownError& e) {
    REQUIRE(e.sample().has_value());
    CHECK(*e.sample() == 1);
  }
}

TEST_CASE("assemble_dense: forward and backward single-layer examples") {
  FeedForwardNet net;
  net.layers.push_back({Matrix(1, 1, 2.0), Vec{1.0}, {Activation::Identity, 0.0}});
  const Vec input{3.0};
  const ForwardTrace trace = forward(net, input);

  const DenseSystem fwd = assemble_dense(build_forward_system(net, input, trace));
  CHECK(fwd.a(0, 0) == 1.0);
  CHECK(fwd.a(0, 1) == 0.0);
  CHECK(fwd.a(1, 0) == -2.0);
  CHECK(fwd.a(1, 1) == 1.0);

  const DenseSystem bwd = assemble_dense(build_backward_system(net, trace, Vec{1.0}));
  CHECK(bwd.a(0, 0) == 1.0);
  CHECK(bwd.a(0, 1) == -2.0);
  CHECK(bwd.a(1, 0) == 0.0);
  CHECK(bwd.a(1, 1) == 1.0);
}

TEST_CASE("assemble_dense: dense LU solve agrees with substitution") {
  const ExperimentSpec spec = uniform_spec(4, 3, Activation::Tanh, 59);
  const FeedForwardNet net = generate_fnn(spec);
  const Vec input = seeded_input(3, 11);
  const ForwardTrace trace = forward(net, input);
  const BlockChainSystem sys = build_forward_system(net, input, trace);
  const DenseSystem dense = assemble_dense(sys);
  const Vec lu = oracle::lu_solve(dense.a, dense.b);
  const SolveReport rep = solve_substitution(sys);
  std::size_t idx = 0;
  for (const Vec& block : rep.solution)
    for (double v : block) CHECK(std::fabs(v - lu[idx++]) < 1e-10);
}

TEST_CASE("assemble_dense for a nested system agrees with nested substitution") {
  ExperimentSpec spec = uniform_spec(2, 2, Activation::Tanh, 61);
  spec.kind = "rnn";
  spec.tau = 3;
  const RecurrentNet net = generate_rnn(spec);
  std::vector<Vec> inputs;
  for (std::size_t s = 0; s < 3; ++s) inputs.push_back(seeded_input(2, 40 + s));
  const ForwardTrace trace = rnn_forward(net, inputs);
  const NestedBlockSystem sys = build_rnn_forward_system(net, inputs, trace);
  const DenseSystem dense = assemble_dense(sys);
  const Vec lu = oracle::lu_solve(dense.a, dense.b);
  const SolveReport rep = solve_nested_substitution(sys);
  std::size_t idx = 0;
  for (const Vec& block : rep.solution)
    for (double v : block) CHECK(std::fabs(v - lu[idx++]) < 1e-10);
}

TEST_CASE("assemble_dense: cap and zero-diagonal errors") {
  const ExperimentSpec spec = uniform_spec(3, 2, Activation::ReLU, 67);
  const FeedForwardNet net = generate_fnn(spec);
  const Vec input = seeded_input(2, 12);
  const ForwardTrace trace = forward(net, input);
  const BlockChainSystem sys = build_forward_system(net, input, trace);
  CHECK_THROWS_AS(assemble_dense(sys, 3), std::invalid_argument);

  // a ReLU layer with a negative pre-activation stores a zero inverse entry
  FeedForwardNet relu;
  relu.layers.push_back({Matrix(1, 1, 1.0), Vec{0.0}, {Activation::ReLU, 0.0}});
  const Vec neg{-1.0};
  const BlockChainSystem bsys =
      build_backward_system(relu, forward(relu, neg), Vec{1.0});
  CHECK_THROWS_AS(assemble_dense(bsys), std::domain_error);
}

TEST_CASE("stale trace from a previous network state is accepted") {
  const ExperimentSpec spec = uniform_spec(3, 2, Activation::Tanh, 71);
  const FeedForwardNet net = generate_fnn(spec);
  const Vec input = seeded_input(2, 13);
  const ForwardTrace trace = forward(net, input);
  FeedForwardNet moved = net;
  moved.layers[0].weights(0, 0) += 0.05;
  // diagonals from the old trace, couplings from the updated network
  const BlockChainSystem sys = build_forward_system(moved, input, trace);
  const SolveReport rep = solve_substitution(sys);
  const ForwardTrace truth = forward(moved, input);
  const double err = max_abs_diff(rep.solution, forward_blocks(truth));
  CHECK(err > 0.0);      // approximate
  CHECK(err < 0.1);      // but close for a small step
}
