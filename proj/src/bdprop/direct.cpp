#include "bdprop/direct.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "bdprop/iterative.hpp"

namespace bdprop {

namespace {

void scale_in_place(const Vec& invd, Vec& x, WorkCounters* wc) {
  for (std::size_t i = 0; i < x.size(); ++i) x[i] *= invd[i];
  if (wc) wc->add_activation(x.size());
}

Vec scaled_copy(const Vec& invd, const Vec& x, WorkCounters* wc) {
  Vec out = x;
  scale_in_place(invd, out, wc);
  return out;
}

void add_blocks(std::vector<Vec>& acc, const std::vector<Vec>& b) {
  for (std::size_t k = 0; k < acc.size(); ++k)
    for (std::size_t i = 0; i < acc[k].size(); ++i) acc[k][i] += b[k][i];
}

std::vector<Vec> zero_blocks_like(const std::vector<Vec>& shape) {
  std::vector<Vec> out(shape.size());
  for (std::size_t k = 0; k < shape.size(); ++k) out[k].assign(shape[k].size(), 0.0);
  return out;
}

// left * diag(invd_mid) * right, built as column-scaled left times right.
Matrix compose_scaled(const LinearOperator& left, const Vec& invd_mid,
                      const LinearOperator& right, WorkCounters* wc, std::uint64_t* cost) {
  Matrix lm = left.materialize();
  for (std::size_t i = 0; i < lm.rows; ++i)
    for (std::size_t j = 0; j < lm.cols; ++j) lm(i, j) *= invd_mid[j];
  Matrix rm = right.materialize();
  Matrix out = matmul(lm, rm, nullptr);
  const std::uint64_t ops =
      static_cast<std::uint64_t>(lm.rows) * lm.cols * (1 + rm.cols);
  if (wc) {
    wc->add_fma(ops);
    wc->coupling_build_fma += ops;
  }
  if (cost) *cost += ops;
  return out;
}

struct ReduceOutcome {
  ReductionLevel level;
  std::uint64_t path = 0;  // critical path of this level: max per-block build cost
};

ReduceOutcome reduce_core(const BlockChainSystem& sys, const std::vector<Vec>& rhs,
                          WorkCounters* wc) {
  const std::size_t m = sys.block_count();
  if (m < 3) throw std::invalid_argument("reduce_once: needs at least 3 blocks");
  const bool fwd = sys.orientation == Orientation::LowerForward;

  std::vector<Vec> new_rhs(m);
  std::vector<Matrix> new_coupling(m);
  std::vector<std::uint64_t> block_cost(m, 0);

  if (fwd) {
    new_rhs[0] = rhs[0];
    for (std::size_t k = 1; k < m; ++k) {
      Vec t = scaled_copy(sys.inv_diagonals[k - 1], rhs[k - 1], wc);
      Vec acc = rhs[k];
      sys.couplings[k - 1].apply_add(t, acc, wc);
      block_cost[k] += static_cast<std::uint64_t>(sys.couplings[k - 1].rows) *
                       sys.couplings[k - 1].cols;
      new_rhs[k] = std::move(acc);
      if (k >= 2)
        new_coupling[k] = compose_scaled(sys.couplings[k - 1], sys.inv_diagonals[k - 1],
                                         sys.couplings[k - 2], wc, &block_cost[k]);
    }
  } else {
    new_rhs[m - 1] = rhs[m - 1];
    for (std::size_t k = 0; k + 1 < m; ++k) {
      Vec t = scaled_copy(sys.inv_diagonals[k + 1], rhs[k + 1], wc);
      Vec acc = rhs[k];
      sys.couplings[k].apply_add(t, acc, wc);
      block_cost[k] +=
          static_cast<std::uint64_t>(sys.couplings[k].rows) * sys.couplings[k].cols;
      new_rhs[k] = std::move(acc);
      if (k + 2 < m)
        new_coupling[k] = compose_scaled(sys.couplings[k], sys.inv_diagonals[k + 1],
                                         sys.couplings[k + 1], wc, &block_cost[k]);
    }
  }

  ReduceOutcome out;
  auto build_chain = [&](std::size_t start, BlockChainSystem& chain,
                         std::vector<std::size_t>& map) {
    chain.orientation = sys.orientation;
    for (std::size_t k = start; k < m; k += 2) {
      map.push_back(k);
      chain.inv_diagonals.push_back(sys.inv_diagonals[k]);
      chain.rhs.push_back(std::move(new_rhs[k]));
    }
    for (std::size_t i = 0; i + 1 < map.size(); ++i) {
      const std::size_t owner = fwd ? map[i + 1] : map[i];
      chain.couplings.push_back(LinearOperator::dense(std::move(new_coupling[owner])));
    }
  };
  build_chain(1, out.level.odd_chain, out.level.odd_to_original);
  build_chain(0, out.level.even_chain, out.level.even_to_original);
  for (std::uint64_t c : block_cost) out.path = std::max(out.path, c);
  if (wc)
    wc->alloc_scalars(out.level.odd_chain.coupling_scalars() +
                      out.level.even_chain.coupling_scalars());
  return out;
}

struct CrOut {
  std::vector<Vec> sol;
  std::size_t depth = 0;
  std::uint64_t path = 0;
};

// Owns its chain: reduced couplings are released from the live tally once
// the children exist, and leaves release themselves after substitution.
CrOut cr_owned(BlockChainSystem chain, std::size_t leaf, WorkCounters* wc) {
  CrOut out;
  if (chain.block_count() <= leaf) {
    const std::uint64_t f0 = wc ? wc->fma : 0;
    out.sol = substitute_blocks(chain, chain.rhs, wc);
    if (wc) {
      out.path = wc->fma - f0;
      wc->release_scalars(chain.coupling_scalars());
    }
    return out;
  }
  ReduceOutcome red = reduce_core(chain, chain.rhs, wc);
  if (wc) wc->release_scalars(chain.coupling_scalars());
  chain = BlockChainSystem{};
  CrOut odd = cr_owned(std::move(red.level.odd_chain), leaf, wc);
  CrOut even = cr_owned(std::move(red.level.even_chain), leaf, wc);
  out.sol.resize(red.level.odd_to_original.size() + red.level.even_to_original.size());
  for (std::size_t i = 0; i < odd.sol.size(); ++i)
    out.sol[red.level.odd_to_original[i]] = std::move(odd.sol[i]);
  for (std::size_t i = 0; i < even.sol.size(); ++i)
    out.sol[red.level.even_to_original[i]] = std::move(even.sol[i]);
  out.depth = 1 + std::max(odd.depth, even.depth);
  out.path = red.path + std::max(odd.path, even.path);
  return out;
}

}  // namespace

std::vector<Vec> substitute_blocks(const BlockChainSystem& sys, const std::vector<Vec>& rhs,
                                   WorkCounters* wc) {
  const std::size_t m = sys.block_count();
  std::vector<Vec> x(m);
  if (sys.orientation == Orientation::LowerForward) {
    for (std::size_t k = 0; k < m; ++k) {
      Vec acc = rhs[k];
      if (k > 0) sys.couplings[k - 1].apply_add(x[k - 1], acc, wc);
      scale_in_place(sys.inv_diagonals[k], acc, wc);
      x[k] = std::move(acc);
    }
  } else {
    for (std::size_t k = m; k-- > 0;) {
      Vec acc = rhs[k];
      if (k + 1 < m) sys.couplings[k].apply_add(x[k + 1], acc, wc);
      scale_in_place(sys.inv_diagonals[k], acc, wc);
      x[k] = std::move(acc);
    }
  }
  return x;
}

SolveReport solve_substitution(const BlockChainSystem& sys) {
  sys.validate();
  SolveReport report;
  report.solution = substitute_blocks(sys, sys.rhs, &report.work);
  report.work.parallel_steps = report.work.fma;  // substitution has no parallelism
  report.residual_norm = scaled_residual_norm(sys, report.solution);
  return report;
}

ReductionLevel reduce_once(const BlockChainSystem& sys, WorkCounters* wc) {
  sys.validate();
  ReduceOutcome out = reduce_core(sys, sys.rhs, wc);
  if (wc) wc->add_path(out.path);
  return std::move(out.level);
}

std::vector<Vec> cyclic_reduce_blocks(const BlockChainSystem& sys, const std::vector<Vec>& rhs,
                                      std::size_t leaf_threshold, WorkCounters* wc,
                                      std::size_t* depth_out) {
  if (leaf_threshold < 2)
    throw std::invalid_argument("cyclic reduction: leaf threshold must be >= 2");
  if (sys.block_count() <= leaf_threshold) {
    const std::uint64_t f0 = wc ? wc->fma : 0;
    std::vector<Vec> sol = substitute_blocks(sys, rhs, wc);
    if (wc) wc->add_path(wc->fma - f0);
    if (depth_out) *depth_out = 0;
    return sol;
  }
  ReduceOutcome red = reduce_core(sys, rhs, wc);  // root couplings are not intermediates
  CrOut odd = cr_owned(std::move(red.level.odd_chain), leaf_threshold, wc);
  CrOut even = cr_owned(std::move(red.level.even_chain), leaf_threshold, wc);
  std::vector<Vec> sol(sys.block_count());
  for (std::size_t i = 0; i < odd.sol.size(); ++i)
    sol[red.level.odd_to_original[i]] = std::move(odd.sol[i]);
  for (std::size_t i = 0; i < even.sol.size(); ++i)
    sol[red.level.even_to_original[i]] = std::move(even.sol[i]);
  if (wc) wc->add_path(red.path + std::max(odd.path, even.path));
  if (depth_out) *depth_out = 1 + std::max(odd.depth, even.depth);
  return sol;
}

SolveReport solve_cyclic_reduction(const BlockChainSystem& sys, std::size_t leaf_threshold) {
  sys.validate();
  SolveReport report;
  report.solution =
      cyclic_reduce_blocks(sys, sys.rhs, leaf_threshold, &report.work, &report.recursion_depth);
  report.residual_norm = scaled_residual_norm(sys, report.solution);
  return report;
}

namespace {

PropagationView view_of_chain(const BlockChainSystem& chain) {
  PropagationView view;
  view.orientation = chain.orientation;
  const std::size_t m = chain.block_count();
  view.weights.resize(m);
  view.scales.resize(m);
  view.rhs.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t b = chain.orientation == Orientation::LowerForward ? i : m - 1 - i;
    view.scales[i] = chain.inv_diagonals[b];
    view.rhs[i] = chain.rhs[b];
    if (i > 0)
      view.weights[i] = chain.orientation == Orientation::LowerForward
                            ? chain.couplings[b - 1].materialize()
                            : chain.couplings[b].materialize();
  }
  return view;
}

}  // namespace

std::pair<PropagationView, PropagationView> equivalent_propagations(const ReductionLevel& level) {
  return {view_of_chain(level.odd_chain), view_of_chain(level.even_chain)};
}

std::vector<Vec> run_propagation_view(const PropagationView& view) {
  const std::size_t m = view.rhs.size();
  std::vector<Vec> x(m);
  for (std::size_t i = 0; i < m; ++i) {
    Vec acc = view.rhs[i];
    if (i > 0) matvec_add(view.weights[i], x[i - 1], acc, nullptr);
    for (std::size_t j = 0; j < acc.size(); ++j) acc[j] *= view.scales[i][j];
    x[i] = std::move(acc);
  }
  if (view.orientation == Orientation::UpperBackward) std::reverse(x.begin(), x.end());
  return x;
}

namespace {

std::vector<std::size_t> block_offsets(const BlockChainSystem& sys) {
  std::vector<std::size_t> off(sys.block_count());
  std::size_t o = 0;
  for (std::size_t k = 0; k < sys.block_count(); ++k) {
    off[k] = o;
    o += sys.block_size(k);
  }
  return off;
}

// Dense scaling matrix with rows in the reordered block order. Each reordered
// row is the original row plus the scaled row of the block it eliminates.
Matrix build_scaling_matrix(const BlockChainSystem& sys, const std::vector<std::size_t>& order,
                            const std::vector<std::size_t>& off, std::size_t n,
                            bool literal_last_even) {
  const bool fwd = sys.orientation == Orientation::LowerForward;
  const std::size_t m = sys.block_count();
  Matrix s(n, n, 0.0);
  std::size_t row0 = 0;
  for (std::size_t r = 0; r < m; ++r) {
    const std::size_t k = order[r];
    const std::size_t nk = sys.block_size(k);
    for (std::size_t i = 0; i < nk; ++i) s(row0 + i, off[k] + i) = 1.0;
    const bool has_partner = fwd ? k >= 1 : k + 1 < m;
    if (has_partner) {
      std::size_t src = fwd ? k - 1 : k + 1;
      Matrix w = fwd ? sys.couplings[k - 1].materialize() : sys.couplings[k].materialize();
      Vec invd = sys.inv_diagonals[src];
      // the published matrix repeats W^(l) D^(l-1)^-1 in the last row of the
      // second group; reproduce that transcription on request
      if (literal_last_even && r + 1 == m) {
        w = fwd ? sys.couplings[m - 2].materialize() : w;
        invd = fwd ? sys.inv_diagonals[m - 2] : invd;
      }
      for (std::size_t i = 0; i < w.rows; ++i)
        for (std::size_t j = 0; j < w.cols; ++j)
          s(row0 + i, off[src] + j) = w(i, j) * invd[j];
    }
    row0 += nk;
  }
  return s;
}

Matrix permute_columns(const Matrix& a, const std::vector<std::size_t>& order,
                       const std::vector<std::size_t>& off,
                       const std::vector<std::size_t>& sizes) {
  Matrix out(a.rows, a.cols, 0.0);
  std::size_t col0 = 0;
  for (std::size_t c : order) {
    for (std::size_t j = 0; j < sizes[c]; ++j)
      for (std::size_t i = 0; i < a.rows; ++i) out(i, col0 + j) = a(i, off[c] + j);
    col0 += sizes[c];
  }
  return out;
}

double max_abs_matrix_diff(const Matrix& a, const Matrix& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a.a[i] - b.a[i]));
  return m;
}

}  // namespace

AppendixCheckResult appendix_scaling_check(const BlockChainSystem& sys, std::size_t cap) {
  sys.validate();
  const DenseSystem dense = assemble_dense(sys, cap);
  ReductionLevel red = reduce_once(sys);
  const bool fwd = sys.orientation == Orientation::LowerForward;

  const std::vector<std::size_t>& first = fwd ? red.odd_to_original : red.even_to_original;
  const std::vector<std::size_t>& second = fwd ? red.even_to_original : red.odd_to_original;
  std::vector<std::size_t> order = first;
  order.insert(order.end(), second.begin(), second.end());

  const std::vector<std::size_t> off = block_offsets(sys);
  std::vector<std::size_t> sizes(sys.block_count());
  for (std::size_t k = 0; k < sys.block_count(); ++k) sizes[k] = sys.block_size(k);
  const std::size_t n = sys.total_dim();

  const BlockChainSystem& first_chain = fwd ? red.odd_chain : red.even_chain;
  const BlockChainSystem& second_chain = fwd ? red.even_chain : red.odd_chain;
  const DenseSystem d1 = assemble_dense(first_chain, cap);
  const DenseSystem d2 = assemble_dense(second_chain, cap);
  Matrix expected(n, n, 0.0);
  Vec expected_rhs(n, 0.0);
  for (std::size_t i = 0; i < d1.a.rows; ++i) {
    for (std::size_t j = 0; j < d1.a.cols; ++j) expected(i, j) = d1.a(i, j);
    expected_rhs[i] = d1.b[i];
  }
  const std::size_t shift = d1.a.rows;
  for (std::size_t i = 0; i < d2.a.rows; ++i) {
    for (std::size_t j = 0; j < d2.a.cols; ++j) expected(shift + i, shift + j) = d2.a(i, j);
    expected_rhs[shift + i] = d2.b[i];
  }

  auto deviation_for = [&](bool literal) {
    const Matrix s = build_scaling_matrix(sys, order, off, n, literal);
    const Matrix sl = matmul(s, dense.a, nullptr);
    const Matrix slp = permute_columns(sl, order, off, sizes);
    return max_abs_matrix_diff(slp, expected);
  };

  AppendixCheckResult result;
  result.matrix_deviation = deviation_for(false);
  {
    const Matrix s = build_scaling_matrix(sys, order, off, n, false);
    Vec sb(n, 0.0);
    matvec_add(s, dense.b, sb, nullptr);
    double dev = 0.0;
    for (std::size_t i = 0; i < n; ++i) dev = std::max(dev, std::fabs(sb[i] - expected_rhs[i]));
    result.rhs_deviation = dev;
  }

  bool uniform = true;
  for (std::size_t k = 1; k < sizes.size(); ++k) uniform = uniform && sizes[k] == sizes[0];
  if (fwd && uniform && sys.block_count() % 2 == 0)
    result.literal_matrix_deviation = deviation_for(true);
  else
    result.literal_matrix_deviation = std::numeric_limits<double>::quiet_NaN();

  result.ok = result.matrix_deviation < 1e-12 && result.rhs_deviation < 1e-12;
  return result;
}

std::vector<Vec> solve_time_block(const NestedBlockSystem& sys, std::size_t step,
                                  const std::vector<Vec>& rhs, InnerSolver inner,
                                  WorkCounters* wc) {
  if (inner == InnerSolver::Substitution)
    return substitute_blocks(sys.time_blocks[step], rhs, wc);
  std::size_t depth = 0;
  return cyclic_reduce_blocks(sys.time_blocks[step], rhs, 2, wc, &depth);
}

namespace {

std::vector<Vec> flatten_steps(std::vector<std::vector<Vec>>&& per_step) {
  std::vector<Vec> out;
  for (std::vector<Vec>& step : per_step)
    for (Vec& block : step) out.push_back(std::move(block));
  return out;
}

struct TimeOp {
  // apply(x) = U . prod_i (solve(t_i) . U) x, solves listed left to right
  std::vector<std::size_t> solves;
};

std::vector<Vec> apply_time_op(const NestedBlockSystem& sys, const TimeOp& op,
                               const std::vector<Vec>& x, InnerSolver inner,
                               WorkCounters* wc) {
  std::vector<Vec> y = zero_blocks_like(x);
  sys.apply_time_coupling(x, y, wc);
  for (auto it = op.solves.rbegin(); it != op.solves.rend(); ++it) {
    std::vector<Vec> t = solve_time_block(sys, *it, y, inner, wc);
    y = zero_blocks_like(t);
    sys.apply_time_coupling(t, y, wc);
  }
  return y;
}

struct TimeChain {
  std::vector<std::size_t> steps;  // original step indices in solve order
  std::vector<TimeOp> ops;         // ops[i] feeds position i from position i-1; ops[0] unused
  std::vector<std::vector<Vec>> rhs;
};

struct TimeOut {
  std::vector<std::vector<Vec>> sol;  // per chain position
  std::size_t depth = 0;
};

TimeOut solve_time_chain(const NestedBlockSystem& sys, TimeChain chain, InnerSolver inner,
                         WorkCounters* wc) {
  const std::size_t m = chain.steps.size();
  TimeOut out;
  if (m <= 2) {
    out.sol.resize(m);
    out.sol[0] = solve_time_block(sys, chain.steps[0], chain.rhs[0], inner, wc);
    if (m == 2) {
      std::vector<Vec> acc = std::move(chain.rhs[1]);
      add_blocks(acc, apply_time_op(sys, chain.ops[1], out.sol[0], inner, wc));
      out.sol[1] = solve_time_block(sys, chain.steps[1], acc, inner, wc);
    }
    return out;
  }

  // descending so each elimination still sees the original rhs of i-1
  std::vector<std::vector<Vec>> new_rhs(m);
  for (std::size_t i = m; i-- > 1;) {
    std::vector<Vec> t = solve_time_block(sys, chain.steps[i - 1], chain.rhs[i - 1], inner, wc);
    new_rhs[i] = std::move(chain.rhs[i]);
    add_blocks(new_rhs[i], apply_time_op(sys, chain.ops[i], t, inner, wc));
  }
  new_rhs[0] = std::move(chain.rhs[0]);

  TimeChain odd, even;
  for (std::size_t i = 0; i < m; ++i) {
    TimeChain& dst = (i % 2 == 1) ? odd : even;
    if (!dst.steps.empty()) {
      TimeOp combined;
      combined.solves = chain.ops[i].solves;
      combined.solves.push_back(chain.steps[i - 1]);
      combined.solves.insert(combined.solves.end(), chain.ops[i - 1].solves.begin(),
                             chain.ops[i - 1].solves.end());
      dst.ops.push_back(std::move(combined));
    } else {
      dst.ops.push_back(TimeOp{});
    }
    dst.steps.push_back(chain.steps[i]);
    dst.rhs.push_back(std::move(new_rhs[i]));
  }

  TimeOut odd_out = solve_time_chain(sys, std::move(odd), inner, wc);
  TimeOut even_out = solve_time_chain(sys, std::move(even), inner, wc);
  out.sol.resize(m);
  for (std::size_t i = 0; i < odd_out.sol.size(); ++i)
    out.sol[2 * i + 1] = std::move(odd_out.sol[i]);
  for (std::size_t i = 0; i < even_out.sol.size(); ++i)
    out.sol[2 * i] = std::move(even_out.sol[i]);
  out.depth = 1 + std::max(odd_out.depth, even_out.depth);
  return out;
}

}  // namespace

SolveReport solve_nested_substitution(const NestedBlockSystem& sys) {
  sys.validate();
  SolveReport report;
  const std::size_t tau = sys.steps();
  std::vector<std::vector<Vec>> sol(tau);
  if (sys.orientation == Orientation::LowerForward) {
    for (std::size_t s = 0; s < tau; ++s) {
      std::vector<Vec> rhs = sys.time_blocks[s].rhs;
      if (s > 0) sys.apply_time_coupling(sol[s - 1], rhs, &report.work);
      sol[s] = substitute_blocks(sys.time_blocks[s], rhs, &report.work);
    }
  } else {
    for (std::size_t s = tau; s-- > 0;) {
      std::vector<Vec> rhs = sys.time_blocks[s].rhs;
      if (s + 1 < tau) sys.apply_time_coupling(sol[s + 1], rhs, &report.work);
      sol[s] = substitute_blocks(sys.time_blocks[s], rhs, &report.work);
    }
  }
  report.residual_norm = nested_scaled_residual_norm(sys, sol);
  report.work.parallel_steps = report.work.fma;
  report.solution = flatten_steps(std::move(sol));
  return report;
}

SolveReport solve_nested_rnn(const NestedBlockSystem& sys, InnerSolver inner) {
  sys.validate();
  SolveReport report;
  const std::size_t tau = sys.steps();
  const bool fwd = sys.orientation == Orientation::LowerForward;

  TimeChain chain;
  chain.steps.resize(tau);
  for (std::size_t i = 0; i < tau; ++i) chain.steps[i] = fwd ? i : tau - 1 - i;
  chain.ops.resize(tau);
  chain.rhs.resize(tau);
  for (std::size_t i = 0; i < tau; ++i) chain.rhs[i] = sys.time_blocks[chain.steps[i]].rhs;

  TimeOut out = solve_time_chain(sys, std::move(chain), inner, &report.work);
  std::vector<std::vector<Vec>> by_step(tau);
  for (std::size_t i = 0; i < tau; ++i)
    by_step[fwd ? i : tau - 1 - i] = std::move(out.sol[i]);

  report.recursion_depth = out.depth;
  report.residual_norm = nested_scaled_residual_norm(sys, by_step);
  report.work.parallel_steps = report.work.fma;
  report.solution = flatten_steps(std::move(by_step));
  return report;
}

}  // namespace bdprop
