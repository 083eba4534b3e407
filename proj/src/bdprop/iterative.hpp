#pragma once

#include <cstddef>
#include <vector>

#include "bdprop/direct.hpp"
#include "bdprop/system.hpp"

namespace bdprop {

struct IterationConfig {
  double tol = 1e-10;            // relative residual target on the scaled system
  std::size_t max_iters = 0;     // 0: defaults to 4 x block count
  double omega = 1.0;            // Richardson damping
  double breakdown_eps = 1e-30;  // BiCGStab rho / omega guards
};

struct IterReport {
  std::vector<Vec> solution;
  std::size_t iterations = 0;            // eta: updates performed
  std::vector<double> residual_history;  // length iterations + 1
  bool converged = false;
  std::size_t restarts = 0;
  double residual_norm = 0.0;      // final scaled residual, infinity norm
  double unscaled_residual = 0.0;  // residual of the non-scaled system (see note below)
  std::size_t delta_vectors = 0;   // live iteration vectors held by the method
  WorkCounters work;
};

/// q = (unit-diagonal scaled matrix) p: q_k = p_k - invdiag_k o (coupling
/// applied to the neighbour block). The head block in solve order has no
/// coupling. The off-diagonal carries the system's minus sign.
std::vector<Vec> scaled_matvec(const BlockChainSystem& sys, const std::vector<Vec>& p,
                               WorkCounters* wc = nullptr);

/// invdiag o rhs, the right-hand side of the scaled system.
std::vector<Vec> scaled_rhs(const BlockChainSystem& sys, WorkCounters* wc = nullptr);

double scaled_residual_norm(const BlockChainSystem& sys, const std::vector<Vec>& x);

/// Residual of the non-scaled system. Rows whose stored inverse-diagonal
/// entry is zero have no finite non-scaled form; they contribute |x_i|, the
/// deviation from the value the scaled row forces.
double unscaled_residual_norm(const BlockChainSystem& sys, const std::vector<Vec>& x);

double nested_scaled_residual_norm(const NestedBlockSystem& sys,
                                   const std::vector<std::vector<Vec>>& x);
double nested_unscaled_residual_norm(const NestedBlockSystem& sys,
                                     const std::vector<std::vector<Vec>>& x);

/// Fixed-point iteration on the scaled system; exact within block_count
/// iterations because the scaled iteration matrix is strictly triangular.
IterReport jacobi_solve(const BlockChainSystem& sys, const IterationConfig& cfg = {});

/// x <- x + omega (b - A x) on the scaled system; omega = 1 coincides with
/// Jacobi iterate by iterate.
IterReport richardson_solve(const BlockChainSystem& sys, const IterationConfig& cfg = {});

/// Unpreconditioned BiCGStab on the diagonally scaled operator, x0 = 0,
/// shadow residual r0. Breakdown restarts keep the current iterate.
IterReport bicgstab_solve(const BlockChainSystem& sys, const IterationConfig& cfg = {});

enum class IterMethod { Jacobi, Richardson, BiCGStab };

/// Per-sample solves over the shared coupling set; results are identical to
/// solving each member system independently.
std::vector<IterReport> solve_shifted_batch(const ShiftedBatch& batch, IterMethod method,
                                            const IterationConfig& cfg = {});

enum class OuterMethod { Jacobi, BiCGStab };

/// Outer iteration over the time-block chain; the block-diagonal scaling is
/// realized as a direct inner solve of each step's chain system.
IterReport hybrid_solve_rnn(const NestedBlockSystem& sys, OuterMethod outer, InnerSolver inner,
                            const IterationConfig& cfg = {});

/// Row-wise dominance ratios (off-diagonal absolute row sum over absolute
/// diagonal) of the non-scaled matrix; informational, since triangular
/// systems converge by nilpotency regardless.
struct DominanceResult {
  std::vector<Vec> row_ratios;  // per block, per row
  double max_ratio = 0.0;
  bool has_unbounded = false;  // a non-inverted diagonal entry was not representable
};

DominanceResult diagonal_dominance_check(const BlockChainSystem& sys);

}  // namespace bdprop
