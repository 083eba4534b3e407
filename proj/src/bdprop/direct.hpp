#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "bdprop/system.hpp"

namespace bdprop {

struct SolveReport {
  std::vector<Vec> solution;  // original block order (time-step major for nested systems)
  double residual_norm = 0.0;  // infinity norm of the scaled-system residual
  std::size_t recursion_depth = 0;
  WorkCounters work;
};

/// Forward or backward substitution in chain order. Exact: reproduces the
/// propagation arithmetic the system encodes.
SolveReport solve_substitution(const BlockChainSystem& sys);

/// One level of odd-even cyclic reduction: two independent half-size chains.
///
/// Forward chains carry couplings B^(k) = W^(k) D^(k-1)^-1 W^(k-1) and
/// right-hand sides g^(k) = W^(k) D^(k-1)^-1 b^(k-1) + b^(k); backward ones
/// the transposed analogues. With an even block count the trailing block
/// joins the chain its parity dictates and no coupling is created past the
/// end. The index maps record each chain position's original block.
struct ReductionLevel {
  BlockChainSystem odd_chain;   // original blocks 1, 3, 5, ...
  BlockChainSystem even_chain;  // original blocks 0, 2, 4, ...
  std::vector<std::size_t> odd_to_original;
  std::vector<std::size_t> even_to_original;
};

ReductionLevel reduce_once(const BlockChainSystem& sys, WorkCounters* wc = nullptr);

/// Recursive cyclic reduction; chains at or below leaf_threshold blocks are
/// solved by substitution. Reduced couplings of a finished level are
/// released before descending, so peak intermediate storage stays below
/// twice the original coupling storage.
SolveReport solve_cyclic_reduction(const BlockChainSystem& sys, std::size_t leaf_threshold = 2);

/// One reduced chain viewed as a standalone propagation with modified
/// weights: x_i = scales_i o (weights_i x_{i-1} + rhs_i) in solve order.
struct PropagationView {
  Orientation orientation;
  std::vector<Matrix> weights;  // weights[i] feeds position i from position i-1; weights[0] unused
  std::vector<Vec> scales;
  std::vector<Vec> rhs;
};

std::pair<PropagationView, PropagationView> equivalent_propagations(const ReductionLevel& level);

/// Runs the view's propagation loop; result blocks are returned in the
/// owning chain's block order.
std::vector<Vec> run_propagation_view(const PropagationView& view);

/// Materializes the scaling and permutation matrices of the reordered-system
/// identity (S L P / T R Q), multiplies them out densely, and compares
/// against the dense form of reduce_once's chains. `literal_matrix_deviation`
/// additionally scores a literal transcription of the published scaling
/// matrix for forward systems with uniform widths (it repeats the last scale
/// block); NaN when not applicable.
struct AppendixCheckResult {
  double matrix_deviation = 0.0;
  double rhs_deviation = 0.0;
  double literal_matrix_deviation = 0.0;
  bool ok = false;
};

AppendixCheckResult appendix_scaling_check(const BlockChainSystem& sys, std::size_t cap = 4096);

enum class InnerSolver { Substitution, CyclicReduction };

/// Time-sequential solve of a nested system; each step's chain is solved by
/// substitution after folding in the recurrent coupling of the neighbouring
/// step's solution.
SolveReport solve_nested_substitution(const NestedBlockSystem& sys);

/// Cyclic reduction over the time-block chain. Reduced time couplings are
/// kept as operator compositions (recurrent blocks interleaved with
/// inner solves), so diagonal time blocks are only ever applied through the
/// chosen inner solver.
SolveReport solve_nested_rnn(const NestedBlockSystem& sys, InnerSolver inner);

// Building blocks shared with the iterative/hybrid paths.
std::vector<Vec> substitute_blocks(const BlockChainSystem& sys, const std::vector<Vec>& rhs,
                                   WorkCounters* wc);
std::vector<Vec> cyclic_reduce_blocks(const BlockChainSystem& sys, const std::vector<Vec>& rhs,
                                      std::size_t leaf_threshold, WorkCounters* wc,
                                      std::size_t* depth_out);
std::vector<Vec> solve_time_block(const NestedBlockSystem& sys, std::size_t step,
                                  const std::vector<Vec>& rhs, InnerSolver inner,
                                  WorkCounters* wc);

}  // namespace bdprop
