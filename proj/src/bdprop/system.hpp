#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bdprop/linalg.hpp"
#include "bdprop/net.hpp"

namespace bdprop {

/// Raised when a forward diagonal entry is unrepresentable: y == 0 with
/// f(y) != 0 admits no scaling constant.
class BreakdownError : public std::runtime_error {
 public:
  BreakdownError(const std::string& what, std::size_t block, std::size_t entry,
                 std::optional<std::size_t> sample = std::nullopt)
      : std::runtime_error(what), block_(block), entry_(entry), sample_(sample) {}
  std::size_t block() const { return block_; }
  std::size_t entry() const { return entry_; }
  std::optional<std::size_t> sample() const { return sample_; }

 private:
  std::size_t block_;
  std::size_t entry_;
  std::optional<std::size_t> sample_;
};

/// One entry of D^(k)^-1 for a forward system: f/y away from zero, 1 at the
/// removable 0/0 corner. Throws BreakdownError for |y| < eps_zero with
/// |f| >= eps_zero.
double diag_ratio_forward(double y, double f, double eps_zero = 1e-300);

struct LinearOperator {
  enum class Kind { Dense, TransposedDense, Zero };

  Kind kind = Kind::Zero;
  Matrix m;
  std::size_t rows = 0;  // apply maps cols -> rows
  std::size_t cols = 0;

  static LinearOperator dense(Matrix m);
  static LinearOperator transposed(Matrix m);  // apply(x) = m^T x
  static LinearOperator zero(std::size_t rows, std::size_t cols);

  void apply_add(const Vec& x, Vec& acc, WorkCounters* wc) const;
  Matrix materialize() const;
  std::size_t weight_scalars() const { return kind == Kind::Zero ? 0 : m.size(); }
  bool operator==(const LinearOperator&) const = default;
};

enum class Orientation { LowerForward, UpperBackward };

/// A block bi-diagonal triangular system.
///
/// Diagonal blocks are stored as the entries of their INVERSES (f(y)/y for
/// forward systems, f'(y) for backward systems), so solves and matvecs only
/// ever multiply by them; the non-inverted diagonals exist only inside
/// assemble_dense. Couplings store the positive operator; the system matrix
/// carries the negated coupling on its off-diagonal. couplings[j] sits
/// between blocks j and j+1: a LowerForward system applies it to block j in
/// the row of block j+1, an UpperBackward system applies it to block j+1 in
/// the row of block j.
struct BlockChainSystem {
  Orientation orientation = Orientation::LowerForward;
  std::vector<Vec> inv_diagonals;
  std::vector<LinearOperator> couplings;
  std::vector<Vec> rhs;

  std::size_t block_count() const { return inv_diagonals.size(); }
  std::size_t block_size(std::size_t k) const { return inv_diagonals[k].size(); }
  std::size_t total_dim() const;
  std::size_t coupling_scalars() const;
  void validate() const;
};

/// Time-blocked system for recurrent networks: tau chain systems coupled by
/// the block-diagonal recurrent operator (identical for every time step,
/// with a zero block at level 0).
struct NestedBlockSystem {
  Orientation orientation = Orientation::LowerForward;
  std::vector<BlockChainSystem> time_blocks;
  std::vector<LinearOperator> time_coupling;  // one block per level 0..l

  std::size_t steps() const { return time_blocks.size(); }
  std::size_t step_dim() const { return time_blocks.front().total_dim(); }
  /// acc_k += U^(k) x_k (or U^(k)^T for backward systems).
  void apply_time_coupling(const std::vector<Vec>& x, std::vector<Vec>& acc,
                           WorkCounters* wc) const;
  void validate() const;
};

enum class PropMode { Forward, Backward };

/// Mini-batch family of shifted systems: one shared coupling set, per-sample
/// diagonals and right-hand sides.
struct ShiftedBatch {
  Orientation orientation = Orientation::LowerForward;
  std::vector<LinearOperator> couplings;
  std::vector<std::vector<Vec>> inv_diagonals;  // [sample][block]
  std::vector<std::vector<Vec>> rhs;            // [sample][block]

  std::size_t sample_count() const { return rhs.size(); }
  std::size_t coupling_scalars() const;
  /// Standalone copy of member i (couplings copied; values identical).
  BlockChainSystem member(std::size_t i) const;
};

BlockChainSystem build_forward_system(const FeedForwardNet& net, const Vec& input,
                                      const ForwardTrace& trace, double eps_zero = 1e-300);
BlockChainSystem build_backward_system(const FeedForwardNet& net, const ForwardTrace& trace,
                                       const Vec& output_error);
NestedBlockSystem build_rnn_forward_system(const RecurrentNet& net,
                                           const std::vector<Vec>& inputs,
                                           const ForwardTrace& trace,
                                           double eps_zero = 1e-300);
NestedBlockSystem build_rnn_backward_system(const RecurrentNet& net, const ForwardTrace& trace,
                                            const std::vector<Vec>& output_errors);
ShiftedBatch build_shifted_batch(const FeedForwardNet& net, const std::vector<Vec>& inputs,
                                 const std::vector<ForwardTrace>& traces,
                                 const std::vector<Vec>& output_errors, PropMode mode,
                                 double eps_zero = 1e-300);

struct DenseSystem {
  Matrix a;
  Vec b;
};

/// Test-scale materialization. Diagonal blocks are the inverses of the
/// stored inverse-diagonals, so every stored entry must be nonzero; off
/// diagonals carry the negated couplings.
DenseSystem assemble_dense(const BlockChainSystem& sys, std::size_t cap = 4096);
DenseSystem assemble_dense(const NestedBlockSystem& sys, std::size_t cap = 4096);

}  // namespace bdprop
