#include "bdprop/system.hpp"

#include <cmath>
#include <stdexcept>

namespace bdprop {

double diag_ratio_forward(double y, double f, double eps_zero) {
  if (!(eps_zero > 0.0)) throw std::invalid_argument("diag_ratio_forward: eps_zero must be > 0");
  if (std::fabs(y) >= eps_zero) return f / y;
  if (std::fabs(f) < eps_zero) return 1.0;  // removable 0/0 corner
  throw BreakdownError("forward diagonal breakdown: y = 0 with f(y) != 0", 0, 0);
}

LinearOperator LinearOperator::dense(Matrix m) {
  LinearOperator op;
  op.kind = Kind::Dense;
  op.rows = m.rows;
  op.cols = m.cols;
  op.m = std::move(m);
  return op;
}

LinearOperator LinearOperator::transposed(Matrix m) {
  LinearOperator op;
  op.kind = Kind::TransposedDense;
  op.rows = m.cols;
  op.cols = m.rows;
  op.m = std::move(m);
  return op;
}

LinearOperator LinearOperator::zero(std::size_t rows, std::size_t cols) {
  LinearOperator op;
  op.kind = Kind::Zero;
  op.rows = rows;
  op.cols = cols;
  return op;
}

void LinearOperator::apply_add(const Vec& x, Vec& acc, WorkCounters* wc) const {
  if (x.size() != cols || acc.size() != rows)
    throw std::invalid_argument("LinearOperator: dimension mismatch");
  switch (kind) {
    case Kind::Dense:
      matvec_add(m, x, acc, wc);
      break;
    case Kind::TransposedDense:
      matvec_transposed_add(m, x, acc, wc);
      break;
    case Kind::Zero:
      break;
  }
}

Matrix LinearOperator::materialize() const {
  switch (kind) {
    case Kind::Dense: return m;
    case Kind::TransposedDense: return transpose(m);
    case Kind::Zero: return Matrix(rows, cols, 0.0);
  }
  return Matrix();
}

std::size_t BlockChainSystem::total_dim() const {
  std::size_t n = 0;
  for (const Vec& d : inv_diagonals) n += d.size();
  return n;
}

std::size_t BlockChainSystem::coupling_scalars() const {
  std::size_t n = 0;
  for (const LinearOperator& op : couplings) n += op.weight_scalars();
  return n;
}

void BlockChainSystem::validate() const {
  const std::size_t blocks = block_count();
  if (blocks == 0) throw std::invalid_argument("system: no blocks");
  if (rhs.size() != blocks) throw std::invalid_argument("system: rhs block count mismatch");
  if (couplings.size() + 1 != blocks)
    throw std::invalid_argument("system: coupling count mismatch");
  for (std::size_t k = 0; k < blocks; ++k)
    if (rhs[k].size() != block_size(k))
      throw std::invalid_argument("system: rhs block width mismatch");
  for (std::size_t j = 0; j + 1 < blocks; ++j) {
    const LinearOperator& op = couplings[j];
    const std::size_t lo = block_size(j), hi = block_size(j + 1);
    const bool ok = orientation == Orientation::LowerForward
                        ? (op.rows == hi && op.cols == lo)
                        : (op.rows == lo && op.cols == hi);
    if (!ok) throw std::invalid_argument("system: coupling shape does not chain");
  }
}

void NestedBlockSystem::apply_time_coupling(const std::vector<Vec>& x, std::vector<Vec>& acc,
                                            WorkCounters* wc) const {
  if (x.size() != time_coupling.size() || acc.size() != time_coupling.size())
    throw std::invalid_argument("nested: time coupling block count mismatch");
  for (std::size_t k = 0; k < time_coupling.size(); ++k)
    time_coupling[k].apply_add(x[k], acc[k], wc);
}

void NestedBlockSystem::validate() const {
  if (time_blocks.empty()) throw std::invalid_argument("nested: no time blocks");
  const BlockChainSystem& first = time_blocks.front();
  for (const BlockChainSystem& tb : time_blocks) {
    tb.validate();
    if (tb.orientation != orientation)
      throw std::invalid_argument("nested: orientation mismatch");
    if (tb.block_count() != first.block_count())
      throw std::invalid_argument("nested: time blocks differ in structure");
    for (std::size_t k = 0; k < tb.block_count(); ++k)
      if (tb.block_size(k) != first.block_size(k))
        throw std::invalid_argument("nested: time blocks differ in widths");
    if (!(tb.couplings == first.couplings))
      throw std::invalid_argument("nested: time blocks differ in couplings");
  }
  if (time_coupling.size() != first.block_count())
    throw std::invalid_argument("nested: recurrent block count mismatch");
  for (std::size_t k = 0; k < time_coupling.size(); ++k)
    if (time_coupling[k].rows != first.block_size(k) ||
        time_coupling[k].cols != first.block_size(k))
      throw std::invalid_argument("nested: recurrent block must be square on its level");
}

std::size_t ShiftedBatch::coupling_scalars() const {
  std::size_t n = 0;
  for (const LinearOperator& op : couplings) n += op.weight_scalars();
  return n;
}

BlockChainSystem ShiftedBatch::member(std::size_t i) const {
  if (i >= sample_count()) throw std::invalid_argument("batch: sample index out of range");
  BlockChainSystem sys;
  sys.orientation = orientation;
  sys.couplings = couplings;
  sys.inv_diagonals = inv_diagonals[i];
  sys.rhs = rhs[i];
  return sys;
}

namespace {

void require_trace_shape(const std::vector<std::size_t>& widths, const ForwardTrace& trace,
                         std::size_t steps) {
  if (trace.steps() != steps || trace.pre.size() != steps || trace.act.size() != steps)
    throw std::invalid_argument("trace: step count mismatch");
  const std::size_t l = widths.size() - 1;
  for (std::size_t s = 0; s < steps; ++s) {
    if (trace.inputs[s].size() != widths[0] || trace.pre[s].size() != l ||
        trace.act[s].size() != l)
      throw std::invalid_argument("trace: shape mismatch");
    for (std::size_t k = 1; k <= l; ++k)
      if (trace.pre[s][k - 1].size() != widths[k] || trace.act[s][k - 1].size() != widths[k])
        throw std::invalid_argument("trace: block width mismatch");
  }
}

Vec forward_inv_diagonal(const Vec& y, const Vec& f, std::size_t block, double eps_zero,
                         std::optional<std::size_t> sample) {
  Vec d(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    try {
      d[i] = diag_ratio_forward(y[i], f[i], eps_zero);
    } catch (const BreakdownError&) {
      throw BreakdownError("forward diagonal breakdown: y = 0 with f(y) != 0", block, i,
                           sample);
    }
  }
  return d;
}

Vec backward_inv_diagonal(const Vec& y, ActivationKind act) {
  Vec d(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) d[i] = activation_eval(act, y[i]).deriv;
  return d;
}

BlockChainSystem forward_chain_for_step(const FeedForwardNet& net, const Vec& input,
                                        const ForwardTrace& trace, std::size_t s,
                                        double eps_zero, std::optional<std::size_t> sample) {
  const std::size_t l = net.depth();
  BlockChainSystem sys;
  sys.orientation = Orientation::LowerForward;
  sys.inv_diagonals.reserve(l + 1);
  sys.inv_diagonals.push_back(Vec(net.input_width(), 1.0));
  sys.rhs.reserve(l + 1);
  sys.rhs.push_back(input);
  sys.couplings.reserve(l);
  for (std::size_t k = 1; k <= l; ++k) {
    sys.inv_diagonals.push_back(forward_inv_diagonal(trace.pre[s][k - 1], trace.act[s][k - 1],
                                                     k, eps_zero, sample));
    sys.couplings.push_back(LinearOperator::dense(net.layers[k - 1].weights));
    sys.rhs.push_back(net.layers[k - 1].bias);
  }
  return sys;
}

BlockChainSystem backward_chain_for_step(const FeedForwardNet& net, const ForwardTrace& trace,
                                         std::size_t s, const Vec& output_error) {
  const std::size_t l = net.depth();
  BlockChainSystem sys;
  sys.orientation = Orientation::UpperBackward;
  sys.inv_diagonals.reserve(l + 1);
  sys.inv_diagonals.push_back(Vec(net.input_width(), 1.0));
  sys.rhs.reserve(l + 1);
  sys.rhs.push_back(Vec(net.input_width(), 0.0));
  sys.couplings.reserve(l);
  for (std::size_t k = 1; k <= l; ++k) {
    sys.inv_diagonals.push_back(
        backward_inv_diagonal(trace.pre[s][k - 1], net.layers[k - 1].act));
    sys.couplings.push_back(LinearOperator::transposed(net.layers[k - 1].weights));
    sys.rhs.push_back(k == l ? output_error : Vec(net.layers[k - 1].weights.rows, 0.0));
  }
  return sys;
}

}  // namespace

BlockChainSystem build_forward_system(const FeedForwardNet& net, const Vec& input,
                                      const ForwardTrace& trace, double eps_zero) {
  net.validate();
  require_trace_shape(net.widths(), trace, 1);
  if (input.size() != net.input_width())
    throw std::invalid_argument("build_forward_system: input width mismatch");
  return forward_chain_for_step(net, input, trace, 0, eps_zero, std::nullopt);
}

BlockChainSystem build_backward_system(const FeedForwardNet& net, const ForwardTrace& trace,
                                       const Vec& output_error) {
  net.validate();
  require_trace_shape(net.widths(), trace, 1);
  if (output_error.size() != net.output_width())
    throw std::invalid_argument("build_backward_system: output error width mismatch");
  return backward_chain_for_step(net, trace, 0, output_error);
}

NestedBlockSystem build_rnn_forward_system(const RecurrentNet& net,
                                           const std::vector<Vec>& inputs,
                                           const ForwardTrace& trace, double eps_zero) {
  net.validate();
  require_trace_shape(net.widths(), trace, net.horizon);
  if (inputs.size() != net.horizon)
    throw std::invalid_argument("build_rnn_forward_system: expected one input per step");

  const FeedForwardNet fnn = net.as_feed_forward();
  NestedBlockSystem sys;
  sys.orientation = Orientation::LowerForward;
  sys.time_blocks.reserve(net.horizon);
  for (std::size_t s = 0; s < net.horizon; ++s)
    sys.time_blocks.push_back(forward_chain_for_step(fnn, inputs[s], trace, s, eps_zero, s));
  sys.time_coupling.reserve(net.depth() + 1);
  sys.time_coupling.push_back(LinearOperator::zero(net.input_width(), net.input_width()));
  for (const RecurrentLayer& layer : net.layers)
    sys.time_coupling.push_back(LinearOperator::dense(layer.recurrent));
  return sys;
}

NestedBlockSystem build_rnn_backward_system(const RecurrentNet& net, const ForwardTrace& trace,
                                            const std::vector<Vec>& output_errors) {
  net.validate();
  require_trace_shape(net.widths(), trace, net.horizon);
  if (output_errors.size() != net.horizon)
    throw std::invalid_argument("build_rnn_backward_system: expected one error per step");
  for (const Vec& e : output_errors)
    if (e.size() != net.output_width())
      throw std::invalid_argument("build_rnn_backward_system: error width mismatch");

  const FeedForwardNet fnn = net.as_feed_forward();
  NestedBlockSystem sys;
  sys.orientation = Orientation::UpperBackward;
  sys.time_blocks.reserve(net.horizon);
  for (std::size_t s = 0; s < net.horizon; ++s)
    sys.time_blocks.push_back(backward_chain_for_step(fnn, trace, s, output_errors[s]));
  sys.time_coupling.reserve(net.depth() + 1);
  sys.time_coupling.push_back(LinearOperator::zero(net.input_width(), net.input_width()));
  for (const RecurrentLayer& layer : net.layers)
    sys.time_coupling.push_back(LinearOperator::transposed(layer.recurrent));
  return sys;
}

ShiftedBatch build_shifted_batch(const FeedForwardNet& net, const std::vector<Vec>& inputs,
                                 const std::vector<ForwardTrace>& traces,
                                 const std::vector<Vec>& output_errors, PropMode mode,
                                 double eps_zero) {
  net.validate();
  const std::size_t r = traces.size();
  if (r == 0) throw std::invalid_argument("build_shifted_batch: empty batch");
  if (mode == PropMode::Forward && inputs.size() != r)
    throw std::invalid_argument("build_shifted_batch: expected one input per sample");
  if (mode == PropMode::Backward && output_errors.size() != r)
    throw std::invalid_argument("build_shifted_batch: expected one error per sample");

  ShiftedBatch batch;
  batch.orientation =
      mode == PropMode::Forward ? Orientation::LowerForward : Orientation::UpperBackward;
  const std::size_t l = net.depth();
  batch.couplings.reserve(l);
  for (std::size_t k = 1; k <= l; ++k)
    batch.couplings.push_back(mode == PropMode::Forward
                                  ? LinearOperator::dense(net.layers[k - 1].weights)
                                  : LinearOperator::transposed(net.layers[k - 1].weights));

  batch.inv_diagonals.reserve(r);
  batch.rhs.reserve(r);
  for (std::size_t i = 0; i < r; ++i) {
    require_trace_shape(net.widths(), traces[i], 1);
    BlockChainSystem sys =
        mode == PropMode::Forward
            ? forward_chain_for_step(net, inputs[i], traces[i], 0, eps_zero, i)
            : backward_chain_for_step(net, traces[i], 0, output_errors[i]);
    batch.inv_diagonals.push_back(std::move(sys.inv_diagonals));
    batch.rhs.push_back(std::move(sys.rhs));
  }
  return batch;
}

namespace {

void place_block(Matrix& a, std::size_t row0, std::size_t col0, const Matrix& block,
                 double scale) {
  for (std::size_t i = 0; i < block.rows; ++i)
    for (std::size_t j = 0; j < block.cols; ++j) a(row0 + i, col0 + j) = scale * block(i, j);
}

void place_chain(Matrix& a, Vec& b, const BlockChainSystem& sys, std::size_t origin) {
  std::vector<std::size_t> offset(sys.block_count());
  std::size_t off = origin;
  for (std::size_t k = 0; k < sys.block_count(); ++k) {
    offset[k] = off;
    off += sys.block_size(k);
  }
  for (std::size_t k = 0; k < sys.block_count(); ++k) {
    for (std::size_t i = 0; i < sys.block_size(k); ++i) {
      const double inv = sys.inv_diagonals[k][i];
      if (inv == 0.0)
        throw std::domain_error(
            "assemble_dense: stored inverse-diagonal entry is zero (diagonal not "
            "representable)");
      a(offset[k] + i, offset[k] + i) = 1.0 / inv;
      b[offset[k] + i] = sys.rhs[k][i];
    }
    if (k + 1 < sys.block_count()) {
      const Matrix coupled = sys.couplings[k].materialize();
      if (sys.orientation == Orientation::LowerForward)
        place_block(a, offset[k + 1], offset[k], coupled, -1.0);
      else
        place_block(a, offset[k], offset[k + 1], coupled, -1.0);
    }
  }
}

}  // namespace

DenseSystem assemble_dense(const BlockChainSystem& sys, std::size_t cap) {
  sys.validate();
  const std::size_t n = sys.total_dim();
  if (n > cap) throw std::invalid_argument("assemble_dense: dimension exceeds cap");
  DenseSystem out{Matrix(n, n, 0.0), Vec(n, 0.0)};
  place_chain(out.a, out.b, sys, 0);
  return out;
}

DenseSystem assemble_dense(const NestedBlockSystem& sys, std::size_t cap) {
  sys.validate();
  const std::size_t step = sys.step_dim();
  const std::size_t n = step * sys.steps();
  if (n > cap) throw std::invalid_argument("assemble_dense: dimension exceeds cap");
  DenseSystem out{Matrix(n, n, 0.0), Vec(n, 0.0)};

  std::vector<std::size_t> level_offset(sys.time_coupling.size());
  std::size_t off = 0;
  for (std::size_t k = 0; k < sys.time_coupling.size(); ++k) {
    level_offset[k] = off;
    off += sys.time_coupling[k].rows;
  }

  for (std::size_t s = 0; s < sys.steps(); ++s) {
    place_chain(out.a, out.b, sys.time_blocks[s], s * step);
    if (s + 1 < sys.steps()) {
      for (std::size_t k = 0; k < sys.time_coupling.size(); ++k) {
        const Matrix u = sys.time_coupling[k].materialize();
        if (sys.orientation == Orientation::LowerForward)
          place_block(out.a, (s + 1) * step + level_offset[k], s * step + level_offset[k], u,
                      -1.0);
        else
          place_block(out.a, s * step + level_offset[k], (s + 1) * step + level_offset[k], u,
                      -1.0);
      }
    }
  }
  return out;
}

}  // namespace bdprop
