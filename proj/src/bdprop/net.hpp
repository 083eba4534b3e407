#pragma once

#include <cstddef>
#include <vector>

#include "bdprop/activation.hpp"
#include "bdprop/linalg.hpp"

namespace bdprop {

struct Layer {
  Matrix weights;  // n_k x n_{k-1}
  Vec bias;        // n_k
  ActivationKind act;
};

struct FeedForwardNet {
  std::vector<Layer> layers;

  std::size_t depth() const { return layers.size(); }
  std::size_t input_width() const { return layers.front().weights.cols; }
  std::size_t output_width() const { return layers.back().weights.rows; }
  std::vector<std::size_t> widths() const;  // n_0 .. n_l
  std::size_t weight_scalars() const;
  void validate() const;
};

struct RecurrentLayer {
  Matrix weights;    // n_k x n_{k-1}
  Matrix recurrent;  // n_k x n_k
  Vec bias;
  ActivationKind act;
};

struct RecurrentNet {
  std::vector<RecurrentLayer> layers;
  std::size_t horizon = 1;  // time steps tau

  std::size_t depth() const { return layers.size(); }
  std::size_t input_width() const { return layers.front().weights.cols; }
  std::size_t output_width() const { return layers.back().weights.rows; }
  std::vector<std::size_t> widths() const;
  void validate() const;
  /// The tau = 1 view of this network (recurrent matrices unused at s = 1).
  FeedForwardNet as_feed_forward() const;
};

/// Pre-activations and activations recorded by one forward pass.
/// Step-major: pre[s][k-1] and act[s][k-1] hold layer k at time step s;
/// inputs[s] is z^(0,s). Feedforward passes have a single step.
struct ForwardTrace {
  std::vector<Vec> inputs;
  std::vector<std::vector<Vec>> pre;
  std::vector<std::vector<Vec>> act;

  std::size_t steps() const { return inputs.size(); }
  std::size_t depth() const { return pre.empty() ? 0 : pre.front().size(); }
};

struct GradientSet {
  std::vector<Matrix> weight_grads;
  std::vector<Matrix> recurrent_grads;  // RNN only; empty for feedforward
  std::vector<Vec> bias_grads;
  /// layer_errors[s][k] is v^(k,s) for k = 0..l; index 0 is the error
  /// propagated back to the input level.
  std::vector<std::vector<Vec>> layer_errors;
};

ForwardTrace forward(const FeedForwardNet& net, const Vec& input);

Vec softmax(const Vec& logits);

struct LossGrad {
  double loss = 0.0;
  Vec grad;
};

/// Cross-entropy against a probability target, with the gradient p - z* at
/// the logits. Softmax is max-shifted.
LossGrad softmax_xent(const Vec& logits, const Vec& target);

/// Layer errors v^(l..0) plus weight and bias gradients for one sample.
/// v^(l) = eps o f'(y^(l)); v^(k-1) = (W^(k)^T v^(k)) o f'(y^(k-1)); the
/// returned v^(0) is W^(1)^T v^(1).
GradientSet backward(const FeedForwardNet& net, const ForwardTrace& trace,
                     const Vec& output_error);

/// Averaged mini-batch update: W <- W - (rate / batch_size) * sum of grads.
FeedForwardNet sgd_step(const FeedForwardNet& net, const std::vector<GradientSet>& grads,
                        double rate, std::size_t batch_size);

/// Time steps outer (ascending), layers inner; hidden state at s = 0 is zero.
ForwardTrace rnn_forward(const RecurrentNet& net, const std::vector<Vec>& inputs);

/// Backpropagation through time: s descending outer, k descending inner,
/// terms for s+1 > tau taken as zero. Weight gradients are accumulated over
/// time steps.
GradientSet rnn_backward(const RecurrentNet& net, const ForwardTrace& trace,
                         const std::vector<Vec>& output_errors);

}  // namespace bdprop
