#include "bdprop/net.hpp"

#include <cmath>
#include <stdexcept>

namespace bdprop {

namespace {

void check_trace_matches(const std::vector<std::size_t>& widths, const ForwardTrace& trace,
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

// z^(k-1,s): the input to layer k at step s.
const Vec& layer_input(const ForwardTrace& trace, std::size_t s, std::size_t k) {
  return k == 1 ? trace.inputs[s] : trace.act[s][k - 2];
}

void accumulate_outer(Matrix& acc, const Vec& u, const Vec& v) {
  for (std::size_t i = 0; i < u.size(); ++i)
    for (std::size_t j = 0; j < v.size(); ++j) acc(i, j) += u[i] * v[j];
}

}  // namespace

std::vector<std::size_t> FeedForwardNet::widths() const {
  std::vector<std::size_t> w;
  w.reserve(layers.size() + 1);
  w.push_back(input_width());
  for (const Layer& layer : layers) w.push_back(layer.weights.rows);
  return w;
}

std::size_t FeedForwardNet::weight_scalars() const {
  std::size_t n = 0;
  for (const Layer& layer : layers) n += layer.weights.size();
  return n;
}

void FeedForwardNet::validate() const {
  if (layers.empty()) throw std::invalid_argument("net: depth must be >= 1");
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const Layer& layer = layers[k];
    if (layer.weights.rows == 0 || layer.weights.cols == 0)
      throw std::invalid_argument("net: empty weight matrix");
    if (layer.bias.size() != layer.weights.rows)
      throw std::invalid_argument("net: bias width mismatch");
    if (k > 0 && layer.weights.cols != layers[k - 1].weights.rows)
      throw std::invalid_argument("net: adjacent layer widths do not chain");
  }
}

std::vector<std::size_t> RecurrentNet::widths() const {
  std::vector<std::size_t> w;
  w.reserve(layers.size() + 1);
  w.push_back(input_width());
  for (const RecurrentLayer& layer : layers) w.push_back(layer.weights.rows);
  return w;
}

void RecurrentNet::validate() const {
  if (layers.empty()) throw std::invalid_argument("rnn: depth must be >= 1");
  if (horizon == 0) throw std::invalid_argument("rnn: horizon must be >= 1");
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const RecurrentLayer& layer = layers[k];
    if (layer.weights.rows == 0 || layer.weights.cols == 0)
      throw std::invalid_argument("rnn: empty weight matrix");
    if (layer.recurrent.rows != layer.weights.rows ||
        layer.recurrent.cols != layer.weights.rows)
      throw std::invalid_argument("rnn: recurrent matrix must be square on the layer output");
    if (layer.bias.size() != layer.weights.rows)
      throw std::invalid_argument("rnn: bias width mismatch");
    if (k > 0 && layer.weights.cols != layers[k - 1].weights.rows)
      throw std::invalid_argument("rnn: adjacent layer widths do not chain");
  }
}

FeedForwardNet RecurrentNet::as_feed_forward() const {
  FeedForwardNet net;
  net.layers.reserve(layers.size());
  for (const RecurrentLayer& layer : layers)
    net.layers.push_back({layer.weights, layer.bias, layer.act});
  return net;
}

ForwardTrace forward(const FeedForwardNet& net, const Vec& input) {
  net.validate();
  if (input.size() != net.input_width())
    throw std::invalid_argument("forward: input width mismatch");

  ForwardTrace trace;
  trace.inputs = {input};
  trace.pre.resize(1);
  trace.act.resize(1);
  const Vec* z = &input;
  for (const Layer& layer : net.layers) {
    Vec y = layer.bias;
    matvec_add(layer.weights, *z, y, nullptr);
    Vec a(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) a[i] = activation_eval(layer.act, y[i]).value;
    trace.pre[0].push_back(std::move(y));
    trace.act[0].push_back(std::move(a));
    z = &trace.act[0].back();
  }
  return trace;
}

Vec softmax(const Vec& logits) {
  double shift = logits[0];
  for (double v : logits)
    if (v > shift) shift = v;
  Vec p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - shift);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

LossGrad softmax_xent(const Vec& logits, const Vec& target) {
  if (logits.empty() || logits.size() != target.size())
    throw std::invalid_argument("softmax_xent: width mismatch");
  Vec p = softmax(logits);
  LossGrad out;
  out.grad.resize(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (target[i] != 0.0) out.loss -= target[i] * std::log(p[i]);
    out.grad[i] = p[i] - target[i];
  }
  return out;
}

GradientSet backward(const FeedForwardNet& net, const ForwardTrace& trace,
                     const Vec& output_error) {
  net.validate();
  check_trace_matches(net.widths(), trace, 1);
  if (output_error.size() != net.output_width())
    throw std::invalid_argument("backward: output error width mismatch");

  const std::size_t l = net.depth();
  GradientSet g;
  g.layer_errors.resize(1);
  std::vector<Vec>& v = g.layer_errors[0];
  v.resize(l + 1);

  // v^(l) = eps o f'(y^(l)), then k = l..2 descending.
  for (std::size_t k = l; k >= 1; --k) {
    const Layer& layer = net.layers[k - 1];
    Vec acc;
    if (k == l) {
      acc = output_error;
    } else {
      acc.assign(layer.weights.rows, 0.0);
      matvec_transposed_add(net.layers[k].weights, v[k + 1], acc, nullptr);
    }
    const Vec& y = trace.pre[0][k - 1];
    for (std::size_t i = 0; i < acc.size(); ++i)
      acc[i] *= activation_eval(layer.act, y[i]).deriv;
    v[k] = std::move(acc);
  }
  v[0].assign(net.input_width(), 0.0);
  matvec_transposed_add(net.layers[0].weights, v[1], v[0], nullptr);

  g.weight_grads.reserve(l);
  g.bias_grads.reserve(l);
  for (std::size_t k = 1; k <= l; ++k) {
    const Vec& z_prev = layer_input(trace, 0, k);
    Matrix dw(v[k].size(), z_prev.size());
    accumulate_outer(dw, v[k], z_prev);
    g.weight_grads.push_back(std::move(dw));
    g.bias_grads.push_back(v[k]);
  }
  return g;
}

FeedForwardNet sgd_step(const FeedForwardNet& net, const std::vector<GradientSet>& grads,
                        double rate, std::size_t batch_size) {
  if (batch_size != grads.size())
    throw std::invalid_argument("sgd_step: batch size does not match gradient count");
  if (batch_size == 0) throw std::invalid_argument("sgd_step: empty batch");

  FeedForwardNet out = net;
  const double scale = rate / static_cast<double>(batch_size);
  for (const GradientSet& g : grads) {
    if (g.weight_grads.size() != net.depth() || g.bias_grads.size() != net.depth())
      throw std::invalid_argument("sgd_step: gradient layer count mismatch");
    for (std::size_t k = 0; k < net.depth(); ++k) {
      Layer& layer = out.layers[k];
      const Matrix& dw = g.weight_grads[k];
      const Vec& db = g.bias_grads[k];
      if (dw.rows != layer.weights.rows || dw.cols != layer.weights.cols ||
          db.size() != layer.bias.size())
        throw std::invalid_argument("sgd_step: gradient shape mismatch");
      for (std::size_t i = 0; i < dw.size(); ++i) layer.weights.a[i] -= scale * dw.a[i];
      for (std::size_t i = 0; i < db.size(); ++i) layer.bias[i] -= scale * db[i];
    }
  }
  return out;
}

ForwardTrace rnn_forward(const RecurrentNet& net, const std::vector<Vec>& inputs) {
  net.validate();
  if (inputs.size() != net.horizon)
    throw std::invalid_argument("rnn_forward: expected one input per time step");
  for (const Vec& x : inputs)
    if (x.size() != net.input_width())
      throw std::invalid_argument("rnn_forward: input width mismatch");

  const std::size_t l = net.depth();
  ForwardTrace trace;
  trace.inputs = inputs;
  trace.pre.resize(net.horizon);
  trace.act.resize(net.horizon);
  for (std::size_t s = 0; s < net.horizon; ++s) {
    const Vec* z = &trace.inputs[s];
    for (std::size_t k = 1; k <= l; ++k) {
      const RecurrentLayer& layer = net.layers[k - 1];
      Vec y = layer.bias;
      matvec_add(layer.weights, *z, y, nullptr);
      if (s > 0) matvec_add(layer.recurrent, trace.act[s - 1][k - 1], y, nullptr);
      Vec a(y.size());
      for (std::size_t i = 0; i < y.size(); ++i) a[i] = activation_eval(layer.act, y[i]).value;
      trace.pre[s].push_back(std::move(y));
      trace.act[s].push_back(std::move(a));
      z = &trace.act[s].back();
    }
  }
  return trace;
}

GradientSet rnn_backward(const RecurrentNet& net, const ForwardTrace& trace,
                         const std::vector<Vec>& output_errors) {
  net.validate();
  check_trace_matches(net.widths(), trace, net.horizon);
  if (output_errors.size() != net.horizon)
    throw std::invalid_argument("rnn_backward: expected one error per time step");
  for (const Vec& e : output_errors)
    if (e.size() != net.output_width())
      throw std::invalid_argument("rnn_backward: error width mismatch");

  const std::size_t l = net.depth();
  const std::size_t tau = net.horizon;
  GradientSet g;
  g.layer_errors.assign(tau, std::vector<Vec>(l + 1));

  for (std::size_t si = tau; si-- > 0;) {
    std::vector<Vec>& v = g.layer_errors[si];
    for (std::size_t k = l; k >= 1; --k) {
      const RecurrentLayer& layer = net.layers[k - 1];
      Vec acc;
      if (k == l) {
        acc = output_errors[si];
      } else {
        acc.assign(layer.weights.rows, 0.0);
        matvec_transposed_add(net.layers[k].weights, v[k + 1], acc, nullptr);
      }
      if (si + 1 < tau)
        matvec_transposed_add(layer.recurrent, g.layer_errors[si + 1][k], acc, nullptr);
      const Vec& y = trace.pre[si][k - 1];
      for (std::size_t i = 0; i < acc.size(); ++i)
        acc[i] *= activation_eval(layer.act, y[i]).deriv;
      v[k] = std::move(acc);
    }
    v[0].assign(net.input_width(), 0.0);
    matvec_transposed_add(net.layers[0].weights, v[1], v[0], nullptr);
  }

  for (std::size_t k = 1; k <= l; ++k) {
    const RecurrentLayer& layer = net.layers[k - 1];
    Matrix dw(layer.weights.rows, layer.weights.cols);
    Matrix du(layer.recurrent.rows, layer.recurrent.cols);
    Vec db(layer.bias.size(), 0.0);
    for (std::size_t s = 0; s < tau; ++s) {
      const Vec& v = g.layer_errors[s][k];
      accumulate_outer(dw, v, layer_input(trace, s, k));
      if (s > 0) accumulate_outer(du, v, trace.act[s - 1][k - 1]);
      for (std::size_t i = 0; i < db.size(); ++i) db[i] += v[i];
    }
    g.weight_grads.push_back(std::move(dw));
    g.recurrent_grads.push_back(std::move(du));
    g.bias_grads.push_back(std::move(db));
  }
  return g;
}

}  // namespace bdprop
