// Test-only oracles, independent of the solver paths they check: a dense LU
// solve, central finite differences for gradients, and plain-loop scripted
// network evaluation.
#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "bdprop/linalg.hpp"
#include "bdprop/net.hpp"

namespace oracle {

// Gaussian elimination with partial pivoting.
inline bdprop::Vec lu_solve(bdprop::Matrix a, bdprop::Vec b) {
  const std::size_t n = a.rows;
  if (a.cols != n || b.size() != n) throw std::invalid_argument("lu_solve: not square");
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::fabs(a(r, col)) > std::fabs(a(pivot, col))) pivot = r;
    if (a(pivot, col) == 0.0) throw std::runtime_error("lu_solve: singular matrix");
    if (pivot != col) {
      for (std::size_t c = 0; c < n; ++c) std::swap(a(pivot, c), a(col, c));
      std::swap(b[pivot], b[col]);
    }
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a(r, col) / a(col, col);
      if (f == 0.0) continue;
      for (std::size_t c = col; c < n; ++c) a(r, c) -= f * a(col, c);
      b[r] -= f * b[col];
    }
  }
  bdprop::Vec x(n, 0.0);
  for (std::size_t r = n; r-- > 0;) {
    double s = b[r];
    for (std::size_t c = r + 1; c < n; ++c) s -= a(r, c) * x[c];
    x[r] = s / a(r, r);
  }
  return x;
}

// Relative error with an absolute floor for near-zero pairs.
inline double rel_err(double a, double b) {
  const double denom = std::max(std::fabs(a), std::fabs(b));
  if (denom < 1e-8) return std::fabs(a - b) < 1e-10 ? 0.0 : std::fabs(a - b) / 1e-8;
  return std::fabs(a - b) / denom;
}

// Max relative error between analytic gradients and central finite
// differences of `loss` over every weight and bias entry of the net.
struct GradCheck {
  double max_rel_err = 0.0;
  double min_abs_grad = 1e300;
};

inline GradCheck fd_check_fnn(const bdprop::FeedForwardNet& net,
                              const bdprop::GradientSet& grads,
                              const std::function<double(const bdprop::FeedForwardNet&)>& loss,
                              double step = 1e-5) {
  GradCheck out;
  bdprop::FeedForwardNet work = net;
  auto probe = [&](double* slot, double analytic) {
    const double saved = *slot;
    *slot = saved + step;
    const double up = loss(work);
    *slot = saved - step;
    const double down = loss(work);
    *slot = saved;
    const double fd = (up - down) / (2.0 * step);
    out.max_rel_err = std::max(out.max_rel_err, rel_err(analytic, fd));
    out.min_abs_grad = std::min(out.min_abs_grad, std::fabs(fd));
  };
  for (std::size_t k = 0; k < net.depth(); ++k) {
    for (std::size_t i = 0; i < work.layers[k].weights.size(); ++i)
      probe(&work.layers[k].weights.a[i], grads.weight_grads[k].a[i]);
    for (std::size_t i = 0; i < work.layers[k].bias.size(); ++i)
      probe(&work.layers[k].bias[i], grads.bias_grads[k][i]);
  }
  return out;
}

inline GradCheck fd_check_rnn(const bdprop::RecurrentNet& net, const bdprop::GradientSet& grads,
                              const std::function<double(const bdprop::RecurrentNet&)>& loss,
                              double step = 1e-5) {
  GradCheck out;
  auto probe = [&](double* slot, const bdprop::RecurrentNet& work, double analytic) {
    const double saved = *slot;
    *slot = saved + step;
    const double up = loss(work);
    *slot = saved - step;
    const double down = loss(work);
    *slot = saved;
    const double fd = (up - down) / (2.0 * step);
    out.max_rel_err = std::max(out.max_rel_err, rel_err(analytic, fd));
    out.min_abs_grad = std::min(out.min_abs_grad, std::fabs(fd));
  };
  bdprop::RecurrentNet work = net;
  for (std::size_t k = 0; k < net.depth(); ++k) {
    for (std::size_t i = 0; i < work.layers[k].weights.size(); ++i)
      probe(&work.layers[k].weights.a[i], work, grads.weight_grads[k].a[i]);
    for (std::size_t i = 0; i < work.layers[k].recurrent.size(); ++i)
      probe(&work.layers[k].recurrent.a[i], work, grads.recurrent_grads[k].a[i]);
    for (std::size_t i = 0; i < work.layers[k].bias.size(); ++i)
      probe(&work.layers[k].bias[i], work, grads.bias_grads[k][i]);
  }
  return out;
}

// Plain-loop evaluation of a uniform feedforward net, written without the
// library kernels.
inline std::vector<bdprop::Vec> scripted_forward(
    const std::vector<std::vector<std::vector<double>>>& weights,
    const std::vector<std::vector<double>>& biases, const bdprop::Vec& input,
    const std::function<double(double)>& f) {
  std::vector<bdprop::Vec> acts;
  bdprop::Vec z = input;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    bdprop::Vec y(weights[k].size(), 0.0);
    for (std::size_t i = 0; i < weights[k].size(); ++i) {
      double s = biases[k][i];
      for (std::size_t j = 0; j < weights[k][i].size(); ++j) s += weights[k][i][j] * z[j];
      y[i] = s;
    }
    for (double& v : y) v = f(v);
    acts.push_back(y);
    z = y;
  }
  return acts;
}

}  // namespace oracle
