#pragma once

#include <string>

namespace bdprop {

enum class Activation { Identity, ReLU, LeakyReLU, Tanh, Sigmoid };

struct ActivationKind {
  Activation tag = Activation::Identity;
  double slope = 0.01;  // LeakyReLU only
  bool operator==(const ActivationKind&) const = default;
};

struct ActEval {
  double value = 0.0;
  double deriv = 0.0;
};

/// Value and derivative at y. ReLU and LeakyReLU take the positive-side
/// derivative at y == 0.
ActEval activation_eval(ActivationKind kind, double y);

/// Per-kind cost constant used by the analytic work formulas.
/// Identity 0, ReLU/LeakyReLU 1, Tanh/Sigmoid 4.
unsigned activation_gamma(ActivationKind kind);

std::string activation_name(ActivationKind kind);
ActivationKind parse_activation(const std::string& name);

}  // namespace bdprop
