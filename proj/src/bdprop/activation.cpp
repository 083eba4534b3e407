#include "bdprop/activation.hpp"

#include <cmath>
#include <stdexcept>

namespace bdprop {

ActEval activation_eval(ActivationKind kind, double y) {
  switch (kind.tag) {
    case Activation::Identity:
      return {y, 1.0};
    case Activation::ReLU:
      return y >= 0.0 ? ActEval{y, 1.0} : ActEval{0.0, 0.0};
    case Activation::LeakyReLU:
      return y >= 0.0 ? ActEval{y, 1.0} : ActEval{kind.slope * y, kind.slope};
    case Activation::Tanh: {
      double t = std::tanh(y);
      return {t, 1.0 - t * t};
    }
    case Activation::Sigmoid: {
      // exp(-y) overflows to +inf for very negative y; 1/inf == 0 keeps
      // both value and derivative finite.
      double s = 1.0 / (1.0 + std::exp(-y));
      return {s, s * (1.0 - s)};
    }
  }
  throw std::invalid_argument("activation_eval: unknown kind");
}

unsigned activation_gamma(ActivationKind kind) {
  switch (kind.tag) {
    case Activation::Identity: return 0;
    case Activation::ReLU:
    case Activation::LeakyReLU: return 1;
    case Activation::Tanh:
    case Activation::Sigmoid: return 4;
  }
  return 4;
}

std::string activation_name(ActivationKind kind) {
  switch (kind.tag) {
    case Activation::Identity: return "identity";
    case Activation::ReLU: return "relu";
    case Activation::LeakyReLU: return "leaky:" + std::to_string(kind.slope);
    case Activation::Tanh: return "tanh";
    case Activation::Sigmoid: return "sigmoid";
  }
  return "identity";
}

ActivationKind parse_activation(const std::string& name) {
  if (name == "identity") return {Activation::Identity, 0.0};
  if (name == "relu") return {Activation::ReLU, 0.0};
  if (name == "tanh") return {Activation::Tanh, 0.0};
  if (name == "sigmoid") return {Activation::Sigmoid, 0.0};
  if (name.rfind("leaky", 0) == 0) {
    double slope = 0.01;
    auto colon = name.find(':');
    if (colon != std::string::npos) slope = std::stod(name.substr(colon + 1));
    return {Activation::LeakyReLU, slope};
  }
  throw std::invalid_argument("unknown activation: " + name);
}

}  // namespace bdprop
