#include "romf/nn/activation.hpp"

#include <cmath>

#include "romf/error.hpp"

namespace romf::nn {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) {
  if (x > kSoftplusLinearThreshold) return x;
  return std::log1p(std::exp(x));
}

double activate(ActivationFn fn, double x) {
  switch (fn) {
    case ActivationFn::Identity: return x;
    case ActivationFn::Sigmoid: return sigmoid(x);
    case ActivationFn::Tanh: return std::tanh(x);
    case ActivationFn::Relu: return x > 0.0 ? x : 0.0;
    case ActivationFn::LeakyRelu: return x > 0.0 ? x : kLeakySlope * x;
    case ActivationFn::Swish: return x * sigmoid(x);
    case ActivationFn::Softplus: return softplus(x);
  }
  return x;
}

double activate_derivative(ActivationFn fn, double x) {
  switch (fn) {
    case ActivationFn::Identity: return 1.0;
    case ActivationFn::Sigmoid: {
      const double s = sigmoid(x);
      return s * (1.0 - s);
    }
    case ActivationFn::Tanh: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case ActivationFn::Relu: return x > 0.0 ? 1.0 : 0.0;
    case ActivationFn::LeakyRelu: return x > 0.0 ? 1.0 : kLeakySlope;
    case ActivationFn::Swish: {
      const double s = sigmoid(x);
      return s + x * s * (1.0 - s);
    }
    case ActivationFn::Softplus: return x > kSoftplusLinearThreshold ? 1.0 : sigmoid(x);
  }
  return 1.0;
}

std::vector<double> activation_apply(std::span<const double> x, ActivationFn fn) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = activate(fn, x[i]);
  return out;
}

std::string_view to_string(ActivationFn fn) {
  switch (fn) {
    case ActivationFn::Identity: return "identity";
    case ActivationFn::Sigmoid: return "sigmoid";
    case ActivationFn::Tanh: return "tanh";
    case ActivationFn::Relu: return "relu";
    case ActivationFn::LeakyRelu: return "leaky_relu";
    case ActivationFn::Swish: return "swish";
    case ActivationFn::Softplus: return "softplus";
  }
  return "identity";
}

ActivationFn activation_from_string(std::string_view name) {
  for (auto fn : {ActivationFn::Identity, ActivationFn::Sigmoid, ActivationFn::Tanh,
                  ActivationFn::Relu, ActivationFn::LeakyRelu, ActivationFn::Swish,
                  ActivationFn::Softplus}) {
    if (to_string(fn) == name) return fn;
  }
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

}  // namespace romf::nn
