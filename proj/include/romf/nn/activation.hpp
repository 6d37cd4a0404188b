#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace romf::nn {

enum class ActivationFn { Identity, Sigmoid, Tanh, Relu, LeakyRelu, Swish, Softplus };

inline constexpr double kLeakySlope = 0.01;
/// Above this argument softplus returns x itself (exp would overflow long before).
inline constexpr double kSoftplusLinearThreshold = 30.0;

double activate(ActivationFn fn, double x);
/// Derivative with respect to the pre-activation input x.
double activate_derivative(ActivationFn fn, double x);

double sigmoid(double x);
double softplus(double x);

std::vector<double> activation_apply(std::span<const double> x, ActivationFn fn);

std::string_view to_string(ActivationFn fn);
/// Throws ConfigError for unknown names.
ActivationFn activation_from_string(std::string_view name);

}  // namespace romf::nn
