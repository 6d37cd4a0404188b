#include <cmath>
#include <string>

#include "romf/datasets.hpp"
#include "romf/error.hpp"

namespace romf::data {

namespace {
constexpr double kExpLimit = 700.0;
}

double BurgersConfig::t0() const { return std::exp(re / 8.0); }

void BurgersConfig::validate() const {
  if (!(length > 0.0)) throw ConfigError("burgers.length must be positive");
  if (!(t_max > 0.0)) throw ConfigError("burgers.t_max must be positive");
  if (nodes < 2) throw ConfigError("burgers.nodes must be >= 2");
  if (steps < 2) throw ConfigError("burgers.steps must be >= 2");
  if (!(re > 0.0)) throw ConfigError("burgers.re must be positive");
  if (re / 8.0 > kExpLimit) throw ConfigError("burgers.re too large: exp(Re/8) overflows");
}

void StokerConfig::validate() const {
  if (!(length > 0.0)) throw ConfigError("stoker.length must be positive");
  if (!(x0 > 0.0 && x0 < length)) throw ConfigError("stoker.x0 must lie strictly inside the domain");
  if (nodes < 2) throw ConfigError("stoker.nodes must be >= 2");
  if (steps < 2) throw ConfigError("stoker.steps must be >= 2");
  if (!(t_max > 0.0)) throw ConfigError("stoker.t_max must be positive");
  if (!(h_ds > 0.0)) throw ConfigError("stoker.h_ds must be positive");
  if (!(h_up > h_ds)) throw ConfigError("stoker.h_up must exceed h_ds");
  if (!(g > 0.0)) throw ConfigError("stoker.g must be positive");
}

double burgers_initial(double x, const BurgersConfig& config) {
  const double e = config.re * x * x / 4.0;
  if (e > kExpLimit) return 0.0;
  return x / (1.0 + std::sqrt(1.0 / config.t0()) * std::exp(e));
}

double burgers_solution(double x, double t, const BurgersConfig& config) {
  const double e = config.re * x * x / (4.0 * t + 4.0);
  if (e > kExpLimit) return 0.0;
  return (x / (t + 1.0)) / (1.0 + std::sqrt((t + 1.0) / config.t0()) * std::exp(e));
}

double stoker_jump_polynomial(double c, const StokerConfig& config) {
  const double g = config.g;
  const double ghd = g * config.h_ds;
  const double cu = std::sqrt(g * config.h_up);
  const double c2 = c * c;
  return -8.0 * ghd * c2 * (cu - c) * (cu - c) + (c2 - ghd) * (c2 - ghd) * (c2 + ghd);
}

StokerMiddleState stoker_middle_state(const StokerConfig& config) {
  if (!(config.h_up > config.h_ds && config.h_ds > 0.0)) {
    throw ConfigError("stoker middle state needs h_up > h_ds > 0");
  }
  double lo = std::sqrt(config.g * config.h_ds);
  double hi = std::sqrt(config.g * config.h_up);
  double f_lo = stoker_jump_polynomial(lo, config);
  const double f_hi = stoker_jump_polynomial(hi, config);
  if (!(f_lo < 0.0 && f_hi > 0.0)) {
    throw NumericError("stoker jump condition has no sign change on [sqrt(g h_ds), sqrt(g h_up)]");
  }
  // Halve until the bracket stops shrinking (adjacent doubles), which is
  // well below the 1e-12 step the root needs.
  while (hi - lo > 0.0) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double f = stoker_jump_polynomial(mid, config);
    if (f == 0.0) {
      lo = hi = mid;
      break;
    }
    if ((f < 0.0) == (f_lo < 0.0)) {
      lo = mid;
      f_lo = f;
    } else {
      hi = mid;
    }
  }
  StokerMiddleState s;
  const double f_l = std::abs(stoker_jump_polynomial(lo, config));
  const double f_h = std::abs(stoker_jump_polynomial(hi, config));
  s.c_m = f_l <= f_h ? lo : hi;
  s.h_m = s.c_m * s.c_m / config.g;
  const double scale = std::pow(config.g * config.h_up, 3);
  s.residual = stoker_jump_polynomial(s.c_m, config) / scale;
  return s;
}

StokerFronts stoker_fronts(double t, const StokerConfig& config, const StokerMiddleState& middle) {
  const double cu = std::sqrt(config.g * config.h_up);
  const double c2 = middle.c_m * middle.c_m;
  StokerFronts f;
  f.x_a = config.x0 - t * cu;
  f.x_b = config.x0 + t * (2.0 * cu - 3.0 * middle.c_m);
  f.x_c = config.x0 + t * 2.0 * c2 * (cu - middle.c_m) / (c2 - config.g * config.h_ds);
  return f;
}

double stoker_solution(double x, double t, const StokerConfig& config,
                       const StokerMiddleState& middle) {
  if (t <= 0.0) return x <= config.x0 ? config.h_up : config.h_ds;
  const StokerFronts f = stoker_fronts(t, config, middle);
  if (x <= f.x_a) return config.h_up;
  if (x <= f.x_b) {
    const double r = std::sqrt(config.g * config.h_up) - (x - config.x0) / (2.0 * t);
    return 4.0 / (9.0 * config.g) * r * r;
  }
  if (x <= f.x_c) return middle.h_m;
  return config.h_ds;
}

}  // namespace romf::data
