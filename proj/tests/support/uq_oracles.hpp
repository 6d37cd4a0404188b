#pragma once

// Independent reference computations for the UQ module: Monte-Carlo mixture
// moments and closed-form moments of affine maps.

#include <cmath>
#include <random>
#include <vector>

#include "romf/uq.hpp"

namespace romf::testsupport {

inline std::vector<uq::GaussianLatent> random_members(std::size_t count, std::size_t m, std::mt19937_64& rng) {
  std::normal_distribution<double> mean(0.0, 1.0);
  std::uniform_real_distribution<double> var(0.05, 1.5);
  std::vector<uq::GaussianLatent> out(count);
  for (auto& g : out) {
    g.mean.resize(m);
    g.var.resize(m);
    for (std::size_t i = 0; i < m; ++i) g.mean[i] = mean(rng), g.var[i] = var(rng);
  }
  return out;
}

struct SampleMoments {
  std::vector<double> mean, var, mean_se, var_se;
};

/// Draws from the equal-weight mixture: pick a member uniformly, then sample
/// its Gaussian. Standard errors use the sample central moments.
inline SampleMoments mixture_moments(const std::vector<uq::GaussianLatent>& members, std::size_t draws,
                                     std::mt19937_64& rng) {
  const std::size_t m = members.front().mean.size();
  std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::vector<std::vector<double>> x(m, std::vector<double>(draws));
  for (std::size_t d = 0; d < draws; ++d) {
    const auto& g = members[pick(rng)];
    for (std::size_t i = 0; i < m; ++i) x[i][d] = g.mean[i] + std::sqrt(g.var[i]) * unit(rng);
  }
  SampleMoments s;
  const double n = static_cast<double>(draws);
  for (std::size_t i = 0; i < m; ++i) {
    double mu = 0.0;
    for (double v : x[i]) mu += v;
    mu /= n;
    double m2 = 0.0, m4 = 0.0;
    for (double v : x[i]) {
      const double d2 = (v - mu) * (v - mu);
      m2 += d2;
      m4 += d2 * d2;
    }
    m2 /= n;
    m4 /= n;
    s.mean.push_back(mu);
    s.var.push_back(m2);
    s.mean_se.push_back(std::sqrt(m2 / n));
    s.var_se.push_back(std::sqrt((m4 - m2 * m2) / n));
  }
  return s;
}

inline double weight_sum_error(const uq::SigmaPointSet& s) {
  double sum = 0.0;
  for (double w : s.weights) sum += w;
  return std::abs(sum - 1.0);
}

/// y = A z + b with random A (n x m) and b.
struct AffineMap {
  nn::Tensor2 a;
  std::vector<double> b;

  fc::DecodeFn decoder() const {
    return [a = a, b = b](const nn::Tensor2& z) {
      nn::Tensor2 y(a.rows(), z.cols());
      for (std::size_t c = 0; c < z.cols(); ++c)
        for (std::size_t r = 0; r < a.rows(); ++r) {
          double acc = b[r];
          for (std::size_t k = 0; k < a.cols(); ++k) acc += a(r, k) * z(k, c);
          y(r, c) = acc;
        }
      return y;
    };
  }

  /// Mean A mu + b and diagonal variance sum_k A_rk^2 var_k.
  uq::GaussianField exact(const uq::GaussianLatent& g) const {
    uq::GaussianField f{std::vector<double>(a.rows()), std::vector<double>(a.rows())};
    for (std::size_t r = 0; r < a.rows(); ++r) {
      double mu = b[r], var = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) {
        mu += a(r, k) * g.mean[k];
        var += a(r, k) * a(r, k) * g.var[k];
      }
      f.mean[r] = mu;
      f.var[r] = var;
    }
    return f;
  }
};

inline AffineMap random_affine(std::size_t n, std::size_t m, std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  AffineMap map{nn::Tensor2(n, m), std::vector<double>(n)};
  for (double& v : map.a.data()) v = d(rng);
  for (double& v : map.b) v = d(rng);
  return map;
}

}  // namespace romf::testsupport
