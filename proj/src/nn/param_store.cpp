#include "romf/nn/param_store.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "romf/error.hpp"

namespace romf::nn {

double uniform(Rng& rng, double lo, double hi) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

double standard_normal(Rng& rng) {
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform(rng, 0.0, 1.0);
  const double u2 = uniform(rng, 0.0, 1.0);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t ParamStore::add_block(std::string name, std::size_t layer, std::size_t size) {
  blocks_.push_back({std::move(name), layer, values_.size(), size});
  values_.resize(values_.size() + size, 0.0);
  grads_.resize(values_.size(), 0.0);
  return blocks_.size() - 1;
}

std::size_t ParamStore::add_buffer(std::string name, std::size_t layer, std::size_t size,
                                   double fill) {
  buffer_blocks_.push_back({std::move(name), layer, buffers_.size(), size});
  buffers_.resize(buffers_.size() + size, fill);
  return buffer_blocks_.size() - 1;
}

std::span<double> ParamStore::values(std::size_t block) {
  const auto& b = blocks_.at(block);
  return {values_.data() + b.offset, b.size};
}
std::span<const double> ParamStore::values(std::size_t block) const {
  const auto& b = blocks_.at(block);
  return {values_.data() + b.offset, b.size};
}
std::span<double> ParamStore::grads(std::size_t block) {
  const auto& b = blocks_.at(block);
  return {grads_.data() + b.offset, b.size};
}
std::span<const double> ParamStore::grads(std::size_t block) const {
  const auto& b = blocks_.at(block);
  return {grads_.data() + b.offset, b.size};
}
std::span<double> ParamStore::buffer(std::size_t block) {
  const auto& b = buffer_blocks_.at(block);
  return {buffers_.data() + b.offset, b.size};
}
std::span<const double> ParamStore::buffer(std::size_t block) const {
  const auto& b = buffer_blocks_.at(block);
  return {buffers_.data() + b.offset, b.size};
}

void ParamStore::zero_grads() { std::fill(grads_.begin(), grads_.end(), 0.0); }

}  // namespace romf::nn
