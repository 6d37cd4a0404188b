#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace romf::nn {

using Rng = std::mt19937_64;

/// Uniform double in [lo, hi) from the top 53 bits of the generator.
double uniform(Rng& rng, double lo, double hi);
/// Standard normal via Box-Muller; deterministic for a given generator state.
double standard_normal(Rng& rng);

struct ParamBlock {
  std::string name;
  std::size_t layer = 0;
  std::size_t offset = 0;
  std::size_t size = 0;
};

/// Flat parameter storage shared by every layer of one network.
///
/// Trainable parameters and their gradients live in two equal-length arrays
/// partitioned into named blocks. Non-trainable state (batch-norm running
/// statistics) lives in a separate buffer array that the optimizer never
/// touches but checkpoints persist.
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed = 0) : seed_(seed) {}

  /// Appends a zero-initialized parameter block and returns its index.
  std::size_t add_block(std::string name, std::size_t layer, std::size_t size);
  /// Appends a buffer block initialized to `fill` and returns its index.
  std::size_t add_buffer(std::string name, std::size_t layer, std::size_t size, double fill);

  std::span<double> values(std::size_t block);
  std::span<const double> values(std::size_t block) const;
  std::span<double> grads(std::size_t block);
  std::span<const double> grads(std::size_t block) const;
  std::span<double> buffer(std::size_t block);
  std::span<const double> buffer(std::size_t block) const;

  std::vector<double>& flat_values() { return values_; }
  const std::vector<double>& flat_values() const { return values_; }
  std::vector<double>& flat_grads() { return grads_; }
  const std::vector<double>& flat_grads() const { return grads_; }
  std::vector<double>& flat_buffers() { return buffers_; }
  const std::vector<double>& flat_buffers() const { return buffers_; }

  const std::vector<ParamBlock>& blocks() const { return blocks_; }
  const std::vector<ParamBlock>& buffer_blocks() const { return buffer_blocks_; }

  std::size_t size() const { return values_.size(); }
  std::uint64_t seed() const { return seed_; }
  void zero_grads();

 private:
  std::uint64_t seed_;
  std::vector<double> values_;
  std::vector<double> grads_;
  std::vector<ParamBlock> blocks_;
  std::vector<double> buffers_;
  std::vector<ParamBlock> buffer_blocks_;
};

}  // namespace romf::nn
