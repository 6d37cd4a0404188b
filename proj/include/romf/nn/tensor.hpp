#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace romf::nn {

/// Row-major matrix of doubles. Used for snapshot matrices (n_s x T),
/// lookback windows (m x n_t) and their transposes.
class Tensor2 {
 public:
  Tensor2() = default;
  Tensor2(std::size_t rows, std::size_t cols, double fill = 0.0);
  Tensor2(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double> column(std::size_t c) const;
  void set_column(std::size_t c, std::span<const double> values);
  /// Columns [first, first + count) as a new matrix.
  Tensor2 columns(std::size_t first, std::size_t count) const;
  Tensor2 transposed() const;

  bool all_finite() const;

  friend bool operator==(const Tensor2&, const Tensor2&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Stack of multi-channel 1D signals laid out as [sample][channel][position].
/// This is the activation type flowing between layers.
class Batch {
 public:
  Batch() = default;
  Batch(std::size_t samples, std::size_t channels, std::size_t length, double fill = 0.0);

  std::size_t samples() const { return samples_; }
  std::size_t channels() const { return channels_; }
  std::size_t length() const { return length_; }
  /// channels * length, the feature count of one sample.
  std::size_t features() const { return channels_ * length_; }
  std::size_t size() const { return data_.size(); }

  double& at(std::size_t b, std::size_t c, std::size_t l) {
    return data_[(b * channels_ + c) * length_ + l];
  }
  double at(std::size_t b, std::size_t c, std::size_t l) const {
    return data_[(b * channels_ + c) * length_ + l];
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::span<double> sample(std::size_t b) { return {data_.data() + b * features(), features()}; }
  std::span<const double> sample(std::size_t b) const {
    return {data_.data() + b * features(), features()};
  }

  /// Same data viewed with a different (channels, length) factorization.
  Batch reshaped(std::size_t channels, std::size_t length) const;
  /// Samples at the given indices, in order.
  Batch gather(std::span<const std::size_t> indices) const;

  static Batch from_tensor(const Tensor2& t);
  Tensor2 sample_tensor(std::size_t b) const;

  bool same_shape(const Batch& other) const {
    return samples_ == other.samples_ && channels_ == other.channels_ && length_ == other.length_;
  }
  std::string shape_string() const;

  friend bool operator==(const Batch&, const Batch&) = default;

 private:
  std::size_t samples_ = 0;
  std::size_t channels_ = 0;
  std::size_t length_ = 0;
  std::vector<double> data_;
};

}  // namespace romf::nn
