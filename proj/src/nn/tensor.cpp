#include "romf/nn/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "romf/error.hpp"

namespace romf::nn {

Tensor2::Tensor2(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Tensor2::Tensor2(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw ShapeError("Tensor2: data length " + std::to_string(data_.size()) + " != " +
                     std::to_string(rows) + "x" + std::to_string(cols));
  }
}

std::vector<double> Tensor2::column(std::size_t c) const {
  std::vector<double> out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
  return out;
}

void Tensor2::set_column(std::size_t c, std::span<const double> values) {
  if (values.size() != rows_ || c >= cols_) throw ShapeError("Tensor2::set_column: bad shape");
  for (std::size_t r = 0; r < rows_; ++r) (*this)(r, c) = values[r];
}

Tensor2 Tensor2::columns(std::size_t first, std::size_t count) const {
  if (first + count > cols_) throw ShapeError("Tensor2::columns: range exceeds column count");
  Tensor2 out(rows_, count);
  for (std::size_t r = 0; r < rows_; ++r) {
    std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(r * cols_ + first), count,
                out.data_.begin() + static_cast<std::ptrdiff_t>(r * count));
  }
  return out;
}

Tensor2 Tensor2::transposed() const {
  Tensor2 out(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) out(c, r) = (*this)(r, c);
  return out;
}

bool Tensor2::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Batch::Batch(std::size_t samples, std::size_t channels, std::size_t length, double fill)
    : samples_(samples), channels_(channels), length_(length),
      data_(samples * channels * length, fill) {}

Batch Batch::reshaped(std::size_t channels, std::size_t length) const {
  if (channels * length != features()) {
    throw ShapeError("Batch::reshaped: cannot view " + shape_string() + " as (" +
                     std::to_string(channels) + ", " + std::to_string(length) + ")");
  }
  Batch out = *this;
  out.channels_ = channels;
  out.length_ = length;
  return out;
}

Batch Batch::gather(std::span<const std::size_t> indices) const {
  Batch out(indices.size(), channels_, length_);
  const std::size_t f = features();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= samples_) throw ShapeError("Batch::gather: index out of range");
    std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(indices[i] * f), f,
                out.data_.begin() + static_cast<std::ptrdiff_t>(i * f));
  }
  return out;
}

Batch Batch::from_tensor(const Tensor2& t) {
  Batch out(1, t.rows(), t.cols());
  std::copy(t.data().begin(), t.data().end(), out.data_.begin());
  return out;
}

Tensor2 Batch::sample_tensor(std::size_t b) const {
  auto s = sample(b);
  return Tensor2(channels_, length_, std::vector<double>(s.begin(), s.end()));
}

std::string Batch::shape_string() const {
  return "(" + std::to_string(samples_) + ", " + std::to_string(channels_) + ", " +
         std::to_string(length_) + ")";
}

}  // namespace romf::nn
