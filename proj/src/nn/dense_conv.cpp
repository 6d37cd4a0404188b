#include <algorithm>
#include <cmath>

#include <Eigen/Core>

#include "romf/error.hpp"
#include "romf/nn/layers.hpp"

namespace romf::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMap = Eigen::Map<RowMat>;
using ConstRowMap = Eigen::Map<const RowMat>;

constexpr double kNormFloor = 1e-12;

void glorot_fill(std::span<double> w, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& v : w) v = uniform(rng, -limit, limit);
}

double filter_norm(std::span<const double> v, std::size_t filter, std::size_t width) {
  double s = 0.0;
  for (std::size_t i = 0; i < width; ++i) s += v[filter * width + i] * v[filter * width + i];
  return std::sqrt(s);
}

}  // namespace

std::vector<double> weight_norm_apply(std::span<const double> direction,
                                      std::span<const double> gain) {
  const std::size_t filters = gain.size();
  if (filters == 0 || direction.size() % filters != 0) {
    throw ShapeError("weight_norm_apply: direction length is not a multiple of the gain length");
  }
  const std::size_t width = direction.size() / filters;
  std::vector<double> w(direction.size());
  for (std::size_t o = 0; o < filters; ++o) {
    const double n = filter_norm(direction, o, width);
    if (n == 0.0) {
      throw NumericError("weight_norm_apply: filter " + std::to_string(o) + " has zero norm");
    }
    const double scale = gain[o] / std::max(n, kNormFloor);
    for (std::size_t i = 0; i < width; ++i) w[o * width + i] = scale * direction[o * width + i];
  }
  return w;
}

// ---------------------------------------------------------------------------
// Dense

Dense::Dense(const LayerSpec& spec) : spec_(spec) { spec_.validate(); }

void Dense::bind(ParamStore& store, Rng& rng, std::size_t index) {
  index_ = index;
  const std::string p = "layer" + std::to_string(index) + ".dense.";
  weight_ = store.add_block(p + "weight", index, spec_.out * spec_.in);
  bias_ = store.add_block(p + "bias", index, spec_.out);
  glorot_fill(store.values(weight_), spec_.in, spec_.out, rng);
}

Batch Dense::forward(const Batch& x, ParamStore& store, Mode) {
  if (x.features() != spec_.in) {
    throw ShapeError("dense: input has " + std::to_string(x.features()) + " features, expected " +
                     std::to_string(spec_.in));
  }
  const auto n = static_cast<Eigen::Index>(x.samples());
  const auto in = static_cast<Eigen::Index>(spec_.in);
  const auto out_w = static_cast<Eigen::Index>(spec_.out);
  Batch out(x.samples(), 1, spec_.out);
  ConstRowMap X(x.data().data(), n, in);
  ConstRowMap W(store.values(weight_).data(), out_w, in);
  Eigen::Map<const Eigen::RowVectorXd> b(store.values(bias_).data(), out_w);
  RowMap Y(out.data().data(), n, out_w);
  Y.noalias() = X * W.transpose();
  Y.rowwise() += b;
  input_ = x;
  return out;
}

Batch Dense::backward(const Batch& g, ParamStore& store) {
  require_tape(input_.has_value());
  const Batch& x = *input_;
  const auto n = static_cast<Eigen::Index>(x.samples());
  const auto in = static_cast<Eigen::Index>(spec_.in);
  const auto out_w = static_cast<Eigen::Index>(spec_.out);
  if (g.samples() != x.samples() || g.features() != spec_.out) {
    throw ShapeError("dense backward: gradient shape " + g.shape_string() + " mismatch");
  }
  ConstRowMap G(g.data().data(), n, out_w);
  ConstRowMap X(x.data().data(), n, in);
  ConstRowMap W(store.values(weight_).data(), out_w, in);
  RowMap dW(store.grads(weight_).data(), out_w, in);
  Eigen::Map<Eigen::RowVectorXd> db(store.grads(bias_).data(), out_w);
  dW.noalias() += G.transpose() * X;
  for (Eigen::Index r = 0; r < n; ++r) db += G.row(r);
  Batch dx(x.samples(), x.channels(), x.length());
  RowMap dX(dx.data().data(), n, in);
  dX.noalias() = G * W;
  input_.reset();
  return dx;
}

std::string Dense::describe() const {
  return "Dense(" + std::to_string(spec_.in) + "->" + std::to_string(spec_.out) + ")";
}

// ---------------------------------------------------------------------------
// Conv1D

Conv1D::Conv1D(const LayerSpec& spec) : spec_(spec) { spec_.validate(); }

void Conv1D::bind(ParamStore& store, Rng& rng, std::size_t index) {
  index_ = index;
  const std::string p = "layer" + std::to_string(index) + ".conv.";
  const std::size_t width = spec_.in * spec_.kernel;
  weight_ = store.add_block(p + (spec_.weight_norm ? "direction" : "weight"), index,
                            spec_.out * width);
  glorot_fill(store.values(weight_), width, spec_.out * spec_.kernel, rng);
  if (spec_.weight_norm) {
    gain_ = store.add_block(p + "gain", index, spec_.out);
    auto v = store.values(weight_);
    auto g = store.values(*gain_);
    for (std::size_t o = 0; o < spec_.out; ++o) g[o] = filter_norm(v, o, width);
  }
  if (spec_.bias) bias_ = store.add_block(p + "bias", index, spec_.out);
}

std::size_t Conv1D::left_pad() const {
  const std::size_t span = (spec_.kernel - 1) * spec_.dilation;
  switch (spec_.padding) {
    case Padding::None: return 0;
    case Padding::ZeroSymmetric: return span / 2;
    case Padding::Causal: return span;
  }
  return 0;
}

std::size_t Conv1D::right_pad() const {
  const std::size_t span = (spec_.kernel - 1) * spec_.dilation;
  return spec_.padding == Padding::ZeroSymmetric ? span - span / 2 : 0;
}

std::size_t Conv1D::output_length(std::size_t length) const {
  const std::size_t padded = length + left_pad() + right_pad();
  const std::size_t span = (spec_.kernel - 1) * spec_.dilation + 1;
  if (span > padded) {
    throw ShapeError("conv1d: kernel span " + std::to_string(span) + " exceeds padded length " +
                     std::to_string(padded));
  }
  return padded - span + 1;
}

std::vector<double> Conv1D::effective_weights(const ParamStore& store) const {
  auto v = store.values(weight_);
  if (!spec_.weight_norm) return {v.begin(), v.end()};
  auto g = store.values(*gain_);
  const std::size_t width = spec_.in * spec_.kernel;
  std::vector<double> w(v.size());
  for (std::size_t o = 0; o < spec_.out; ++o) {
    const double scale = g[o] / std::max(filter_norm(v, o, width), kNormFloor);
    for (std::size_t i = 0; i < width; ++i) w[o * width + i] = scale * v[o * width + i];
  }
  return w;
}

Batch Conv1D::forward(const Batch& x, ParamStore& store, Mode) {
  if (x.channels() != spec_.in) {
    throw ShapeError("conv1d: input has " + std::to_string(x.channels()) + " channels, expected " +
                     std::to_string(spec_.in));
  }
  const std::size_t B = x.samples();
  const std::size_t L = x.length();
  const std::size_t Lout = output_length(L);
  const std::size_t k = spec_.kernel;
  const std::size_t d = spec_.dilation;
  const std::size_t pad = left_pad();
  const std::size_t rows = spec_.in * k;
  const std::size_t cols = B * Lout;

  Tape tape;
  tape.samples = B;
  tape.length = L;
  tape.out_length = Lout;
  tape.columns.assign(rows * cols, 0.0);
  for (std::size_t ci = 0; ci < spec_.in; ++ci)
    for (std::size_t j = 0; j < k; ++j) {
      double* dst = tape.columns.data() + (ci * k + j) * cols;
      const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(j * d) - static_cast<std::ptrdiff_t>(pad);
      for (std::size_t b = 0; b < B; ++b) {
        const double* src = x.data().data() + (b * spec_.in + ci) * L;
        for (std::size_t s = 0; s < Lout; ++s) {
          const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(s) + shift;
          if (pos >= 0 && pos < static_cast<std::ptrdiff_t>(L)) dst[b * Lout + s] = src[pos];
        }
      }
    }
  tape.weights = effective_weights(store);

  const auto cout = static_cast<Eigen::Index>(spec_.out);
  RowMat Y(cout, static_cast<Eigen::Index>(cols));
  ConstRowMap W(tape.weights.data(), cout, static_cast<Eigen::Index>(rows));
  ConstRowMap C(tape.columns.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  Y.noalias() = W * C;

  Batch out(B, spec_.out, Lout);
  std::span<const double> bias;
  if (bias_) bias = store.values(*bias_);
  for (std::size_t o = 0; o < spec_.out; ++o) {
    const double bo = bias_ ? bias[o] : 0.0;
    for (std::size_t b = 0; b < B; ++b) {
      double* dst = &out.at(b, o, 0);
      const double* src = Y.data() + o * cols + b * Lout;
      for (std::size_t s = 0; s < Lout; ++s) dst[s] = src[s] + bo;
    }
  }
  tape_ = std::move(tape);
  return out;
}

Batch Conv1D::backward(const Batch& g, ParamStore& store) {
  require_tape(tape_.has_value());
  Tape tape = std::move(*tape_);
  tape_.reset();
  const std::size_t B = tape.samples;
  const std::size_t L = tape.length;
  const std::size_t Lout = tape.out_length;
  const std::size_t k = spec_.kernel;
  const std::size_t d = spec_.dilation;
  const std::size_t pad = left_pad();
  const std::size_t rows = spec_.in * k;
  const std::size_t cols = B * Lout;
  if (g.samples() != B || g.channels() != spec_.out || g.length() != Lout) {
    throw ShapeError("conv1d backward: gradient shape " + g.shape_string() + " mismatch");
  }

  const auto cout = static_cast<Eigen::Index>(spec_.out);
  RowMat G(cout, static_cast<Eigen::Index>(cols));
  for (std::size_t o = 0; o < spec_.out; ++o)
    for (std::size_t b = 0; b < B; ++b)
      std::copy_n(g.data().data() + (b * spec_.out + o) * Lout, Lout, G.data() + o * cols + b * Lout);

  if (bias_) {
    auto db = store.grads(*bias_);
    for (std::size_t o = 0; o < spec_.out; ++o) db[o] += G.row(static_cast<Eigen::Index>(o)).sum();
  }

  ConstRowMap C(tape.columns.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  RowMat dW = G * C.transpose();
  if (spec_.weight_norm) {
    auto v = store.values(weight_);
    auto gain = store.values(*gain_);
    auto dv = store.grads(weight_);
    auto dg = store.grads(*gain_);
    for (std::size_t o = 0; o < spec_.out; ++o) {
      const double n = std::max(filter_norm(v, o, rows), kNormFloor);
      double dot = 0.0;
      for (std::size_t i = 0; i < rows; ++i) dot += v[o * rows + i] * dW(static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(i));
      dg[o] += dot / n;
      const double a = gain[o] / n;
      const double c = gain[o] * dot / (n * n * n);
      for (std::size_t i = 0; i < rows; ++i) {
        dv[o * rows + i] += a * dW(static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(i)) - c * v[o * rows + i];
      }
    }
  } else {
    RowMap dWs(store.grads(weight_).data(), cout, static_cast<Eigen::Index>(rows));
    dWs += dW;
  }

  ConstRowMap W(tape.weights.data(), cout, static_cast<Eigen::Index>(rows));
  RowMat dC = W.transpose() * G;
  Batch dx(B, spec_.in, L);
  for (std::size_t ci = 0; ci < spec_.in; ++ci)
    for (std::size_t j = 0; j < k; ++j) {
      const double* src = dC.data() + (ci * k + j) * cols;
      const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(j * d) - static_cast<std::ptrdiff_t>(pad);
      for (std::size_t b = 0; b < B; ++b) {
        double* dst = dx.data().data() + (b * spec_.in + ci) * L;
        for (std::size_t s = 0; s < Lout; ++s) {
          const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(s) + shift;
          if (pos >= 0 && pos < static_cast<std::ptrdiff_t>(L)) dst[pos] += src[b * Lout + s];
        }
      }
    }
  return dx;
}

std::string Conv1D::describe() const {
  return "Conv1D(" + std::to_string(spec_.in) + "->" + std::to_string(spec_.out) +
         ", k=" + std::to_string(spec_.kernel) + ", d=" + std::to_string(spec_.dilation) +
         (spec_.weight_norm ? ", wn" : "") + ")";
}

}  // namespace romf::nn
