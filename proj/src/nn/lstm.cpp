#include <cmath>

#include <Eigen/Core>

#include "romf/error.hpp"
#include "romf/nn/layers.hpp"

namespace romf::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMap = Eigen::Map<RowMat>;
using ConstRowMap = Eigen::Map<const RowMat>;

}  // namespace

LstmCellState lstm_cell_step(std::span<const double> x, std::span<const double> h_prev,
                             std::span<const double> c_prev, const LstmCellParams& p) {
  const std::size_t n = p.input;
  const std::size_t h = p.hidden;
  if (x.size() != n || h_prev.size() != h || c_prev.size() != h) {
    throw ShapeError("lstm_cell_step: width mismatch");
  }
  if (p.w_in.size() != 4 * h * n || p.w_rec.size() != 4 * h * h || p.bias.size() != 4 * h) {
    throw ShapeError("lstm_cell_step: parameter size mismatch");
  }
  std::vector<double> a(4 * h);
  for (std::size_t r = 0; r < 4 * h; ++r) {
    double s = p.bias[r];
    for (std::size_t i = 0; i < n; ++i) s += p.w_in[r * n + i] * x[i];
    for (std::size_t i = 0; i < h; ++i) s += p.w_rec[r * h + i] * h_prev[i];
    a[r] = s;
  }
  LstmCellState out{std::vector<double>(h), std::vector<double>(h)};
  for (std::size_t j = 0; j < h; ++j) {
    const double in_gate = sigmoid(a[j]);
    const double forget_gate = sigmoid(a[h + j]);
    const double candidate = std::tanh(a[2 * h + j]);
    const double out_gate = sigmoid(a[3 * h + j]);
    out.c[j] = forget_gate * c_prev[j] + in_gate * candidate;
    out.h[j] = out_gate * std::tanh(out.c[j]);
  }
  return out;
}

Lstm::Lstm(const LayerSpec& spec) : spec_(spec) { spec_.validate(); }

void Lstm::bind(ParamStore& store, Rng& rng, std::size_t index) {
  index_ = index;
  const std::size_t h = spec_.out;
  const std::string p = "layer" + std::to_string(index) + ".lstm.";
  w_in_ = store.add_block(p + "w_in", index, 4 * h * spec_.in);
  w_rec_ = store.add_block(p + "w_rec", index, 4 * h * h);
  bias_ = store.add_block(p + "bias", index, 4 * h);
  const double limit = 1.0 / std::sqrt(static_cast<double>(h));
  for (std::size_t blk : {w_in_, w_rec_, bias_})
    for (double& v : store.values(blk)) v = uniform(rng, -limit, limit);
}

Batch Lstm::forward(const Batch& x, ParamStore& store, Mode) {
  if (x.channels() != spec_.in) {
    throw ShapeError("lstm: input has " + std::to_string(x.channels()) + " features, expected " +
                     std::to_string(spec_.in));
  }
  const std::size_t B = x.samples();
  const std::size_t T = x.length();
  const std::size_t n = spec_.in;
  const std::size_t h = spec_.out;
  const auto eB = static_cast<Eigen::Index>(B);
  const auto eh = static_cast<Eigen::Index>(h);
  const auto en = static_cast<Eigen::Index>(n);

  ConstRowMap Win(store.values(w_in_).data(), 4 * eh, en);
  ConstRowMap Wrec(store.values(w_rec_).data(), 4 * eh, eh);
  Eigen::Map<const Eigen::RowVectorXd> bias(store.values(bias_).data(), 4 * eh);

  Tape tape;
  tape.samples = B;
  tape.steps = T;
  tape.hiddens.push_back(std::vector<double>(B * h, 0.0));
  tape.cells.push_back(std::vector<double>(B * h, 0.0));

  Batch out(B, h, T);
  RowMat A(eB, 4 * eh);
  for (std::size_t t = 0; t < T; ++t) {
    std::vector<double> xt(B * n);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t i = 0; i < n; ++i) xt[b * n + i] = x.at(b, i, t);
    ConstRowMap Xt(xt.data(), eB, en);
    ConstRowMap Hp(tape.hiddens.back().data(), eB, eh);
    A.noalias() = Xt * Win.transpose();
    A.noalias() += Hp * Wrec.transpose();
    A.rowwise() += bias;

    std::vector<double> gates(B * 4 * h);
    std::vector<double> c(B * h);
    std::vector<double> hs(B * h);
    const auto& cp = tape.cells.back();
    for (std::size_t b = 0; b < B; ++b) {
      const double* a = A.data() + b * 4 * h;
      double* gt = gates.data() + b * 4 * h;
      for (std::size_t j = 0; j < h; ++j) {
        gt[j] = sigmoid(a[j]);
        gt[h + j] = sigmoid(a[h + j]);
        gt[2 * h + j] = std::tanh(a[2 * h + j]);
        gt[3 * h + j] = sigmoid(a[3 * h + j]);
        c[b * h + j] = gt[h + j] * cp[b * h + j] + gt[j] * gt[2 * h + j];
        hs[b * h + j] = gt[3 * h + j] * std::tanh(c[b * h + j]);
        out.at(b, j, t) = hs[b * h + j];
      }
    }
    tape.inputs.push_back(std::move(xt));
    tape.gates.push_back(std::move(gates));
    tape.cells.push_back(std::move(c));
    tape.hiddens.push_back(std::move(hs));
  }
  tape_ = std::move(tape);
  return out;
}

Batch Lstm::backward(const Batch& g, ParamStore& store) {
  require_tape(tape_.has_value());
  Tape tape = std::move(*tape_);
  tape_.reset();
  const std::size_t B = tape.samples;
  const std::size_t T = tape.steps;
  const std::size_t n = spec_.in;
  const std::size_t h = spec_.out;
  if (g.samples() != B || g.channels() != h || g.length() != T) {
    throw ShapeError("lstm backward: gradient shape " + g.shape_string() + " mismatch");
  }
  const auto eB = static_cast<Eigen::Index>(B);
  const auto eh = static_cast<Eigen::Index>(h);
  const auto en = static_cast<Eigen::Index>(n);

  ConstRowMap Win(store.values(w_in_).data(), 4 * eh, en);
  ConstRowMap Wrec(store.values(w_rec_).data(), 4 * eh, eh);
  RowMap dWin(store.grads(w_in_).data(), 4 * eh, en);
  RowMap dWrec(store.grads(w_rec_).data(), 4 * eh, eh);
  Eigen::Map<Eigen::RowVectorXd> dbias(store.grads(bias_).data(), 4 * eh);

  Batch dx(B, n, T);
  RowMat dh_next = RowMat::Zero(eB, eh);
  std::vector<double> dc_next(B * h, 0.0);
  RowMat dA(eB, 4 * eh);
  for (std::size_t t = T; t-- > 0;) {
    const auto& gates = tape.gates[t];
    const auto& c = tape.cells[t + 1];
    const auto& cp = tape.cells[t];
    for (std::size_t b = 0; b < B; ++b) {
      const double* gt = gates.data() + b * 4 * h;
      double* da = dA.data() + b * 4 * h;
      for (std::size_t j = 0; j < h; ++j) {
        const double dh = g.at(b, j, t) + dh_next(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(j));
        const double tc = std::tanh(c[b * h + j]);
        const double i_g = gt[j], f_g = gt[h + j], c_g = gt[2 * h + j], o_g = gt[3 * h + j];
        const double dc = dh * o_g * (1.0 - tc * tc) + dc_next[b * h + j];
        da[j] = dc * c_g * i_g * (1.0 - i_g);
        da[h + j] = dc * cp[b * h + j] * f_g * (1.0 - f_g);
        da[2 * h + j] = dc * i_g * (1.0 - c_g * c_g);
        da[3 * h + j] = dh * tc * o_g * (1.0 - o_g);
        dc_next[b * h + j] = dc * f_g;
      }
    }
    ConstRowMap Xt(tape.inputs[t].data(), eB, en);
    ConstRowMap Hp(tape.hiddens[t].data(), eB, eh);
    dWin.noalias() += dA.transpose() * Xt;
    dWrec.noalias() += dA.transpose() * Hp;
    // Fixed-order column sum; Eigen's vectorized reduction rounds differently with buffer alignment.
    for (Eigen::Index b = 0; b < eB; ++b) dbias += dA.row(b);
    RowMat dXt = dA * Win;
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t i = 0; i < n; ++i) dx.at(b, i, t) = dXt(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(i));
    dh_next.noalias() = dA * Wrec;
  }
  return dx;
}

std::string Lstm::describe() const {
  return "LSTM(" + std::to_string(spec_.in) + "->" + std::to_string(spec_.out) + ")";
}

}  // namespace romf::nn
