#include <charconv>
#include <cmath>
#include <sstream>

#include "romf/error.hpp"
#include "romf/evalmetrics.hpp"

namespace romf::metrics {

namespace {
void require_same(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size()) {
    throw ShapeError(std::string(what) + ": lengths differ (" + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()) + ")");
  }
  if (a.empty()) throw ShapeError(std::string(what) + ": empty input");
}
}  // namespace

double mse(std::span<const double> truth, std::span<const double> pred) {
  require_same(truth, pred, "mse");
  double s = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) s += (truth[i] - pred[i]) * (truth[i] - pred[i]);
  return s / static_cast<double>(truth.size());
}

double mae(std::span<const double> truth, std::span<const double> pred) {
  require_same(truth, pred, "mae");
  double s = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) s += std::abs(truth[i] - pred[i]);
  return s / static_cast<double>(truth.size());
}

double relative_l2(std::span<const double> truth, std::span<const double> pred) {
  require_same(truth, pred, "relative_l2");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    num += (truth[i] - pred[i]) * (truth[i] - pred[i]);
    den += truth[i] * truth[i];
  }
  if (den == 0.0) throw NumericError("relative_l2: truth has zero norm, metric undefined");
  return std::sqrt(num / den);
}

std::vector<double> error_curve(const nn::Tensor2& truth, const nn::Tensor2& pred) {
  if (truth.rows() != pred.rows() || truth.cols() != pred.cols()) {
    throw ShapeError("error_curve: truth " + std::to_string(truth.rows()) + "x" +
                     std::to_string(truth.cols()) + " vs prediction " + std::to_string(pred.rows()) +
                     "x" + std::to_string(pred.cols()));
  }
  std::vector<double> out(truth.cols());
  for (std::size_t c = 0; c < truth.cols(); ++c) out[c] = relative_l2(truth.column(c), pred.column(c));
  return out;
}

MetricReport evaluate(const nn::Tensor2& truth, const nn::Tensor2& pred) {
  if (truth.rows() != pred.rows() || truth.cols() != pred.cols()) {
    throw ShapeError("evaluate: truth " + std::to_string(truth.rows()) + "x" +
                     std::to_string(truth.cols()) + " vs prediction " + std::to_string(pred.rows()) +
                     "x" + std::to_string(pred.cols()));
  }
  MetricReport r;
  for (std::size_t c = 0; c < truth.cols(); ++c) {
    const auto t = truth.column(c);
    const auto p = pred.column(c);
    r.mse.push_back(mse(t, p));
    r.mae.push_back(mae(t, p));
    r.relative_l2.push_back(relative_l2(t, p));
  }
  r.mse_total = mse(truth.data(), pred.data());
  r.mae_total = mae(truth.data(), pred.data());
  r.relative_l2_total = relative_l2(truth.data(), pred.data());
  return r;
}

nlohmann::json to_json(const MetricReport& r) {
  auto last = [](const std::vector<double>& v) { return v.empty() ? 0.0 : v.back(); };
  auto peak = [](const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, x);
    return m;
  };
  return {{"mse", r.mse_total},
          {"mae", r.mae_total},
          {"relative_l2", r.relative_l2_total},
          {"final_relative_l2", last(r.relative_l2)},
          {"max_relative_l2", peak(r.relative_l2)},
          {"steps", r.relative_l2.size()}};
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string matrix_to_csv(const nn::Tensor2& m, const std::vector<std::string>& header) {
  std::string out;
  if (!header.empty()) {
    if (header.size() != m.cols()) throw ShapeError("csv header width differs from matrix");
    for (std::size_t c = 0; c < header.size(); ++c) out += (c ? "," : "") + header[c];
    out += '\n';
  }
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c) out += ',';
      out += format_double(m(r, c));
    }
    out += '\n';
  }
  return out;
}

nn::Tensor2 matrix_from_csv(const std::string& text, bool has_header) {
  std::istringstream in(text);
  std::string line;
  if (has_header) std::getline(in, line);
  std::vector<double> values;
  std::size_t cols = 0, rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::size_t n = 0, pos = 0;
    while (pos <= line.size()) {
      const std::size_t end = std::min(line.find(',', pos), line.size());
      double v = 0.0;
      const auto res = std::from_chars(line.data() + pos, line.data() + end, v);
      if (res.ec != std::errc() || res.ptr != line.data() + end) {
        throw IoError("csv: bad number '" + line.substr(pos, end - pos) + "' on data row " +
                      std::to_string(rows + 1));
      }
      values.push_back(v);
      ++n;
      pos = end + 1;
    }
    if (rows == 0) cols = n;
    if (n != cols) throw ShapeError("csv: ragged row " + std::to_string(rows + 1));
    ++rows;
  }
  return nn::Tensor2(rows, cols, std::move(values));
}

std::string columns_to_csv(const std::vector<std::string>& names,
                           const std::vector<std::vector<double>>& columns) {
  if (names.size() != columns.size()) throw ShapeError("csv: one name per column required");
  const std::size_t rows = columns.empty() ? 0 : columns.front().size();
  for (const auto& c : columns)
    if (c.size() != rows) throw ShapeError("csv: columns differ in length");
  nn::Tensor2 m(rows, columns.size());
  for (std::size_t c = 0; c < columns.size(); ++c) m.set_column(c, columns[c]);
  return matrix_to_csv(m, names);
}

}  // namespace romf::metrics
