#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "romf/nn/tensor.hpp"

namespace romf::metrics {

double mse(std::span<const double> truth, std::span<const double> pred);
double mae(std::span<const double> truth, std::span<const double> pred);
/// ||truth - pred|| / ||truth||; NumericError when truth has zero norm.
double relative_l2(std::span<const double> truth, std::span<const double> pred);

/// Relative L2 of each column (time step) of `pred` against `truth`.
std::vector<double> error_curve(const nn::Tensor2& truth, const nn::Tensor2& pred);

struct MetricReport {
  std::vector<double> mse;
  std::vector<double> mae;
  std::vector<double> relative_l2;
  double mse_total = 0.0;
  double mae_total = 0.0;
  double relative_l2_total = 0.0;
};

MetricReport evaluate(const nn::Tensor2& truth, const nn::Tensor2& pred);
nlohmann::json to_json(const MetricReport& r);

/// Shortest text that reads back to the same double (17 significant digits
/// at most).
std::string format_double(double v);

/// Header row then one comma-separated row per matrix row.
std::string matrix_to_csv(const nn::Tensor2& m, const std::vector<std::string>& header = {});
nn::Tensor2 matrix_from_csv(const std::string& text, bool has_header);
/// Named columns of equal length, e.g. per-step error curves.
std::string columns_to_csv(const std::vector<std::string>& names,
                           const std::vector<std::vector<double>>& columns);

/// Heat map of an (n_s x steps) matrix: one <rect> per cell, nodes along y
/// and time along x, colored by a 256-step linear blue-white-red ramp over
/// [lo, hi] (the data range unless given).
std::string heatmap_svg(const nn::Tensor2& m, const std::string& title,
                        const std::string& x_label = "time step",
                        const std::string& y_label = "node", double lo = 0.0, double hi = 0.0);

struct LineSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  /// Optional symmetric band half-widths drawn as a shaded area.
  std::vector<double> band;
};

std::string lineplot_svg(const std::vector<LineSeries>& series, const std::string& title,
                         const std::string& x_label, const std::string& y_label);

/// Writes `<stem>.svg` and `<stem>.csv`.
void export_heatmap(const std::filesystem::path& stem, const nn::Tensor2& m, const std::string& title);
void export_lineplot(const std::filesystem::path& stem, const std::vector<LineSeries>& series,
                     const std::string& title, const std::string& x_label, const std::string& y_label);

/// 256-entry colormap lookup: index 0 blue, 128 white, 255 red.
std::string colormap_hex(std::size_t index);

}  // namespace romf::metrics
