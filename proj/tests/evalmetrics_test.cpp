#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "romf/error.hpp"
#include "romf/evalmetrics.hpp"
#include "romf/io.hpp"

using namespace romf;
using namespace romf::metrics;

namespace {

std::size_t count(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
  return n;
}

}  // namespace

TEST(Metrics, HandValues) {
  const std::vector<double> t{3, 4}, p{3, 0}, z{0, 0};
  EXPECT_DOUBLE_EQ(relative_l2(t, p), 0.8);
  EXPECT_DOUBLE_EQ(relative_l2(t, z), 1.0);
  EXPECT_EQ(relative_l2(t, t), 0.0);
  EXPECT_DOUBLE_EQ(mae(std::vector<double>{1, 3}, z), 2.0);
  EXPECT_DOUBLE_EQ(mse(std::vector<double>{1, 3}, z), 5.0);
  EXPECT_THROW(relative_l2(z, t), NumericError);
  EXPECT_THROW(mae(t, std::vector<double>{1}), ShapeError);
}

TEST(Metrics, RandomPairProperties) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n;
  for (int i = 0; i < 100; ++i) {
    std::vector<double> a(17), b(17), ca(17), cb(17);
    for (std::size_t k = 0; k < 17; ++k) a[k] = n(rng), b[k] = n(rng), ca[k] = -2.5 * a[k], cb[k] = -2.5 * b[k];
    EXPECT_LE(mae(a, b), std::sqrt(mse(a, b)) + 1e-15);
    EXPECT_DOUBLE_EQ(mse(a, b), mse(b, a));
    EXPECT_DOUBLE_EQ(mae(a, b), mae(b, a));
    EXPECT_NEAR(relative_l2(a, b), relative_l2(ca, cb), 1e-13);
  }
}

TEST(Metrics, ErrorCurveAndReport) {
  nn::Tensor2 t(2, 3, 1.0), p(2, 3, 1.0);
  p(0, 2) = 0.0;
  const auto curve = error_curve(t, p);
  ASSERT_EQ(curve.size(), 3u);
  EXPECT_EQ(curve[0], 0.0);
  EXPECT_DOUBLE_EQ(curve[2], std::sqrt(0.5));
  const auto r = evaluate(t, t);
  EXPECT_EQ(r.mse_total, 0.0);
  EXPECT_EQ(r.relative_l2_total, 0.0);
  const auto j = to_json(evaluate(t, p));
  EXPECT_DOUBLE_EQ(j.at("final_relative_l2").get<double>(), std::sqrt(0.5));
  EXPECT_THROW(error_curve(t, nn::Tensor2(2, 2)), ShapeError);
}

TEST(Csv, RoundTripIsLossless) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  nn::Tensor2 m(5, 4);
  for (double& v : m.data()) v = u(rng) / 7.0;
  m(0, 0) = 1e-300;
  m(1, 1) = 0.1;
  const auto back = matrix_from_csv(matrix_to_csv(m, {"a", "b", "c", "d"}), true);
  EXPECT_TRUE(std::ranges::equal(back.data(), m.data()));
  EXPECT_EQ(format_double(0.1), "0.1");
}

TEST(Svg, CellCountAndDeterminism) {
  nn::Tensor2 m(2, 2);
  m(0, 0) = 0;
  m(0, 1) = 1;
  m(1, 0) = 2;
  m(1, 1) = 3;
  const auto svg = heatmap_svg(m, "t");
  EXPECT_EQ(count(svg, "class=\"cell\""), 4u);
  EXPECT_EQ(svg, heatmap_svg(m, "t"));
  EXPECT_EQ(colormap_hex(0), "#0000ff");
  EXPECT_EQ(colormap_hex(255), "#ff0000");
  nn::Tensor2 bad(1, 1, NAN);
  EXPECT_THROW(heatmap_svg(bad, "t"), NumericError);
}

TEST(Svg, LinePlotHasLegendAndBand) {
  LineSeries a{"truth", {0, 1, 2}, {0, 1, 0}, {}};
  LineSeries b{"mean <x>", {0, 1, 2}, {0, 0.5, 0}, {0.1, 0.1, 0.1}};
  const auto svg = lineplot_svg({a, b}, "snap", "x", "u");
  EXPECT_EQ(count(svg, "<polyline"), 2u);
  EXPECT_EQ(count(svg, "fill-opacity"), 1u);
  EXPECT_NE(svg.find("mean &lt;x&gt;"), std::string::npos);
}

TEST(Export, WritesCsvAndSvgIdentically) {
  const auto dir = std::filesystem::temp_directory_path() / "romf_metrics_test";
  std::filesystem::remove_all(dir);
  nn::Tensor2 m(3, 4, 0.5);
  m(2, 3) = 1.0;
  export_heatmap(dir / "h", m, "heat");
  const auto first = io::read_file(dir / "h.svg");
  export_heatmap(dir / "h", m, "heat");
  EXPECT_EQ(io::read_file(dir / "h.svg"), first);
  EXPECT_TRUE(std::filesystem::exists(dir / "h.csv"));
  export_lineplot(dir / "l", {{"s", {0, 1}, {2, 3}, {}}}, "line", "x", "y");
  EXPECT_TRUE(std::filesystem::exists(dir / "l.svg"));
  EXPECT_EQ(io::read_file(dir / "l.csv"), "s_x,s_y\n0,2\n1,3\n");
  std::filesystem::remove_all(dir);
}
