#include <algorithm>
#include <charconv>
#include <cmath>

#include "romf/error.hpp"
#include "romf/evalmetrics.hpp"
#include "romf/io.hpp"

namespace romf::metrics {

namespace {

constexpr double kLeft = 70.0, kTop = 40.0, kWidth = 600.0, kHeight = 400.0, kBottom = 50.0;
constexpr double kRight = 170.0;

// Fixed three-decimal coordinates keep the output byte-stable.
std::string num(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 3);
  return std::string(buf, res.ptr);
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string header(double w, double h) {
  return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
         "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + num(w) +
         "\" height=\"" + num(h) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
}

std::string text(double x, double y, const std::string& s, const char* anchor = "middle",
                 const std::string& extra = "") {
  return "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" text-anchor=\"" + anchor + "\"" + extra +
         ">" + escape(s) + "</text>\n";
}

std::size_t color_index(double v, double lo, double hi) {
  if (!(hi > lo)) return 128;
  const double t = (v - lo) / (hi - lo);
  const auto i = static_cast<long>(std::floor(t * 256.0));
  return static_cast<std::size_t>(std::clamp(i, 0L, 255L));
}

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                "#8c564b", "#e377c2", "#7f7f7f"};

}  // namespace

std::string colormap_hex(std::size_t index) {
  const double t = static_cast<double>(std::min<std::size_t>(index, 255)) / 255.0;
  int r, g, b;
  if (t < 0.5) {
    const int s = static_cast<int>(std::lround(255.0 * t / 0.5));
    r = s;
    g = s;
    b = 255;
  } else {
    const int s = static_cast<int>(std::lround(255.0 * (1.0 - t) / 0.5));
    r = 255;
    g = s;
    b = s;
  }
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}

std::string heatmap_svg(const nn::Tensor2& m, const std::string& title, const std::string& x_label,
                        const std::string& y_label, double lo, double hi) {
  if (m.size() == 0) throw ShapeError("heatmap: empty matrix");
  if (!m.all_finite()) throw NumericError("heatmap: matrix has non-finite entries");
  if (!(hi > lo)) {
    const auto [mn, mx] = std::minmax_element(m.data().begin(), m.data().end());
    lo = *mn;
    hi = *mx;
  }
  const double cw = kWidth / static_cast<double>(m.cols());
  const double ch = kHeight / static_cast<double>(m.rows());
  std::string out = header(kLeft + kWidth + kRight, kTop + kHeight + kBottom);
  out += text(kLeft + kWidth / 2, 24, title);
  // Horizontal runs of the same color collapse into one rectangle; row 0
  // (node 0) is drawn at the bottom.
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double y = kTop + kHeight - ch * static_cast<double>(r + 1);
    std::size_t c = 0;
    while (c < m.cols()) {
      const std::size_t idx = color_index(m(r, c), lo, hi);
      std::size_t end = c + 1;
      while (end < m.cols() && color_index(m(r, end), lo, hi) == idx) ++end;
      out += "<rect class=\"cell\" x=\"" + num(kLeft + cw * static_cast<double>(c)) + "\" y=\"" +
             num(y) + "\" width=\"" + num(cw * static_cast<double>(end - c)) + "\" height=\"" +
             num(ch) + "\" fill=\"" + colormap_hex(idx) + "\"/>\n";
      c = end;
    }
  }
  out += "<rect x=\"" + num(kLeft) + "\" y=\"" + num(kTop) + "\" width=\"" + num(kWidth) +
         "\" height=\"" + num(kHeight) + "\" fill=\"none\" stroke=\"#000\"/>\n";
  out += text(kLeft + kWidth / 2, kTop + kHeight + 35, x_label);
  out += text(20, kTop + kHeight / 2, y_label, "middle",
              " transform=\"rotate(-90 20 " + num(kTop + kHeight / 2) + ")\"");
  out += text(kLeft, kTop + kHeight + 16, "0");
  out += text(kLeft + kWidth, kTop + kHeight + 16, std::to_string(m.cols()));
  out += text(kLeft - 6, kTop + kHeight, "0", "end");
  out += text(kLeft - 6, kTop + 10, std::to_string(m.rows()), "end");
  // Color bar as a gradient with the value range at its ends.
  const double bx = kLeft + kWidth + 30;
  out += "<defs><linearGradient id=\"ramp\" x1=\"0\" y1=\"1\" x2=\"0\" y2=\"0\">"
         "<stop offset=\"0\" stop-color=\"" + colormap_hex(0) + "\"/>"
         "<stop offset=\"0.5\" stop-color=\"" + colormap_hex(128) + "\"/>"
         "<stop offset=\"1\" stop-color=\"" + colormap_hex(255) + "\"/></linearGradient></defs>\n";
  out += "<path d=\"M" + num(bx) + " " + num(kTop) + "h20v" + num(kHeight) + "h-20z\" fill=\"url(#ramp)\" stroke=\"#000\"/>\n";
  out += text(bx + 26, kTop + 10, format_double(hi), "start");
  out += text(bx + 26, kTop + kHeight, format_double(lo), "start");
  out += "</svg>\n";
  return out;
}

std::string lineplot_svg(const std::vector<LineSeries>& series, const std::string& title,
                         const std::string& x_label, const std::string& y_label) {
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) throw ShapeError("lineplot: x and y differ in length");
    if (!s.band.empty() && s.band.size() != s.y.size()) throw ShapeError("lineplot: band length");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const double b = s.band.empty() ? 0.0 : s.band[i];
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i]) || !std::isfinite(b)) {
        throw NumericError("lineplot: non-finite data in series '" + s.label + "'");
      }
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i] - b);
      y1 = std::max(y1, s.y[i] + b);
    }
  }
  if (!(x1 >= x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  auto px = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * kWidth; };
  auto py = [&](double y) { return kTop + kHeight - (y - y0) / (y1 - y0) * kHeight; };

  std::string out = header(kLeft + kWidth + kRight, kTop + kHeight + kBottom);
  out += text(kLeft + kWidth / 2, 24, title);
  out += "<path d=\"M" + num(kLeft) + " " + num(kTop) + "h" + num(kWidth) + "v" + num(kHeight) +
         "h-" + num(kWidth) + "z\" fill=\"none\" stroke=\"#000\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double fx = x0 + (x1 - x0) * i / 4.0, fy = y0 + (y1 - y0) * i / 4.0;
    out += "<path d=\"M" + num(px(fx)) + " " + num(kTop + kHeight) + "v5\" stroke=\"#000\"/>\n";
    out += text(px(fx), kTop + kHeight + 18, format_double(std::round(fx * 1e4) / 1e4));
    out += "<path d=\"M" + num(kLeft - 5) + " " + num(py(fy)) + "h5\" stroke=\"#000\"/>\n";
    out += text(kLeft - 8, py(fy) + 4, format_double(std::round(fy * 1e4) / 1e4), "end");
  }
  out += text(kLeft + kWidth / 2, kTop + kHeight + 40, x_label);
  out += text(16, kTop + kHeight / 2, y_label, "middle",
              " transform=\"rotate(-90 16 " + num(kTop + kHeight / 2) + ")\"");
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    if (!s.band.empty() && !s.x.empty()) {
      std::string d = "M";
      for (std::size_t i = 0; i < s.x.size(); ++i)
        d += (i ? " L" : "") + num(px(s.x[i])) + " " + num(py(s.y[i] + s.band[i]));
      for (std::size_t i = s.x.size(); i-- > 0;)
        d += " L" + num(px(s.x[i])) + " " + num(py(s.y[i] - s.band[i]));
      out += "<path d=\"" + d + "z\" fill=\"" + color + "\" fill-opacity=\"0.25\" stroke=\"none\"/>\n";
    }
    std::string pts;
    for (std::size_t i = 0; i < s.x.size(); ++i) pts += (i ? " " : "") + num(px(s.x[i])) + "," + num(py(s.y[i]));
    out += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.5\"/>\n";
    const double ly = kTop + 14 + 18 * static_cast<double>(k);
    out += "<path d=\"M" + num(kLeft + kWidth + 12) + " " + num(ly - 4) + "h20\" stroke=\"" + color +
           "\" stroke-width=\"2\"/>\n";
    out += text(kLeft + kWidth + 36, ly, s.label, "start");
  }
  out += "</svg>\n";
  return out;
}

void export_heatmap(const std::filesystem::path& stem, const nn::Tensor2& m, const std::string& title) {
  auto svg = stem, csv = stem;
  svg += ".svg";
  csv += ".csv";
  io::write_file_atomic(csv, matrix_to_csv(m));
  io::write_file_atomic(svg, heatmap_svg(m, title));
}

void export_lineplot(const std::filesystem::path& stem, const std::vector<LineSeries>& series,
                     const std::string& title, const std::string& x_label, const std::string& y_label) {
  auto svg = stem, csv = stem;
  svg += ".svg";
  csv += ".csv";
  std::vector<std::string> names;
  std::vector<std::vector<double>> cols;
  for (const auto& s : series) {
    names.push_back(s.label + "_x");
    cols.push_back(s.x);
    names.push_back(s.label + "_y");
    cols.push_back(s.y);
    if (!s.band.empty()) {
      names.push_back(s.label + "_band");
      cols.push_back(s.band);
    }
  }
  const bool aligned = std::all_of(cols.begin(), cols.end(),
                                   [&](const auto& c) { return c.size() == cols.front().size(); });
  if (!aligned) throw ShapeError("lineplot export: series must share a length for CSV output");
  io::write_file_atomic(csv, columns_to_csv(names, cols));
  io::write_file_atomic(svg, lineplot_svg(series, title, x_label, y_label));
}

}  // namespace romf::metrics
