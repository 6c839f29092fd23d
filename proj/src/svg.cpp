#include "moco5d/svg.hpp"

#include "moco5d/io.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

namespace moco5d::svg {

namespace {

constexpr double W = 720, H = 360, L = 60, R = 20, T = 40, B = 50;
constexpr char const *palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string escape(std::string const &s)
{
  std::string out;
  for (char c : s) {
    switch (c) {
    case '<': out += "&lt;"; break;
    case '>': out += "&gt;"; break;
    case '&': out += "&amp;"; break;
    default: out += c;
    }
  }
  return out;
}

std::string header(std::string const &title)
{
  return fmt::format("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" font-family=\"sans-serif\" "
                     "font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
                     "<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
    W, H, W / 2, escape(title));
}

std::string axes(double xmin, double xmax, double ymin, double ymax, std::string const &xlabel)
{
  std::string s = fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n", L, T,
    W - L - R, H - T - B);
  s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", (L + W - R) / 2, H - 12, escape(xlabel));
  s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"start\">{:.3g}</text>\n", L, H - B + 15, xmin);
  s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{:.3g}</text>\n", W - R, H - B + 15, xmax);
  s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{:.3g}</text>\n", L - 4, T + 10, ymax);
  s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{:.3g}</text>\n", L - 4, H - B, ymin);
  return s;
}

} // namespace

std::string line_plot(std::vector<Series> const &series, double x0, double dx, std::string const &title, std::string const &xlabel)
{
  double lo = INFINITY, hi = -INFINITY;
  size_t n = 0;
  for (auto const &s : series) {
    for (double v : s.y) {
      if (!std::isfinite(v)) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    n = std::max(n, s.y.size());
  }
  if (!(hi > lo)) {
    lo = std::isfinite(lo) ? lo - 1 : 0;
    hi = lo + 2;
  }
  double const x1 = x0 + dx * static_cast<double>(std::max<size_t>(n, 2) - 1);
  std::string out = header(title) + axes(x0, x1, lo, hi, xlabel);
  auto px = [&](size_t i) { return L + (W - L - R) * static_cast<double>(i) / static_cast<double>(std::max<size_t>(n, 2) - 1); };
  auto py = [&](double v) { return H - B - (H - T - B) * (v - lo) / (hi - lo); };
  for (size_t k = 0; k < series.size(); k++) {
    std::string pts;
    for (size_t i = 0; i < series[k].y.size(); i++) {
      if (std::isfinite(series[k].y[i])) pts += fmt::format("{:.1f},{:.1f} ", px(i), py(series[k].y[i]));
    }
    char const *color = palette[k % std::size(palette)];
    out += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1\" points=\"{}\"/>\n", color, pts);
    out += fmt::format("<text x=\"{}\" y=\"{}\" fill=\"{}\">{}</text>\n", L + 8 + 110 * static_cast<double>(k), T + 14, color,
      escape(series[k].label));
  }
  return out + "</svg>\n";
}

std::string bar_chart(std::vector<double> const &values, std::vector<std::string> const &labels, std::string const &title)
{
  double hi = 0;
  for (double v : values) hi = std::max(hi, v);
  if (!(hi > 0)) hi = 1;
  std::string out = header(title) + axes(0, static_cast<double>(values.size()), 0, hi, "");
  double const bw = (W - L - R) / static_cast<double>(std::max<size_t>(values.size(), 1));
  for (size_t i = 0; i < values.size(); i++) {
    double const h = (H - T - B) * values[i] / hi;
    double const x = L + bw * static_cast<double>(i);
    out += fmt::format("<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"{:.1f}\" height=\"{:.1f}\" fill=\"{}\"/>\n", x + 0.1 * bw, H - B - h,
      0.8 * bw, h, palette[0]);
    if (i < labels.size()) {
      out += fmt::format("<text x=\"{:.1f}\" y=\"{}\" text-anchor=\"middle\" font-size=\"9\">{}</text>\n", x + 0.5 * bw, H - B + 28,
        escape(labels[i]));
    }
  }
  return out + "</svg>\n";
}

std::string heatmap(Eigen::MatrixXd const &m, std::string const &title, std::string const &xlabel, std::string const &ylabel)
{
  std::string out = header(title) + axes(0, static_cast<double>(m.cols()), 0, static_cast<double>(m.rows()), xlabel);
  out += fmt::format("<text x=\"14\" y=\"{}\" transform=\"rotate(-90 14 {})\" text-anchor=\"middle\">{}</text>\n", (T + H - B) / 2,
    (T + H - B) / 2, escape(ylabel));
  if (m.size() == 0) return out + "</svg>\n";
  double const lo = m.minCoeff(), hi = m.maxCoeff();
  double const span = hi > lo ? hi - lo : 1.0;
  double const cw = (W - L - R) / static_cast<double>(m.cols()), ch = (H - T - B) / static_cast<double>(m.rows());
  for (Index r = 0; r < m.rows(); r++) {
    for (Index c = 0; c < m.cols(); c++) {
      int const g = static_cast<int>(std::lround(255 * (m(r, c) - lo) / span));
      out += fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"rgb({},{},{})\"/>\n",
        L + cw * static_cast<double>(c), T + ch * static_cast<double>(r), cw + 0.05, ch + 0.05, g, g, g);
    }
  }
  return out + "</svg>\n";
}

void write(std::filesystem::path const &path, std::string const &svg) { io::write_text(path, svg); }

} // namespace moco5d::svg
