#include "moco5d/navigator.hpp"

#include "moco5d/log.hpp"

#include <Eigen/QR>
#include <cmath>
#include <numbers>

namespace moco5d {

namespace {
/// Odd reflection about the end samples, repeated for indices far outside.
double odd_extension(std::span<double const> x, Index i)
{
  auto const n = static_cast<Index>(x.size());
  if (i < 0) { return 2.0 * x[0] - odd_extension(x, -i); }
  if (i >= n) { return 2.0 * x[n - 1] - odd_extension(x, 2 * (n - 1) - i); }
  return x[i];
}
} // namespace

std::vector<double> lowpass_taps(double cutoff_hz, double fs, double transition_hz)
{
  if (!(cutoff_hz > 0) || !(fs > 0) || !(transition_hz > 0)) { throw DomainError("low-pass: frequencies must be positive"); }
  auto half = static_cast<Index>(std::ceil(3.3 * fs / transition_hz / 2.0));
  Index const n = 2 * half + 1;
  double const fc = cutoff_hz / fs;
  std::vector<double> h(n);
  double sum = 0.0;
  for (Index i = 0; i < n; i++) {
    double const m = static_cast<double>(i - half);
    double const sinc = m == 0 ? 2.0 * fc : std::sin(2.0 * std::numbers::pi * fc * m) / (std::numbers::pi * m);
    double const window = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1));
    h[i] = sinc * window;
    sum += h[i];
  }
  for (auto &v : h) { v /= sum; }
  return h;
}

std::vector<double> zero_phase_filter(std::span<double const> x, std::span<double const> taps)
{
  auto const n = static_cast<Index>(x.size());
  auto const half = static_cast<Index>(taps.size() / 2);
  if (taps.size() % 2 == 0) { throw DomainError("zero-phase filter needs an odd number of taps"); }
  if (n < 2) { throw DomainError("zero-phase filter needs at least two samples"); }
  auto sample = [&](Index i) { return odd_extension(x, i); };
  std::vector<double> y(n);
  for (Index i = 0; i < n; i++) {
    double acc = 0.0;
    for (Index k = -half; k <= half; k++) { acc += taps[k + half] * sample(i - k); }
    y[i] = acc;
  }
  return y;
}

std::vector<double> chebyshev_detrend(std::span<double const> x, int degree)
{
  auto const n = static_cast<Index>(x.size());
  if (degree < 0) { throw DomainError("detrend degree must be nonnegative"); }
  if (n <= degree) { throw DomainError("detrend: record shorter than the polynomial degree"); }
  Eigen::MatrixXd basis(n, degree + 1);
  for (Index i = 0; i < n; i++) {
    double const t = n == 1 ? 0.0 : -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n - 1);
    basis(i, 0) = 1.0;
    if (degree >= 1) { basis(i, 1) = t; }
    for (int k = 2; k <= degree; k++) { basis(i, k) = 2.0 * t * basis(i, k - 1) - basis(i, k - 2); }
  }
  Eigen::Map<Eigen::VectorXd const> v(x.data(), n);
  Eigen::VectorXd const coef = basis.colPivHouseholderQr().solve(v);
  Eigen::VectorXd const r = v - basis * coef;
  return {r.data(), r.data() + n};
}

std::vector<double> preprocess_row(std::span<double const> x, PreprocessOptions const &opt)
{
  auto const detrended = chebyshev_detrend(x, opt.poly_degree);
  if (opt.lowpass_hz >= opt.frame_rate_hz / 2.0) { return detrended; }
  auto const taps = lowpass_taps(opt.lowpass_hz, opt.frame_rate_hz, opt.transition_hz);
  return zero_phase_filter(detrended, taps);
}

PreprocessedNavigators preprocess_navigators(NavigatorMatrix const &nav, PreprocessOptions const &opt)
{
  if (nav.cols < 64) { throw DomainError(fmt::format("navigator preprocessing needs at least 64 frames, got {}", nav.cols)); }
  PreprocessedNavigators out;
  std::vector<std::vector<double>> rows;
  for (Index r = 0; r < nav.rows; r++) {
    std::span<double const> raw(nav.y.data() + r * nav.cols, static_cast<size_t>(nav.cols));
    double raw_scale = 0.0;
    for (double v : raw) { raw_scale = std::max(raw_scale, std::abs(v)); }
    auto row = preprocess_row(raw, opt);
    double mean = 0.0;
    for (double v : row) { mean += v; }
    mean /= static_cast<double>(row.size());
    double var = 0.0;
    for (double v : row) { var += (v - mean) * (v - mean); }
    double const sd = std::sqrt(var / static_cast<double>(row.size()));
    if (!(sd > 1e-9 * std::max(raw_scale, 1e-300))) {
      out.dropped_rows.push_back(r);
      continue;
    }
    for (auto &v : row) { v = (v - mean) / sd; }
    rows.push_back(std::move(row));
    out.kept_rows.push_back(r);
  }
  if (!out.dropped_rows.empty()) {
    log_warn("navigator preprocessing dropped {} zero-variance row(s)", out.dropped_rows.size());
  }
  if (rows.empty()) { throw DomainError("navigator preprocessing: every row has zero variance"); }
  out.y.resize(static_cast<Index>(rows.size()), nav.cols);
  for (Index r = 0; r < out.y.rows(); r++) {
    for (Index t = 0; t < nav.cols; t++) { out.y(r, t) = rows[r][t]; }
  }
  return out;
}

} // namespace moco5d
