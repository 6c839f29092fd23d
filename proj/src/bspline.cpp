#include "moco5d/bspline.hpp"

#include <fmt/format.h>

namespace moco5d {

std::array<double, 4> bspline_weights(double fraction)
{
  if (!(fraction >= 0.0 && fraction < 1.0)) {
    throw DomainError(fmt::format("B-spline fraction {} outside [0, 1)", fraction));
  }
  std::array<double, 4> w;
  bspline_weights_unchecked(fraction, w.data());
  return w;
}

std::array<double, 4> bspline_derivative_weights(double fraction)
{
  if (!(fraction >= 0.0 && fraction < 1.0)) {
    throw DomainError(fmt::format("B-spline fraction {} outside [0, 1)", fraction));
  }
  std::array<double, 4> d;
  bspline_derivative_weights_unchecked(fraction, d.data());
  return d;
}

namespace {
std::vector<double> thomas_factors(Index n)
{
  // Diagonal 4/6, off-diagonals 1/6; store modified super-diagonal and pivots.
  std::vector<double> cp(2 * n);
  double const a = 1.0 / 6.0, b = 4.0 / 6.0;
  double denom = b;
  cp[0] = a / denom;
  cp[n] = denom;
  for (Index i = 1; i < n; i++) {
    denom = b - a * cp[i - 1];
    cp[i] = a / denom;
    cp[n + i] = denom;
  }
  return cp;
}
} // namespace

BSplinePrefilter::BSplinePrefilter(Dims dims)
  : dims_{dims}
{
  for (int a = 0; a < 3; a++) { cprime_[a] = thomas_factors(dims[a]); }
}

void BSplinePrefilter::solve_line(Cx *p, Index n, Index stride, std::vector<double> const &cp) const
{
  double const a = 1.0 / 6.0;
  p[0] /= cp[n];
  for (Index i = 1; i < n; i++) { p[i * stride] = (p[i * stride] - a * p[(i - 1) * stride]) / cp[n + i]; }
  for (Index i = n - 2; i >= 0; i--) { p[i * stride] -= cp[i] * p[(i + 1) * stride]; }
}

void BSplinePrefilter::apply(std::span<Cx> data) const
{
  require_shape(static_cast<Index>(data.size()) == dims_.size(), "prefilter size mismatch");
  Index const nx = dims_.nx, ny = dims_.ny, nz = dims_.nz;
  Cx *d = data.data();
  for (Index x = 0; x < nx; x++) {
    for (Index y = 0; y < ny; y++) { solve_line(d + dims_.index(x, y, 0), nz, 1, cprime_[2]); }
  }
  for (Index x = 0; x < nx; x++) {
    for (Index z = 0; z < nz; z++) { solve_line(d + dims_.index(x, 0, z), ny, nz, cprime_[1]); }
  }
  for (Index y = 0; y < ny; y++) {
    for (Index z = 0; z < nz; z++) { solve_line(d + dims_.index(0, y, z), nx, ny * nz, cprime_[0]); }
  }
}

} // namespace moco5d
