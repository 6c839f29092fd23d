#pragma once

#include "common.hpp"

#include <span>
#include <vector>

namespace moco5d {

/// Uniform cubic B-spline basis evaluated at the four knots around a sample with
/// fractional offset `fraction` from its floor knot. Weight k multiplies the
/// coefficient at floor - 1 + k. Throws DomainError unless 0 <= fraction < 1.
std::array<double, 4> bspline_weights(double fraction);

/// d/d(fraction) of bspline_weights.
std::array<double, 4> bspline_derivative_weights(double fraction);

/// Unchecked versions for inner loops.
inline void bspline_weights_unchecked(double f, double *w)
{
  double const f2 = f * f, f3 = f2 * f, g = 1.0 - f;
  w[0] = g * g * g / 6.0;
  w[1] = (3.0 * f3 - 6.0 * f2 + 4.0) / 6.0;
  w[2] = (-3.0 * f3 + 3.0 * f2 + 3.0 * f + 1.0) / 6.0;
  w[3] = f3 / 6.0;
}

inline void bspline_derivative_weights_unchecked(double f, double *d)
{
  double const f2 = f * f, g = 1.0 - f;
  d[0] = -0.5 * g * g;
  d[1] = 1.5 * f2 - 2.0 * f;
  d[2] = -1.5 * f2 + f + 0.5;
  d[3] = 0.5 * f2;
}

/// Converts samples to cubic B-spline coefficients so that the interpolant
/// reproduces the samples exactly at voxel centers. Coefficients outside the grid
/// are taken as zero, so along each axis this solves the symmetric tridiagonal
/// system (c[i-1] + 4 c[i] + c[i+1]) / 6 = v[i]. The operator is symmetric, hence
/// it is also its own adjoint.
class BSplinePrefilter
{
public:
  explicit BSplinePrefilter(Dims dims);
  void apply(std::span<Cx> data) const;

private:
  void solve_line(Cx *p, Index n, Index stride, std::vector<double> const &cp) const;
  Dims dims_;
  std::array<std::vector<double>, 3> cprime_; // Thomas forward-sweep factors per axis
};

} // namespace moco5d
