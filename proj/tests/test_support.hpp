#pragma once

#include "moco5d/deformation.hpp"
#include "moco5d/volume.hpp"

#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace moco5d::testing {

inline ComplexVolume random_volume(Dims d, std::mt19937_64 &rng, double scale = 1.0)
{
  std::normal_distribution<double> n(0.0, scale);
  ComplexVolume v(d, 1.0);
  for (auto &c : v.data()) { c = Cx(n(rng), n(rng)); }
  return v;
}

inline DeformationField random_field(Dims d, Index spacing, std::mt19937_64 &rng, double amp)
{
  std::uniform_real_distribution<double> u(-amp, amp);
  DeformationField f(d, spacing);
  for (int a = 0; a < 3; a++) {
    for (auto &v : f.component(a)) { v = u(rng); }
  }
  return f;
}

inline std::vector<double> random_vector(size_t n, std::mt19937_64 &rng, double scale = 1.0)
{
  std::normal_distribution<double> g(0.0, scale);
  std::vector<double> v(n);
  for (auto &x : v) { x = g(rng); }
  return v;
}

/// Central difference of a scalar function along a parameter-space direction.
inline double central_difference(std::function<double(double)> const &f, double h)
{
  return (f(h) - f(-h)) / (2.0 * h);
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

} // namespace moco5d::testing
