#pragma once

#include "common.hpp"

#include <span>
#include <vector>

namespace moco5d {

/// Complex image on a regular grid with isotropic spacing (mm). Houses both the
/// per-frame images and the static template.
class ComplexVolume
{
public:
  ComplexVolume() = default;
  ComplexVolume(Dims dims, double spacing);
  ComplexVolume(Dims dims, double spacing, std::vector<Cx> data);

  Dims dims() const { return dims_; }
  double spacing() const { return spacing_; }
  Index size() const { return dims_.size(); }

  std::span<Cx> data() { return data_; }
  std::span<Cx const> data() const { return data_; }
  std::vector<Cx> const &vector() const { return data_; }

  Cx &operator()(Index x, Index y, Index z) { return data_[dims_.index(x, y, z)]; }
  Cx operator()(Index x, Index y, Index z) const { return data_[dims_.index(x, y, z)]; }
  Cx &operator[](Index i) { return data_[i]; }
  Cx operator[](Index i) const { return data_[i]; }

  bool all_finite() const;
  double norm() const;
  bool same_shape(ComplexVolume const &o) const { return dims_ == o.dims_; }

  ComplexVolume &operator+=(ComplexVolume const &o);
  ComplexVolume &operator-=(ComplexVolume const &o);
  ComplexVolume &operator*=(Cx s);

private:
  Dims dims_{};
  double spacing_ = 1.0;
  std::vector<Cx> data_;
};

ComplexVolume operator+(ComplexVolume a, ComplexVolume const &b);
ComplexVolume operator-(ComplexVolume a, ComplexVolume const &b);
ComplexVolume operator*(Cx s, ComplexVolume a);

/// Real inner product Re<a, b> = sum Re(conj(a) b), the pairing used for all
/// gradients of real losses with respect to complex parameters.
double real_dot(std::span<Cx const> a, std::span<Cx const> b);
Cx dot(std::span<Cx const> a, std::span<Cx const> b);
double norm2(std::span<Cx const> a);

/// Dense 3-component displacement (voxels) sampled at every voxel center.
struct DenseField
{
  Dims dims{};
  std::array<std::vector<double>, 3> u;

  DenseField() = default;
  explicit DenseField(Dims d);
  double max_abs() const;
};

/// Voxel position relative to the grid center, i - n/2, in voxels.
inline double centered(Index i, Index n) { return static_cast<double>(i - n / 2); }

} // namespace moco5d
