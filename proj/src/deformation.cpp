#include "moco5d/deformation.hpp"

#include "moco5d/bspline.hpp"

#include <cmath>
#include <fmt/format.h>

namespace moco5d {

namespace {
// Per-axis support: first control index and 4 weights for each voxel.
struct AxisTable
{
  std::vector<Index> first;
  std::vector<std::array<double, 4>> w;
};

AxisTable axis_table(Index n, Index spacing)
{
  AxisTable t;
  t.first.resize(n);
  t.w.resize(n);
  for (Index i = 0; i < n; i++) {
    Index const q = i / spacing;
    double const f = static_cast<double>(i - q * spacing) / static_cast<double>(spacing);
    t.first[i] = q; // control index of floor knot is q + 1; support starts one below
    bspline_weights_unchecked(f, t.w[i].data());
  }
  return t;
}
} // namespace

Dims DeformationField::control_dims_for(Dims v, Index s)
{
  return Dims{(v.nx - 1) / s + 4, (v.ny - 1) / s + 4, (v.nz - 1) / s + 4};
}

DeformationField::DeformationField(Dims volume_dims, Index control_spacing)
  : volume_dims_{volume_dims}
  , spacing_{control_spacing}
{
  if (control_spacing < 1) { throw DomainError("control spacing must be >= 1"); }
  control_dims_ = control_dims_for(volume_dims, control_spacing);
  for (auto &c : disp_) { c.assign(control_dims_.size(), 0.0); }
}

std::vector<double> DeformationField::flatten() const
{
  std::vector<double> out;
  out.reserve(parameter_count());
  for (auto const &c : disp_) { out.insert(out.end(), c.begin(), c.end()); }
  return out;
}

void DeformationField::assign(std::span<double const> flat)
{
  require_shape(static_cast<Index>(flat.size()) == parameter_count(), "field assign size mismatch");
  Index const n = control_dims_.size();
  for (int d = 0; d < 3; d++) { std::copy(flat.begin() + d * n, flat.begin() + (d + 1) * n, disp_[d].begin()); }
}

bool DeformationField::same_shape(DeformationField const &o) const
{
  return volume_dims_ == o.volume_dims_ && control_dims_ == o.control_dims_ && spacing_ == o.spacing_;
}

bool DeformationField::all_finite() const
{
  for (auto const &c : disp_) {
    for (double v : c) {
      if (!std::isfinite(v)) { return false; }
    }
  }
  return true;
}

double DeformationField::max_abs() const
{
  double m = 0.0;
  for (auto const &c : disp_) {
    for (double v : c) { m = std::max(m, std::abs(v)); }
  }
  return m;
}

DeformationField &DeformationField::operator+=(DeformationField const &o)
{
  require_shape(same_shape(o), "field += shape mismatch");
  for (int d = 0; d < 3; d++) {
    for (size_t i = 0; i < disp_[d].size(); i++) { disp_[d][i] += o.disp_[d][i]; }
  }
  return *this;
}

// Separable evaluation: contract z, then y, then x.
DenseField DeformationField::evaluate() const
{
  Dims const v = volume_dims_, c = control_dims_;
  auto const tx = axis_table(v.nx, spacing_), ty = axis_table(v.ny, spacing_), tz = axis_table(v.nz, spacing_);
  DenseField out(v);
  std::vector<double> t1(c.nx * c.ny * v.nz), t2(c.nx * v.ny * v.nz);
  for (int d = 0; d < 3; d++) {
    auto const &src = disp_[d];
    for (Index ix = 0; ix < c.nx; ix++) {
      for (Index iy = 0; iy < c.ny; iy++) {
        double const *row = src.data() + c.index(ix, iy, 0);
        double *dst = t1.data() + (ix * c.ny + iy) * v.nz;
        for (Index z = 0; z < v.nz; z++) {
          auto const &w = tz.w[z];
          Index const f = tz.first[z];
          dst[z] = w[0] * row[f] + w[1] * row[f + 1] + w[2] * row[f + 2] + w[3] * row[f + 3];
        }
      }
    }
    for (Index ix = 0; ix < c.nx; ix++) {
      for (Index y = 0; y < v.ny; y++) {
        auto const &w = ty.w[y];
        Index const f = ty.first[y];
        double *dst = t2.data() + (ix * v.ny + y) * v.nz;
        for (Index z = 0; z < v.nz; z++) {
          double s = 0.0;
          for (int k = 0; k < 4; k++) { s += w[k] * t1[(ix * c.ny + f + k) * v.nz + z]; }
          dst[z] = s;
        }
      }
    }
    auto &o = out.u[d];
    for (Index x = 0; x < v.nx; x++) {
      auto const &w = tx.w[x];
      Index const f = tx.first[x];
      for (Index yz = 0; yz < v.ny * v.nz; yz++) {
        double s = 0.0;
        for (int k = 0; k < 4; k++) { s += w[k] * t2[(f + k) * v.ny * v.nz + yz]; }
        o[x * v.ny * v.nz + yz] = s;
      }
    }
  }
  return out;
}

DeformationField DeformationField::evaluate_adjoint(DenseField const &g) const
{
  require_shape(g.dims == volume_dims_, "dense gradient dims do not match field volume");
  Dims const v = volume_dims_, c = control_dims_;
  auto const tx = axis_table(v.nx, spacing_), ty = axis_table(v.ny, spacing_), tz = axis_table(v.nz, spacing_);
  DeformationField out(volume_dims_, spacing_);
  std::vector<double> t1(c.nx * c.ny * v.nz), t2(c.nx * v.ny * v.nz);
  for (int d = 0; d < 3; d++) {
    std::fill(t1.begin(), t1.end(), 0.0);
    std::fill(t2.begin(), t2.end(), 0.0);
    auto const &src = g.u[d];
    for (Index x = 0; x < v.nx; x++) {
      auto const &w = tx.w[x];
      Index const f = tx.first[x];
      for (Index yz = 0; yz < v.ny * v.nz; yz++) {
        double const s = src[x * v.ny * v.nz + yz];
        for (int k = 0; k < 4; k++) { t2[(f + k) * v.ny * v.nz + yz] += w[k] * s; }
      }
    }
    for (Index ix = 0; ix < c.nx; ix++) {
      for (Index y = 0; y < v.ny; y++) {
        auto const &w = ty.w[y];
        Index const f = ty.first[y];
        double const *row = t2.data() + (ix * v.ny + y) * v.nz;
        for (Index z = 0; z < v.nz; z++) {
          for (int k = 0; k < 4; k++) { t1[(ix * c.ny + f + k) * v.nz + z] += w[k] * row[z]; }
        }
      }
    }
    auto &dst = out.disp_[d];
    for (Index ix = 0; ix < c.nx; ix++) {
      for (Index iy = 0; iy < c.ny; iy++) {
        double const *row = t1.data() + (ix * c.ny + iy) * v.nz;
        double *o = dst.data() + c.index(ix, iy, 0);
        for (Index z = 0; z < v.nz; z++) {
          auto const &w = tz.w[z];
          Index const f = tz.first[z];
          for (int k = 0; k < 4; k++) { o[f + k] += w[k] * row[z]; }
        }
      }
    }
  }
  return out;
}

} // namespace moco5d
