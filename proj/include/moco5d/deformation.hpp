#pragma once

#include "volume.hpp"

namespace moco5d {

/// Free-form deformation: cubic B-spline control grid with integer spacing (in
/// voxels) whose coefficients are displacements in voxels. Control point j on an
/// axis sits at voxel coordinate (j - 1) * spacing, so the grid reaches one
/// spacing beyond the volume on both sides and every voxel center has its full
/// 4-point support.
class DeformationField
{
public:
  DeformationField() = default;
  DeformationField(Dims volume_dims, Index control_spacing);

  static Dims control_dims_for(Dims volume_dims, Index control_spacing);

  Dims volume_dims() const { return volume_dims_; }
  Dims control_dims() const { return control_dims_; }
  Index control_spacing() const { return spacing_; }

  std::vector<double> &component(int d) { return disp_[d]; }
  std::vector<double> const &component(int d) const { return disp_[d]; }
  double &at(int d, Index cx, Index cy, Index cz) { return disp_[d][control_dims_.index(cx, cy, cz)]; }

  /// All three components flattened, component-major.
  std::vector<double> flatten() const;
  void assign(std::span<double const> flat);
  Index parameter_count() const { return 3 * control_dims_.size(); }

  bool same_shape(DeformationField const &o) const;
  bool all_finite() const;
  double max_abs() const;

  /// Dense displacement at every voxel center.
  DenseField evaluate() const;
  /// Adjoint of evaluate(): accumulates a dense per-voxel gradient onto the control grid.
  DeformationField evaluate_adjoint(DenseField const &g) const;

  DeformationField &operator+=(DeformationField const &o);

private:
  Dims volume_dims_{};
  Dims control_dims_{};
  Index spacing_ = 4;
  std::array<std::vector<double>, 3> disp_;
};

} // namespace moco5d
