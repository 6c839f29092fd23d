#pragma once

#include "bspline.hpp"
#include "deformation.hpp"

namespace moco5d {

/// output(r) = template(r + u(r)) with cubic B-spline interpolation of the
/// template (pull-back convention). The template is prefiltered so that a zero
/// field reproduces it exactly; samples outside the grid see zero coefficients.
ComplexVolume warp(ComplexVolume const &tmpl, DeformationField const &field);

struct WarpGradients
{
  ComplexVolume tmpl;
  DeformationField field;
};

/// Vector-Jacobian product of warp for a real loss with complex cotangent
/// dL/dRe + i dL/dIm of the output.
WarpGradients warp_vjp(ComplexVolume const &tmpl, DeformationField const &field, ComplexVolume const &cotangent);

/// Jacobian-vector product: directional derivative of warp along (d_tmpl, d_field).
ComplexVolume warp_jvp(
  ComplexVolume const &tmpl, DeformationField const &field, ComplexVolume const &d_tmpl, DeformationField const &d_field);

/// Warp with a fixed dense displacement, reusable across many templates. This is
/// the linear operator W of the motion model for a given motion state.
class Warper
{
public:
  explicit Warper(DeformationField const &field);
  explicit Warper(DenseField displacement);

  Dims dims() const { return disp_.dims; }
  DenseField const &displacement() const { return disp_; }

  ComplexVolume apply(ComplexVolume const &tmpl) const;
  /// W^T cotangent: gradient with respect to the template only.
  ComplexVolume apply_adjoint(ComplexVolume const &cotangent) const;
  /// Template and dense-displacement gradients in one pass.
  void vjp(ComplexVolume const &tmpl, ComplexVolume const &cotangent, ComplexVolume &g_tmpl, DenseField &g_disp) const;
  /// Derivative of the output along a dense displacement perturbation.
  ComplexVolume jvp_displacement(ComplexVolume const &tmpl, DenseField const &d_disp) const;

private:
  DenseField disp_;
  BSplinePrefilter prefilter_;
};

} // namespace moco5d
