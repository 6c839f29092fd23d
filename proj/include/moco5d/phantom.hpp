#pragma once

#include "nufft.hpp"

#include <json.hpp>

namespace moco5d {

struct Ellipsoid
{
  Vec3 center_mm{0.0, 0.0, 0.0};
  Vec3 semi_axes_mm{1.0, 1.0, 1.0};
  double intensity = 1.0;
  bool operator==(Ellipsoid const &) const = default;
};

/// Deforming torso phantom. Axes: x left-right, y anterior-posterior, z
/// superior-inferior; positions in mm relative to the grid center.
struct PhantomSpec
{
  Ellipsoid torso{{0.0, 0.0, 0.0}, {95.0, 70.0, 85.0}, 0.35};
  Ellipsoid heart{{15.0, 10.0, 5.0}, {32.0, 26.0, 36.0}, 1.0};
  double fat_intensity = 0.9;     // 0 disables the subcutaneous fat shell
  double fat_thickness_mm = 8.0;
  double edge_width_mm = 3.0;     // error-function edge scale
  double cardiac_rate_hz = 1.2;
  double resp_rate_hz = 0.25;
  double cardiac_amplitude = 0.2; // fractional semi-axis change at end systole
  double resp_amplitude_mm = 8.0; // SI translation amplitude
  double cardiac_phase0 = 0.0;
  double resp_phase0 = 0.0;
  double noise_sigma = 1.0;       // complex k-space noise, E|n|^2 = sigma^2

  void validate() const;
  bool operator==(PhantomSpec const &) const = default;
};

void to_json(nlohmann::json &j, PhantomSpec const &s);
/// Rejects unknown keys; missing keys keep their defaults.
void from_json(nlohmann::json const &j, PhantomSpec &s);

/// Grid on which the phantom is sampled.
struct GridSpec
{
  Dims dims{64, 64, 64};
  double spacing_mm = 3.4;
  bool operator==(GridSpec const &) const = default;
};

/// Reference (motionless) intensity at a point in mm.
double phantom_reference(PhantomSpec const &s, Vec3 const &p_mm);

/// Pull-back displacement (mm) at output point p for the given phases: the
/// rendered image is reference(p + displacement(p)).
Vec3 phantom_displacement(PhantomSpec const &s, double cardiac_phase, double resp_phase, Vec3 const &p_mm);

struct PhantomState
{
  ComplexVolume volume;
  DenseField truth; // displacement in voxels, pull-back convention
};

/// Renders the phantom at the given phases and returns the exact displacement
/// field used. The heart scales by 1 - a (1 - cos 2 pi c) / 2 about its center and
/// the whole content moves by d sin(2 pi r) along +z.
PhantomState phantom_volume(PhantomSpec const &s, GridSpec const &grid, double cardiac_phase, double resp_phase);

/// Position of voxel index i on an axis of n voxels, in mm relative to the center.
inline double voxel_mm(Index i, Index n, double spacing) { return centered(i, n) * spacing; }

/// Gaussian-lobed coil sensitivities on a circle around the torso, normalized to
/// unit root-sum-of-squares at every voxel.
CoilMaps synthetic_coil_maps(GridSpec const &grid, Index ncoils);

} // namespace moco5d
