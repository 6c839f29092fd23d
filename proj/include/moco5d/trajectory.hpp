#pragma once

#include "nufft.hpp"

namespace moco5d {

/// Golden-angle rotation between consecutive interleaves, pi * (3 - sqrt 5) rad.
double golden_angle();

/// Unit spoke directions on the upper hemisphere, ordered frame by frame. Spoke
/// m = s * interleaves + i (interleave i, spoke s within it) has
/// cos(polar) = 1 - (m + 1/2) / total, which spreads spokes with uniform area
/// density, and azimuth m * golden_angle. Each interleave spirals from the pole
/// to the equator and consecutive interleaves are rotated.
std::vector<Vec3> kooshball_directions(Index n_spokes_total, Index spokes_per_frame = 22);

/// Centered radial spokes along kooshball_directions; readout sample j sits at
/// (j - samples/2) / samples cycles per voxel, so the middle sample is k = 0.
Trajectory kooshball_trajectory(Index n_spokes_total, Index samples_per_spoke, Index spokes_per_frame = 22);

} // namespace moco5d
