#pragma once

#include "coil_compression.hpp"
#include "volume.hpp"

#include <span>
#include <vector>

namespace moco5d {

inline constexpr double psnr_cap_db = 120.0;

/// Voxels whose centers (i - n/2) * spacing lie inside the sphere.
std::vector<char> sphere_mask(Dims dims, double spacing_mm, RoiSphere const &roi);

/// Magnitude PSNR in dB: peak is the largest |truth| inside the mask, error the
/// mean squared magnitude difference inside it. An empty mask means every voxel.
/// Identical volumes report psnr_cap_db.
double psnr(ComplexVolume const &recon, ComplexVolume const &truth, std::span<char const> mask = {});

/// Mean Euclidean distance between two displacement fields inside the mask (voxels).
double endpoint_error(DenseField const &a, DenseField const &b, std::span<char const> mask = {});

/// Structural similarity of magnitudes with cubic windows of side 2 * radius + 1,
/// averaged over mask voxels. Constants follow the usual (0.01 L)^2, (0.03 L)^2
/// with L the largest truth magnitude.
double structural_similarity(ComplexVolume const &recon, ComplexVolume const &truth, std::span<char const> mask = {},
  Index radius = 3);

/// Correlation between a signal and a cyclic phase after aligning the phase
/// offset: the multiple correlation of x with cos and sin of 2 pi phase.
double phase_correlation(std::span<double const> x, std::span<double const> phase);

} // namespace moco5d
