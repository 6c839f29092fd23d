#pragma once

#include "nufft.hpp"

namespace moco5d {

/// Sphere in scanner coordinates (mm, relative to the grid center).
struct RoiSphere
{
  Vec3 center_mm{0.0, 0.0, 0.0};
  double radius_mm = 0.0;
};

/// Linear map from physical to virtual channels: virtual v = sum_c conj(q(c, v)) * coil c,
/// where the columns of q are orthonormal.
struct CoilCompression
{
  Index ncoils = 0;
  Index nvirtual = 0;
  std::vector<Cx> q;                    // ncoils x nvirtual, column-major
  std::vector<double> eigenvalues;      // generalized eigenvalues, descending
  double energy_fraction = 1.0;         // whitened ROI energy kept by the retained channels
  std::vector<double> energy_by_count;  // whitened ROI energy fraction kept with 1..ncoils channels
  std::vector<double> signal_by_count;  // unwhitened ROI signal fraction kept with 1..ncoils channels

  Cx at(Index c, Index v) const { return q[v * ncoils + c]; }
  KSpaceFrame apply(KSpaceFrame const &frame) const;
  CoilMaps apply(CoilMaps const &maps) const;
};

/// Per-coil density-compensated adjoint of the pooled samples, i.e. the
/// motion-averaged coil images used to design the compression.
std::vector<ComplexVolume> coil_images(std::span<KSpaceFrame const> frames, Trajectory const &traj, Dims dims, double spacing);

/// Virtual channels maximally sensitive to the ROI: generalized eigenvectors of
/// the ROI signal covariance against the distance-weighted covariance of the
/// complement. ROI energy is measured in channels whitened by that complement
/// covariance, where the fraction kept by the leading n eigenvectors is the
/// share of the leading n generalized eigenvalues; the fewest channels reaching
/// `energy` are kept, as an orthonormal basis of their span. The complement
/// covariance is regularized by 1e-6 * trace / ncoils.
CoilCompression design_coil_compression(std::span<ComplexVolume const> images, RoiSphere const &roi, double energy = 0.75);

struct CompressedData
{
  std::vector<KSpaceFrame> frames;
  CoilMaps maps;
  CoilCompression compression;
};

CompressedData compress_coils(std::span<KSpaceFrame const> frames, CoilMaps const &maps, Trajectory const &traj,
                              RoiSphere const &roi, double energy = 0.75);

} // namespace moco5d
