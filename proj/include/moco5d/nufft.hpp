#pragma once

#include "volume.hpp"

#include <memory>
#include <vector>

namespace moco5d {

/// k-space location in cycles per voxel; every component must lie in [-0.5, 0.5].
using KPoint = std::array<double, 3>;

/// Radial sample locations for all frames, frame-major then spoke then readout.
struct Trajectory
{
  Index spokes_per_frame = 22;
  Index samples_per_spoke = 64;
  std::vector<KPoint> points;
  std::vector<double> density_weights; // optional, one per point

  Index samples_per_frame() const { return spokes_per_frame * samples_per_spoke; }
  Index frame_count() const;
  std::span<KPoint const> frame(Index t) const;
};

void check_nyquist(std::span<KPoint const> k);

/// Per-coil sensitivities; all maps share dims and have root-sum-of-squares <= 1.
struct CoilMaps
{
  std::vector<ComplexVolume> maps;

  Index ncoils() const { return static_cast<Index>(maps.size()); }
  Dims dims() const { return maps.at(0).dims(); }
  void validate() const;
  /// Sum over coils of |m_c|^2 per voxel.
  std::vector<double> sum_of_squares() const;
};

/// Multichannel samples of one frame (or of a pooled group of frames).
struct KSpaceFrame
{
  Index ncoils = 0;
  Index nsamples = 0;
  std::vector<Cx> samples; // coil-major: samples[c * nsamples + i]
  Index frame_index = 0;
  double time_seconds = 0.0;

  KSpaceFrame() = default;
  KSpaceFrame(Index nc, Index ns)
    : ncoils{nc}
    , nsamples{ns}
    , samples(nc * ns)
  {
  }
  std::span<Cx> coil(Index c) { return {samples.data() + c * nsamples, static_cast<size_t>(nsamples)}; }
  std::span<Cx const> coil(Index c) const { return {samples.data() + c * nsamples, static_cast<size_t>(nsamples)}; }
};

struct NufftOptions
{
  double oversampling = 2.0;
  int kernel_width = 4;
};

class PaddedFft;

/// Single-channel type-2 NUFFT (image -> non-uniform samples) and its exact
/// adjoint, by Kaiser-Bessel gridding on an oversampled grid with deapodization.
///
/// Normalization: forward(x)(k) ~= sum_r x(r) exp(-i 2 pi k.r) with r = i - n/2
/// voxels on each axis; no 1/N factors anywhere. adjoint is the conjugate
/// transpose of the discrete operator actually applied, so the dot-product test
/// holds to rounding error. When every sample lies on the Cartesian grid
/// (k * n integral) an exact FFT path is used instead of gridding.
class Nufft
{
public:
  Nufft(Dims dims, std::span<KPoint const> k, NufftOptions opt = {});
  ~Nufft();
  Nufft(Nufft &&) noexcept;
  Nufft &operator=(Nufft &&) noexcept;

  Dims dims() const { return dims_; }
  Index sample_count() const { return nsamples_; }
  bool on_grid() const { return on_grid_; }

  void forward(std::span<Cx const> image, std::span<Cx> out) const;
  void adjoint(std::span<Cx const> samples, std::span<Cx> image) const;

  /// forward(weight .* image); weight may be empty for 1.
  void forward_weighted(std::span<Cx const> image, std::span<Cx const> weight, std::span<Cx> out) const;
  /// image += conj(weight) .* adjoint(samples); weight may be empty for 1.
  void adjoint_accumulate(std::span<Cx const> samples, std::span<Cx const> weight, std::span<Cx> image) const;

private:
  Dims dims_{};
  Index nsamples_ = 0;
  bool on_grid_ = false;
  int width_ = 4;
  std::shared_ptr<PaddedFft> fft_;
  std::array<std::vector<double>, 3> deapod_; // per-axis reciprocal apodization
  std::vector<std::int32_t> idx_;             // gridding: nsamples * 12 (3 axes x 4 taps); on-grid: nsamples
  std::vector<double> w_;                     // nsamples * 12
};

/// Multichannel forward operator of the signal model: per coil, NUFFT(map_c .* x).
KSpaceFrame forward(ComplexVolume const &volume, CoilMaps const &maps, Nufft const &op);
KSpaceFrame forward(ComplexVolume const &volume, CoilMaps const &maps, std::span<KPoint const> traj);
/// sum_c conj(map_c) .* NUFFT^H(samples_c).
ComplexVolume adjoint(KSpaceFrame const &frame, CoilMaps const &maps, Nufft const &op, double spacing = 1.0);
ComplexVolume adjoint(KSpaceFrame const &frame, CoilMaps const &maps, std::span<KPoint const> traj, double spacing = 1.0);

/// Analytic density compensation for centered radial spokes with uniform readout
/// spacing 1/samples_per_spoke: w = 2 pi |k|^2 dk / spokes, and the volume of a
/// ball of diameter dk shared by all spokes at k = 0. The weights sum to about the
/// volume of the sampled ball (pi / 6).
std::vector<double> radial_density_weights(std::span<KPoint const> k, Index spokes, Index samples_per_spoke);

} // namespace moco5d
