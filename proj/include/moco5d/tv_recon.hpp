#pragma once

#include "binning.hpp"
#include "moco.hpp"

#include <json.hpp>

namespace moco5d {

struct TvConfig
{
  /// Regularization weight in image-intensity units: the absolute weight is this
  /// value times the Lipschitz constant of the data-term gradient, so it is the
  /// soft-threshold applied by the first proximal step.
  double weight = 0.001;
  Index iterations = 40;
  Index prox_iterations = 25;
  bool spatial = false;       // also penalize spatial forward differences within each bin
  double spatial_weight = 1.0; // relative to the bin-dimension weight
  SampleWeighting weighting = SampleWeighting::density;

  void validate() const;
  bool operator==(TvConfig const &) const = default;
};

void to_json(nlohmann::json &j, TvConfig const &c);
void from_json(nlohmann::json const &j, TvConfig &c);

/// Total variation of a bin stack: sum over voxels of |x(c+1, r) - x(c, r)|
/// (cardiac neighbours, cyclic when there are more than two cardiac bins) and
/// |x(c, r+1) - x(c, r)| (respiratory neighbours), plus spatial forward
/// differences scaled by `spatial_weight` when enabled.
double bin_total_variation(std::span<ComplexVolume const> x, Index n_cardiac, Index n_resp, bool spatial = false,
  double spatial_weight = 1.0);

/// argmin_x 0.5 ||x - v||^2 + tau * TV(x) by projected gradient on the dual.
std::vector<ComplexVolume> prox_bin_tv(std::vector<ComplexVolume> v, double tau, Index n_cardiac, Index n_resp,
  Index iterations, bool spatial = false, double spatial_weight = 1.0);

struct TvResult
{
  std::vector<ComplexVolume> bins;
  std::vector<double> objective; // per iteration, data term + lambda * TV
  double lambda = 0.0;           // absolute weight used
  double lipschitz = 0.0;
  Index backtracks = 0;
};

/// Pools each bin's frames (empty bins get no data term).
std::vector<MotionGroup> pool_bins(Trajectory const &traj, std::span<KSpaceFrame const> frames, BinnedDataset const &binned,
  SampleWeighting weighting);

/// Minimizes sum_b ||A_b x_b - b_b||_W^2 + lambda * TV(x) by monotone FISTA with
/// backtracking, starting from zero.
TvResult tv_reconstruct(std::span<MotionGroup const> bins, CoilMaps const &maps, double spacing, Index n_cardiac,
  Index n_resp, TvConfig const &cfg);

} // namespace moco5d
