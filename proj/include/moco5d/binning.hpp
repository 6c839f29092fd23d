#pragma once

#include "common.hpp"

#include <Eigen/Core>
#include <span>
#include <vector>

namespace moco5d {

/// Frames sorted into cardiac x respiratory bins. Bin (c, r) has linear index
/// c * n_resp + r.
struct BinnedDataset
{
  Index n_cardiac = 4;
  Index n_resp = 4;
  std::vector<double> cardiac_phase; // per frame, in [0, 1)
  std::vector<double> resp_signal;   // per frame, principal respiratory component
  std::vector<Index> cardiac_bin;
  std::vector<Index> resp_bin;
  std::vector<std::vector<Index>> bins;

  Index bin_count() const { return n_cardiac * n_resp; }
  Index bin_index(Index c, Index r) const { return c * n_resp + r; }
  std::vector<Index> occupancy() const;
};

/// Cardiac phase of each frame as its time fraction within the cardiac cycle,
/// cycles starting at upward zero crossings of the cardiac latent (with
/// hysteresis of `hysteresis` standard deviations). Frames before the first or
/// after the last crossing use the neighbouring cycle's length.
std::vector<double> cardiac_phase_from_latent(std::span<double const> cardiac, double hysteresis = 0.25);

/// Bins latents (rows: cardiac, resp, resp). Cardiac bins split the estimated
/// phase into equal intervals; respiratory bins are equal-occupancy quantiles of
/// the first principal component of the respiratory channels.
BinnedDataset bin_frames(Eigen::MatrixXd const &z, Index n_cardiac = 4, Index n_resp = 4);

} // namespace moco5d
