#pragma once

#include "phantom.hpp"

#include <filesystem>
#include <optional>

namespace moco5d {

/// SI-projection navigator readouts, one column per frame, stored row-major
/// (rows = navigator samples along SI, columns = frames).
struct NavigatorMatrix
{
  Index rows = 0;
  Index cols = 0;
  std::vector<double> y;
  double sample_spacing_mm = 1.0;
  std::vector<double> frame_times;

  NavigatorMatrix() = default;
  NavigatorMatrix(Index r, Index c)
    : rows{r}
    , cols{c}
    , y(static_cast<size_t>(r * c))
  {
  }
  double &at(Index r, Index t) { return y[r * cols + t]; }
  double at(Index r, Index t) const { return y[r * cols + t]; }
};

/// Ground-truth physiological phases per frame, each in [0, 1).
struct TruthPhases
{
  std::vector<double> cardiac;
  std::vector<double> resp;
};

/// Everything one acquisition produces: per-frame multichannel samples, the
/// trajectory, coil maps, navigators, and (for simulated data) the truth.
struct KTDataset
{
  GridSpec grid;
  PhantomSpec phantom;
  double frame_seconds = 0.088;
  std::uint64_t seed = 0;
  Trajectory traj;
  std::vector<KSpaceFrame> frames;
  CoilMaps maps;
  NavigatorMatrix nav;
  std::optional<TruthPhases> truth;

  Index frame_count() const { return static_cast<Index>(frames.size()); }
  Index ncoils() const { return maps.ncoils(); }
};

/// Directory layout: meta.json, traj.bin, kspace.bin, navigators.bin,
/// coilmaps.vjson/.vbin and, when truth is present, truth/phases.csv,
/// truth/reference.vjson/.vbin and truth/states.vjson/.vbin + truth/fields.vjson/.vbin.
void write_dataset(std::filesystem::path const &dir, KTDataset const &ds);
KTDataset read_dataset(std::filesystem::path const &dir);

/// Phases of the 16 canonical states stored under truth/: cardiac (i + 0.5) / 4,
/// respiratory (j + 0.5) / 4, cardiac index major.
std::vector<std::pair<double, double>> canonical_truth_states();

} // namespace moco5d
