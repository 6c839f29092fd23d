#pragma once

#include "dataset.hpp"

namespace moco5d {

struct SimulationConfig
{
  GridSpec grid;
  PhantomSpec phantom;
  Index ncoils = 8;
  Index spokes_per_frame = 22;
  Index samples_per_spoke = 0; // 0: largest grid dimension
  double frame_seconds = 0.088;
  double scan_seconds = 88.0;

  Index frames() const;
  Index readout_samples() const;
  void validate() const;
  bool operator==(SimulationConfig const &) const = default;
};

void to_json(nlohmann::json &j, GridSpec const &g);
void from_json(nlohmann::json const &j, GridSpec &g);
void to_json(nlohmann::json &j, SimulationConfig const &c);
void from_json(nlohmann::json const &j, SimulationConfig &c);

/// floor(scan / frame) with a tolerance for representation error.
Index frame_count(double scan_seconds, double frame_seconds);

/// Phases at time t for the phantom's rates and initial phases.
std::pair<double, double> phases_at(PhantomSpec const &s, double t_seconds);

/// Ideal SI navigator: |sum over x, y| of the volume for every z.
std::vector<double> si_projection(ComplexVolume const &v);

/// Simulates the acquisition on the given trajectory (one frame per group of
/// spokes_per_frame spokes). Noise for frame t comes from a generator seeded by
/// (seed, t), so the result does not depend on evaluation order.
KTDataset simulate_acquisition(SimulationConfig const &cfg, Trajectory const &traj, std::uint64_t seed);
/// Same on the default kooshball trajectory for cfg.frames() frames.
KTDataset simulate_acquisition(SimulationConfig const &cfg, std::uint64_t seed);

/// Kernel used to generate data; wider than the reconstruction kernel so the
/// simulator and the reconstruction do not share gridding error.
NufftOptions simulation_nufft_options();

} // namespace moco5d
