#include "moco5d/trajectory.hpp"

#include <cmath>
#include <numbers>

namespace moco5d {

double golden_angle() { return std::numbers::pi * (3.0 - std::sqrt(5.0)); }

std::vector<Vec3> kooshball_directions(Index n_spokes_total, Index spokes_per_frame)
{
  if (n_spokes_total < 1 || spokes_per_frame < 1 || n_spokes_total % spokes_per_frame != 0) {
    throw DomainError("kooshball: total spokes must be a positive multiple of spokes per frame");
  }
  Index const interleaves = n_spokes_total / spokes_per_frame;
  double const total = static_cast<double>(n_spokes_total);
  std::vector<Vec3> dirs;
  dirs.reserve(n_spokes_total);
  for (Index i = 0; i < interleaves; i++) {
    for (Index s = 0; s < spokes_per_frame; s++) {
      double const m = static_cast<double>(s * interleaves + i);
      double const polar = std::acos(1.0 - (m + 0.5) / total);
      double const azimuth = std::fmod(m * golden_angle(), 2.0 * std::numbers::pi);
      dirs.push_back({std::sin(polar) * std::cos(azimuth), std::sin(polar) * std::sin(azimuth), std::cos(polar)});
    }
  }
  return dirs;
}

Trajectory kooshball_trajectory(Index n_spokes_total, Index samples_per_spoke, Index spokes_per_frame)
{
  if (samples_per_spoke < 2) { throw DomainError("kooshball: need at least 2 samples per spoke"); }
  auto const dirs = kooshball_directions(n_spokes_total, spokes_per_frame);
  Trajectory t;
  t.spokes_per_frame = spokes_per_frame;
  t.samples_per_spoke = samples_per_spoke;
  t.points.reserve(static_cast<size_t>(n_spokes_total * samples_per_spoke));
  for (auto const &d : dirs) {
    for (Index j = 0; j < samples_per_spoke; j++) {
      double const r = static_cast<double>(j - samples_per_spoke / 2) / static_cast<double>(samples_per_spoke);
      t.points.push_back({r * d[0], r * d[1], r * d[2]});
    }
  }
  return t;
}

} // namespace moco5d
