#include "moco5d/simulate.hpp"

#include "json_util.hpp"
#include "moco5d/trajectory.hpp"

#include <cmath>
#include <fmt/format.h>
#include <random>

namespace moco5d {

Index frame_count(double scan_seconds, double frame_seconds)
{
  if (!(frame_seconds > 0) || !(scan_seconds > 0)) { throw DomainError("frame and scan durations must be positive"); }
  return static_cast<Index>(std::floor(scan_seconds / frame_seconds + 1e-9));
}

Index SimulationConfig::frames() const { return frame_count(scan_seconds, frame_seconds); }

Index SimulationConfig::readout_samples() const
{
  return samples_per_spoke > 0 ? samples_per_spoke : std::max({grid.dims.nx, grid.dims.ny, grid.dims.nz});
}

void to_json(nlohmann::json &j, GridSpec const &g)
{
  j = {{"dims", {g.dims.nx, g.dims.ny, g.dims.nz}}, {"spacing_mm", g.spacing_mm}};
}

void from_json(nlohmann::json const &j, GridSpec &g)
{
  detail::reject_unknown_keys(j, "grid", {"dims", "spacing_mm"});
  if (j.contains("dims")) {
    auto const d = j.at("dims").get<std::vector<Index>>();
    if (d.size() != 3) throw DomainError("grid: dims needs three entries");
    g.dims = Dims{d[0], d[1], d[2]};
  }
  detail::read_opt(j, "spacing_mm", g.spacing_mm);
}

void to_json(nlohmann::json &j, SimulationConfig const &c)
{
  j = {{"grid", c.grid},
    {"phantom", c.phantom},
    {"ncoils", c.ncoils},
    {"spokes_per_frame", c.spokes_per_frame},
    {"samples_per_spoke", c.samples_per_spoke},
    {"frame_seconds", c.frame_seconds},
    {"scan_seconds", c.scan_seconds}};
}

void from_json(nlohmann::json const &j, SimulationConfig &c)
{
  detail::reject_unknown_keys(j, "simulation",
    {"grid", "phantom", "ncoils", "spokes_per_frame", "samples_per_spoke", "frame_seconds", "scan_seconds"});
  if (j.contains("grid")) j.at("grid").get_to(c.grid);
  if (j.contains("phantom")) j.at("phantom").get_to(c.phantom);
  detail::read_opt(j, "ncoils", c.ncoils);
  detail::read_opt(j, "spokes_per_frame", c.spokes_per_frame);
  detail::read_opt(j, "samples_per_spoke", c.samples_per_spoke);
  detail::read_opt(j, "frame_seconds", c.frame_seconds);
  detail::read_opt(j, "scan_seconds", c.scan_seconds);
  c.validate();
}

void SimulationConfig::validate() const
{
  phantom.validate();
  if (grid.dims.nx < 4 || grid.dims.ny < 4 || grid.dims.nz < 4) { throw DomainError("grid dims must be >= 4"); }
  if (!(grid.spacing_mm > 0)) { throw DomainError("grid spacing must be positive"); }
  if (ncoils < 1) { throw DomainError("need at least one coil"); }
  if (spokes_per_frame < 1 || samples_per_spoke < 0) { throw DomainError("invalid spoke layout"); }
  if (frames() < 1) { throw DomainError("scan shorter than one frame"); }
}

std::pair<double, double> phases_at(PhantomSpec const &s, double t)
{
  auto frac = [](double v) {
    double const f = v - std::floor(v);
    return f >= 1.0 ? 0.0 : f;
  };
  return {frac(s.cardiac_phase0 + s.cardiac_rate_hz * t), frac(s.resp_phase0 + s.resp_rate_hz * t)};
}

std::vector<double> si_projection(ComplexVolume const &v)
{
  Dims const d = v.dims();
  std::vector<Cx> acc(d.nz, Cx{0.0});
  for (Index x = 0; x < d.nx; x++) {
    for (Index y = 0; y < d.ny; y++) {
      for (Index z = 0; z < d.nz; z++) { acc[z] += v(x, y, z); }
    }
  }
  std::vector<double> out(d.nz);
  for (Index z = 0; z < d.nz; z++) { out[z] = std::abs(acc[z]); }
  return out;
}

NufftOptions simulation_nufft_options() { return {2.0, 6}; }

KTDataset simulate_acquisition(SimulationConfig const &cfg, Trajectory const &traj, std::uint64_t seed)
{
  cfg.validate();
  Index const nt = traj.frame_count();
  if (nt < 1) { throw DomainError("simulation: trajectory has no frames"); }
  KTDataset ds;
  ds.grid = cfg.grid;
  ds.phantom = cfg.phantom;
  ds.frame_seconds = cfg.frame_seconds;
  ds.seed = seed;
  ds.traj = traj;
  ds.maps = synthetic_coil_maps(cfg.grid, cfg.ncoils);
  ds.nav = NavigatorMatrix(cfg.grid.dims.nz, nt);
  ds.nav.sample_spacing_mm = cfg.grid.spacing_mm;
  ds.truth = TruthPhases{};
  ds.frames.reserve(nt);

  double const component_sigma = cfg.phantom.noise_sigma / std::sqrt(2.0);
  for (Index t = 0; t < nt; t++) {
    double const time = static_cast<double>(t) * cfg.frame_seconds;
    auto const [pc, pr] = phases_at(cfg.phantom, time);
    ds.truth->cardiac.push_back(pc);
    ds.truth->resp.push_back(pr);
    auto const state = phantom_volume(cfg.phantom, cfg.grid, pc, pr);

    Nufft const op(cfg.grid.dims, traj.frame(t), simulation_nufft_options());
    KSpaceFrame f = forward(state.volume, ds.maps, op);
    f.frame_index = t;
    f.time_seconds = time;
    if (component_sigma > 0) {
      std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                        static_cast<std::uint32_t>(t), static_cast<std::uint32_t>(t >> 32)};
      std::mt19937_64 rng(seq);
      std::normal_distribution<double> noise(0.0, component_sigma);
      for (auto &v : f.samples) {
        double const re = noise(rng);
        double const im = noise(rng);
        v += Cx(re, im);
      }
    }
    ds.frames.push_back(std::move(f));

    auto const proj = si_projection(state.volume);
    for (Index z = 0; z < ds.nav.rows; z++) { ds.nav.at(z, t) = proj[z]; }
    ds.nav.frame_times.push_back(time);
  }
  return ds;
}

KTDataset simulate_acquisition(SimulationConfig const &cfg, std::uint64_t seed)
{
  cfg.validate();
  auto const traj = kooshball_trajectory(cfg.frames() * cfg.spokes_per_frame, cfg.readout_samples(), cfg.spokes_per_frame);
  return simulate_acquisition(cfg, traj, seed);
}

} // namespace moco5d
