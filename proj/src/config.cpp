#include "moco5d/config.hpp"

#include "json_util.hpp"
#include "moco5d/io.hpp"

namespace moco5d {

void BaselineConfig::validate() const
{
  if (n_cardiac < 1 || n_resp < 1) throw DomainError("baseline: bin counts must be positive");
  tv.validate();
  for (double w : weight_sweep)
    if (!(w >= 0)) throw DomainError("baseline: sweep weights must be non-negative");
}

void to_json(nlohmann::json &j, BaselineConfig const &c)
{
  j = {{"n_cardiac", c.n_cardiac}, {"n_resp", c.n_resp}, {"tv", c.tv}, {"weight_sweep", c.weight_sweep}};
}

void from_json(nlohmann::json const &j, BaselineConfig &c)
{
  detail::reject_unknown_keys(j, "baseline", {"n_cardiac", "n_resp", "tv", "weight_sweep"});
  detail::read_opt(j, "n_cardiac", c.n_cardiac);
  detail::read_opt(j, "n_resp", c.n_resp);
  if (j.contains("tv")) j.at("tv").get_to(c.tv);
  detail::read_opt(j, "weight_sweep", c.weight_sweep);
  c.validate();
}

void PipelineConfig::validate() const
{
  simulation.validate();
  if (!(compression_energy > 0 && compression_energy <= 1)) throw DomainError("config: compression_energy must be in (0, 1]");
  if (!(roi_radius_mm > 0)) throw DomainError("config: roi_radius_mm must be positive");
  if (autoencoder.lambda < 0 || autoencoder.epochs < 1 || !(autoencoder.learning_rate > 0)) {
    throw DomainError("config: autoencoder settings out of range");
  }
  moco.validate();
  baseline.validate();
}

PipelineConfig PipelineConfig::seeded() const
{
  PipelineConfig c = *this;
  c.autoencoder.seed = seed;
  c.moco.seed = seed;
  return c;
}

void to_json(nlohmann::json &j, PipelineConfig const &c)
{
  j = {{"simulation", c.simulation},
    {"seed", c.seed},
    {"autoencoder", c.autoencoder},
    {"compression_energy", c.compression_energy},
    {"roi_radius_mm", c.roi_radius_mm},
    {"moco", c.moco},
    {"baseline", c.baseline}};
  if (!c.phantom_file.empty()) j["phantom_file"] = c.phantom_file.string();
  if (!c.dataset.empty()) j["dataset"] = c.dataset.string();
}

void from_json(nlohmann::json const &j, PipelineConfig &c)
{
  detail::reject_unknown_keys(j, "config",
    {"simulation", "phantom_file", "dataset", "seed", "autoencoder", "compression_energy", "roi_radius_mm", "moco", "baseline"});
  if (j.contains("simulation")) j.at("simulation").get_to(c.simulation);
  if (j.contains("phantom_file")) c.phantom_file = j.at("phantom_file").get<std::string>();
  if (j.contains("dataset")) c.dataset = j.at("dataset").get<std::string>();
  detail::read_opt(j, "seed", c.seed);
  if (j.contains("autoencoder")) j.at("autoencoder").get_to(c.autoencoder);
  detail::read_opt(j, "compression_energy", c.compression_energy);
  detail::read_opt(j, "roi_radius_mm", c.roi_radius_mm);
  if (j.contains("moco")) j.at("moco").get_to(c.moco);
  if (j.contains("baseline")) j.at("baseline").get_to(c.baseline);
  c.validate();
}

PipelineConfig load_config(std::filesystem::path const &path)
{
  io::require_file(path);
  PipelineConfig c = io::read_json(path).get<PipelineConfig>();
  auto const base = path.parent_path();
  auto resolve = [&](std::filesystem::path &p) {
    if (!p.empty() && p.is_relative()) p = base / p;
  };
  resolve(c.phantom_file);
  resolve(c.dataset);
  if (!c.phantom_file.empty()) {
    io::require_file(c.phantom_file);
    c.simulation.phantom = io::read_json(c.phantom_file).get<PhantomSpec>();
    c.phantom_file.clear(); // now inline
  }
  if (!c.dataset.empty()) io::require_file(c.dataset / "meta.json");
  c.validate();
  return c;
}

void save_config(std::filesystem::path const &path, PipelineConfig const &c)
{
  io::write_json(path, nlohmann::json(c));
}

} // namespace moco5d
