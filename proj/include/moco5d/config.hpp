#pragma once

#include "autoencoder.hpp"
#include "moco.hpp"
#include "simulate.hpp"
#include "tv_recon.hpp"

#include <filesystem>

namespace moco5d {

struct BaselineConfig
{
  Index n_cardiac = 4;
  Index n_resp = 4;
  TvConfig tv;
  /// Relative TV weights tried by the pipeline; the best ROI PSNR wins. Empty
  /// means use tv.weight as given.
  std::vector<double> weight_sweep{0.0001, 0.0003, 0.001, 0.003, 0.01};

  void validate() const;
  bool operator==(BaselineConfig const &) const = default;
};

struct PipelineConfig
{
  SimulationConfig simulation;
  /// Optional phantom JSON replacing simulation.phantom; relative paths resolve
  /// against the config file's directory.
  std::filesystem::path phantom_file;
  /// Optional existing dataset directory; when set, `simulate` is skipped.
  std::filesystem::path dataset;
  /// Seeds the simulation noise, the autoencoder, k-means and the generator.
  std::uint64_t seed = 1;
  AutoencoderConfig autoencoder;
  double compression_energy = 0.75;
  double roi_radius_mm = 40.0; // sphere around the heart used for compression and metrics
  MocoConfig moco;
  BaselineConfig baseline;

  void validate() const;
  /// Copy with every stage seed set from `seed`.
  PipelineConfig seeded() const;
  bool operator==(PipelineConfig const &) const = default;
};

void to_json(nlohmann::json &j, BaselineConfig const &c);
void from_json(nlohmann::json const &j, BaselineConfig &c);
void to_json(nlohmann::json &j, PipelineConfig const &c);
void from_json(nlohmann::json const &j, PipelineConfig &c);

/// Parses and validates a config file: unknown keys are rejected, relative paths
/// are resolved against the file's directory and must exist, and a phantom file
/// replaces the inline phantom.
PipelineConfig load_config(std::filesystem::path const &path);
void save_config(std::filesystem::path const &path, PipelineConfig const &c);

} // namespace moco5d
