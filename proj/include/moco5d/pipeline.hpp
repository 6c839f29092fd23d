#pragma once

#include "binning.hpp"
#include "coil_compression.hpp"
#include "config.hpp"
#include "dataset.hpp"
#include "kmeans.hpp"
#include "moco.hpp"

#include <filesystem>
#include <optional>

namespace moco5d {

inline constexpr int report_version = 1;

/// Stage outputs under one root directory; every stage reads its inputs from
/// here, so stages can be re-run independently.
struct PipelineLayout
{
  std::filesystem::path root;
  std::filesystem::path dataset_override; // used instead of root/dataset when set

  std::filesystem::path dataset() const { return dataset_override.empty() ? root / "dataset" : dataset_override; }
  std::filesystem::path latents() const { return root / "latents"; }
  std::filesystem::path clusters() const { return root / "clusters"; }
  std::filesystem::path recon() const { return root / "recon"; }
  std::filesystem::path binned() const { return root / "binned"; }
  std::filesystem::path render() const { return root / "render"; }
  std::filesystem::path report() const { return root / "report.json"; }
};

PipelineLayout layout_for(PipelineConfig const &cfg, std::filesystem::path const &out);

// Stages. Each writes its artifacts and returns what later stages need.
KTDataset stage_simulate(PipelineConfig const &cfg, PipelineLayout const &dirs);
TrainingResult stage_latents(PipelineConfig const &cfg, PipelineLayout const &dirs);
ClusterSet stage_cluster(PipelineConfig const &cfg, PipelineLayout const &dirs);
ReconResult stage_recon(PipelineConfig const &cfg, PipelineLayout const &dirs);
std::vector<ComplexVolume> stage_binned(PipelineConfig const &cfg, PipelineLayout const &dirs);
/// Synthesizes frames [first, first + count) and writes them with an SI profile.
void stage_render(PipelineConfig const &cfg, PipelineLayout const &dirs, Index first, Index count);
nlohmann::json stage_metrics(PipelineConfig const &cfg, PipelineLayout const &dirs);
/// simulate (unless a dataset is configured) -> latents -> cluster -> recon ->
/// binned -> metrics. Returns the report.
nlohmann::json run_pipeline(PipelineConfig const &cfg, std::filesystem::path const &out);

Eigen::MatrixXd read_latents(std::filesystem::path const &dir);
void write_clusters(std::filesystem::path const &dir, ClusterSet const &c);
ClusterSet read_clusters(std::filesystem::path const &dir);
/// Validates format, version and top-level keys.
nlohmann::json read_report(std::filesystem::path const &path);

// Evaluation against the simulator's truth.

/// Sphere of the configured radius around the phantom's heart.
RoiSphere heart_roi(PhantomSpec const &s, double radius_mm);
/// Compressed data used by both reconstructions.
CompressedData compressed_dataset(KTDataset const &ds, PipelineConfig const &cfg);

struct BinTruth
{
  std::vector<std::optional<PhantomState>> states; // empty for empty bins
  std::vector<std::pair<double, double>> phases;   // (cardiac, resp) rendered per bin
};

/// Per bin, the phantom at the average motion state of the bin's frames. The
/// motion depends on cos(2 pi cardiac) and sin(2 pi resp) only and linearly in
/// both, so averaging those and mapping back renders the mean deformation.
BinTruth bin_truth(KTDataset const &ds, BinnedDataset const &binned);

/// Per bin, the motion-compensated volume at the mean normalized latent of its frames.
std::vector<std::optional<ComplexVolume>> moco_bin_volumes(ReconResult const &r, Eigen::MatrixXd const &latents,
  BinnedDataset const &binned);

} // namespace moco5d
