#pragma once

#include "generator.hpp"
#include "kmeans.hpp"
#include "nufft.hpp"
#include "warp.hpp"

#include <functional>
#include <json.hpp>

namespace moco5d {

enum class SampleWeighting
{
  uniform, // plain least squares
  density  // radial density compensation, normalized to mean 1
};

/// Frames pooled under one motion state: their samples, trajectory, per-sample
/// weights and the latent fed to the generator.
struct MotionGroup
{
  std::vector<Index> frames;
  std::vector<KPoint> k;
  KSpaceFrame data;
  std::vector<double> weights; // objective weight per sample, shared by coils
  std::vector<double> density; // density compensation per sample, mean 1 over the acquisition
  std::vector<double> latent;
};

/// Pools each list of frame indices into one group. Column n of `latents` is the
/// generator input of group n. Density weights use the spoke count of the whole
/// acquisition, so pooling does not change any sample's weight.
std::vector<MotionGroup> pool_frames(Trajectory const &traj, std::span<KSpaceFrame const> frames,
  std::vector<std::vector<Index>> const &groups, Eigen::MatrixXd const &latents, SampleWeighting weighting);

struct MocoValue
{
  double value = 0.0;
  ComplexVolume grad_template;
  std::vector<double> grad_params;
};

/// The clustered motion-compensated data term
///   f(eta, theta) = sum_n || A_n warp(eta, G_theta(z_n)) - b_n ||_W^2
/// where A_n samples group n's trajectory through the coil maps.
class MocoProblem
{
public:
  MocoProblem(std::vector<MotionGroup> groups, CoilMaps maps, double spacing, NufftOptions opt = {});

  Index size() const { return static_cast<Index>(groups_.size()); }
  Dims dims() const { return maps_.dims(); }
  double spacing() const { return spacing_; }
  MotionGroup const &group(Index n) const { return groups_.at(n); }
  CoilMaps const &maps() const { return maps_; }

  /// sum_n ||b_n||_W^2, the objective at a zero template.
  double data_energy() const;

  /// Group n's term and, when requested, its gradients with respect to the
  /// template (dRe + i dIm) and the generator parameters.
  MocoValue objective(ComplexVolume const &eta, Generator const &gen, Index n, bool gradients = true) const;
  double total_objective(ComplexVolume const &eta, Generator const &gen) const;
  /// Same term for an explicit motion state.
  double objective(ComplexVolume const &eta, Warper const &w, Index n) const;

  /// Per-group warps for the generator's current motion states.
  std::vector<Warper> warpers(Generator const &gen) const;
  /// W_n^T A_n^H diag(w) A_n W_n x for one group.
  ComplexVolume group_normal(ComplexVolume const &x, Warper const &w, Index n) const;
  /// Normal operator sum_n W_n^T A_n^H diag(w) A_n W_n applied to x.
  ComplexVolume normal(ComplexVolume const &x, std::span<Warper const> w) const;
  /// sum_n W_n^T A_n^H diag(w) b_n.
  ComplexVolume normal_rhs(std::span<Warper const> w) const;
  /// Density-compensated adjoint of all samples with no motion correction.
  ComplexVolume averaged_adjoint() const;

  /// Conjugate gradients on the normal equations for fixed motion, starting at x0.
  /// `residuals`, if given, receives the normal-equation residual norm per iteration.
  ComplexVolume solve_template(ComplexVolume x0, std::span<Warper const> w, Index iterations,
    std::vector<double> *residuals = nullptr) const;

private:
  void forward_coils(ComplexVolume const &x, Index n, std::vector<Cx> &out) const;
  void adjoint_coils(std::vector<Cx> const &samples, Index n, ComplexVolume &acc) const;

  std::vector<MotionGroup> groups_;
  CoilMaps maps_;
  double spacing_ = 1.0;
  std::vector<Nufft> ops_;
};

enum class MocoSchedule
{
  alternating, // conjugate-gradient template solves between Adam epochs on the generator
  joint        // one step on template and generator per group
};

struct MocoConfig
{
  Index clusters = 30;
  Index epochs = 200;
  MocoSchedule schedule = MocoSchedule::alternating;
  Index template_interval = 10;         // alternating: epochs between template solves
  Index template_iterations = 4;        // alternating: CG iterations per solve
  Index initial_template_iterations = 10;
  double motion_learning_rate = 1e-3;
  double template_step = 0.1;           // joint: fraction of 1 / Lipschitz bound
  SampleWeighting weighting = SampleWeighting::density;
  GeneratorArchitecture generator;
  Index control_spacing = 4;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(MocoConfig const &) const = default;
};

void to_json(nlohmann::json &j, MocoConfig const &c);
void from_json(nlohmann::json const &j, MocoConfig &c);

struct ReconResult
{
  ComplexVolume eta;
  Generator generator;
  LatentNormalization normalization;
  Eigen::MatrixXd centroids; // generator inputs per group
  std::vector<std::vector<Index>> members;
  std::vector<DeformationField> fields;
  std::vector<double> loss_trace; // per epoch, summed over groups
  MocoConfig config;
};

using ReconCheckpoint = std::function<void(ReconResult const &, Index epoch)>;

/// Optimizes template and generator for a prepared problem. The template starts
/// from the least-squares scaled averaged adjoint refined by CG, the generator
/// from `cfg.seed` with a zero output layer.
ReconResult reconstruct(MocoProblem const &problem, MocoConfig const &cfg, ReconCheckpoint checkpoint = {},
  Index checkpoint_interval = 0);

/// Clusters the latents (channels x frames), pools the frames and reconstructs.
ReconResult reconstruct(Trajectory const &traj, std::span<KSpaceFrame const> frames, CoilMaps const &maps, double spacing,
  Eigen::MatrixXd const &latents, MocoConfig const &cfg, ReconCheckpoint checkpoint = {}, Index checkpoint_interval = 0);

/// warp(eta, G(z)) for a generator input z (normalized latent units).
ComplexVolume synthesize_normalized(ReconResult const &r, std::span<double const> z);
/// warp(eta, G(z)) for a raw latent vector.
ComplexVolume synthesize(ReconResult const &r, std::span<double const> latent);
/// One volume per requested frame, from the raw latents (channels x frames).
std::vector<ComplexVolume> synthesize_realtime(ReconResult const &r, Eigen::MatrixXd const &latents,
  std::span<Index const> frames);

/// Magnitude of the volume along the line through `at` parallel to `axis`, one column per frame.
Eigen::MatrixXd projection_profile(std::span<ComplexVolume const> volumes, int axis, std::array<Index, 3> at);

void write_loss_csv(std::filesystem::path const &path, std::span<double const> loss);
/// Directory with template volume, generator checkpoint, loss.csv and recon.json.
void write_recon(std::filesystem::path const &dir, ReconResult const &r);
/// Inverse of write_recon; per-group fields are regenerated from the generator.
ReconResult read_recon(std::filesystem::path const &dir);

} // namespace moco5d
