#pragma once

#include "deformation.hpp"

#include <filesystem>
#include <json.hpp>

namespace moco5d {

/// Decoder shape: a dense layer maps the latent to channels[0] x seed^3, then each
/// entry of `channels` after the first (and finally 3 displacement channels) is a
/// stride-2 transposed 3x3x3 convolution that doubles the grid. The last output
/// is cropped to the control-grid extent.
struct GeneratorArchitecture
{
  Index latent = 3;
  Index seed_size = 4;
  std::vector<Index> channels{32, 16, 8};
  double initial_gain = 1.0; // voxels

  Index stages() const { return static_cast<Index>(channels.size()); }
  Index output_size() const { return seed_size << stages(); }
  bool operator==(GeneratorArchitecture const &) const = default;
};

void to_json(nlohmann::json &j, GeneratorArchitecture const &a);
void from_json(nlohmann::json const &j, GeneratorArchitecture &a);

struct GeneratorGradients
{
  std::vector<double> params;
  std::vector<double> z;
};

/// Maps a latent vector to a B-spline deformation field. Hidden activations are
/// tanh; the last convolution is linear, zero-initialized, and its output is
/// multiplied by a learnable global gain, so a fresh generator yields no motion.
class Generator
{
public:
  Generator() = default;
  Generator(GeneratorArchitecture arch, Dims volume_dims, Index control_spacing, std::uint64_t seed);

  GeneratorArchitecture const &architecture() const { return arch_; }
  Dims volume_dims() const { return volume_dims_; }
  Index control_spacing() const { return spacing_; }
  Dims control_dims() const { return control_dims_; }

  std::vector<double> &params() { return theta_; }
  std::vector<double> const &params() const { return theta_; }
  Index parameter_count() const { return static_cast<Index>(theta_.size()); }
  double gain() const { return theta_.back(); }

  DeformationField generate(std::span<double const> z) const;
  GeneratorGradients vjp(std::span<double const> z, DeformationField const &cotangent) const;
  DeformationField jvp(std::span<double const> z, std::span<double const> d_params, std::span<double const> d_z) const;

  /// Writes `stem`.json (manifest) and `stem`.bin (parameters, f64 little-endian).
  void save(std::filesystem::path const &stem) const;
  static Generator load(std::filesystem::path const &stem);

private:
  struct Layout
  {
    Index w = 0, b = 0; // offsets into theta
    Index cin = 0, cout = 0, in_size = 0;
  };

  struct Activations;
  void forward(std::span<double const> z, Activations &act) const;
  void check_latent(std::span<double const> z) const;

  GeneratorArchitecture arch_;
  Dims volume_dims_{};
  Dims control_dims_{};
  Index spacing_ = 4;
  Layout dense_;
  std::vector<Layout> convs_;
  std::vector<double> theta_; // dense, convs, gain
};

} // namespace moco5d
