#pragma once

#include "common.hpp"

#include <Eigen/Core>
#include <json.hpp>
#include <span>
#include <vector>

namespace moco5d {

struct DenseLayer
{
  Eigen::MatrixXd w; // out x in
  Eigen::VectorXd b; // out
  bool tanh = true;
};

/// Fully connected encoder (navigator column -> 3 latents) and mirrored decoder.
/// Hidden layers use tanh; the latent and reconstruction layers are linear.
struct AutoencoderParams
{
  std::vector<DenseLayer> layers; // encoder layers first
  Index encoder_layers = 0;

  static AutoencoderParams init(Index input, std::vector<Index> const &hidden, Index latent, std::uint64_t seed);

  Index input_size() const { return layers.front().w.cols(); }
  Index latent_size() const { return layers[encoder_layers - 1].w.rows(); }
  Index parameter_count() const;
  /// Order: for each layer, w column-major then b.
  std::vector<double> flatten() const;
  void assign(std::span<double const> p);

  Eigen::MatrixXd encode(Eigen::MatrixXd const &y) const;
  Eigen::MatrixXd decode(Eigen::MatrixXd const &z) const;
};

/// Circular record-length filter given by a real 0/1 mask on the DFT grid; the
/// taps are the inverse DFT of the mask, so taps and mask describe the same filter.
struct BandStopFilter
{
  double sample_rate_hz = 1.0;
  std::vector<std::pair<double, double>> stop_bands; // Hz, inclusive
  std::vector<double> mask;                          // per DFT bin
  std::vector<double> taps;                          // circular impulse response
};

BandStopFilter band_stop_filter(Index length, double sample_rate_hz, std::vector<std::pair<double, double>> stop_bands);

/// Per-channel penalty filters: the cardiac channel's filter stops everything
/// outside (lo, hi) so only respiratory-band energy is penalized; each
/// respiratory channel's filter stops (lo, hi) so only out-of-band energy is penalized.
std::vector<BandStopFilter> latent_filters(Index length, double sample_rate_hz, double resp_lo_hz, double resp_hi_hz);

struct AutoencoderLoss
{
  double total = 0.0;
  double data = 0.0;
  double penalty = 0.0;      // lambda times the filtered latent energy
  std::vector<double> grad;  // same order as AutoencoderParams::flatten
  Eigen::MatrixXd z;         // latents of the batch
};

/// sum over rows and DFT bins of (sqrt(|F(D(E(Y)) - Y)|^2 + eps^2) - eps) plus
/// lambda * sum_c ||Z_c (*) B_c||^2, F the unnormalized DFT along time and (*)
/// circular convolution.
AutoencoderLoss autoencoder_loss(AutoencoderParams const &params, Eigen::MatrixXd const &y,
                                 std::span<BandStopFilter const> filters, double lambda, double eps = 1e-8,
                                 bool want_gradient = true);

struct AutoencoderConfig
{
  std::vector<Index> hidden{64, 32};
  double lambda = 10.0;
  double learning_rate = 1e-3;
  Index epochs = 500;
  double epsilon = 1e-8;
  double resp_lo_hz = 0.05;
  double resp_hi_hz = 0.7;
  std::uint64_t seed = 0;
  bool operator==(AutoencoderConfig const &) const = default;
};

void to_json(nlohmann::json &j, AutoencoderConfig const &c);
void from_json(nlohmann::json const &j, AutoencoderConfig &c);

/// Latents per frame; rows are [cardiac, resp1, resp2].
struct LatentSeries
{
  Eigen::MatrixXd z;
  std::vector<double> frame_times;

  Index frames() const { return z.cols(); }
};

struct TrainingResult
{
  AutoencoderParams params;
  LatentSeries latents;
  std::vector<double> loss_trace; // total loss per epoch
  AutoencoderLoss final_loss;
};

/// Full-batch Adam on the whole record (the loss's DFT spans the record).
TrainingResult train_autoencoder(Eigen::MatrixXd const &y, double frame_rate_hz, AutoencoderConfig const &cfg);

/// Fraction of a signal's (mean-removed) energy inside [lo, hi] Hz on its DFT grid.
double band_energy_fraction(std::span<double const> x, double sample_rate_hz, double lo_hz, double hi_hz);

} // namespace moco5d
