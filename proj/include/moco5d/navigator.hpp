#pragma once

#include "dataset.hpp"

#include <Eigen/Core>

namespace moco5d {

struct PreprocessOptions
{
  double frame_rate_hz = 1.0 / 0.088;
  double lowpass_hz = 2.8;
  double transition_hz = 1.0; // low-pass transition width, sets the FIR length
  int poly_degree = 8;
};

/// Windowed-sinc (Hamming) low-pass taps with unit DC gain, odd length.
std::vector<double> lowpass_taps(double cutoff_hz, double sample_rate_hz, double transition_hz);

/// Symmetric FIR applied centered (zero phase). The record is extended at both
/// ends by odd reflection (2 x_0 - x_k), which preserves linear trends.
std::vector<double> zero_phase_filter(std::span<double const> x, std::span<double const> taps);

/// Removes the least-squares fit of Chebyshev polynomials up to `degree` over
/// the record mapped to [-1, 1].
std::vector<double> chebyshev_detrend(std::span<double const> x, int degree);

/// Drift removal followed by low-pass filtering of one navigator row.
std::vector<double> preprocess_row(std::span<double const> x, PreprocessOptions const &opt);

struct PreprocessedNavigators
{
  Eigen::MatrixXd y;               // kept rows x frames, each row zero mean and unit variance
  std::vector<Index> kept_rows;    // navigator sample index of each row of y
  std::vector<Index> dropped_rows; // rows whose variance vanished after filtering
};

/// Applies preprocess_row to every row, then standardizes. Needs at least 64 frames.
PreprocessedNavigators preprocess_navigators(NavigatorMatrix const &nav, PreprocessOptions const &opt);

} // namespace moco5d
