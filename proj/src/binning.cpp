#include "moco5d/binning.hpp"

#include "moco5d/log.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numeric>

namespace moco5d {

std::vector<Index> BinnedDataset::occupancy() const
{
  std::vector<Index> n;
  for (auto const &b : bins) n.push_back(static_cast<Index>(b.size()));
  return n;
}

std::vector<double> cardiac_phase_from_latent(std::span<double const> cardiac, double hysteresis)
{
  Index const T = static_cast<Index>(cardiac.size());
  if (T < 2) throw DomainError("cardiac phase: need at least two frames");
  double mean = std::accumulate(cardiac.begin(), cardiac.end(), 0.0) / static_cast<double>(T);
  double var = 0;
  for (double v : cardiac) var += (v - mean) * (v - mean);
  double const h = hysteresis * std::sqrt(var / static_cast<double>(T));

  // Upward crossings: the signal must dip below -h before a crossing of +h counts,
  // and the cycle start is the last frame at or below zero before that.
  std::vector<Index> starts;
  bool armed = false;
  Index last_nonpositive = -1;
  for (Index t = 0; t < T; t++) {
    double const v = cardiac[t] - mean;
    if (v <= 0) last_nonpositive = t;
    if (v < -h) armed = true;
    if (armed && v > h) {
      starts.push_back(last_nonpositive + 1);
      armed = false;
    }
  }

  std::vector<double> phase(T, 0.0);
  if (starts.size() < 2) {
    log_warn("cardiac phase: fewer than two cycles detected; phases set from frame order");
    for (Index t = 0; t < T; t++) phase[t] = static_cast<double>(t) / static_cast<double>(T);
    return phase;
  }
  for (Index t = 0; t < T; t++) {
    auto it = std::upper_bound(starts.begin(), starts.end(), t);
    Index lo, hi;
    if (it == starts.begin()) {
      lo = starts[0], hi = starts[1];
    } else if (it == starts.end()) {
      lo = starts[starts.size() - 2], hi = starts.back();
    } else {
      lo = *(it - 1), hi = *it;
    }
    double const f = static_cast<double>(t - lo) / static_cast<double>(hi - lo);
    phase[t] = f - std::floor(f);
  }
  return phase;
}

BinnedDataset bin_frames(Eigen::MatrixXd const &z, Index n_cardiac, Index n_resp)
{
  if (z.rows() != 3) throw ShapeError("bin_frames: expected 3 latent channels");
  if (n_cardiac < 1 || n_resp < 1) throw DomainError("bin_frames: bin counts must be positive");
  Index const T = z.cols();
  BinnedDataset b;
  b.n_cardiac = n_cardiac;
  b.n_resp = n_resp;

  std::vector<double> card(T);
  for (Index t = 0; t < T; t++) card[t] = z(0, t);
  b.cardiac_phase = n_cardiac > 1 ? cardiac_phase_from_latent(card) : std::vector<double>(T, 0.0);

  Eigen::MatrixXd r = z.bottomRows(2);
  r = r.colwise() - r.rowwise().mean();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(r * r.transpose());
  Eigen::Vector2d pc = es.eigenvectors().col(1);
  if (pc[0] + pc[1] < 0) pc = -pc; // fixed sign convention
  b.resp_signal.resize(T);
  for (Index t = 0; t < T; t++) b.resp_signal[t] = pc.dot(r.col(t));

  std::vector<Index> order(T);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index c) { return b.resp_signal[a] < b.resp_signal[c]; });
  b.resp_bin.assign(T, 0);
  for (Index i = 0; i < T; i++) b.resp_bin[order[i]] = i * n_resp / T;

  b.cardiac_bin.resize(T);
  b.bins.assign(n_cardiac * n_resp, {});
  for (Index t = 0; t < T; t++) {
    b.cardiac_bin[t] = std::min(n_cardiac - 1, static_cast<Index>(b.cardiac_phase[t] * static_cast<double>(n_cardiac)));
    b.bins[b.bin_index(b.cardiac_bin[t], b.resp_bin[t])].push_back(t);
  }
  for (Index i = 0; i < b.bin_count(); i++) {
    if (b.bins[i].empty()) log_warn("bin {} (cardiac {}, resp {}) is empty", i, i / n_resp, i % n_resp);
  }
  return b;
}

} // namespace moco5d
