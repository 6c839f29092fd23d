#pragma once

#include "common.hpp"

#include <Eigen/Core>
#include <vector>

namespace moco5d {

/// Per-channel z-scoring of latent vectors (channels are rows).
struct LatentNormalization
{
  Eigen::VectorXd mean;
  Eigen::VectorXd sd;

  static LatentNormalization fit(Eigen::MatrixXd const &z);
  static LatentNormalization identity(Index channels);
  Eigen::MatrixXd apply(Eigen::MatrixXd const &z) const;
};

struct ClusterSet
{
  LatentNormalization normalization;
  Eigen::MatrixXd centroids;           // channels x N, normalized units
  std::vector<Index> assignment;       // per frame
  std::vector<std::vector<Index>> members; // per cluster, ascending frame order
  double inertia = 0.0;                // within-cluster sum of squares, normalized units
  Index iterations = 0;

  Index size() const { return centroids.cols(); }
};

/// Sum over frames of squared distance to the assigned centroid.
double within_cluster_ss(Eigen::MatrixXd const &points, Eigen::MatrixXd const &centroids, std::vector<Index> const &assignment);

/// k-means++ seeding followed by Lloyd iterations until every centroid moves less
/// than `tolerance` or `max_iterations` is reached. Latents are z-scored per
/// channel first when `normalize` is set. An emptied cluster is re-seeded with
/// the point farthest from its centroid.
ClusterSet cluster_latents(Eigen::MatrixXd const &z, Index n_clusters, std::uint64_t seed, bool normalize = true,
  double tolerance = 1e-8, Index max_iterations = 200);

} // namespace moco5d
