#include "moco5d/kmeans.hpp"

#include <fmt/format.h>
#include <limits>
#include <random>

namespace moco5d {

LatentNormalization LatentNormalization::fit(Eigen::MatrixXd const &z)
{
  LatentNormalization n;
  n.mean = z.rowwise().mean();
  n.sd.resize(z.rows());
  for (Index c = 0; c < z.rows(); c++) {
    double const sd = std::sqrt((z.row(c).array() - n.mean[c]).square().mean());
    n.sd[c] = sd > 0 ? sd : 1.0;
  }
  return n;
}

LatentNormalization LatentNormalization::identity(Index channels)
{
  return {Eigen::VectorXd::Zero(channels), Eigen::VectorXd::Ones(channels)};
}

Eigen::MatrixXd LatentNormalization::apply(Eigen::MatrixXd const &z) const
{
  if (z.rows() != mean.size()) { throw ShapeError("latent normalization: channel count mismatch"); }
  return (z.colwise() - mean).array().colwise() / sd.array();
}

double within_cluster_ss(Eigen::MatrixXd const &points, Eigen::MatrixXd const &centroids, std::vector<Index> const &assignment)
{
  double s = 0;
  for (Index t = 0; t < points.cols(); t++) s += (points.col(t) - centroids.col(assignment[t])).squaredNorm();
  return s;
}

namespace {

Index nearest(Eigen::MatrixXd const &c, Eigen::VectorXd const &p, double *dist2 = nullptr)
{
  Index best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (Index k = 0; k < c.cols(); k++) {
    double const d = (c.col(k) - p).squaredNorm();
    if (d < bd) bd = d, best = k;
  }
  if (dist2) *dist2 = bd;
  return best;
}

} // namespace

ClusterSet cluster_latents(
  Eigen::MatrixXd const &z, Index n_clusters, std::uint64_t seed, bool normalize, double tolerance, Index max_iterations)
{
  Index const T = z.cols();
  if (n_clusters < 1 || n_clusters > T) {
    throw DomainError(fmt::format("cluster count {} must lie in [1, {}]", n_clusters, T));
  }
  ClusterSet cs;
  cs.normalization = normalize ? LatentNormalization::fit(z) : LatentNormalization::identity(z.rows());
  Eigen::MatrixXd const p = cs.normalization.apply(z);

  std::mt19937_64 rng(seed);
  Eigen::MatrixXd c(p.rows(), n_clusters);
  c.col(0) = p.col(std::uniform_int_distribution<Index>(0, T - 1)(rng));
  std::vector<double> d2(T);
  for (Index t = 0; t < T; t++) d2[t] = (p.col(t) - c.col(0)).squaredNorm();
  for (Index k = 1; k < n_clusters; k++) {
    double total = 0;
    for (double v : d2) total += v;
    Index pick = 0;
    if (total > 0) {
      double r = std::uniform_real_distribution<double>(0, total)(rng);
      for (pick = 0; pick < T - 1; pick++) {
        r -= d2[pick];
        if (r < 0) break;
      }
      while (d2[pick] == 0) pick = (pick + 1) % T; // never reuse a chosen point
    } else {
      pick = k; // every point coincides with a centroid already
    }
    c.col(k) = p.col(pick);
    for (Index t = 0; t < T; t++) d2[t] = std::min(d2[t], (p.col(t) - c.col(k)).squaredNorm());
  }

  std::vector<Index> assign(T, 0);
  Index it = 0;
  for (; it < max_iterations; it++) {
    for (Index t = 0; t < T; t++) assign[t] = nearest(c, p.col(t));
    Eigen::MatrixXd next = Eigen::MatrixXd::Zero(p.rows(), n_clusters);
    std::vector<Index> count(n_clusters, 0);
    for (Index t = 0; t < T; t++) next.col(assign[t]) += p.col(t), count[assign[t]]++;
    for (Index k = 0; k < n_clusters; k++) {
      if (count[k] > 0) {
        next.col(k) /= static_cast<double>(count[k]);
        continue;
      }
      Index far = 0;
      double fd = -1;
      for (Index t = 0; t < T; t++) {
        double const d = (p.col(t) - c.col(assign[t])).squaredNorm();
        if (d > fd) fd = d, far = t;
      }
      next.col(k) = p.col(far);
      assign[far] = k;
    }
    double shift = 0;
    for (Index k = 0; k < n_clusters; k++) shift = std::max(shift, (next.col(k) - c.col(k)).norm());
    c = next;
    if (shift < tolerance) {
      it++;
      break;
    }
  }
  for (Index t = 0; t < T; t++) assign[t] = nearest(c, p.col(t));

  cs.centroids = c;
  cs.assignment = assign;
  cs.members.assign(n_clusters, {});
  for (Index t = 0; t < T; t++) cs.members[assign[t]].push_back(t);
  cs.inertia = within_cluster_ss(p, c, assign);
  cs.iterations = it;
  return cs;
}

} // namespace moco5d
