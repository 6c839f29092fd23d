#include "moco5d/kmeans.hpp"

#include <doctest.h>

#include <random>

using namespace moco5d;

namespace {

Eigen::MatrixXd gaussian_points(Index n, std::mt19937_64 &rng)
{
  std::normal_distribution<double> g;
  Eigen::MatrixXd p(3, n);
  for (Index t = 0; t < n; t++)
    for (int c = 0; c < 3; c++) p(c, t) = g(rng);
  return p;
}

} // namespace

TEST_CASE("one cluster per frame reproduces the latents")
{
  std::mt19937_64 rng(1);
  auto const z = gaussian_points(25, rng);
  auto const cs = cluster_latents(z, 25, 3);
  auto const zn = cs.normalization.apply(z);
  for (Index t = 0; t < 25; t++) {
    CHECK(cs.members[cs.assignment[t]] == std::vector<Index>{t});
    CHECK((cs.centroids.col(cs.assignment[t]) - zn.col(t)).norm() == 0.0);
  }
  CHECK(cs.inertia == 0.0);
}

TEST_CASE("two separated blobs are recovered exactly")
{
  std::mt19937_64 rng(2);
  auto z = gaussian_points(200, rng);
  for (Index t = 100; t < 200; t++) z.col(t).array() += 12.0;
  for (std::uint64_t seed : {0, 1, 2, 3}) {
    auto const cs = cluster_latents(z, 2, seed);
    Index const first = cs.assignment[0];
    for (Index t = 0; t < 200; t++) CHECK((cs.assignment[t] == first) == (t < 100));
  }
}

TEST_CASE("k-means beats a random assignment and partitions every frame")
{
  std::mt19937_64 rng(3);
  auto const z = gaussian_points(300, rng);
  auto const cs = cluster_latents(z, 30, 5);
  Index total = 0;
  for (auto const &m : cs.members) total += static_cast<Index>(m.size());
  CHECK(total == 300);
  auto const zn = cs.normalization.apply(z);
  std::vector<Index> random_assignment(300);
  std::uniform_int_distribution<Index> u(0, 29);
  for (auto &a : random_assignment) a = u(rng);
  Eigen::MatrixXd means = Eigen::MatrixXd::Zero(3, 30);
  std::vector<Index> count(30, 0);
  for (Index t = 0; t < 300; t++) means.col(random_assignment[t]) += zn.col(t), count[random_assignment[t]]++;
  for (Index k = 0; k < 30; k++)
    if (count[k]) means.col(k) /= static_cast<double>(count[k]);
  CHECK(cs.inertia <= within_cluster_ss(zn, means, random_assignment));
  CHECK(cs.inertia == doctest::Approx(within_cluster_ss(zn, cs.centroids, cs.assignment)));
}

TEST_CASE("clustering is deterministic and z-scores channels")
{
  std::mt19937_64 rng(4);
  Eigen::MatrixXd z = gaussian_points(120, rng);
  z.row(1) *= 50.0;
  auto const a = cluster_latents(z, 6, 9);
  auto const b = cluster_latents(z, 6, 9);
  CHECK(a.assignment == b.assignment);
  CHECK(a.centroids == b.centroids);
  auto const zn = a.normalization.apply(z);
  for (int c = 0; c < 3; c++) {
    CHECK(std::abs(zn.row(c).mean()) < 1e-12);
    CHECK(std::abs(zn.row(c).squaredNorm() / 120 - 1.0) < 1e-12);
  }
}

TEST_CASE("too many clusters are rejected")
{
  CHECK_THROWS_AS(cluster_latents(Eigen::MatrixXd::Zero(3, 5), 6, 0), DomainError);
  CHECK_THROWS_AS(cluster_latents(Eigen::MatrixXd::Zero(3, 5), 0, 0), DomainError);
}
