#include "moco5d/nufft.hpp"
#include "test_support.hpp"

#include <doctest.h>

using namespace moco5d;
using namespace moco5d::testing;

namespace {

std::vector<Cx> brute_force_dft(ComplexVolume const &x, std::span<KPoint const> k)
{
  Dims const d = x.dims();
  std::vector<Cx> out(k.size());
  for (size_t s = 0; s < k.size(); s++) {
    Cx acc = 0;
    for (Index i = 0; i < d.nx; i++)
      for (Index j = 0; j < d.ny; j++)
        for (Index l = 0; l < d.nz; l++) {
          double const ph = -2 * M_PI * (k[s][0] * centered(i, d.nx) + k[s][1] * centered(j, d.ny) + k[s][2] * centered(l, d.nz));
          acc += x(i, j, l) * std::polar(1.0, ph);
        }
    out[s] = acc;
  }
  return out;
}

std::vector<KPoint> random_kpoints(Index n, std::mt19937_64 &rng)
{
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  std::vector<KPoint> k(n);
  for (auto &p : k) p = {u(rng), u(rng), u(rng)};
  return k;
}

double rel_l2(std::span<Cx const> a, std::span<Cx const> b)
{
  double num = 0, den = 0;
  for (size_t i = 0; i < a.size(); i++) {
    num += std::norm(a[i] - b[i]);
    den += std::norm(b[i]);
  }
  return std::sqrt(num / den);
}

} // namespace

TEST_CASE("nufft forward matches the brute-force DFT")
{
  std::mt19937_64 rng(101);
  for (Dims d : {Dims{12, 12, 12}, Dims{16, 10, 14}, Dims{24, 24, 24}}) {
    auto const x = random_volume(d, rng);
    auto const k = random_kpoints(400, rng);
    Nufft const op(d, k);
    std::vector<Cx> y(k.size());
    op.forward(x.data(), y);
    double const e = rel_l2(y, brute_force_dft(x, k));
    MESSAGE("dims " << to_string(d) << " rel error " << e);
    CHECK(e < 1e-3);
  }
}

TEST_CASE("nufft adjoint passes the dot-product test")
{
  std::mt19937_64 rng(55);
  Dims const d{16, 12, 20};
  auto const k = random_kpoints(300, rng);
  Nufft const op(d, k);
  auto const x = random_volume(d, rng);
  std::vector<Cx> y(k.size()), ax(k.size()), aty(d.size());
  std::normal_distribution<double> g;
  for (auto &v : y) v = Cx(g(rng), g(rng));
  op.forward(x.data(), ax);
  op.adjoint(y, aty);
  Cx const lhs = dot(ax, y), rhs = dot(x.data(), aty);
  CHECK(std::abs(lhs - rhs) / std::abs(lhs) < 1e-10);
}

TEST_CASE("DC sample sums the image")
{
  std::mt19937_64 rng(3);
  Dims const d{10, 12, 8};
  auto const x = random_volume(d, rng);
  std::vector<KPoint> k{{0.0, 0.0, 0.0}};
  Nufft const op(d, k);
  std::vector<Cx> y(1);
  op.forward(x.data(), y);
  Cx sum = 0;
  for (auto v : x.data()) sum += v;
  CHECK(std::abs(y[0] - sum) / std::abs(sum) < 1e-3);
}

TEST_CASE("Cartesian full sampling satisfies Parseval exactly")
{
  std::mt19937_64 rng(8);
  Dims const d{8, 6, 10};
  std::vector<KPoint> k;
  for (Index i = 0; i < d.nx; i++)
    for (Index j = 0; j < d.ny; j++)
      for (Index l = 0; l < d.nz; l++)
        k.push_back({centered(i, d.nx) / d.nx, centered(j, d.ny) / d.ny, centered(l, d.nz) / d.nz});
  Nufft const op(d, k);
  CHECK(op.on_grid());
  auto const x = random_volume(d, rng);
  std::vector<Cx> y(k.size());
  op.forward(x.data(), y);
  CHECK(std::abs(norm2(y) / double(d.size()) - norm2(x.data())) / norm2(x.data()) < 1e-10);
  CHECK(rel_l2(y, brute_force_dft(x, k)) < 1e-10);
  std::vector<Cx> back(d.size());
  op.adjoint(y, back);
  for (auto &v : back) v /= double(d.size());
  CHECK(rel_l2(back, x.data()) < 1e-10);
}

TEST_CASE("nufft is linear")
{
  std::mt19937_64 rng(12);
  Dims const d{12, 12, 12};
  auto const k = random_kpoints(200, rng);
  Nufft const op(d, k);
  auto const a = random_volume(d, rng), b = random_volume(d, rng);
  Cx const s(0.3, 1.1);
  std::vector<Cx> ya(k.size()), yb(k.size()), yab(k.size());
  op.forward(a.data(), ya);
  op.forward(b.data(), yb);
  op.forward((a + s * b).data(), yab);
  for (size_t i = 0; i < ya.size(); i++) ya[i] += s * yb[i];
  CHECK(rel_l2(yab, ya) < 1e-12);
}

TEST_CASE("out-of-band samples are rejected")
{
  std::vector<KPoint> k{{0.6, 0.0, 0.0}};
  CHECK_THROWS_AS(Nufft(Dims{8, 8, 8}, k), DomainError);
}

TEST_CASE("multichannel operators use the coil maps")
{
  std::mt19937_64 rng(19);
  Dims const d{10, 10, 10};
  CoilMaps maps;
  for (int c = 0; c < 3; c++) {
    auto m = random_volume(d, rng, 0.3);
    maps.maps.push_back(m);
  }
  auto const k = random_kpoints(150, rng);
  Nufft const op(d, k);
  auto const x = random_volume(d, rng);
  auto const f = forward(x, maps, op);
  auto const y = [&] {
    KSpaceFrame r(3, 150);
    std::normal_distribution<double> g;
    for (auto &v : r.samples) v = Cx(g(rng), g(rng));
    return r;
  }();
  auto const aty = adjoint(y, maps, op);
  Cx const lhs = dot(f.samples, y.samples), rhs = dot(x.data(), aty.data());
  CHECK(std::abs(lhs - rhs) / std::abs(lhs) < 1e-10);
}

TEST_CASE("radial density weights integrate to the sampled ball")
{
  Index const spokes = 400, ns = 64;
  std::vector<KPoint> k;
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  for (Index s = 0; s < spokes; s++) {
    double a = g(rng), b = g(rng), c = g(rng);
    double const n = std::sqrt(a * a + b * b + c * c);
    for (Index j = 0; j < ns; j++) {
      double const r = double(j - ns / 2) / ns;
      k.push_back({r * a / n, r * b / n, r * c / n});
    }
  }
  auto const w = radial_density_weights(k, spokes, ns);
  double sum = 0;
  for (double v : w) sum += v;
  CHECK(sum == doctest::Approx(M_PI / 6).epsilon(0.05));
}
