#include "moco5d/generator.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace moco5d;
using namespace moco5d::testing;

namespace {

/// Two stages from a 2^3 seed: an 8^3 output cropped to the 6^3 control grid of a 10^3 volume.
Generator tiny_generator(std::uint64_t seed, std::mt19937_64 &rng)
{
  GeneratorArchitecture arch;
  arch.seed_size = 2;
  arch.channels = {3, 2};
  arch.initial_gain = 0.7;
  Generator g(arch, Dims{10, 10, 10}, 4, seed);
  for (auto &p : g.params()) p += 0.3 * std::normal_distribution<double>()(rng);
  return g;
}

double dot(DeformationField const &a, DeformationField const &b)
{
  double s = 0;
  for (int d = 0; d < 3; d++)
    for (size_t i = 0; i < a.component(d).size(); i++) s += a.component(d)[i] * b.component(d)[i];
  return s;
}

/// Upper bound on the infinity-norm Lipschitz constant from per-output absolute
/// weight sums of every layer (tanh is 1-Lipschitz).
double lipschitz_bound(Generator const &g)
{
  auto const &a = g.architecture();
  auto const &th = g.params();
  Index const s3 = a.seed_size * a.seed_size * a.seed_size;
  Index off = 0;
  double bound = 0;
  for (Index o = 0; o < a.channels[0] * s3; o++) {
    double row = 0;
    for (Index i = 0; i < a.latent; i++) row += std::abs(th[off + o * a.latent + i]);
    bound = std::max(bound, row);
  }
  off += a.channels[0] * s3 * (a.latent + 1);
  for (Index s = 0; s < a.stages(); s++) {
    Index const cin = a.channels[s], cout = s + 1 < a.stages() ? a.channels[s + 1] : 3;
    double worst = 0;
    for (Index co = 0; co < cout; co++) {
      double row = 0;
      for (Index ci = 0; ci < cin; ci++)
        for (Index k = 0; k < 27; k++) row += std::abs(th[off + (ci * cout + co) * 27 + k]);
      worst = std::max(worst, row);
    }
    bound *= worst;
    off += cin * cout * 27 + cout;
  }
  return bound * std::abs(g.gain());
}

} // namespace

TEST_CASE("a fresh generator produces no motion and no latent gradient")
{
  Generator g(GeneratorArchitecture{}, Dims{64, 64, 64}, 4, 1);
  CHECK(g.control_dims() == Dims{19, 19, 19});
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int trial = 0; trial < 3; trial++) {
    std::vector<double> z{u(rng), u(rng), u(rng)};
    auto const f = g.generate(z);
    CHECK(f.max_abs() == 0.0);
    auto const cot = random_field(g.volume_dims(), 4, rng, 1.0);
    auto const grad = g.vjp(z, cot);
    for (double v : grad.z) CHECK(v == 0.0);
  }
}

TEST_CASE("zero cotangent gives zero gradients")
{
  std::mt19937_64 rng(2);
  auto const g = tiny_generator(3, rng);
  std::vector<double> z{0.2, -0.4, 1.0};
  auto const grad = g.vjp(z, DeformationField(g.volume_dims(), 4));
  for (double v : grad.params) CHECK(v == 0.0);
  for (double v : grad.z) CHECK(v == 0.0);
}

TEST_CASE("generator VJP matches finite differences")
{
  std::mt19937_64 rng(3);
  auto const g = tiny_generator(5, rng);
  CHECK(g.control_dims() == Dims{6, 6, 6});
  std::vector<double> z{0.3, -0.7, 0.5};
  auto const cot = random_field(g.volume_dims(), 4, rng, 1.0);
  auto const grad = g.vjp(z, cot);
  auto const dp = random_vector(g.params().size(), rng);
  auto const dz = random_vector(3, rng);
  double analytic = 0;
  for (size_t i = 0; i < dp.size(); i++) analytic += grad.params[i] * dp[i];
  for (int i = 0; i < 3; i++) analytic += grad.z[i] * dz[i];
  auto eval = [&](double h) {
    Generator q = g;
    for (size_t i = 0; i < dp.size(); i++) q.params()[i] += h * dp[i];
    std::vector<double> zz(z);
    for (int i = 0; i < 3; i++) zz[i] += h * dz[i];
    return dot(q.generate(zz), cot);
  };
  double const fd = central_difference(eval, 1e-5);
  MESSAGE("analytic " << analytic << " fd " << fd);
  CHECK(rel_err(analytic, fd) < 1e-4);
}

TEST_CASE("generator JVP and VJP are adjoint")
{
  std::mt19937_64 rng(4);
  auto const g = tiny_generator(6, rng);
  std::vector<double> z{-1.0, 0.1, 0.4};
  auto const cot = random_field(g.volume_dims(), 4, rng, 1.0);
  auto const dp = random_vector(g.params().size(), rng);
  auto const dz = random_vector(3, rng);
  double const lhs = dot(g.jvp(z, dp, dz), cot);
  auto const grad = g.vjp(z, cot);
  double rhs = 0;
  for (size_t i = 0; i < dp.size(); i++) rhs += grad.params[i] * dp[i];
  for (int i = 0; i < 3; i++) rhs += grad.z[i] * dz[i];
  CHECK(rel_err(lhs, rhs) < 1e-10);
}

TEST_CASE("generator output is Lipschitz in the latent and finite on the sampled box")
{
  std::mt19937_64 rng(7);
  auto const g = tiny_generator(8, rng);
  double const lip = lipschitz_bound(g);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int trial = 0; trial < 20; trial++) {
    std::vector<double> z{u(rng), u(rng), u(rng)};
    auto const f = g.generate(z);
    CHECK(f.all_finite());
    std::vector<double> z2(z);
    auto const d = random_vector(3, rng);
    double const dn = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
    for (int i = 0; i < 3; i++) z2[i] += 1e-3 * d[i] / dn;
    auto const f2 = g.generate(z2);
    double diff = 0;
    for (int c = 0; c < 3; c++)
      for (size_t i = 0; i < f.component(c).size(); i++) diff = std::max(diff, std::abs(f.component(c)[i] - f2.component(c)[i]));
    CHECK(diff <= lip * 1e-3);
  }
}

TEST_CASE("generation is deterministic for a fixed seed")
{
  std::mt19937_64 r1(9), r2(9);
  auto const a = tiny_generator(11, r1);
  auto const b = tiny_generator(11, r2);
  std::vector<double> z{0.5, 0.5, -0.5};
  auto const fa = a.generate(z), fb = b.generate(z);
  for (int c = 0; c < 3; c++) CHECK(fa.component(c) == fb.component(c));
  CHECK(Generator(GeneratorArchitecture{}, Dims{16, 16, 16}, 4, 1).params() !=
        Generator(GeneratorArchitecture{}, Dims{16, 16, 16}, 4, 2).params());
}

TEST_CASE("generator checkpoints round-trip bit-exactly")
{
  std::mt19937_64 rng(10);
  auto const g = tiny_generator(12, rng);
  auto const dir = std::filesystem::temp_directory_path() / "moco5d_generator_test";
  std::filesystem::create_directories(dir);
  g.save(dir / "gen");
  auto const h = Generator::load(dir / "gen");
  CHECK(h.params() == g.params());
  CHECK(h.architecture() == g.architecture());
  CHECK(h.control_dims() == g.control_dims());

  std::filesystem::remove(dir / "gen.bin");
  CHECK_THROWS(Generator::load(dir / "gen"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("generator shape errors")
{
  GeneratorArchitecture arch;
  arch.seed_size = 2;
  arch.channels = {4};
  CHECK_THROWS_AS(Generator(arch, Dims{32, 32, 32}, 4, 0), ShapeError);
  Generator g(GeneratorArchitecture{}, Dims{16, 16, 16}, 4, 0);
  CHECK_THROWS_AS(g.generate(std::vector<double>{1.0, 2.0}), ShapeError);
  CHECK_THROWS_AS(g.vjp(std::vector<double>{0, 0, 0}, DeformationField(Dims{32, 32, 32}, 4)), ShapeError);
}
