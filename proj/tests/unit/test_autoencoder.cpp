#include "moco5d/autoencoder.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <numbers>

using namespace moco5d;
using namespace moco5d::testing;

namespace {

double const fs = 1.0 / 0.088;

Eigen::MatrixXd random_matrix(Index r, Index c, std::mt19937_64 &rng)
{
  std::normal_distribution<double> g;
  Eigen::MatrixXd m(r, c);
  for (Index j = 0; j < c; j++)
    for (Index i = 0; i < r; i++) m(i, j) = g(rng);
  return m;
}

/// Navigator-like rows mixing a respiratory and a cardiac oscillation.
Eigen::MatrixXd synthetic_navigators(Index rows, Index frames, std::mt19937_64 &rng)
{
  std::uniform_real_distribution<double> u(-1, 1);
  Eigen::MatrixXd y(rows, frames);
  std::vector<double> a(rows), b(rows), c(rows);
  for (Index r = 0; r < rows; r++) a[r] = u(rng), b[r] = u(rng), c[r] = u(rng);
  for (Index t = 0; t < frames; t++) {
    double const resp = std::sin(2 * std::numbers::pi * 0.25 * t / fs);
    double const card = std::cos(2 * std::numbers::pi * 1.2 * t / fs);
    for (Index r = 0; r < rows; r++) y(r, t) = a[r] * resp + b[r] * card + c[r] * resp * resp;
  }
  return y;
}

double circular_filtered_energy(Eigen::VectorXd const &z, std::vector<double> const &taps)
{
  Index const n = z.size();
  double e = 0;
  for (Index i = 0; i < n; i++) {
    double acc = 0;
    for (Index j = 0; j < n; j++) acc += taps[j] * z[((i - j) % n + n) % n];
    e += acc * acc;
  }
  return e;
}

} // namespace

TEST_CASE("latent filters meet their stop-band specification")
{
  Index const n = 300;
  auto const f = latent_filters(n, fs, 0.05, 0.7);
  REQUIRE(f.size() == 3);
  for (int c = 0; c < 3; c++) {
    for (Index k = 0; k < n; k++) {
      Cx h = 0;
      for (Index j = 0; j < n; j++) h += f[c].taps[j] * std::polar(1.0, -2 * std::numbers::pi * k * j / n);
      double const freq = std::min(k, n - k) * fs / n;
      bool const resp_band = freq >= 0.05 && freq <= 0.7;
      bool const stop = c == 0 ? !resp_band : resp_band;
      double const db = 20 * std::log10(std::max(std::abs(h), 1e-300));
      if (stop) {
        CHECK(db <= -40.0);
      } else {
        CHECK(db >= -1.0);
      }
    }
  }
}

TEST_CASE("an autoencoder that reproduces Y has zero loss at lambda 0")
{
  std::mt19937_64 rng(1);
  Index const nav = 6, T = 50;
  Eigen::VectorXd col = random_matrix(nav, 1, rng);
  Eigen::MatrixXd y = col.replicate(1, T);
  auto p = AutoencoderParams::init(nav, {5, 4}, 3, 7);
  p.layers.back().w.setZero();
  p.layers.back().b = col;
  auto const f = latent_filters(T, fs, 0.05, 0.7);
  auto const loss = autoencoder_loss(p, y, f, 0.0);
  CHECK(loss.total == 0.0);
}

TEST_CASE("autoencoder loss gradient matches finite differences")
{
  std::mt19937_64 rng(2);
  Index const nav = 6, T = 40;
  auto const y = random_matrix(nav, T, rng);
  auto const f = latent_filters(T, fs, 0.05, 0.7);
  for (double lambda : {0.0, 0.7}) {
    auto p = AutoencoderParams::init(nav, {5, 4}, 3, 11);
    auto const theta = p.flatten();
    for (auto &v : const_cast<std::vector<double> &>(theta)) v += 0.1 * std::normal_distribution<double>()(rng);
    p.assign(theta);
    auto const loss = autoencoder_loss(p, y, f, lambda);
    auto const dir = random_vector(theta.size(), rng);
    double analytic = 0;
    for (size_t i = 0; i < theta.size(); i++) analytic += loss.grad[i] * dir[i];
    auto eval = [&](double h) {
      auto q = p;
      std::vector<double> t(theta);
      for (size_t i = 0; i < t.size(); i++) t[i] += h * dir[i];
      q.assign(t);
      return autoencoder_loss(q, y, f, lambda, 1e-8, false).total;
    };
    double const fd = central_difference(eval, 1e-6);
    MESSAGE("lambda " << lambda << " analytic " << analytic << " fd " << fd);
    CHECK(rel_err(analytic, fd) < 1e-4);
  }
}

TEST_CASE("penalty equals lambda times the directly convolved latent energy")
{
  std::mt19937_64 rng(3);
  Index const nav = 8, T = 120;
  Eigen::MatrixXd y(nav, T);
  for (Index t = 0; t < T; t++)
    for (Index r = 0; r < nav; r++) y(r, t) = (r + 1) * 0.1 * std::sin(2 * std::numbers::pi * 0.3 * t / fs);
  auto const p = AutoencoderParams::init(nav, {6, 5}, 3, 5);
  auto const f = latent_filters(T, fs, 0.05, 0.7);
  double const lambda = 250.0;
  auto const loss = autoencoder_loss(p, y, f, lambda, 1e-8, false);
  double oracle = 0;
  for (int c = 0; c < 3; c++) oracle += lambda * circular_filtered_energy(loss.z.row(c).transpose(), f[c].taps);
  CHECK(rel_err(loss.penalty, oracle) < 1e-10);
  CHECK(loss.penalty > 0);
}

TEST_CASE("constant navigators give constant latents and a DC-only residual")
{
  Index const nav = 5, T = 64;
  Eigen::VectorXd col(nav);
  col << 0.3, -1.0, 2.0, 0.5, 0.0;
  Eigen::MatrixXd const y = col.replicate(1, T);
  auto const p = AutoencoderParams::init(nav, {4, 4}, 3, 9);
  auto const f = latent_filters(T, fs, 0.05, 0.7);
  auto const loss = autoencoder_loss(p, y, f, 0.0, 1e-8, false);
  for (Index t = 1; t < T; t++) CHECK((loss.z.col(t) - loss.z.col(0)).norm() == 0.0);
  Eigen::VectorXd const r = p.decode(loss.z.col(0)) - col;
  double dc = 0;
  for (Index i = 0; i < nav; i++) dc += std::sqrt(std::pow(T * r[i], 2) + 1e-16) - 1e-8;
  CHECK(rel_err(loss.data, dc) < 1e-9);
}

TEST_CASE("training is deterministic and separates the bands on synthetic navigators")
{
  std::mt19937_64 rng(4);
  auto const y = synthetic_navigators(12, 512, rng);
  AutoencoderConfig cfg;
  cfg.hidden = {16, 8};
  cfg.epochs = 300;
  cfg.learning_rate = 1e-2;
  cfg.lambda = 10.0;
  cfg.seed = 3;
  auto const a = train_autoencoder(y, fs, cfg);
  auto const b = train_autoencoder(y, fs, cfg);
  CHECK(a.latents.z == b.latents.z);
  CHECK(a.loss_trace.back() < a.loss_trace.front());
  std::vector<double> card(a.latents.z.cols());
  for (Index t = 0; t < a.latents.z.cols(); t++) card[t] = a.latents.z(0, t);
  double const frac = band_energy_fraction(card, fs, 0.05, 0.7);
  MESSAGE("cardiac channel respiratory-band fraction " << frac);
  CHECK(frac < 0.1);
  for (Index c = 1; c < 3; c++) {
    std::vector<double> resp(a.latents.z.cols());
    for (Index t = 0; t < a.latents.z.cols(); t++) resp[t] = a.latents.z(c, t);
    CHECK(band_energy_fraction(resp, fs, 0.05, 0.7) >= 0.8);
  }
}

TEST_CASE("larger lambda does not increase band leakage")
{
  std::mt19937_64 rng(5);
  auto const y = synthetic_navigators(12, 512, rng);
  AutoencoderConfig cfg;
  cfg.hidden = {16, 8};
  cfg.epochs = 300;
  cfg.learning_rate = 3e-3;
  cfg.seed = 8;
  double previous = std::numeric_limits<double>::infinity();
  for (double lambda : {1.0, 2.0, 4.0}) {
    cfg.lambda = lambda;
    auto const r = train_autoencoder(y, fs, cfg);
    double const leakage = r.final_loss.penalty / lambda;
    MESSAGE("lambda " << lambda << " leakage " << leakage);
    CHECK(leakage <= previous);
    previous = leakage;
  }
}

TEST_CASE("negative lambda is rejected")
{
  auto const p = AutoencoderParams::init(4, {3}, 3, 1);
  auto const f = latent_filters(10, fs, 0.05, 0.7);
  CHECK_THROWS_AS(autoencoder_loss(p, Eigen::MatrixXd::Zero(4, 10), f, -1.0), DomainError);
}
