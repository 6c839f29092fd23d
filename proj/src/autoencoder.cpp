#include "moco5d/autoencoder.hpp"

#include "moco5d/adam.hpp"
#include "moco5d/fft.hpp"
#include "moco5d/log.hpp"

#include <cmath>
#include <random>

namespace moco5d {

namespace {

double bin_frequency(Index k, Index n, double fs)
{
  return static_cast<double>(std::min(k, n - k)) * fs / static_cast<double>(n);
}

template <typename T>
void read_opt(nlohmann::json const &j, char const *key, T &out)
{
  if (j.contains(key)) { out = j.at(key).get<T>(); }
}

} // namespace

AutoencoderParams AutoencoderParams::init(Index input, std::vector<Index> const &hidden, Index latent, std::uint64_t seed)
{
  if (input < 1 || latent < 1) { throw DomainError("autoencoder: sizes must be positive"); }
  std::vector<Index> sizes{input};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(latent);
  for (auto it = hidden.rbegin(); it != hidden.rend(); ++it) { sizes.push_back(*it); }
  sizes.push_back(input);

  std::mt19937_64 rng(seed);
  AutoencoderParams p;
  p.encoder_layers = static_cast<Index>(hidden.size()) + 1;
  Index const nlayers = static_cast<Index>(sizes.size()) - 1;
  for (Index l = 0; l < nlayers; l++) {
    Index const in = sizes[l], out = sizes[l + 1];
    double const limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> u(-limit, limit);
    DenseLayer layer;
    layer.w.resize(out, in);
    for (Index c = 0; c < in; c++) {
      for (Index r = 0; r < out; r++) { layer.w(r, c) = u(rng); }
    }
    layer.b = Eigen::VectorXd::Zero(out);
    layer.tanh = !(l == p.encoder_layers - 1 || l == nlayers - 1);
    p.layers.push_back(std::move(layer));
  }
  return p;
}

Index AutoencoderParams::parameter_count() const
{
  Index n = 0;
  for (auto const &l : layers) { n += l.w.size() + l.b.size(); }
  return n;
}

std::vector<double> AutoencoderParams::flatten() const
{
  std::vector<double> out;
  out.reserve(parameter_count());
  for (auto const &l : layers) {
    out.insert(out.end(), l.w.data(), l.w.data() + l.w.size());
    out.insert(out.end(), l.b.data(), l.b.data() + l.b.size());
  }
  return out;
}

void AutoencoderParams::assign(std::span<double const> p)
{
  require_shape(static_cast<Index>(p.size()) == parameter_count(), "autoencoder: parameter vector length mismatch");
  size_t o = 0;
  for (auto &l : layers) {
    std::copy_n(p.data() + o, l.w.size(), l.w.data());
    o += l.w.size();
    std::copy_n(p.data() + o, l.b.size(), l.b.data());
    o += l.b.size();
  }
}

namespace {
Eigen::MatrixXd apply_layers(std::vector<DenseLayer> const &layers, Index from, Index to, Eigen::MatrixXd x)
{
  for (Index l = from; l < to; l++) {
    Eigen::MatrixXd a = layers[l].w * x;
    a.colwise() += layers[l].b;
    if (layers[l].tanh) { a = a.array().tanh(); }
    x = std::move(a);
  }
  return x;
}
} // namespace

Eigen::MatrixXd AutoencoderParams::encode(Eigen::MatrixXd const &y) const
{
  require_shape(y.rows() == input_size(), "autoencoder: navigator length mismatch");
  return apply_layers(layers, 0, encoder_layers, y);
}

Eigen::MatrixXd AutoencoderParams::decode(Eigen::MatrixXd const &z) const
{
  require_shape(z.rows() == latent_size(), "autoencoder: latent size mismatch");
  return apply_layers(layers, encoder_layers, static_cast<Index>(layers.size()), z);
}

BandStopFilter band_stop_filter(Index n, double fs, std::vector<std::pair<double, double>> stops)
{
  if (n < 2 || !(fs > 0)) { throw DomainError("band-stop filter: invalid length or sample rate"); }
  BandStopFilter f;
  f.sample_rate_hz = fs;
  f.stop_bands = std::move(stops);
  f.mask.assign(n, 1.0);
  for (Index k = 0; k < n; k++) {
    double const freq = bin_frequency(k, n, fs);
    for (auto const &[lo, hi] : f.stop_bands) {
      if (freq >= lo && freq <= hi) { f.mask[k] = 0.0; }
    }
  }
  std::vector<Cx> buf(f.mask.begin(), f.mask.end());
  Dft1d(n, 1, 1, 1).backward(buf.data());
  f.taps.resize(n);
  for (Index i = 0; i < n; i++) { f.taps[i] = buf[i].real() / static_cast<double>(n); }
  return f;
}

std::vector<BandStopFilter> latent_filters(Index n, double fs, double lo, double hi)
{
  if (!(lo >= 0 && hi > lo)) { throw DomainError("latent filters: invalid respiratory band"); }
  double const nyquist = fs / 2.0;
  std::vector<BandStopFilter> f;
  f.push_back(band_stop_filter(n, fs, {{0.0, std::nextafter(lo, 0.0)}, {std::nextafter(hi, 1e300), nyquist}}));
  f.push_back(band_stop_filter(n, fs, {{lo, hi}}));
  f.push_back(band_stop_filter(n, fs, {{lo, hi}}));
  return f;
}

AutoencoderLoss autoencoder_loss(AutoencoderParams const &params, Eigen::MatrixXd const &y,
                                 std::span<BandStopFilter const> filters, double lambda, double eps, bool want_gradient)
{
  if (lambda < 0) { throw DomainError("autoencoder loss: lambda must be nonnegative"); }
  Index const nl = static_cast<Index>(params.layers.size());
  Index const T = y.cols();
  Index const ne = params.encoder_layers;
  require_shape(y.rows() == params.input_size(), "autoencoder loss: navigator length mismatch");
  require_shape(static_cast<Index>(filters.size()) == params.latent_size(), "autoencoder loss: one filter per latent channel");
  for (auto const &f : filters) { require_shape(static_cast<Index>(f.mask.size()) == T, "autoencoder loss: filter length differs from record"); }

  // Forward pass, keeping every activation.
  std::vector<Eigen::MatrixXd> act{y};
  for (Index l = 0; l < nl; l++) {
    Eigen::MatrixXd a = params.layers[l].w * act.back();
    a.colwise() += params.layers[l].b;
    if (params.layers[l].tanh) { a = a.array().tanh(); }
    act.push_back(std::move(a));
  }
  AutoencoderLoss out;
  out.z = act[ne];

  // Data term in the temporal Fourier domain.
  Index const nav = y.rows();
  Eigen::MatrixXcd r = (act.back() - y).cast<Cx>();
  Dft1d const dft_rows(T, nav, nav, 1);
  dft_rows.forward(r.data());
  Eigen::MatrixXcd g(nav, T);
  for (Index t = 0; t < T; t++) {
    for (Index i = 0; i < nav; i++) {
      double const s = std::sqrt(std::norm(r(i, t)) + eps * eps);
      out.data += s - eps;
      g(i, t) = r(i, t) / s;
    }
  }

  // Penalty on the latents.
  Index const nz = out.z.rows();
  Eigen::MatrixXcd zf = out.z.cast<Cx>();
  Dft1d const dft_z(T, nz, nz, 1);
  dft_z.forward(zf.data());
  for (Index c = 0; c < nz; c++) {
    double e = 0.0;
    for (Index k = 0; k < T; k++) {
      double const m = filters[c].mask[k];
      e += m * m * std::norm(zf(c, k));
      zf(c, k) *= m * m;
    }
    out.penalty += lambda * e / static_cast<double>(T);
  }
  out.total = out.data + out.penalty;
  if (!want_gradient) { return out; }

  // Backward pass.
  dft_rows.backward(g.data());
  Eigen::MatrixXd delta = g.real();
  dft_z.backward(zf.data());
  Eigen::MatrixXd const dz_penalty = (2.0 * lambda / static_cast<double>(T)) * zf.real();

  std::vector<Eigen::MatrixXd> dw(nl);
  std::vector<Eigen::VectorXd> db(nl);
  for (Index l = nl - 1; l >= 0; l--) {
    if (l == ne - 1) { delta += dz_penalty; }
    if (params.layers[l].tanh) { delta = (delta.array() * (1.0 - act[l + 1].array().square())).matrix(); }
    dw[l] = delta * act[l].transpose();
    db[l] = delta.rowwise().sum();
    if (l > 0) { delta = params.layers[l].w.transpose() * delta; }
  }
  out.grad.reserve(params.parameter_count());
  for (Index l = 0; l < nl; l++) {
    out.grad.insert(out.grad.end(), dw[l].data(), dw[l].data() + dw[l].size());
    out.grad.insert(out.grad.end(), db[l].data(), db[l].data() + db[l].size());
  }
  return out;
}

void to_json(nlohmann::json &j, AutoencoderConfig const &c)
{
  j = {{"hidden", c.hidden},         {"lambda", c.lambda},         {"learning_rate", c.learning_rate},
       {"epochs", c.epochs},         {"epsilon", c.epsilon},       {"resp_band_hz", {c.resp_lo_hz, c.resp_hi_hz}},
       {"seed", c.seed}};
}

void from_json(nlohmann::json const &j, AutoencoderConfig &c)
{
  for (auto const &[k, v] : j.items()) {
    if (k != "hidden" && k != "lambda" && k != "learning_rate" && k != "epochs" && k != "epsilon" && k != "resp_band_hz" &&
        k != "seed") {
      throw DomainError(fmt::format("autoencoder config: unknown key '{}'", k));
    }
  }
  read_opt(j, "hidden", c.hidden);
  read_opt(j, "lambda", c.lambda);
  read_opt(j, "learning_rate", c.learning_rate);
  read_opt(j, "epochs", c.epochs);
  read_opt(j, "epsilon", c.epsilon);
  read_opt(j, "seed", c.seed);
  if (j.contains("resp_band_hz")) {
    auto const band = j.at("resp_band_hz").get<std::array<double, 2>>();
    c.resp_lo_hz = band[0];
    c.resp_hi_hz = band[1];
  }
  if (c.lambda < 0 || !(c.learning_rate > 0) || c.epochs < 0 || !(c.epsilon > 0) || !(c.resp_hi_hz > c.resp_lo_hz)) {
    throw DomainError("autoencoder config: values out of range");
  }
}

TrainingResult train_autoencoder(Eigen::MatrixXd const &y, double frame_rate_hz, AutoencoderConfig const &cfg)
{
  if (y.cols() < 2 || y.rows() < 1) { throw DomainError("autoencoder training: empty navigator matrix"); }
  TrainingResult res;
  res.params = AutoencoderParams::init(y.rows(), cfg.hidden, 3, cfg.seed);
  auto const filters = latent_filters(y.cols(), frame_rate_hz, cfg.resp_lo_hz, cfg.resp_hi_hz);

  std::vector<double> theta = res.params.flatten();
  Adam opt(theta.size(), cfg.learning_rate);
  for (Index epoch = 0; epoch < cfg.epochs; epoch++) {
    res.params.assign(theta);
    auto const loss = autoencoder_loss(res.params, y, filters, cfg.lambda, cfg.epsilon);
    if (!std::isfinite(loss.total)) {
      throw DivergenceError(fmt::format("autoencoder training diverged at epoch {} (data {}, penalty {})", epoch, loss.data, loss.penalty));
    }
    res.loss_trace.push_back(loss.total);
    opt.step(theta, loss.grad);
    if (epoch % 100 == 0) { log_debug("autoencoder epoch {} loss {:.6g} (data {:.6g}, penalty {:.6g})", epoch, loss.total, loss.data, loss.penalty); }
  }
  res.params.assign(theta);
  res.final_loss = autoencoder_loss(res.params, y, filters, cfg.lambda, cfg.epsilon, false);
  res.latents.z = res.final_loss.z;
  for (Index t = 0; t < y.cols(); t++) { res.latents.frame_times.push_back(static_cast<double>(t) / frame_rate_hz); }
  return res;
}

double band_energy_fraction(std::span<double const> x, double fs, double lo, double hi)
{
  auto const n = static_cast<Index>(x.size());
  if (n < 2) { throw DomainError("band energy: need at least two samples"); }
  double mean = 0.0;
  for (double v : x) { mean += v; }
  mean /= static_cast<double>(n);
  std::vector<Cx> buf(n);
  for (Index i = 0; i < n; i++) { buf[i] = x[i] - mean; }
  Dft1d(n, 1, 1, 1).forward(buf.data());
  double in = 0.0, all = 0.0;
  for (Index k = 0; k < n; k++) {
    double const e = std::norm(buf[k]);
    double const f = bin_frequency(k, n, fs);
    all += e;
    if (f >= lo && f <= hi) { in += e; }
  }
  return all > 0 ? in / all : 0.0;
}

} // namespace moco5d
