#include "moco5d/generator.hpp"

#include "json_util.hpp"
#include "moco5d/io.hpp"

#include <cmath>
#include <random>

namespace moco5d {

namespace {

constexpr Index K3 = 27;

/// Stride-2 transposed convolution, kernel 3, padding 1, output padding 1:
/// input voxel i feeds output voxels 2i - 1, 2i, 2i + 1 (those inside [0, 2n)).
void tconv_forward(std::span<double const> in, Index cin, Index n, double const *w, Index cout, std::span<double> out)
{
  Index const m = 2 * n;
  Index const nin = n * n * n, nout = m * m * m;
  for (Index co = 0; co < cout; co++) {
    double *o = out.data() + co * nout;
    for (Index ci = 0; ci < cin; ci++) {
      double const *a = in.data() + ci * nin;
      for (Index k = 0; k < K3; k++) {
        double const wv = w[(ci * cout + co) * K3 + k];
        if (wv == 0.0) continue;
        Index const kx = k / 9, ky = (k / 3) % 3, kz = k % 3;
        Index const z0 = kz == 0 ? 1 : 0;
        for (Index x = kx == 0 ? 1 : 0; x < n; x++) {
          Index const ox = 2 * x + kx - 1;
          for (Index y = ky == 0 ? 1 : 0; y < n; y++) {
            Index const oy = 2 * y + ky - 1;
            double const *ar = a + (x * n + y) * n;
            double *orow = o + (ox * m + oy) * m + kz - 1;
            for (Index z = z0; z < n; z++) orow[2 * z] += wv * ar[z];
          }
        }
      }
    }
  }
}

/// Reverse of tconv_forward: accumulates input and weight gradients.
void tconv_backward(std::span<double const> in, Index cin, Index n, double const *w, Index cout, std::span<double const> gout,
  std::span<double> gin, double *gw)
{
  Index const m = 2 * n;
  Index const nin = n * n * n, nout = m * m * m;
  for (Index co = 0; co < cout; co++) {
    double const *g = gout.data() + co * nout;
    for (Index ci = 0; ci < cin; ci++) {
      double const *a = in.data() + ci * nin;
      double *ga = gin.empty() ? nullptr : gin.data() + ci * nin;
      for (Index k = 0; k < K3; k++) {
        double const wv = w[(ci * cout + co) * K3 + k];
        Index const kx = k / 9, ky = (k / 3) % 3, kz = k % 3;
        Index const z0 = kz == 0 ? 1 : 0;
        double acc = 0;
        for (Index x = kx == 0 ? 1 : 0; x < n; x++) {
          Index const ox = 2 * x + kx - 1;
          for (Index y = ky == 0 ? 1 : 0; y < n; y++) {
            Index const oy = 2 * y + ky - 1;
            Index const base = (x * n + y) * n;
            double const *grow = g + (ox * m + oy) * m + kz - 1;
            for (Index z = z0; z < n; z++) {
              acc += a[base + z] * grow[2 * z];
              if (ga) ga[base + z] += wv * grow[2 * z];
            }
          }
        }
        gw[(ci * cout + co) * K3 + k] += acc;
      }
    }
  }
}

void add_bias(std::span<double> out, double const *b, Index cout)
{
  Index const per = static_cast<Index>(out.size()) / cout;
  for (Index c = 0; c < cout; c++)
    for (Index i = 0; i < per; i++) out[c * per + i] += b[c];
}

} // namespace

void to_json(nlohmann::json &j, GeneratorArchitecture const &a)
{
  j = {{"latent", a.latent}, {"seed_size", a.seed_size}, {"channels", a.channels}, {"initial_gain", a.initial_gain}};
}

void from_json(nlohmann::json const &j, GeneratorArchitecture &a)
{
  detail::reject_unknown_keys(j, "generator architecture", {"latent", "seed_size", "channels", "initial_gain"});
  detail::read_opt(j, "latent", a.latent);
  detail::read_opt(j, "seed_size", a.seed_size);
  detail::read_opt(j, "channels", a.channels);
  detail::read_opt(j, "initial_gain", a.initial_gain);
  if (a.latent < 1 || a.seed_size < 1 || a.channels.empty() || !std::isfinite(a.initial_gain)) {
    throw DomainError("generator architecture: values out of range");
  }
  for (Index c : a.channels) {
    if (c < 1) throw DomainError("generator architecture: channel counts must be positive");
  }
}

struct Generator::Activations
{
  std::vector<std::vector<double>> a; // a[i] is the input of conv stage i
  std::vector<double> out;            // linear output of the last stage
};

Generator::Generator(GeneratorArchitecture arch, Dims volume_dims, Index control_spacing, std::uint64_t seed)
  : arch_(std::move(arch))
  , volume_dims_(volume_dims)
  , control_dims_(DeformationField::control_dims_for(volume_dims, control_spacing))
  , spacing_(control_spacing)
{
  if (arch_.latent < 1 || arch_.seed_size < 1 || arch_.channels.empty()) {
    throw DomainError("generator: invalid architecture");
  }
  Index const n_out = arch_.output_size();
  for (int d = 0; d < 3; d++) {
    if (control_dims_[d] > n_out) {
      throw ShapeError(fmt::format("generator output {}^3 cannot cover control grid {}", n_out, to_string(control_dims_)));
    }
  }

  Index off = 0;
  Index const s3 = arch_.seed_size * arch_.seed_size * arch_.seed_size;
  dense_ = {off, off + arch_.channels[0] * s3 * arch_.latent, arch_.latent, arch_.channels[0], 1};
  off = dense_.b + arch_.channels[0] * s3;
  Index n = arch_.seed_size;
  for (Index i = 0; i < arch_.stages(); i++) {
    Index const cin = arch_.channels[i];
    Index const cout = i + 1 < arch_.stages() ? arch_.channels[i + 1] : 3;
    Layout l{off, off + cin * cout * K3, cin, cout, n};
    off = l.b + cout;
    convs_.push_back(l);
    n *= 2;
  }
  theta_.assign(off + 1, 0.0);
  theta_.back() = arch_.initial_gain;

  std::mt19937_64 rng(seed);
  double const dense_limit = std::sqrt(6.0 / static_cast<double>(arch_.latent + arch_.channels[0] * s3));
  std::uniform_real_distribution<double> ud(-dense_limit, dense_limit);
  for (Index i = dense_.w; i < dense_.b; i++) theta_[i] = ud(rng);
  // Hidden stages: each output sums about cin * 27 / 8 inputs, so this uniform
  // range keeps activation variance roughly constant through the stack.
  for (size_t s = 0; s + 1 < convs_.size(); s++) {
    double const limit = std::sqrt(3.0 * 8.0 / static_cast<double>(convs_[s].cin * K3));
    std::uniform_real_distribution<double> uc(-limit, limit);
    for (Index i = convs_[s].w; i < convs_[s].b; i++) theta_[i] = uc(rng);
  }
}

void Generator::check_latent(std::span<double const> z) const
{
  if (static_cast<Index>(z.size()) != arch_.latent) {
    throw ShapeError(fmt::format("generator: latent has {} entries, expected {}", z.size(), arch_.latent));
  }
}

void Generator::forward(std::span<double const> z, Activations &act) const
{
  check_latent(z);
  Index const s3 = arch_.seed_size * arch_.seed_size * arch_.seed_size;
  Index const nd = arch_.channels[0] * s3;
  act.a.assign(convs_.size(), {});
  auto &a0 = act.a[0];
  a0.resize(nd);
  for (Index o = 0; o < nd; o++) {
    double p = theta_[dense_.b + o];
    for (Index i = 0; i < arch_.latent; i++) p += theta_[dense_.w + o * arch_.latent + i] * z[i];
    a0[o] = std::tanh(p);
  }
  for (size_t s = 0; s < convs_.size(); s++) {
    auto const &l = convs_[s];
    Index const m = 2 * l.in_size;
    std::vector<double> out(l.cout * m * m * m, 0.0);
    tconv_forward(act.a[s], l.cin, l.in_size, theta_.data() + l.w, l.cout, out);
    add_bias(out, theta_.data() + l.b, l.cout);
    if (s + 1 < convs_.size()) {
      for (auto &v : out) v = std::tanh(v);
      act.a[s + 1] = std::move(out);
    } else {
      act.out = std::move(out);
    }
  }
}

DeformationField Generator::generate(std::span<double const> z) const
{
  Activations act;
  forward(z, act);
  DeformationField f(volume_dims_, spacing_);
  Index const m = arch_.output_size();
  double const g = gain();
  auto const cd = control_dims_;
  for (int d = 0; d < 3; d++) {
    for (Index x = 0; x < cd.nx; x++)
      for (Index y = 0; y < cd.ny; y++)
        for (Index zz = 0; zz < cd.nz; zz++) f.at(d, x, y, zz) = g * act.out[((d * m + x) * m + y) * m + zz];
  }
  return f;
}

GeneratorGradients Generator::vjp(std::span<double const> z, DeformationField const &cotangent) const
{
  if (cotangent.control_dims() != control_dims_) { throw ShapeError("generator vjp: cotangent shape mismatch"); }
  Activations act;
  forward(z, act);
  GeneratorGradients g{std::vector<double>(theta_.size(), 0.0), std::vector<double>(arch_.latent, 0.0)};

  Index const m = arch_.output_size();
  double const gain = this->gain();
  auto const cd = control_dims_;
  std::vector<double> gout(act.out.size(), 0.0);
  double g_gain = 0;
  for (int d = 0; d < 3; d++) {
    auto const &c = cotangent.component(d);
    for (Index x = 0; x < cd.nx; x++)
      for (Index y = 0; y < cd.ny; y++)
        for (Index zz = 0; zz < cd.nz; zz++) {
          Index const o = ((d * m + x) * m + y) * m + zz;
          double const cv = c[cd.index(x, y, zz)];
          g_gain += cv * act.out[o];
          gout[o] = gain * cv;
        }
  }
  g.params.back() = g_gain;

  for (Index s = static_cast<Index>(convs_.size()) - 1; s >= 0; s--) {
    auto const &l = convs_[s];
    Index const per = static_cast<Index>(gout.size()) / l.cout;
    for (Index c = 0; c < l.cout; c++) {
      double acc = 0;
      for (Index i = 0; i < per; i++) acc += gout[c * per + i];
      g.params[l.b + c] += acc;
    }
    std::vector<double> gin(act.a[s].size(), 0.0);
    tconv_backward(act.a[s], l.cin, l.in_size, theta_.data() + l.w, l.cout, gout, gin, g.params.data() + l.w);
    // Through the tanh that produced this stage's input.
    for (size_t i = 0; i < gin.size(); i++) gin[i] *= 1.0 - act.a[s][i] * act.a[s][i];
    gout = std::move(gin);
  }

  Index const nd = static_cast<Index>(gout.size());
  for (Index o = 0; o < nd; o++) {
    g.params[dense_.b + o] += gout[o];
    for (Index i = 0; i < arch_.latent; i++) {
      g.params[dense_.w + o * arch_.latent + i] += gout[o] * z[i];
      g.z[i] += gout[o] * theta_[dense_.w + o * arch_.latent + i];
    }
  }
  return g;
}

DeformationField Generator::jvp(std::span<double const> z, std::span<double const> d_params, std::span<double const> d_z) const
{
  check_latent(z);
  check_latent(d_z);
  if (d_params.size() != theta_.size()) { throw ShapeError("generator jvp: parameter tangent size mismatch"); }
  Activations act;
  forward(z, act);

  Index const nd = static_cast<Index>(act.a[0].size());
  std::vector<double> t(nd);
  for (Index o = 0; o < nd; o++) {
    double dp = d_params[dense_.b + o];
    for (Index i = 0; i < arch_.latent; i++) {
      dp += d_params[dense_.w + o * arch_.latent + i] * z[i] + theta_[dense_.w + o * arch_.latent + i] * d_z[i];
    }
    t[o] = (1.0 - act.a[0][o] * act.a[0][o]) * dp;
  }
  for (size_t s = 0; s < convs_.size(); s++) {
    auto const &l = convs_[s];
    Index const m = 2 * l.in_size;
    std::vector<double> dt(l.cout * m * m * m, 0.0);
    tconv_forward(t, l.cin, l.in_size, theta_.data() + l.w, l.cout, dt);
    tconv_forward(act.a[s], l.cin, l.in_size, d_params.data() + l.w, l.cout, dt);
    add_bias(dt, d_params.data() + l.b, l.cout);
    if (s + 1 < convs_.size()) {
      auto const &a = act.a[s + 1];
      for (size_t i = 0; i < dt.size(); i++) dt[i] *= 1.0 - a[i] * a[i];
    }
    t = std::move(dt);
  }

  DeformationField f(volume_dims_, spacing_);
  Index const m = arch_.output_size();
  double const g = gain(), dg = d_params.back();
  auto const cd = control_dims_;
  for (int d = 0; d < 3; d++) {
    for (Index x = 0; x < cd.nx; x++)
      for (Index y = 0; y < cd.ny; y++)
        for (Index zz = 0; zz < cd.nz; zz++) {
          Index const o = ((d * m + x) * m + y) * m + zz;
          f.at(d, x, y, zz) = g * t[o] + dg * act.out[o];
        }
  }
  return f;
}

void Generator::save(std::filesystem::path const &stem) const
{
  auto blob = stem;
  blob += ".bin";
  io::write_doubles(blob, theta_);
  auto manifest = stem;
  manifest += ".json";
  io::write_json(manifest, {{"format", "moco5d-generator"},
                             {"version", 1},
                             {"architecture", arch_},
                             {"volume_dims", {volume_dims_.nx, volume_dims_.ny, volume_dims_.nz}},
                             {"control_spacing", spacing_},
                             {"parameter_count", theta_.size()},
                             {"blob", blob.filename().string()}});
}

Generator Generator::load(std::filesystem::path const &stem)
{
  auto manifest = stem;
  manifest += ".json";
  auto const j = io::read_json(manifest);
  detail::reject_unknown_keys(
    j, "generator checkpoint", {"format", "version", "architecture", "volume_dims", "control_spacing", "parameter_count", "blob"});
  if (j.at("format") != "moco5d-generator" || j.at("version") != 1) {
    throw Error(fmt::format("{}: not a version 1 generator checkpoint", manifest.string()));
  }
  auto const vd = j.at("volume_dims").get<std::array<Index, 3>>();
  Generator g(j.at("architecture").get<GeneratorArchitecture>(), Dims{vd[0], vd[1], vd[2]}, j.at("control_spacing").get<Index>(), 0);
  auto theta = io::read_doubles(stem.parent_path() / j.at("blob").get<std::string>());
  if (theta.size() != g.theta_.size() || j.at("parameter_count").get<size_t>() != theta.size()) {
    throw ShapeError(fmt::format("{}: parameter count does not match the architecture", manifest.string()));
  }
  g.theta_ = std::move(theta);
  return g;
}

} // namespace moco5d
