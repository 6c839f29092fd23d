#include "moco5d/moco.hpp"

#include "json_util.hpp"
#include "moco5d/adam.hpp"
#include "moco5d/io.hpp"
#include "moco5d/log.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>

namespace moco5d {

std::vector<MotionGroup> pool_frames(Trajectory const &traj, std::span<KSpaceFrame const> frames,
  std::vector<std::vector<Index>> const &groups, Eigen::MatrixXd const &latents, SampleWeighting weighting)
{
  Index const T = static_cast<Index>(frames.size());
  if (traj.frame_count() < T) { throw ShapeError("pool_frames: trajectory has fewer frames than the data"); }
  if (latents.cols() != static_cast<Index>(groups.size())) { throw ShapeError("pool_frames: one latent per group required"); }
  Index const spf = traj.samples_per_frame();
  Index const nc = T > 0 ? frames[0].ncoils : 0;

  // Every frame has the same readout positions along its spokes, so all frames'
  // density weights have the same sum; normalize them to mean 1.
  double scale = 1.0;
  if (T > 0) {
    auto const w0 = radial_density_weights(traj.frame(0), T * traj.spokes_per_frame, traj.samples_per_spoke);
    scale = static_cast<double>(spf) / std::accumulate(w0.begin(), w0.end(), 0.0);
  }

  std::vector<MotionGroup> out(groups.size());
  for (size_t g = 0; g < groups.size(); g++) {
    auto &mg = out[g];
    mg.frames = groups[g];
    if (mg.frames.empty()) { throw DomainError(fmt::format("pool_frames: group {} is empty", g)); }
    Index const ns = spf * static_cast<Index>(mg.frames.size());
    mg.data = KSpaceFrame(nc, ns);
    mg.k.reserve(ns);
    mg.density.reserve(ns);
    Index off = 0;
    for (Index t : mg.frames) {
      if (t < 0 || t >= T) { throw DomainError(fmt::format("pool_frames: frame {} out of range", t)); }
      auto const &f = frames[t];
      if (f.ncoils != nc || f.nsamples != spf) { throw ShapeError("pool_frames: frame sample layout mismatch"); }
      auto const k = traj.frame(t);
      mg.k.insert(mg.k.end(), k.begin(), k.end());
      auto const d = radial_density_weights(k, T * traj.spokes_per_frame, traj.samples_per_spoke);
      for (double v : d) mg.density.push_back(v * scale);
      for (Index c = 0; c < nc; c++) std::copy(f.coil(c).begin(), f.coil(c).end(), mg.data.coil(c).begin() + off);
      off += spf;
    }
    mg.weights = weighting == SampleWeighting::density ? mg.density : std::vector<double>(ns, 1.0);
    mg.latent.assign(latents.col(g).data(), latents.col(g).data() + latents.rows());
  }
  return out;
}

MocoProblem::MocoProblem(std::vector<MotionGroup> groups, CoilMaps maps, double spacing, NufftOptions opt)
  : groups_(std::move(groups))
  , maps_(std::move(maps))
  , spacing_(spacing)
{
  maps_.validate();
  for (auto const &g : groups_) {
    if (g.data.ncoils != maps_.ncoils()) { throw ShapeError("moco problem: group coil count does not match maps"); }
    if (g.data.nsamples != static_cast<Index>(g.k.size()) || g.weights.size() != g.k.size() ||
        g.density.size() != g.k.size()) {
      throw ShapeError("moco problem: group samples, trajectory and weights differ in length");
    }
    ops_.emplace_back(dims(), g.k, opt);
  }
}

double MocoProblem::data_energy() const
{
  double s = 0;
  for (auto const &g : groups_) {
    for (Index c = 0; c < g.data.ncoils; c++) {
      auto const b = g.data.coil(c);
      for (Index i = 0; i < g.data.nsamples; i++) s += g.weights[i] * std::norm(b[i]);
    }
  }
  return s;
}

void MocoProblem::forward_coils(ComplexVolume const &x, Index n, std::vector<Cx> &out) const
{
  Index const ns = groups_[n].data.nsamples;
  out.assign(maps_.ncoils() * ns, Cx{});
  for (Index c = 0; c < maps_.ncoils(); c++) {
    ops_[n].forward_weighted(x.data(), maps_.maps[c].data(), std::span<Cx>(out.data() + c * ns, ns));
  }
}

void MocoProblem::adjoint_coils(std::vector<Cx> const &samples, Index n, ComplexVolume &acc) const
{
  Index const ns = groups_[n].data.nsamples;
  for (Index c = 0; c < maps_.ncoils(); c++) {
    ops_[n].adjoint_accumulate(std::span<Cx const>(samples.data() + c * ns, ns), maps_.maps[c].data(), acc.data());
  }
}

double MocoProblem::objective(ComplexVolume const &eta, Warper const &w, Index n) const
{
  auto const &g = groups_.at(n);
  std::vector<Cx> y;
  forward_coils(w.apply(eta), n, y);
  double v = 0;
  Index const ns = g.data.nsamples;
  for (Index c = 0; c < g.data.ncoils; c++)
    for (Index i = 0; i < ns; i++) v += g.weights[i] * std::norm(y[c * ns + i] - g.data.samples[c * ns + i]);
  return v;
}

MocoValue MocoProblem::objective(ComplexVolume const &eta, Generator const &gen, Index n, bool gradients) const
{
  require_shape(eta.dims() == dims(), "moco objective: template dims do not match coil maps");
  auto const &g = groups_.at(n);
  auto const field = gen.generate(g.latent);
  Warper const w(field);
  std::vector<Cx> r;
  forward_coils(w.apply(eta), n, r);
  MocoValue out;
  Index const ns = g.data.nsamples;
  for (Index c = 0; c < g.data.ncoils; c++) {
    for (Index i = 0; i < ns; i++) {
      Cx &ri = r[c * ns + i];
      ri -= g.data.samples[c * ns + i];
      out.value += g.weights[i] * std::norm(ri);
      ri *= 2.0 * g.weights[i];
    }
  }
  if (!gradients) return out;

  ComplexVolume gx(dims(), spacing_);
  adjoint_coils(r, n, gx);
  DenseField g_disp;
  w.vjp(eta, gx, out.grad_template, g_disp);
  out.grad_params = gen.vjp(g.latent, field.evaluate_adjoint(g_disp)).params;
  return out;
}

double MocoProblem::total_objective(ComplexVolume const &eta, Generator const &gen) const
{
  double s = 0;
  for (Index n = 0; n < size(); n++) s += objective(eta, gen, n, false).value;
  return s;
}

std::vector<Warper> MocoProblem::warpers(Generator const &gen) const
{
  std::vector<Warper> w;
  w.reserve(groups_.size());
  for (auto const &g : groups_) w.emplace_back(gen.generate(g.latent));
  return w;
}

ComplexVolume MocoProblem::group_normal(ComplexVolume const &x, Warper const &w, Index n) const
{
  std::vector<Cx> y;
  forward_coils(w.apply(x), n, y);
  Index const ns = groups_.at(n).data.nsamples;
  for (Index c = 0; c < maps_.ncoils(); c++)
    for (Index i = 0; i < ns; i++) y[c * ns + i] *= groups_[n].weights[i];
  ComplexVolume a(dims(), spacing_);
  adjoint_coils(y, n, a);
  return w.apply_adjoint(a);
}

ComplexVolume MocoProblem::normal(ComplexVolume const &x, std::span<Warper const> w) const
{
  require_shape(static_cast<Index>(w.size()) == size(), "moco normal: one warp per group required");
  ComplexVolume acc(dims(), spacing_);
  for (Index n = 0; n < size(); n++) acc += group_normal(x, w[n], n);
  return acc;
}

ComplexVolume MocoProblem::normal_rhs(std::span<Warper const> w) const
{
  require_shape(static_cast<Index>(w.size()) == size(), "moco rhs: one warp per group required");
  ComplexVolume acc(dims(), spacing_);
  for (Index n = 0; n < size(); n++) {
    auto const &g = groups_[n];
    std::vector<Cx> y(g.data.samples);
    Index const ns = g.data.nsamples;
    for (Index c = 0; c < g.data.ncoils; c++)
      for (Index i = 0; i < ns; i++) y[c * ns + i] *= g.weights[i];
    ComplexVolume a(dims(), spacing_);
    adjoint_coils(y, n, a);
    acc += w[n].apply_adjoint(a);
  }
  return acc;
}

ComplexVolume MocoProblem::averaged_adjoint() const
{
  ComplexVolume acc(dims(), spacing_);
  for (Index n = 0; n < size(); n++) {
    auto const &g = groups_[n];
    std::vector<Cx> y(g.data.samples);
    Index const ns = g.data.nsamples;
    for (Index c = 0; c < g.data.ncoils; c++)
      for (Index i = 0; i < ns; i++) y[c * ns + i] *= g.density[i];
    adjoint_coils(y, n, acc);
  }
  return acc;
}

ComplexVolume MocoProblem::solve_template(
  ComplexVolume x, std::span<Warper const> w, Index iterations, std::vector<double> *residuals) const
{
  require_shape(x.dims() == dims(), "template solve: initial guess dims mismatch");
  ComplexVolume r = normal_rhs(w);
  r -= normal(x, w);
  ComplexVolume p = r;
  double rr = norm2(r.data());
  double const rr0 = rr;
  if (residuals) residuals->push_back(std::sqrt(rr));
  for (Index it = 0; it < iterations && rr > 1e-30 * rr0 && rr > 0; it++) {
    ComplexVolume const q = normal(p, w);
    double const pq = real_dot(p.data(), q.data());
    if (!(pq > 0)) break;
    double const alpha = rr / pq;
    for (Index i = 0; i < x.size(); i++) {
      x[i] += alpha * p[i];
      r[i] -= alpha * q[i];
    }
    double const rr_new = norm2(r.data());
    if (!std::isfinite(rr_new)) { throw DivergenceError("template CG produced a non-finite residual"); }
    double const beta = rr_new / rr;
    rr = rr_new;
    for (Index i = 0; i < x.size(); i++) p[i] = r[i] + beta * p[i];
    if (residuals) residuals->push_back(std::sqrt(rr));
  }
  return x;
}

namespace {

char const *schedule_name(MocoSchedule s) { return s == MocoSchedule::alternating ? "alternating" : "joint"; }
char const *weighting_name(SampleWeighting w) { return w == SampleWeighting::density ? "density" : "uniform"; }

/// Largest eigenvalue of group n's normal operator with no motion, by power iteration.
double group_lipschitz(MocoProblem const &p, Index n, Index iterations)
{
  Warper const id{DenseField(p.dims())};
  ComplexVolume x(p.dims(), p.spacing());
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g;
  for (auto &v : x.data()) v = Cx(g(rng), g(rng));
  double lambda = 0;
  for (Index it = 0; it < iterations; it++) {
    x *= 1.0 / x.norm();
    ComplexVolume const y = p.group_normal(x, id, n);
    lambda = real_dot(x.data(), y.data());
    x = y;
  }
  return lambda;
}

/// Complex least-squares scale a minimizing sum_n ||a A_n x - b_n||_W^2 for static x.
ComplexVolume fit_scale(MocoProblem const &p, ComplexVolume x)
{
  std::vector<Warper> w;
  for (Index n = 0; n < p.size(); n++) w.emplace_back(DenseField(p.dims()));
  ComplexVolume const rhs = p.normal_rhs(w);
  ComplexVolume const nx = p.normal(x, w);
  Cx const num = dot(x.data(), rhs.data());
  double const den = real_dot(x.data(), nx.data());
  if (den > 0) x *= num / den;
  return x;
}

} // namespace

void MocoConfig::validate() const
{
  if (clusters < 1) throw DomainError("moco config: clusters must be positive");
  if (epochs < 0 || template_interval < 1 || template_iterations < 0 || initial_template_iterations < 0) {
    throw DomainError("moco config: negative budget");
  }
  if (!(motion_learning_rate > 0) || !(template_step > 0)) throw DomainError("moco config: step sizes must be positive");
  if (control_spacing < 1) throw DomainError("moco config: control spacing must be positive");
}

void to_json(nlohmann::json &j, MocoConfig const &c)
{
  j = {{"clusters", c.clusters},
    {"epochs", c.epochs},
    {"schedule", schedule_name(c.schedule)},
    {"template_interval", c.template_interval},
    {"template_iterations", c.template_iterations},
    {"initial_template_iterations", c.initial_template_iterations},
    {"motion_learning_rate", c.motion_learning_rate},
    {"template_step", c.template_step},
    {"weighting", weighting_name(c.weighting)},
    {"generator", c.generator},
    {"control_spacing", c.control_spacing},
    {"seed", c.seed}};
}

void from_json(nlohmann::json const &j, MocoConfig &c)
{
  detail::reject_unknown_keys(j, "moco config",
    {"clusters", "epochs", "schedule", "template_interval", "template_iterations", "initial_template_iterations",
      "motion_learning_rate", "template_step", "weighting", "generator", "control_spacing", "seed"});
  detail::read_opt(j, "clusters", c.clusters);
  detail::read_opt(j, "epochs", c.epochs);
  if (j.contains("schedule")) {
    auto const s = j.at("schedule").get<std::string>();
    if (s != "alternating" && s != "joint") throw DomainError(fmt::format("moco config: unknown schedule '{}'", s));
    c.schedule = s == "joint" ? MocoSchedule::joint : MocoSchedule::alternating;
  }
  detail::read_opt(j, "template_interval", c.template_interval);
  detail::read_opt(j, "template_iterations", c.template_iterations);
  detail::read_opt(j, "initial_template_iterations", c.initial_template_iterations);
  detail::read_opt(j, "motion_learning_rate", c.motion_learning_rate);
  detail::read_opt(j, "template_step", c.template_step);
  if (j.contains("weighting")) {
    auto const s = j.at("weighting").get<std::string>();
    if (s != "density" && s != "uniform") throw DomainError(fmt::format("moco config: unknown weighting '{}'", s));
    c.weighting = s == "density" ? SampleWeighting::density : SampleWeighting::uniform;
  }
  detail::read_opt(j, "generator", c.generator);
  detail::read_opt(j, "control_spacing", c.control_spacing);
  detail::read_opt(j, "seed", c.seed);
  c.validate();
}

ReconResult reconstruct(MocoProblem const &problem, MocoConfig const &cfg, ReconCheckpoint checkpoint, Index checkpoint_interval)
{
  cfg.validate();
  Index const N = problem.size();
  if (N < 1) throw DomainError("reconstruct: no motion groups");
  ReconResult res;
  res.config = cfg;
  res.generator = Generator(cfg.generator, problem.dims(), cfg.control_spacing, cfg.seed);
  res.normalization = LatentNormalization::identity(cfg.generator.latent);
  res.centroids.resize(static_cast<Index>(problem.group(0).latent.size()), N);
  for (Index n = 0; n < N; n++) {
    auto const &z = problem.group(n).latent;
    if (static_cast<Index>(z.size()) != res.generator.architecture().latent) {
      throw ShapeError("reconstruct: group latent size does not match the generator");
    }
    for (size_t c = 0; c < z.size(); c++) res.centroids(static_cast<Index>(c), n) = z[c];
    res.members.push_back(problem.group(n).frames);
  }

  res.eta = fit_scale(problem, problem.averaged_adjoint());
  {
    auto const w = problem.warpers(res.generator);
    res.eta = problem.solve_template(res.eta, w, cfg.initial_template_iterations);
  }
  log_info("moco: initial objective {:.6g} (data energy {:.6g})", problem.total_objective(res.eta, res.generator),
    problem.data_energy());

  double eta_step = 0;
  if (cfg.schedule == MocoSchedule::joint) {
    double lmax = 0;
    for (Index n = 0; n < N; n++) lmax = std::max(lmax, group_lipschitz(problem, n, 8));
    eta_step = cfg.template_step / (2.0 * lmax);
  }

  Adam adam(res.generator.params().size(), cfg.motion_learning_rate);
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<Index> order(N);
  std::iota(order.begin(), order.end(), 0);
  for (Index epoch = 0; epoch < cfg.epochs; epoch++) {
    std::shuffle(order.begin(), order.end(), rng);
    double sum = 0;
    for (Index n : order) {
      auto const v = problem.objective(res.eta, res.generator, n, true);
      if (!std::isfinite(v.value)) {
        throw DivergenceError(fmt::format("moco: non-finite objective at epoch {} group {} (generator gain {})", epoch, n,
          res.generator.gain()));
      }
      sum += v.value;
      adam.step(res.generator.params(), v.grad_params);
      if (cfg.schedule == MocoSchedule::joint) {
        for (Index i = 0; i < res.eta.size(); i++) res.eta[i] -= eta_step * v.grad_template[i];
      }
    }
    res.loss_trace.push_back(sum);
    if (cfg.schedule == MocoSchedule::alternating && (epoch + 1) % cfg.template_interval == 0) {
      auto const w = problem.warpers(res.generator);
      res.eta = problem.solve_template(res.eta, w, cfg.template_iterations);
    }
    log_info("moco: epoch {} objective {:.6g}", epoch, sum);
    if (checkpoint && checkpoint_interval > 0 && (epoch + 1) % checkpoint_interval == 0) {
      res.fields.clear();
      checkpoint(res, epoch + 1);
    }
  }

  res.fields.clear();
  for (Index n = 0; n < N; n++) res.fields.push_back(res.generator.generate(problem.group(n).latent));
  return res;
}

ReconResult reconstruct(Trajectory const &traj, std::span<KSpaceFrame const> frames, CoilMaps const &maps, double spacing,
  Eigen::MatrixXd const &latents, MocoConfig const &cfg, ReconCheckpoint checkpoint, Index checkpoint_interval)
{
  cfg.validate();
  if (latents.cols() != static_cast<Index>(frames.size())) { throw ShapeError("reconstruct: one latent per frame required"); }
  auto const clusters = cluster_latents(latents, cfg.clusters, cfg.seed);
  MocoProblem problem(pool_frames(traj, frames, clusters.members, clusters.centroids, cfg.weighting), maps, spacing);
  auto res = reconstruct(problem, cfg, std::move(checkpoint), checkpoint_interval);
  res.normalization = clusters.normalization;
  return res;
}

ComplexVolume synthesize_normalized(ReconResult const &r, std::span<double const> z)
{
  return Warper(r.generator.generate(z)).apply(r.eta);
}

ComplexVolume synthesize(ReconResult const &r, std::span<double const> latent)
{
  Eigen::MatrixXd z(static_cast<Index>(latent.size()), 1);
  for (size_t i = 0; i < latent.size(); i++) z(static_cast<Index>(i), 0) = latent[i];
  Eigen::VectorXd const zn = r.normalization.apply(z).col(0);
  return synthesize_normalized(r, std::span<double const>(zn.data(), zn.size()));
}

std::vector<ComplexVolume> synthesize_realtime(ReconResult const &r, Eigen::MatrixXd const &latents, std::span<Index const> frames)
{
  std::vector<ComplexVolume> out;
  out.reserve(frames.size());
  for (Index t : frames) {
    if (t < 0 || t >= latents.cols()) throw DomainError(fmt::format("synthesize: frame {} out of range", t));
    Eigen::VectorXd const z = latents.col(t);
    out.push_back(synthesize(r, std::span<double const>(z.data(), z.size())));
  }
  return out;
}

Eigen::MatrixXd projection_profile(std::span<ComplexVolume const> volumes, int axis, std::array<Index, 3> at)
{
  if (volumes.empty()) return {};
  Dims const d = volumes[0].dims();
  Eigen::MatrixXd p(d[axis], static_cast<Index>(volumes.size()));
  for (size_t t = 0; t < volumes.size(); t++) {
    require_shape(volumes[t].dims() == d, "projection profile: volume dims differ");
    for (Index i = 0; i < d[axis]; i++) {
      auto q = at;
      q[axis] = i;
      p(i, static_cast<Index>(t)) = std::abs(volumes[t](q[0], q[1], q[2]));
    }
  }
  return p;
}

void write_loss_csv(std::filesystem::path const &path, std::span<double const> loss)
{
  std::string text = "epoch,objective\n";
  for (size_t i = 0; i < loss.size(); i++) text += fmt::format("{},{:.17g}\n", i, loss[i]);
  io::write_text(path, text);
}

void write_recon(std::filesystem::path const &dir, ReconResult const &r)
{
  // Written beside the target and swapped in, so an interrupted write never
  // leaves a half-updated result behind.
  auto tmp = dir;
  tmp += ".tmp";
  std::filesystem::remove_all(tmp);
  std::filesystem::create_directories(tmp);
  io::write_volume(tmp / "template", r.eta);
  r.generator.save(tmp / "generator");
  write_loss_csv(tmp / "loss.csv", r.loss_trace);
  nlohmann::json groups = nlohmann::json::array();
  for (Index n = 0; n < r.centroids.cols(); n++) {
    std::vector<double> z(r.centroids.col(n).data(), r.centroids.col(n).data() + r.centroids.rows());
    groups.push_back({{"latent", z}, {"frames", r.members.at(n)}});
  }
  std::vector<double> mean(r.normalization.mean.data(), r.normalization.mean.data() + r.normalization.mean.size());
  std::vector<double> sd(r.normalization.sd.data(), r.normalization.sd.data() + r.normalization.sd.size());
  io::write_json(tmp / "recon.json", {{"format", "moco5d-recon"},
                                       {"version", 1},
                                       {"config", r.config},
                                       {"normalization", {{"mean", mean}, {"sd", sd}}},
                                       {"loss", r.loss_trace},
                                       {"groups", groups}});
  std::filesystem::remove_all(dir);
  std::filesystem::rename(tmp, dir);
}

ReconResult read_recon(std::filesystem::path const &dir)
{
  auto const j = io::read_json(dir / "recon.json");
  if (j.value("format", "") != "moco5d-recon" || j.value("version", 0) != 1) {
    throw Error(fmt::format("{}: not a version 1 reconstruction", (dir / "recon.json").string()));
  }
  detail::reject_unknown_keys(j, "recon.json", {"format", "version", "config", "normalization", "loss", "groups"});
  ReconResult r;
  r.config = j.at("config").get<MocoConfig>();
  r.eta = io::read_volume(dir / "template");
  r.generator = Generator::load(dir / "generator");
  r.loss_trace = j.at("loss").get<std::vector<double>>();
  auto const mean = j.at("normalization").at("mean").get<std::vector<double>>();
  auto const sd = j.at("normalization").at("sd").get<std::vector<double>>();
  r.normalization.mean = Eigen::Map<Eigen::VectorXd const>(mean.data(), static_cast<Index>(mean.size()));
  r.normalization.sd = Eigen::Map<Eigen::VectorXd const>(sd.data(), static_cast<Index>(sd.size()));
  auto const &groups = j.at("groups");
  Index const latent = r.generator.architecture().latent;
  r.centroids.resize(latent, static_cast<Index>(groups.size()));
  for (size_t n = 0; n < groups.size(); n++) {
    auto const z = groups[n].at("latent").get<std::vector<double>>();
    if (static_cast<Index>(z.size()) != latent) throw ShapeError("recon.json: group latent size does not match the generator");
    for (Index c = 0; c < latent; c++) r.centroids(c, static_cast<Index>(n)) = z[c];
    r.members.push_back(groups[n].at("frames").get<std::vector<Index>>());
    r.fields.push_back(r.generator.generate(z));
  }
  return r;
}

} // namespace moco5d
