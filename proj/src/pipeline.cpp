#include "moco5d/pipeline.hpp"

#include "json_util.hpp"
#include "moco5d/autoencoder.hpp"
#include "moco5d/io.hpp"
#include "moco5d/log.hpp"
#include "moco5d/metrics.hpp"
#include "moco5d/navigator.hpp"
#include "moco5d/simulate.hpp"
#include "moco5d/svg.hpp"
#include "moco5d/tv_recon.hpp"
#include "moco5d/warp.hpp"

#include <chrono>
#include <cmath>
#include <numbers>

namespace moco5d {

namespace fs = std::filesystem;

namespace {

constexpr Index checkpoint_interval = 25;
constexpr Index profile_frames = 200;

void check_format(nlohmann::json const &j, fs::path const &path, std::string_view format, int version)
{
  if (!j.is_object() || j.value("format", "") != format || j.value("version", 0) != version) {
    throw Error(fmt::format("{}: expected {} version {}", path.string(), format, version));
  }
}

std::vector<double> row(Eigen::MatrixXd const &m, Index r)
{
  std::vector<double> v(static_cast<size_t>(m.cols()));
  for (Index c = 0; c < m.cols(); c++) v[c] = m(r, c);
  return v;
}

std::vector<double> to_vector(Eigen::VectorXd const &v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd to_eigen(std::vector<double> const &v) { return Eigen::Map<Eigen::VectorXd const>(v.data(), static_cast<Index>(v.size())); }

std::array<Index, 3> heart_voxel(KTDataset const &ds)
{
  std::array<Index, 3> at{};
  Index const n[3] = {ds.grid.dims.nx, ds.grid.dims.ny, ds.grid.dims.nz};
  for (int a = 0; a < 3; a++) {
    Index const i = static_cast<Index>(std::lround(ds.phantom.heart.center_mm[a] / ds.grid.spacing_mm)) + n[a] / 2;
    at[a] = std::clamp<Index>(i, 0, n[a] - 1);
  }
  return at;
}

/// SI (last axis) magnitude profile through the heart, one column per volume.
void write_profile(fs::path const &dir, KTDataset const &ds, std::span<ComplexVolume const> vols, Index first_frame)
{
  auto const prof = projection_profile(vols, 2, heart_voxel(ds));
  std::string csv = "frame";
  for (Index z = 0; z < prof.rows(); z++) csv += fmt::format(",z{}", z);
  csv += "\n";
  for (Index t = 0; t < prof.cols(); t++) {
    csv += fmt::format("{}", first_frame + t);
    for (Index z = 0; z < prof.rows(); z++) csv += fmt::format(",{:.9g}", prof(z, t));
    csv += "\n";
  }
  io::write_text(dir / "profile.csv", csv);
  svg::write(dir / "profile.svg",
    svg::heatmap(prof, "Profile through the heart along SI", fmt::format("frame (from {})", first_frame), "SI position"));
}

std::vector<Index> frame_range(Index first, Index count, Index T)
{
  if (first < 0 || first >= T) throw DomainError(fmt::format("frame {} out of range (dataset has {} frames)", first, T));
  std::vector<Index> f;
  for (Index t = first; t < std::min(T, first + count); t++) f.push_back(t);
  return f;
}

struct Summary
{
  std::vector<std::optional<double>> per_bin;
  double mean = 0;
  double worst = 0;
};

Summary summarize(std::vector<std::optional<double>> v, bool higher_is_better = true)
{
  Summary s{std::move(v), 0, higher_is_better ? INFINITY : -INFINITY};
  Index n = 0;
  for (auto const &x : s.per_bin) {
    if (!x) continue;
    s.mean += *x;
    s.worst = higher_is_better ? std::min(s.worst, *x) : std::max(s.worst, *x);
    n++;
  }
  s.mean = n ? s.mean / static_cast<double>(n) : NAN;
  if (!n) s.worst = NAN;
  return s;
}

nlohmann::json to_json_opt(std::vector<std::optional<double>> const &v)
{
  auto j = nlohmann::json::array();
  for (auto const &x : v) j.push_back(x ? nlohmann::json(*x) : nlohmann::json(nullptr));
  return j;
}

struct VolumeScores
{
  Summary roi_psnr, full_psnr, roi_ssim;
};

VolumeScores score_volumes(std::vector<std::optional<ComplexVolume>> const &vols, BinTruth const &truth, std::span<char const> mask)
{
  std::vector<std::optional<double>> roi(vols.size()), full(vols.size()), ssim(vols.size());
  for (size_t b = 0; b < vols.size(); b++) {
    if (!vols[b] || !truth.states[b]) continue;
    roi[b] = psnr(*vols[b], truth.states[b]->volume, mask);
    full[b] = psnr(*vols[b], truth.states[b]->volume);
    ssim[b] = structural_similarity(*vols[b], truth.states[b]->volume, mask);
  }
  return {summarize(roi), summarize(full), summarize(ssim)};
}

nlohmann::json scores_json(VolumeScores const &s)
{
  return {{"roi_psnr_db", to_json_opt(s.roi_psnr.per_bin)},
    {"mean_roi_psnr_db", s.roi_psnr.mean},
    {"worst_roi_psnr_db", s.roi_psnr.worst},
    {"full_psnr_db", to_json_opt(s.full_psnr.per_bin)},
    {"mean_full_psnr_db", s.full_psnr.mean},
    {"roi_ssim", to_json_opt(s.roi_ssim.per_bin)},
    {"mean_roi_ssim", s.roi_ssim.mean}};
}

DenseField centered_field(DenseField f, std::array<std::vector<double>, 3> const &mean)
{
  for (int a = 0; a < 3; a++)
    for (size_t i = 0; i < f.u[a].size(); i++) f.u[a][i] -= mean[a][i];
  return f;
}

std::array<std::vector<double>, 3> field_mean(std::vector<std::optional<DenseField>> const &fields)
{
  std::array<std::vector<double>, 3> m;
  double n = 0;
  for (auto const &f : fields) {
    if (!f) continue;
    for (int a = 0; a < 3; a++) {
      if (m[a].empty()) m[a].assign(f->u[a].size(), 0.0);
      for (size_t i = 0; i < m[a].size(); i++) m[a][i] += f->u[a][i];
    }
    n++;
  }
  for (auto &c : m)
    for (double &v : c) v /= n;
  return m;
}

std::vector<double> bin_mean_latent(Eigen::MatrixXd const &zn, std::vector<Index> const &frames)
{
  Eigen::VectorXd m = Eigen::VectorXd::Zero(zn.rows());
  for (Index t : frames) m += zn.col(t);
  m /= static_cast<double>(frames.size());
  return to_vector(m);
}

} // namespace

PipelineLayout layout_for(PipelineConfig const &cfg, fs::path const &out) { return PipelineLayout{out, cfg.dataset}; }

RoiSphere heart_roi(PhantomSpec const &s, double radius_mm) { return RoiSphere{s.heart.center_mm, radius_mm}; }

CompressedData compressed_dataset(KTDataset const &ds, PipelineConfig const &cfg)
{
  auto cd = compress_coils(ds.frames, ds.maps, ds.traj, heart_roi(ds.phantom, cfg.roi_radius_mm), cfg.compression_energy);
  log_info("coil compression: {} -> {} channels ({:.1f}% of ROI energy)", cd.compression.ncoils, cd.compression.nvirtual,
    100 * cd.compression.energy_fraction);
  return cd;
}

BinTruth bin_truth(KTDataset const &ds, BinnedDataset const &binned)
{
  if (!ds.truth) throw DomainError("bin truth: dataset has no ground truth");
  BinTruth out;
  for (auto const &frames : binned.bins) {
    if (frames.empty()) {
      out.states.emplace_back();
      out.phases.emplace_back(NAN, NAN);
      continue;
    }
    double c = 0, s = 0;
    for (Index t : frames) {
      c += std::cos(2 * std::numbers::pi * ds.truth->cardiac[t]);
      s += std::sin(2 * std::numbers::pi * ds.truth->resp[t]);
    }
    auto const n = static_cast<double>(frames.size());
    double const cardiac = std::acos(std::clamp(c / n, -1.0, 1.0)) / (2 * std::numbers::pi);
    double resp = std::asin(std::clamp(s / n, -1.0, 1.0)) / (2 * std::numbers::pi);
    if (resp < 0) resp += 1;
    out.states.push_back(phantom_volume(ds.phantom, ds.grid, cardiac, resp));
    out.phases.emplace_back(cardiac, resp);
  }
  return out;
}

std::vector<std::optional<ComplexVolume>> moco_bin_volumes(ReconResult const &r, Eigen::MatrixXd const &latents,
  BinnedDataset const &binned)
{
  auto const zn = r.normalization.apply(latents);
  std::vector<std::optional<ComplexVolume>> out;
  for (auto const &frames : binned.bins) {
    if (frames.empty()) {
      out.emplace_back();
      continue;
    }
    auto const z = bin_mean_latent(zn, frames);
    out.push_back(synthesize_normalized(r, z));
  }
  return out;
}

KTDataset stage_simulate(PipelineConfig const &cfg, PipelineLayout const &dirs)
{
  auto ds = simulate_acquisition(cfg.simulation, cfg.seed);
  write_dataset(dirs.root / "dataset", ds);
  log_info("simulate: {} frames written to {}", ds.frame_count(), (dirs.root / "dataset").string());
  return ds;
}

TrainingResult stage_latents(PipelineConfig const &cfg, PipelineLayout const &dirs)
{
  auto const ds = read_dataset(dirs.dataset());
  PreprocessOptions opt;
  opt.frame_rate_hz = 1.0 / ds.frame_seconds;
  auto const pre = preprocess_navigators(ds.nav, opt);
  auto tr = train_autoencoder(pre.y, opt.frame_rate_hz, cfg.seeded().autoencoder);
  auto const &z = tr.latents.z;

  fs::create_directories(dirs.latents());
  io::write_json(dirs.latents() / "latents.json", {{"format", "moco5d-latents"},
                                                    {"version", 1},
                                                    {"frame_seconds", ds.frame_seconds},
                                                    {"channels", {"cardiac", "resp1", "resp2"}},
                                                    {"z", {row(z, 0), row(z, 1), row(z, 2)}},
                                                    {"kept_rows", pre.kept_rows},
                                                    {"loss_trace", tr.loss_trace}});
  std::string csv = "frame,time_s,cardiac,resp1,resp2\n";
  for (Index t = 0; t < z.cols(); t++) {
    csv += fmt::format("{},{:.6f},{:.9g},{:.9g},{:.9g}\n", t, static_cast<double>(t) * ds.frame_seconds, z(0, t), z(1, t), z(2, t));
  }
  io::write_text(dirs.latents() / "latents.csv", csv);
  svg::write(dirs.latents() / "latent_traces.svg",
    svg::line_plot({{"cardiac", row(z, 0)}, {"resp1", row(z, 1)}, {"resp2", row(z, 2)}}, 0.0, ds.frame_seconds, "Latent traces",
      "time (s)"));
  return tr;
}

Eigen::MatrixXd read_latents(fs::path const &dir)
{
  auto const path = dir / "latents.json";
  auto const j = io::read_json(path);
  check_format(j, path, "moco5d-latents", 1);
  auto const rows = j.at("z").get<std::vector<std::vector<double>>>();
  if (rows.size() != 3) throw ShapeError("latents.json: expected three channels");
  Eigen::MatrixXd z(3, static_cast<Index>(rows[0].size()));
  for (Index r = 0; r < 3; r++) {
    if (rows[r].size() != rows[0].size()) throw ShapeError("latents.json: ragged channels");
    for (Index t = 0; t < z.cols(); t++) z(r, t) = rows[r][t];
  }
  return z;
}

void write_clusters(fs::path const &dir, ClusterSet const &c)
{
  fs::create_directories(dir);
  nlohmann::json centroids = nlohmann::json::array();
  for (Index n = 0; n < c.size(); n++) centroids.push_back(to_vector(c.centroids.col(n)));
  io::write_json(dir / "clusters.json", {{"format", "moco5d-clusters"},
                                          {"version", 1},
                                          {"normalization", {{"mean", to_vector(c.normalization.mean)}, {"sd", to_vector(c.normalization.sd)}}},
                                          {"centroids", centroids},
                                          {"assignment", c.assignment},
                                          {"inertia", c.inertia},
                                          {"iterations", c.iterations}});
}

ClusterSet read_clusters(fs::path const &dir)
{
  auto const path = dir / "clusters.json";
  auto const j = io::read_json(path);
  check_format(j, path, "moco5d-clusters", 1);
  ClusterSet c;
  c.normalization.mean = to_eigen(j.at("normalization").at("mean").get<std::vector<double>>());
  c.normalization.sd = to_eigen(j.at("normalization").at("sd").get<std::vector<double>>());
  auto const cents = j.at("centroids").get<std::vector<std::vector<double>>>();
  c.centroids.resize(c.normalization.mean.size(), static_cast<Index>(cents.size()));
  for (size_t n = 0; n < cents.size(); n++) {
    if (static_cast<Index>(cents[n].size()) != c.centroids.rows()) throw ShapeError("clusters.json: centroid size mismatch");
    c.centroids.col(static_cast<Index>(n)) = to_eigen(cents[n]);
  }
  c.assignment = j.at("assignment").get<std::vector<Index>>();
  c.members.assign(cents.size(), {});
  for (size_t t = 0; t < c.assignment.size(); t++) {
    Index const a = c.assignment[t];
    if (a < 0 || a >= c.size()) throw DomainError("clusters.json: assignment out of range");
    c.members[a].push_back(static_cast<Index>(t));
  }
  c.inertia = j.at("inertia").get<double>();
  c.iterations = j.at("iterations").get<Index>();
  return c;
}

ClusterSet stage_cluster(PipelineConfig const &cfg, PipelineLayout const &dirs)
{
  auto const z = read_latents(dirs.latents());
  auto c = cluster_latents(z, cfg.moco.clusters, cfg.seed);
  write_clusters(dirs.clusters(), c);
  std::vector<double> sizes;
  std::vector<std::string> labels;
  for (Index n = 0; n < c.size(); n++) {
    sizes.push_back(static_cast<double>(c.members[n].size()));
    labels.push_back(std::to_string(n));
  }
  svg::write(dirs.clusters() / "cluster_sizes.svg", svg::bar_chart(sizes, labels, "Frames per cluster"));
  log_info("cluster: {} clusters, inertia {:.6g} after {} iterations", c.size(), c.inertia, c.iterations);
  return c;
}

ReconResult stage_recon(PipelineConfig const &cfg, PipelineLayout const &dirs)
{
  auto const ds = read_dataset(dirs.dataset());
  auto const clusters = read_clusters(dirs.clusters());
  auto const cd = compressed_dataset(ds, cfg);
  auto const mcfg = cfg.seeded().moco;
  MocoProblem const problem(pool_frames(ds.traj, cd.frames, clusters.members, clusters.centroids, mcfg.weighting), cd.maps,
    ds.grid.spacing_mm);
  fs::create_directories(dirs.recon());
  auto const ckpt = [&](ReconResult const &r, Index epoch) {
    auto copy = r;
    copy.normalization = clusters.normalization;
    write_recon(dirs.recon() / "checkpoint", copy);
    log_info("recon: checkpoint at epoch {}", epoch);
  };
  auto res = reconstruct(problem, mcfg, ckpt, checkpoint_interval);
  res.normalization = clusters.normalization;
  write_recon(dirs.recon() / "result", res);
  fs::remove_all(dirs.recon() / "checkpoint");
  svg::write(dirs.recon() / "loss.svg", svg::line_plot({{"objective", res.loss_trace}}, 0, 1, "Objective per epoch", "epoch"));

  auto const z = read_latents(dirs.latents());
  auto const frames = frame_range(0, profile_frames, z.cols());
  auto const vols = synthesize_realtime(res, z, frames);
  write_profile(dirs.recon(), ds, vols, 0);
  return res;
}

std::vector<ComplexVolume> stage_binned(PipelineConfig const &cfg, PipelineLayout const &dirs)
{
  auto const ds = read_dataset(dirs.dataset());
  auto const z = read_latents(dirs.latents());
  auto const &bc = cfg.baseline;
  auto const binned = bin_frames(z, bc.n_cardiac, bc.n_resp);
  auto const cd = compressed_dataset(ds, cfg);
  auto const bins = pool_bins(ds.traj, cd.frames, binned, bc.tv.weighting);

  std::vector<double> weights = bc.weight_sweep;
  std::optional<BinTruth> truth;
  std::vector<char> mask;
  if (ds.truth && weights.size() > 1) {
    truth = bin_truth(ds, binned);
    mask = sphere_mask(ds.grid.dims, ds.grid.spacing_mm, heart_roi(ds.phantom, cfg.roi_radius_mm));
  } else {
    if (weights.size() > 1) log_warn("binned recon: no ground truth to tune against; using weight {}", bc.tv.weight);
    weights = {bc.tv.weight};
  }

  nlohmann::json sweep = nlohmann::json::array();
  std::string csv = "weight,lambda,mean_roi_psnr_db,worst_roi_psnr_db\n";
  TvResult best;
  double best_score = -INFINITY, best_weight = weights[0];
  for (double w : weights) {
    auto tcfg = bc.tv;
    tcfg.weight = w;
    auto r = tv_reconstruct(bins, cd.maps, ds.grid.spacing_mm, bc.n_cardiac, bc.n_resp, tcfg);
    double score = 0;
    if (truth) {
      std::vector<std::optional<ComplexVolume>> vols(r.bins.begin(), r.bins.end());
      auto const s = score_volumes(vols, *truth, mask).roi_psnr;
      score = s.mean;
      sweep.push_back({{"weight", w}, {"lambda", r.lambda}, {"mean_roi_psnr_db", s.mean}, {"worst_roi_psnr_db", s.worst}});
      csv += fmt::format("{:.6g},{:.9g},{:.6f},{:.6f}\n", w, r.lambda, s.mean, s.worst);
      log_info("binned recon: weight {:.4g} mean ROI PSNR {:.3f} dB (worst {:.3f})", w, s.mean, s.worst);
    }
    if (!truth || score > best_score) {
      best_score = score;
      best_weight = w;
      best = std::move(r);
    }
  }

  fs::create_directories(dirs.binned());
  io::write_complex_volumes(dirs.binned() / "bins", best.bins);
  auto const occ = binned.occupancy();
  io::write_json(dirs.binned() / "binned.json", {{"format", "moco5d-binned"},
                                                  {"version", 1},
                                                  {"n_cardiac", bc.n_cardiac},
                                                  {"n_resp", bc.n_resp},
                                                  {"occupancy", occ},
                                                  {"weight", best_weight},
                                                  {"lambda", best.lambda},
                                                  {"objective", best.objective},
                                                  {"sweep", sweep}});
  if (truth) io::write_text(dirs.binned() / "sweep.csv", csv);
  std::vector<double> occd(occ.begin(), occ.end());
  std::vector<std::string> labels;
  for (Index b = 0; b < binned.bin_count(); b++) labels.push_back(fmt::format("c{}r{}", b / bc.n_resp, b % bc.n_resp));
  svg::write(dirs.binned() / "occupancy.svg", svg::bar_chart(occd, labels, "Frames per bin (cardiac c, respiratory r)"));
  return std::move(best.bins);
}

void stage_render(PipelineConfig const &, PipelineLayout const &dirs, Index first, Index count)
{
  auto const ds = read_dataset(dirs.dataset());
  auto const r = read_recon(dirs.recon() / "result");
  auto const z = read_latents(dirs.latents());
  auto const frames = frame_range(first, count, z.cols());
  auto const vols = synthesize_realtime(r, z, frames);
  fs::create_directories(dirs.render());
  io::write_complex_volumes(dirs.render() / "frames", vols);
  write_profile(dirs.render(), ds, vols, first);
}

nlohmann::json stage_metrics(PipelineConfig const &cfg, PipelineLayout const &dirs)
{
  auto const ds = read_dataset(dirs.dataset());
  auto const z = read_latents(dirs.latents());
  auto const clusters = read_clusters(dirs.clusters());
  auto const recon = read_recon(dirs.recon() / "result");
  auto const bj = io::read_json(dirs.binned() / "binned.json");
  check_format(bj, dirs.binned() / "binned.json", "moco5d-binned", 1);
  auto const baseline_bins = io::read_complex_volumes(dirs.binned() / "bins");
  auto const &bc = cfg.baseline;
  auto const binned = bin_frames(z, bc.n_cardiac, bc.n_resp);
  double const rate = 1.0 / ds.frame_seconds;
  Index const T = z.cols();
  if (T != ds.frame_count()) throw ShapeError("metrics: latents and dataset disagree on the frame count");

  nlohmann::json rep;
  rep["format"] = "moco5d-report";
  rep["version"] = report_version;
  rep["config"] = cfg;
  rep["dataset"] = {{"frames", T},
    {"ncoils", ds.ncoils()},
    {"spokes_per_frame", ds.traj.spokes_per_frame},
    {"samples_per_spoke", ds.traj.samples_per_spoke},
    {"grid", ds.grid},
    {"has_truth", ds.truth.has_value()}};

  auto const &ae = cfg.autoencoder;
  nlohmann::json lat;
  std::vector<double> band;
  for (Index c = 0; c < 3; c++) band.push_back(band_energy_fraction(row(z, c), rate, ae.resp_lo_hz, ae.resp_hi_hz));
  lat["resp_band_energy_fraction"] = band;
  lat["cardiac_resp_band_fraction"] = band[0];
  if (ds.truth) {
    lat["cardiac_phase_corr"] = phase_correlation(row(z, 0), ds.truth->cardiac);
    lat["resp_channel_phase_corr"] = {phase_correlation(row(z, 1), ds.truth->resp), phase_correlation(row(z, 2), ds.truth->resp)};
    lat["resp_principal_phase_corr"] = phase_correlation(binned.resp_signal, ds.truth->resp);
  }
  rep["latents"] = lat;

  auto const cd = compressed_dataset(ds, cfg);
  auto const &cc = cd.compression;
  rep["compression"] = {{"ncoils", cc.ncoils},
    {"nvirtual", cc.nvirtual},
    {"target_energy", cfg.compression_energy},
    {"roi_energy_fraction", cc.energy_fraction},
    {"energy_by_count", cc.energy_by_count}};

  std::vector<Index> sizes;
  for (auto const &m : clusters.members) sizes.push_back(static_cast<Index>(m.size()));
  rep["clusters"] = {{"count", clusters.size()}, {"inertia", clusters.inertia}, {"iterations", clusters.iterations}, {"sizes", sizes}};
  rep["binning"] = {{"n_cardiac", bc.n_cardiac}, {"n_resp", bc.n_resp}, {"occupancy", binned.occupancy()}};

  double max_disp = 0;
  for (auto const &f : recon.fields) max_disp = std::max(max_disp, f.max_abs());
  nlohmann::json moco = {{"final_objective", recon.loss_trace.empty() ? NAN : recon.loss_trace.back()},
    {"epochs", static_cast<Index>(recon.loss_trace.size())},
    {"generator_gain", recon.generator.gain()},
    {"max_control_displacement_vox", max_disp}};
  nlohmann::json base = {{"weight", bj.at("weight")}, {"lambda", bj.at("lambda")}, {"sweep", bj.at("sweep")}};

  if (ds.truth) {
    auto const truth = bin_truth(ds, binned);
    auto const mask = sphere_mask(ds.grid.dims, ds.grid.spacing_mm, heart_roi(ds.phantom, cfg.roi_radius_mm));
    std::vector<std::pair<double, double>> phases = truth.phases;
    rep["binning"]["truth_phases"] = phases;

    auto const mv = moco_bin_volumes(recon, z, binned);
    auto const ms = score_volumes(mv, truth, mask);
    moco.update(scores_json(ms));

    std::vector<std::optional<ComplexVolume>> bv;
    for (size_t b = 0; b < baseline_bins.size(); b++) {
      bv.push_back(binned.bins[b].empty() ? std::nullopt : std::optional<ComplexVolume>(baseline_bins[b]));
    }
    auto const bs = score_volumes(bv, truth, mask);
    base.update(scores_json(bs));

    // Fields are relative to a template at an unknown reference state, so both
    // sides are compared after removing their mean over bins.
    auto const zn = recon.normalization.apply(z);
    std::vector<std::optional<DenseField>> est(binned.bins.size()), ref(binned.bins.size());
    for (size_t b = 0; b < binned.bins.size(); b++) {
      if (binned.bins[b].empty()) continue;
      est[b] = recon.generator.generate(bin_mean_latent(zn, binned.bins[b])).evaluate();
      ref[b] = truth.states[b]->truth;
    }
    auto const em = field_mean(est), rm = field_mean(ref);
    std::vector<std::optional<double>> epe(binned.bins.size());
    for (size_t b = 0; b < binned.bins.size(); b++) {
      if (est[b]) epe[b] = endpoint_error(centered_field(*est[b], em), centered_field(*ref[b], rm), mask);
    }
    auto const es = summarize(epe, false);
    moco["centered_epe_vox"] = to_json_opt(es.per_bin);
    moco["mean_centered_epe_vox"] = es.mean;

    // Real-time synthesis: heart-region signal against the true cardiac phase.
    auto const frames = frame_range(0, profile_frames, T);
    auto const vols = synthesize_realtime(recon, z, frames);
    auto const heart = sphere_mask(ds.grid.dims, ds.grid.spacing_mm, RoiSphere{ds.phantom.heart.center_mm, 0.5 * cfg.roi_radius_mm});
    std::vector<double> sig, ph;
    for (size_t k = 0; k < vols.size(); k++) {
      double s = 0;
      for (Index i = 0; i < vols[k].size(); i++)
        if (heart[i]) s += std::abs(vols[k][i]);
      sig.push_back(s);
      ph.push_back(ds.truth->cardiac[frames[k]]);
    }
    moco["realtime_heart_signal_cardiac_corr"] = phase_correlation(sig, ph);

    rep["comparison"] = {{"mean_roi_psnr_gap_db", ms.roi_psnr.mean - bs.roi_psnr.mean},
      {"worst_roi_psnr_gap_db", ms.roi_psnr.worst - bs.roi_psnr.worst}};
  }
  rep["moco"] = moco;
  rep["baseline"] = base;
  io::write_json(dirs.report(), rep);
  return rep;
}

nlohmann::json read_report(fs::path const &path)
{
  auto const j = io::read_json(path);
  check_format(j, path, "moco5d-report", report_version);
  detail::reject_unknown_keys(j, "report",
    {"format", "version", "config", "dataset", "latents", "compression", "clusters", "binning", "moco", "baseline", "comparison"});
  (void)j.at("config").get<PipelineConfig>();
  return j;
}

nlohmann::json run_pipeline(PipelineConfig const &cfg, fs::path const &out)
{
  cfg.validate();
  auto const dirs = layout_for(cfg, out);
  fs::create_directories(out);
  save_config(out / "config.json", cfg);
  using clock = std::chrono::steady_clock;
  nlohmann::json timings;
  auto timed = [&](char const *name, auto &&fn) {
    auto const t0 = clock::now();
    fn();
    double const s = std::chrono::duration<double>(clock::now() - t0).count();
    timings[name] = s;
    log_info("{} finished in {:.1f} s", name, s);
  };
  if (cfg.dataset.empty()) timed("simulate", [&] { stage_simulate(cfg, dirs); });
  timed("latents", [&] { stage_latents(cfg, dirs); });
  timed("cluster", [&] { stage_cluster(cfg, dirs); });
  timed("recon", [&] { stage_recon(cfg, dirs); });
  timed("binned", [&] { stage_binned(cfg, dirs); });
  nlohmann::json rep;
  timed("metrics", [&] { rep = stage_metrics(cfg, dirs); });
  // Wall-clock times vary between runs, so they live outside the report.
  io::write_json(out / "timings.json", timings);
  return rep;
}

} // namespace moco5d
