#include "moco5d/tv_recon.hpp"

#include "json_util.hpp"
#include "moco5d/log.hpp"

#include <cmath>
#include <optional>
#include <random>

namespace moco5d {

void TvConfig::validate() const
{
  if (weight < 0) throw DomainError("tv config: weight must be non-negative");
  if (iterations < 0 || prox_iterations < 1) throw DomainError("tv config: iteration counts out of range");
  if (spatial_weight < 0) throw DomainError("tv config: spatial weight must be non-negative");
}

void to_json(nlohmann::json &j, TvConfig const &c)
{
  j = {{"weight", c.weight},
    {"iterations", c.iterations},
    {"prox_iterations", c.prox_iterations},
    {"spatial", c.spatial},
    {"spatial_weight", c.spatial_weight},
    {"weighting", c.weighting == SampleWeighting::density ? "density" : "uniform"}};
}

void from_json(nlohmann::json const &j, TvConfig &c)
{
  detail::reject_unknown_keys(j, "tv config", {"weight", "iterations", "prox_iterations", "spatial", "spatial_weight", "weighting"});
  detail::read_opt(j, "weight", c.weight);
  detail::read_opt(j, "iterations", c.iterations);
  detail::read_opt(j, "prox_iterations", c.prox_iterations);
  detail::read_opt(j, "spatial", c.spatial);
  detail::read_opt(j, "spatial_weight", c.spatial_weight);
  if (j.contains("weighting")) {
    auto const s = j.at("weighting").get<std::string>();
    if (s != "density" && s != "uniform") throw DomainError(fmt::format("tv config: unknown weighting '{}'", s));
    c.weighting = s == "density" ? SampleWeighting::density : SampleWeighting::uniform;
  }
  c.validate();
}

namespace {

struct BinGraph
{
  std::vector<std::pair<Index, Index>> edges; // (from, to) bin indices; difference x[to] - x[from]
  Index bins = 0;
  bool spatial = false;
  double spatial_weight = 1.0;

  BinGraph(Index nc, Index nr, bool sp, double sw)
    : bins(nc * nr)
    , spatial(sp)
    , spatial_weight(sw)
  {
    Index const card_edges = nc > 2 ? nc : nc - 1;
    for (Index r = 0; r < nr; r++)
      for (Index c = 0; c < card_edges; c++) edges.emplace_back(c * nr + r, ((c + 1) % nc) * nr + r);
    for (Index c = 0; c < nc; c++)
      for (Index r = 0; r + 1 < nr; r++) edges.emplace_back(c * nr + r, c * nr + r + 1);
  }

  /// Upper bound on ||D||^2: twice the largest weighted vertex degree.
  double norm_bound() const
  {
    std::vector<double> deg(bins, 0.0);
    for (auto [a, b] : edges) deg[a] += 1, deg[b] += 1;
    double m = 0;
    for (double d : deg) m = std::max(m, d);
    if (spatial) m += 6 * spatial_weight * spatial_weight;
    return 2 * m;
  }
};

/// Dual variables: one volume per bin edge, then 3 per bin for spatial differences.
using Duals = std::vector<std::vector<Cx>>;

Index spatial_offset(Dims d, int axis) { return axis == 0 ? d.ny * d.nz : (axis == 1 ? d.nz : 1); }

bool has_next(Dims d, Index i, int axis)
{
  Index const x = i / (d.ny * d.nz), y = (i / d.nz) % d.ny, z = i % d.nz;
  return axis == 0 ? x + 1 < d.nx : (axis == 1 ? y + 1 < d.ny : z + 1 < d.nz);
}

Duals apply_d(BinGraph const &g, std::span<ComplexVolume const> x)
{
  Dims const d = x[0].dims();
  Index const V = d.size();
  Duals out;
  for (auto [a, b] : g.edges) {
    std::vector<Cx> e(V);
    for (Index i = 0; i < V; i++) e[i] = x[b][i] - x[a][i];
    out.push_back(std::move(e));
  }
  if (g.spatial) {
    for (Index bin = 0; bin < g.bins; bin++) {
      for (int axis = 0; axis < 3; axis++) {
        std::vector<Cx> e(V, Cx{});
        Index const off = spatial_offset(d, axis);
        for (Index i = 0; i < V; i++)
          if (has_next(d, i, axis)) e[i] = g.spatial_weight * (x[bin][i + off] - x[bin][i]);
        out.push_back(std::move(e));
      }
    }
  }
  return out;
}

/// x = v - D^T p.
std::vector<ComplexVolume> v_minus_dt(BinGraph const &g, std::vector<ComplexVolume> const &v, Duals const &p)
{
  std::vector<ComplexVolume> x = v;
  Dims const d = v[0].dims();
  Index const V = d.size();
  for (size_t e = 0; e < g.edges.size(); e++) {
    auto [a, b] = g.edges[e];
    for (Index i = 0; i < V; i++) {
      x[b][i] -= p[e][i];
      x[a][i] += p[e][i];
    }
  }
  if (g.spatial) {
    size_t k = g.edges.size();
    for (Index bin = 0; bin < g.bins; bin++) {
      for (int axis = 0; axis < 3; axis++, k++) {
        Index const off = spatial_offset(d, axis);
        for (Index i = 0; i < V; i++) {
          if (!has_next(d, i, axis)) continue;
          Cx const w = g.spatial_weight * p[k][i];
          x[bin][i + off] -= w;
          x[bin][i] += w;
        }
      }
    }
  }
  return x;
}

/// Without spatial terms the problem decouples over voxels; solving each voxel's
/// small graph problem in registers avoids streaming every dual volume through
/// memory on each iteration. Same arithmetic as the volume-wise path.
std::vector<ComplexVolume> prox_bin_tv_voxelwise(BinGraph const &g, std::vector<ComplexVolume> v, double tau, double step,
  Index iterations)
{
  Index const V = v[0].size();
  size_t const B = static_cast<size_t>(g.bins), ne = g.edges.size();
  std::vector<Cx> vi(B), x(B), p(ne), q(ne);
  for (Index i = 0; i < V; i++) {
    for (size_t b = 0; b < B; b++) vi[b] = v[b][i];
    std::fill(p.begin(), p.end(), Cx{});
    std::fill(q.begin(), q.end(), Cx{});
    double t = 1;
    double const tau2 = tau * tau;
    for (Index it = 0; it < iterations; it++) {
      x = vi;
      for (size_t e = 0; e < ne; e++) {
        auto [a, b] = g.edges[e];
        x[b] -= q[e];
        x[a] += q[e];
      }
      double const t_next = 0.5 * (1 + std::sqrt(1 + 4 * t * t));
      double const mom = (t - 1) / t_next;
      for (size_t e = 0; e < ne; e++) {
        auto [a, b] = g.edges[e];
        Cx pn = q[e] + step * (x[b] - x[a]);
        double const m2 = std::norm(pn);
        if (m2 > tau2) pn *= tau / std::sqrt(m2);
        q[e] = pn + mom * (pn - p[e]);
        p[e] = pn;
      }
      t = t_next;
    }
    for (size_t e = 0; e < ne; e++) {
      auto [a, b] = g.edges[e];
      vi[b] -= p[e];
      vi[a] += p[e];
    }
    for (size_t b = 0; b < B; b++) v[b][i] = vi[b];
  }
  return v;
}

} // namespace

double bin_total_variation(std::span<ComplexVolume const> x, Index n_cardiac, Index n_resp, bool spatial, double spatial_weight)
{
  require_shape(static_cast<Index>(x.size()) == n_cardiac * n_resp, "bin TV: volume count does not match bins");
  BinGraph const g(n_cardiac, n_resp, spatial, spatial_weight);
  double s = 0;
  for (auto const &e : apply_d(g, x))
    for (Cx v : e) s += std::abs(v);
  return s;
}

std::vector<ComplexVolume> prox_bin_tv(std::vector<ComplexVolume> v, double tau, Index n_cardiac, Index n_resp, Index iterations,
  bool spatial, double spatial_weight)
{
  require_shape(static_cast<Index>(v.size()) == n_cardiac * n_resp, "bin TV prox: volume count does not match bins");
  BinGraph const g(n_cardiac, n_resp, spatial, spatial_weight);
  if (tau <= 0 || (g.edges.empty() && !spatial)) return v;
  double const step = 1.0 / g.norm_bound();
  Index const V = v[0].size();
  if (!spatial) return prox_bin_tv_voxelwise(g, std::move(v), tau, step, iterations);
  size_t const ne = g.edges.size() + (spatial ? 3 * g.bins : 0);
  Duals p(ne, std::vector<Cx>(V, Cx{})), q = p;
  double t = 1;
  for (Index it = 0; it < iterations; it++) {
    auto const x = v_minus_dt(g, v, q);
    auto const dx = apply_d(g, x);
    double const t_next = 0.5 * (1 + std::sqrt(1 + 4 * t * t));
    double const mom = (t - 1) / t_next;
    for (size_t e = 0; e < ne; e++) {
      for (Index i = 0; i < V; i++) {
        Cx pn = q[e][i] + step * dx[e][i];
        double const m2 = std::norm(pn);
        if (m2 > tau * tau) pn *= tau / std::sqrt(m2);
        q[e][i] = pn + mom * (pn - p[e][i]);
        p[e][i] = pn;
      }
    }
    t = t_next;
  }
  return v_minus_dt(g, v, p);
}

std::vector<MotionGroup> pool_bins(Trajectory const &traj, std::span<KSpaceFrame const> frames, BinnedDataset const &binned,
  SampleWeighting weighting)
{
  std::vector<MotionGroup> out(binned.bin_count());
  for (Index b = 0; b < binned.bin_count(); b++) {
    if (binned.bins[b].empty()) continue;
    auto g = pool_frames(traj, frames, {binned.bins[b]}, Eigen::MatrixXd::Zero(3, 1), weighting);
    out[b] = std::move(g[0]);
  }
  return out;
}

namespace {

struct BinOperators
{
  std::span<MotionGroup const> bins;
  CoilMaps const &maps;
  std::vector<std::optional<Nufft>> ops;

  BinOperators(std::span<MotionGroup const> b, CoilMaps const &m)
    : bins(b)
    , maps(m)
  {
    for (auto const &g : bins) {
      if (g.k.empty()) {
        ops.emplace_back();
      } else {
        if (g.data.ncoils != maps.ncoils()) throw ShapeError("tv recon: bin coil count does not match maps");
        ops.emplace_back(std::in_place, maps.dims(), g.k);
      }
    }
  }

  /// A_b x for every coil, coil major.
  std::vector<Cx> forward(Index b, ComplexVolume const &x) const
  {
    if (!ops[b]) return {};
    Index const ns = bins[b].data.nsamples;
    std::vector<Cx> out(ns * maps.ncoils());
    for (Index c = 0; c < maps.ncoils(); c++)
      ops[b]->forward_weighted(x.data(), maps.maps[c].data(), std::span<Cx>(out).subspan(c * ns, ns));
    return out;
  }

  /// Data term of bin b given ax = A_b x; with `grad` also returns 2 A^H W (A x - b).
  double eval(Index b, std::vector<Cx> const &ax, ComplexVolume *grad) const
  {
    if (grad) *grad = ComplexVolume(maps.dims(), 1.0);
    if (!ops[b]) return 0.0;
    auto const &g = bins[b];
    Index const ns = g.data.nsamples;
    std::vector<Cx> r(ns);
    double v = 0;
    for (Index c = 0; c < maps.ncoils(); c++) {
      auto const bc = g.data.coil(c);
      for (Index i = 0; i < ns; i++) {
        r[i] = ax[c * ns + i] - bc[i];
        v += g.weights[i] * std::norm(r[i]);
        r[i] *= 2.0 * g.weights[i];
      }
      if (grad) ops[b]->adjoint_accumulate(r, maps.maps[c].data(), grad->data());
    }
    return v;
  }

  /// Largest eigenvalue of A_b^H W A_b by power iteration.
  double max_eigenvalue(Index b, Index iterations) const
  {
    if (!ops[b]) return 0.0;
    auto const &g = bins[b];
    Index const ns = g.data.nsamples;
    ComplexVolume x(maps.dims(), 1.0);
    std::mt19937_64 rng(23);
    std::normal_distribution<double> nd;
    for (auto &v : x.data()) v = Cx(nd(rng), nd(rng));
    double lambda = 0;
    std::vector<Cx> y(ns);
    for (Index it = 0; it < iterations; it++) {
      x *= 1.0 / x.norm();
      ComplexVolume ax(x.dims(), 1.0);
      for (Index c = 0; c < maps.ncoils(); c++) {
        ops[b]->forward_weighted(x.data(), maps.maps[c].data(), y);
        for (Index i = 0; i < ns; i++) y[i] *= g.weights[i];
        ops[b]->adjoint_accumulate(y, maps.maps[c].data(), ax.data());
      }
      lambda = real_dot(x.data(), ax.data());
      x = std::move(ax);
    }
    return lambda;
  }
};

} // namespace

TvResult tv_reconstruct(std::span<MotionGroup const> bins, CoilMaps const &maps, double spacing, Index n_cardiac, Index n_resp,
  TvConfig const &cfg)
{
  cfg.validate();
  Index const B = n_cardiac * n_resp;
  require_shape(static_cast<Index>(bins.size()) == B, "tv recon: one group per bin required");
  BinOperators const ops(bins, maps);
  Dims const d = maps.dims();

  TvResult res;
  // The data term is block diagonal over bins, so its gradient's Lipschitz
  // constant is twice the largest per-bin eigenvalue; the fullest bin bounds it
  // in practice and backtracking corrects any underestimate.
  Index fullest = 0;
  for (Index b = 0; b < B; b++)
    if (bins[b].k.size() > bins[fullest].k.size()) fullest = b;
  double L = 2.0 * ops.max_eigenvalue(fullest, 12);
  if (!(L > 0)) L = 1.0;
  res.lipschitz = L;
  res.lambda = cfg.weight * L;

  using Samples = std::vector<std::vector<Cx>>; // per bin, A_b applied to a volume
  auto forward_all = [&](std::vector<ComplexVolume> const &x) {
    Samples out(B);
    for (Index b = 0; b < B; b++) out[b] = ops.forward(b, x[b]);
    return out;
  };
  auto data_term = [&](Samples const &ax, std::vector<ComplexVolume> *grad) {
    double f = 0;
    if (grad) grad->assign(B, ComplexVolume{});
    for (Index b = 0; b < B; b++) f += ops.eval(b, ax[b], grad ? &(*grad)[b] : nullptr);
    return f;
  };
  auto tv = [&](std::vector<ComplexVolume> const &x) {
    return res.lambda * bin_total_variation(x, n_cardiac, n_resp, cfg.spatial, cfg.spatial_weight);
  };

  // The operator is linear, so the extrapolated point's samples follow from the
  // samples of the iterates it combines and each iteration needs one forward and
  // one adjoint per bin (plus one forward per backtracking step).
  std::vector<ComplexVolume> x(B, ComplexVolume(d, spacing)), y = x, x_prev = x;
  Samples ax = forward_all(x), ay = ax, ax_prev = ax;
  double F_x = data_term(ax, nullptr) + tv(x);
  // Rounding in the data term scales with the data energy (the value at zero),
  // which matters once the residual itself is at rounding level.
  double const slack = 1e-12 * F_x;
  double t = 1;
  for (Index it = 0; it < cfg.iterations; it++) {
    std::vector<ComplexVolume> grad;
    double const f_y = data_term(ay, &grad);
    std::vector<ComplexVolume> z;
    Samples az;
    double f_z = 0;
    for (;;) {
      std::vector<ComplexVolume> v(B);
      for (Index b = 0; b < B; b++) {
        v[b] = y[b];
        for (Index i = 0; i < v[b].size(); i++) v[b][i] -= grad[b][i] / L;
      }
      z = prox_bin_tv(std::move(v), res.lambda / L, n_cardiac, n_resp, cfg.prox_iterations, cfg.spatial, cfg.spatial_weight);
      az = forward_all(z);
      f_z = data_term(az, nullptr);
      double lin = 0, quad = 0;
      for (Index b = 0; b < B; b++) {
        for (Index i = 0; i < z[b].size(); i++) {
          Cx const dz = z[b][i] - y[b][i];
          lin += grad[b][i].real() * dz.real() + grad[b][i].imag() * dz.imag();
          quad += std::norm(dz);
        }
      }
      if (!std::isfinite(f_z)) throw DivergenceError("tv recon: non-finite data term");
      if (f_z <= f_y + lin + 0.5 * L * quad + slack) break;
      L *= 2.0;
      if (!std::isfinite(L)) throw DivergenceError("tv recon: step size collapsed during backtracking");
      res.backtracks++;
      log_info("tv recon: step halved at iteration {} (L = {:.6g})", it, L);
    }
    double const F_z = f_z + tv(z);
    double const t_next = 0.5 * (1 + std::sqrt(1 + 4 * t * t));
    x_prev = x;
    ax_prev = ax;
    if (F_z <= F_x) {
      x = z;
      ax = az;
      F_x = F_z;
    }
    // Monotone FISTA: extrapolate from both the candidate and the accepted iterate.
    double const a1 = t / t_next, a2 = (t - 1) / t_next;
    for (Index b = 0; b < B; b++) {
      for (Index i = 0; i < x[b].size(); i++) y[b][i] = x[b][i] + a1 * (z[b][i] - x[b][i]) + a2 * (x[b][i] - x_prev[b][i]);
      for (size_t i = 0; i < ay[b].size(); i++) ay[b][i] = ax[b][i] + a1 * (az[b][i] - ax[b][i]) + a2 * (ax[b][i] - ax_prev[b][i]);
    }
    t = t_next;
    res.objective.push_back(F_x);
    log_info("tv recon: iteration {} objective {:.6g}", it, F_x);
  }
  res.bins = std::move(x);
  return res;
}

} // namespace moco5d
