#include "moco5d/nufft.hpp"

#include "moco5d/fft.hpp"
#include "moco5d/parallel.hpp"

#include <cmath>
#include <cstring>
#include <fftw3.h>
#include <fmt/format.h>
#include <map>
#include <mutex>
#include <numbers>

namespace moco5d {

namespace {
std::mutex &planner_mutex() { return fftw_planner_mutex(); }

Index oversampled(Index n, double os)
{
  auto g = static_cast<Index>(std::ceil(n * os));
  return g + (g % 2);
}

inline Index wrap(Index j, Index n)
{
  Index const m = j % n;
  return m < 0 ? m + n : m;
}
} // namespace

// Oversampled grid plus FFTW plans for transforms of a zero-padded image: only
// the lines that can be nonzero are transformed on the first two axes.
class PaddedFft
{
public:
  struct Block
  {
    Index start;
    Index len;
  };

  PaddedFft(Dims n, Dims g)
    : n_{n}
    , g_{g}
  {
    grid_ = fftw_alloc_complex(static_cast<size_t>(g.size()));
    cart_ = fftw_alloc_complex(static_cast<size_t>(n.size()));
    for (int a = 0; a < 3; a++) {
      Index const c = n[a] / 2;
      blocks_[a] = {Block{0, n[a] - c}, Block{g[a] - c, c}};
    }
  }
  ~PaddedFft()
  {
    std::lock_guard lk(planner_mutex());
    for (auto &[k, p] : plans_) { fftw_destroy_plan(p); }
    if (cart_fwd_) { fftw_destroy_plan(cart_fwd_); }
    if (cart_bwd_) { fftw_destroy_plan(cart_bwd_); }
    fftw_free(grid_);
    fftw_free(cart_);
  }
  PaddedFft(PaddedFft const &) = delete;
  PaddedFft &operator=(PaddedFft const &) = delete;

  Dims n() const { return n_; }
  Dims g() const { return g_; }
  Cx *grid() { return reinterpret_cast<Cx *>(grid_); }
  Cx *cart() { return reinterpret_cast<Cx *>(cart_); }
  std::mutex &mutex() { return mu_; }

  void transform(int sign)
  {
    Index const gyz = g_.ny * g_.nz;
    auto run_z = [&] {
      for (auto const &bx : blocks_[0]) {
        for (auto const &by : blocks_[1]) {
          exec(plan(0, bx.len, by.len, sign), (bx.start * g_.ny + by.start) * g_.nz);
        }
      }
    };
    auto run_y = [&] {
      for (auto const &bx : blocks_[0]) { exec(plan(1, bx.len, 0, sign), bx.start * gyz); }
    };
    if (sign == FFTW_FORWARD) {
      run_z();
      run_y();
      exec(plan(2, 0, 0, sign), 0);
    } else {
      exec(plan(2, 0, 0, sign), 0);
      run_y();
      run_z();
    }
  }

  void cartesian(int sign)
  {
    auto &p = sign == FFTW_FORWARD ? cart_fwd_ : cart_bwd_;
    if (!p) {
      std::lock_guard lk(planner_mutex());
      p = fftw_plan_dft_3d(static_cast<int>(n_.nx), static_cast<int>(n_.ny), static_cast<int>(n_.nz), cart_, cart_, sign,
                           FFTW_ESTIMATE);
    }
    fftw_execute(p);
  }

private:
  void exec(fftw_plan p, Index offset) { fftw_execute_dft(p, grid_ + offset, grid_ + offset); }

  fftw_plan plan(int stage, Index l0, Index l1, int sign)
  {
    auto const key = std::make_tuple(stage, l0, l1, sign);
    if (auto it = plans_.find(key); it != plans_.end()) { return it->second; }
    int const gy = static_cast<int>(g_.ny), gz = static_cast<int>(g_.nz);
    int const gyz = gy * gz;
    fftw_iodim dim;
    std::array<fftw_iodim, 2> loops;
    int nloops = 2;
    if (stage == 0) {
      dim = {gz, 1, 1};
      loops = {fftw_iodim{static_cast<int>(l0), gyz, gyz}, fftw_iodim{static_cast<int>(l1), gz, gz}};
    } else if (stage == 1) {
      dim = {gy, gz, gz};
      loops = {fftw_iodim{static_cast<int>(l0), gyz, gyz}, fftw_iodim{gz, 1, 1}};
    } else {
      dim = {static_cast<int>(g_.nx), gyz, gyz};
      loops = {fftw_iodim{gyz, 1, 1}, fftw_iodim{}};
      nloops = 1;
    }
    std::lock_guard lk(planner_mutex());
    fftw_plan p = fftw_plan_guru_dft(1, &dim, nloops, loops.data(), grid_, grid_, sign, FFTW_ESTIMATE);
    if (!p) { throw Error("FFTW failed to create a plan"); }
    plans_[key] = p;
    return p;
  }

  Dims n_, g_;
  fftw_complex *grid_ = nullptr;
  fftw_complex *cart_ = nullptr;
  fftw_plan cart_fwd_ = nullptr, cart_bwd_ = nullptr;
  std::array<std::array<Block, 2>, 3> blocks_;
  std::map<std::tuple<int, Index, Index, int>, fftw_plan> plans_;
  std::mutex mu_;
};

namespace {

std::shared_ptr<PaddedFft> padded_fft(Dims n, Dims g)
{
  static std::mutex m;
  static std::map<std::array<Index, 6>, std::weak_ptr<PaddedFft>> cache;
  std::lock_guard lk(m);
  std::array<Index, 6> const key{n.nx, n.ny, n.nz, g.nx, g.ny, g.nz};
  if (auto p = cache[key].lock()) { return p; }
  auto p = std::make_shared<PaddedFft>(n, g);
  cache[key] = p;
  return p;
}

// Kaiser-Bessel kernel normalized to 1 at the center, in oversampled-grid units.
struct KaiserBessel
{
  double width;
  double beta;
  double i0beta;
  std::vector<double> table;
  double scale;

  KaiserBessel(int w, double os)
    : width(w)
  {
    beta = std::numbers::pi * std::sqrt((width / os) * (width / os) * (os - 0.5) * (os - 0.5) - 0.8);
    i0beta = std::cyl_bessel_i(0.0, beta);
    Index const n = 1 << 14;
    table.resize(n + 2);
    scale = n / (width / 2.0);
    for (Index i = 0; i <= n + 1; i++) {
      double const u = std::min(1.0, i / static_cast<double>(n));
      table[i] = std::cyl_bessel_i(0.0, beta * std::sqrt(std::max(0.0, 1.0 - u * u))) / i0beta;
    }
  }

  double operator()(double u) const
  {
    double const t = std::abs(u) * scale;
    auto const i = static_cast<Index>(t);
    if (i >= static_cast<Index>(table.size()) - 1) { return 0.0; }
    double const f = t - i;
    return table[i] + f * (table[i + 1] - table[i]);
  }

  // Continuous Fourier transform at nu cycles per grid cell, same normalization.
  double transform(double nu) const
  {
    double const a = std::numbers::pi * width * nu;
    double const s = beta * beta - a * a;
    double v;
    if (s > 1e-12) {
      double const r = std::sqrt(s);
      v = std::sinh(r) / r;
    } else if (s < -1e-12) {
      double const r = std::sqrt(-s);
      v = std::sin(r) / r;
    } else {
      v = 1.0;
    }
    return width * v / i0beta;
  }
};

} // namespace

Index Trajectory::frame_count() const
{
  Index const spf = samples_per_frame();
  return spf > 0 ? static_cast<Index>(points.size()) / spf : 0;
}

std::span<KPoint const> Trajectory::frame(Index t) const
{
  Index const spf = samples_per_frame();
  if (t < 0 || t >= frame_count()) { throw DomainError(fmt::format("frame {} out of range", t)); }
  return {points.data() + t * spf, static_cast<size_t>(spf)};
}

void check_nyquist(std::span<KPoint const> k)
{
  for (auto const &p : k) {
    for (double c : p) {
      if (!(std::abs(c) <= 0.5 + 1e-12)) {
        throw DomainError(fmt::format("k-space point ({}, {}, {}) outside the Nyquist box", p[0], p[1], p[2]));
      }
    }
  }
}

void CoilMaps::validate() const
{
  if (maps.empty()) { throw ShapeError("no coil maps"); }
  for (auto const &m : maps) { require_shape(m.dims() == maps[0].dims(), "coil maps with mixed dims"); }
  auto const ss = sum_of_squares();
  for (double v : ss) {
    if (!(v <= 1.0 + 1e-9)) { throw DomainError(fmt::format("coil root-sum-of-squares {} exceeds 1", std::sqrt(v))); }
  }
}

std::vector<double> CoilMaps::sum_of_squares() const
{
  std::vector<double> ss(maps.at(0).size(), 0.0);
  for (auto const &m : maps) {
    for (Index i = 0; i < m.size(); i++) { ss[i] += std::norm(m[i]); }
  }
  return ss;
}

Nufft::Nufft(Dims dims, std::span<KPoint const> k, NufftOptions opt)
  : dims_{dims}
  , nsamples_{static_cast<Index>(k.size())}
  , width_{opt.kernel_width}
{
  if (opt.oversampling < 1.0 || opt.kernel_width < 2) { throw DomainError("invalid NUFFT options"); }
  check_nyquist(k);
  Dims const g{oversampled(dims.nx, opt.oversampling), oversampled(dims.ny, opt.oversampling),
               oversampled(dims.nz, opt.oversampling)};
  fft_ = padded_fft(dims, g);

  on_grid_ = nsamples_ > 0;
  for (auto const &p : k) {
    for (int a = 0; a < 3 && on_grid_; a++) {
      double const m = p[a] * dims[a];
      on_grid_ = std::abs(m - std::round(m)) < 1e-9;
    }
    if (!on_grid_) { break; }
  }

  if (on_grid_) {
    idx_.resize(nsamples_);
    for (Index s = 0; s < nsamples_; s++) {
      Index m[3];
      for (int a = 0; a < 3; a++) { m[a] = wrap(static_cast<Index>(std::llround(k[s][a] * dims[a])), dims[a]); }
      idx_[s] = static_cast<std::int32_t>(dims.index(m[0], m[1], m[2]));
    }
    return;
  }

  KaiserBessel const kb(width_, opt.oversampling);
  for (int a = 0; a < 3; a++) {
    Index const n = dims[a];
    deapod_[a].resize(n);
    for (Index i = 0; i < n; i++) { deapod_[a][i] = 1.0 / kb.transform(centered(i, n) / g[a]); }
  }
  Index const per = 3 * width_;
  idx_.resize(nsamples_ * per);
  w_.resize(nsamples_ * per);
  for (Index s = 0; s < nsamples_; s++) {
    for (int a = 0; a < 3; a++) {
      double const gp = k[s][a] * g[a];
      auto const j0 = static_cast<Index>(std::floor(gp - width_ / 2.0)) + 1;
      for (int t = 0; t < width_; t++) {
        Index const j = j0 + t;
        idx_[s * per + a * width_ + t] = static_cast<std::int32_t>(wrap(j, g[a]));
        w_[s * per + a * width_ + t] = kb(gp - j);
      }
    }
  }
}

Nufft::~Nufft() = default;
Nufft::Nufft(Nufft &&) noexcept = default;
Nufft &Nufft::operator=(Nufft &&) noexcept = default;

void Nufft::forward(std::span<Cx const> image, std::span<Cx> out) const { forward_weighted(image, {}, out); }

void Nufft::adjoint(std::span<Cx const> samples, std::span<Cx> image) const
{
  std::fill(image.begin(), image.end(), Cx{0.0});
  adjoint_accumulate(samples, {}, image);
}

void Nufft::forward_weighted(std::span<Cx const> image, std::span<Cx const> weight, std::span<Cx> out) const
{
  require_shape(static_cast<Index>(image.size()) == dims_.size(), "nufft forward: image size mismatch");
  require_shape(weight.empty() || weight.size() == image.size(), "nufft forward: weight size mismatch");
  require_shape(static_cast<Index>(out.size()) == nsamples_, "nufft forward: output size mismatch");
  PaddedFft &f = *fft_;
  std::lock_guard lk(f.mutex());
  Dims const n = dims_;

  if (on_grid_) {
    Cx *c = f.cart();
    for (Index x = 0; x < n.nx; x++) {
      Index const wx = wrap(x - n.nx / 2, n.nx);
      for (Index y = 0; y < n.ny; y++) {
        Index const wy = wrap(y - n.ny / 2, n.ny);
        for (Index z = 0; z < n.nz; z++) {
          Index const i = n.index(x, y, z);
          c[n.index(wx, wy, wrap(z - n.nz / 2, n.nz))] = weight.empty() ? image[i] : image[i] * weight[i];
        }
      }
    }
    f.cartesian(FFTW_FORWARD);
    for (Index s = 0; s < nsamples_; s++) { out[s] = c[idx_[s]]; }
    return;
  }

  Dims const g = f.g();
  Cx *grid = f.grid();
  std::memset(static_cast<void *>(grid), 0, sizeof(Cx) * g.size());
  for (Index x = 0; x < n.nx; x++) {
    Index const gx = wrap(x - n.nx / 2, g.nx);
    for (Index y = 0; y < n.ny; y++) {
      Index const gy = wrap(y - n.ny / 2, g.ny);
      double const dxy = deapod_[0][x] * deapod_[1][y];
      Cx *row = grid + (gx * g.ny + gy) * g.nz;
      for (Index z = 0; z < n.nz; z++) {
        Index const i = n.index(x, y, z);
        Cx const v = weight.empty() ? image[i] : image[i] * weight[i];
        row[wrap(z - n.nz / 2, g.nz)] = v * (dxy * deapod_[2][z]);
      }
    }
  }
  f.transform(FFTW_FORWARD);
  int const W = width_;
  Index const per = 3 * W;
  parallel_for(nsamples_, [&](Index lo, Index hi, int) {
    for (Index s = lo; s < hi; s++) {
      std::int32_t const *ix = &idx_[s * per];
      double const *wt = &w_[s * per];
      Cx acc = 0.0;
      for (int a = 0; a < W; a++) {
        Cx accy = 0.0;
        for (int b = 0; b < W; b++) {
          Cx const *row = grid + (static_cast<Index>(ix[a]) * g.ny + ix[W + b]) * g.nz;
          Cx accz = 0.0;
          for (int c = 0; c < W; c++) { accz += wt[2 * W + c] * row[ix[2 * W + c]]; }
          accy += wt[W + b] * accz;
        }
        acc += wt[a] * accy;
      }
      out[s] = acc;
    }
  });
}

void Nufft::adjoint_accumulate(std::span<Cx const> samples, std::span<Cx const> weight, std::span<Cx> image) const
{
  require_shape(static_cast<Index>(image.size()) == dims_.size(), "nufft adjoint: image size mismatch");
  require_shape(weight.empty() || weight.size() == image.size(), "nufft adjoint: weight size mismatch");
  require_shape(static_cast<Index>(samples.size()) == nsamples_, "nufft adjoint: sample count mismatch");
  PaddedFft &f = *fft_;
  std::lock_guard lk(f.mutex());
  Dims const n = dims_;

  if (on_grid_) {
    Cx *c = f.cart();
    std::memset(static_cast<void *>(c), 0, sizeof(Cx) * n.size());
    for (Index s = 0; s < nsamples_; s++) { c[idx_[s]] += samples[s]; }
    f.cartesian(FFTW_BACKWARD);
    for (Index x = 0; x < n.nx; x++) {
      Index const wx = wrap(x - n.nx / 2, n.nx);
      for (Index y = 0; y < n.ny; y++) {
        Index const wy = wrap(y - n.ny / 2, n.ny);
        for (Index z = 0; z < n.nz; z++) {
          Index const i = n.index(x, y, z);
          Cx const v = c[n.index(wx, wy, wrap(z - n.nz / 2, n.nz))];
          image[i] += weight.empty() ? v : std::conj(weight[i]) * v;
        }
      }
    }
    return;
  }

  Dims const g = f.g();
  Cx *grid = f.grid();
  std::memset(static_cast<void *>(grid), 0, sizeof(Cx) * g.size());
  int const W = width_;
  Index const per = 3 * W;
  auto spread = [&](Cx *dst, Index lo, Index hi) {
    for (Index s = lo; s < hi; s++) {
      std::int32_t const *ix = &idx_[s * per];
      double const *wt = &w_[s * per];
      Cx const v = samples[s];
      for (int a = 0; a < W; a++) {
        Cx const va = wt[a] * v;
        for (int b = 0; b < W; b++) {
          Cx const vab = wt[W + b] * va;
          Cx *row = dst + (static_cast<Index>(ix[a]) * g.ny + ix[W + b]) * g.nz;
          for (int c = 0; c < W; c++) { row[ix[2 * W + c]] += wt[2 * W + c] * vab; }
        }
      }
    }
  };
  int const workers = thread_count();
  if (workers <= 1) {
    spread(grid, 0, nsamples_);
  } else {
    std::vector<std::vector<Cx>> partial(workers);
    parallel_for(nsamples_, [&](Index lo, Index hi, int w) {
      partial[w].assign(g.size(), Cx{0.0});
      spread(partial[w].data(), lo, hi);
    });
    for (auto const &p : partial) {
      if (p.empty()) { continue; }
      for (Index i = 0; i < g.size(); i++) { grid[i] += p[i]; }
    }
  }
  f.transform(FFTW_BACKWARD);
  for (Index x = 0; x < n.nx; x++) {
    Index const gx = wrap(x - n.nx / 2, g.nx);
    for (Index y = 0; y < n.ny; y++) {
      Index const gy = wrap(y - n.ny / 2, g.ny);
      double const dxy = deapod_[0][x] * deapod_[1][y];
      Cx const *row = grid + (gx * g.ny + gy) * g.nz;
      for (Index z = 0; z < n.nz; z++) {
        Index const i = n.index(x, y, z);
        Cx const v = row[wrap(z - n.nz / 2, g.nz)] * (dxy * deapod_[2][z]);
        image[i] += weight.empty() ? v : std::conj(weight[i]) * v;
      }
    }
  }
}

KSpaceFrame forward(ComplexVolume const &volume, CoilMaps const &maps, Nufft const &op)
{
  require_shape(volume.dims() == maps.dims() && volume.dims() == op.dims(), "forward: volume / map / operator dims differ");
  KSpaceFrame out(maps.ncoils(), op.sample_count());
  for (Index c = 0; c < maps.ncoils(); c++) { op.forward_weighted(volume.data(), maps.maps[c].data(), out.coil(c)); }
  return out;
}

KSpaceFrame forward(ComplexVolume const &volume, CoilMaps const &maps, std::span<KPoint const> traj)
{
  return forward(volume, maps, Nufft(volume.dims(), traj));
}

ComplexVolume adjoint(KSpaceFrame const &frame, CoilMaps const &maps, Nufft const &op, double spacing)
{
  require_shape(maps.dims() == op.dims(), "adjoint: map / operator dims differ");
  require_shape(frame.ncoils == maps.ncoils() && frame.nsamples == op.sample_count(), "adjoint: frame shape mismatch");
  ComplexVolume out(op.dims(), spacing);
  for (Index c = 0; c < maps.ncoils(); c++) { op.adjoint_accumulate(frame.coil(c), maps.maps[c].data(), out.data()); }
  return out;
}

ComplexVolume adjoint(KSpaceFrame const &frame, CoilMaps const &maps, std::span<KPoint const> traj, double spacing)
{
  return adjoint(frame, maps, Nufft(maps.dims(), traj), spacing);
}

std::vector<double> radial_density_weights(std::span<KPoint const> k, Index spokes, Index samples_per_spoke)
{
  if (spokes < 1 || samples_per_spoke < 1) { throw DomainError("radial density weights need spokes and samples"); }
  double const dk = 1.0 / static_cast<double>(samples_per_spoke);
  double const center = 4.0 / 3.0 * std::numbers::pi * std::pow(dk / 2.0, 3) / static_cast<double>(spokes);
  std::vector<double> w(k.size());
  for (size_t i = 0; i < k.size(); i++) {
    double const r2 = k[i][0] * k[i][0] + k[i][1] * k[i][1] + k[i][2] * k[i][2];
    w[i] = r2 < 0.25 * dk * dk ? center : 2.0 * std::numbers::pi * r2 * dk / static_cast<double>(spokes);
  }
  return w;
}

} // namespace moco5d
