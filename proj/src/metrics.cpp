#include "moco5d/metrics.hpp"

#include "moco5d/phantom.hpp"

#include <Eigen/QR>
#include <cmath>
#include <numbers>

namespace moco5d {

std::vector<char> sphere_mask(Dims d, double spacing, RoiSphere const &roi)
{
  std::vector<char> m(d.size(), 0);
  double const r2 = roi.radius_mm * roi.radius_mm;
  for (Index x = 0; x < d.nx; x++)
    for (Index y = 0; y < d.ny; y++)
      for (Index z = 0; z < d.nz; z++) {
        double const dx = voxel_mm(x, d.nx, spacing) - roi.center_mm[0];
        double const dy = voxel_mm(y, d.ny, spacing) - roi.center_mm[1];
        double const dz = voxel_mm(z, d.nz, spacing) - roi.center_mm[2];
        m[d.index(x, y, z)] = dx * dx + dy * dy + dz * dz <= r2;
      }
  return m;
}

namespace {

void check_mask(std::span<char const> mask, Index n)
{
  if (!mask.empty() && static_cast<Index>(mask.size()) != n) throw ShapeError("metrics: mask size does not match volume");
}

bool inside(std::span<char const> mask, Index i) { return mask.empty() || mask[i]; }

} // namespace

double psnr(ComplexVolume const &recon, ComplexVolume const &truth, std::span<char const> mask)
{
  require_shape(recon.dims() == truth.dims(), "psnr: volume dims differ");
  check_mask(mask, truth.size());
  double peak = 0, se = 0;
  Index n = 0;
  for (Index i = 0; i < truth.size(); i++) {
    if (!inside(mask, i)) continue;
    double const t = std::abs(truth[i]);
    double const e = std::abs(recon[i]) - t;
    peak = std::max(peak, t);
    se += e * e;
    n++;
  }
  if (n == 0) throw DomainError("psnr: empty mask");
  double const mse = se / static_cast<double>(n);
  if (mse == 0) return psnr_cap_db;
  if (peak == 0) return 0.0;
  return std::min(psnr_cap_db, 10.0 * std::log10(peak * peak / mse));
}

double endpoint_error(DenseField const &a, DenseField const &b, std::span<char const> mask)
{
  require_shape(a.dims == b.dims, "endpoint error: field dims differ");
  Index const V = a.dims.size();
  check_mask(mask, V);
  double s = 0;
  Index n = 0;
  for (Index i = 0; i < V; i++) {
    if (!inside(mask, i)) continue;
    double d2 = 0;
    for (int c = 0; c < 3; c++) d2 += std::pow(a.u[c][i] - b.u[c][i], 2);
    s += std::sqrt(d2);
    n++;
  }
  if (n == 0) throw DomainError("endpoint error: empty mask");
  return s / static_cast<double>(n);
}

namespace {

/// Mean over a clipped cubic window, by separable running sums.
std::vector<double> box_mean(std::vector<double> v, Dims d, Index r)
{
  std::vector<double> count(d.size(), 1.0);
  for (int axis = 0; axis < 3; axis++) {
    Index const n = d[axis];
    Index const stride = axis == 0 ? d.ny * d.nz : (axis == 1 ? d.nz : 1);
    std::vector<double> line(n), cline(n), prefix(n + 1), cprefix(n + 1);
    for (Index base = 0; base < d.size(); base++) {
      Index const coord = axis == 0 ? base / (d.ny * d.nz) : (axis == 1 ? (base / d.nz) % d.ny : base % d.nz);
      if (coord != 0) continue;
      for (Index i = 0; i < n; i++) {
        prefix[i + 1] = prefix[i] + v[base + i * stride];
        cprefix[i + 1] = cprefix[i] + count[base + i * stride];
      }
      for (Index i = 0; i < n; i++) {
        Index const lo = std::max<Index>(0, i - r), hi = std::min(n, i + r + 1);
        v[base + i * stride] = prefix[hi] - prefix[lo];
        count[base + i * stride] = cprefix[hi] - cprefix[lo];
      }
    }
  }
  for (Index i = 0; i < d.size(); i++) v[i] /= count[i];
  return v;
}

} // namespace

double structural_similarity(ComplexVolume const &recon, ComplexVolume const &truth, std::span<char const> mask, Index radius)
{
  require_shape(recon.dims() == truth.dims(), "ssim: volume dims differ");
  check_mask(mask, truth.size());
  Dims const d = truth.dims();
  Index const V = d.size();
  std::vector<double> a(V), b(V), aa(V), bb(V), ab(V);
  double peak = 0;
  for (Index i = 0; i < V; i++) {
    a[i] = std::abs(recon[i]);
    b[i] = std::abs(truth[i]);
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
    peak = std::max(peak, b[i]);
  }
  double const c1 = std::pow(0.01 * peak, 2), c2 = std::pow(0.03 * peak, 2);
  auto const ma = box_mean(a, d, radius), mb = box_mean(b, d, radius);
  auto const maa = box_mean(aa, d, radius), mbb = box_mean(bb, d, radius), mab = box_mean(ab, d, radius);
  double s = 0;
  Index n = 0;
  for (Index i = 0; i < V; i++) {
    if (!inside(mask, i)) continue;
    double const va = maa[i] - ma[i] * ma[i], vb = mbb[i] - mb[i] * mb[i], cov = mab[i] - ma[i] * mb[i];
    double const num = (2 * ma[i] * mb[i] + c1) * (2 * cov + c2);
    double const den = (ma[i] * ma[i] + mb[i] * mb[i] + c1) * (va + vb + c2);
    s += den > 0 ? num / den : 1.0;
    n++;
  }
  if (n == 0) throw DomainError("ssim: empty mask");
  return s / static_cast<double>(n);
}

double phase_correlation(std::span<double const> x, std::span<double const> phase)
{
  require_shape(x.size() == phase.size(), "phase correlation: length mismatch");
  auto const T = static_cast<Index>(x.size());
  if (T < 3) throw DomainError("phase correlation: need at least three samples");
  Eigen::MatrixXd A(T, 3);
  Eigen::VectorXd y(T);
  for (Index t = 0; t < T; t++) {
    A(t, 0) = 1;
    A(t, 1) = std::cos(2 * std::numbers::pi * phase[t]);
    A(t, 2) = std::sin(2 * std::numbers::pi * phase[t]);
    y[t] = x[t];
  }
  Eigen::VectorXd const r = y - A * A.colPivHouseholderQr().solve(y);
  double const total = (y.array() - y.mean()).square().sum();
  if (!(total > 0)) return 0.0;
  return std::sqrt(std::max(0.0, 1.0 - r.squaredNorm() / total));
}

} // namespace moco5d
