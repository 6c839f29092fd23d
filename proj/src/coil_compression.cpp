#include "moco5d/coil_compression.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace moco5d {

KSpaceFrame CoilCompression::apply(KSpaceFrame const &frame) const
{
  require_shape(frame.ncoils == ncoils, "coil compression: channel count mismatch");
  KSpaceFrame out(nvirtual, frame.nsamples);
  out.frame_index = frame.frame_index;
  out.time_seconds = frame.time_seconds;
  for (Index v = 0; v < nvirtual; v++) {
    auto dst = out.coil(v);
    for (Index c = 0; c < ncoils; c++) {
      Cx const w = std::conj(at(c, v));
      auto src = frame.coil(c);
      for (Index i = 0; i < frame.nsamples; i++) { dst[i] += w * src[i]; }
    }
  }
  return out;
}

CoilMaps CoilCompression::apply(CoilMaps const &maps) const
{
  require_shape(maps.ncoils() == ncoils, "coil compression: map count mismatch");
  CoilMaps out;
  for (Index v = 0; v < nvirtual; v++) {
    ComplexVolume m(maps.dims(), maps.maps[0].spacing());
    for (Index c = 0; c < ncoils; c++) {
      Cx const w = std::conj(at(c, v));
      auto const src = maps.maps[c].data();
      for (Index i = 0; i < m.size(); i++) { m[i] += w * src[i]; }
    }
    out.maps.push_back(std::move(m));
  }
  return out;
}

std::vector<ComplexVolume> coil_images(std::span<KSpaceFrame const> frames, Trajectory const &traj, Dims dims, double spacing)
{
  if (frames.empty()) { throw DomainError("coil images: no frames"); }
  Index const nc = frames[0].ncoils;
  Index const nt = static_cast<Index>(frames.size());
  Index const ns = frames[0].nsamples;
  require_shape(ns == traj.samples_per_frame(), "coil images: frame length differs from trajectory");
  std::span<KPoint const> k(traj.points.data(), static_cast<size_t>(ns * nt));
  auto dcf = traj.density_weights.empty()
               ? radial_density_weights(k, traj.spokes_per_frame * nt, traj.samples_per_spoke)
               : std::vector<double>(traj.density_weights.begin(), traj.density_weights.begin() + ns * nt);
  Nufft const op(dims, k);
  std::vector<ComplexVolume> out;
  std::vector<Cx> pooled(static_cast<size_t>(ns * nt));
  for (Index c = 0; c < nc; c++) {
    for (Index t = 0; t < nt; t++) {
      require_shape(frames[t].ncoils == nc && frames[t].nsamples == ns, "coil images: inconsistent frames");
      auto src = frames[t].coil(c);
      for (Index i = 0; i < ns; i++) { pooled[t * ns + i] = src[i] * dcf[t * ns + i]; }
    }
    ComplexVolume img(dims, spacing);
    op.adjoint(pooled, img.data());
    out.push_back(std::move(img));
  }
  return out;
}

CoilCompression design_coil_compression(std::span<ComplexVolume const> images, RoiSphere const &roi, double energy)
{
  if (images.empty()) { throw DomainError("coil compression: no channels"); }
  if (!(energy > 0.0 && energy <= 1.0)) { throw DomainError("coil compression: energy fraction must be in (0, 1]"); }
  auto const nc = static_cast<Index>(images.size());
  Dims const d = images[0].dims();
  double const h = images[0].spacing();
  for (auto const &im : images) { require_shape(im.dims() == d, "coil compression: image dims differ"); }

  using Mat = Eigen::MatrixXcd;
  Mat signal = Mat::Zero(nc, nc), noise = Mat::Zero(nc, nc);
  Eigen::VectorXcd v(nc);
  Index roi_voxels = 0;
  for (Index x = 0; x < d.nx; x++) {
    for (Index y = 0; y < d.ny; y++) {
      for (Index z = 0; z < d.nz; z++) {
        double const px = centered(x, d.nx) * h - roi.center_mm[0];
        double const py = centered(y, d.ny) * h - roi.center_mm[1];
        double const pz = centered(z, d.nz) * h - roi.center_mm[2];
        double const dist = std::sqrt(px * px + py * py + pz * pz) - roi.radius_mm;
        Index const i = d.index(x, y, z);
        for (Index c = 0; c < nc; c++) { v[c] = images[c][i]; }
        if (dist <= 0.0) {
          signal.noalias() += v * v.adjoint();
          roi_voxels++;
        } else {
          noise.noalias() += dist * (v * v.adjoint());
        }
      }
    }
  }
  if (roi_voxels == 0) { throw DomainError("coil compression: ROI contains no voxels"); }

  CoilCompression out;
  out.ncoils = nc;
  double const strace = signal.trace().real();
  if (nc == 1 || strace <= 0.0) {
    out.nvirtual = nc;
    out.q.assign(static_cast<size_t>(nc * nc), Cx{0.0});
    for (Index c = 0; c < nc; c++) { out.q[c * nc + c] = 1.0; }
    out.eigenvalues.assign(nc, 1.0);
    out.energy_by_count.assign(nc, 1.0);
    out.signal_by_count.assign(nc, 1.0);
    out.energy_fraction = 1.0;
    return out;
  }
  double const ntrace = noise.trace().real();
  noise += Mat::Identity(nc, nc) * (1e-6 * (ntrace > 0 ? ntrace : strace) / static_cast<double>(nc));

  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(signal, noise);
  if (es.info() != Eigen::Success) { throw DivergenceError("coil compression: eigen-solve failed"); }
  // Eigen sorts ascending; reverse so the most ROI-selective direction comes first.
  Mat vecs = es.eigenvectors().rowwise().reverse();
  Eigen::VectorXd vals = es.eigenvalues().reverse();
  Eigen::HouseholderQR<Mat> qr(vecs);
  Mat q = qr.householderQ() * Mat::Identity(nc, nc);
  // Fix the phase of each column so the projection onto the eigenvector is real positive.
  for (Index c = 0; c < nc; c++) {
    Cx const p = q.col(c).dot(vecs.col(c));
    if (std::abs(p) > 0) { q.col(c) *= p / std::abs(p); }
  }

  // ROI energy is measured after whitening by the interference covariance, where
  // the retained subspace keeps exactly the leading generalized eigenvalues.
  double const total = vals.cwiseMax(0.0).sum();
  double cum = 0.0;
  for (Index n = 0; n < nc; n++) {
    cum += std::max(vals[n], 0.0);
    out.energy_by_count.push_back(total > 0 ? cum / total : 1.0);
    auto const qn = q.leftCols(n + 1);
    out.signal_by_count.push_back((qn.adjoint() * signal * qn).trace().real() / strace);
  }
  Index keep = nc;
  for (Index n = 0; n < nc; n++) {
    if (out.energy_by_count[n] >= energy) {
      keep = n + 1;
      break;
    }
  }
  out.nvirtual = keep;
  out.energy_fraction = out.energy_by_count[keep - 1];
  out.eigenvalues.assign(vals.data(), vals.data() + nc);
  out.q.resize(static_cast<size_t>(nc * keep));
  for (Index vv = 0; vv < keep; vv++) {
    for (Index c = 0; c < nc; c++) { out.q[vv * nc + c] = q(c, vv); }
  }
  return out;
}

CompressedData compress_coils(std::span<KSpaceFrame const> frames, CoilMaps const &maps, Trajectory const &traj,
                              RoiSphere const &roi, double energy)
{
  maps.validate();
  if (maps.ncoils() < 1) { throw DomainError("coil compression: no coils"); }
  CompressedData out;
  if (maps.ncoils() == 1) {
    out.frames.assign(frames.begin(), frames.end());
    out.maps = maps;
    out.compression.ncoils = out.compression.nvirtual = 1;
    out.compression.q = {Cx{1.0}};
    out.compression.eigenvalues = {1.0};
    out.compression.energy_by_count = {1.0};
    out.compression.signal_by_count = {1.0};
    return out;
  }
  auto const images = coil_images(frames, traj, maps.dims(), maps.maps[0].spacing());
  out.compression = design_coil_compression(images, roi, energy);
  out.frames.reserve(frames.size());
  for (auto const &f : frames) { out.frames.push_back(out.compression.apply(f)); }
  out.maps = out.compression.apply(maps);
  return out;
}

} // namespace moco5d
