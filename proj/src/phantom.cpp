#include "moco5d/phantom.hpp"

#include "moco5d/parallel.hpp"

#include <cmath>
#include <fmt/format.h>
#include <numbers>

namespace moco5d {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

void check_keys(nlohmann::json const &j, std::initializer_list<char const *> keys, std::string const &where)
{
  if (!j.is_object()) { throw DomainError(fmt::format("{}: expected an object", where)); }
  for (auto const &[k, v] : j.items()) {
    bool known = false;
    for (auto const *name : keys) { known = known || k == name; }
    if (!known) { throw DomainError(fmt::format("{}: unknown key '{}'", where, k)); }
  }
}

nlohmann::json ellipsoid_json(Ellipsoid const &e)
{
  return {{"center_mm", e.center_mm}, {"semi_axes_mm", e.semi_axes_mm}, {"intensity", e.intensity}};
}

void read_ellipsoid(nlohmann::json const &j, Ellipsoid &e, std::string const &where)
{
  check_keys(j, {"center_mm", "semi_axes_mm", "intensity"}, where);
  if (j.contains("center_mm")) { e.center_mm = j.at("center_mm").get<Vec3>(); }
  if (j.contains("semi_axes_mm")) { e.semi_axes_mm = j.at("semi_axes_mm").get<Vec3>(); }
  if (j.contains("intensity")) { e.intensity = j.at("intensity").get<double>(); }
}

template <typename T>
void read_opt(nlohmann::json const &j, char const *key, T &out)
{
  if (j.contains(key)) { out = j.at(key).get<T>(); }
}

/// Ellipsoidal radius of q (relative to the center) and the signed distance to
/// the surface measured along the ray from the center.
double ellipsoid_radius(Vec3 const &q, Vec3 const &a)
{
  double s = 0.0;
  for (int i = 0; i < 3; i++) { s += (q[i] / a[i]) * (q[i] / a[i]); }
  return std::sqrt(s);
}

double inside(Vec3 const &p, Vec3 const &center, Vec3 const &semi, double edge)
{
  Vec3 const q{p[0] - center[0], p[1] - center[1], p[2] - center[2]};
  double const rho = ellipsoid_radius(q, semi);
  double const len = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2]);
  double const ray = rho > 1e-12 ? len / rho : std::min({semi[0], semi[1], semi[2]});
  double const dist = (rho - 1.0) * ray;
  return 0.5 * std::erfc(dist / edge);
}

/// Weight of the cardiac deformation: 1 up to 1.2 heart radii, cosine taper to 0 at 2.2.
double cardiac_taper(double rho)
{
  if (rho <= 1.2) { return 1.0; }
  if (rho >= 2.2) { return 0.0; }
  return 0.5 * (1.0 + std::cos(std::numbers::pi * (rho - 1.2)));
}

} // namespace

void PhantomSpec::validate() const
{
  auto positive = [](Vec3 const &v) { return v[0] > 0 && v[1] > 0 && v[2] > 0; };
  if (!positive(torso.semi_axes_mm) || !positive(heart.semi_axes_mm)) {
    throw DomainError("phantom: semi-axes must be positive");
  }
  if (!(resp_rate_hz > 0.05 && resp_rate_hz < 0.7)) {
    throw DomainError(fmt::format("phantom: respiratory rate {} Hz outside (0.05, 0.7)", resp_rate_hz));
  }
  if (cardiac_rate_hz >= 0.05 && cardiac_rate_hz <= 0.7) {
    throw DomainError(fmt::format("phantom: cardiac rate {} Hz inside the respiratory band", cardiac_rate_hz));
  }
  if (cardiac_rate_hz <= 0) { throw DomainError("phantom: cardiac rate must be positive"); }
  if (cardiac_amplitude < 0 || cardiac_amplitude >= 0.5) { throw DomainError("phantom: cardiac amplitude must be in [0, 0.5)"); }
  if (resp_amplitude_mm < 0) { throw DomainError("phantom: respiratory amplitude must be nonnegative"); }
  if (noise_sigma < 0) { throw DomainError("phantom: noise sigma must be nonnegative"); }
  if (edge_width_mm <= 0) { throw DomainError("phantom: edge width must be positive"); }
  if (fat_intensity < 0 || fat_thickness_mm < 0) { throw DomainError("phantom: fat shell parameters must be nonnegative"); }
  if (fat_intensity > 0 && fat_thickness_mm >= std::min({torso.semi_axes_mm[0], torso.semi_axes_mm[1], torso.semi_axes_mm[2]})) {
    throw DomainError("phantom: fat shell thicker than the torso");
  }
  if (cardiac_phase0 < 0 || cardiac_phase0 >= 1 || resp_phase0 < 0 || resp_phase0 >= 1) {
    throw DomainError("phantom: initial phases must be in [0, 1)");
  }
}

void to_json(nlohmann::json &j, PhantomSpec const &s)
{
  j = {{"torso", ellipsoid_json(s.torso)},
       {"heart", ellipsoid_json(s.heart)},
       {"fat_shell", {{"intensity", s.fat_intensity}, {"thickness_mm", s.fat_thickness_mm}}},
       {"edge_width_mm", s.edge_width_mm},
       {"cardiac_rate_hz", s.cardiac_rate_hz},
       {"resp_rate_hz", s.resp_rate_hz},
       {"cardiac_amplitude", s.cardiac_amplitude},
       {"resp_amplitude_mm", s.resp_amplitude_mm},
       {"cardiac_phase0", s.cardiac_phase0},
       {"resp_phase0", s.resp_phase0},
       {"noise_sigma", s.noise_sigma}};
}

void from_json(nlohmann::json const &j, PhantomSpec &s)
{
  check_keys(j,
             {"torso", "heart", "fat_shell", "edge_width_mm", "cardiac_rate_hz", "resp_rate_hz", "cardiac_amplitude",
              "resp_amplitude_mm", "cardiac_phase0", "resp_phase0", "noise_sigma"},
             "phantom");
  if (j.contains("torso")) { read_ellipsoid(j.at("torso"), s.torso, "phantom.torso"); }
  if (j.contains("heart")) { read_ellipsoid(j.at("heart"), s.heart, "phantom.heart"); }
  if (j.contains("fat_shell")) {
    auto const &f = j.at("fat_shell");
    check_keys(f, {"intensity", "thickness_mm"}, "phantom.fat_shell");
    read_opt(f, "intensity", s.fat_intensity);
    read_opt(f, "thickness_mm", s.fat_thickness_mm);
  }
  read_opt(j, "edge_width_mm", s.edge_width_mm);
  read_opt(j, "cardiac_rate_hz", s.cardiac_rate_hz);
  read_opt(j, "resp_rate_hz", s.resp_rate_hz);
  read_opt(j, "cardiac_amplitude", s.cardiac_amplitude);
  read_opt(j, "resp_amplitude_mm", s.resp_amplitude_mm);
  read_opt(j, "cardiac_phase0", s.cardiac_phase0);
  read_opt(j, "resp_phase0", s.resp_phase0);
  read_opt(j, "noise_sigma", s.noise_sigma);
  s.validate();
}

double phantom_reference(PhantomSpec const &s, Vec3 const &p)
{
  double const edge = s.edge_width_mm;
  double const torso = inside(p, s.torso.center_mm, s.torso.semi_axes_mm, edge);
  double inner = torso;
  if (s.fat_intensity > 0 && s.fat_thickness_mm > 0) {
    Vec3 const a = s.torso.semi_axes_mm;
    double const t = s.fat_thickness_mm;
    inner = inside(p, s.torso.center_mm, {a[0] - t, a[1] - t, a[2] - t}, edge);
  }
  double const heart = inside(p, s.heart.center_mm, s.heart.semi_axes_mm, edge);
  return s.fat_intensity * (torso - inner) + inner * ((1.0 - heart) * s.torso.intensity + heart * s.heart.intensity);
}

Vec3 phantom_displacement(PhantomSpec const &s, double cardiac_phase, double resp_phase, Vec3 const &p)
{
  double const shift = s.resp_amplitude_mm * std::sin(two_pi * resp_phase);
  double const scale = 1.0 - s.cardiac_amplitude * (1.0 - std::cos(two_pi * cardiac_phase)) / 2.0;
  Vec3 const q{p[0], p[1], p[2] - shift};
  Vec3 const rel{q[0] - s.heart.center_mm[0], q[1] - s.heart.center_mm[1], q[2] - s.heart.center_mm[2]};
  double const w = cardiac_taper(ellipsoid_radius(rel, s.heart.semi_axes_mm)) * (1.0 / scale - 1.0);
  return {rel[0] * w, rel[1] * w, rel[2] * w - shift};
}

PhantomState phantom_volume(PhantomSpec const &s, GridSpec const &grid, double cardiac_phase, double resp_phase)
{
  if (!(cardiac_phase >= 0 && cardiac_phase < 1 && resp_phase >= 0 && resp_phase < 1)) {
    throw DomainError(fmt::format("phantom: phases ({}, {}) outside [0, 1)", cardiac_phase, resp_phase));
  }
  Dims const d = grid.dims;
  double const h = grid.spacing_mm;
  PhantomState out{ComplexVolume(d, h), DenseField(d)};
  parallel_for(d.nx, [&](Index lo, Index hi, int) {
    for (Index x = lo; x < hi; x++) {
      for (Index y = 0; y < d.ny; y++) {
        for (Index z = 0; z < d.nz; z++) {
          Vec3 const p{voxel_mm(x, d.nx, h), voxel_mm(y, d.ny, h), voxel_mm(z, d.nz, h)};
          Vec3 const u = phantom_displacement(s, cardiac_phase, resp_phase, p);
          Index const i = d.index(x, y, z);
          out.volume[i] = phantom_reference(s, {p[0] + u[0], p[1] + u[1], p[2] + u[2]});
          for (int a = 0; a < 3; a++) { out.truth.u[a][i] = u[a] / h; }
        }
      }
    }
  });
  return out;
}

CoilMaps synthetic_coil_maps(GridSpec const &grid, Index ncoils)
{
  if (ncoils < 1) { throw DomainError("coil maps: need at least one coil"); }
  Dims const d = grid.dims;
  double const h = grid.spacing_mm;
  double const fov = static_cast<double>(std::max({d.nx, d.ny, d.nz})) * h;
  double const ring = 0.65 * fov, width = 0.45 * fov;
  CoilMaps maps;
  for (Index c = 0; c < ncoils; c++) { maps.maps.emplace_back(d, h); }
  for (Index x = 0; x < d.nx; x++) {
    for (Index y = 0; y < d.ny; y++) {
      for (Index z = 0; z < d.nz; z++) {
        Vec3 const p{voxel_mm(x, d.nx, h), voxel_mm(y, d.ny, h), voxel_mm(z, d.nz, h)};
        Index const i = d.index(x, y, z);
        double rss = 0.0;
        for (Index c = 0; c < ncoils; c++) {
          double const angle = two_pi * static_cast<double>(c) / static_cast<double>(ncoils);
          double const cz = (c % 2 == 0 ? 0.2 : -0.2) * fov;
          double const dx = p[0] - ring * std::cos(angle), dy = p[1] - ring * std::sin(angle), dz = p[2] - cz;
          double const mag = std::exp(-(dx * dx + dy * dy + dz * dz) / (2.0 * width * width));
          double const phase = angle + std::numbers::pi * (p[0] * std::cos(angle) + p[1] * std::sin(angle)) / fov;
          maps.maps[c][i] = std::polar(mag, phase);
          rss += mag * mag;
        }
        rss = std::sqrt(rss);
        for (Index c = 0; c < ncoils; c++) { maps.maps[c][i] /= rss; }
      }
    }
  }
  return maps;
}

} // namespace moco5d
