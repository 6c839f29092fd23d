#include "moco5d/volume.hpp"

#include <cmath>
#include <fmt/format.h>

namespace moco5d {

std::string to_string(Dims const &d) { return fmt::format("{}x{}x{}", d.nx, d.ny, d.nz); }

void require_shape(bool ok, std::string const &what)
{
  if (!ok) { throw ShapeError(what); }
}

ComplexVolume::ComplexVolume(Dims dims, double spacing)
  : ComplexVolume(dims, spacing, std::vector<Cx>(dims.size()))
{
}

ComplexVolume::ComplexVolume(Dims dims, double spacing, std::vector<Cx> data)
  : dims_{dims}
  , spacing_{spacing}
  , data_{std::move(data)}
{
  if (dims.nx < 4 || dims.ny < 4 || dims.nz < 4) {
    throw ShapeError(fmt::format("volume dims {} must be >= 4 on every axis", to_string(dims)));
  }
  if (static_cast<Index>(data_.size()) != dims.size()) {
    throw ShapeError(fmt::format("volume data length {} != {}", data_.size(), dims.size()));
  }
  if (!(spacing > 0.0)) { throw DomainError("volume spacing must be positive"); }
}

bool ComplexVolume::all_finite() const
{
  for (auto const &v : data_) {
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) { return false; }
  }
  return true;
}

double ComplexVolume::norm() const { return std::sqrt(norm2(data_)); }

ComplexVolume &ComplexVolume::operator+=(ComplexVolume const &o)
{
  require_shape(same_shape(o), "volume += shape mismatch");
  for (Index i = 0; i < size(); i++) { data_[i] += o.data_[i]; }
  return *this;
}

ComplexVolume &ComplexVolume::operator-=(ComplexVolume const &o)
{
  require_shape(same_shape(o), "volume -= shape mismatch");
  for (Index i = 0; i < size(); i++) { data_[i] -= o.data_[i]; }
  return *this;
}

ComplexVolume &ComplexVolume::operator*=(Cx s)
{
  for (auto &v : data_) { v *= s; }
  return *this;
}

ComplexVolume operator+(ComplexVolume a, ComplexVolume const &b) { return a += b; }
ComplexVolume operator-(ComplexVolume a, ComplexVolume const &b) { return a -= b; }
ComplexVolume operator*(Cx s, ComplexVolume a) { return a *= s; }

double real_dot(std::span<Cx const> a, std::span<Cx const> b)
{
  require_shape(a.size() == b.size(), "real_dot length mismatch");
  double s = 0.0;
  for (size_t i = 0; i < a.size(); i++) { s += a[i].real() * b[i].real() + a[i].imag() * b[i].imag(); }
  return s;
}

Cx dot(std::span<Cx const> a, std::span<Cx const> b)
{
  require_shape(a.size() == b.size(), "dot length mismatch");
  Cx s = 0.0;
  for (size_t i = 0; i < a.size(); i++) { s += std::conj(a[i]) * b[i]; }
  return s;
}

double norm2(std::span<Cx const> a)
{
  double s = 0.0;
  for (auto const &v : a) { s += std::norm(v); }
  return s;
}

DenseField::DenseField(Dims d)
  : dims{d}
{
  for (auto &c : u) { c.assign(d.size(), 0.0); }
}

double DenseField::max_abs() const
{
  double m = 0.0;
  for (auto const &c : u) {
    for (double v : c) { m = std::max(m, std::abs(v)); }
  }
  return m;
}

} // namespace moco5d
