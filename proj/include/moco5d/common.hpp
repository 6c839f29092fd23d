#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace moco5d {

using Index = std::int64_t;
using Cx = std::complex<double>;
using Vec3 = std::array<double, 3>;

/// Grid extent in voxels. Linear index is (x * ny + y) * nz + z, i.e. z varies fastest.
struct Dims
{
  Index nx = 0;
  Index ny = 0;
  Index nz = 0;

  Index size() const { return nx * ny * nz; }
  Index operator[](int axis) const { return axis == 0 ? nx : (axis == 1 ? ny : nz); }
  Index index(Index x, Index y, Index z) const { return (x * ny + y) * nz + z; }
  bool operator==(Dims const &) const = default;
};

std::string to_string(Dims const &d);

class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Mismatched array or volume shapes.
class ShapeError : public Error
{
public:
  using Error::Error;
};

/// Argument outside the operation's domain (negative weights, out-of-range phases, ...).
class DomainError : public Error
{
public:
  using Error::Error;
};

/// Iterative solver produced a non-finite value.
class DivergenceError : public Error
{
public:
  using Error::Error;
};

void require_shape(bool ok, std::string const &what);

} // namespace moco5d
