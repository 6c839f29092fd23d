#include "moco5d/volume.hpp"
#include "test_support.hpp"

#include <doctest.h>

using namespace moco5d;

TEST_CASE("volume invariants are enforced at construction")
{
  CHECK_THROWS_AS(ComplexVolume(Dims{3, 8, 8}, 1.0), ShapeError);
  CHECK_THROWS_AS(ComplexVolume(Dims{8, 8, 8}, 1.0, std::vector<Cx>(10)), ShapeError);
  CHECK_THROWS_AS(ComplexVolume(Dims{8, 8, 8}, 0.0), DomainError);
  ComplexVolume v(Dims{4, 5, 6}, 2.0);
  CHECK(v.size() == 120);
  CHECK(v.dims().index(1, 2, 3) == (1 * 5 + 2) * 6 + 3);
}

TEST_CASE("volume arithmetic checks shapes")
{
  ComplexVolume a(Dims{4, 4, 4}, 1.0), b(Dims{4, 4, 5}, 1.0);
  CHECK_THROWS_AS(a += b, ShapeError);
  a[3] = Cx(1, 2);
  CHECK(a.norm() == doctest::Approx(std::sqrt(5.0)));
  CHECK(real_dot(a.data(), a.data()) == doctest::Approx(5.0));
  a[3] = Cx(std::nan(""), 0);
  CHECK_FALSE(a.all_finite());
}
