#pragma once

#include "common.hpp"

#include <mutex>

namespace moco5d {

/// FFTW's planner is not thread-safe; every plan creation and destruction takes this lock.
std::mutex &fftw_planner_mutex();

/// Batched in-place 1D complex DFT along one axis of a strided array, unnormalized
/// in both directions. Plans use FFTW_ESTIMATE | FFTW_UNALIGNED so results do not
/// depend on planner timing or buffer alignment.
class Dft1d
{
public:
  Dft1d(Index n, Index howmany, Index stride, Index dist);
  ~Dft1d();
  Dft1d(Dft1d const &) = delete;
  Dft1d &operator=(Dft1d const &) = delete;

  Index length() const { return n_; }
  void forward(Cx *data) const;  // sum_n x_n exp(-i 2 pi k n / N)
  void backward(Cx *data) const; // sum_k X_k exp(+i 2 pi k n / N)

private:
  Index n_;
  void *fwd_ = nullptr;
  void *bwd_ = nullptr;
};

} // namespace moco5d
