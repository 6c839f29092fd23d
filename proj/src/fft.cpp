#include "moco5d/fft.hpp"

#include <fftw3.h>
#include <vector>

namespace moco5d {

std::mutex &fftw_planner_mutex()
{
  static std::mutex m;
  return m;
}

Dft1d::Dft1d(Index n, Index howmany, Index stride, Index dist)
  : n_{n}
{
  if (n < 1 || howmany < 1) { throw DomainError("dft: empty transform"); }
  std::vector<Cx> scratch(static_cast<size_t>((n - 1) * stride + (howmany - 1) * dist + 1));
  auto *buf = reinterpret_cast<fftw_complex *>(scratch.data());
  fftw_iodim dim{static_cast<int>(n), static_cast<int>(stride), static_cast<int>(stride)};
  fftw_iodim loop{static_cast<int>(howmany), static_cast<int>(dist), static_cast<int>(dist)};
  std::lock_guard lk(fftw_planner_mutex());
  unsigned const flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  fwd_ = fftw_plan_guru_dft(1, &dim, 1, &loop, buf, buf, FFTW_FORWARD, flags);
  bwd_ = fftw_plan_guru_dft(1, &dim, 1, &loop, buf, buf, FFTW_BACKWARD, flags);
  if (!fwd_ || !bwd_) { throw Error("FFTW failed to create a plan"); }
}

Dft1d::~Dft1d()
{
  std::lock_guard lk(fftw_planner_mutex());
  if (fwd_) { fftw_destroy_plan(static_cast<fftw_plan>(fwd_)); }
  if (bwd_) { fftw_destroy_plan(static_cast<fftw_plan>(bwd_)); }
}

void Dft1d::forward(Cx *data) const
{
  auto *p = reinterpret_cast<fftw_complex *>(data);
  fftw_execute_dft(static_cast<fftw_plan>(fwd_), p, p);
}

void Dft1d::backward(Cx *data) const
{
  auto *p = reinterpret_cast<fftw_complex *>(data);
  fftw_execute_dft(static_cast<fftw_plan>(bwd_), p, p);
}

} // namespace moco5d
