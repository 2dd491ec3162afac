#include "msvad/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <map>
#include <mutex>

#include "msvad/error.hpp"

namespace msvad::dsp {
namespace {

std::mutex& PlanMutex() {
  static std::mutex m;
  return m;
}

// FFTW planning is not thread-safe, so plans live in a shared cache and are
// never destroyed.
fftw_plan PlanFor(int size) {
  std::lock_guard<std::mutex> lock(PlanMutex());
  static std::map<int, fftw_plan> cache;
  auto it = cache.find(size);
  if (it != cache.end()) return it->second;
  std::vector<double> in(static_cast<std::size_t>(size));
  std::vector<fftw_complex> out(static_cast<std::size_t>(size / 2 + 1));
  fftw_plan plan = fftw_plan_dft_r2c_1d(size, in.data(), out.data(),
                                        FFTW_ESTIMATE | FFTW_UNALIGNED);
  if (plan == nullptr) throw Error(ErrorKind::kNumericalFailure, "FFTW planning failed");
  cache.emplace(size, plan);
  return plan;
}

}  // namespace

int NextPowerOfTwo(int n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

RealFft::RealFft(int size) : size_(size), plan_(nullptr), scratch_(static_cast<std::size_t>(size)) {
  if (size < 2 || (size & (size - 1)) != 0) {
    throw Error(ErrorKind::kInvalidArgument, "FFT size must be a power of two >= 2");
  }
  plan_ = PlanFor(size);
}

void RealFft::Forward(std::span<const double> input, std::vector<std::complex<double>>& spectrum) {
  const std::size_t n = std::min(input.size(), scratch_.size());
  std::copy_n(input.begin(), n, scratch_.begin());
  std::fill(scratch_.begin() + static_cast<std::ptrdiff_t>(n), scratch_.end(), 0.0);
  spectrum.resize(static_cast<std::size_t>(bins()));
  // std::complex<double> is layout-compatible with fftw_complex.
  fftw_execute_dft_r2c(static_cast<fftw_plan>(plan_), scratch_.data(),
                       reinterpret_cast<fftw_complex*>(spectrum.data()));
}

}  // namespace msvad::dsp
