#pragma once

#include <complex>
#include <span>
#include <vector>

namespace msvad::dsp {

// Forward real-to-complex DFT of a fixed power-of-two size, backed by FFTW.
// Plans are created once per size under a global lock; Forward() itself is
// safe to call concurrently.
class RealFft {
 public:
  explicit RealFft(int size);

  int size() const { return size_; }
  int bins() const { return size_ / 2 + 1; }

  // input.size() must be <= size(); shorter input is zero-padded.
  void Forward(std::span<const double> input, std::vector<std::complex<double>>& spectrum);

 private:
  int size_;
  void* plan_;
  std::vector<double> scratch_;
};

int NextPowerOfTwo(int n);

}  // namespace msvad::dsp
