#pragma once

// Thin RAII wrapper over FFTW complex DFTs.

#include <fftw3.h>

#include <algorithm>
#include <mutex>
#include <span>
#include <vector>

#include "wdlink/types.hpp"

namespace wdlink {

namespace detail {
// FFTW's planner is not thread-safe; executing distinct plans is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

enum class FftDirection { Forward, Inverse };

/// Unnormalized DFT of a fixed size. Each instance owns its buffers.
class Fft {
 public:
  Fft(std::size_t n, FftDirection dir) : n_(n) {
    require(n > 0, "FFT size must be positive");
    std::lock_guard lock(detail::fftw_planner_mutex());
    buf_ = reinterpret_cast<cplx*>(fftw_malloc(sizeof(fftw_complex) * n));
    auto* p = reinterpret_cast<fftw_complex*>(buf_);
    plan_ = fftw_plan_dft_1d(static_cast<int>(n), p, p,
                             dir == FftDirection::Forward ? FFTW_FORWARD : FFTW_BACKWARD,
                             FFTW_ESTIMATE);
  }

  Fft(const Fft&) = delete;
  Fft& operator=(const Fft&) = delete;

  ~Fft() {
    std::lock_guard lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(plan_);
    fftw_free(buf_);
  }

  [[nodiscard]] std::size_t size() const { return n_; }

  /// `in` may be shorter than the transform; the tail is zero-filled.
  void execute(std::span<const cplx> in, std::span<cplx> out) {
    std::fill(buf_, buf_ + n_, cplx{});
    std::copy_n(in.begin(), std::min(in.size(), n_), buf_);
    fftw_execute(plan_);
    std::copy_n(buf_, std::min(out.size(), n_), out.begin());
  }

  std::vector<cplx> operator()(std::span<const cplx> in) {
    std::vector<cplx> out(n_);
    execute(in, out);
    return out;
  }

 private:
  std::size_t n_;
  cplx* buf_ = nullptr;
  fftw_plan plan_ = nullptr;
};

inline std::vector<cplx> fft(std::span<const cplx> x) {
  Fft f(x.size(), FftDirection::Forward);
  return f(x);
}

/// Inverse DFT scaled by 1/N, so ifft(fft(x)) == x.
inline std::vector<cplx> ifft(std::span<const cplx> x) {
  Fft f(x.size(), FftDirection::Inverse);
  auto y = f(x);
  const double s = 1.0 / static_cast<double>(x.size());
  for (auto& v : y) v *= s;
  return y;
}

/// Signed frequency of DFT bin `k` for an `n`-point transform at rate `fs`.
inline double bin_frequency(std::size_t k, std::size_t n, double fs) {
  const auto ki = static_cast<long long>(k);
  const auto ni = static_cast<long long>(n);
  const long long s = (2 * ki < ni) ? ki : ki - ni;
  return static_cast<double>(s) * fs / static_cast<double>(n);
}

}  // namespace wdlink
