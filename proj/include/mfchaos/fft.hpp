#pragma once

#include <complex>
#include <memory>
#include <span>
#include <vector>

namespace mfchaos {

using cplx = std::complex<double>;

// Multidimensional complex DFT on a row-major array, backed by FFTW.
// forward: X_k = sum_j x_j e^{-2 pi i k.j / n}; inverse includes the 1/n factor.
// A plan owns scratch storage, so one instance must not be used from two
// threads at once; construct one per thread instead.
class FftPlan {
 public:
  explicit FftPlan(std::vector<int> dims);
  ~FftPlan();
  FftPlan(FftPlan&&) noexcept;
  FftPlan& operator=(FftPlan&&) noexcept;
  FftPlan(const FftPlan&) = delete;
  FftPlan& operator=(const FftPlan&) = delete;

  [[nodiscard]] std::size_t size() const noexcept { return size_; }
  [[nodiscard]] const std::vector<int>& dims() const noexcept { return dims_; }

  void forward(std::span<cplx> data) const;
  void inverse(std::span<cplx> data) const;

 private:
  struct Impl;
  std::vector<int> dims_;
  std::size_t size_ = 0;
  std::unique_ptr<Impl> impl_;
};

// Signed frequency of index j on an n-point periodic grid: 0,1,...,-1.
inline int signed_frequency(int j, int n) noexcept { return j <= n / 2 ? j : j - n; }

// Periodic convolution (a * b)_i = sum_j a_{i-j} b_j on a row-major grid,
// evaluated through the DFT.
std::vector<double> circular_convolve(const FftPlan& plan, std::span<const double> a,
                                      std::span<const double> b);

}  // namespace mfchaos
