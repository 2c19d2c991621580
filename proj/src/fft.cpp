#include "mfchaos/fft.hpp"

#include <fftw3.h>

#include <cstring>
#include <mutex>

#include "mfchaos/errors.hpp"

namespace mfchaos {

namespace {
// FFTW's planner is not reentrant.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

struct FftPlan::Impl {
  fftw_complex* buffer = nullptr;
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;

  ~Impl() {
    std::lock_guard lock(planner_mutex());
    if (fwd) fftw_destroy_plan(fwd);
    if (bwd) fftw_destroy_plan(bwd);
    if (buffer) fftw_free(buffer);
  }
};

FftPlan::FftPlan(std::vector<int> dims) : dims_(std::move(dims)), impl_(std::make_unique<Impl>()) {
  if (dims_.empty()) throw DimensionMismatch("FftPlan needs at least one axis");
  size_ = 1;
  for (int d : dims_) {
    if (d < 1) throw DimensionMismatch("FftPlan axis length must be positive");
    size_ *= static_cast<std::size_t>(d);
  }
  std::lock_guard lock(planner_mutex());
  impl_->buffer = fftw_alloc_complex(size_);
  const int rank = static_cast<int>(dims_.size());
  impl_->fwd = fftw_plan_dft(rank, dims_.data(), impl_->buffer, impl_->buffer, FFTW_FORWARD,
                             FFTW_ESTIMATE);
  impl_->bwd = fftw_plan_dft(rank, dims_.data(), impl_->buffer, impl_->buffer, FFTW_BACKWARD,
                             FFTW_ESTIMATE);
}

FftPlan::~FftPlan() = default;
FftPlan::FftPlan(FftPlan&&) noexcept = default;
FftPlan& FftPlan::operator=(FftPlan&&) noexcept = default;

void FftPlan::forward(std::span<cplx> data) const {
  if (data.size() != size_) throw DimensionMismatch("FftPlan::forward size");
  std::memcpy(impl_->buffer, data.data(), size_ * sizeof(cplx));
  fftw_execute(impl_->fwd);
  std::memcpy(static_cast<void*>(data.data()), impl_->buffer, size_ * sizeof(cplx));
}

void FftPlan::inverse(std::span<cplx> data) const {
  if (data.size() != size_) throw DimensionMismatch("FftPlan::inverse size");
  std::memcpy(impl_->buffer, data.data(), size_ * sizeof(cplx));
  fftw_execute(impl_->bwd);
  const double scale = 1.0 / static_cast<double>(size_);
  auto* src = reinterpret_cast<const cplx*>(impl_->buffer);
  for (std::size_t i = 0; i < size_; ++i) data[i] = src[i] * scale;
}

std::vector<double> circular_convolve(const FftPlan& plan, std::span<const double> a,
                                      std::span<const double> b) {
  const std::size_t n = plan.size();
  if (a.size() != n || b.size() != n) throw DimensionMismatch("circular_convolve size");
  std::vector<cplx> ah(a.begin(), a.end());
  std::vector<cplx> bh(b.begin(), b.end());
  plan.forward(ah);
  plan.forward(bh);
  for (std::size_t i = 0; i < n; ++i) ah[i] *= bh[i];
  plan.inverse(ah);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = ah[i].real();
  return out;
}

}  // namespace mfchaos
