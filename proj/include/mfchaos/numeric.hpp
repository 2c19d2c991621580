#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace mfchaos {

// Neumaier's variant of Kahan summation: exact to O(eps) independent of the
// number of terms as long as the running sum does not cancel catastrophically.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  CompensatedSum& operator+=(double x) noexcept {
    add(x);
    return *this;
  }
  [[nodiscard]] double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

double compensated_dot(std::span<const double> a, std::span<const double> b);
double compensated_total(std::span<const double> a);

// Binomial coefficient as a double; exact for n <= 64 via a memoized table.
double binom(int n, int k);

// Calls fn once for every k-subset of {0,...,n-1} in lexicographic order.
void for_each_subset(int n, int k, const std::function<void(std::span<const int>)>& fn);

// All k-subsets of {0,...,n-1}, lexicographic.
std::vector<std::vector<int>> subsets(int n, int k);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
};

// Weighted least squares y ~ intercept + slope x; empty weights mean unit weights.
LineFit fit_line(std::span<const double> x, std::span<const double> y,
                 std::span<const double> weights = {});

// Trapezoid rule on a possibly nonuniform grid.
double trapezoid(std::span<const double> t, std::span<const double> y);

// base^exponent, or nullopt once the product exceeds cap.
std::optional<std::size_t> checked_pow(std::size_t base, int exponent, std::size_t cap);

}  // namespace mfchaos
