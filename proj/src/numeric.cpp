#include "mfchaos/numeric.hpp"

#include <array>
#include <stdexcept>

#include "mfchaos/errors.hpp"

namespace mfchaos {

double compensated_dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionMismatch("compensated_dot length");
  CompensatedSum s;
  for (std::size_t i = 0; i < a.size(); ++i) s.add(a[i] * b[i]);
  return s.value();
}

double compensated_total(std::span<const double> a) {
  CompensatedSum s;
  for (double x : a) s.add(x);
  return s.value();
}

namespace {

constexpr int kBinomTableSize = 65;

const std::array<std::array<double, kBinomTableSize>, kBinomTableSize>& binom_table() {
  static const auto table = [] {
    std::array<std::array<double, kBinomTableSize>, kBinomTableSize> t{};
    for (int n = 0; n < kBinomTableSize; ++n) {
      t[n][0] = 1.0;
      for (int k = 1; k <= n; ++k) t[n][k] = t[n - 1][k - 1] + (k < n ? t[n - 1][k] : 0.0);
    }
    return t;
  }();
  return table;
}

}  // namespace

double binom(int n, int k) {
  if (k < 0 || n < 0 || k > n) return 0.0;
  if (n < kBinomTableSize) return binom_table()[n][k];
  // Beyond the table the product form is exact until 2^53.
  if (k > n - k) k = n - k;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

void for_each_subset(int n, int k, const std::function<void(std::span<const int>)>& fn) {
  if (k < 0 || k > n) return;
  std::vector<int> idx(k);
  for (int i = 0; i < k; ++i) idx[i] = i;
  while (true) {
    fn(std::span<const int>(idx));
    int i = k - 1;
    while (i >= 0 && idx[i] == n - k + i) --i;
    if (i < 0) return;
    ++idx[i];
    for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

std::vector<std::vector<int>> subsets(int n, int k) {
  std::vector<std::vector<int>> out;
  for_each_subset(n, k, [&](std::span<const int> s) { out.emplace_back(s.begin(), s.end()); });
  return out;
}

LineFit fit_line(std::span<const double> x, std::span<const double> y,
                 std::span<const double> weights) {
  const std::size_t n = x.size();
  if (y.size() != n || (!weights.empty() && weights.size() != n)) {
    throw DimensionMismatch("fit_line lengths");
  }
  if (n < 2) throw std::invalid_argument("fit_line needs at least two points");
  auto w = [&](std::size_t i) { return weights.empty() ? 1.0 : weights[i]; };
  CompensatedSum sw, sx, sy;
  for (std::size_t i = 0; i < n; ++i) {
    sw += w(i);
    sx += w(i) * x[i];
    sy += w(i) * y[i];
  }
  const double xm = sx.value() / sw.value();
  const double ym = sy.value() / sw.value();
  CompensatedSum sxx, sxy;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += w(i) * (x[i] - xm) * (x[i] - xm);
    sxy += w(i) * (x[i] - xm) * (y[i] - ym);
  }
  LineFit fit;
  fit.slope = sxy.value() / sxx.value();
  fit.intercept = ym - fit.slope * xm;
  if (n > 2) {
    CompensatedSum rss;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = y[i] - fit.intercept - fit.slope * x[i];
      rss += w(i) * r * r;
    }
    // With explicit 1/sigma^2 weights the slope variance is 1/Sxx; without
    // weights it is estimated from the residual scatter.
    fit.slope_stderr = weights.empty()
                           ? std::sqrt(rss.value() / static_cast<double>(n - 2) / sxx.value())
                           : std::sqrt(1.0 / sxx.value());
  }
  return fit;
}

double trapezoid(std::span<const double> t, std::span<const double> y) {
  if (t.size() != y.size()) throw DimensionMismatch("trapezoid lengths");
  CompensatedSum s;
  for (std::size_t i = 1; i < t.size(); ++i) s += 0.5 * (t[i] - t[i - 1]) * (y[i] + y[i - 1]);
  return s.value();
}

std::optional<std::size_t> checked_pow(std::size_t base, int exponent, std::size_t cap) {
  std::size_t r = 1;
  for (int i = 0; i < exponent; ++i) {
    if (base != 0 && r > cap / base) return std::nullopt;
    r *= base;
  }
  if (r > cap) return std::nullopt;
  return r;
}

}  // namespace mfchaos
