#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "mfchaos/errors.hpp"
#include "mfchaos/kernels.hpp"

using namespace mfchaos;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::vector<KernelSpec> sample_specs() {
  std::vector<KernelSpec> specs;
  specs.push_back(KernelSpec::zero(1));
  specs.push_back(KernelSpec::sine(0.7));
  family::FourierMode m1, m2;
  m1.wavevector = {1, 2, 0};
  m1.amplitude = {0.3, -0.5, 0};
  m2.wavevector = {-1, 1, 0};
  m2.amplitude = {1.0, 0.25, 0};
  specs.push_back(KernelSpec::fourier({m1, m2}, 2));
  specs.push_back(KernelSpec::riesz(0.5, 2, Domain::WholeSpace));
  specs.push_back(KernelSpec::riesz(1.5, 2, Domain::Torus));
  specs.push_back(KernelSpec::biot_savart(Domain::WholeSpace));
  specs.push_back(KernelSpec::biot_savart(Domain::Torus));
  specs.push_back(KernelSpec::truncated(KernelSpec::riesz(1.0, 2, Domain::Torus), 0.05));
  specs.push_back(mollify(KernelSpec::biot_savart(Domain::Torus), 0.1));
  specs.push_back(mollify(KernelSpec::sine(1.0), 0.05));
  return specs;
}

Vec random_point(std::mt19937_64& rng, int d) {
  std::uniform_real_distribution<double> u(-1.3, 1.3);
  Vec x{};
  for (int i = 0; i < d; ++i) x[i] = u(rng);
  return x;
}

double vnorm(const Vec& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }

}  // namespace

TEST_CASE("biot-savart whole-space closed form") {
  const Vec k = eval_kernel(KernelSpec::biot_savart(Domain::WholeSpace), Vec{1.0, 0.0, 0.0});
  CHECK(std::abs(k[0]) < 1e-17);
  CHECK(std::abs(k[1] - 1.0 / kTwoPi) < 1e-15);
}

TEST_CASE("every family is exactly odd") {
  std::mt19937_64 rng(11);
  for (const KernelSpec& spec : sample_specs()) {
    for (int trial = 0; trial < 50; ++trial) {
      const Vec x = random_point(rng, spec.dim());
      Vec mx{};
      for (int i = 0; i < spec.dim(); ++i) mx[i] = -x[i];
      const Vec a = eval_kernel(spec, x);
      const Vec b = eval_kernel(spec, mx);
      for (int i = 0; i < spec.dim(); ++i) {
        INFO(spec.family_name());
        CHECK(a[i] + b[i] == 0.0);
      }
    }
  }
}

TEST_CASE("singular families reject the origin") {
  CHECK_THROWS_AS(eval_kernel(KernelSpec::biot_savart(), Vec{}), SingularPoint);
  CHECK_THROWS_AS(eval_kernel(KernelSpec::riesz(1.0, 1), Vec{}), SingularPoint);
  CHECK_THROWS_AS(eval_kernel(KernelSpec::biot_savart(), Vec{1.0, 0.0, 0.0}), SingularPoint);
  CHECK_NOTHROW(eval_kernel(KernelSpec::truncated(KernelSpec::riesz(1.0, 1), 0.1), Vec{}));
  const std::vector<double> three{0.1, 0.2, 0.3};
  CHECK_THROWS_AS(eval_kernel(KernelSpec::biot_savart(), three), DimensionMismatch);
}

TEST_CASE("truncated riesz is bounded by the cutoff power") {
  const double eps = 0.02, s = 1.3;
  const KernelSpec t = KernelSpec::truncated(KernelSpec::riesz(s, 2, Domain::WholeSpace), eps);
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  for (int i = 0; i < 500; ++i) {
    const Vec x{u(rng), u(rng), 0.0};
    CHECK(vnorm(eval_kernel(t, x)) <= std::pow(eps, -s) * (1 + 1e-14));
  }
}

TEST_CASE("divergences in closed form") {
  const Vec x{0.13, 0.0, 0.0};
  CHECK(eval_divergence(KernelSpec::sine(1.0), x) ==
        doctest::Approx(kTwoPi * std::cos(kTwoPi * 0.13)).epsilon(1e-14));
  CHECK(eval_divergence(KernelSpec::zero(1), x) == 0.0);
  CHECK(eval_divergence(KernelSpec::biot_savart(), Vec{0.2, -0.1, 0.0}) == 0.0);
  CHECK_THROWS_AS(eval_divergence(KernelSpec::truncated(KernelSpec::riesz(1.0, 1), 0.1), x),
                  Unsupported);
}

TEST_CASE("mollifier has unit mass") {
  for (int d = 1; d <= 3; ++d) {
    // Radial Simpson oracle: |S^{d-1}| int_0^w r^{d-1} rho(r) dr.
    const double w = 0.3;
    const int n = 4000;
    const double h = w / n;
    double s = 0.0;
    for (int i = 0; i <= n; ++i) {
      const double r = i * h;
      const double c = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
      s += c * std::pow(r, d - 1) * mollifier_density(w, d, Vec{r, 0.0, 0.0});
    }
    s *= h / 3.0;
    const double sphere = 2.0 * std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d);
    CHECK(std::abs(sphere * s - 1.0) < 1e-10);
  }
  // The one-dimensional 8-point rule integrates the degree-8 bump exactly.
  CHECK(std::abs(mollifier_rule_mass(0.2, 1) - 1.0) < 1e-12);
}

TEST_CASE("mollify of zero is zero, smooth kernels move by at most delta * Lip") {
  const KernelSpec z = mollify(KernelSpec::zero(2), 0.1);
  CHECK(z.family_name() == "zero");
  const double amp = 0.8;
  const KernelSpec k = KernelSpec::sine(amp);
  const double lip = kTwoPi * amp;
  for (double delta : {0.1, 0.05, 0.02}) {
    const KernelSpec kd = mollify(k, delta);
    double worst = 0.0;
    for (int i = 0; i < 200; ++i) {
      const Vec x{i / 200.0, 0.0, 0.0};
      worst = std::max(worst, std::abs(eval_kernel(kd, x)[0] - eval_kernel(k, x)[0]));
    }
    CHECK(worst <= delta * lip);
  }
}

TEST_CASE("mollified biot-savart is bounded") {
  const KernelSpec kd = mollify(KernelSpec::biot_savart(Domain::Torus), 0.08);
  const double bound = mollified_sup_bound(kd);
  double worst = 0.0;
  const int m = 64;
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      const Vec x{(i - m / 2) * 0.25 / m, (j - m / 2) * 0.25 / m, 0.0};
      worst = std::max(worst, vnorm(eval_kernel(kd, x)));
    }
  }
  CHECK(std::isfinite(worst));
  CHECK(worst <= bound);
}

TEST_CASE("periodized biot-savart: periodic, zero mean, unit vortex with background") {
  const KernelSpec bs = KernelSpec::biot_savart(Domain::Torus);
  const Vec x{0.17, -0.31, 0.0};
  const Vec a = eval_kernel(bs, x);
  const Vec b = eval_kernel(bs, Vec{x[0] + 1.0, x[1] - 2.0, 0.0});
  CHECK(std::abs(a[0] - b[0]) < 1e-12);
  CHECK(std::abs(a[1] - b[1]) < 1e-12);
  // Near the origin the regular part vanishes to first order.
  const KernelSpec whole = KernelSpec::biot_savart(Domain::WholeSpace);
  const Vec y{1e-3, 2e-3, 0.0};
  CHECK(vnorm(Vec{eval_kernel(bs, y)[0] - eval_kernel(whole, y)[0],
                  eval_kernel(bs, y)[1] - eval_kernel(whole, y)[1], 0.0}) < 1e-2);
  // Divergence zero and vorticity -1 away from the lattice.
  const double h = 1e-4;
  auto K = [&](double u, double v) { return eval_kernel(bs, Vec{u, v, 0.0}); };
  const Vec p{0.3, 0.2, 0.0};
  const double div = (K(p[0] + h, p[1])[0] - K(p[0] - h, p[1])[0] + K(p[0], p[1] + h)[1] -
                      K(p[0], p[1] - h)[1]) / (2 * h);
  const double curl = (K(p[0] + h, p[1])[1] - K(p[0] - h, p[1])[1] - K(p[0], p[1] + h)[0] +
                       K(p[0], p[1] - h)[0]) / (2 * h);
  CHECK(std::abs(div) < 1e-6);
  CHECK(std::abs(curl + 1.0) < 1e-6);
  // Line averages equal the sawtooth sums of the zero-mean symbol:
  // <u>_x(y) = y - 1/2 and <v>_y(x) = 1/2 - x on (0, 1).
  const int m = 64;
  for (double c : {0.1, 0.35, 0.8}) {
    double mu = 0.0, mv = 0.0;
    for (int i = 0; i < m; ++i) {
      mu += K((i + 0.5) / m, c)[0] / m;
      mv += K(c, (i + 0.5) / m)[1] / m;
    }
    CHECK(std::abs(mu - (c - 0.5)) < 1e-10);
    CHECK(std::abs(mv - (0.5 - c)) < 1e-10);
  }
}

TEST_CASE("convolution: uniform density, zero kernel, linearity") {
  const TorusGrid grid{1, 32};
  const std::vector<double> uniform(grid.size(), 1.0);
  const VectorField sine_conv = convolve_with_density(KernelSpec::sine(1.3), grid, uniform);
  for (double v : sine_conv[0]) CHECK(std::abs(v) < 1e-14);
  const TorusGrid g2{2, 16};
  const std::vector<double> u2(g2.size(), 1.0);
  for (const auto& comp : convolve_with_density(KernelSpec::biot_savart(), g2, u2)) {
    for (double v : comp) CHECK(std::abs(v) < 1e-12);
  }
  const VectorField zero_conv = convolve_with_density(KernelSpec::zero(1), grid, uniform);
  for (double v : zero_conv[0]) CHECK(v == 0.0);

  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  std::vector<double> r1(g2.size()), r2(g2.size()), mix(g2.size());
  for (std::size_t i = 0; i < g2.size(); ++i) {
    r1[i] = u(rng);
    r2[i] = u(rng);
    mix[i] = 0.3 * r1[i] - 1.7 * r2[i];
  }
  const KernelSpec bs = KernelSpec::biot_savart();
  const auto c1 = convolve_with_density(bs, g2, r1);
  const auto c2 = convolve_with_density(bs, g2, r2);
  const auto cm = convolve_with_density(bs, g2, mix);
  for (int c = 0; c < 2; ++c) {
    for (std::size_t i = 0; i < g2.size(); ++i) {
      CHECK(std::abs(cm[c][i] - (0.3 * c1[c][i] - 1.7 * c2[c][i])) < 1e-12);
    }
  }
}

TEST_CASE("spectral convolution equals direct quadrature and converges to the Fourier symbol") {
  const KernelSpec bs = KernelSpec::biot_savart();
  const int kx = 1, ky = 2;
  double previous = 0.1;
  for (int m : {8, 16, 32}) {
    const TorusGrid grid{2, m};
    std::vector<double> rho(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const Vec p = grid.point(i);
      rho[i] = 1.0 + std::cos(kTwoPi * (kx * p[0] + ky * p[1]));
    }
    const auto spectral = convolve_with_density(bs, grid, rho);
    // Direct real-space quadrature oracle.
    const double vol = grid.cell_volume();
    double direct_err = 0.0, symbol_err = 0.0;
    const int k[2] = {kx, ky};
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const Vec xi = grid.point(i);
      double su = 0.0, sv = 0.0;
      for (std::size_t j = 0; j < grid.size(); ++j) {
        if (i == j) continue;
        const Vec xj = grid.point(j);
        const Vec kv = eval_kernel(bs, Vec{xi[0] - xj[0], xi[1] - xj[1], 0.0});
        su += kv[0] * rho[j] * vol;
        sv += kv[1] * rho[j] * vol;
      }
      direct_err = std::max(direct_err, std::abs(su - spectral[0][i]) + std::abs(sv - spectral[1][i]));
      const cplx e = std::exp(cplx(0.0, kTwoPi * (kx * xi[0] + ky * xi[1])));
      const double eu = (fourier_coefficient(bs, k, 0) * e).real();
      const double ev = (fourier_coefficient(bs, k, 1) * e).real();
      symbol_err = std::max(symbol_err, std::abs(eu - spectral[0][i]) + std::abs(ev - spectral[1][i]));
    }
    CHECK(direct_err < 1e-12);
    // Second-order convergence of the punctured grid sum.
    CHECK(symbol_err * 3.5 < previous);
    previous = symbol_err;
  }
}

TEST_CASE("whole-space kernels cannot be convolved on the torus") {
  const TorusGrid grid{2, 8};
  const std::vector<double> rho(grid.size(), 1.0);
  CHECK_THROWS_AS(convolve_with_density(KernelSpec::biot_savart(Domain::WholeSpace), grid, rho),
                  NotTorus);
}
