#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "mfchaos/errors.hpp"
#include "mfchaos/particles.hpp"

using namespace mfchaos;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

DensityField gaussian_phase_density(int mx, int mv, double sigma) {
  const PhaseGrid g = PhaseGrid::kinetic(1, mx, mv, 6.0 * sigma);
  return DensityField::from_function(g, [&](std::span<const double> z) {
    return (1.0 + 0.5 * std::cos(kTwoPi * z[0])) * std::exp(-0.5 * z[1] * z[1] / (sigma * sigma));
  });
}

}  // namespace

TEST_CASE("counter rng is a pure function of its key") {
  const CounterRng a(7, 3), b(7, 3), c(7, 4);
  CHECK(a.bits(1, 2, 3) == b.bits(1, 2, 3));
  CHECK(a.bits(1, 2, 3) != c.bits(1, 2, 3));
  CHECK(a.bits(1, 2, 3) != a.bits(1, 2, 4));
  double s = 0.0, q = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = a.normal(i, 0, 0);
    s += z;
    q += z * z;
  }
  CHECK(std::abs(s / n) < 4.0 / std::sqrt(n));
  CHECK(std::abs(q / n - 1.0) < 4.0 * std::sqrt(2.0 / n));
}

TEST_CASE("uniform sampling has the uniform mean") {
  const DensityField f = DensityField::uniform(PhaseGrid::spatial(2, 16));
  const ParticleState s = sample_initial(f, 10000, Order::First, CounterRng(1, 0));
  for (int a = 0; a < 2; ++a) {
    double m = 0.0;
    for (int i = 0; i < s.particles; ++i) m += s.position(i)[a];
    m /= s.particles;
    CHECK(std::abs(m - 0.5) <= 3.0 / std::sqrt(12.0 * 1e4));
  }
  for (double x : s.positions) CHECK((x >= 0.0 && x < 1.0));
}

TEST_CASE("point-mass density puts every particle in its cell") {
  const PhaseGrid g = PhaseGrid::spatial(1, 8);
  std::vector<double> v(8, 0.0);
  v[3] = 8.0;
  const ParticleState s = sample_initial(DensityField(g, v), 500, Order::First, CounterRng(2, 0));
  for (double x : s.positions) CHECK((x >= 2.5 / 8 && x < 3.5 / 8));
}

TEST_CASE("velocity variance matches the discretized density") {
  const DensityField f = gaussian_phase_density(16, 64, 0.7);
  const PhaseGrid& g = f.grid();
  // Quadrature oracle: second moment of v over the cells, plus the uniform
  // in-cell jitter variance dv^2 / 12.
  double m1 = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double v = g.center(i)[1];
    m1 += v * f[i] * g.cell_volume();
    m2 += v * v * f[i] * g.cell_volume();
  }
  const double expected = m2 - m1 * m1 + g.dv() * g.dv() / 12.0;
  const int n = 40000;
  const ParticleState s = sample_initial(f, n, Order::Second, CounterRng(3, 0));
  double a = 0.0, b = 0.0, c = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = s.velocity(i)[0];
    a += v;
    b += v * v;
    c += v * v * v * v;
  }
  const double var = b / n - (a / n) * (a / n);
  const double stderr_var = std::sqrt((c / n - (b / n) * (b / n)) / n);
  CHECK(std::abs(var - expected) < 4.0 * stderr_var);
}

TEST_CASE("sampling rejects mismatched densities") {
  const DensityField spatial = DensityField::uniform(PhaseGrid::spatial(1, 8));
  CHECK_THROWS_AS(sample_initial(spatial, 4, Order::Second, CounterRng(0, 0)), DimensionMismatch);
  CHECK_THROWS_AS(DensityField(PhaseGrid::spatial(1, 8), std::vector<double>(8, 2.0)),
                  UnnormalizedDensity);
}

TEST_CASE("two-body sine forces") {
  const ForceResult r = pairwise_forces(std::vector<double>{0.25, 0.0}, 1, KernelSpec::sine(1.0));
  CHECK(r.forces[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(r.forces[1] == doctest::Approx(-1.0).epsilon(1e-15));
  const ForceResult z = pairwise_forces(std::vector<double>{0.1, 0.7, 0.3}, 1, KernelSpec::zero(1));
  for (double v : z.forces) CHECK(v == 0.0);
}

TEST_CASE("forces sum to zero and the parallel path agrees") {
  const DensityField f = DensityField::uniform(PhaseGrid::spatial(2, 8));
  const ParticleState s = sample_initial(f, 50, Order::First, CounterRng(4, 0));
  for (const KernelSpec& k : {KernelSpec::biot_savart(), KernelSpec::riesz(0.5, 2, Domain::Torus),
                              KernelSpec::biot_savart(Domain::WholeSpace)}) {
    const ForceResult a = pairwise_forces(s.positions, 2, k);
    const ForceResult b = pairwise_forces_parallel(s.positions, 2, k);
    double sx = 0.0, sy = 0.0, scale = 0.0;
    for (int i = 0; i < 50; ++i) {
      sx += a.forces[2 * i];
      sy += a.forces[2 * i + 1];
      scale = std::max(scale, std::abs(a.forces[2 * i]) + std::abs(a.forces[2 * i + 1]));
    }
    CHECK(std::abs(sx) <= 1e-13 * scale * 50);
    CHECK(std::abs(sy) <= 1e-13 * scale * 50);
    for (std::size_t i = 0; i < a.forces.size(); ++i) {
      CHECK(std::abs(a.forces[i] - b.forces[i]) <= 1e-13 * scale);
    }
  }
}

TEST_CASE("collision policy") {
  const std::vector<double> x{0.2, 0.3, 0.2, 0.3};
  const KernelSpec bs = KernelSpec::biot_savart();
  CollisionPolicy error{CollisionPolicy::Kind::Error, 0.0};
  CHECK_THROWS_AS(pairwise_forces(x, 2, bs, error), CollisionError);
  CHECK_THROWS_AS(pairwise_forces_parallel(x, 2, bs, error), CollisionError);
  const ForceResult r = pairwise_forces(x, 2, bs);
  CHECK(r.clamp_incidents == 1);
  CHECK(std::isfinite(r.forces[0]));
  CHECK(r.forces[0] == -r.forces[2]);
  CHECK(pairwise_forces_parallel(x, 2, bs).clamp_incidents == 1);
}

TEST_CASE("free transport is exact up to rounding") {
  SimConfig cfg;
  cfg.order = Order::Second;
  cfg.particles = 5;
  cfg.dt = 0.01;
  cfg.t_end = 1.0;
  const DensityField f = gaussian_phase_density(8, 16, 1.0);
  ParticleState s = sample_initial(f, 5, Order::Second, CounterRng(5, 0));
  const ParticleState s0 = s;
  const CounterRng rng(5, 0);
  for (int i = 0; i < 250; ++i) step(s, KernelSpec::zero(1), cfg, rng);
  for (int i = 0; i < 5; ++i) {
    CHECK(std::abs(s.unwrapped[i] - (s0.unwrapped[i] + 2.5 * s0.velocities[i])) < 1e-12);
    CHECK(s.velocities[i] == s0.velocities[i]);
    CHECK(std::abs(s.positions[i] - (s.unwrapped[i] - std::floor(s.unwrapped[i]))) < 1e-12);
  }
  cfg.order = Order::First;
  ParticleState p = sample_initial(DensityField::uniform(PhaseGrid::spatial(1, 8)), 5, Order::First, rng);
  const ParticleState p0 = p;
  for (int i = 0; i < 10; ++i) step(p, KernelSpec::zero(1), cfg, rng);
  CHECK(p.positions == p0.positions);
}

TEST_CASE("momentum and centre of mass are conserved at alpha = 0") {
  SimConfig cfg;
  cfg.particles = 20;
  cfg.dt = 1e-3;
  cfg.order = Order::Second;
  const KernelSpec k = KernelSpec::sine(1.0);
  const CounterRng rng(6, 0);
  ParticleState s = sample_initial(gaussian_phase_density(8, 16, 1.0), 20, Order::Second, rng);
  double p0 = 0.0;
  for (double v : s.velocities) p0 += v;
  for (int i = 0; i < 1000; ++i) step(s, k, cfg, rng);
  double p1 = 0.0;
  for (double v : s.velocities) p1 += v;
  CHECK(std::abs(p1 - p0) <= 1e-12 * 20);

  cfg.order = Order::First;
  const KernelSpec bs = KernelSpec::biot_savart(Domain::WholeSpace);
  ParticleState q = sample_initial(DensityField::uniform(PhaseGrid::spatial(2, 8)), 20, Order::First, rng);
  q.domain = Domain::WholeSpace;
  double c0[2] = {0, 0}, c1[2] = {0, 0};
  for (int i = 0; i < 20; ++i) {
    for (int a = 0; a < 2; ++a) c0[a] += q.unwrapped[2 * i + a];
  }
  for (int i = 0; i < 1000; ++i) step(q, bs, cfg, rng);
  for (int i = 0; i < 20; ++i) {
    for (int a = 0; a < 2; ++a) c1[a] += q.unwrapped[2 * i + a];
  }
  CHECK(std::abs(c1[0] - c0[0]) <= 1e-12 * 20);
  CHECK(std::abs(c1[1] - c0[1]) <= 1e-12 * 20);
}

TEST_CASE("velocity variance grows by 2 alpha dt per step") {
  SimConfig cfg;
  cfg.order = Order::Second;
  cfg.particles = 2;
  cfg.alpha = 0.3;
  cfg.dt = 0.05;
  const int R = 10000;
  std::vector<double> dv;
  for (int r = 0; r < R; ++r) {
    const CounterRng rng(8, r);
    ParticleState s = make_state(Order::Second, Domain::Torus, 1, {0.1, 0.6}, {0.0, 0.0});
    step(s, KernelSpec::zero(1), cfg, rng);
    dv.push_back(s.velocities[0]);
  }
  double m = 0.0, q = 0.0, f4 = 0.0;
  for (double v : dv) {
    m += v;
    q += v * v;
    f4 += v * v * v * v;
  }
  m /= R;
  const double var = q / R - m * m;
  const double se = std::sqrt((f4 / R - (q / R) * (q / R)) / R);
  CHECK(std::abs(var - 2.0 * cfg.alpha * cfg.dt) < 4.0 * se);
}

TEST_CASE("co-rotating vortex pair") {
  const KernelSpec bs = KernelSpec::biot_savart(Domain::WholeSpace);
  const double sep = 0.2;
  const double period = 2.0 * std::numbers::pi * std::numbers::pi * sep * sep;
  double previous_drift = 1e300;
  for (double dt : {period / 10000, period / 20000}) {
    SimConfig cfg;
    cfg.dt = dt;
    ParticleState s = make_state(Order::First, Domain::WholeSpace, 2, {-0.1, 0.0, 0.1, 0.0});
    const CounterRng rng(9, 0);
    // Track the unwrapped polar angle of the separation vector.
    double angle = 0.0, last = std::atan2(s.positions[3] - s.positions[1], s.positions[2] - s.positions[0]);
    long steps = 0;
    while (angle < 2.0 * std::numbers::pi) {
      step(s, bs, cfg, rng);
      ++steps;
      const double now = std::atan2(s.positions[3] - s.positions[1], s.positions[2] - s.positions[0]);
      double d = now - last;
      if (d < -std::numbers::pi) d += 2.0 * std::numbers::pi;
      angle += d;
      last = now;
    }
    const double measured = steps * dt;
    CHECK(std::abs(measured - period) / period < 0.01);
    const double r = std::hypot(s.positions[2] - s.positions[0], s.positions[3] - s.positions[1]);
    const double drift = std::abs(r - sep);
    CHECK(drift < previous_drift);
    previous_drift = drift;
  }
}

TEST_CASE("ensembles are deterministic, exchangeable and unbiased at t = 0") {
  SimConfig cfg;
  cfg.particles = 6;
  cfg.order = Order::Second;
  cfg.alpha = 0.1;
  cfg.dt = 0.05;
  cfg.t_end = 0.5;
  cfg.seed = 42;
  const DensityField f = gaussian_phase_density(16, 32, 1.0);
  const std::vector<Observer> obs{
      {"x1", [](const ParticleState& s) { return s.positions[0]; }},
      {"cos_mean", [](const ParticleState& s) {
         double a = 0.0;
         for (int i = 0; i < s.particles; ++i) a += std::cos(kTwoPi * s.positions[i]);
         return a / s.particles;
       }}};
  EnsembleOptions opt;
  opt.replicas = 2;
  opt.record_times = {0.0, 0.5};
  const EnsembleResult a = run_ensemble(cfg, KernelSpec::sine(0.5), f, opt, obs);
  opt.parallel = false;
  const EnsembleResult b = run_ensemble(cfg, KernelSpec::sine(0.5), f, opt, obs);
  REQUIRE(a.rows.size() == b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) CHECK(a.rows[i].value == b.rows[i].value);

  // Oracle for the t = 0 mean of cos(2 pi x) under the discretized f: the
  // cell average of cos over [c - h/2, c + h/2) is cos(2 pi c) sinc(h).
  const PhaseGrid& g = f.grid();
  const double sinc = std::sin(std::numbers::pi * g.dx()) / (std::numbers::pi * g.dx());
  double expected = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    expected += std::cos(kTwoPi * g.center(i)[0]) * sinc * f[i] * g.cell_volume();
  }
  opt.replicas = 400;
  opt.record_times = {0.0};
  const EnsembleResult big = run_ensemble(cfg, KernelSpec::sine(0.5), f, opt, obs);
  const auto [m400, se400] = big.mean_stderr("cos_mean", 0.0);
  CHECK(std::abs(m400 - expected) < 4.0 * se400);
  opt.replicas = 1600;
  const auto [m1600, se1600] = run_ensemble(cfg, KernelSpec::sine(0.5), f, opt, obs).mean_stderr("cos_mean", 0.0);
  (void)m1600;
  CHECK(std::abs(se400 / se1600 / 2.0 - 1.0) < 0.2);
}

TEST_CASE("permuting particles and streams permutes the trajectory") {
  SimConfig cfg;
  cfg.particles = 5;
  cfg.alpha = 0.2;
  cfg.dt = 0.01;
  const CounterRng rng(10, 0);
  ParticleState s = sample_initial(DensityField::uniform(PhaseGrid::spatial(1, 8)), 5, Order::First, rng);
  const std::vector<int> perm{3, 0, 4, 1, 2};
  ParticleState p = permute(s, perm);
  for (int i = 0; i < 100; ++i) {
    step(s, KernelSpec::sine(1.0), cfg, rng);
    step(p, KernelSpec::sine(1.0), cfg, rng);
  }
  for (int i = 0; i < 5; ++i) CHECK(std::abs(p.unwrapped[i] - s.unwrapped[perm[i]]) < 1e-12);
}
