#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "mfchaos/errors.hpp"
#include "mfchaos/hierarchy.hpp"

using namespace mfchaos;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

DensityField bumpy_spatial(int mx) {
  return DensityField::from_function(PhaseGrid::spatial(1, mx), [](std::span<const double> z) {
    return 1.0 + 0.5 * std::cos(kTwoPi * z[0]) + 0.2 * std::sin(2.0 * kTwoPi * z[0]);
  });
}

DensityField gaussian_kinetic(int mx, int mv, double lv) {
  return DensityField::from_function(PhaseGrid::kinetic(1, mx, mv, lv), [](std::span<const double> z) {
    return (1.0 + 0.4 * std::cos(kTwoPi * z[0])) * std::exp(-0.5 * z[1] * z[1]);
  });
}

NTensor random_tensor(int order, StateSpace space, std::mt19937& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  NTensor t(order, space);
  for (double& v : t.values()) v = u(rng);
  return t;
}

NTensor symmetrize(const NTensor& g) {
  const int n = g.order();
  NTensor out(n, g.space());
  std::vector<int> d(n), p(n);
  for (std::size_t z = 0; z < g.size(); ++z) {
    g.unravel(z, d);
    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = i;
    double acc = 0.0;
    int count = 0;
    do {
      for (int i = 0; i < n; ++i) p[i] = d[perm[i]];
      acc += g.at(p);
      ++count;
    } while (std::next_permutation(perm.begin(), perm.end()));
    out[z] = acc / count;
  }
  out.set_symmetric(true);
  return out;
}

double max_abs(const NTensor& a) {
  double m = 0.0;
  for (double v : a.values()) m = std::max(m, std::abs(v));
  return m;
}

double max_diff(const NTensor& a, const NTensor& b) { return max_abs(axpy(a, -1.0, b)); }

// Straight transcription of the summands through NTensor::at and the grid's
// own shift functions; no flat-index arithmetic shared with the library.
struct Reference {
  int N;
  PhaseGrid grid;
  TwoPointField vf;
  std::vector<double> w;

  Reference(int particles, const DensityField& f, const KernelSpec& kernel)
      : N(particles), grid(f.grid()), vf(compute_Vf(f, kernel)), w(site_masses(vf.weight_object())) {}

  [[nodiscard]] int sites() const { return static_cast<int>(grid.size()); }

  [[nodiscard]] Vec pair(int a, int b) const {
    Vec k{};
    const std::size_t off = grid.spatial_offset(grid.spatial_index(a), grid.spatial_index(b));
    for (int ax = 0; ax < grid.dim; ++ax) k[ax] = vf.kernel_samples()[ax][off];
    return k;
  }
  [[nodiscard]] Vec mean(int a) const {
    Vec k{};
    for (int ax = 0; ax < grid.dim; ++ax) k[ax] = vf.force()[ax][grid.spatial_index(a)];
    return k;
  }
  [[nodiscard]] double grad(const NTensor& c, std::vector<int> args, int slot, const Vec& b) const {
    const bool kinetic = grid.has_velocity();
    const double h = kinetic ? grid.dv() : grid.dx();
    const double c0 = c.at(args);
    const int site = args[slot];
    double out = 0.0;
    for (int ax = 0; ax < grid.dim; ++ax) {
      const int step = b[ax] > 0.0 ? 1 : -1;
      args[slot] = static_cast<int>(kinetic ? grid.shift_v(site, ax, step) : grid.shift_x(site, ax, step));
      out += std::abs(b[ax]) * (c.at(args) - c0) / h;
    }
    return out;
  }
  static std::vector<int> drop(const std::vector<int>& z, int i, int j = -1) {
    std::vector<int> out;
    for (int s = 0; s < static_cast<int>(z.size()); ++s) {
      if (s != i && s != j) out.push_back(z[s]);
    }
    return out;
  }
  static std::vector<int> append(std::vector<int> z, std::initializer_list<int> extra) {
    z.insert(z.end(), extra);
    return z;
  }

  // Every summand of S+, So, S- at the multi-index z, in derivation order.
  [[nodiscard]] std::vector<double> plus(const NTensor& c, const std::vector<int>& z) const {
    const int n = static_cast<int>(z.size());
    std::vector<double> s(3, 0.0);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        const int pos = i < j ? i : i - 1;
        s[0] += grad(c, drop(z, j), pos, mean(z[i]));
        for (int a = 0; a < sites(); ++a) s[1] -= vf(a, z[j]) * c.at(append(drop(z, i, j), {a})) * w[a];
        s[2] -= grad(c, drop(z, j), pos, pair(z[i], z[j]));
      }
    }
    return s;
  }

  [[nodiscard]] std::vector<double> circ(const NTensor& c, const std::vector<int>& z) const {
    const int n = static_cast<int>(z.size());
    const double q = 1.0 / (N - 1), r = static_cast<double>(N - n) / (N - 1);
    std::vector<double> s(6, 0.0);
    for (int i = 0; i < n; ++i) {
      s[0] -= r * grad(c, z, i, mean(z[i]));
      for (int a = 0; a < sites(); ++a) s[1] += r * vf(a, z[i]) * c.at(append(drop(z, i), {a})) * w[a];
    }
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        s[2] -= q * grad(c, z, i, pair(z[i], z[j]));
        const int pos = i < j ? i : i - 1;
        for (int a = 0; a < sites(); ++a) {
          s[3] += q * w[a] * grad(c, append(drop(z, j), {a}), pos, pair(z[i], a));
          s[4] -= q * vf(a, z[j]) * c.at(append(drop(z, i), {a})) * w[a];
          for (int b = 0; b < sites(); ++b) {
            s[5] += q * vf(a, b) * c.at(append(drop(z, i, j), {a, b})) * w[a] * w[b];
          }
        }
      }
    }
    return s;
  }

  [[nodiscard]] std::vector<double> minus(const NTensor& c, const std::vector<int>& z) const {
    const int n = static_cast<int>(z.size());
    const double r = static_cast<double>(N - n) / (N - 1);
    std::vector<double> s(3, 0.0);
    for (int i = 0; i < n; ++i) {
      for (int a = 0; a < sites(); ++a) {
        s[0] += r * vf(a, z[i]) * c.at(append(z, {a})) * w[a];
        s[1] -= r * w[a] * grad(c, append(z, {a}), i, pair(z[i], a));
        for (int b = 0; b < sites(); ++b) {
          s[2] -= 2.0 * r * vf(a, b) * c.at(append(drop(z, i), {a, b})) * w[a] * w[b];
        }
      }
    }
    return s;
  }
};

template <class Op>
double summand_mismatch(const HierarchyOperators::Terms& terms, const NTensor& any_out, Op reference) {
  double worst = 0.0;
  std::vector<int> z(any_out.order());
  for (std::size_t idx = 0; idx < any_out.size(); ++idx) {
    any_out.unravel(idx, z);
    const std::vector<double> ref = reference(z);
    REQUIRE(ref.size() == terms.summands.size());
    for (std::size_t k = 0; k < ref.size(); ++k) {
      worst = std::max(worst, std::abs(terms.summands[k][idx] - ref[k]) / (1.0 + std::abs(ref[k])));
    }
  }
  return worst;
}

OracleConfig smooth_config(int mx, int particles, double dt, double t_end) {
  OracleConfig c;
  c.grid = PhaseGrid::spatial(1, mx);
  c.kernel = KernelSpec::sine(1.0);
  c.alpha = 0.05;
  c.particles = particles;
  c.time = {t_end, dt, 1};
  c.stepping = Stepping::MatrixExponential;
  return c;
}

std::vector<double> cosine_psi(const PhaseGrid& grid) {
  std::vector<double> psi(grid.size());
  for (std::size_t i = 0; i < psi.size(); ++i) psi[i] = 0.3 + 0.7 * std::cos(kTwoPi * grid.center(i)[0]);
  return psi;
}

OracleRun run_with(const OracleConfig& c, int k) {
  const std::vector<double> psi = cosine_psi(c.grid);
  const StateSpace space{static_cast<int>(c.grid.size()), c.grid.cell_volume()};
  return run_oracle(c, bumpy_spatial(c.grid.mx), build_final_data(psi, space, c.particles, k));
}

}  // namespace

TEST_CASE("S operators match a direct transcription of every summand") {
  std::mt19937 rng(7);
  SUBCASE("spatial grid") {
    const DensityField f = bumpy_spatial(6);
    const KernelSpec kernel = KernelSpec::sine(1.3);
    const HierarchyOperators ops(5, f, kernel, 0.1);
    const Reference ref(5, f, kernel);
    const StateSpace space = ops.weight().space();
    for (int n = 1; n <= 3; ++n) {
      const NTensor lower = random_tensor(n - 1, space, rng);
      const NTensor same = random_tensor(n, space, rng);
      const NTensor upper = random_tensor(n + 1, space, rng);
      const auto p = ops.plus(lower);
      const auto o = ops.circ(same);
      const auto m = ops.minus(upper);
      CHECK(summand_mismatch(p, same, [&](const auto& z) { return ref.plus(lower, z); }) < 1e-12);
      CHECK(summand_mismatch(o, same, [&](const auto& z) { return ref.circ(same, z); }) < 1e-12);
      CHECK(summand_mismatch(m, same, [&](const auto& z) { return ref.minus(upper, z); }) < 1e-12);
    }
  }
  SUBCASE("kinetic grid") {
    const DensityField f = gaussian_kinetic(4, 4, 3.0);
    const KernelSpec kernel = KernelSpec::sine(0.8);
    const HierarchyOperators ops(4, f, kernel, 0.1);
    const Reference ref(4, f, kernel);
    const StateSpace space = ops.weight().space();
    const NTensor lower = random_tensor(1, space, rng);
    const NTensor same = random_tensor(2, space, rng);
    const NTensor upper = random_tensor(3, space, rng);
    CHECK(summand_mismatch(ops.plus(lower), same, [&](const auto& z) { return ref.plus(lower, z); }) < 1e-12);
    CHECK(summand_mismatch(ops.circ(same), same, [&](const auto& z) { return ref.circ(same, z); }) < 1e-12);
    CHECK(summand_mismatch(ops.minus(upper), same, [&](const auto& z) { return ref.minus(upper, z); }) < 1e-12);
  }
}

TEST_CASE("zero kernel makes every S operator the zero map") {
  std::mt19937 rng(3);
  const HierarchyOperators ops(4, bumpy_spatial(6), KernelSpec::zero(1), 0.1);
  const StateSpace space = ops.weight().space();
  const NTensor c1 = random_tensor(1, space, rng), c2 = random_tensor(2, space, rng);
  const NTensor c3 = random_tensor(3, space, rng), c4 = random_tensor(4, space, rng);
  CHECK(max_abs(ops.plus(c1).total()) == 0.0);
  CHECK(max_abs(ops.circ(c2).total()) == 0.0);
  CHECK(max_abs(ops.minus(c3).total()) == 0.0);
  CHECK(max_abs(ops.equal(c4)) == 0.0);
}

TEST_CASE("S operators are linear") {
  std::mt19937 rng(11);
  const HierarchyOperators ops(5, bumpy_spatial(6), KernelSpec::sine(1.0), 0.05);
  const StateSpace space = ops.weight().space();
  const double a = 0.7, b = -1.9;
  const auto combo = [&](const NTensor& x, const NTensor& y) { return axpy(axpy(x, a - 1.0, x), b, y); };
  for (int n = 1; n <= 2; ++n) {
    const NTensor x1 = random_tensor(n - 1, space, rng), y1 = random_tensor(n - 1, space, rng);
    CHECK(max_diff(ops.plus(combo(x1, y1)).total(),
                   combo(ops.plus(x1).total(), ops.plus(y1).total())) < 1e-12);
    const NTensor x2 = random_tensor(n, space, rng), y2 = random_tensor(n, space, rng);
    CHECK(max_diff(ops.circ(combo(x2, y2)).total(),
                   combo(ops.circ(x2).total(), ops.circ(y2).total())) < 1e-12);
    const NTensor x3 = random_tensor(n + 1, space, rng), y3 = random_tensor(n + 1, space, rng);
    CHECK(max_diff(ops.minus(combo(x3, y3)).total(),
                   combo(ops.minus(x3).total(), ops.minus(y3).total())) < 1e-12);
    const NTensor x4 = random_tensor(n + 2, space, rng), y4 = random_tensor(n + 2, space, rng);
    CHECK(max_diff(ops.equal(combo(x4, y4)), combo(ops.equal(x4), ops.equal(y4))) < 1e-12);
  }
}

TEST_CASE("S= keeps symmetric inputs symmetric") {
  std::mt19937 rng(5);
  const HierarchyOperators ops(6, bumpy_spatial(5), KernelSpec::sine(1.0), 0.05);
  const NTensor c = symmetrize(random_tensor(4, ops.weight().space(), rng));
  const NTensor out = ops.equal(c);
  CHECK(out.transposition_residual(0, 1) < 1e-15);
}

TEST_CASE("V_f cancellations are exact inside the contractions") {
  std::mt19937 rng(9);
  const HierarchyOperators ops(4, bumpy_spatial(8), KernelSpec::sine(1.2), 0.05);
  const StateSpace space = ops.weight().space();
  // c(z1, z2) = g(z1): constant in the last slot.
  const NTensor g = random_tensor(1, space, rng);
  const NTensor c = outer(g, NTensor(1, space, 1.0));
  const auto m = ops.minus(c);
  CHECK(max_abs(m.summands[0]) < 1e-13);
  // Constant in either contracted slot kills the pair contraction.
  CHECK(max_abs(ops.pair_contraction(outer(c, NTensor(1, space, 1.0)))) < 1e-13);
  CHECK(max_abs(ops.pair_contraction(broadcast_slot(c, 1))) < 1e-13);
}

TEST_CASE("orthogonal summands are annihilated by the H_n projection") {
  std::mt19937 rng(13);
  const HierarchyOperators ops(5, bumpy_spatial(6), KernelSpec::sine(1.0), 0.05);
  const StateSpace space = ops.weight().space();
  const Weight& w = ops.weight();
  for (int n = 2; n <= 3; ++n) {
    const NTensor lower = random_tensor(n - 1, space, rng);
    const NTensor same = random_tensor(n, space, rng);
    const NTensor upper = random_tensor(n + 1, space, rng);
    const NTensor orth = axpy(axpy(ops.plus(lower).orthogonal(), 1.0, ops.circ(same).orthogonal()), 1.0,
                              ops.minus(upper).orthogonal());
    CHECK(max_abs(orth) > 1e-3);
    CHECK(max_abs(project_out(orth, w)) < 1e-13);
    // The kept part is not in the kernel of the projection.
    CHECK(max_abs(project_out(ops.circ(same).kept(), w)) > 1e-3);
  }
}

TEST_CASE("rescaled S= prefactor tends to sqrt((n+1)(n+2))") {
  CHECK(rescaled_equal_prefactor(4, 0) == doctest::Approx(4.0 * 3.0 / 3.0 * std::sqrt(1.0 / 6.0)));
  for (int n = 0; n <= 4; ++n) {
    const double limit = std::sqrt((n + 1.0) * (n + 2.0));
    const double coarse = std::abs(rescaled_equal_prefactor(100, n) - limit);
    const double fine = std::abs(rescaled_equal_prefactor(1000000, n) - limit);
    CHECK(fine < 1e-4 * limit);
    CHECK(fine < coarse);
  }
  const int bad_n = 3;
  CHECK_THROWS_AS((void)rescaled_equal_prefactor(4, bad_n), IndexRange);
}

TEST_CASE("operator preconditions") {
  const DensityField f = bumpy_spatial(6);
  CHECK_THROWS_AS(HierarchyOperators(1, f, KernelSpec::sine(1.0), 0.1), ConfigError);
  CHECK_THROWS_AS(HierarchyOperators(3, f, KernelSpec::sine(1.0), -0.1), ConfigError);
  const HierarchyOperators ops(3, f, KernelSpec::sine(1.0), 0.1);
  const NTensor scalar(0, ops.weight().space(), 1.0);
  CHECK_THROWS_AS((void)ops.minus(scalar), IndexRange);
  CHECK_THROWS_AS((void)ops.pair_contraction(scalar), IndexRange);
  const std::size_t tiny_cap = 16;
  CHECK_THROWS_AS(HierarchyOperators(3, f, KernelSpec::sine(1.0), 0.1, tiny_cap), MemoryCap);
}

TEST_CASE("zero-kernel hierarchy residual is pure time-differencing error") {
  std::vector<double> worst;
  for (double dt : {0.02, 0.01}) {
    OracleConfig c = smooth_config(8, 3, dt, 0.2);
    c.kernel = KernelSpec::zero(1);
    const OracleRun run = run_with(c, 2);
    const ResidualReport rep = bbgky_residual(run, extract_correlation_series(run, 3), 3);
    double w = 0.0;
    for (int n = 0; n <= 3; ++n) w = std::max(w, rep.interior_max(n, &ResidualRow::residual));
    worst.push_back(w);
  }
  CHECK(worst[0] < 1e-2);
  CHECK(worst[0] / worst[1] == doctest::Approx(4.0).epsilon(0.1));
}

TEST_CASE("smooth-kernel hierarchy residual decreases under refinement") {
  std::vector<ResidualReport> reps;
  for (int level = 0; level < 2; ++level) {
    const OracleRun run = run_with(smooth_config(8 << level, 3, 0.02 / (1 << level), 0.3), 2);
    reps.push_back(bbgky_residual(run, extract_correlation_series(run, 3), 3));
  }
  for (int n = 0; n <= 3; ++n) {
    CAPTURE(n);
    const double coarse = reps[0].interior_max(n, &ResidualRow::residual);
    const double fine = reps[1].interior_max(n, &ResidualRow::residual);
    CHECK(coarse / fine >= 1.5);
    for (const ResidualRow& row : reps[1].rows) {
      if (row.n != n) continue;
      // Dropping the orthogonal summands changes nothing after projection.
      CHECK(std::abs(row.reduced_projected - row.projected) <= 1e-10 * (1.0 + row.projected));
      CHECK(row.projected <= row.residual * (1.0 + 1e-12));
    }
  }
}

TEST_CASE("limit hierarchy: trivial ladder and growing N") {
  const OracleRun run = run_with(smooth_config(8, 3, 0.02, 0.2), 1);
  LadderSeries series = extract_correlation_series(run, 3);
  SUBCASE("trivial ladder has zero residual") {
    for (CorrelationLadder& l : series.ladders) {
      for (std::size_t n = 0; n < l.terms.size(); ++n) {
        for (double& v : l.terms[n].values()) v = n == 0 ? 0.37 : 0.0;
      }
    }
    const ResidualReport rep = limit_hierarchy_residual(run, series, 1);
    for (const ResidualRow& row : rep.rows) CHECK(row.residual == 0.0);
  }
  SUBCASE("residual decreases with N on a fixed grid") {
    std::vector<double> worst;
    for (int N : {3, 4, 5}) {
      const OracleRun r = run_with(smooth_config(8, N, 0.02, 0.2), 1);
      const ResidualReport rep = limit_hierarchy_residual(r, extract_correlation_series(r, 3), 1);
      worst.push_back(std::max(rep.interior_max(0, &ResidualRow::residual),
                               rep.interior_max(1, &ResidualRow::residual)));
    }
    CHECK(worst[1] < worst[0]);
    CHECK(worst[2] < worst[1]);
  }
}

TEST_CASE("bbgky residual preconditions") {
  const OracleRun run = run_with(smooth_config(8, 3, 0.05, 0.1), 1);
  const LadderSeries short_series = extract_correlation_series(run, 1);
  CHECK_THROWS_AS((void)bbgky_residual(run, short_series, 1), IndexRange);
  CHECK_THROWS_AS((void)bbgky_residual(run, extract_correlation_series(run, 3), 4), IndexRange);
}

TEST_CASE("generating function") {
  LadderSeries series;
  series.particles = 4;
  series.times = {0.0, 1.0};
  const StateSpace space{3, 1.0 / 3.0};
  for (int m = 0; m < 2; ++m) {
    CorrelationLadder l;
    l.particles = 4;
    for (int n = 0; n <= 3; ++n) l.terms.emplace_back(n, space);
    l.norms.assign(4, 0.0);
    series.ladders.push_back(l);
  }
  const std::vector<double> radii{0.1, 0.25, 0.5, 0.9};
  SUBCASE("zero ladder") {
    const GeneratingFunction g = generating_function(series, radii, 1.0, 1);
    for (const auto& row : g.values) {
      for (double z : row) CHECK(z == 0.0);
    }
  }
  SUBCASE("single order two norm gives a r^2") {
    const double a = 0.8;
    for (CorrelationLadder& l : series.ladders) l.norms[2] = a / std::sqrt(binom(4, 2));
    const GeneratingFunction g = generating_function(series, radii, 1.0, 1);
    for (const auto& row : g.values) {
      for (std::size_t i = 0; i < radii.size(); ++i) {
        CHECK(row[i] == doctest::Approx(a * radii[i] * radii[i]).epsilon(1e-14));
        if (i > 0) CHECK(row[i] >= row[i - 1]);
      }
    }
    CHECK(g.tail_bound[2] == doctest::Approx(0.0625 / 0.5));
  }
  SUBCASE("radius outside (0,1)") {
    const std::vector<double> bad{1.0};
    CHECK_THROWS_AS((void)generating_function(series, bad, 1.0, 1), ConfigError);
  }
}

TEST_CASE("generating function on oracle ladders") {
  const OracleRun run = run_with(smooth_config(8, 4, 0.05, 0.3), 2);
  const LadderSeries series = extract_correlation_series(run, 2);
  CHECK(cauchy_schwarz_gap(series) <= 1e-14);
  const std::vector<double> radii{0.3, 0.6};
  const double psi_sup = 1.0;
  const GeneratingFunction g = generating_function(series, radii, psi_sup, 2);
  // The truncated orders obey the same a priori bound as the tail estimate.
  const LadderSeries full = extract_correlation_series(run, 4);
  for (std::size_t m = 0; m < full.ladders.size(); ++m) {
    for (std::size_t r = 0; r < radii.size(); ++r) {
      double tail = 0.0;
      for (int n = 3; n <= 4; ++n) {
        tail += std::pow(radii[r], n) * std::sqrt(binom(4, n)) * full.ladders[m].norms[n];
      }
      CHECK(tail <= g.tail_bound[r]);
    }
  }
}

TEST_CASE("uniqueness windows") {
  const std::vector<double> t{0.0, 0.25, 0.5, 0.75, 1.0};
  SUBCASE("zero Lambda gives one window from 0") {
    const std::vector<double> lam(5, 0.0);
    const UniquenessWindows u = uniqueness_windows(t, lam);
    CHECK(u.t0 == 0.0);
    REQUIRE(u.windows.size() == 1);
    CHECK(u.windows[0] == std::pair<double, double>{0.0, 1.0});
  }
  SUBCASE("constant Lambda gives windows of length 1/(8c)") {
    for (double c : {0.1, 0.5, 1.0, 3.0}) {
      CAPTURE(c);
      const std::vector<double> lam(5, c);
      const UniquenessWindows u = uniqueness_windows(t, lam);
      const double len = std::min(1.0, 1.0 / (8.0 * c));
      CHECK(1.0 - u.t0 == doctest::Approx(len).epsilon(1e-12));
      CHECK(u.windows.front().first == 0.0);
      CHECK(u.windows.back().second == 1.0);
      for (std::size_t i = 1; i < u.windows.size(); ++i) {
        CHECK(u.windows[i].first == u.windows[i - 1].second);
      }
      for (std::size_t i = 1; i < u.windows.size(); ++i) {
        CHECK(u.windows[i].second - u.windows[i].first == doctest::Approx(len).epsilon(1e-10));
      }
    }
  }
  SUBCASE("linear Lambda: window integral equals the budget") {
    std::vector<double> lam;
    for (double s : t) lam.push_back(1.0 + 4.0 * s);
    const UniquenessWindows u = uniqueness_windows(t, lam);
    for (const auto& [a, b] : u.windows) {
      const double integral = (b - a) + 2.0 * (b * b - a * a);
      if (a > 0.0) CHECK(integral == doctest::Approx(0.125).epsilon(1e-12));
      else CHECK(integral <= 0.125 + 1e-12);
    }
  }
  SUBCASE("infinite Lambda") {
    std::vector<double> lam(5, 1.0);
    lam[4] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS((void)uniqueness_windows(t, lam), EmptyWindow);
  }
}

TEST_CASE("quantitative rate fit") {
  const std::vector<int> Ns{8, 16, 32, 64, 128};
  const std::vector<double> times{0.0, 0.5, 1.0, 2.0};
  const double a = 0.9, c = 0.7;
  SUBCASE("pure power law") {
    std::vector<std::vector<double>> e;
    for (std::size_t m = 0; m < times.size(); ++m) {
      std::vector<double> row;
      for (int N : Ns) row.push_back(3.0 * std::pow(N, -a));
      e.push_back(row);
    }
    const RateProfile p = rate_fit_quantitative(Ns, times, e);
    for (double s : p.slopes) CHECK(std::abs(s + a) < 1e-10);
    CHECK(p.magnitude_nonincreasing);
  }
  SUBCASE("exponent decaying in time") {
    std::vector<std::vector<double>> e;
    for (double t : times) {
      std::vector<double> row;
      for (int N : Ns) row.push_back(std::pow(N, -a * std::exp(-c * t)));
      e.push_back(row);
    }
    const RateProfile p = rate_fit_quantitative(Ns, times, e);
    for (std::size_t m = 0; m < times.size(); ++m) {
      CHECK(std::abs(-p.slopes[m] - a * std::exp(-c * times[m])) < 1e-8);
    }
    CHECK(p.magnitude_nonincreasing);
    std::reverse(e.begin(), e.end());
    CHECK_FALSE(rate_fit_quantitative(Ns, times, e).magnitude_nonincreasing);
  }
}
