#include "mfchaos/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

#include "mfchaos/errors.hpp"
#include "mfchaos/meanfield.hpp"

namespace mfchaos {

namespace {

// Uniformization substeps keep Lambda * tau below this, so e^{-Lambda tau}
// stays far from underflow and the Poisson series is short.
constexpr double kSubstepBudget = 8.0;
constexpr double kPoissonTail = 1e-18;

using Trajectory = std::vector<std::vector<double>>;

Vec drift_at(const VectorField& field, std::size_t index) {
  Vec b{};
  for (std::size_t a = 0; a < field.size(); ++a) b[a] = field[a][index];
  return b;
}

void check_square(const SparseMatrix& a, std::size_t n) {
  if (a.rows() != a.cols() || a.cols() != n) throw DimensionMismatch("generator and vector sizes");
}

Trajectory propagate(const SparseMatrix& a, double rate, std::vector<double> x, const TimeGrid& time,
                     Stepping stepping) {
  const int steps = time.steps();
  Trajectory out;
  out.reserve(static_cast<std::size_t>(steps / time.snapshot_every) + 1);
  out.push_back(x);
  for (int done = 0; done < steps; done += time.snapshot_every) {
    if (stepping == Stepping::Rk4) {
      for (int s = 0; s < time.snapshot_every; ++s) apply_rk4(a, rate, time.dt, x);
    } else {
      apply_exponential(a, rate, time.dt * time.snapshot_every, x);
    }
    out.push_back(x);
  }
  return out;
}

double product_pairing(std::span<const double> phi, std::span<const double> F, double cell_volume,
                       int particles) {
  if (phi.size() != F.size()) throw DimensionMismatch("pairing sizes");
  return compensated_dot(phi, F) * std::pow(cell_volume, particles);
}

Weight floored_weight(std::span<const double> values, double cell_volume) {
  std::vector<double> w(values.begin(), values.end());
  const double top = *std::max_element(w.begin(), w.end());
  const double floor = ClampedDensity::kFloor * top;
  for (double& v : w) v = std::max(v, floor);
  const double mass = compensated_total(w) * cell_volume;
  for (double& v : w) v /= mass;
  return Weight(std::move(w), cell_volume);
}

}  // namespace

OneBodyStencil::OneBodyStencil(const PhaseGrid& grid, double alpha) : grid_(grid), alpha_(alpha) {
  grid_.validate();
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha must be finite and >= 0");
}

int OneBodyStencil::moves(std::size_t site, const Vec& drift, Moves& out) const noexcept {
  int n = 0;
  const auto emit = [&](std::size_t target, double rate) {
    if (rate > 0.0) out[n++] = {target, rate};
  };
  if (!grid_.has_velocity()) {
    const double h = grid_.dx();
    const double diffusion = alpha_ / (h * h);
    for (int a = 0; a < grid_.dim; ++a) {
      emit(grid_.shift_x(site, a, +1), std::max(drift[a], 0.0) / h + diffusion);
      emit(grid_.shift_x(site, a, -1), std::max(-drift[a], 0.0) / h + diffusion);
    }
    return n;
  }
  const double hx = grid_.dx();
  const double hv = grid_.dv();
  const double diffusion = alpha_ / (hv * hv);
  for (int a = 0; a < grid_.dim; ++a) {
    const double v = grid_.v_center(grid_.v_coord(site, a));
    if (v > 0.0) emit(grid_.shift_x(site, a, +1), v / hx);
    if (v < 0.0) emit(grid_.shift_x(site, a, -1), -v / hx);
    emit(grid_.shift_v(site, a, +1), std::max(drift[a], 0.0) / hv + diffusion);
    emit(grid_.shift_v(site, a, -1), std::max(-drift[a], 0.0) / hv + diffusion);
  }
  return n;
}

DiscreteGenerator::DiscreteGenerator(const PhaseGrid& grid, const KernelSpec& kernel, double alpha,
                                     int particles, std::size_t state_cap)
    : grid_(grid), kernel_(kernel), alpha_(alpha), particles_(particles) {
  if (particles < 1) throw ConfigError("need at least one particle");
  if (kernel.dim() != grid.dim) throw DimensionMismatch("kernel and grid dimension");
  if (kernel.domain() != Domain::Torus) throw NotTorus("the oracle lives on the torus");
  const OneBodyStencil stencil(grid, alpha);
  const std::size_t M = grid.size();
  const int N = particles;
  const auto count = checked_pow(M, N, state_cap);
  if (!count) {
    throw StateCap(std::to_string(M) + "^" + std::to_string(N) + " states exceed the cap of " +
                   std::to_string(state_cap));
  }
  const std::size_t S = *count;
  if (S > std::numeric_limits<std::uint32_t>::max()) throw StateCap("state index overflows 32 bits");

  std::vector<std::size_t> stride(N, 1);
  for (int i = N - 2; i >= 0; --i) stride[i] = stride[i + 1] * M;
  const std::size_t nx = grid.spatial_size();
  const bool interacting = !kernel.is_zero() && N > 1;
  VectorField samples;
  std::vector<std::size_t> offsets;
  if (interacting) {
    samples = sample_on_grid(kernel, grid.torus());
    offsets.resize(nx * nx);
    for (std::size_t s1 = 0; s1 < nx; ++s1) {
      for (std::size_t s2 = 0; s2 < nx; ++s2) offsets[s1 * nx + s2] = grid.spatial_offset(s1, s2);
    }
  }
  const double pair_weight = N > 1 ? 1.0 / (N - 1) : 0.0;

  // Calls on_move(target_state, rate) for every jump out of state s.
  const auto visit = [&](std::size_t s, std::vector<std::size_t>& sites,
                         OneBodyStencil::Moves& buffer, auto&& on_move) {
    std::size_t rest = s;
    for (int i = N - 1; i >= 0; --i) {
      sites[i] = rest % M;
      rest /= M;
    }
    for (int i = 0; i < N; ++i) {
      Vec b{};
      if (interacting) {
        const std::size_t xi = grid.spatial_index(sites[i]);
        for (int j = 0; j < N; ++j) {
          if (j == i) continue;
          const std::size_t off = offsets[xi * nx + grid.spatial_index(sites[j])];
          for (int a = 0; a < grid.dim; ++a) b[a] += samples[a][off];
        }
        for (int a = 0; a < grid.dim; ++a) b[a] *= pair_weight;
      }
      const int n = stencil.moves(sites[i], b, buffer);
      const std::size_t base = s - sites[i] * stride[i];
      for (int m = 0; m < n; ++m) on_move(base + buffer[m].target * stride[i], buffer[m].rate);
    }
  };

  // Rows of the transposed generator, one per source state: the diagonal
  // -exit(s) followed by the jump rates to each target.
  const std::ptrdiff_t total = static_cast<std::ptrdiff_t>(S);
  std::vector<std::size_t> row_ptr(S + 1, 0);
#pragma omp parallel
  {
    std::vector<std::size_t> sites(N);
    OneBodyStencil::Moves buffer;
#pragma omp for schedule(static)
    for (std::ptrdiff_t s = 0; s < total; ++s) {
      std::size_t entries = 1;
      visit(static_cast<std::size_t>(s), sites, buffer, [&](std::size_t, double) { ++entries; });
      row_ptr[s + 1] = entries;
    }
  }
  for (std::size_t s = 0; s < S; ++s) row_ptr[s + 1] += row_ptr[s];

  std::vector<std::uint32_t> col(row_ptr.back());
  std::vector<double> values(row_ptr.back());
  double max_exit = 0.0;
#pragma omp parallel reduction(max : max_exit)
  {
    std::vector<std::size_t> sites(N);
    OneBodyStencil::Moves buffer;
#pragma omp for schedule(static)
    for (std::ptrdiff_t s = 0; s < total; ++s) {
      std::size_t p = row_ptr[s];
      const std::size_t diagonal = p++;
      double exit = 0.0;
      visit(static_cast<std::size_t>(s), sites, buffer, [&](std::size_t target, double rate) {
        col[p] = static_cast<std::uint32_t>(target);
        values[p++] = rate;
        exit += rate;
      });
      col[diagonal] = static_cast<std::uint32_t>(s);
      values[diagonal] = -exit;
      max_exit = std::max(max_exit, exit);
    }
  }
  max_exit_ = max_exit;
  backward_ = SparseMatrix::from_csr(S, std::move(row_ptr), std::move(col), std::move(values));
  forward_ = backward_.transpose();
}

StateSpace DiscreteGenerator::one_body_space() const noexcept {
  return {static_cast<int>(grid_.size()), grid_.cell_volume()};
}

DiscreteGenerator build_generator(const PhaseGrid& grid, const KernelSpec& kernel, double alpha,
                                  int particles, Order order, std::size_t state_cap) {
  const Order implied = grid.has_velocity() ? Order::Second : Order::First;
  if (order != implied) {
    throw DimensionMismatch("second order needs a kinetic grid, first order a spatial one");
  }
  return DiscreteGenerator(grid, kernel, alpha, particles, state_cap);
}

double max_exit_rate(const SparseMatrix& generator) {
  double rate = 0.0;
  for (double d : generator.diagonal()) rate = std::max(rate, -d);
  return rate;
}

void apply_exponential(const SparseMatrix& generator, double rate, double t, std::vector<double>& x) {
  check_square(generator, x.size());
  if (!(t >= 0.0)) throw ConfigError("exponential needs t >= 0");
  if (t == 0.0 || rate <= 0.0) return;
  const int substeps = std::max(1, static_cast<int>(std::ceil(rate * t / kSubstepBudget)));
  const double a = rate * t / substeps;
  const std::size_t n = x.size();
  std::vector<double> term(n), image(n), sum(n);
  for (int sub = 0; sub < substeps; ++sub) {
    term = x;
    double w = std::exp(-a);
    for (std::size_t i = 0; i < n; ++i) sum[i] = w * term[i];
    for (int k = 1;; ++k) {
      // term <- (I + A / rate) term, a nonnegative stochastic map.
      generator.multiply_parallel(term, image);
      for (std::size_t i = 0; i < n; ++i) term[i] += image[i] / rate;
      w *= a / k;
      for (std::size_t i = 0; i < n; ++i) sum[i] += w * term[i];
      if (k + 1 > a) {
        const double q = a / (k + 1);
        if (w * q / (1.0 - q) < kPoissonTail) break;
      }
    }
    x.swap(sum);
  }
}

void apply_rk4(const SparseMatrix& generator, double rate, double h, std::vector<double>& x) {
  check_square(generator, x.size());
  if (h * rate > 1.0 + 1e-12) {
    throw StabilityViolation("RK4 step " + std::to_string(h) + " exceeds 1 / max exit rate " +
                             std::to_string(1.0 / rate));
  }
  const std::size_t n = x.size();
  std::vector<double> k1(n), k2(n), k3(n), k4(n), stage(n);
  generator.multiply_parallel(x, k1);
  for (std::size_t i = 0; i < n; ++i) stage[i] = x[i] + 0.5 * h * k1[i];
  generator.multiply_parallel(stage, k2);
  for (std::size_t i = 0; i < n; ++i) stage[i] = x[i] + 0.5 * h * k2[i];
  generator.multiply_parallel(stage, k3);
  for (std::size_t i = 0; i < n; ++i) stage[i] = x[i] + h * k3[i];
  generator.multiply_parallel(stage, k4);
  for (std::size_t i = 0; i < n; ++i) x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

MeanFieldChain::MeanFieldChain(const PhaseGrid& grid, const KernelSpec& kernel, double alpha)
    : stencil_(grid, alpha), kernel_(kernel), convolver_(kernel, grid.torus()) {
  if (kernel.dim() != grid.dim) throw DimensionMismatch("kernel and grid dimension");
}

SparseMatrix MeanFieldChain::generator(std::span<const double> f) const {
  const PhaseGrid& g = grid();
  if (f.size() != g.size()) throw DimensionMismatch("density size does not match grid");
  const std::size_t nx = g.spatial_size();
  const std::size_t nv = g.velocity_size();
  std::vector<double> rho(nx);
  for (std::size_t s = 0; s < nx; ++s) {
    CompensatedSum acc;
    for (std::size_t v = 0; v < nv; ++v) acc.add(f[s * nv + v]);
    rho[s] = acc.value() * g.velocity_volume();
  }
  const VectorField force = convolver_.apply(rho);
  std::vector<std::vector<SparseMatrix::Entry>> rows(g.size());
  OneBodyStencil::Moves buffer;
  for (std::size_t site = 0; site < g.size(); ++site) {
    const int n = stencil_.moves(site, drift_at(force, g.spatial_index(site)), buffer);
    double exit = 0.0;
    for (int m = 0; m < n; ++m) {
      rows[site].push_back({static_cast<std::uint32_t>(buffer[m].target), buffer[m].rate});
      exit += buffer[m].rate;
    }
    rows[site].push_back({static_cast<std::uint32_t>(site), -exit});
  }
  return SparseMatrix::from_rows(g.size(), rows).transpose();
}

int TimeGrid::steps() const {
  if (!(dt > 0.0) || !(t_end > 0.0)) throw ConfigError("time grid needs dt > 0 and T > 0");
  const double ratio = t_end / dt;
  const long long n = std::llround(ratio);
  if (n < 1 || std::abs(ratio - static_cast<double>(n)) > 1e-9 * std::max(1.0, ratio)) {
    throw ConfigError("T must be an integer multiple of dt");
  }
  if (snapshot_every < 1 || n % snapshot_every != 0) {
    throw ConfigError("step count must be a multiple of snapshot_every");
  }
  return static_cast<int>(n);
}

std::vector<double> TimeGrid::snapshot_times() const {
  const int n = steps();
  std::vector<double> t;
  for (int s = 0; s <= n; s += snapshot_every) t.push_back(s * dt);
  t.back() = t_end;
  return t;
}

Stepping resolve_stepping(Stepping requested, std::size_t states) {
  if (requested != Stepping::Automatic) return requested;
  return states <= kExponentialStateLimit ? Stepping::MatrixExponential : Stepping::Rk4;
}

Trajectory evolve_forward(const DiscreteGenerator& gen, std::vector<double> initial,
                          const TimeGrid& time, Stepping stepping) {
  check_square(gen.forward(), initial.size());
  return propagate(gen.forward(), gen.max_exit_rate(), std::move(initial), time,
                   resolve_stepping(stepping, gen.states()));
}

Trajectory evolve_backward(const SparseMatrix& backward, double rate, std::vector<double> final_data,
                           const TimeGrid& time, Stepping stepping) {
  check_square(backward, final_data.size());
  Trajectory out = propagate(backward, rate, std::move(final_data), time,
                             resolve_stepping(stepping, backward.rows()));
  std::reverse(out.begin(), out.end());
  return out;
}

Trajectory evolve_meanfield(const MeanFieldChain& chain, std::vector<double> initial,
                            const TimeGrid& time, Stepping stepping) {
  stepping = resolve_stepping(stepping, initial.size());
  if (chain.linear()) {
    const SparseMatrix gen = chain.generator(initial);
    return propagate(gen, max_exit_rate(gen), std::move(initial), time, stepping);
  }
  const int steps = time.steps();
  const double h = time.dt;
  const std::size_t n = initial.size();
  Trajectory out{initial};
  std::vector<double> f = std::move(initial);
  for (int step = 1; step <= steps; ++step) {
    if (stepping == Stepping::Rk4) {
      const SparseMatrix g1 = chain.generator(f);
      const double rate = max_exit_rate(g1);
      if (h * rate > 1.0 + 1e-12) throw StabilityViolation("RK4 step too large for the mean-field chain");
      std::vector<double> k1(n), k2(n), k3(n), k4(n), stage(n);
      g1.multiply(f, k1);
      for (std::size_t i = 0; i < n; ++i) stage[i] = f[i] + 0.5 * h * k1[i];
      chain.generator(stage).multiply(stage, k2);
      for (std::size_t i = 0; i < n; ++i) stage[i] = f[i] + 0.5 * h * k2[i];
      chain.generator(stage).multiply(stage, k3);
      for (std::size_t i = 0; i < n; ++i) stage[i] = f[i] + h * k3[i];
      chain.generator(stage).multiply(stage, k4);
      for (std::size_t i = 0; i < n; ++i) f[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    } else {
      // Exponential midpoint: freeze the drift at the half-step state.
      const SparseMatrix g0 = chain.generator(f);
      std::vector<double> half = f;
      apply_exponential(g0, max_exit_rate(g0), 0.5 * h, half);
      const SparseMatrix g1 = chain.generator(half);
      apply_exponential(g1, max_exit_rate(g1), h, f);
    }
    if (step % time.snapshot_every == 0) out.push_back(f);
  }
  return out;
}

std::vector<double> tensor_power(std::span<const double> f0, int particles) {
  std::vector<double> out{1.0};
  for (int p = 0; p < particles; ++p) {
    std::vector<double> next;
    next.reserve(out.size() * f0.size());
    for (double a : out) {
      for (double b : f0) next.push_back(a * b);
    }
    out.swap(next);
  }
  return out;
}

StateSpace OracleRun::one_body_space() const noexcept {
  return {static_cast<int>(grid.size()), grid.cell_volume()};
}

double OracleRun::pairing(std::size_t m) const {
  return product_pairing(backward.at(m), forward.at(m), grid.cell_volume(), particles);
}

DensityField OracleRun::density(std::size_t m) const {
  return DensityField(grid, meanfield.at(m), times.at(m));
}

Weight OracleRun::weight(std::size_t m) const {
  return floored_weight(meanfield.at(m), grid.cell_volume());
}

NTensor OracleRun::phi(std::size_t m) const {
  NTensor t(particles, one_body_space(), backward.at(m), kDefaultStateCap);
  t.set_symmetric(true);
  return t;
}

NTensor OracleRun::distribution(std::size_t m) const {
  NTensor t(particles, one_body_space(), forward.at(m), kDefaultStateCap);
  t.set_symmetric(true);
  return t;
}

OracleRun run_oracle(const OracleConfig& config, const DensityField& initial,
                     const NTensor& final_data) {
  if (!(initial.grid() == config.grid)) throw DimensionMismatch("initial density grid");
  if (final_data.order() != config.particles ||
      final_data.sites() != static_cast<int>(config.grid.size())) {
    throw DimensionMismatch("final data must live on the N-fold product grid");
  }
  const DiscreteGenerator gen(config.grid, config.kernel, config.alpha, config.particles,
                              config.state_cap);
  OracleRun run;
  run.stepping = resolve_stepping(config.stepping, gen.states());
  run.particles = config.particles;
  run.grid = config.grid;
  run.kernel = config.kernel;
  run.alpha = config.alpha;
  run.times = config.time.snapshot_times();
  run.states = gen.states();
  run.nonzeros = gen.forward().nonzeros();
  run.max_exit_rate = gen.max_exit_rate();

  const std::vector<double> f0(initial.values().begin(), initial.values().end());
  const std::vector<double> phi_T(final_data.values().begin(), final_data.values().end());
  std::vector<double> F0 = tensor_power(f0, config.particles);
  run.forward = evolve_forward(gen, F0, config.time, run.stepping);
  run.backward = evolve_backward(gen.backward(), gen.max_exit_rate(), phi_T, config.time, run.stepping);
  const MeanFieldChain chain(config.grid, config.kernel, config.alpha);
  run.meanfield = evolve_meanfield(chain, f0, config.time, run.stepping);

  if (run.stepping == Stepping::MatrixExponential) {
    run.exact_pairing = run.pairing(run.snapshots() - 1);
  } else {
    apply_exponential(gen.forward(), gen.max_exit_rate(), config.time.t_end, F0);
    run.exact_pairing = product_pairing(phi_T, F0, config.grid.cell_volume(), config.particles);
  }
  return run;
}

double check_duality(const OracleRun& run) {
  const double reference = run.pairing(0);
  double dev = 0.0;
  for (std::size_t m = 0; m < run.snapshots(); ++m) dev = std::max(dev, std::abs(run.pairing(m) - reference));
  return dev;
}

double duality_error(const OracleRun& run) {
  double dev = 0.0;
  for (std::size_t m = 0; m < run.snapshots(); ++m) {
    dev = std::max(dev, std::abs(run.pairing(m) - run.exact_pairing));
  }
  return dev;
}

RunHealth run_health(const OracleRun& run) {
  RunHealth h;
  const double volume = std::pow(run.grid.cell_volume(), run.particles);
  h.min_forward = std::numeric_limits<double>::infinity();
  double phi_sup = 0.0;
  for (std::size_t m = 0; m < run.snapshots(); ++m) {
    h.mass_error = std::max(h.mass_error, std::abs(compensated_total(run.forward[m]) * volume - 1.0));
    h.min_forward = std::min(h.min_forward, *std::min_element(run.forward[m].begin(), run.forward[m].end()));
    for (double v : run.backward[m]) phi_sup = std::max(phi_sup, std::abs(v));
  }
  double final_sup = 0.0;
  for (double v : run.backward.back()) final_sup = std::max(final_sup, std::abs(v));
  h.maxprin_margin = final_sup - phi_sup;
  // Transpositions (0 b) generate the symmetric group.
  const NTensor F = run.distribution(run.snapshots() - 1);
  const NTensor phi = run.phi(0);
  for (int b = 1; b < run.particles; ++b) {
    h.symmetry_residual = std::max({h.symmetry_residual, F.transposition_residual(0, b),
                                    phi.transposition_residual(0, b)});
  }
  return h;
}

DualRepresentation verify_dual_representation(const OracleRun& run, std::span<const double> psi,
                                              int k) {
  const int N = run.particles;
  if (N < 2) throw ConfigError("the dual representation needs N >= 2");
  if (k < 0 || k > N) throw IndexRange("k must satisfy 0 <= k <= N");
  if (psi.size() != run.grid.size()) throw DimensionMismatch("psi length");
  const std::size_t last = run.snapshots() - 1;
  const double dz = run.grid.cell_volume();

  DualRepresentation out;
  {
    NTensor g = plain_marginal(run.distribution(last), k);
    std::vector<double> psi_dz(psi.begin(), psi.end());
    for (double& v : psi_dz) v *= dz;
    while (g.order() > 0) g = contract_slot(g, g.order() - 1, psi_dz);
    const double mean = compensated_dot(psi, run.meanfield[last]) * dz;
    out.lhs = g[0] - std::pow(mean, k);
  }

  const std::size_t M = run.grid.size();
  std::vector<double> full(run.snapshots()), marginal(run.snapshots()), correlation(run.snapshots());
  std::vector<int> digits(N);
  for (std::size_t m = 0; m < run.snapshots(); ++m) {
    const TwoPointField vf = compute_Vf(run.density(m), run.kernel);
    const Weight w = vf.weight_object();
    const std::vector<double> masses = site_masses(w);
    const std::vector<double>& phi = run.backward[m];

    // Direct sum over all product states.
    CompensatedSum direct;
    for (std::size_t s = 0; s < phi.size(); ++s) {
      std::size_t rest = s;
      double product = 1.0;
      for (int i = N - 1; i >= 0; --i) {
        digits[i] = static_cast<int>(rest % M);
        product *= masses[digits[i]];
        rest /= M;
      }
      direct.add(vf(digits[0], digits[1]) * phi[s] * product);
    }
    full[m] = direct.value();

    const NTensor m2 = weighted_marginal(run.phi(m), w, 2);
    const NTensor c2 = project_out(m2, w);
    CompensatedSum via_m, via_c;
    for (std::size_t z1 = 0; z1 < M; ++z1) {
      for (std::size_t z2 = 0; z2 < M; ++z2) {
        const double weight = vf(z1, z2) * masses[z1] * masses[z2];
        via_m.add(weight * m2[z1 * M + z2]);
        via_c.add(weight * c2[z1 * M + z2]);
      }
    }
    marginal[m] = via_m.value();
    correlation[m] = via_c.value();
  }
  out.rhs = -N * trapezoid(run.times, full);
  out.rhs_marginal = -N * trapezoid(run.times, marginal);
  out.rhs_correlation = -N * trapezoid(run.times, correlation);
  out.residual = std::abs(out.lhs - out.rhs);
  return out;
}

LadderSeries extract_correlation_series(const OracleRun& run, int nmax) {
  if (nmax < 0 || nmax > run.particles) throw IndexRange("nmax must satisfy 0 <= nmax <= N");
  LadderSeries series;
  series.particles = run.particles;
  series.times = run.times;
  for (std::size_t m = 0; m < run.snapshots(); ++m) {
    series.weights.push_back(run.weight(m));
    series.ladders.push_back(correlations_from_projectors(run.phi(m), series.weights.back(), nmax));
  }
  return series;
}

double sup_correlation_norm(const LadderSeries& series, int n) {
  double sup = 0.0;
  for (const CorrelationLadder& ladder : series.ladders) {
    if (n < 0 || n >= static_cast<int>(ladder.norms.size())) throw IndexRange("ladder order");
    sup = std::max(sup, ladder.norms[n]);
  }
  return sup;
}

AprioriReport verify_apriori(const LadderSeries& series, double psi_sup, int k) {
  if (series.ladders.empty()) throw EmptyWindow("no snapshots");
  const int N = series.particles;
  const int nmax = static_cast<int>(series.ladders.front().terms.size()) - 1;
  const double scale = std::pow(psi_sup, k);
  AprioriReport report;
  report.worst_margin = std::numeric_limits<double>::infinity();
  const auto add = [&](AprioriRow row) {
    report.worst_margin = std::min(report.worst_margin, row.margin());
    report.rows.push_back(row);
  };
  for (int n = 0; n <= nmax; ++n) {
    add({n, 0, sup_correlation_norm(series, n), scale / std::sqrt(binom(N, n))});
    for (int j = 1; j <= std::min(n, 2); ++j) {
      double sup = 0.0;
      for (std::size_t m = 0; m < series.ladders.size(); ++m) {
        sup = std::max(sup, linf_l2f_norm(series.ladders[m].terms[n], series.weights[m], j));
      }
      add({n, j, sup, std::pow(2.0, j) * scale / std::sqrt(binom(N - j, n - j))});
    }
  }
  return report;
}

LineFit decay_exponent(std::span<const int> particles, std::span<const double> norms) {
  if (particles.size() != norms.size() || particles.size() < 2) {
    throw DimensionMismatch("need matching lists of at least two particle counts");
  }
  std::vector<double> x, y;
  for (std::size_t i = 0; i < particles.size(); ++i) {
    if (!(norms[i] > 0.0)) throw DegenerateDensity("cannot fit a log slope through a zero norm");
    x.push_back(std::log(static_cast<double>(particles[i])));
    y.push_back(std::log(norms[i]));
  }
  return fit_line(x, y);
}

std::vector<double> tensorized_correlation_norms(const PhaseGrid& grid, double alpha,
                                                 const DensityField& initial,
                                                 std::span<const double> psi, int k, int n,
                                                 std::span<const int> particles,
                                                 const TimeGrid& time) {
  if (!(initial.grid() == grid)) throw DimensionMismatch("initial density grid");
  if (psi.size() != grid.size()) throw DimensionMismatch("psi length");
  const MeanFieldChain chain(grid, KernelSpec::zero(grid.dim), alpha);
  std::vector<double> f0(initial.values().begin(), initial.values().end());
  const SparseMatrix gen = chain.generator(f0);
  const double rate = max_exit_rate(gen);
  const Trajectory f = propagate(gen, rate, f0, time, Stepping::MatrixExponential);
  const Trajectory psi_t = evolve_backward(gen.transpose(), rate, {psi.begin(), psi.end()}, time,
                                           Stepping::MatrixExponential);
  std::vector<double> sup(particles.size(), 0.0);
  for (std::size_t m = 0; m < f.size(); ++m) {
    const Weight w = floored_weight(f[m], grid.cell_volume());
    for (std::size_t i = 0; i < particles.size(); ++i) {
      const NTensor c = final_correlations_closed_form(psi_t[m], w, particles[i], k, n);
      sup[i] = std::max(sup[i], l2f_norm(c, w));
    }
  }
  return sup;
}

}  // namespace mfchaos
