#include "mfchaos/particles.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>

#include "mfchaos/errors.hpp"
#include "mfchaos/numeric.hpp"

namespace mfchaos {

namespace {

double wrap_unit(double x) noexcept {
  double r = x - std::floor(x);
  return r >= 1.0 ? 0.0 : r;
}

double wrap_centered(double x) noexcept { return x - std::floor(x + 0.5); }

// Displacement X_i - X_j as handed to the kernel, with the collision policy
// applied. Returns false when the pair is clamped.
bool displacement(std::span<const double> xi, std::span<const double> xj, int dim, Domain domain,
                  bool singular, const CollisionPolicy& policy, Vec& r) {
  r = Vec{};
  double norm2 = 0.0;
  for (int a = 0; a < dim; ++a) {
    double d = xi[a] - xj[a];
    if (domain == Domain::Torus) d = wrap_centered(d);
    r[a] = d;
    norm2 += d * d;
  }
  if (!singular) return true;
  const double norm = std::sqrt(norm2);
  if (policy.kind == CollisionPolicy::Kind::Error) {
    if (norm == 0.0 || norm < policy.r_min) throw CollisionError("coincident particles");
    return true;
  }
  if (norm >= policy.r_min && norm > 0.0) return true;
  if (norm == 0.0) {
    r = Vec{};
    r[0] = policy.r_min;
  } else {
    for (int a = 0; a < dim; ++a) r[a] *= policy.r_min / norm;
  }
  return false;
}

void check_positions(std::span<const double> positions, int dim) {
  if (dim < 1 || dim > kMaxDim) throw DimensionMismatch("particle dimension must be 1..3");
  if (positions.size() % dim != 0) throw DimensionMismatch("positions not a multiple of d");
  if (positions.size() / dim < 2) throw DimensionMismatch("need at least two particles");
}

void advance_positions(ParticleState& s, std::span<const double> increment) {
  for (std::size_t i = 0; i < s.positions.size(); ++i) {
    s.unwrapped[i] += increment[i];
    s.positions[i] = s.domain == Domain::Torus ? wrap_unit(s.positions[i] + increment[i])
                                               : s.unwrapped[i];
  }
}

}  // namespace

void SimConfig::validate() const {
  if (particles < 2) throw ConfigError("N must be at least 2");
  if (dim < 1 || dim > kMaxDim) throw ConfigError("d must be 1..3");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha must be finite and >= 0");
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  if (!(dt <= t_end)) throw ConfigError("dt must not exceed t_end");
  if (!(collision.r_min >= 0.0)) throw ConfigError("r_min must be >= 0");
}

long SimConfig::steps() const { return std::lround(t_end / dt); }

std::vector<double> ParticleState::phase_point(int i) const {
  std::vector<double> z(position(i).begin(), position(i).end());
  if (order == Order::Second) z.insert(z.end(), velocity(i).begin(), velocity(i).end());
  return z;
}

ParticleState make_state(Order order, Domain domain, int dim, std::vector<double> positions,
                         std::vector<double> velocities) {
  check_positions(positions, dim);
  ParticleState s;
  s.order = order;
  s.domain = domain;
  s.dim = dim;
  s.particles = static_cast<int>(positions.size() / dim);
  if (order == Order::Second) {
    if (velocities.size() != positions.size()) throw DimensionMismatch("velocities shape");
  } else if (!velocities.empty()) {
    throw DimensionMismatch("first-order state carries no velocities");
  }
  s.unwrapped = positions;
  if (domain == Domain::Torus) {
    for (double& x : positions) x = wrap_unit(x);
  }
  s.positions = std::move(positions);
  s.velocities = std::move(velocities);
  s.streams.resize(s.particles);
  std::iota(s.streams.begin(), s.streams.end(), std::uint64_t{0});
  return s;
}

ParticleState permute(const ParticleState& s, std::span<const int> perm) {
  if (static_cast<int>(perm.size()) != s.particles) throw DimensionMismatch("permutation size");
  ParticleState out = s;
  const std::size_t d = s.dim;
  for (int i = 0; i < s.particles; ++i) {
    const std::size_t src = static_cast<std::size_t>(perm[i]);
    for (std::size_t a = 0; a < d; ++a) {
      out.positions[i * d + a] = s.positions[src * d + a];
      out.unwrapped[i * d + a] = s.unwrapped[src * d + a];
      if (s.order == Order::Second) out.velocities[i * d + a] = s.velocities[src * d + a];
    }
    out.streams[i] = s.streams[src];
  }
  return out;
}

ParticleState sample_initial(const DensityField& f, int particles, Order order,
                             const CounterRng& rng) {
  const PhaseGrid& g = f.grid();
  if (order == Order::Second && !g.has_velocity()) {
    throw DimensionMismatch("second-order sampling needs a phase-space density");
  }
  if (order == Order::First && g.has_velocity()) {
    throw DimensionMismatch("first-order sampling needs a spatial density");
  }
  if (std::abs(f.mass() - 1.0) > DensityField::kMassTolerance) {
    throw UnnormalizedDensity("initial density is not normalized");
  }
  std::vector<double> cdf(g.size());
  CompensatedSum acc;
  for (std::size_t i = 0; i < cdf.size(); ++i) {
    acc.add(f[i] * g.cell_volume());
    cdf[i] = acc.value();
  }
  const int d = g.dim;
  std::vector<double> x(static_cast<std::size_t>(particles) * d);
  std::vector<double> v(order == Order::Second ? x.size() : 0);
  for (int p = 0; p < particles; ++p) {
    const double u = rng.uniform(p, CounterRng::kInitialStep, 0) * cdf.back();
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    // Skip empty cells that share the cumulative value.
    std::size_t cell = std::min<std::size_t>(it - cdf.begin(), cdf.size() - 1);
    while (f[cell] == 0.0 && cell + 1 < cdf.size()) ++cell;
    const std::vector<double> c = g.center(cell);
    for (int a = 0; a < d; ++a) {
      const double jx = rng.uniform(p, CounterRng::kInitialStep, 1 + a) - 0.5;
      x[static_cast<std::size_t>(p) * d + a] = c[a] + jx * g.dx();
      if (order == Order::Second) {
        const double jv = rng.uniform(p, CounterRng::kInitialStep, 1 + d + a) - 0.5;
        v[static_cast<std::size_t>(p) * d + a] = c[d + a] + jv * g.dv();
      }
    }
  }
  return make_state(order, Domain::Torus, d, std::move(x), std::move(v));
}

ForceResult pairwise_forces(std::span<const double> positions, int dim, const KernelSpec& kernel,
                            const CollisionPolicy& policy) {
  check_positions(positions, dim);
  if (kernel.dim() != dim) throw DimensionMismatch("kernel and particle dimension");
  const int n = static_cast<int>(positions.size() / dim);
  ForceResult out;
  out.forces.assign(positions.size(), 0.0);
  if (kernel.is_zero()) return out;
  const bool singular = kernel.is_singular();
  const double scale = 1.0 / (n - 1);
  Vec r{};
  for (int i = 0; i < n; ++i) {
    const auto xi = positions.subspan(static_cast<std::size_t>(i) * dim, dim);
    for (int j = i + 1; j < n; ++j) {
      const auto xj = positions.subspan(static_cast<std::size_t>(j) * dim, dim);
      if (!displacement(xi, xj, dim, kernel.domain(), singular, policy, r)) ++out.clamp_incidents;
      const Vec k = eval_kernel(kernel, r);
      for (int a = 0; a < dim; ++a) {
        out.forces[static_cast<std::size_t>(i) * dim + a] += k[a];
        out.forces[static_cast<std::size_t>(j) * dim + a] -= k[a];
      }
    }
  }
  for (double& v : out.forces) v *= scale;
  return out;
}

ForceResult pairwise_forces_parallel(std::span<const double> positions, int dim,
                                     const KernelSpec& kernel, const CollisionPolicy& policy) {
  check_positions(positions, dim);
  if (kernel.dim() != dim) throw DimensionMismatch("kernel and particle dimension");
  const int n = static_cast<int>(positions.size() / dim);
  ForceResult out;
  out.forces.assign(positions.size(), 0.0);
  if (kernel.is_zero()) return out;
  const bool singular = kernel.is_singular();
  const double scale = 1.0 / (n - 1);
  long incidents = 0;
  bool collided = false;
#pragma omp parallel for schedule(static) reduction(+ : incidents) reduction(|| : collided)
  for (int i = 0; i < n; ++i) {
    const auto xi = positions.subspan(static_cast<std::size_t>(i) * dim, dim);
    Vec acc{};
    Vec r{};
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const auto xj = positions.subspan(static_cast<std::size_t>(j) * dim, dim);
      // Evaluate on the ordered pair (min, max) so both rows see the same
      // floating-point value with opposite signs.
      const bool forward = i < j;
      bool clamped = false;
      try {
        clamped = !(forward ? displacement(xi, xj, dim, kernel.domain(), singular, policy, r)
                            : displacement(xj, xi, dim, kernel.domain(), singular, policy, r));
      } catch (const CollisionError&) {
        collided = true;
        continue;
      }
      if (clamped && forward) ++incidents;
      const Vec k = eval_kernel(kernel, r);
      for (int a = 0; a < dim; ++a) acc[a] += forward ? k[a] : -k[a];
    }
    for (int a = 0; a < dim; ++a) out.forces[static_cast<std::size_t>(i) * dim + a] = acc[a] * scale;
  }
  if (collided) throw CollisionError("coincident particles");
  out.clamp_incidents = incidents;
  return out;
}

long step_first_order(ParticleState& state, const KernelSpec& kernel, const SimConfig& cfg,
                      const CounterRng& rng) {
  if (state.order != Order::First) throw DimensionMismatch("state is not first order");
  const ForceResult f = pairwise_forces(state.positions, state.dim, kernel, cfg.collision);
  std::vector<double> inc(state.positions.size());
  const double noise = std::sqrt(2.0 * cfg.alpha * cfg.dt);
  for (int i = 0; i < state.particles; ++i) {
    for (int a = 0; a < state.dim; ++a) {
      const std::size_t idx = static_cast<std::size_t>(i) * state.dim + a;
      inc[idx] = f.forces[idx] * cfg.dt;
      if (cfg.alpha > 0.0) inc[idx] += noise * rng.normal(state.streams[i], state.step, a);
    }
  }
  advance_positions(state, inc);
  ++state.step;
  state.time = state.step * cfg.dt;
  return f.clamp_incidents;
}

long step_second_order(ParticleState& state, const KernelSpec& kernel, const SimConfig& cfg,
                       const CounterRng& rng) {
  if (state.order != Order::Second) throw DimensionMismatch("state is not second order");
  const bool kdk = cfg.scheme == Scheme::SplittingVerlet ||
                   (cfg.scheme == Scheme::Automatic && cfg.alpha == 0.0);
  if (kdk && cfg.alpha != 0.0) throw ConfigError("splitting_verlet requires alpha = 0");
  const double dt = cfg.dt;
  ForceResult f = pairwise_forces(state.positions, state.dim, kernel, cfg.collision);
  long incidents = f.clamp_incidents;
  std::vector<double> inc(state.positions.size());
  if (kdk) {
    for (std::size_t i = 0; i < inc.size(); ++i) {
      state.velocities[i] += 0.5 * dt * f.forces[i];
      inc[i] = state.velocities[i] * dt;
    }
    advance_positions(state, inc);
    f = pairwise_forces(state.positions, state.dim, kernel, cfg.collision);
    incidents += f.clamp_incidents;
    for (std::size_t i = 0; i < inc.size(); ++i) state.velocities[i] += 0.5 * dt * f.forces[i];
  } else {
    const double noise = std::sqrt(2.0 * cfg.alpha * dt);
    for (std::size_t i = 0; i < inc.size(); ++i) inc[i] = state.velocities[i] * dt;
    advance_positions(state, inc);
    for (int i = 0; i < state.particles; ++i) {
      for (int a = 0; a < state.dim; ++a) {
        const std::size_t idx = static_cast<std::size_t>(i) * state.dim + a;
        state.velocities[idx] += f.forces[idx] * dt;
        if (cfg.alpha > 0.0) {
          state.velocities[idx] += noise * rng.normal(state.streams[i], state.step, a);
        }
      }
    }
  }
  ++state.step;
  state.time = state.step * dt;
  return incidents;
}

long step(ParticleState& state, const KernelSpec& kernel, const SimConfig& cfg,
          const CounterRng& rng) {
  return state.order == Order::First ? step_first_order(state, kernel, cfg, rng)
                                     : step_second_order(state, kernel, cfg, rng);
}

std::pair<double, double> EnsembleResult::mean_stderr(const std::string& observable,
                                                      double time) const {
  std::vector<double> xs;
  for (const auto& row : rows) {
    if (row.observable == observable && std::abs(row.time - time) < 1e-12) xs.push_back(row.value);
  }
  if (xs.empty()) throw IndexRange("no observations for " + observable);
  CompensatedSum s;
  for (double x : xs) s.add(x);
  const double mean = s.value() / xs.size();
  if (xs.size() < 2) return {mean, 0.0};
  CompensatedSum q;
  for (double x : xs) q.add((x - mean) * (x - mean));
  const double var = q.value() / (xs.size() - 1);
  return {mean, std::sqrt(var / xs.size())};
}

long EnsembleResult::total_incidents() const {
  return std::accumulate(incidents.begin(), incidents.end(), 0L);
}

EnsembleResult run_ensemble(const SimConfig& cfg, const KernelSpec& kernel, const DensityField& f0,
                            const EnsembleOptions& options, std::span<const Observer> observers) {
  cfg.validate();
  if (options.replicas < 1) throw ConfigError("R must be at least 1");
  if (kernel.dim() != cfg.dim || f0.grid().dim != cfg.dim) {
    throw DimensionMismatch("kernel, density and config dimension");
  }
  const long total_steps = cfg.steps();
  std::vector<long> record_steps;
  if (options.record_times.empty()) {
    record_steps.push_back(total_steps);
  } else {
    for (double t : options.record_times) {
      if (t < 0.0 || t > cfg.t_end + 1e-12) throw ConfigError("record time outside [0, t_end]");
      record_steps.push_back(std::lround(t / cfg.dt));
    }
    std::sort(record_steps.begin(), record_steps.end());
    record_steps.erase(std::unique(record_steps.begin(), record_steps.end()), record_steps.end());
  }
  const std::size_t n_obs = observers.size();
  const std::size_t per_replica = record_steps.size() * n_obs;
  const int R = options.replicas;
  std::vector<double> values(per_replica * R);
  std::vector<long> incidents(R, 0);
  std::vector<ParticleState> finals(options.keep_final_states ? R : 0);
  bool failed = false;
  std::string failure;

#pragma omp parallel for schedule(dynamic, 1) if (options.parallel)
  for (int rep = 0; rep < R; ++rep) {
    try {
      const CounterRng rng(cfg.seed, static_cast<std::uint64_t>(rep));
      ParticleState s = sample_initial(f0, cfg.particles, cfg.order, rng);
      s.domain = kernel.domain();
      std::size_t next = 0;
      for (long st = 0; st <= total_steps && next < record_steps.size(); ++st) {
        if (st > 0) incidents[rep] += step(s, kernel, cfg, rng);
        while (next < record_steps.size() && record_steps[next] == st) {
          for (std::size_t o = 0; o < n_obs; ++o) {
            values[rep * per_replica + next * n_obs + o] = observers[o].fn(s);
          }
          ++next;
        }
      }
      if (options.keep_final_states) finals[rep] = std::move(s);
    } catch (const std::exception& e) {
#pragma omp critical(mfchaos_ensemble_failure)
      {
        if (!failed) failure = e.what();
        failed = true;
      }
    }
  }
  if (failed) throw Error("ensemble replica failed: " + failure);

  EnsembleResult out;
  for (long st : record_steps) out.times.push_back(st * cfg.dt);
  out.incidents = std::move(incidents);
  out.final_states = std::move(finals);
  out.rows.reserve(values.size());
  for (int rep = 0; rep < R; ++rep) {
    for (std::size_t t = 0; t < record_steps.size(); ++t) {
      for (std::size_t o = 0; o < n_obs; ++o) {
        out.rows.push_back({rep, out.times[t], observers[o].name,
                            values[rep * per_replica + t * n_obs + o]});
      }
    }
  }
  return out;
}

void write_observations_csv(const EnsembleResult& result, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path);
  os << "replica,t,observable_name,value\n" << std::setprecision(17);
  for (const auto& row : result.rows) {
    os << row.replica << ',' << row.time << ',' << row.observable << ',' << row.value << '\n';
  }
}

}  // namespace mfchaos
