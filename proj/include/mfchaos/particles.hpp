#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mfchaos/fields.hpp"
#include "mfchaos/kernels.hpp"
#include "mfchaos/random.hpp"

namespace mfchaos {

enum class Order { First, Second };

enum class Scheme {
  // Kick-drift-kick for second order at alpha = 0, Euler-Maruyama otherwise.
  Automatic,
  EulerMaruyama,
  SplittingVerlet,
};

struct CollisionPolicy {
  enum class Kind { Error, Clamp };
  Kind kind = Kind::Clamp;
  double r_min = 1e-8;
};

struct SimConfig {
  int particles = 2;
  int dim = 1;
  Order order = Order::First;
  double alpha = 0.0;
  double dt = 1e-2;
  double t_end = 1.0;
  Scheme scheme = Scheme::Automatic;
  std::uint64_t seed = 0;
  CollisionPolicy collision{};

  void validate() const;
  [[nodiscard]] long steps() const;
};

// One replica. Arrays are N x d, row-major. On the torus `positions` stay in
// [0,1)^d and `unwrapped` carries the lift to R^d; on whole space they agree.
struct ParticleState {
  Order order = Order::First;
  Domain domain = Domain::Torus;
  int particles = 0;
  int dim = 1;
  double time = 0.0;
  long step = 0;
  std::vector<double> positions;
  std::vector<double> velocities;  // empty iff order == First
  std::vector<double> unwrapped;
  // RNG stream of each particle; identity unless the state was permuted.
  std::vector<std::uint64_t> streams;

  [[nodiscard]] std::span<const double> position(int i) const {
    return std::span<const double>(positions).subspan(static_cast<std::size_t>(i) * dim, dim);
  }
  [[nodiscard]] std::span<const double> velocity(int i) const {
    return std::span<const double>(velocities).subspan(static_cast<std::size_t>(i) * dim, dim);
  }
  // Phase point (x, v) of particle i, or x alone for first order.
  [[nodiscard]] std::vector<double> phase_point(int i) const;
};

ParticleState make_state(Order order, Domain domain, int dim, std::vector<double> positions,
                         std::vector<double> velocities = {});
// Reorders particles: particle i of the result is particle perm[i] of s.
ParticleState permute(const ParticleState& s, std::span<const int> perm);

// i.i.d. draws from f: inverse CDF over cells, uniform inside the cell.
ParticleState sample_initial(const DensityField& f, int particles, Order order,
                             const CounterRng& rng);

struct ForceResult {
  std::vector<double> forces;  // N x d
  long clamp_incidents = 0;
};

// F_i = 1/(N-1) sum_{j != i} K(X_i - X_j), one evaluation per unordered pair
// applied with opposite signs.
ForceResult pairwise_forces(std::span<const double> positions, int dim, const KernelSpec& kernel,
                            const CollisionPolicy& policy = {});
// Same sum with rows split across OpenMP threads; each row evaluates both
// orientations, so the result matches the serial one up to rounding.
ForceResult pairwise_forces_parallel(std::span<const double> positions, int dim,
                                     const KernelSpec& kernel, const CollisionPolicy& policy = {});

// Both steppers advance time by cfg.dt and return the number of clamp incidents.
long step_first_order(ParticleState& state, const KernelSpec& kernel, const SimConfig& cfg,
                      const CounterRng& rng);
long step_second_order(ParticleState& state, const KernelSpec& kernel, const SimConfig& cfg,
                       const CounterRng& rng);
long step(ParticleState& state, const KernelSpec& kernel, const SimConfig& cfg,
          const CounterRng& rng);

struct Observer {
  std::string name;
  std::function<double(const ParticleState&)> fn;
};

struct ObservationRow {
  int replica = 0;
  double time = 0.0;
  std::string observable;
  double value = 0.0;
};

struct EnsembleResult {
  std::vector<ObservationRow> rows;  // replica-major, then time, then observer
  std::vector<double> times;
  std::vector<long> incidents;  // per replica
  std::vector<ParticleState> final_states;

  // Replica mean and standard error of one observable at one recorded time.
  [[nodiscard]] std::pair<double, double> mean_stderr(const std::string& observable,
                                                      double time) const;
  [[nodiscard]] long total_incidents() const;
};

struct EnsembleOptions {
  int replicas = 1;
  // Times at which observers run; rounded to the step grid. Empty means t_end only.
  std::vector<double> record_times;
  bool keep_final_states = false;
  // Run replicas on OpenMP threads; the output is identical either way.
  bool parallel = true;
};

EnsembleResult run_ensemble(const SimConfig& cfg, const KernelSpec& kernel, const DensityField& f0,
                            const EnsembleOptions& options, std::span<const Observer> observers);

void write_observations_csv(const EnsembleResult& result, const std::string& path);

}  // namespace mfchaos
