#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "mfchaos/correlation.hpp"
#include "mfchaos/fields.hpp"
#include "mfchaos/kernels.hpp"
#include "mfchaos/numeric.hpp"
#include "mfchaos/particles.hpp"
#include "mfchaos/sparse.hpp"

namespace mfchaos {

inline constexpr std::size_t kDefaultStateCap = std::size_t{1} << 22;
// Above this many product states the automatic stepping switches to RK4.
inline constexpr std::size_t kExponentialStateLimit = 4096;

enum class Stepping { Automatic, MatrixExponential, Rk4 };

// Jump rates of one particle on the one-body grid. First-order grids move a
// particle one cell along each spatial axis at b^+/dx + alpha/dx^2 (resp.
// b^-). Kinetic grids transport x upwind at |v|/dx and move v one cell at
// b^+/dv + alpha/dv^2 (resp. b^-), periodic in v. Both the N-body generator
// and the mean-field chain are assembled from these rates.
class OneBodyStencil {
 public:
  struct Move {
    std::size_t target;
    double rate;
  };
  static constexpr int kMaxMoves = 4 * kMaxDim;
  using Moves = std::array<Move, kMaxMoves>;

  OneBodyStencil(const PhaseGrid& grid, double alpha);

  // Fills `out` with the positive-rate moves out of `site` under drift b;
  // returns how many were written.
  int moves(std::size_t site, const Vec& drift, Moves& out) const noexcept;
  [[nodiscard]] const PhaseGrid& grid() const noexcept { return grid_; }
  [[nodiscard]] double alpha() const noexcept { return alpha_; }

 private:
  PhaseGrid grid_;
  double alpha_;
};

// Generator of the N-particle jump process on M^N product states, slot 0
// slowest. Particle i feels b_i = 1/(N-1) sum_{j != i} K_h(x_i - x_j) with
// K_h the kernel sampled on grid offsets (0 at the origin).
class DiscreteGenerator {
 public:
  DiscreteGenerator(const PhaseGrid& grid, const KernelSpec& kernel, double alpha, int particles,
                    std::size_t state_cap = kDefaultStateCap);

  [[nodiscard]] Order order() const noexcept {
    return grid_.has_velocity() ? Order::Second : Order::First;
  }
  [[nodiscard]] const PhaseGrid& grid() const noexcept { return grid_; }
  [[nodiscard]] const KernelSpec& kernel() const noexcept { return kernel_; }
  [[nodiscard]] double alpha() const noexcept { return alpha_; }
  [[nodiscard]] int particles() const noexcept { return particles_; }
  [[nodiscard]] std::size_t states() const noexcept { return forward_.rows(); }
  [[nodiscard]] StateSpace one_body_space() const noexcept;
  // dF/dt = L F; columns sum to zero, off-diagonal entries are nonnegative.
  [[nodiscard]] const SparseMatrix& forward() const noexcept { return forward_; }
  // Exactly the transpose of forward().
  [[nodiscard]] const SparseMatrix& backward() const noexcept { return backward_; }
  [[nodiscard]] double max_exit_rate() const noexcept { return max_exit_; }

 private:
  PhaseGrid grid_;
  KernelSpec kernel_;
  double alpha_;
  int particles_;
  SparseMatrix forward_;
  SparseMatrix backward_;
  double max_exit_ = 0.0;
};

// Throws DimensionMismatch when `order` disagrees with the grid.
DiscreteGenerator build_generator(const PhaseGrid& grid, const KernelSpec& kernel, double alpha,
                                  int particles, Order order,
                                  std::size_t state_cap = kDefaultStateCap);

// Largest -A_ii, the uniformization rate of a generator or its transpose.
double max_exit_rate(const SparseMatrix& generator);

// x <- exp(t A) x for a generator A (or its transpose) by uniformization:
// exp(t A) = sum_k Poisson(k; t Lambda) (I + A / Lambda)^k, split into
// substeps with Lambda tau <= 8. Every term is a nonnegative combination.
void apply_exponential(const SparseMatrix& generator, double rate, double t, std::vector<double>& x);
// One classical RK4 step x <- x + h A x + ... ; throws StabilityViolation when
// h * rate > 1, which also keeps the step positivity-preserving.
void apply_rk4(const SparseMatrix& generator, double rate, double h, std::vector<double>& x);

// Nonlinear one-body chain df/dt = L1[f] f whose drift is K_h * rho_f.
class MeanFieldChain {
 public:
  MeanFieldChain(const PhaseGrid& grid, const KernelSpec& kernel, double alpha);

  [[nodiscard]] SparseMatrix generator(std::span<const double> f) const;
  [[nodiscard]] const PhaseGrid& grid() const noexcept { return stencil_.grid(); }
  [[nodiscard]] bool linear() const noexcept { return kernel_.is_zero(); }

 private:
  OneBodyStencil stencil_;
  KernelSpec kernel_;
  KernelConvolver convolver_;
};

struct TimeGrid {
  double t_end = 1.0;
  double dt = 0.01;
  int snapshot_every = 1;

  // Throws ConfigError unless t_end / dt and steps / snapshot_every are integers.
  [[nodiscard]] int steps() const;
  [[nodiscard]] std::vector<double> snapshot_times() const;
};

struct OracleConfig {
  PhaseGrid grid;
  KernelSpec kernel = KernelSpec::zero(1);
  double alpha = 0.0;
  int particles = 2;
  TimeGrid time;
  Stepping stepping = Stepping::Automatic;
  std::size_t state_cap = kDefaultStateCap;
};

// Snapshots of F_N, Phi_N and the mean-field chain f on one time grid.
struct OracleRun {
  Stepping stepping = Stepping::MatrixExponential;  // resolved, never Automatic
  int particles = 0;
  PhaseGrid grid;
  KernelSpec kernel = KernelSpec::zero(1);
  double alpha = 0.0;
  std::vector<double> times;
  std::vector<std::vector<double>> forward;
  std::vector<std::vector<double>> backward;
  std::vector<std::vector<double>> meanfield;
  // exp(T L) F(0) paired with Phi_T, computed with the exponential.
  double exact_pairing = 0.0;
  std::size_t states = 0;
  std::size_t nonzeros = 0;
  double max_exit_rate = 0.0;

  [[nodiscard]] StateSpace one_body_space() const noexcept;
  [[nodiscard]] std::size_t snapshots() const noexcept { return times.size(); }
  // sum Phi F dz^N at snapshot m.
  [[nodiscard]] double pairing(std::size_t m) const;
  [[nodiscard]] DensityField density(std::size_t m) const;
  // f(t_m) with the same positivity floor as compute_Vf, renormalized.
  [[nodiscard]] Weight weight(std::size_t m) const;
  [[nodiscard]] NTensor phi(std::size_t m) const;
  [[nodiscard]] NTensor distribution(std::size_t m) const;
};

Stepping resolve_stepping(Stepping requested, std::size_t states);

// Trajectory of x' = A x sampled every snapshot_every steps, starting with x0.
std::vector<std::vector<double>> evolve_forward(const DiscreteGenerator& gen,
                                                std::vector<double> initial, const TimeGrid& time,
                                                Stepping stepping);
// Phi(t) = exp((T - t) A^T) Phi_T sampled on the snapshot grid, in forward
// time order. `backward` is the transposed generator.
std::vector<std::vector<double>> evolve_backward(const SparseMatrix& backward, double rate,
                                                 std::vector<double> final_data,
                                                 const TimeGrid& time, Stepping stepping);
// Exponential midpoint rule (exact for linear chains) or RK4.
std::vector<std::vector<double>> evolve_meanfield(const MeanFieldChain& chain,
                                                  std::vector<double> initial,
                                                  const TimeGrid& time, Stepping stepping);

// Product initial datum (f0)^{(x)N} on the generator's states.
std::vector<double> tensor_power(std::span<const double> f0, int particles);

OracleRun run_oracle(const OracleConfig& config, const DensityField& initial,
                     const NTensor& final_data);

// max_m |<Phi(t_m), F(t_m)> - <Phi(0), F(0)>|
double check_duality(const OracleRun& run);
// max_m |<Phi(t_m), F(t_m)> - run.exact_pairing|
double duality_error(const OracleRun& run);

struct RunHealth {
  double mass_error = 0.0;        // max_m |sum F dz^N - 1|
  double min_forward = 0.0;       // min over snapshots and states
  double maxprin_margin = 0.0;    // ||Phi_T||_inf - max_m ||Phi(t_m)||_inf
  double symmetry_residual = 0.0; // max transposition residual of F and Phi
};
RunHealth run_health(const OracleRun& run);

struct DualRepresentation {
  double lhs = 0.0;              // <psi^k, F_{N,k}(T) - f(T)^k>
  double rhs = 0.0;              // -N int <V_f Phi_N f^N> dt, full product sum
  double rhs_marginal = 0.0;     // same with Phi_N replaced by M_{N,2}
  double rhs_correlation = 0.0;  // same with C_{N,2}
  double residual = 0.0;         // |lhs - rhs|
};
// Requires final data built from psi with the given k.
DualRepresentation verify_dual_representation(const OracleRun& run, std::span<const double> psi,
                                              int k);

struct LadderSeries {
  int particles = 0;
  std::vector<double> times;
  std::vector<CorrelationLadder> ladders;
  std::vector<Weight> weights;
};
LadderSeries extract_correlation_series(const OracleRun& run, int nmax);

struct AprioriRow {
  int n = 0;
  int sup_slots = 0;  // 0: L^2_f bound, j > 0: mixed bound with j sup slots
  double measured = 0.0;
  double bound = 0.0;
  [[nodiscard]] double margin() const noexcept { return bound - measured; }
};
struct AprioriReport {
  std::vector<AprioriRow> rows;
  double worst_margin = 0.0;
  // Round-off in the projections may put an attained bound a few ulps over.
  [[nodiscard]] bool holds() const noexcept { return worst_margin >= -1e-12; }
};
// sup_t ||C_{N,n}||_{L^2_f} <= binom(N,n)^{-1/2} ||psi||^k and, for j = 1, 2
// sup slots, sup_t ||C_{N,n}||_{L^inf L^2_f} <= 2^j binom(N-j,n-j)^{-1/2} ||psi||^k.
AprioriReport verify_apriori(const LadderSeries& series, double psi_sup, int k);

// sup over snapshots of ||C_{N,n}||_{L^2_f}.
double sup_correlation_norm(const LadderSeries& series, int n);

// Slope of log norm against log N.
LineFit decay_exponent(std::span<const int> particles, std::span<const double> norms);

// For K == 0 the chain is linear and Phi_N stays a symmetrized product of the
// one-body backward solution psi_t, so C_{N,n}(t) has a closed form in psi_t
// and f(t). Returns sup_t ||C_{N,n}||_{L^2_f} for each N.
std::vector<double> tensorized_correlation_norms(const PhaseGrid& grid, double alpha,
                                                 const DensityField& initial,
                                                 std::span<const double> psi, int k, int n,
                                                 std::span<const int> particles,
                                                 const TimeGrid& time);

}  // namespace mfchaos
