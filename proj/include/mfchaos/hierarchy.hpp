#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mfchaos/correlation.hpp"
#include "mfchaos/fields.hpp"
#include "mfchaos/kernels.hpp"
#include "mfchaos/meanfield.hpp"
#include "mfchaos/numeric.hpp"
#include "mfchaos/oracle.hpp"

namespace mfchaos {

// Operators of the BBGKY-type equation for the correlation functions C_{N,n}
// at one instant, for N particles and mean-field density f:
//
//   dt C_n + sum_i v_i . grad_{x_i} C_n + alpha sum_i Lap_i C_n
//     = 1/(N-1) S+ C_{n-1} + So C_n + S- C_{n+1} + N S= C_{n+2}.
//
// Derivatives use the oracle's upwind stencils, b . grad g at a cell being
// b^+ (g(+h) - g) / h + b^- (g(-h) - g) / h per axis, so each summand is
// consistent with the jump generator to O(h). The drift variable is v on
// kinetic grids and x on spatial ones; V_f, K_h and K_h * rho come from the
// same TwoPointField, so both V_f cancellations hold to round-off.
//
// Each operator returns its summands in the order of the derivation, with
// prefactors applied. A summand is flagged `reduced` when it survives in the
// equation for the H_n component; the others do not depend on one of the
// slots, so (Id - Pi_1)...(Id - Pi_n) annihilates them.
class HierarchyOperators {
 public:
  struct Terms {
    std::vector<NTensor> summands;
    std::vector<bool> reduced;

    [[nodiscard]] NTensor total() const;
    [[nodiscard]] NTensor kept() const;        // reduced summands only
    [[nodiscard]] NTensor orthogonal() const;  // the rest
  };

  // Throws MemoryCap via NTensor when an intermediate would exceed `cap`.
  HierarchyOperators(int particles, const DensityField& f, const KernelSpec& kernel, double alpha,
                     std::size_t cap = kDefaultTensorCap);

  [[nodiscard]] int particles() const noexcept { return particles_; }
  [[nodiscard]] const Weight& weight() const noexcept { return weight_; }
  [[nodiscard]] const TwoPointField& vf() const noexcept { return vf_; }

  // S^{n,+}: order n-1 in, order n out; three summands.
  [[nodiscard]] Terms plus(const NTensor& c) const;
  // S^{n,o}: order n in and out; six summands.
  [[nodiscard]] Terms circ(const NTensor& c) const;
  // S^{n,-}: order n+1 in, order n out; three summands.
  [[nodiscard]] Terms minus(const NTensor& c) const;
  // S^{n,=}: order n+2 in, order n out; nothing is orthogonal.
  [[nodiscard]] NTensor equal(const NTensor& c) const;

  // sum_i v_i . grad_{x_i} c + alpha sum_i Lap_i c (no transport on spatial grids).
  [[nodiscard]] NTensor free_part(const NTensor& c) const;
  // sum_i (K * rho)(x_i) . grad_i c
  [[nodiscard]] NTensor mean_field_drift(const NTensor& c) const;
  // sum_j sum_{z*} V_f(z*, z_j) c(z_{[n]\j}, z*) f(z*) dz*
  [[nodiscard]] NTensor exchange(const NTensor& c) const;
  // sum_{z*, z*'} V_f(z*, z*') c(., z*, z*') f f dz dz: order n+2 in, order n out.
  [[nodiscard]] NTensor pair_contraction(const NTensor& c) const;

 private:
  struct Neighbours {
    std::vector<std::vector<int>> up, down;  // per axis, per site
    double h = 1.0;
  };

  [[nodiscard]] NTensor blank(int order) const;
  // b . grad of g in the slot with the given stride, at flat `index` whose
  // digit in that slot is `site`.
  [[nodiscard]] double upwind(const Neighbours& nb, const NTensor& g, std::size_t index,
                              std::size_t stride, int site, const Vec& b) const;
  [[nodiscard]] double laplacian(const NTensor& g, std::size_t index, std::size_t stride,
                                 int site) const;
  [[nodiscard]] NTensor trade_last(const NTensor& c) const;
  [[nodiscard]] Vec pair_force(int target, int source) const;

  int particles_;
  PhaseGrid grid_;
  double alpha_;
  std::size_t cap_;
  TwoPointField vf_;
  Weight weight_;
  std::vector<double> masses_;
  std::vector<double> vmat_;  // V_f(a, b) at a * M + b
  std::vector<Vec> mean_force_;
  std::vector<Vec> velocity_;
  std::vector<std::size_t> spatial_;
  Neighbours drift_;      // along v on kinetic grids, x otherwise
  Neighbours transport_;  // along x, kinetic grids only
};

// N times the S^{n,=} prefactor, in the rescaled variables
// binom(N,n)^{1/2} C_{N,n}; tends to sqrt((n+1)(n+2)) as N grows.
double rescaled_equal_prefactor(int particles, int n);

struct ResidualRow {
  double t = 0.0;
  int n = 0;
  bool interior = false;             // central time difference was available
  double residual = 0.0;             // ||full equation residual||_{L^2_f}
  double projected = 0.0;            // ||(Id - Pi_1)...(Id - Pi_n) residual||
  double reduced = 0.0;              // ||reduced equation, orthogonal terms dropped||
  double reduced_projected = 0.0;    // ||(Id - Pi_1)...(Id - Pi_n) reduced||
};

struct ResidualReport {
  int particles = 0;
  std::vector<ResidualRow> rows;

  // Largest value of `field` over interior rows of order n.
  [[nodiscard]] double interior_max(int n, double ResidualRow::*field) const;
};

// Evaluates the equation on oracle snapshots with dt by central differences
// (one-sided at the ends). The series must carry orders up to
// min(N, nmax + 2); orders above N are zero. Operators are rebuilt from
// run.density(m) at every snapshot.
ResidualReport bbgky_residual(const OracleRun& run, const LadderSeries& series, int nmax);

// Residual of the limit hierarchy for the rescaled ladder binom(N,n)^{1/2} C_{N,n}:
//   dt C + sum v . grad_x C + sum (K*rho) . grad C + alpha sum Lap C
//     - exchange(C_n) - sqrt((n+1)(n+2)) pair_contraction(C_{n+2}).
// Only `residual` (and `projected`) are filled.
ResidualReport limit_hierarchy_residual(const OracleRun& run, const LadderSeries& series, int nmax);

struct GeneratingFunction {
  std::vector<double> times;
  std::vector<double> radii;
  std::vector<std::vector<double>> values;  // values[m][r] = sum_{n <= nmax} r^n ||bar C_n(t_m)||
  std::vector<double> tail_bound;           // per radius: ||psi||^k r^{nmax+1} / (1 - r)
};

// Rescaled norms binom(N,n)^{1/2} ||C_{N,n}|| summed against r^n; radii in (0,1).
GeneratingFunction generating_function(const LadderSeries& series, std::span<const double> radii,
                                       double psi_sup, int k);

// max_m [Z(t_m, 1/2) - Z(t_m, 1/3)^{1/2} Z(t_m, 3/4)^{1/2}]; nonpositive up to round-off.
double cauchy_schwarz_gap(const LadderSeries& series);

struct UniquenessWindows {
  double t0 = 0.0;                        // start of the window ending at T
  std::vector<std::pair<double, double>> windows;  // partition of [0, T], increasing
};

// Lambda_f sampled at `times` is taken piecewise linear. The last window is
// [T0, T] with T0 the smallest time keeping the trapezoid integral of
// Lambda_f over it at most `budget`; earlier windows repeat the rule from T0.
// Throws EmptyWindow when Lambda_f is not finite.
UniquenessWindows uniqueness_windows(std::span<const double> times, std::span<const double> lambda,
                                     double budget = 0.125);

struct RateProfile {
  std::vector<double> times;
  std::vector<double> slopes;          // d log e / d log N at each time
  std::vector<double> slope_stderr;
  bool magnitude_nonincreasing = true; // |slope| does not grow with t
};

// errors[m][i] is the error at times[m] for particles[i]; all must be positive.
RateProfile rate_fit_quantitative(std::span<const int> particles, std::span<const double> times,
                                  const std::vector<std::vector<double>>& errors);

}  // namespace mfchaos
