#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mfchaos/config.hpp"
#include "mfchaos/hierarchy.hpp"
#include "mfchaos/io.hpp"
#include "mfchaos/oracle.hpp"
#include "mfchaos/particles.hpp"

namespace mfchaos {

// binom(N,k)^{-1} sum_{i_1<...<i_k} psi_{i_1}...psi_{i_k}, by the elementary
// symmetric polynomial recursion. Throws IndexRange unless 1 <= k <= N.
double symmetric_mean(std::span<const double> psi_values, int k);
// The same statistic of psi evaluated at every particle of one replica.
double psi_u_statistic(const ParticleState& state, const TestFunction& psi, int k);

struct MomentEstimate {
  double value = 0.0;
  double stderr = 0.0;  // replica standard deviation / sqrt(R)
};

// Replica mean of psi_u_statistic; needs at least two replicas.
MomentEstimate estimate_psi_moment(std::span<const ParticleState> snapshot, const TestFunction& psi,
                                   int k);

struct ResultRow {
  std::string experiment_id;
  double t = 0.0;
  int particles = 0;
  int k = 1;
  double estimator = 0.0;
  double mc_stderr = 0.0;
  double reference = 0.0;
  double weak_error = 0.0;  // |estimator - reference|
  std::string notes;
};

inline const std::vector<std::string> kChaosColumns{
    "experiment_id", "t", "N", "k", "estimator", "mc_stderr", "reference", "weak_error", "notes"};

// (int psi f(t))^k from the PDE on the configured grid (coarse) and on the
// grid refined reference.refine times per axis with dt / refine (fine). psi is
// paired through its cell averages, so at t = 0 the fine value is exactly the
// moment of the piecewise-constant law the particles are drawn from.
struct PdeReference {
  std::vector<double> times;
  std::vector<double> coarse;  // fine(0) plus the coarse change since t = 0
  std::vector<double> fine;
  std::vector<double> value;   // fine(0) plus the Richardson-extrapolated change, raised to k
  std::vector<double> delta;   // |fine - coarse|
};

PdeReference pde_reference(const ExperimentConfig& config, std::span<const double> times);

// The record times after rounding to the particle step grid, as run_ensemble reports them.
std::vector<double> snapped_record_times(const ExperimentConfig& config);

struct ChaosResult {
  std::vector<ResultRow> rows;
  PdeReference reference;
  long incidents = 0;
};

// Particles start from the initial density sampled on the fine reference
// grid, so the fine PDE run and the ensemble share the initial law exactly.
// With a nonempty `csv`, rows are appended and flushed after every N.
ChaosResult run_chaos_experiment(const ExperimentConfig& config,
                                 const std::filesystem::path& csv = {});

struct RateFit {
  double t = 0.0;
  int k = 1;
  double slope = 0.0;
  double slope_stderr = 0.0;
  double ci_low = 0.0;   // slope -/+ 1.96 stderr
  double ci_high = 0.0;
  int points = 0;
};

// Weighted regression of log weak_error on log N per (t, k), weights
// (weak_error / mc_stderr)^2, i.e. inverse variance of the log. Rows with a
// zero error are dropped; groups with fewer than two points are skipped.
std::vector<RateFit> fit_rate(std::span<const ResultRow> rows);
std::vector<RateFit> fit_rate(const CsvTable& chaos_csv);

struct SuiteCheck {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool upper = true;  // pass when value <= threshold, else value >= threshold

  [[nodiscard]] double margin() const noexcept { return upper ? threshold - value : value - threshold; }
  [[nodiscard]] bool passed() const noexcept { return margin() >= 0.0; }
};

struct OracleSuiteReport {
  int particles = 0;
  std::vector<SuiteCheck> checks;

  [[nodiscard]] bool passed() const;
  [[nodiscard]] const SuiteCheck& check(const std::string& name) const;
  [[nodiscard]] nlohmann::json to_json() const;
};

// Duality (1e-10 with the exponential, 1e-6 with RK4), mass, positivity,
// maximum principle, exchange symmetry, orthogonality of every C_n, the a
// priori bounds, Parseval when the series reaches order N, and both V_f
// cancellations at every snapshot.
OracleSuiteReport evaluate_oracle_suite(const OracleRun& run, const LadderSeries& series,
                                        double psi_sup, int k);

inline const std::vector<std::string> kOracleColumns{
    "t", "duality_dev", "mass_err", "maxprin_margin", "n", "corr_norm", "bound", "margin"};

void write_oracle_csv(const std::filesystem::path& path, const OracleRun& run,
                      const LadderSeries& series, double psi_sup, int k);

struct OracleExperiment {
  OracleRun run;
  LadderSeries series;
  OracleSuiteReport suite;
};

// Final data is psi^{(x)k} symmetrized over N slots, psi sampled on the grid.
OracleExperiment run_oracle_experiment(const ExperimentConfig& config, int particles);

// One directory per N holding F_####.bin, Phi_####.bin, f_####.bin and
// oracle_run.json; the grid, kernel and alpha come from `config`.
std::vector<std::string> save_oracle_run(const std::filesystem::path& dir, const OracleRun& run);
OracleRun load_oracle_run(const std::filesystem::path& dir, const ExperimentConfig& config);

struct HierarchyResult {
  ResidualReport residuals;
  GeneratingFunction z;
  std::vector<double> lambda;  // Lambda_f at every snapshot
  UniquenessWindows windows;
};

HierarchyResult run_hierarchy(const OracleRun& run, const ExperimentConfig& config);

// Columns t, n, residual, projected_residual, reduced, reduced_projected,
// Z_r=<r> per radius, lambda_f, window (index of the uniqueness window).
void write_hierarchy_csv(const std::filesystem::path& path, const HierarchyResult& result);
void write_windows_csv(const std::filesystem::path& path, const UniquenessWindows& windows);

// CLI entry points. Each writes its CSVs and manifest.json into `out` and
// returns the manifest.
Manifest run_simulate_command(const ExperimentConfig& config, const std::filesystem::path& out);
Manifest run_meanfield_command(const ExperimentConfig& config, const std::filesystem::path& out);
Manifest run_oracle_command(const ExperimentConfig& config, const std::filesystem::path& out);
Manifest run_hierarchy_command(const ExperimentConfig& config, const std::filesystem::path& out);
Manifest run_chaos_command(const ExperimentConfig& config, const std::filesystem::path& out);
// Reads chaos.csv from `out` and writes rates.csv and summary.md.
Manifest run_report_command(const ExperimentConfig& config, const std::filesystem::path& out);

}  // namespace mfchaos
