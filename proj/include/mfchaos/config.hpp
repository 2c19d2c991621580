#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mfchaos/fields.hpp"
#include "mfchaos/kernels.hpp"
#include "mfchaos/oracle.hpp"
#include "mfchaos/particles.hpp"

namespace mfchaos {

enum class ExperimentKind { Simulate, Meanfield, Oracle, Hierarchy, Chaos, Report };

ExperimentKind parse_kind(const std::string& name);
std::string kind_name(ExperimentKind kind);

// (1 + amplitude prod_a cos(2 pi mode x_a)) times a Maxwellian of the given
// temperature in v on kinetic grids. "uniform" forces amplitude 0.
struct InitialSpec {
  std::string family = "perturbed";
  double amplitude = 0.3;
  int mode = 1;
  double temperature = 1.0;
};

// "fourier_gauss": offset + scale prod_a cos(2 pi mode x_a) prod_a exp(-v_a^2 / (2 v_width^2)),
// the Gaussian factor only on kinetic grids. "constant": value everywhere.
// "grid": explicit values on the configured grid, piecewise constant off it.
struct PsiSpec {
  std::string family = "fourier_gauss";
  double offset = 0.0;
  double scale = 1.0;
  int mode = 1;
  double v_width = 1.0;
  double value = 1.0;
  std::vector<double> values;
};

class TestFunction {
 public:
  TestFunction(PsiSpec spec, PhaseGrid grid);

  // z = (x_0..x_{d-1}) or (x, v).
  [[nodiscard]] double operator()(std::span<const double> z) const;
  // Cell-centre samples on `g`.
  [[nodiscard]] std::vector<double> sample(const PhaseGrid& g) const;
  // Cell averages on `g` by 3-point Gauss-Legendre per axis: the exact pairing
  // with a density that is constant inside each cell, up to O(h^6).
  [[nodiscard]] std::vector<double> cell_average(const PhaseGrid& g) const;
  // Upper bound on sup |psi|.
  [[nodiscard]] double sup_bound() const;

 private:
  PsiSpec spec_;
  PhaseGrid grid_;
};

struct OracleSection {
  int snapshot_every = 1;
  Stepping stepping = Stepping::Automatic;
  int nmax = 4;
  std::size_t state_cap = kDefaultStateCap;
};

struct HierarchySection {
  std::string oracle_dir;  // empty: run the oracle in-process
  int nmax = 4;
  std::vector<double> radii{0.25, 1.0 / 3.0, 0.5, 0.75};
  double window_budget = 0.125;
};

// The chaos reference solves the PDE on the configured grid and on one
// refined `refine` times per axis with dt / refine; `richardson` extrapolates
// the two first-order results.
struct ReferenceSection {
  int refine = 2;
  bool richardson = true;
  double dt = 0.0;  // PDE step on the coarse grid; 0 means the particle dt
};

struct ExperimentConfig {
  int schema_version = 1;
  std::optional<ExperimentKind> kind;
  Order order = Order::First;
  int dim = 1;
  KernelSpec kernel = KernelSpec::zero(1);
  PhaseGrid grid;
  InitialSpec initial;
  std::vector<int> particles{8};
  int replicas = 100;
  int k = 1;
  PsiSpec psi;
  double alpha = 0.0;
  double t_end = 1.0;
  double dt = 0.01;
  std::vector<double> record_times;  // empty means t_end only
  std::uint64_t seed = 0;
  Scheme scheme = Scheme::Automatic;
  CollisionPolicy collision{};
  OracleSection oracle;
  HierarchySection hierarchy;
  ReferenceSection reference;
  std::string output_dir = "out";
  std::string experiment_id = "run";
  nlohmann::json source = nlohmann::json::object();  // the document as parsed

  [[nodiscard]] SimConfig sim_config(int particles) const;
  [[nodiscard]] TestFunction test_function() const { return TestFunction(psi, grid); }
  [[nodiscard]] DensityField initial_density(const PhaseGrid& g) const;
  [[nodiscard]] DensityField initial_density() const { return initial_density(grid); }
  [[nodiscard]] OracleConfig oracle_config(int particles) const;
};

// Throws ConfigError on a wrong schema_version, unknown keys at any level,
// wrong types or inconsistent values.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);
KernelSpec parse_kernel(const nlohmann::json& j, int dim);

// times = first * ratio^i, i < count, clipped to (0, t_end], plus t_end.
std::vector<double> geometric_times(double first, double ratio, int count, double t_end);

}  // namespace mfchaos
