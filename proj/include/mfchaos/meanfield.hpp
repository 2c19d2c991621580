#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "mfchaos/fields.hpp"
#include "mfchaos/kernels.hpp"

namespace mfchaos {

class NTensor;
class Weight;

// Grid solver for the mean-field equations. Kinetic grids evolve f(x, v) by
// Lie splitting: upwind transport in x by v, upwind transport in v by K * rho
// frozen at step start, exact spectral heat flow in v. Spatial grids evolve
// rho(x) by upwind transport with K * rho followed by spectral heat flow in x.
class MeanFieldSolver {
 public:
  MeanFieldSolver(const KernelSpec& kernel, const PhaseGrid& grid);

  [[nodiscard]] DensityField step(const DensityField& f, double alpha, double dt) const;
  // Steps until t_end (last step shortened to land exactly); observer runs
  // after every step and once at the start.
  [[nodiscard]] DensityField evolve(const DensityField& f, double alpha, double dt, double t_end,
                                    const std::function<void(const DensityField&)>& observer = {}) const;

  // (K * rho)(x) on the spatial cells; one array per component.
  [[nodiscard]] VectorField force_field(const DensityField& f) const;
  [[nodiscard]] const PhaseGrid& grid() const noexcept { return grid_; }
  [[nodiscard]] const KernelConvolver& convolver() const noexcept { return convolver_; }

 private:
  void transport_x(std::vector<double>& f, double dt) const;
  void transport_v(std::vector<double>& f, const VectorField& force, double dt) const;
  void transport_spatial(std::vector<double>& rho, const VectorField& force, double dt) const;
  void heat_flow(std::vector<double>& f, double alpha, double dt) const;

  KernelSpec kernel_;
  PhaseGrid grid_;
  KernelConvolver convolver_;
  FftPlan diffusion_plan_;  // over velocity axes (kinetic) or spatial axes
};

DensityField vlasov_step(const DensityField& f, const KernelSpec& kernel, double alpha, double dt);
DensityField mckean_step(const DensityField& rho, const KernelSpec& kernel, double alpha, double dt);

// Positivity floor applied before any logarithm: max(f, kFloor * max f).
struct ClampedDensity {
  static constexpr double kFloor = 1e-14;
  std::vector<double> values;
  double floor = 0.0;
  std::size_t clamped_cells = 0;
};
ClampedDensity clamp_positive(const DensityField& f);

// Central periodic difference of a grid function along velocity axis a
// (kinetic grids) or spatial axis a (spatial grids).
std::vector<double> central_difference(const PhaseGrid& grid, std::span<const double> values,
                                       int axis);

// sum |grad log f|^2 f dz with grad log f := grad^c f / f; the gradient is in v
// on kinetic grids and in x on spatial grids.
double fisher_information(const DensityField& f);

// sup over cells and axes of |d_b (K * rho)_a|, central differences.
double force_gradient_sup(const DensityField& f, const KernelSpec& kernel);

// Factored coupling weight. Kinetic grids:
//   V(z1, z2) = (K_h(x1 - x2) - K_h * rho(x1)) . g(z1),  g = grad_v^c f / f.
// Spatial grids add the divergence part of the first-order generator:
//   V(x1, x2) = (divK_h(x1 - x2) - divK_h * rho(x1)) + (K_h(x1 - x2) - K_h * rho(x1)) . g(x1)
// with g = grad_x^c rho / rho and divK_h the central difference of the sampled
// kernel. With these discrete choices both f-averages of V vanish identically.
class TwoPointField {
 public:
  TwoPointField(const DensityField& f, const KernelSpec& kernel);

  [[nodiscard]] const PhaseGrid& grid() const noexcept { return grid_; }
  // The clamped density the cancellations refer to.
  [[nodiscard]] std::span<const double> weight() const noexcept { return weight_; }
  [[nodiscard]] const VectorField& log_gradient() const noexcept { return gradient_; }
  [[nodiscard]] std::size_t clamped_cells() const noexcept { return clamped_; }
  // K_h at spatial offsets and K_h * rho at spatial cells, rho from weight().
  [[nodiscard]] const VectorField& kernel_samples() const noexcept { return samples_; }
  [[nodiscard]] const VectorField& force() const noexcept { return force_; }

  [[nodiscard]] double operator()(std::size_t z1, std::size_t z2) const;
  // V as a dense two-slot tensor on the grid cells.
  [[nodiscard]] NTensor dense() const;
  // Mean-field weight matching dense(): the clamped density, renormalized.
  [[nodiscard]] Weight weight_object() const;

  struct Cancellation {
    double first_slot = 0.0;   // max_z1 |sum_z2 V f(z2) dz|
    double second_slot = 0.0;  // max_z2 |sum_z1 V f(z1) dz|
  };
  [[nodiscard]] Cancellation cancellations() const;

 private:
  [[nodiscard]] std::size_t offset(std::size_t s1, std::size_t s2) const noexcept;

  PhaseGrid grid_;
  std::vector<double> weight_;
  std::size_t clamped_ = 0;
  VectorField gradient_;       // g, one array per axis over all cells
  VectorField samples_;        // K_h at spatial offsets
  VectorField force_;          // K_h * rho at spatial cells
  std::vector<double> div_samples_;
  std::vector<double> div_force_;
};

// Throws DegenerateDensity when the clamp touched more than 10% of cells.
TwoPointField compute_Vf(const DensityField& f, const KernelSpec& kernel);

// (sum |V|^2 f(z1) f(z2) dz^2)^{1/2}
double lambda_f(const DensityField& f, const KernelSpec& kernel);
double lambda_f(const TwoPointField& vf);

// (sum_{x,y} |K_h(x - y) . (g(x) - g(y))|^2 rho(x) rho(y) dx^2)^{1/2} with
// g = grad^c rho / rho; the overload takes g explicitly.
double symmetrized_vf_norm(const DensityField& rho, const KernelSpec& kernel);
double symmetrized_vf_norm(const DensityField& rho, const KernelSpec& kernel,
                           const VectorField& log_gradient);

}  // namespace mfchaos
