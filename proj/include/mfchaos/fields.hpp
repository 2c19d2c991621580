#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "mfchaos/kernels.hpp"

namespace mfchaos {

// Cells of the one-body state space. Spatial cells tile the torus [0,1)^d
// with cell i centred at i * dx; velocity cells tile the periodic box
// [-lv, lv)^d with cell j centred at -lv + (j + 1/2) dv. mv == 0 means a
// purely spatial grid. Flat index: spatial multi-index (axis 0 slowest),
// then velocity multi-index.
struct PhaseGrid {
  int dim = 1;
  int mx = 16;
  int mv = 0;
  double lv = 6.0;

  static PhaseGrid spatial(int dim, int mx);
  static PhaseGrid kinetic(int dim, int mx, int mv, double lv);

  void validate() const;
  [[nodiscard]] bool has_velocity() const noexcept { return mv > 0; }
  [[nodiscard]] std::size_t spatial_size() const noexcept;
  [[nodiscard]] std::size_t velocity_size() const noexcept;
  [[nodiscard]] std::size_t size() const noexcept { return spatial_size() * velocity_size(); }
  [[nodiscard]] double dx() const noexcept { return 1.0 / mx; }
  [[nodiscard]] double dv() const noexcept { return has_velocity() ? 2.0 * lv / mv : 1.0; }
  [[nodiscard]] double spatial_volume() const noexcept;
  [[nodiscard]] double velocity_volume() const noexcept;
  [[nodiscard]] double cell_volume() const noexcept { return spatial_volume() * velocity_volume(); }
  [[nodiscard]] double x_center(int i) const noexcept { return i * dx(); }
  [[nodiscard]] double v_center(int j) const noexcept { return -lv + (j + 0.5) * dv(); }
  [[nodiscard]] std::size_t flat(std::size_t spatial, std::size_t velocity) const noexcept {
    return spatial * velocity_size() + velocity;
  }
  // Cell centre as (x_0..x_{d-1}, v_0..v_{d-1}); velocity entries are 0 on spatial grids.
  [[nodiscard]] std::vector<double> center(std::size_t index) const;
  [[nodiscard]] TorusGrid torus() const noexcept { return {dim, mx}; }

  [[nodiscard]] std::size_t spatial_index(std::size_t site) const noexcept {
    return site / velocity_size();
  }
  [[nodiscard]] std::size_t velocity_index(std::size_t site) const noexcept {
    return site % velocity_size();
  }
  // Coordinate of a site along velocity axis a, in 0..mv-1.
  [[nodiscard]] int v_coord(std::size_t site, int axis) const noexcept;
  // Site one cell away along spatial (velocity) axis a, periodic; step is +1 or -1.
  [[nodiscard]] std::size_t shift_x(std::size_t site, int axis, int step) const noexcept;
  [[nodiscard]] std::size_t shift_v(std::size_t site, int axis, int step) const noexcept;
  // Spatial index of x(s1) - x(s2) reduced per axis modulo mx; s1, s2 are spatial indices.
  [[nodiscard]] std::size_t spatial_offset(std::size_t s1, std::size_t s2) const noexcept;

  friend bool operator==(const PhaseGrid&, const PhaseGrid&) = default;
};

// Nonnegative density on a PhaseGrid with sum(values) * cell_volume = 1.
class DensityField {
 public:
  static constexpr double kMassTolerance = 1e-10;

  DensityField(PhaseGrid grid, std::vector<double> values, double time = 0.0);

  static DensityField uniform(const PhaseGrid& grid);
  // Samples fn at cell centres and normalizes; fn must be nonnegative.
  static DensityField from_function(const PhaseGrid& grid,
                                    const std::function<double(std::span<const double>)>& fn);

  [[nodiscard]] const PhaseGrid& grid() const noexcept { return grid_; }
  [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
  [[nodiscard]] double operator[](std::size_t i) const noexcept { return values_[i]; }
  [[nodiscard]] double time() const noexcept { return time_; }
  void set_time(double t) noexcept { time_ = t; }
  [[nodiscard]] double mass() const;
  // Spatial density rho(x) = sum_v f(x, v) dv^d.
  [[nodiscard]] std::vector<double> spatial_density() const;

  // Replaces the values without the normalization check; used by solvers that
  // conserve mass by construction and verify it separately.
  void assign_unchecked(std::vector<double> values, double time) {
    values_ = std::move(values);
    time_ = time;
  }

 private:
  PhaseGrid grid_;
  std::vector<double> values_;
  double time_;
};

}  // namespace mfchaos
