#include "mfchaos/fields.hpp"

#include <cmath>
#include <string>

#include "mfchaos/errors.hpp"
#include "mfchaos/numeric.hpp"

namespace mfchaos {

PhaseGrid PhaseGrid::spatial(int dim, int mx) {
  PhaseGrid g{dim, mx, 0, 1.0};
  g.validate();
  return g;
}

PhaseGrid PhaseGrid::kinetic(int dim, int mx, int mv, double lv) {
  PhaseGrid g{dim, mx, mv, lv};
  g.validate();
  return g;
}

void PhaseGrid::validate() const {
  if (dim < 1 || dim > kMaxDim) throw DimensionMismatch("grid dimension must be 1..3");
  if (mx < 4) throw DimensionMismatch("need at least 4 spatial cells per axis");
  if (mv != 0 && mv < 4) throw DimensionMismatch("need at least 4 velocity cells per axis");
  if (has_velocity() && !(lv > 0.0)) throw DimensionMismatch("velocity box half-width must be positive");
}

std::size_t PhaseGrid::spatial_size() const noexcept {
  std::size_t n = 1;
  for (int i = 0; i < dim; ++i) n *= static_cast<std::size_t>(mx);
  return n;
}

std::size_t PhaseGrid::velocity_size() const noexcept {
  if (!has_velocity()) return 1;
  std::size_t n = 1;
  for (int i = 0; i < dim; ++i) n *= static_cast<std::size_t>(mv);
  return n;
}

double PhaseGrid::spatial_volume() const noexcept { return std::pow(dx(), dim); }

double PhaseGrid::velocity_volume() const noexcept {
  return has_velocity() ? std::pow(dv(), dim) : 1.0;
}

std::vector<double> PhaseGrid::center(std::size_t index) const {
  std::vector<double> z(2 * dim, 0.0);
  std::size_t s = index / velocity_size();
  std::size_t v = index % velocity_size();
  for (int a = dim - 1; a >= 0; --a) {
    z[a] = x_center(static_cast<int>(s % mx));
    s /= mx;
    if (has_velocity()) {
      z[dim + a] = v_center(static_cast<int>(v % mv));
      v /= mv;
    }
  }
  return z;
}

namespace {

std::size_t axis_stride(int dim, int extent, int axis) {
  std::size_t s = 1;
  for (int a = axis + 1; a < dim; ++a) s *= static_cast<std::size_t>(extent);
  return s;
}

std::size_t shifted(std::size_t index, std::size_t stride, std::size_t extent, int step) {
  const std::size_t coord = (index / stride) % extent;
  const std::size_t moved = (coord + extent + static_cast<std::size_t>(step + 1) - 1) % extent;
  return index - coord * stride + moved * stride;
}

}  // namespace

int PhaseGrid::v_coord(std::size_t site, int axis) const noexcept {
  const std::size_t v = velocity_index(site);
  return static_cast<int>((v / axis_stride(dim, mv, axis)) % mv);
}

std::size_t PhaseGrid::shift_x(std::size_t site, int axis, int step) const noexcept {
  const std::size_t nv = velocity_size();
  const std::size_t s = shifted(site / nv, axis_stride(dim, mx, axis), mx, step);
  return s * nv + site % nv;
}

std::size_t PhaseGrid::shift_v(std::size_t site, int axis, int step) const noexcept {
  const std::size_t nv = velocity_size();
  const std::size_t v = shifted(site % nv, axis_stride(dim, mv, axis), mv, step);
  return (site / nv) * nv + v;
}

std::size_t PhaseGrid::spatial_offset(std::size_t s1, std::size_t s2) const noexcept {
  std::size_t out = 0, stride = 1;
  const std::size_t m = mx;
  for (int a = dim - 1; a >= 0; --a) {
    out += ((s1 % m + m - s2 % m) % m) * stride;
    stride *= m;
    s1 /= m;
    s2 /= m;
  }
  return out;
}

DensityField::DensityField(PhaseGrid grid, std::vector<double> values, double time)
    : grid_(grid), values_(std::move(values)), time_(time) {
  grid_.validate();
  if (values_.size() != grid_.size()) throw DimensionMismatch("density size does not match grid");
  for (double v : values_) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw UnnormalizedDensity("negative or non-finite value");
  }
  const double m = mass();
  if (std::abs(m - 1.0) > kMassTolerance) {
    throw UnnormalizedDensity("mass " + std::to_string(m) + " differs from 1");
  }
}

DensityField DensityField::uniform(const PhaseGrid& grid) {
  grid.validate();
  const double total = static_cast<double>(grid.size()) * grid.cell_volume();
  return DensityField(grid, std::vector<double>(grid.size(), 1.0 / total));
}

DensityField DensityField::from_function(const PhaseGrid& grid,
                                         const std::function<double(std::span<const double>)>& fn) {
  grid.validate();
  std::vector<double> v(grid.size());
  CompensatedSum total;
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = fn(grid.center(i));
    if (!(v[i] >= 0.0)) throw UnnormalizedDensity("density function is negative");
    total.add(v[i] * grid.cell_volume());
  }
  if (!(total.value() > 0.0)) throw UnnormalizedDensity("density function has zero mass");
  for (double& x : v) x /= total.value();
  return DensityField(grid, std::move(v));
}

double DensityField::mass() const { return compensated_total(values_) * grid_.cell_volume(); }

std::vector<double> DensityField::spatial_density() const {
  const std::size_t nv = grid_.velocity_size();
  std::vector<double> rho(grid_.spatial_size());
  for (std::size_t s = 0; s < rho.size(); ++s) {
    CompensatedSum acc;
    for (std::size_t v = 0; v < nv; ++v) acc.add(values_[s * nv + v]);
    rho[s] = acc.value() * grid_.velocity_volume();
  }
  return rho;
}

}  // namespace mfchaos
