#include "mfchaos/meanfield.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mfchaos/correlation.hpp"
#include "mfchaos/errors.hpp"
#include "mfchaos/numeric.hpp"

namespace mfchaos {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::size_t ipow(std::size_t base, int e) {
  std::size_t r = 1;
  for (int i = 0; i < e; ++i) r *= base;
  return r;
}

// Stride and extent of axis a inside a row-major block of `n` cells per axis.
struct Axis {
  std::size_t stride;
  std::size_t extent;
};

Axis axis_of(int dim, int n, int a) {
  return {ipow(static_cast<std::size_t>(n), dim - 1 - a), static_cast<std::size_t>(n)};
}

// Index of the periodic neighbour at `shift` (+1 or -1) along an axis.
std::size_t neighbour(std::size_t index, const Axis& ax, int shift) {
  const std::size_t coord = (index / ax.stride) % ax.extent;
  const std::size_t moved = (coord + ax.extent + shift) % ax.extent;
  return index + (moved * ax.stride) - (coord * ax.stride);
}

std::vector<int> diffusion_dims(const PhaseGrid& g) {
  return std::vector<int>(g.dim, g.has_velocity() ? g.mv : g.mx);
}

}  // namespace

MeanFieldSolver::MeanFieldSolver(const KernelSpec& kernel, const PhaseGrid& grid)
    : kernel_(kernel),
      grid_(grid),
      convolver_(kernel, grid.torus()),
      diffusion_plan_(diffusion_dims(grid)) {
  grid_.validate();
  if (kernel.dim() != grid.dim) throw DimensionMismatch("kernel and grid dimension");
}

VectorField MeanFieldSolver::force_field(const DensityField& f) const {
  if (!(f.grid() == grid_)) throw DimensionMismatch("density lives on a different grid");
  return convolver_.apply(f.spatial_density());
}

void MeanFieldSolver::transport_x(std::vector<double>& f, double dt) const {
  const std::size_t nv = grid_.velocity_size();
  // The Courant bound only binds on velocity cells that carry mass.
  double vmax = 0.0;
  for (std::size_t s = 0; s < grid_.spatial_size(); ++s) {
    for (std::size_t v = 0; v < nv; ++v) {
      if (f[s * nv + v] == 0.0) continue;
      std::size_t rest = v;
      for (int a = grid_.dim - 1; a >= 0; --a) {
        vmax = std::max(vmax, std::abs(grid_.v_center(static_cast<int>(rest % grid_.mv))));
        rest /= grid_.mv;
      }
    }
  }
  if (vmax * dt / grid_.dx() > 1.0) throw CFLViolation("max|v| dt / dx > 1");
  std::vector<double> out(f.size());
  for (int a = 0; a < grid_.dim; ++a) {
    const Axis ax = axis_of(grid_.dim, grid_.mx, a);
    const Axis vax = axis_of(grid_.dim, grid_.mv, a);
    for (std::size_t s = 0; s < grid_.spatial_size(); ++s) {
      for (std::size_t v = 0; v < nv; ++v) {
        const double speed = grid_.v_center(static_cast<int>((v / vax.stride) % vax.extent));
        const double c = speed * dt / grid_.dx();
        const std::size_t up = neighbour(s, ax, c >= 0.0 ? -1 : 1);
        const double w = std::abs(c);
        out[s * nv + v] = (1.0 - w) * f[s * nv + v] + w * f[up * nv + v];
      }
    }
    f.swap(out);
  }
}

void MeanFieldSolver::transport_v(std::vector<double>& f, const VectorField& force,
                                  double dt) const {
  const std::size_t nv = grid_.velocity_size();
  double emax = 0.0;
  for (const auto& comp : force) {
    for (double e : comp) emax = std::max(emax, std::abs(e));
  }
  if (emax * dt / grid_.dv() > 1.0) throw CFLViolation("max|K*f| dt / dv > 1");
  std::vector<double> out(f.size());
  for (int a = 0; a < grid_.dim; ++a) {
    const Axis vax = axis_of(grid_.dim, grid_.mv, a);
    for (std::size_t s = 0; s < grid_.spatial_size(); ++s) {
      const double c = force[a][s] * dt / grid_.dv();
      const double w = std::abs(c);
      for (std::size_t v = 0; v < nv; ++v) {
        const std::size_t up = neighbour(v, vax, c >= 0.0 ? -1 : 1);
        out[s * nv + v] = (1.0 - w) * f[s * nv + v] + w * f[s * nv + up];
      }
    }
    f.swap(out);
  }
}

void MeanFieldSolver::transport_spatial(std::vector<double>& rho, const VectorField& force,
                                        double dt) const {
  double emax = 0.0;
  for (const auto& comp : force) {
    for (double e : comp) emax = std::max(emax, std::abs(e));
  }
  if (emax * dt / grid_.dx() > 1.0) throw CFLViolation("max|K*rho| dt / dx > 1");
  const double lambda = dt / grid_.dx();
  std::vector<double> flux(rho.size());
  for (int a = 0; a < grid_.dim; ++a) {
    const Axis ax = axis_of(grid_.dim, grid_.mx, a);
    // flux[i] sits on the face between i and its +1 neighbour.
    for (std::size_t i = 0; i < rho.size(); ++i) {
      const std::size_t r = neighbour(i, ax, 1);
      const double u = 0.5 * (force[a][i] + force[a][r]);
      flux[i] = u >= 0.0 ? u * rho[i] : u * rho[r];
    }
    std::vector<double> out(rho.size());
    for (std::size_t i = 0; i < rho.size(); ++i) {
      out[i] = rho[i] - lambda * (flux[i] - flux[neighbour(i, ax, -1)]);
    }
    rho.swap(out);
  }
}

void MeanFieldSolver::heat_flow(std::vector<double>& f, double alpha, double dt) const {
  if (alpha == 0.0) return;
  const bool kinetic = grid_.has_velocity();
  const int n = kinetic ? grid_.mv : grid_.mx;
  const double length = kinetic ? 2.0 * grid_.lv : 1.0;
  const std::size_t block = ipow(static_cast<std::size_t>(n), grid_.dim);
  std::vector<double> multiplier(block);
  for (std::size_t i = 0; i < block; ++i) {
    double k2 = 0.0;
    std::size_t rest = i;
    for (int a = grid_.dim - 1; a >= 0; --a) {
      const double xi = kTwoPi * signed_frequency(static_cast<int>(rest % n), n) / length;
      k2 += xi * xi;
      rest /= n;
    }
    multiplier[i] = std::exp(-alpha * dt * k2);
  }
  std::vector<cplx> work(block);
  for (std::size_t start = 0; start < f.size(); start += block) {
    for (std::size_t i = 0; i < block; ++i) work[i] = f[start + i];
    diffusion_plan_.forward(work);
    for (std::size_t i = 0; i < block; ++i) work[i] *= multiplier[i];
    diffusion_plan_.inverse(work);
    for (std::size_t i = 0; i < block; ++i) f[start + i] = work[i].real();
  }
}

DensityField MeanFieldSolver::step(const DensityField& f, double alpha, double dt) const {
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  if (!(alpha >= 0.0)) throw ConfigError("alpha must be >= 0");
  const VectorField force = force_field(f);
  std::vector<double> v(f.values().begin(), f.values().end());
  if (grid_.has_velocity()) {
    transport_x(v, dt);
    transport_v(v, force, dt);
  } else {
    transport_spatial(v, force, dt);
  }
  heat_flow(v, alpha, dt);
  DensityField out = f;
  out.assign_unchecked(std::move(v), f.time() + dt);
  return out;
}

DensityField MeanFieldSolver::evolve(const DensityField& f, double alpha, double dt, double t_end,
                                     const std::function<void(const DensityField&)>& observer) const {
  DensityField cur = f;
  if (observer) observer(cur);
  while (cur.time() < t_end - 1e-12 * std::max(1.0, t_end)) {
    const double h = std::min(dt, t_end - cur.time());
    cur = step(cur, alpha, h);
    if (observer) observer(cur);
  }
  return cur;
}

DensityField vlasov_step(const DensityField& f, const KernelSpec& kernel, double alpha, double dt) {
  if (!f.grid().has_velocity()) throw DimensionMismatch("vlasov_step needs a kinetic grid");
  return MeanFieldSolver(kernel, f.grid()).step(f, alpha, dt);
}

DensityField mckean_step(const DensityField& rho, const KernelSpec& kernel, double alpha,
                         double dt) {
  if (rho.grid().has_velocity()) throw DimensionMismatch("mckean_step needs a spatial grid");
  return MeanFieldSolver(kernel, rho.grid()).step(rho, alpha, dt);
}

ClampedDensity clamp_positive(const DensityField& f) {
  ClampedDensity out;
  out.values.assign(f.values().begin(), f.values().end());
  const double top = *std::max_element(out.values.begin(), out.values.end());
  out.floor = ClampedDensity::kFloor * top;
  for (double& v : out.values) {
    if (v < out.floor) {
      v = out.floor;
      ++out.clamped_cells;
    }
  }
  return out;
}

std::vector<double> central_difference(const PhaseGrid& grid, std::span<const double> values,
                                       int axis) {
  if (values.size() != grid.size()) throw DimensionMismatch("values do not match grid");
  if (axis < 0 || axis >= grid.dim) throw IndexRange("axis");
  std::vector<double> out(values.size());
  if (grid.has_velocity()) {
    const std::size_t nv = grid.velocity_size();
    const Axis vax = axis_of(grid.dim, grid.mv, axis);
    const double inv = 1.0 / (2.0 * grid.dv());
    for (std::size_t s = 0; s < grid.spatial_size(); ++s) {
      for (std::size_t v = 0; v < nv; ++v) {
        out[s * nv + v] = (values[s * nv + neighbour(v, vax, 1)] -
                           values[s * nv + neighbour(v, vax, -1)]) * inv;
      }
    }
  } else {
    const Axis ax = axis_of(grid.dim, grid.mx, axis);
    const double inv = 1.0 / (2.0 * grid.dx());
    for (std::size_t i = 0; i < values.size(); ++i) {
      out[i] = (values[neighbour(i, ax, 1)] - values[neighbour(i, ax, -1)]) * inv;
    }
  }
  return out;
}

double fisher_information(const DensityField& f) {
  const ClampedDensity c = clamp_positive(f);
  const PhaseGrid& g = f.grid();
  CompensatedSum s;
  for (int a = 0; a < g.dim; ++a) {
    const std::vector<double> d = central_difference(g, c.values, a);
    for (std::size_t i = 0; i < d.size(); ++i) s.add(d[i] * d[i] / c.values[i]);
  }
  return s.value() * g.cell_volume();
}

double force_gradient_sup(const DensityField& f, const KernelSpec& kernel) {
  const PhaseGrid spatial = PhaseGrid::spatial(f.grid().dim, f.grid().mx);
  const VectorField force = convolve_with_density(kernel, spatial.torus(), f.spatial_density());
  double worst = 0.0;
  for (const auto& comp : force) {
    for (int b = 0; b < spatial.dim; ++b) {
      for (double v : central_difference(spatial, comp, b)) worst = std::max(worst, std::abs(v));
    }
  }
  return worst;
}

TwoPointField::TwoPointField(const DensityField& f, const KernelSpec& kernel) : grid_(f.grid()) {
  if (kernel.dim() != grid_.dim) throw DimensionMismatch("kernel and grid dimension");
  ClampedDensity c = clamp_positive(f);
  weight_ = std::move(c.values);
  clamped_ = c.clamped_cells;
  for (int a = 0; a < grid_.dim; ++a) {
    std::vector<double> d = central_difference(grid_, weight_, a);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] /= weight_[i];
    gradient_.push_back(std::move(d));
  }
  const KernelConvolver conv(kernel, grid_.torus());
  samples_ = conv.samples();
  std::vector<double> rho(grid_.spatial_size());
  const std::size_t nv = grid_.velocity_size();
  for (std::size_t s = 0; s < rho.size(); ++s) {
    CompensatedSum acc;
    for (std::size_t v = 0; v < nv; ++v) acc.add(weight_[s * nv + v]);
    rho[s] = acc.value() * grid_.velocity_volume();
  }
  force_ = conv.apply(rho);
  if (!grid_.has_velocity()) {
    const PhaseGrid spatial = PhaseGrid::spatial(grid_.dim, grid_.mx);
    div_samples_.assign(rho.size(), 0.0);
    for (int a = 0; a < grid_.dim; ++a) {
      const std::vector<double> d = central_difference(spatial, samples_[a], a);
      for (std::size_t i = 0; i < d.size(); ++i) div_samples_[i] += d[i];
    }
    const FftPlan plan(grid_.torus().dims());
    div_force_ = circular_convolve(plan, div_samples_, rho);
    for (double& v : div_force_) v *= grid_.spatial_volume();
  }
}

std::size_t TwoPointField::offset(std::size_t s1, std::size_t s2) const noexcept {
  std::size_t out = 0;
  std::size_t stride = 1;
  const std::size_t m = grid_.mx;
  for (int a = grid_.dim - 1; a >= 0; --a) {
    const std::size_t i1 = s1 % m, i2 = s2 % m;
    out += ((i1 + m - i2) % m) * stride;
    stride *= m;
    s1 /= m;
    s2 /= m;
  }
  return out;
}

double TwoPointField::operator()(std::size_t z1, std::size_t z2) const {
  const std::size_t nv = grid_.velocity_size();
  const std::size_t s1 = z1 / nv, s2 = z2 / nv;
  const std::size_t off = offset(s1, s2);
  double v = 0.0;
  for (int a = 0; a < grid_.dim; ++a) {
    v += (samples_[a][off] - force_[a][s1]) * gradient_[a][z1];
  }
  if (!grid_.has_velocity()) v += div_samples_[off] - div_force_[s1];
  return v;
}

NTensor TwoPointField::dense() const {
  const int n = static_cast<int>(grid_.size());
  NTensor t(2, StateSpace{n, grid_.cell_volume()});
  for (int z1 = 0; z1 < n; ++z1) {
    for (int z2 = 0; z2 < n; ++z2) t[static_cast<std::size_t>(z1) * n + z2] = (*this)(z1, z2);
  }
  return t;
}

Weight TwoPointField::weight_object() const {
  std::vector<double> w = weight_;
  const double m = compensated_total(w) * grid_.cell_volume();
  for (double& v : w) v /= m;
  return Weight(std::move(w), grid_.cell_volume());
}

TwoPointField::Cancellation TwoPointField::cancellations() const {
  const std::size_t n = grid_.size();
  const double dz = grid_.cell_volume();
  Cancellation out;
  std::vector<CompensatedSum> columns(n);
  for (std::size_t z1 = 0; z1 < n; ++z1) {
    CompensatedSum row;
    for (std::size_t z2 = 0; z2 < n; ++z2) {
      const double v = (*this)(z1, z2);
      row.add(v * weight_[z2] * dz);
      columns[z2].add(v * weight_[z1] * dz);
    }
    out.first_slot = std::max(out.first_slot, std::abs(row.value()));
  }
  for (const auto& c : columns) out.second_slot = std::max(out.second_slot, std::abs(c.value()));
  return out;
}

TwoPointField compute_Vf(const DensityField& f, const KernelSpec& kernel) {
  TwoPointField vf(f, kernel);
  if (vf.clamped_cells() * 10 > f.grid().size()) {
    throw DegenerateDensity("positivity clamp touched more than 10% of cells");
  }
  return vf;
}

double lambda_f(const TwoPointField& vf) {
  const std::size_t n = vf.grid().size();
  const double dz = vf.grid().cell_volume();
  const auto w = vf.weight();
  CompensatedSum s;
  for (std::size_t z1 = 0; z1 < n; ++z1) {
    CompensatedSum row;
    for (std::size_t z2 = 0; z2 < n; ++z2) {
      const double v = vf(z1, z2);
      row.add(v * v * w[z2]);
    }
    s.add(row.value() * w[z1]);
  }
  return std::sqrt(s.value()) * dz;
}

double lambda_f(const DensityField& f, const KernelSpec& kernel) {
  return lambda_f(compute_Vf(f, kernel));
}

double symmetrized_vf_norm(const DensityField& rho, const KernelSpec& kernel,
                           const VectorField& log_gradient) {
  const PhaseGrid& g = rho.grid();
  if (g.has_velocity()) throw DimensionMismatch("symmetrized_vf_norm needs a spatial grid");
  if (static_cast<int>(log_gradient.size()) != g.dim) throw DimensionMismatch("gradient components");
  const ClampedDensity c = clamp_positive(rho);
  if (c.clamped_cells * 10 > g.size()) throw DegenerateDensity("clamp touched more than 10% of cells");
  const VectorField samples = sample_on_grid(kernel, g.torus());
  const std::size_t n = g.size();
  const std::size_t m = g.mx;
  CompensatedSum s;
  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t y = 0; y < n; ++y) {
      std::size_t off = 0, stride = 1, a1 = x, a2 = y;
      for (int a = g.dim - 1; a >= 0; --a) {
        off += ((a1 % m + m - a2 % m) % m) * stride;
        stride *= m;
        a1 /= m;
        a2 /= m;
      }
      double dot = 0.0;
      for (int a = 0; a < g.dim; ++a) dot += samples[a][off] * (log_gradient[a][x] - log_gradient[a][y]);
      s.add(dot * dot * c.values[x] * c.values[y]);
    }
  }
  return std::sqrt(s.value()) * g.cell_volume();
}

double symmetrized_vf_norm(const DensityField& rho, const KernelSpec& kernel) {
  const ClampedDensity c = clamp_positive(rho);
  VectorField grad;
  for (int a = 0; a < rho.grid().dim; ++a) {
    std::vector<double> d = central_difference(rho.grid(), c.values, a);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] /= c.values[i];
    grad.push_back(std::move(d));
  }
  return symmetrized_vf_norm(rho, kernel, grad);
}

}  // namespace mfchaos
