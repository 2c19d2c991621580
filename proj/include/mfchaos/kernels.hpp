#pragma once

#include <array>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mfchaos/fft.hpp"

namespace mfchaos {

inline constexpr int kMaxDim = 3;
using Vec = std::array<double, kMaxDim>;

enum class Domain { Torus, WholeSpace };

// Far-field regularity class of the kernel away from the origin. Carried as
// metadata for reports; nothing in the library enforces it.
enum class FarField { Unspecified, Bounded, Lipschitz };

class KernelSpec;

struct QuadratureRule {
  std::vector<Vec> nodes;
  std::vector<double> weights;
};

namespace family {
struct Zero {};
// K(x) = sum_m amplitude_m sin(2 pi wavevector_m . x); odd by construction.
struct FourierMode {
  std::array<int, kMaxDim> wavevector{};
  Vec amplitude{};
};
struct FourierSmooth {
  std::vector<FourierMode> modes;
};
// K(x) = x / |x|^(exponent + 1), so |K(x)| = |x|^-exponent.
struct Riesz {
  double exponent = 1.0;
};
// K(x) = x^perp / (2 pi |x|^2) with x^perp = (-x2, x1).
struct BiotSavart2d {};
// Magnitude clamp of the base kernel at its size on the sphere of radius cutoff.
struct Truncated {
  std::shared_ptr<const KernelSpec> base;
  double cutoff = 0.0;
};
// K * rho_width with the polynomial bump rho(y) = c (1 - |y|^2)^4.
struct Mollified {
  std::shared_ptr<const KernelSpec> base;
  double width = 0.0;
  // Filled on construction: the quadrature rule and the (possibly clamped)
  // kernel it integrates.
  std::shared_ptr<const QuadratureRule> rule;
  std::shared_ptr<const KernelSpec> integrand;
};
}  // namespace family

using KernelFamily = std::variant<family::Zero, family::FourierSmooth, family::Riesz,
                                  family::BiotSavart2d, family::Truncated, family::Mollified>;

// Immutable description of an interaction kernel. Copies share the nested
// base specs; every evaluation is pure.
class KernelSpec {
 public:
  KernelSpec(KernelFamily family, int dim, Domain domain);

  static KernelSpec zero(int dim, Domain domain = Domain::Torus);
  static KernelSpec fourier(std::vector<family::FourierMode> modes, int dim,
                            Domain domain = Domain::Torus);
  // Single mode amplitude * sin(2 pi x) e_1 in d = 1.
  static KernelSpec sine(double amplitude);
  static KernelSpec riesz(double exponent, int dim, Domain domain = Domain::WholeSpace);
  static KernelSpec biot_savart(Domain domain = Domain::Torus);
  static KernelSpec truncated(const KernelSpec& base, double cutoff);

  [[nodiscard]] const KernelFamily& family() const noexcept { return family_; }
  [[nodiscard]] int dim() const noexcept { return dim_; }
  [[nodiscard]] Domain domain() const noexcept { return domain_; }
  [[nodiscard]] int image_shells() const noexcept { return image_shells_; }
  [[nodiscard]] FarField far_field() const noexcept { return far_field_; }
  [[nodiscard]] std::string family_name() const;

  KernelSpec& set_image_shells(int shells);
  KernelSpec& set_far_field(FarField tag) noexcept {
    far_field_ = tag;
    return *this;
  }

  [[nodiscard]] bool is_zero() const noexcept;
  // True when eval is unbounded near the origin.
  [[nodiscard]] bool is_singular() const noexcept;

 private:
  KernelFamily family_;
  int dim_;
  Domain domain_;
  int image_shells_ = 3;
  FarField far_field_ = FarField::Unspecified;
};

// Evaluates K(x). On the torus x is reduced to the centered cell first and
// the periodized kernel is returned.
Vec eval_kernel(const KernelSpec& spec, const Vec& x);
Vec eval_kernel(const KernelSpec& spec, std::span<const double> x);

double eval_divergence(const KernelSpec& spec, const Vec& x);

KernelSpec mollify(const KernelSpec& spec, double width);

// Mollifier density rho_width(y), unit mass on R^d.
double mollifier_density(double width, int dim, const Vec& y);
// Quadrature nodes and normalized weights of rho_width on [-width, width]^d.
QuadratureRule mollifier_quadrature(double width, int dim);
// Unnormalized weights w_q rho(y_q) of the same rule; their sum is the rule's mass.
double mollifier_rule_mass(double width, int dim);

// Upper bound on sup|K_delta| for a mollified singular kernel, implied by the
// quadrature weights and the inner clamp.
double mollified_sup_bound(const KernelSpec& mollified);

// Continuum Fourier coefficient of the periodized kernel for wavevector k,
// component c, under the convention K(x) = sum_k Khat(k) e^{2 pi i k.x}.
cplx fourier_coefficient(const KernelSpec& spec, std::span<const int> k, int component);

// Square periodic grid on [0,1)^d with m cells per axis, row-major.
struct TorusGrid {
  int dim = 1;
  int cells = 8;

  [[nodiscard]] std::size_t size() const noexcept;
  [[nodiscard]] double spacing() const noexcept { return 1.0 / cells; }
  [[nodiscard]] double cell_volume() const noexcept;
  [[nodiscard]] Vec point(std::size_t index) const noexcept;
  [[nodiscard]] std::vector<int> dims() const { return std::vector<int>(dim, cells); }
};

// Vector field on a TorusGrid, one array per component.
using VectorField = std::vector<std::vector<double>>;

// K evaluated at every grid offset; the singular origin is assigned 0, the
// principal value of an odd kernel.
VectorField sample_on_grid(const KernelSpec& spec, const TorusGrid& grid);

// Caches the DFT of the sampled kernel so repeated convolutions on one grid
// cost two transforms per component.
class KernelConvolver {
 public:
  KernelConvolver(const KernelSpec& spec, const TorusGrid& grid);

  // (K * rho)(x_i) = sum_j K(x_i - x_j) rho_j h^d for every grid point.
  [[nodiscard]] VectorField apply(std::span<const double> rho) const;
  [[nodiscard]] const TorusGrid& grid() const noexcept { return grid_; }
  [[nodiscard]] const VectorField& samples() const noexcept { return samples_; }

 private:
  TorusGrid grid_;
  bool zero_;
  VectorField samples_;
  std::vector<std::vector<cplx>> spectra_;
  FftPlan plan_;
};

VectorField convolve_with_density(const KernelSpec& spec, const TorusGrid& grid,
                                  std::span<const double> rho);

}  // namespace mfchaos
