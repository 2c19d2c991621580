#include "mfchaos/kernels.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "mfchaos/errors.hpp"

namespace mfchaos {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
// Rows of the periodic vortex street summed on each side of the base row;
// the truncation error is below exp(-2 pi (rows - 1/2)).
constexpr int kBiotSavartRows = 6;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double norm(const Vec& x, int d) {
  double s = 0.0;
  for (int i = 0; i < d; ++i) s += x[i] * x[i];
  return std::sqrt(s);
}

Vec wrap_centered(const Vec& x, int d) {
  Vec w{};
  for (int i = 0; i < d; ++i) w[i] = x[i] - std::floor(x[i] + 0.5);
  return w;
}

bool is_origin(const Vec& x, int d) {
  for (int i = 0; i < d; ++i) {
    if (x[i] != 0.0) return false;
  }
  return true;
}

Vec riesz_whole(const Vec& x, int d, double s) {
  const double r = norm(x, d);
  const double scale = std::pow(r, -(s + 1.0));
  Vec out{};
  for (int i = 0; i < d; ++i) out[i] = x[i] * scale;
  return out;
}

double riesz_div_whole(const Vec& x, int d, double s) {
  const double r = norm(x, d);
  return (d - s - 1.0) * std::pow(r, -(s + 1.0));
}

// Lattice vectors n != 0 with |n|_inf <= shells whose first nonzero entry is
// positive; together with -n they enumerate the punctured cube once.
std::vector<Vec> half_lattice(int d, int shells) {
  std::vector<Vec> out;
  std::array<int, kMaxDim> n{};
  const int side = 2 * shells + 1;
  int total = 1;
  for (int i = 0; i < d; ++i) total *= side;
  for (int idx = 0; idx < total; ++idx) {
    int rem = idx;
    for (int i = d - 1; i >= 0; --i) {
      n[i] = rem % side - shells;
      rem /= side;
    }
    int first = 0;
    for (int i = 0; i < d; ++i) {
      if (n[i] != 0) {
        first = n[i];
        break;
      }
    }
    if (first > 0) {
      Vec v{};
      for (int i = 0; i < d; ++i) v[i] = n[i];
      out.push_back(v);
    }
  }
  return out;
}

// Pairing n with -n keeps the periodized sum exactly odd in floating point.
template <class F>
Vec paired_image_sum(const Vec& w, int d, int shells, F&& base) {
  Vec acc = base(w);
  for (const Vec& n : half_lattice(d, shells)) {
    Vec plus{}, minus{};
    for (int i = 0; i < d; ++i) {
      plus[i] = w[i] + n[i];
      minus[i] = w[i] - n[i];
    }
    const Vec a = base(plus);
    const Vec b = base(minus);
    for (int i = 0; i < d; ++i) acc[i] += a[i] + b[i];
  }
  return acc;
}

// Velocity of a row of unit vortices at integer x-offsets, evaluated through
// |y| and |x| so that the result is exactly odd.
std::array<double, 2> vortex_row(double x, double y) {
  const double ay = std::abs(y);
  const double ax = std::abs(x);
  const double e = std::exp(kTwoPi * ay);
  const double ch = 0.5 * (e + 1.0 / e);
  const double sh = 0.5 * (e - 1.0 / e);
  const double denom = ch - std::cos(kTwoPi * ax);
  const double u = -0.5 * sh / denom;
  const double v = 0.5 * std::sin(kTwoPi * ax) / denom;
  return {std::copysign(1.0, y) * u, std::copysign(1.0, x) * v};
}

// Doubly periodic point vortex on the unit torus with neutralizing background;
// x, y in the centered cell. Summing rows over y+n turns the Fourier series
// into an exponentially convergent sum; the linear term restores periodicity.
Vec biot_savart_torus(const Vec& w) {
  const double x = w[0];
  const double y = w[1];
  auto r0 = vortex_row(x, y);
  double u = r0[0];
  double v = r0[1];
  for (int n = 1; n <= kBiotSavartRows; ++n) {
    const auto a = vortex_row(x, y + n);
    const auto b = vortex_row(x, y - n);
    u += a[0] + b[0];
    v += a[1] + b[1];
  }
  u += y;
  return {u, v, 0.0};
}

Vec biot_savart_whole(const Vec& x) {
  const double r2 = x[0] * x[0] + x[1] * x[1];
  const double c = 1.0 / (kTwoPi * r2);
  return {-x[1] * c, x[0] * c, 0.0};
}

double truncation_cap(const KernelSpec& base, double cutoff) {
  return std::visit(Overloaded{
                        [&](const family::Riesz& r) { return std::pow(cutoff, -r.exponent); },
                        [&](const family::BiotSavart2d&) { return 1.0 / (kTwoPi * cutoff); },
                        [](const auto&) { return std::numeric_limits<double>::infinity(); },
                    },
                    base.family());
}

Vec clamp_magnitude(Vec v, int d, double cap) {
  const double m = norm(v, d);
  if (m > cap) {
    const double s = cap / m;
    for (int i = 0; i < d; ++i) v[i] *= s;
  }
  return v;
}

constexpr std::array<double, 8> kGaussNodes = {
    -0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
    0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975363};
constexpr std::array<double, 8> kGaussWeights = {
    0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
    0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};

// Radius, relative to the mollifier width, at which singular bases are clamped
// inside the quadrature; about one node spacing.
constexpr double kInnerClampFraction = 0.25;

struct RawRule {
  std::vector<Vec> nodes;
  std::vector<double> weights;  // w_q rho(y_q), not normalized
};

RawRule raw_rule(double width, int dim) {
  RawRule rule;
  int total = 1;
  for (int i = 0; i < dim; ++i) total *= 8;
  for (int idx = 0; idx < total; ++idx) {
    int rem = idx;
    Vec y{};
    double w = 1.0;
    for (int i = dim - 1; i >= 0; --i) {
      const int q = rem % 8;
      rem /= 8;
      y[i] = width * kGaussNodes[q];
      w *= width * kGaussWeights[q];
    }
    const double rho = mollifier_density(width, dim, y);
    if (rho > 0.0) {
      rule.nodes.push_back(y);
      rule.weights.push_back(w * rho);
    }
  }
  return rule;
}

Vec eval_impl(const KernelSpec& spec, const Vec& x);

Vec eval_mollified(const family::Mollified& m, int d, const Vec& x) {
  const bool clamp = m.base->is_singular();
  const KernelSpec& inner = *m.integrand;
  const QuadratureRule& rule = *m.rule;
  auto raw = [&](const Vec& p) {
    Vec acc{};
    for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
      Vec arg{};
      for (int i = 0; i < d; ++i) arg[i] = p[i] - rule.nodes[q][i];
      Vec k{};
      if (!(clamp && is_origin(arg, d))) k = eval_impl(inner, arg);
      for (int i = 0; i < d; ++i) acc[i] += rule.weights[q] * k[i];
    }
    return acc;
  };
  // Nodes are mirror-symmetric but visited in a fixed order; antisymmetrizing
  // the two evaluations makes oddness exact in floating point.
  Vec neg{};
  for (int i = 0; i < d; ++i) neg[i] = -x[i];
  const Vec a = raw(x);
  const Vec b = raw(neg);
  Vec out{};
  for (int i = 0; i < d; ++i) out[i] = 0.5 * (a[i] - b[i]);
  return out;
}

Vec eval_impl(const KernelSpec& spec, const Vec& xin) {
  const int d = spec.dim();
  const bool torus = spec.domain() == Domain::Torus;
  const Vec x = torus ? wrap_centered(xin, d) : xin;
  return std::visit(
      Overloaded{
          [&](const family::Zero&) { return Vec{}; },
          [&](const family::FourierSmooth& f) {
            Vec out{};
            for (const auto& mode : f.modes) {
              double phase = 0.0;
              for (int i = 0; i < d; ++i) phase += mode.wavevector[i] * xin[i];
              const double s = std::sin(kTwoPi * phase);
              for (int i = 0; i < d; ++i) out[i] += mode.amplitude[i] * s;
            }
            return out;
          },
          [&](const family::Riesz& r) {
            if (is_origin(x, d)) throw SingularPoint("riesz kernel at the origin");
            if (!torus) return riesz_whole(x, d, r.exponent);
            return paired_image_sum(x, d, spec.image_shells(),
                                    [&](const Vec& p) { return riesz_whole(p, d, r.exponent); });
          },
          [&](const family::BiotSavart2d&) {
            if (is_origin(x, d)) throw SingularPoint("biot_savart_2d at the origin");
            return torus ? biot_savart_torus(x) : biot_savart_whole(x);
          },
          [&](const family::Truncated& t) {
            if (is_origin(x, d)) return Vec{};
            return clamp_magnitude(eval_impl(*t.base, x), d, truncation_cap(*t.base, t.cutoff));
          },
          [&](const family::Mollified& m) { return eval_mollified(m, d, x); },
      },
      spec.family());
}

}  // namespace

KernelSpec::KernelSpec(KernelFamily fam, int dim, Domain domain)
    : family_(std::move(fam)), dim_(dim), domain_(domain) {
  if (dim_ < 1 || dim_ > kMaxDim) throw DimensionMismatch("kernel dimension must be 1..3");
  std::visit(Overloaded{
                 [&](const family::BiotSavart2d&) {
                   if (dim_ != 2) throw DimensionMismatch("biot_savart_2d requires d = 2");
                 },
                 [&](const family::Truncated& t) {
                   if (!t.base || !(t.cutoff > 0.0)) throw DimensionMismatch("truncated needs base and cutoff > 0");
                   if (t.base->dim() != dim_) throw DimensionMismatch("truncated base dimension");
                 },
                 [&](family::Mollified& m) {
                   if (!m.base || !(m.width > 0.0)) throw DimensionMismatch("mollified needs base and width > 0");
                   if (m.base->dim() != dim_) throw DimensionMismatch("mollified base dimension");
                   if (!m.rule) m.rule = std::make_shared<const QuadratureRule>(mollifier_quadrature(m.width, dim_));
                   if (!m.integrand) {
                     m.integrand = m.base->is_singular()
                                       ? std::make_shared<const KernelSpec>(
                                             KernelSpec::truncated(*m.base, kInnerClampFraction * m.width))
                                       : m.base;
                   }
                 },
                 [](const auto&) {},
             },
             family_);
}

KernelSpec KernelSpec::zero(int dim, Domain domain) { return {family::Zero{}, dim, domain}; }

KernelSpec KernelSpec::fourier(std::vector<family::FourierMode> modes, int dim, Domain domain) {
  return {family::FourierSmooth{std::move(modes)}, dim, domain};
}

KernelSpec KernelSpec::sine(double amplitude) {
  family::FourierMode m;
  m.wavevector[0] = 1;
  m.amplitude[0] = amplitude;
  return fourier({m}, 1, Domain::Torus);
}

KernelSpec KernelSpec::riesz(double exponent, int dim, Domain domain) {
  return {family::Riesz{exponent}, dim, domain};
}

KernelSpec KernelSpec::biot_savart(Domain domain) { return {family::BiotSavart2d{}, 2, domain}; }

KernelSpec KernelSpec::truncated(const KernelSpec& base, double cutoff) {
  return {family::Truncated{std::make_shared<const KernelSpec>(base), cutoff}, base.dim(),
          base.domain()};
}

KernelSpec& KernelSpec::set_image_shells(int shells) {
  if (shells < 0) throw DimensionMismatch("image shells must be >= 0");
  image_shells_ = shells;
  return *this;
}

std::string KernelSpec::family_name() const {
  return std::visit(Overloaded{
                        [](const family::Zero&) { return std::string("zero"); },
                        [](const family::FourierSmooth&) { return std::string("fourier_smooth"); },
                        [](const family::Riesz&) { return std::string("riesz"); },
                        [](const family::BiotSavart2d&) { return std::string("biot_savart_2d"); },
                        [](const family::Truncated&) { return std::string("truncated"); },
                        [](const family::Mollified&) { return std::string("mollified"); },
                    },
                    family_);
}

bool KernelSpec::is_zero() const noexcept {
  return std::visit(Overloaded{
                        [](const family::Zero&) { return true; },
                        [](const family::FourierSmooth& f) {
                          for (const auto& m : f.modes) {
                            for (double a : m.amplitude) {
                              if (a != 0.0) return false;
                            }
                          }
                          return true;
                        },
                        [](const family::Truncated& t) { return t.base->is_zero(); },
                        [](const family::Mollified& m) { return m.base->is_zero(); },
                        [](const auto&) { return false; },
                    },
                    family_);
}

bool KernelSpec::is_singular() const noexcept {
  return std::visit(Overloaded{
                        [](const family::Riesz& r) { return r.exponent > 0.0; },
                        [](const family::BiotSavart2d&) { return true; },
                        [](const auto&) { return false; },
                    },
                    family_);
}

Vec eval_kernel(const KernelSpec& spec, const Vec& x) { return eval_impl(spec, x); }

Vec eval_kernel(const KernelSpec& spec, std::span<const double> x) {
  if (static_cast<int>(x.size()) != spec.dim()) throw DimensionMismatch("point dimension");
  Vec p{};
  for (int i = 0; i < spec.dim(); ++i) p[i] = x[i];
  return eval_impl(spec, p);
}

double eval_divergence(const KernelSpec& spec, const Vec& xin) {
  const int d = spec.dim();
  const bool torus = spec.domain() == Domain::Torus;
  const Vec x = torus ? wrap_centered(xin, d) : xin;
  return std::visit(
      Overloaded{
          [&](const family::Zero&) { return 0.0; },
          [&](const family::FourierSmooth& f) {
            double out = 0.0;
            for (const auto& mode : f.modes) {
              double phase = 0.0;
              double kdota = 0.0;
              for (int i = 0; i < d; ++i) {
                phase += mode.wavevector[i] * xin[i];
                kdota += mode.wavevector[i] * mode.amplitude[i];
              }
              out += kTwoPi * kdota * std::cos(kTwoPi * phase);
            }
            return out;
          },
          [&](const family::BiotSavart2d&) {
            if (is_origin(x, d)) throw SingularPoint("biot_savart_2d at the origin");
            return 0.0;
          },
          [&](const family::Riesz& r) -> double {
            if (is_origin(x, d)) throw SingularPoint("riesz kernel at the origin");
            if (!torus) return riesz_div_whole(x, d, r.exponent);
            double acc = riesz_div_whole(x, d, r.exponent);
            for (const Vec& n : half_lattice(d, spec.image_shells())) {
              Vec plus{}, minus{};
              for (int i = 0; i < d; ++i) {
                plus[i] = x[i] + n[i];
                minus[i] = x[i] - n[i];
              }
              acc += riesz_div_whole(plus, d, r.exponent) + riesz_div_whole(minus, d, r.exponent);
            }
            return acc;
          },
          [&](const family::Mollified& m) -> double {
            if (std::holds_alternative<family::BiotSavart2d>(m.base->family())) return 0.0;
            if (m.base->is_singular()) throw Unsupported("divergence of a mollified singular kernel");
            const QuadratureRule& rule = *m.rule;
            double acc = 0.0;
            for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
              Vec arg{};
              for (int i = 0; i < d; ++i) arg[i] = xin[i] - rule.nodes[q][i];
              acc += rule.weights[q] * eval_divergence(*m.base, arg);
            }
            return acc;
          },
          [&](const family::Truncated&) -> double {
            throw Unsupported("truncated kernels have no closed-form divergence");
          },
      },
      spec.family());
}

KernelSpec mollify(const KernelSpec& spec, double width) {
  if (!(width > 0.0)) throw DimensionMismatch("mollifier width must be positive");
  if (std::holds_alternative<family::Zero>(spec.family())) return spec;
  KernelSpec out{family::Mollified{std::make_shared<const KernelSpec>(spec), width, nullptr, nullptr}, spec.dim(),
                 spec.domain()};
  out.set_image_shells(spec.image_shells());
  return out;
}

double mollifier_density(double width, int dim, const Vec& y) {
  double r2 = 0.0;
  for (int i = 0; i < dim; ++i) r2 += (y[i] / width) * (y[i] / width);
  if (r2 >= 1.0) return 0.0;
  // c_d = Gamma(d/2 + 5) / (24 pi^{d/2}) gives unit mass for (1 - r^2)^4.
  const double c = std::exp(std::lgamma(0.5 * dim + 5.0)) /
                   (24.0 * std::pow(std::numbers::pi, 0.5 * dim));
  const double b = 1.0 - r2;
  return c * b * b * b * b / std::pow(width, dim);
}

QuadratureRule mollifier_quadrature(double width, int dim) {
  RawRule raw = raw_rule(width, dim);
  double mass = 0.0;
  for (double w : raw.weights) mass += w;
  QuadratureRule rule;
  rule.nodes = std::move(raw.nodes);
  rule.weights = std::move(raw.weights);
  for (double& w : rule.weights) w /= mass;
  return rule;
}

double mollifier_rule_mass(double width, int dim) {
  double mass = 0.0;
  for (double w : raw_rule(width, dim).weights) mass += w;
  return mass;
}

double mollified_sup_bound(const KernelSpec& spec) {
  const auto* m = std::get_if<family::Mollified>(&spec.family());
  if (!m) throw Unsupported("mollified_sup_bound needs a mollified kernel");
  // Normalized weights sum to one, so sup |K_delta| <= the inner clamp level.
  if (m->base->is_singular()) return truncation_cap(*m->base, kInnerClampFraction * m->width);
  return std::numeric_limits<double>::infinity();
}

cplx fourier_coefficient(const KernelSpec& spec, std::span<const int> k, int component) {
  const int d = spec.dim();
  if (static_cast<int>(k.size()) != d) throw DimensionMismatch("wavevector dimension");
  if (component < 0 || component >= d) throw DimensionMismatch("component index");
  return std::visit(
      Overloaded{
          [&](const family::Zero&) { return cplx{}; },
          [&](const family::FourierSmooth& f) {
            cplx c{};
            for (const auto& mode : f.modes) {
              bool plus = true, minus = true;
              for (int i = 0; i < d; ++i) {
                plus = plus && mode.wavevector[i] == k[i];
                minus = minus && mode.wavevector[i] == -k[i];
              }
              // sin(2 pi k.x) = (e^{+} - e^{-}) / (2i)
              if (plus) c += cplx(0.0, -0.5 * mode.amplitude[component]);
              if (minus) c += cplx(0.0, 0.5 * mode.amplitude[component]);
            }
            return c;
          },
          [&](const family::BiotSavart2d&) {
            const double k2 = static_cast<double>(k[0]) * k[0] + static_cast<double>(k[1]) * k[1];
            if (k2 == 0.0) return cplx{};
            // Khat(k) = -i k^perp / (2 pi |k|^2), k^perp = (-k2, k1); curl K = delta - 1
            const double perp = component == 0 ? -k[1] : k[0];
            return cplx(0.0, -perp / (kTwoPi * k2));
          },
          [&](const auto&) -> cplx {
            throw Unsupported("closed-form Fourier coefficients only for zero, fourier_smooth, biot_savart_2d");
          },
      },
      spec.family());
}

std::size_t TorusGrid::size() const noexcept {
  std::size_t n = 1;
  for (int i = 0; i < dim; ++i) n *= static_cast<std::size_t>(cells);
  return n;
}

double TorusGrid::cell_volume() const noexcept { return std::pow(spacing(), dim); }

Vec TorusGrid::point(std::size_t index) const noexcept {
  Vec p{};
  for (int i = dim - 1; i >= 0; --i) {
    p[i] = static_cast<double>(index % cells) * spacing();
    index /= cells;
  }
  return p;
}

VectorField sample_on_grid(const KernelSpec& spec, const TorusGrid& grid) {
  if (spec.dim() != grid.dim) throw DimensionMismatch("kernel and grid dimension");
  const std::size_t n = grid.size();
  VectorField out(spec.dim(), std::vector<double>(n, 0.0));
  for (std::size_t idx = 0; idx < n; ++idx) {
    const Vec p = grid.point(idx);
    if (idx == 0 && spec.is_singular()) continue;
    const Vec k = eval_kernel(spec, p);
    for (int c = 0; c < spec.dim(); ++c) out[c][idx] = k[c];
  }
  return out;
}

KernelConvolver::KernelConvolver(const KernelSpec& spec, const TorusGrid& grid)
    : grid_(grid), zero_(spec.is_zero()), plan_(grid.dims()) {
  if (spec.domain() != Domain::Torus) throw NotTorus("convolution needs a torus kernel");
  samples_ = sample_on_grid(spec, grid);
  if (zero_) return;
  for (const auto& comp : samples_) {
    std::vector<cplx> s(comp.begin(), comp.end());
    plan_.forward(s);
    spectra_.push_back(std::move(s));
  }
}

VectorField KernelConvolver::apply(std::span<const double> rho) const {
  const std::size_t n = grid_.size();
  if (rho.size() != n) throw DimensionMismatch("density size does not match grid");
  VectorField out(grid_.dim, std::vector<double>(n, 0.0));
  if (zero_) return out;
  std::vector<cplx> rh(rho.begin(), rho.end());
  plan_.forward(rh);
  const double vol = grid_.cell_volume();
  std::vector<cplx> work(n);
  for (int c = 0; c < grid_.dim; ++c) {
    for (std::size_t i = 0; i < n; ++i) work[i] = spectra_[c][i] * rh[i];
    plan_.inverse(work);
    for (std::size_t i = 0; i < n; ++i) out[c][i] = work[i].real() * vol;
  }
  return out;
}

VectorField convolve_with_density(const KernelSpec& spec, const TorusGrid& grid,
                                  std::span<const double> rho) {
  return KernelConvolver(spec, grid).apply(rho);
}

}  // namespace mfchaos
