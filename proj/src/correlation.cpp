#include "mfchaos/correlation.hpp"

#include <cmath>
#include <string>

#include "mfchaos/errors.hpp"
#include "mfchaos/numeric.hpp"

namespace mfchaos {

namespace {

constexpr double kNormalizationTolerance = 1e-10;

std::size_t tensor_size(int sites, int order, std::size_t cap) {
  if (order < 0) throw IndexRange("tensor order must be >= 0");
  auto n = checked_pow(static_cast<std::size_t>(sites), order, cap);
  if (!n) {
    throw MemoryCap(std::to_string(sites) + "^" + std::to_string(order) + " exceeds cap " +
                    std::to_string(cap));
  }
  return *n;
}

std::size_t ipow(int base, int e) {
  std::size_t r = 1;
  for (int i = 0; i < e; ++i) r *= static_cast<std::size_t>(base);
  return r;
}

void require_same_space(const NTensor& g, const Weight& f) {
  if (g.sites() != f.sites()) throw DimensionMismatch("tensor and weight site counts differ");
}

// For each k-subset of the n slots, the strides that map a full multi-index
// to the linear index of the order-k tensor evaluated on that subset.
struct SubsetMap {
  int k;
  std::vector<int> slots;
};

std::vector<SubsetMap> all_subsets(int n) {
  std::vector<SubsetMap> out;
  for (int k = 0; k <= n; ++k) {
    for_each_subset(n, k, [&](std::span<const int> s) {
      out.push_back({k, std::vector<int>(s.begin(), s.end())});
    });
  }
  return out;
}

std::size_t subset_index(const SubsetMap& s, std::span<const int> digits, int sites) {
  std::size_t idx = 0;
  for (int slot : s.slots) idx = idx * static_cast<std::size_t>(sites) + digits[slot];
  return idx;
}

}  // namespace

NTensor::NTensor(int order, StateSpace space, double fill, std::size_t cap)
    : order_(order), space_(space) {
  if (space.sites < 1) throw DimensionMismatch("state space needs at least one site");
  values_.assign(tensor_size(space.sites, order, cap), fill);
  symmetric_ = true;
}

NTensor::NTensor(int order, StateSpace space, std::vector<double> values, std::size_t cap)
    : order_(order), space_(space), values_(std::move(values)) {
  if (values_.size() != tensor_size(space.sites, order, cap)) {
    throw DimensionMismatch("value count does not match sites^order");
  }
}

std::size_t NTensor::index(std::span<const int> s) const {
  if (static_cast<int>(s.size()) != order_) throw IndexRange("multi-index length");
  std::size_t idx = 0;
  for (int v : s) {
    if (v < 0 || v >= space_.sites) throw IndexRange("site index");
    idx = idx * static_cast<std::size_t>(space_.sites) + v;
  }
  return idx;
}

void NTensor::unravel(std::size_t linear, std::span<int> s) const noexcept {
  for (int slot = order_ - 1; slot >= 0; --slot) {
    s[slot] = static_cast<int>(linear % space_.sites);
    linear /= space_.sites;
  }
}

double NTensor::transposition_residual(int a, int b) const {
  if (a < 0 || b < 0 || a >= order_ || b >= order_) throw IndexRange("transposition slot");
  std::vector<int> digits(order_);
  double worst = 0.0;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    unravel(i, digits);
    std::swap(digits[a], digits[b]);
    worst = std::max(worst, std::abs(values_[i] - values_[index(digits)]));
  }
  return worst;
}

double NTensor::sup_norm() const noexcept {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

Weight::Weight(std::vector<double> values, double cell_volume)
    : values_(std::move(values)), cell_volume_(cell_volume) {
  if (values_.size() < 2) throw DimensionMismatch("weight needs at least two sites");
  CompensatedSum mass;
  for (double v : values_) {
    if (!(v > 0.0)) throw UnnormalizedDensity("weight must be strictly positive");
    mass += v * cell_volume_;
  }
  if (std::abs(mass.value() - 1.0) > kNormalizationTolerance) {
    throw UnnormalizedDensity("weight mass " + std::to_string(mass.value()));
  }
}

std::vector<double> site_masses(const Weight& f) {
  std::vector<double> m(f.sites());
  for (int i = 0; i < f.sites(); ++i) m[i] = f.mass(i);
  return m;
}

NTensor contract_slot(const NTensor& g, int slot, std::span<const double> masses) {
  const int n = g.order();
  if (slot < 0 || slot >= n) throw IndexRange("contract_slot slot");
  const int M = g.sites();
  if (static_cast<int>(masses.size()) != M) throw DimensionMismatch("mass vector length");
  const std::size_t A = ipow(M, slot);
  const std::size_t B = ipow(M, n - 1 - slot);
  NTensor out(n - 1, g.space());
  out.set_symmetric(g.symmetric());
  auto in = g.values();
  auto res = out.values();
#pragma omp parallel for schedule(static) if (A * B * M > 65536)
  for (std::ptrdiff_t a = 0; a < static_cast<std::ptrdiff_t>(A); ++a) {
    std::vector<CompensatedSum> acc(B);
    for (int m = 0; m < M; ++m) {
      const double w = masses[m];
      const double* row = in.data() + (static_cast<std::size_t>(a) * M + m) * B;
      for (std::size_t b = 0; b < B; ++b) acc[b].add(row[b] * w);
    }
    for (std::size_t b = 0; b < B; ++b) res[a * B + b] = acc[b].value();
  }
  return out;
}

NTensor broadcast_slot(const NTensor& g, int slot) {
  const int n = g.order() + 1;
  if (slot < 0 || slot >= n) throw IndexRange("broadcast_slot slot");
  const int M = g.sites();
  const std::size_t A = ipow(M, slot);
  const std::size_t B = ipow(M, n - 1 - slot);
  NTensor out(n, g.space());
  out.set_symmetric(false);
  auto in = g.values();
  auto res = out.values();
  for (std::size_t a = 0; a < A; ++a) {
    for (int m = 0; m < M; ++m) {
      double* dst = res.data() + (a * M + m) * B;
      const double* src = in.data() + a * B;
      for (std::size_t b = 0; b < B; ++b) dst[b] = src[b];
    }
  }
  return out;
}

NTensor outer(const NTensor& a, const NTensor& b) {
  if (a.space() != b.space()) throw DimensionMismatch("outer product spaces differ");
  NTensor out(a.order() + b.order(), a.space());
  out.set_symmetric(false);
  auto res = out.values();
  const std::size_t nb = b.size();
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < nb; ++j) res[i * nb + j] = a[i] * b[j];
  }
  return out;
}

NTensor axpy(const NTensor& a, double scale, const NTensor& b) {
  if (a.order() != b.order() || a.space() != b.space()) throw DimensionMismatch("axpy shapes");
  NTensor out = a;
  auto res = out.values();
  for (std::size_t i = 0; i < res.size(); ++i) res[i] += scale * b[i];
  out.set_symmetric(a.symmetric() && b.symmetric());
  return out;
}

NTensor weighted_marginal(const NTensor& phi, const Weight& f, int n) {
  require_same_space(phi, f);
  if (n < 0 || n > phi.order()) throw IndexRange("marginal order");
  const auto masses = site_masses(f);
  NTensor g = phi;
  while (g.order() > n) g = contract_slot(g, g.order() - 1, masses);
  g.set_symmetric(phi.symmetric());
  return g;
}

NTensor plain_marginal(const NTensor& F, int k) {
  if (k < 0 || k > F.order()) throw IndexRange("marginal order");
  const std::vector<double> masses(F.sites(), F.space().cell_volume);
  NTensor g = F;
  while (g.order() > k) g = contract_slot(g, g.order() - 1, masses);
  g.set_symmetric(F.symmetric());
  return g;
}

NTensor project_pi(const NTensor& g, int slot, const Weight& f) {
  require_same_space(g, f);
  return broadcast_slot(contract_slot(g, slot, site_masses(f)), slot);
}

NTensor project_out(const NTensor& g, const Weight& f) {
  require_same_space(g, f);
  const auto masses = site_masses(f);
  NTensor h = g;
  for (int j = 0; j < g.order(); ++j) {
    h = axpy(h, -1.0, broadcast_slot(contract_slot(h, j, masses), j));
  }
  h.set_symmetric(g.symmetric());
  return h;
}

std::vector<NTensor> marginal_ladder(const NTensor& phi, const Weight& f, int nmax) {
  require_same_space(phi, f);
  if (nmax < 0 || nmax > phi.order()) throw IndexRange("nmax");
  const auto masses = site_masses(f);
  std::vector<NTensor> out;
  out.reserve(nmax + 1);
  NTensor g = phi;
  while (g.order() > nmax) g = contract_slot(g, g.order() - 1, masses);
  std::vector<NTensor> desc;
  desc.push_back(g);
  while (desc.back().order() > 0) desc.push_back(contract_slot(desc.back(), desc.back().order() - 1, masses));
  for (auto it = desc.rbegin(); it != desc.rend(); ++it) {
    it->set_symmetric(phi.symmetric());
    out.push_back(std::move(*it));
  }
  return out;
}

CorrelationLadder correlations_from_projectors(const NTensor& phi, const Weight& f, int nmax) {
  CorrelationLadder ladder;
  ladder.particles = phi.order();
  for (const NTensor& m : marginal_ladder(phi, f, nmax)) {
    ladder.terms.push_back(project_out(m, f));
    ladder.norms.push_back(l2f_norm(ladder.terms.back(), f));
  }
  return ladder;
}

CorrelationLadder correlations_via_mobius(std::span<const NTensor> marginals, const Weight& f,
                                          int particles) {
  CorrelationLadder ladder;
  ladder.particles = particles;
  const int M = f.sites();
  for (int n = 0; n < static_cast<int>(marginals.size()); ++n) {
    if (marginals[n].order() != n) throw IndexRange("marginal ladder must be ordered by n");
    require_same_space(marginals[n], f);
    const auto maps = all_subsets(n);
    NTensor c(n, marginals[n].space());
    std::vector<int> digits(n);
    for (std::size_t i = 0; i < c.size(); ++i) {
      c.unravel(i, digits);
      CompensatedSum s;
      for (const SubsetMap& map : maps) {
        const double sign = ((n - map.k) % 2 == 0) ? 1.0 : -1.0;
        s.add(sign * marginals[map.k][subset_index(map, digits, M)]);
      }
      c[i] = s.value();
    }
    c.set_symmetric(marginals[n].symmetric());
    ladder.norms.push_back(l2f_norm(c, f));
    ladder.terms.push_back(std::move(c));
  }
  return ladder;
}

NTensor cluster_reconstruct(const CorrelationLadder& ladder, int n) {
  if (n < 0 || n >= static_cast<int>(ladder.terms.size())) throw IndexRange("ladder too short");
  const StateSpace space = ladder.terms[0].space();
  const int M = space.sites;
  const auto maps = all_subsets(n);
  NTensor m(n, space);
  std::vector<int> digits(n);
  for (std::size_t i = 0; i < m.size(); ++i) {
    m.unravel(i, digits);
    CompensatedSum s;
    for (const SubsetMap& map : maps) s.add(ladder.terms[map.k][subset_index(map, digits, M)]);
    m[i] = s.value();
  }
  m.set_symmetric(ladder.terms[n].symmetric());
  return m;
}

double l2f_norm(const NTensor& g, const Weight& f) {
  require_same_space(g, f);
  NTensor sq = g;
  for (double& v : sq.values()) v *= v;
  const auto masses = site_masses(f);
  while (sq.order() > 0) sq = contract_slot(sq, sq.order() - 1, masses);
  return std::sqrt(sq[0]);
}

double linf_l2f_norm(const NTensor& g, const Weight& f, int k) {
  require_same_space(g, f);
  if (k < 0 || k > g.order()) throw IndexRange("linf_l2f_norm slot count");
  NTensor sq = g;
  for (double& v : sq.values()) v *= v;
  const auto masses = site_masses(f);
  while (sq.order() > k) sq = contract_slot(sq, sq.order() - 1, masses);
  return std::sqrt(sq.sup_norm());
}

double orthogonality_residual(const NTensor& g, const Weight& f) {
  require_same_space(g, f);
  const auto masses = site_masses(f);
  double worst = 0.0;
  for (int j = 0; j < g.order(); ++j) worst = std::max(worst, contract_slot(g, j, masses).sup_norm());
  return worst;
}

NTensor build_final_data(std::span<const double> psi, StateSpace space, int particles, int k,
                         std::size_t cap) {
  if (static_cast<int>(psi.size()) != space.sites) throw DimensionMismatch("psi length");
  if (k < 0 || k > particles) throw IndexRange("k must satisfy 0 <= k <= N");
  NTensor phi(particles, space, 0.0, cap);
  const double norm = 1.0 / binom(particles, k);
  std::vector<int> digits(particles);
  std::vector<double> e(k + 1);
  for (std::size_t i = 0; i < phi.size(); ++i) {
    phi.unravel(i, digits);
    // Elementary symmetric polynomial e_k of psi(z_1), ..., psi(z_N).
    std::fill(e.begin(), e.end(), 0.0);
    e[0] = 1.0;
    for (int p = 0; p < particles; ++p) {
      const double x = psi[digits[p]];
      for (int j = std::min(p + 1, k); j >= 1; --j) e[j] += e[j - 1] * x;
    }
    phi[i] = e[k] * norm;
  }
  phi.set_symmetric(true);
  return phi;
}

NTensor final_correlations_closed_form(std::span<const double> psi, const Weight& f,
                                       int particles, int k, int n) {
  if (static_cast<int>(psi.size()) != f.sites()) throw DimensionMismatch("psi length");
  if (n < 0 || n > particles) throw IndexRange("n must satisfy 0 <= n <= N");
  NTensor c(n, f.space(), 0.0);
  c.set_symmetric(true);
  if (n > k) return c;
  CompensatedSum mean;
  for (int i = 0; i < f.sites(); ++i) mean.add(psi[i] * f.mass(i));
  const double a = mean.value();
  const double coef = binom(k, n) / binom(particles, n);
  const auto maps = all_subsets(n);
  std::vector<int> digits(n);
  for (std::size_t i = 0; i < c.size(); ++i) {
    c.unravel(i, digits);
    CompensatedSum s;
    for (const SubsetMap& map : maps) {
      const int l = map.k;
      double term = ((n + l) % 2 == 0 ? 1.0 : -1.0) * std::pow(a, k - l);
      for (int slot : map.slots) term *= psi[digits[slot]];
      s.add(term);
    }
    c[i] = coef * s.value();
  }
  return c;
}

CorrelationLadder rescale(const CorrelationLadder& ladder) {
  CorrelationLadder out = ladder;
  for (std::size_t n = 0; n < out.terms.size(); ++n) {
    const double s = std::sqrt(binom(ladder.particles, static_cast<int>(n)));
    for (double& v : out.terms[n].values()) v *= s;
    if (n < out.norms.size()) out.norms[n] *= s;
  }
  return out;
}

double weighted_square_norm(const NTensor& phi, const Weight& f) {
  const double n = l2f_norm(phi, f);
  return n * n;
}

}  // namespace mfchaos
