#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mfchaos {

// Finite one-body state space: `sites` points, each carrying quadrature
// weight `cell_volume`.
struct StateSpace {
  int sites = 2;
  double cell_volume = 0.5;

  friend bool operator==(const StateSpace&, const StateSpace&) = default;
};

inline constexpr std::size_t kDefaultTensorCap = std::size_t{1} << 24;

// Real function on the n-fold product of a StateSpace, stored densely in
// row-major order with slot 0 varying slowest.
class NTensor {
 public:
  NTensor(int order, StateSpace space, double fill = 0.0, std::size_t cap = kDefaultTensorCap);
  NTensor(int order, StateSpace space, std::vector<double> values,
          std::size_t cap = kDefaultTensorCap);

  [[nodiscard]] int order() const noexcept { return order_; }
  [[nodiscard]] const StateSpace& space() const noexcept { return space_; }
  [[nodiscard]] int sites() const noexcept { return space_.sites; }
  [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }
  [[nodiscard]] bool symmetric() const noexcept { return symmetric_; }
  void set_symmetric(bool s) noexcept { symmetric_ = s; }

  [[nodiscard]] std::span<double> values() noexcept { return values_; }
  [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
  double& operator[](std::size_t i) noexcept { return values_[i]; }
  double operator[](std::size_t i) const noexcept { return values_[i]; }

  [[nodiscard]] std::size_t index(std::span<const int> sites) const;
  void unravel(std::size_t linear, std::span<int> sites) const noexcept;
  [[nodiscard]] double at(std::span<const int> sites) const { return values_[index(sites)]; }

  // Max |g - g o tau| over the given slot transpositions.
  [[nodiscard]] double transposition_residual(int slot_a, int slot_b) const;
  [[nodiscard]] double sup_norm() const noexcept;

 private:
  int order_;
  StateSpace space_;
  std::vector<double> values_;
  bool symmetric_ = false;
};

// Strictly positive one-body density with sum f * cell_volume = 1.
class Weight {
 public:
  Weight(std::vector<double> values, double cell_volume);

  [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
  [[nodiscard]] double cell_volume() const noexcept { return cell_volume_; }
  [[nodiscard]] int sites() const noexcept { return static_cast<int>(values_.size()); }
  [[nodiscard]] StateSpace space() const noexcept { return {sites(), cell_volume_}; }
  // f(z) * cell_volume, the probability of each site.
  [[nodiscard]] double mass(int site) const noexcept { return values_[site] * cell_volume_; }

 private:
  std::vector<double> values_;
  double cell_volume_;
};

// sum_{z_slot} g(..., z_slot, ...) w(z_slot); result has order n - 1.
// `masses` are per-site quadrature masses (f(z) dz or dz alone).
NTensor contract_slot(const NTensor& g, int slot, std::span<const double> masses);
// Inserts a new slot at position `slot` on which the result is constant.
NTensor broadcast_slot(const NTensor& g, int slot);
// Tensor product a(z_A) b(z_B) with a's slots first.
NTensor outer(const NTensor& a, const NTensor& b);
// a + scale * b, slotwise identical layout.
NTensor axpy(const NTensor& a, double scale, const NTensor& b);

std::vector<double> site_masses(const Weight& f);

NTensor weighted_marginal(const NTensor& phi, const Weight& f, int n);
NTensor plain_marginal(const NTensor& F, int k);
NTensor project_pi(const NTensor& g, int slot, const Weight& f);
// (Id - Pi_1)...(Id - Pi_n) g
NTensor project_out(const NTensor& g, const Weight& f);

struct CorrelationLadder {
  int particles = 0;
  std::vector<NTensor> terms;  // terms[n] = C_{N,n}
  std::vector<double> norms;   // ||C_{N,n}||_{L^2_f}
};

// Marginals M_{N,0..nmax}, descending contraction from Phi.
std::vector<NTensor> marginal_ladder(const NTensor& phi, const Weight& f, int nmax);

CorrelationLadder correlations_from_projectors(const NTensor& phi, const Weight& f, int nmax);
// Moebius inversion on a marginal ladder M_0..M_nmax.
CorrelationLadder correlations_via_mobius(std::span<const NTensor> marginals, const Weight& f,
                                          int particles);
// Cluster expansion sum_k sum_{sigma in P_k^n} C_k(z_sigma).
NTensor cluster_reconstruct(const CorrelationLadder& ladder, int n);

double l2f_norm(const NTensor& g, const Weight& f);
// max over the first k slots of the L^2_f norm in the remaining slots.
double linf_l2f_norm(const NTensor& g, const Weight& f, int k);
// max_j max |Pi_j g| over all slots.
double orthogonality_residual(const NTensor& g, const Weight& f);

NTensor build_final_data(std::span<const double> psi, StateSpace space, int particles, int k,
                         std::size_t cap = kDefaultTensorCap);
NTensor final_correlations_closed_form(std::span<const double> psi, const Weight& f,
                                       int particles, int k, int n);

// binom(N, n)^{1/2} C_{N,n}
CorrelationLadder rescale(const CorrelationLadder& ladder);

// sum |Phi|^2 f^{N} dz^N
double weighted_square_norm(const NTensor& phi, const Weight& f);

}  // namespace mfchaos
