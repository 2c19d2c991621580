#include "mfchaos/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mfchaos/errors.hpp"

namespace mfchaos {

namespace {

std::size_t ipow(std::size_t base, int e) {
  std::size_t out = 1;
  for (int i = 0; i < e; ++i) out *= base;
  return out;
}

// Flat index of the digits of d (length n) with positions skip_a, skip_b
// removed (-1 for none), slot 0 slowest.
std::size_t index_without(const std::vector<int>& d, int skip_a, int skip_b, std::size_t m) {
  std::size_t idx = 0;
  for (int s = 0; s < static_cast<int>(d.size()); ++s) {
    if (s == skip_a || s == skip_b) continue;
    idx = idx * m + static_cast<std::size_t>(d[s]);
  }
  return idx;
}

void unravel(std::size_t linear, std::size_t m, std::vector<int>& d) {
  for (int s = static_cast<int>(d.size()) - 1; s >= 0; --s) {
    d[s] = static_cast<int>(linear % m);
    linear /= m;
  }
}

void require_order(const NTensor& c, int min_order, const char* what) {
  if (c.order() < min_order) throw IndexRange(what);
}

}  // namespace

HierarchyOperators::HierarchyOperators(int particles, const DensityField& f,
                                       const KernelSpec& kernel, double alpha, std::size_t cap)
    : particles_(particles),
      grid_(f.grid()),
      alpha_(alpha),
      cap_(cap),
      vf_(compute_Vf(f, kernel)),
      weight_(vf_.weight_object()),
      masses_(site_masses(weight_)) {
  if (particles < 2) throw ConfigError("hierarchy needs N >= 2");
  if (!(alpha >= 0.0)) throw ConfigError("alpha must be nonnegative");
  const int m = static_cast<int>(grid_.size());
  if (!checked_pow(static_cast<std::size_t>(m), 2, cap)) throw MemoryCap("V_f does not fit the cap");
  vmat_.resize(static_cast<std::size_t>(m) * m);
  for (int a = 0; a < m; ++a) {
    for (int b = 0; b < m; ++b) vmat_[static_cast<std::size_t>(a) * m + b] = vf_(a, b);
  }
  const bool kinetic = grid_.has_velocity();
  mean_force_.resize(m);
  velocity_.resize(m);
  spatial_.resize(m);
  for (int s = 0; s < m; ++s) {
    spatial_[s] = grid_.spatial_index(s);
    for (int a = 0; a < grid_.dim; ++a) {
      mean_force_[s][a] = vf_.force()[a][spatial_[s]];
      if (kinetic) velocity_[s][a] = grid_.v_center(grid_.v_coord(s, a));
    }
  }
  const auto fill = [&](Neighbours& nb, bool along_v) {
    nb.h = along_v ? grid_.dv() : grid_.dx();
    nb.up.assign(grid_.dim, std::vector<int>(m));
    nb.down.assign(grid_.dim, std::vector<int>(m));
    for (int a = 0; a < grid_.dim; ++a) {
      for (int s = 0; s < m; ++s) {
        nb.up[a][s] = static_cast<int>(along_v ? grid_.shift_v(s, a, 1) : grid_.shift_x(s, a, 1));
        nb.down[a][s] = static_cast<int>(along_v ? grid_.shift_v(s, a, -1) : grid_.shift_x(s, a, -1));
      }
    }
  };
  fill(drift_, kinetic);
  if (kinetic) fill(transport_, false);
}

NTensor HierarchyOperators::blank(int order) const {
  return NTensor(order, weight_.space(), 0.0, cap_);
}

Vec HierarchyOperators::pair_force(int target, int source) const {
  const std::size_t off = grid_.spatial_offset(spatial_[target], spatial_[source]);
  Vec k{};
  for (int a = 0; a < grid_.dim; ++a) k[a] = vf_.kernel_samples()[a][off];
  return k;
}

double HierarchyOperators::upwind(const Neighbours& nb, const NTensor& g, std::size_t index,
                                  std::size_t stride, int site, const Vec& b) const {
  const double g0 = g[index];
  const std::size_t base = index - static_cast<std::size_t>(site) * stride;
  double out = 0.0;
  for (int a = 0; a < grid_.dim; ++a) {
    if (b[a] > 0.0) {
      out += b[a] * (g[base + static_cast<std::size_t>(nb.up[a][site]) * stride] - g0);
    } else if (b[a] < 0.0) {
      out -= b[a] * (g[base + static_cast<std::size_t>(nb.down[a][site]) * stride] - g0);
    }
  }
  return out / nb.h;
}

double HierarchyOperators::laplacian(const NTensor& g, std::size_t index, std::size_t stride,
                                     int site) const {
  const double g0 = g[index];
  const std::size_t base = index - static_cast<std::size_t>(site) * stride;
  double out = 0.0;
  for (int a = 0; a < grid_.dim; ++a) {
    out += g[base + static_cast<std::size_t>(drift_.up[a][site]) * stride] +
           g[base + static_cast<std::size_t>(drift_.down[a][site]) * stride] - 2.0 * g0;
  }
  return out / (drift_.h * drift_.h);
}

// A(y, b) = sum_a c(y, a) V(a, b) f(a) da: the last slot of c is traded for
// the second argument of V.
NTensor HierarchyOperators::trade_last(const NTensor& c) const {
  const std::size_t m = masses_.size();
  NTensor out = blank(c.order());
  const std::size_t blocks = c.size() / m;
  std::vector<double> row(m);
  for (std::size_t y = 0; y < blocks; ++y) {
    for (std::size_t a = 0; a < m; ++a) row[a] = c[y * m + a] * masses_[a];
    for (std::size_t b = 0; b < m; ++b) {
      CompensatedSum acc;
      for (std::size_t a = 0; a < m; ++a) acc.add(row[a] * vmat_[a * m + b]);
      out[y * m + b] = acc.value();
    }
  }
  return out;
}

NTensor HierarchyOperators::pair_contraction(const NTensor& c) const {
  require_order(c, 2, "pair contraction needs order >= 2");
  const std::size_t m = masses_.size();
  NTensor out = blank(c.order() - 2);
  for (std::size_t y = 0; y < out.size(); ++y) {
    CompensatedSum acc;
    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t b = 0; b < m; ++b) {
        acc.add(vmat_[a * m + b] * c[(y * m + a) * m + b] * masses_[a] * masses_[b]);
      }
    }
    out[y] = acc.value();
  }
  return out;
}

NTensor HierarchyOperators::exchange(const NTensor& c) const {
  const int n = c.order();
  NTensor out = blank(n);
  if (n == 0) return out;
  const std::size_t m = masses_.size();
  const NTensor traded = trade_last(c);
  std::vector<int> d(n);
  for (std::size_t z = 0; z < out.size(); ++z) {
    unravel(z, m, d);
    double acc = 0.0;
    for (int j = 0; j < n; ++j) acc += traded[index_without(d, j, -1, m) * m + d[j]];
    out[z] = acc;
  }
  return out;
}

NTensor HierarchyOperators::mean_field_drift(const NTensor& c) const {
  const int n = c.order();
  NTensor out = blank(n);
  const std::size_t m = masses_.size();
  std::vector<int> d(n);
  for (std::size_t z = 0; z < out.size(); ++z) {
    unravel(z, m, d);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      acc += upwind(drift_, c, z, ipow(m, n - 1 - i), d[i], mean_force_[d[i]]);
    }
    out[z] = acc;
  }
  return out;
}

NTensor HierarchyOperators::free_part(const NTensor& c) const {
  const int n = c.order();
  NTensor out = blank(n);
  const std::size_t m = masses_.size();
  const bool kinetic = grid_.has_velocity();
  std::vector<int> d(n);
  for (std::size_t z = 0; z < out.size(); ++z) {
    unravel(z, m, d);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      const std::size_t stride = ipow(m, n - 1 - i);
      if (kinetic) acc += upwind(transport_, c, z, stride, d[i], velocity_[d[i]]);
      acc += alpha_ * laplacian(c, z, stride, d[i]);
    }
    out[z] = acc;
  }
  return out;
}

NTensor HierarchyOperators::Terms::total() const {
  NTensor out = summands.front();
  for (std::size_t i = 1; i < summands.size(); ++i) out = axpy(out, 1.0, summands[i]);
  return out;
}

NTensor HierarchyOperators::Terms::kept() const {
  NTensor out(summands.front().order(), summands.front().space());
  for (std::size_t i = 0; i < summands.size(); ++i) {
    if (reduced[i]) out = axpy(out, 1.0, summands[i]);
  }
  return out;
}

NTensor HierarchyOperators::Terms::orthogonal() const {
  NTensor out(summands.front().order(), summands.front().space());
  for (std::size_t i = 0; i < summands.size(); ++i) {
    if (!reduced[i]) out = axpy(out, 1.0, summands[i]);
  }
  return out;
}

HierarchyOperators::Terms HierarchyOperators::plus(const NTensor& c) const {
  const int n = c.order() + 1;
  Terms t{{blank(n), blank(n), blank(n)}, {false, false, true}};
  if (n < 2) return t;
  const std::size_t m = masses_.size();
  const NTensor traded = trade_last(c);
  std::vector<int> d(n);
  for (std::size_t z = 0; z < t.summands[0].size(); ++z) {
    unravel(z, m, d);
    double s1 = 0.0, s2 = 0.0, s3 = 0.0;
    for (int j = 0; j < n; ++j) {
      // c(z_{[n]\j}) with z_i at position pos(i)
      const std::size_t sub = index_without(d, j, -1, m);
      for (int i = 0; i < n; ++i) {
        if (i == j) continue;
        const int pos = i - (i > j ? 1 : 0);
        const std::size_t stride = ipow(m, n - 2 - pos);
        s1 += upwind(drift_, c, sub, stride, d[i], mean_force_[d[i]]);
        s2 -= traded[index_without(d, i, j, m) * m + d[j]];
        s3 -= upwind(drift_, c, sub, stride, d[i], pair_force(d[i], d[j]));
      }
    }
    t.summands[0][z] = s1;
    t.summands[1][z] = s2;
    t.summands[2][z] = s3;
  }
  return t;
}

HierarchyOperators::Terms HierarchyOperators::circ(const NTensor& c) const {
  const int n = c.order();
  const int N = particles_;
  Terms t{{blank(n), blank(n), blank(n), blank(n), blank(n), blank(n)},
          {true, true, true, false, false, false}};
  if (n == 0) return t;
  const std::size_t m = masses_.size();
  const double q = 1.0 / (N - 1);
  const double r = static_cast<double>(N - n) / (N - 1);
  const NTensor traded = trade_last(c);
  const NTensor pairs = n >= 2 ? pair_contraction(c) : blank(0);
  std::vector<int> d(n);
  std::vector<double> vsum(m);
  for (std::size_t z = 0; z < t.summands[0].size(); ++z) {
    unravel(z, m, d);
    double s[6] = {};
    for (int i = 0; i < n; ++i) {
      const std::size_t stride = ipow(m, n - 1 - i);
      s[0] -= r * upwind(drift_, c, z, stride, d[i], mean_force_[d[i]]);
      s[1] += r * traded[index_without(d, i, -1, m) * m + d[i]];
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        s[2] -= q * upwind(drift_, c, z, stride, d[i], pair_force(d[i], d[j]));
        s[5] += q * pairs[index_without(d, i, j, m)];
      }
    }
    if (n >= 2) {
      for (int j = 0; j < n; ++j) {
        // c(z_{[n]\j}, a): z_i at position pos(i), a in the last slot.
        const std::size_t sub = index_without(d, j, -1, m) * m;
        for (int i = 0; i < n; ++i) {
          if (i == j) continue;
          const int pos = i - (i > j ? 1 : 0);
          const std::size_t stride = ipow(m, n - 1 - pos);
          CompensatedSum acc;
          for (std::size_t a = 0; a < m; ++a) {
            acc.add(masses_[a] *
                    upwind(drift_, c, sub + a, stride, d[i], pair_force(d[i], static_cast<int>(a))));
          }
          s[3] += q * acc.value();
        }
      }
      for (int i = 0; i < n; ++i) {
        // sum_{j != i} V(a, z_j) against c(z_{[n]\i}, a)
        for (std::size_t a = 0; a < m; ++a) {
          double v = 0.0;
          for (int j = 0; j < n; ++j) {
            if (j != i) v += vmat_[a * m + d[j]];
          }
          vsum[a] = v;
        }
        const std::size_t sub = index_without(d, i, -1, m) * m;
        CompensatedSum acc;
        for (std::size_t a = 0; a < m; ++a) acc.add(c[sub + a] * masses_[a] * vsum[a]);
        s[4] -= q * acc.value();
      }
    }
    for (int k = 0; k < 6; ++k) t.summands[k][z] = s[k];
  }
  return t;
}

HierarchyOperators::Terms HierarchyOperators::minus(const NTensor& c) const {
  require_order(c, 1, "S- needs order >= 1");
  const int n = c.order() - 1;
  Terms t{{blank(n), blank(n), blank(n)}, {true, true, false}};
  if (n == 0) return t;
  const std::size_t m = masses_.size();
  const double r = static_cast<double>(particles_ - n) / (particles_ - 1);
  const NTensor pairs = pair_contraction(c);
  std::vector<int> d(n);
  for (std::size_t z = 0; z < t.summands[0].size(); ++z) {
    unravel(z, m, d);
    const std::size_t row = z * m;  // c(z, a) at row + a
    double s1 = 0.0, s2 = 0.0, s3 = 0.0;
    for (int j = 0; j < n; ++j) {
      CompensatedSum acc;
      for (std::size_t a = 0; a < m; ++a) acc.add(vmat_[a * m + d[j]] * c[row + a] * masses_[a]);
      s1 += r * acc.value();
    }
    for (int i = 0; i < n; ++i) {
      const std::size_t stride = ipow(m, n - i);
      CompensatedSum acc;
      for (std::size_t a = 0; a < m; ++a) {
        acc.add(masses_[a] *
                upwind(drift_, c, row + a, stride, d[i], pair_force(d[i], static_cast<int>(a))));
      }
      s2 -= r * acc.value();
      s3 -= 2.0 * r * pairs[index_without(d, i, -1, m)];
    }
    t.summands[0][z] = s1;
    t.summands[1][z] = s2;
    t.summands[2][z] = s3;
  }
  return t;
}

NTensor HierarchyOperators::equal(const NTensor& c) const {
  const int n = c.order() - 2;
  const int N = particles_;
  NTensor out = pair_contraction(c);
  const double pref = static_cast<double>(N - n) * (N - n - 1) / (static_cast<double>(N) * (N - 1));
  for (double& v : out.values()) v *= pref;
  return out;
}

double rescaled_equal_prefactor(int particles, int n) {
  const int N = particles;
  if (n < 0 || n + 2 > N) throw IndexRange("need 0 <= n <= N - 2");
  const double pref = static_cast<double>(N - n) * (N - n - 1) / (N - 1);
  return pref * std::sqrt(binom(N, n) / binom(N, n + 2));
}

double ResidualReport::interior_max(int n, double ResidualRow::*field) const {
  double worst = 0.0;
  bool any = false;
  for (const ResidualRow& row : rows) {
    if (row.n != n || !row.interior) continue;
    worst = std::max(worst, row.*field);
    any = true;
  }
  if (!any) throw EmptyWindow("no interior rows of this order");
  return worst;
}

namespace {

void check_series(const OracleRun& run, const LadderSeries& series, int nmax) {
  if (series.times.size() < 3) throw EmptyWindow("need at least three snapshots");
  if (series.particles != run.particles || series.times.size() != run.snapshots()) {
    throw DimensionMismatch("series does not come from this run");
  }
  if (nmax < 0 || nmax > run.particles) throw IndexRange("nmax must satisfy 0 <= nmax <= N");
  const int need = std::min(run.particles, nmax + 2);
  for (const CorrelationLadder& l : series.ladders) {
    if (static_cast<int>(l.terms.size()) < need + 1) {
      throw IndexRange("series must carry orders up to min(N, nmax + 2)");
    }
  }
}

// Ladder orders 0..min(N, nmax + 2) at every snapshot, optionally rescaled.
// Orders above N vanish and are skipped by the callers.
std::vector<std::vector<NTensor>> ladder_terms(const LadderSeries& series, int nmax, bool rescaled) {
  std::vector<std::vector<NTensor>> out;
  const int N = series.particles;
  const int top = std::min(N, nmax + 2);
  for (const CorrelationLadder& l : series.ladders) {
    std::vector<NTensor> row;
    for (int n = 0; n <= top; ++n) {
      NTensor t = l.terms[n];
      if (rescaled) {
        const double s = std::sqrt(binom(N, n));
        for (double& v : t.values()) v *= s;
      }
      row.push_back(std::move(t));
    }
    out.push_back(std::move(row));
  }
  return out;
}

NTensor derivative_at(const LadderSeries& series, const std::vector<std::vector<NTensor>>& terms,
                      int n, std::size_t m) {
  const std::size_t last = series.times.size() - 1;
  const std::size_t lo = m == 0 ? 0 : m - 1;
  const std::size_t hi = m == last ? last : m + 1;
  NTensor d = axpy(terms[hi][n], -1.0, terms[lo][n]);
  const double dt = series.times[hi] - series.times[lo];
  for (double& v : d.values()) v /= dt;
  return d;
}

}  // namespace

ResidualReport bbgky_residual(const OracleRun& run, const LadderSeries& series, int nmax) {
  check_series(run, series, nmax);
  const int N = run.particles;
  const double q = 1.0 / (N - 1);
  const auto terms = ladder_terms(series, nmax, false);
  ResidualReport report;
  report.particles = N;
  const std::size_t last = series.times.size() - 1;
  for (std::size_t m = 0; m <= last; ++m) {
    const HierarchyOperators ops(N, run.density(m), run.kernel, run.alpha);
    const Weight& w = series.weights[m];
    for (int n = 0; n <= nmax; ++n) {
      const std::vector<NTensor>& c = terms[m];
      NTensor full = axpy(derivative_at(series, terms, n, m), 1.0, ops.free_part(c[n]));
      NTensor orth(n, c[n].space());
      const auto subtract = [&](const HierarchyOperators::Terms& t, double scale) {
        full = axpy(full, -scale, t.total());
        orth = axpy(orth, scale, t.orthogonal());
      };
      if (n >= 1) subtract(ops.plus(c[n - 1]), q);
      subtract(ops.circ(c[n]), 1.0);
      if (n + 1 <= N) subtract(ops.minus(c[n + 1]), 1.0);
      if (n + 2 <= N) full = axpy(full, -static_cast<double>(N), ops.equal(c[n + 2]));
      const NTensor reduced = axpy(full, 1.0, orth);

      ResidualRow row;
      row.t = series.times[m];
      row.n = n;
      row.interior = m > 0 && m < last;
      row.residual = l2f_norm(full, w);
      row.projected = l2f_norm(project_out(full, w), w);
      row.reduced = l2f_norm(reduced, w);
      row.reduced_projected = l2f_norm(project_out(reduced, w), w);
      report.rows.push_back(row);
    }
  }
  return report;
}

ResidualReport limit_hierarchy_residual(const OracleRun& run, const LadderSeries& series, int nmax) {
  check_series(run, series, nmax);
  const int N = run.particles;
  const auto terms = ladder_terms(series, nmax, true);
  ResidualReport report;
  report.particles = N;
  const std::size_t last = series.times.size() - 1;
  for (std::size_t m = 0; m <= last; ++m) {
    const HierarchyOperators ops(N, run.density(m), run.kernel, run.alpha);
    const Weight& w = series.weights[m];
    for (int n = 0; n <= nmax; ++n) {
      const std::vector<NTensor>& c = terms[m];
      NTensor r = axpy(derivative_at(series, terms, n, m), 1.0, ops.free_part(c[n]));
      r = axpy(r, 1.0, ops.mean_field_drift(c[n]));
      r = axpy(r, -1.0, ops.exchange(c[n]));
      if (n + 2 <= N) {
        r = axpy(r, -std::sqrt((n + 1.0) * (n + 2.0)), ops.pair_contraction(c[n + 2]));
      }
      ResidualRow row;
      row.t = series.times[m];
      row.n = n;
      row.interior = m > 0 && m < last;
      row.residual = l2f_norm(r, w);
      row.projected = l2f_norm(project_out(r, w), w);
      report.rows.push_back(row);
    }
  }
  return report;
}

GeneratingFunction generating_function(const LadderSeries& series, std::span<const double> radii,
                                       double psi_sup, int k) {
  if (series.ladders.empty()) throw EmptyWindow("no snapshots");
  for (double r : radii) {
    if (!(r > 0.0 && r < 1.0)) throw ConfigError("generating-function radius must lie in (0,1)");
  }
  const int N = series.particles;
  GeneratingFunction g;
  g.times = series.times;
  g.radii.assign(radii.begin(), radii.end());
  const int nmax = static_cast<int>(series.ladders.front().norms.size()) - 1;
  for (const CorrelationLadder& l : series.ladders) {
    std::vector<double> row;
    for (double r : radii) {
      double z = 0.0, rn = 1.0;
      for (int n = 0; n <= nmax; ++n, rn *= r) z += rn * std::sqrt(binom(N, n)) * l.norms[n];
      row.push_back(z);
    }
    g.values.push_back(std::move(row));
  }
  for (double r : radii) {
    g.tail_bound.push_back(nmax >= N ? 0.0 : std::pow(psi_sup, k) * std::pow(r, nmax + 1) / (1.0 - r));
  }
  return g;
}

double cauchy_schwarz_gap(const LadderSeries& series) {
  const std::vector<double> radii{0.5, 1.0 / 3.0, 0.75};
  const GeneratingFunction g = generating_function(series, radii, 1.0, 1);
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& z : g.values) worst = std::max(worst, z[0] - std::sqrt(z[1] * z[2]));
  return worst;
}

UniquenessWindows uniqueness_windows(std::span<const double> times, std::span<const double> lambda,
                                     double budget) {
  if (times.size() < 2 || times.size() != lambda.size()) {
    throw DimensionMismatch("need matching time and Lambda samples");
  }
  if (!(budget > 0.0)) throw ConfigError("window budget must be positive");
  for (std::size_t i = 0; i < lambda.size(); ++i) {
    if (!std::isfinite(lambda[i])) throw EmptyWindow("Lambda_f is not finite");
    if (lambda[i] < 0.0) throw ConfigError("Lambda_f must be nonnegative");
    if (i > 0 && !(times[i] > times[i - 1])) throw ConfigError("times must increase");
  }
  constexpr std::size_t kMaxWindows = 1'000'000;
  UniquenessWindows out;
  std::vector<std::pair<double, double>> rev;
  double p = times.back(), end = p, rem = budget;
  std::size_t seg = times.size() - 1;  // p lies in (times[seg-1], times[seg]]
  bool first = true;
  while (seg > 0) {
    const double t0 = times[seg - 1], t1 = times[seg];
    const double g = (lambda[seg] - lambda[seg - 1]) / (t1 - t0);
    const double lp = lambda[seg] - g * (t1 - p);
    const double full = (p - t0) * (lambda[seg - 1] + lp) / 2.0;
    if (full <= rem) {
      rem -= full;
      p = t0;
      --seg;
      continue;
    }
    const double disc = std::max(0.0, lp * lp - 2.0 * g * rem);
    const double u = 2.0 * rem / (lp + std::sqrt(disc));
    const double s = std::max(t0, p - u);
    rev.emplace_back(s, end);
    if (first) {
      out.t0 = s;
      first = false;
    }
    if (rev.size() > kMaxWindows || !(s < end)) throw EmptyWindow("Lambda_f too large to resolve");
    end = p = s;
    rem = budget;
  }
  if (end > times.front() || rev.empty()) rev.emplace_back(times.front(), end);
  if (first) out.t0 = times.front();
  out.windows.assign(rev.rbegin(), rev.rend());
  return out;
}

RateProfile rate_fit_quantitative(std::span<const int> particles, std::span<const double> times,
                                  const std::vector<std::vector<double>>& errors) {
  if (particles.size() < 2) throw ConfigError("rate fit needs at least two particle numbers");
  if (errors.size() != times.size()) throw DimensionMismatch("one error row per time");
  std::vector<double> x;
  for (int N : particles) x.push_back(std::log(static_cast<double>(N)));
  RateProfile prof;
  prof.times.assign(times.begin(), times.end());
  for (const auto& row : errors) {
    if (row.size() != particles.size()) throw DimensionMismatch("one error per particle number");
    std::vector<double> y;
    for (double e : row) {
      if (!(e > 0.0)) throw ConfigError("errors must be positive for a log fit");
      y.push_back(std::log(e));
    }
    const LineFit fit = fit_line(x, y);
    prof.slopes.push_back(fit.slope);
    prof.slope_stderr.push_back(fit.slope_stderr);
  }
  for (std::size_t m = 1; m < prof.slopes.size(); ++m) {
    const double tol = 2.0 * std::hypot(prof.slope_stderr[m], prof.slope_stderr[m - 1]) +
                       1e-12 * std::max(1.0, std::abs(prof.slopes[m - 1]));
    if (std::abs(prof.slopes[m]) > std::abs(prof.slopes[m - 1]) + tol) {
      prof.magnitude_nonincreasing = false;
    }
  }
  return prof;
}

}  // namespace mfchaos
