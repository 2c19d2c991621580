#include "mfchaos/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>

#include "mfchaos/errors.hpp"

namespace mfchaos {

namespace {

using nlohmann::json;

// One JSON object with a closed key set. Lookups translate json type errors
// into ConfigError naming the offending path.
class Section {
 public:
  Section(const json& j, std::string where, std::initializer_list<const char*> keys)
      : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + " must be an object");
    const std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& item : j_.items()) {
      if (!allowed.contains(item.key())) throw ConfigError("unknown key " + where_ + "." + item.key());
    }
  }

  [[nodiscard]] bool has(const char* key) const { return j_.contains(key); }

  [[nodiscard]] const json& raw(const char* key) const {
    if (!has(key)) throw ConfigError("missing key " + where_ + "." + key);
    return j_.at(key);
  }

  template <class T>
  [[nodiscard]] T get(const char* key) const {
    try {
      return raw(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }

  template <class T>
  [[nodiscard]] T get(const char* key, T fallback) const {
    return has(key) ? get<T>(key) : fallback;
  }

  [[nodiscard]] std::string path(const char* key) const { return where_ + "." + key; }

 private:
  const json& j_;
  std::string where_;
};

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

Domain parse_domain(const std::string& s) {
  if (s == "torus") return Domain::Torus;
  if (s == "whole_space") return Domain::WholeSpace;
  throw ConfigError("unknown domain " + s);
}

Stepping parse_stepping(const std::string& s) {
  if (s == "automatic") return Stepping::Automatic;
  if (s == "matrix_exponential") return Stepping::MatrixExponential;
  if (s == "rk4") return Stepping::Rk4;
  throw ConfigError("unknown stepping " + s);
}

Scheme parse_scheme(const std::string& s) {
  if (s == "automatic") return Scheme::Automatic;
  if (s == "euler_maruyama") return Scheme::EulerMaruyama;
  if (s == "splitting_verlet") return Scheme::SplittingVerlet;
  throw ConfigError("unknown scheme " + s);
}

double maxwellian(std::span<const double> v, double temperature) {
  double r2 = 0.0;
  for (double c : v) r2 += c * c;
  return std::exp(-0.5 * r2 / temperature);
}

}  // namespace

ExperimentKind parse_kind(const std::string& name) {
  if (name == "simulate") return ExperimentKind::Simulate;
  if (name == "meanfield") return ExperimentKind::Meanfield;
  if (name == "oracle") return ExperimentKind::Oracle;
  if (name == "hierarchy") return ExperimentKind::Hierarchy;
  if (name == "chaos") return ExperimentKind::Chaos;
  if (name == "report") return ExperimentKind::Report;
  throw ConfigError("unknown experiment kind " + name);
}

std::string kind_name(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::Simulate: return "simulate";
    case ExperimentKind::Meanfield: return "meanfield";
    case ExperimentKind::Oracle: return "oracle";
    case ExperimentKind::Hierarchy: return "hierarchy";
    case ExperimentKind::Chaos: return "chaos";
    case ExperimentKind::Report: return "report";
  }
  return "unknown";
}

TestFunction::TestFunction(PsiSpec spec, PhaseGrid grid) : spec_(std::move(spec)), grid_(grid) {
  if (spec_.family == "grid") {
    require(spec_.values.size() == grid_.size(), "psi.values must have one entry per grid cell");
  } else if (spec_.family == "fourier_gauss") {
    require(spec_.v_width > 0.0, "psi.v_width must be positive");
  } else if (spec_.family != "constant") {
    throw ConfigError("unknown psi family " + spec_.family);
  }
}

double TestFunction::operator()(std::span<const double> z) const {
  const int d = grid_.dim;
  if (spec_.family == "constant") return spec_.value;
  if (spec_.family == "grid") {
    // Locate the containing cell; spatial cell i covers [(i - 1/2) dx, (i + 1/2) dx).
    std::size_t s = 0, v = 0;
    for (int a = 0; a < d; ++a) {
      long i = std::lround(z[a] * grid_.mx);
      i = ((i % grid_.mx) + grid_.mx) % grid_.mx;
      s = s * grid_.mx + static_cast<std::size_t>(i);
    }
    if (grid_.has_velocity()) {
      for (int a = 0; a < d; ++a) {
        long j = static_cast<long>(std::floor((z[d + a] + grid_.lv) / grid_.dv()));
        j = ((j % grid_.mv) + grid_.mv) % grid_.mv;
        v = v * grid_.mv + static_cast<std::size_t>(j);
      }
    }
    return spec_.values[grid_.flat(s, v)];
  }
  double prod = spec_.scale;
  for (int a = 0; a < d; ++a) prod *= std::cos(2.0 * std::numbers::pi * spec_.mode * z[a]);
  if (z.size() >= static_cast<std::size_t>(2 * d)) {
    for (int a = 0; a < d; ++a) {
      prod *= std::exp(-0.5 * z[d + a] * z[d + a] / (spec_.v_width * spec_.v_width));
    }
  }
  return spec_.offset + prod;
}

std::vector<double> TestFunction::sample(const PhaseGrid& g) const {
  if (spec_.family == "grid" && !(g == grid_)) {
    throw DimensionMismatch("grid psi can only be sampled on its own grid");
  }
  std::vector<double> out(g.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (spec_.family == "grid") {
      out[i] = spec_.values[i];
      continue;
    }
    const std::vector<double> c = g.center(i);
    out[i] = (*this)(g.has_velocity() ? std::span<const double>(c)
                                      : std::span<const double>(c).first(g.dim));
  }
  return out;
}

std::vector<double> TestFunction::cell_average(const PhaseGrid& g) const {
  if (spec_.family != "fourier_gauss") return sample(g);
  static constexpr double kNodes[3] = {-0.7745966692414834, 0.0, 0.7745966692414834};
  static constexpr double kWeights[3] = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};
  const int axes = g.has_velocity() ? 2 * g.dim : g.dim;
  int points = 1;
  for (int a = 0; a < axes; ++a) points *= 3;
  std::vector<double> width(axes);
  for (int a = 0; a < axes; ++a) width[a] = a < g.dim ? g.dx() : g.dv();
  std::vector<double> out(g.size());
  std::vector<double> z(axes);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::vector<double> c = g.center(i);
    double sum = 0.0;
    for (int p = 0; p < points; ++p) {
      double w = 1.0;
      int rest = p;
      for (int a = 0; a < axes; ++a) {
        const int q = rest % 3;
        rest /= 3;
        z[a] = c[a] + 0.5 * width[a] * kNodes[q];
        w *= kWeights[q];
      }
      sum += w * (*this)(z);
    }
    out[i] = sum;
  }
  return out;
}

double TestFunction::sup_bound() const {
  if (spec_.family == "constant") return std::abs(spec_.value);
  if (spec_.family == "grid") {
    double m = 0.0;
    for (double v : spec_.values) m = std::max(m, std::abs(v));
    return m;
  }
  return std::abs(spec_.offset) + std::abs(spec_.scale);
}

SimConfig ExperimentConfig::sim_config(int n) const {
  SimConfig cfg;
  cfg.particles = n;
  cfg.dim = dim;
  cfg.order = order;
  cfg.alpha = alpha;
  cfg.dt = dt;
  cfg.t_end = t_end;
  cfg.scheme = scheme;
  cfg.seed = seed;
  cfg.collision = collision;
  cfg.validate();
  return cfg;
}

DensityField ExperimentConfig::initial_density(const PhaseGrid& g) const {
  const double a = initial.family == "uniform" ? 0.0 : initial.amplitude;
  const int d = g.dim;
  const double temperature = initial.temperature;
  const int mode = initial.mode;
  return DensityField::from_function(g, [&](std::span<const double> z) {
    double prod = a;
    for (int i = 0; i < d; ++i) prod *= std::cos(2.0 * std::numbers::pi * mode * z[i]);
    double value = 1.0 + prod;
    if (g.has_velocity()) value *= maxwellian(z.subspan(d, d), temperature);
    return value;
  });
}

OracleConfig ExperimentConfig::oracle_config(int n) const {
  OracleConfig c;
  c.grid = grid;
  c.kernel = kernel;
  c.alpha = alpha;
  c.particles = n;
  c.time = TimeGrid{t_end, dt, oracle.snapshot_every};
  c.stepping = oracle.stepping;
  c.state_cap = oracle.state_cap;
  return c;
}

KernelSpec parse_kernel(const json& j, int dim) {
  const Section s(j, "kernel",
                  {"family", "amplitude", "modes", "exponent", "domain", "image_shells", "truncate",
                   "mollify", "far_field"});
  const auto fam = s.get<std::string>("family");
  const Domain domain = s.has("domain") ? parse_domain(s.get<std::string>("domain")) : Domain::Torus;
  std::optional<KernelSpec> spec;
  try {
    if (fam == "zero") {
      spec = KernelSpec::zero(dim, domain);
    } else if (fam == "sine") {
      require(dim == 1, "kernel.family sine is one-dimensional");
      spec = KernelSpec::sine(s.get<double>("amplitude"));
    } else if (fam == "fourier") {
      std::vector<family::FourierMode> modes;
      const json& list = s.raw("modes");
      require(list.is_array() && !list.empty(), "kernel.modes must be a nonempty array");
      for (std::size_t m = 0; m < list.size(); ++m) {
        const Section ms(list[m], "kernel.modes[" + std::to_string(m) + "]", {"wavevector", "amplitude"});
        const auto k = ms.get<std::vector<int>>("wavevector");
        const auto amp = ms.get<std::vector<double>>("amplitude");
        require(static_cast<int>(k.size()) == dim && static_cast<int>(amp.size()) == dim,
                "kernel mode vectors must have dim entries");
        family::FourierMode mode;
        std::copy(k.begin(), k.end(), mode.wavevector.begin());
        std::copy(amp.begin(), amp.end(), mode.amplitude.begin());
        modes.push_back(mode);
      }
      spec = KernelSpec::fourier(std::move(modes), dim, domain);
    } else if (fam == "riesz") {
      spec = KernelSpec::riesz(s.get<double>("exponent"), dim, domain);
    } else if (fam == "biot_savart") {
      require(dim == 2, "kernel.family biot_savart needs dim 2");
      spec = KernelSpec::biot_savart(domain);
    } else {
      throw ConfigError("unknown kernel family " + fam);
    }
    if (s.has("image_shells")) spec->set_image_shells(s.get<int>("image_shells"));
    if (s.has("truncate")) {
      const int shells = spec->image_shells();
      spec = KernelSpec::truncated(*spec, s.get<double>("truncate"));
      spec->set_image_shells(shells);
    }
    if (s.has("mollify")) spec = mollify(*spec, s.get<double>("mollify"));
    if (s.has("far_field")) {
      const auto tag = s.get<std::string>("far_field");
      if (tag == "bounded") {
        spec->set_far_field(FarField::Bounded);
      } else if (tag == "lipschitz") {
        spec->set_far_field(FarField::Lipschitz);
      } else {
        throw ConfigError("unknown far_field " + tag);
      }
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("kernel: ") + e.what());
  }
  return *spec;
}

std::vector<double> geometric_times(double first, double ratio, int count, double t_end) {
  require(first > 0.0 && ratio > 1.0 && count >= 1, "geometric record times need first > 0, ratio > 1");
  std::vector<double> out;
  double t = first;
  for (int i = 0; i < count && t < t_end; ++i, t *= ratio) out.push_back(t);
  out.push_back(t_end);
  return out;
}

ExperimentConfig parse_config(const json& doc) {
  const Section top(doc, "config",
                    {"schema_version", "experiment_id", "kind", "order", "dim", "kernel", "grid",
                     "initial", "particles", "replicas", "k", "psi", "alpha", "t_end", "dt",
                     "record", "seed", "scheme", "collision", "oracle", "hierarchy", "reference",
                     "output_dir"});
  ExperimentConfig c;
  c.schema_version = top.get<int>("schema_version");
  require(c.schema_version == 1, "unsupported schema_version " + std::to_string(c.schema_version));
  c.source = doc;
  c.experiment_id = top.get<std::string>("experiment_id", c.experiment_id);
  require(!c.experiment_id.empty() && c.experiment_id.find_first_of(",\n") == std::string::npos,
          "experiment_id must be nonempty without commas");
  if (top.has("kind")) c.kind = parse_kind(top.get<std::string>("kind"));

  const auto order = top.get<std::string>("order", "first");
  require(order == "first" || order == "second", "order must be first or second");
  c.order = order == "first" ? Order::First : Order::Second;
  c.dim = top.get<int>("dim", 1);
  require(c.dim >= 1 && c.dim <= kMaxDim, "dim must be 1..3");

  c.kernel = top.has("kernel") ? parse_kernel(top.raw("kernel"), c.dim) : KernelSpec::zero(c.dim);

  if (top.has("grid")) {
    const Section g(top.raw("grid"), "grid", {"mx", "mv", "lv"});
    const int mx = g.get<int>("mx", 16);
    const int mv = g.get<int>("mv", c.order == Order::Second ? 16 : 0);
    require(mv > 0 || !g.has("lv"), "grid.lv needs velocity cells");
    try {
      c.grid = mv > 0 ? PhaseGrid::kinetic(c.dim, mx, mv, g.get<double>("lv", 6.0))
                      : PhaseGrid::spatial(c.dim, mx);
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(std::string("grid: ") + e.what());
    }
  } else {
    c.grid = c.order == Order::Second ? PhaseGrid::kinetic(c.dim, 16, 16, 6.0)
                                      : PhaseGrid::spatial(c.dim, 16);
  }
  try {
    c.grid.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("grid: ") + e.what());
  }
  require(c.grid.has_velocity() == (c.order == Order::Second),
          "grid.mv must be positive exactly for second order");

  if (top.has("initial")) {
    const Section s(top.raw("initial"), "initial", {"family", "amplitude", "mode", "temperature"});
    c.initial.family = s.get<std::string>("family", c.initial.family);
    c.initial.amplitude = s.get<double>("amplitude", c.initial.amplitude);
    c.initial.mode = s.get<int>("mode", c.initial.mode);
    c.initial.temperature = s.get<double>("temperature", c.initial.temperature);
  }
  require(c.initial.family == "perturbed" || c.initial.family == "uniform",
          "initial.family must be perturbed or uniform");
  require(std::abs(c.initial.amplitude) < 1.0, "initial.amplitude must lie in (-1, 1)");
  require(c.initial.temperature > 0.0, "initial.temperature must be positive");

  c.particles = top.get<std::vector<int>>("particles", c.particles);
  require(!c.particles.empty(), "particles must be nonempty");
  for (int n : c.particles) require(n >= 2, "every particle count must be at least 2");
  c.replicas = top.get<int>("replicas", c.replicas);
  require(c.replicas >= 2, "replicas must be at least 2");
  c.k = top.get<int>("k", c.k);
  require(c.k >= 1, "k must be at least 1");
  for (int n : c.particles) require(c.k <= n, "k must not exceed any particle count");

  if (top.has("psi")) {
    const Section s(top.raw("psi"), "psi",
                    {"family", "offset", "scale", "mode", "v_width", "value", "values"});
    c.psi.family = s.get<std::string>("family", c.psi.family);
    c.psi.offset = s.get<double>("offset", c.psi.offset);
    c.psi.scale = s.get<double>("scale", c.psi.scale);
    c.psi.mode = s.get<int>("mode", c.psi.mode);
    c.psi.v_width = s.get<double>("v_width", c.psi.v_width);
    c.psi.value = s.get<double>("value", c.psi.value);
    c.psi.values = s.get<std::vector<double>>("values", {});
  }
  (void)c.test_function();  // validates the family against the grid

  c.alpha = top.get<double>("alpha", c.alpha);
  require(c.alpha >= 0.0, "alpha must be nonnegative");
  c.t_end = top.get<double>("t_end", c.t_end);
  c.dt = top.get<double>("dt", c.dt);
  require(c.t_end > 0.0 && c.dt > 0.0 && c.dt <= c.t_end, "need 0 < dt <= t_end");

  if (top.has("record")) {
    const Section r(top.raw("record"), "record", {"times", "geometric"});
    require(r.has("times") != r.has("geometric"), "record needs exactly one of times, geometric");
    if (r.has("times")) {
      c.record_times = r.get<std::vector<double>>("times");
      for (double t : c.record_times) require(t >= 0.0 && t <= c.t_end, "record time outside [0, t_end]");
      std::sort(c.record_times.begin(), c.record_times.end());
    } else {
      const Section g(r.raw("geometric"), "record.geometric", {"first", "ratio", "count"});
      c.record_times = geometric_times(g.get<double>("first"), g.get<double>("ratio", 2.0),
                                       g.get<int>("count"), c.t_end);
    }
  }

  if (top.has("seed")) {
    const json& seed = top.raw("seed");
    require(seed.is_number_unsigned() || (seed.is_number_integer() && seed.get<long long>() >= 0),
            "seed must be a nonnegative integer");
    c.seed = seed.get<std::uint64_t>();
  }
  if (top.has("scheme")) c.scheme = parse_scheme(top.get<std::string>("scheme"));
  if (top.has("collision")) {
    const Section s(top.raw("collision"), "collision", {"policy", "r_min"});
    const auto policy = s.get<std::string>("policy", "clamp");
    require(policy == "clamp" || policy == "error", "collision.policy must be clamp or error");
    c.collision.kind = policy == "clamp" ? CollisionPolicy::Kind::Clamp : CollisionPolicy::Kind::Error;
    c.collision.r_min = s.get<double>("r_min", c.collision.r_min);
  }

  if (top.has("oracle")) {
    const Section s(top.raw("oracle"), "oracle", {"snapshot_every", "stepping", "nmax", "state_cap"});
    c.oracle.snapshot_every = s.get<int>("snapshot_every", c.oracle.snapshot_every);
    if (s.has("stepping")) c.oracle.stepping = parse_stepping(s.get<std::string>("stepping"));
    c.oracle.nmax = s.get<int>("nmax", c.oracle.nmax);
    c.oracle.state_cap = s.get<std::size_t>("state_cap", c.oracle.state_cap);
  }
  require(c.oracle.snapshot_every >= 1 && c.oracle.nmax >= 0, "oracle.snapshot_every >= 1, nmax >= 0");

  if (top.has("hierarchy")) {
    const Section s(top.raw("hierarchy"), "hierarchy", {"oracle_dir", "nmax", "radii", "window_budget"});
    c.hierarchy.oracle_dir = s.get<std::string>("oracle_dir", "");
    c.hierarchy.nmax = s.get<int>("nmax", c.hierarchy.nmax);
    c.hierarchy.radii = s.get<std::vector<double>>("radii", c.hierarchy.radii);
    c.hierarchy.window_budget = s.get<double>("window_budget", c.hierarchy.window_budget);
  }
  require(c.hierarchy.nmax >= 0, "hierarchy.nmax must be nonnegative");
  for (double r : c.hierarchy.radii) require(r > 0.0 && r < 1.0, "hierarchy.radii must lie in (0, 1)");
  require(c.hierarchy.window_budget > 0.0, "hierarchy.window_budget must be positive");

  if (top.has("reference")) {
    const Section s(top.raw("reference"), "reference", {"refine", "richardson", "dt"});
    c.reference.refine = s.get<int>("refine", c.reference.refine);
    c.reference.richardson = s.get<bool>("richardson", c.reference.richardson);
    c.reference.dt = s.get<double>("dt", c.reference.dt);
  }
  require(c.reference.refine >= 2, "reference.refine must be at least 2");
  require(c.reference.dt >= 0.0, "reference.dt must be nonnegative");

  c.output_dir = top.get<std::string>("output_dir", c.output_dir);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open " + path.string());
  json doc;
  try {
    is >> doc;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
  return parse_config(doc);
}

}  // namespace mfchaos
