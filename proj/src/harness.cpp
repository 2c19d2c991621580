#include "mfchaos/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>

#include "mfchaos/errors.hpp"
#include "mfchaos/meanfield.hpp"
#include "mfchaos/numeric.hpp"

namespace mfchaos {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string numbered(const char* stem, std::size_t m) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%04zu.bin", stem, m);
  return buf;
}

std::string per_particles(const std::string& stem, int n, const std::string& ext = "") {
  return stem + "_N" + std::to_string(n) + ext;
}

double sup_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

PhaseGrid refined(const PhaseGrid& g, int r) {
  PhaseGrid out = g;
  out.mx *= r;
  out.mv *= r;
  return out;
}

class Stopwatch {
 public:
  [[nodiscard]] double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

Manifest begin_manifest(const ExperimentConfig& config, const fs::path& out, ExperimentKind kind) {
  if (config.kind && *config.kind != kind) {
    throw ConfigError("config kind " + kind_name(*config.kind) + " does not match command " +
                      kind_name(kind));
  }
  fs::create_directories(out);
  Manifest m;
  m.kind = kind_name(kind);
  m.config = config.source;
  m.run_hash = run_hash(config.source);
  return m;
}

NTensor meanfield_tensor(const OracleRun& run, std::size_t m) {
  return NTensor(1, run.one_body_space(), run.meanfield[m]);
}

}  // namespace

double symmetric_mean(std::span<const double> psi_values, int k) {
  const int n = static_cast<int>(psi_values.size());
  if (k < 1 || k > n) throw IndexRange("k must satisfy 1 <= k <= N");
  std::vector<double> e(k + 1, 0.0);
  e[0] = 1.0;
  for (double x : psi_values) {
    for (int j = k; j >= 1; --j) e[j] += x * e[j - 1];
  }
  return e[k] / binom(n, k);
}

double psi_u_statistic(const ParticleState& state, const TestFunction& psi, int k) {
  std::vector<double> values(state.particles);
  for (int i = 0; i < state.particles; ++i) values[i] = psi(state.phase_point(i));
  return symmetric_mean(values, k);
}

MomentEstimate estimate_psi_moment(std::span<const ParticleState> snapshot, const TestFunction& psi,
                                   int k) {
  const std::size_t R = snapshot.size();
  if (R < 2) throw ConfigError("estimate_psi_moment needs at least two replicas");
  std::vector<double> xs(R);
  for (std::size_t r = 0; r < R; ++r) xs[r] = psi_u_statistic(snapshot[r], psi, k);
  const double mean = compensated_total(xs) / static_cast<double>(R);
  CompensatedSum ss;
  for (double x : xs) ss += (x - mean) * (x - mean);
  const double var = ss.value() / static_cast<double>(R - 1);
  return {mean, std::sqrt(var / static_cast<double>(R))};
}

std::vector<double> snapped_record_times(const ExperimentConfig& config) {
  std::vector<double> times = config.record_times;
  if (times.empty()) times.push_back(config.t_end);
  std::vector<long> steps;
  for (double t : times) steps.push_back(std::lround(t / config.dt));
  std::sort(steps.begin(), steps.end());
  steps.erase(std::unique(steps.begin(), steps.end()), steps.end());
  std::vector<double> out;
  for (long s : steps) out.push_back(s * config.dt);
  return out;
}

PdeReference pde_reference(const ExperimentConfig& config, std::span<const double> times) {
  if (!std::is_sorted(times.begin(), times.end())) throw ConfigError("reference times must be sorted");
  const int r = config.reference.refine;
  const double dt = config.reference.dt > 0.0 ? config.reference.dt : config.dt;
  const TestFunction psi = config.test_function();
  // Entry 0 is the pairing at t = 0.
  const auto integrals = [&](const PhaseGrid& g, double h) {
    const MeanFieldSolver solver(config.kernel, g);
    const std::vector<double> w = psi.cell_average(g);
    DensityField f = config.initial_density(g);
    std::vector<double> out{compensated_dot(w, f.values()) * g.cell_volume()};
    for (double t : times) {
      f = solver.evolve(f, config.alpha, h, t);
      out.push_back(compensated_dot(w, f.values()) * g.cell_volume());
    }
    return out;
  };
  const std::vector<double> coarse = integrals(config.grid, dt);
  const std::vector<double> fine = integrals(refined(config.grid, r), dt / r);
  PdeReference ref;
  ref.times.assign(times.begin(), times.end());
  for (std::size_t m = 0; m < times.size(); ++m) {
    const double fine_step = fine[m + 1] - fine[0];
    const double coarse_step = coarse[m + 1] - coarse[0];
    // The extrapolation acts on the change since t = 0 only: the fine grid
    // carries the particles' initial law, the coarse one a cruder copy of it.
    const double extrapolated =
        fine[0] + (config.reference.richardson ? (r * fine_step - coarse_step) / (r - 1) : fine_step);
    ref.coarse.push_back(std::pow(fine[0] + coarse_step, config.k));
    ref.fine.push_back(std::pow(fine[m + 1], config.k));
    ref.value.push_back(std::pow(extrapolated, config.k));
    ref.delta.push_back(std::abs(ref.fine.back() - ref.coarse.back()));
  }
  return ref;
}

ChaosResult run_chaos_experiment(const ExperimentConfig& config, const fs::path& csv) {
  const std::vector<double> times = snapped_record_times(config);
  ChaosResult result;
  result.reference = pde_reference(config, times);
  const DensityField f0 = config.initial_density(refined(config.grid, config.reference.refine));
  const TestFunction psi = config.test_function();
  const Observer observer{"psi_moment",
                          [&](const ParticleState& s) { return psi_u_statistic(s, psi, config.k); }};

  std::optional<CsvWriter> writer;
  if (!csv.empty()) writer.emplace(csv, kChaosColumns);
  for (int n : config.particles) {
    EnsembleOptions options;
    options.replicas = config.replicas;
    options.record_times = times;
    const EnsembleResult ens =
        run_ensemble(config.sim_config(n), config.kernel, f0, options, std::span(&observer, 1));
    const long incidents = ens.total_incidents();
    result.incidents += incidents;
    for (std::size_t m = 0; m < ens.times.size(); ++m) {
      const auto [mean, se] = ens.mean_stderr(observer.name, ens.times[m]);
      ResultRow row;
      row.experiment_id = config.experiment_id;
      row.t = ens.times[m];
      row.particles = n;
      row.k = config.k;
      row.estimator = mean;
      row.mc_stderr = se;
      row.reference = result.reference.value[m];
      row.weak_error = std::abs(mean - row.reference);
      row.notes = "ref_delta=" + format_number(result.reference.delta[m]);
      if (incidents > 0) row.notes += ";clamps=" + std::to_string(incidents);
      if (writer) {
        writer->row({row.experiment_id, row.t, static_cast<long long>(n), static_cast<long long>(row.k),
                     row.estimator, row.mc_stderr, row.reference, row.weak_error, row.notes});
      }
      result.rows.push_back(std::move(row));
    }
    if (writer) writer->flush();
  }
  return result;
}

std::vector<RateFit> fit_rate(std::span<const ResultRow> rows) {
  std::map<std::pair<double, int>, std::vector<const ResultRow*>> groups;
  for (const ResultRow& r : rows) groups[{r.t, r.k}].push_back(&r);
  std::vector<RateFit> fits;
  for (const auto& [key, group] : groups) {
    std::vector<double> x, y, w;
    bool weighted = true;
    for (const ResultRow* r : group) {
      if (!(r->weak_error > 0.0)) continue;
      x.push_back(std::log(static_cast<double>(r->particles)));
      y.push_back(std::log(r->weak_error));
      if (r->mc_stderr > 0.0) {
        const double z = r->weak_error / r->mc_stderr;
        w.push_back(z * z);
      } else {
        weighted = false;
      }
    }
    if (x.size() < 2) continue;
    const LineFit line = fit_line(x, y, weighted ? std::span<const double>(w) : std::span<const double>());
    RateFit fit;
    fit.t = key.first;
    fit.k = key.second;
    fit.slope = line.slope;
    fit.slope_stderr = line.slope_stderr;
    fit.ci_low = line.slope - 1.96 * line.slope_stderr;
    fit.ci_high = line.slope + 1.96 * line.slope_stderr;
    fit.points = static_cast<int>(x.size());
    fits.push_back(fit);
  }
  return fits;
}

std::vector<RateFit> fit_rate(const CsvTable& chaos_csv) {
  std::vector<ResultRow> rows;
  for (std::size_t i = 0; i < chaos_csv.rows.size(); ++i) {
    ResultRow r;
    r.t = chaos_csv.number(i, "t");
    r.particles = static_cast<int>(chaos_csv.number(i, "N"));
    r.k = static_cast<int>(chaos_csv.number(i, "k"));
    r.mc_stderr = chaos_csv.number(i, "mc_stderr");
    r.weak_error = chaos_csv.number(i, "weak_error");
    rows.push_back(r);
  }
  return fit_rate(rows);
}

bool OracleSuiteReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const SuiteCheck& c) { return c.passed(); });
}

const SuiteCheck& OracleSuiteReport::check(const std::string& name) const {
  for (const SuiteCheck& c : checks) {
    if (c.name == name) return c;
  }
  throw IndexRange("no suite check named " + name);
}

json OracleSuiteReport::to_json() const {
  json j;
  j["particles"] = particles;
  j["passed"] = passed();
  j["checks"] = json::array();
  for (const SuiteCheck& c : checks) {
    j["checks"].push_back({{"name", c.name},
                           {"value", c.value},
                           {"threshold", c.threshold},
                           {"comparison", c.upper ? "<=" : ">="},
                           {"margin", c.margin()},
                           {"passed", c.passed()}});
  }
  return j;
}

OracleSuiteReport evaluate_oracle_suite(const OracleRun& run, const LadderSeries& series,
                                        double psi_sup, int k) {
  OracleSuiteReport report;
  report.particles = run.particles;
  const auto add = [&](std::string name, double value, double threshold, bool upper) {
    report.checks.push_back({std::move(name), value, threshold, upper});
  };
  const bool exact = run.stepping == Stepping::MatrixExponential;
  add("duality", check_duality(run), exact ? 1e-10 : 1e-6, true);
  const RunHealth health = run_health(run);
  add("mass", health.mass_error, 1e-12, true);
  add("positivity", health.min_forward, -1e-14, false);
  add("max_principle", health.maxprin_margin, -1e-12, false);
  add("symmetry", health.symmetry_residual, 1e-10, true);

  const int top = static_cast<int>(series.ladders.front().terms.size()) - 1;
  for (int n = 1; n <= top; ++n) {
    double worst = 0.0;
    for (std::size_t m = 0; m < series.ladders.size(); ++m) {
      worst = std::max(worst, orthogonality_residual(series.ladders[m].terms[n], series.weights[m]));
    }
    add("orthogonality_n=" + std::to_string(n), worst, 1e-12, true);
  }
  for (const AprioriRow& row : verify_apriori(series, psi_sup, k).rows) {
    add("apriori_n=" + std::to_string(row.n) + "_sup=" + std::to_string(row.sup_slots), row.measured,
        row.bound, true);
  }
  if (top == run.particles) {
    double worst = 0.0;
    for (std::size_t m = 0; m < series.ladders.size(); ++m) {
      const CorrelationLadder& ladder = series.ladders[m];
      const double total = weighted_square_norm(run.phi(m), series.weights[m]);
      CompensatedSum parts;
      for (int n = 0; n <= top; ++n) parts += binom(run.particles, n) * ladder.norms[n] * ladder.norms[n];
      worst = std::max(worst, std::abs(total - parts.value()) / std::max(total, 1e-300));
    }
    add("parseval", worst, 1e-12, true);
  }
  double cancel = 0.0;
  for (std::size_t m = 0; m < run.snapshots(); ++m) {
    const auto c = TwoPointField(run.density(m), run.kernel).cancellations();
    cancel = std::max({cancel, c.first_slot, c.second_slot});
  }
  add("vf_cancellation", cancel, 1e-13, true);
  return report;
}

void write_oracle_csv(const fs::path& path, const OracleRun& run, const LadderSeries& series,
                      double psi_sup, int k) {
  CsvWriter w(path, kOracleColumns);
  const int N = run.particles;
  const double volume = std::pow(run.grid.cell_volume(), N);
  const double final_sup = sup_abs(run.backward.back());
  const double scale = std::pow(psi_sup, k);
  for (std::size_t m = 0; m < run.snapshots(); ++m) {
    const double duality = std::abs(run.pairing(m) - run.pairing(0));
    const double mass = std::abs(compensated_total(run.forward[m]) * volume - 1.0);
    const double maxprin = final_sup - sup_abs(run.backward[m]);
    const CorrelationLadder& ladder = series.ladders[m];
    for (std::size_t n = 0; n < ladder.norms.size(); ++n) {
      const double bound = scale / std::sqrt(binom(N, static_cast<int>(n)));
      w.row({run.times[m], duality, mass, maxprin, static_cast<long long>(n), ladder.norms[n], bound,
             bound - ladder.norms[n]});
    }
  }
}

OracleExperiment run_oracle_experiment(const ExperimentConfig& config, int particles) {
  if (config.k > particles) throw IndexRange("k must not exceed N");
  const PhaseGrid& g = config.grid;
  const std::vector<double> psi = config.test_function().sample(g);
  const NTensor final_data =
      build_final_data(psi, StateSpace{static_cast<int>(g.size()), g.cell_volume()}, particles,
                       config.k, config.oracle.state_cap);
  OracleExperiment out{run_oracle(config.oracle_config(particles), config.initial_density(), final_data),
                       {}, {}};
  out.series = extract_correlation_series(out.run, std::min(particles, config.oracle.nmax));
  out.suite = evaluate_oracle_suite(out.run, out.series, sup_abs(psi), config.k);
  return out;
}

std::vector<std::string> save_oracle_run(const fs::path& dir, const OracleRun& run) {
  fs::create_directories(dir);
  std::vector<std::string> files;
  for (std::size_t m = 0; m < run.snapshots(); ++m) {
    for (const auto& [stem, tensor] :
         {std::pair{"F", run.distribution(m)}, std::pair{"Phi", run.phi(m)},
          std::pair{"f", meanfield_tensor(run, m)}}) {
      const std::string name = numbered(stem, m);
      write_tensor(dir / name, tensor);
      files.push_back(name);
    }
  }
  json meta;
  meta["particles"] = run.particles;
  meta["stepping"] = run.stepping == Stepping::Rk4 ? "rk4" : "matrix_exponential";
  meta["times"] = run.times;
  meta["exact_pairing"] = run.exact_pairing;
  meta["states"] = run.states;
  meta["nonzeros"] = run.nonzeros;
  meta["max_exit_rate"] = run.max_exit_rate;
  std::ofstream os(dir / "oracle_run.json");
  if (!os) throw FormatError("cannot write " + (dir / "oracle_run.json").string());
  os << meta.dump(2) << '\n';
  files.push_back("oracle_run.json");
  return files;
}

OracleRun load_oracle_run(const fs::path& dir, const ExperimentConfig& config) {
  std::ifstream is(dir / "oracle_run.json");
  if (!is) throw FormatError("missing oracle_run.json in " + dir.string());
  json meta;
  OracleRun run;
  try {
    is >> meta;
    run.particles = meta.at("particles").get<int>();
    run.stepping = meta.at("stepping").get<std::string>() == "rk4" ? Stepping::Rk4
                                                                   : Stepping::MatrixExponential;
    run.times = meta.at("times").get<std::vector<double>>();
    run.exact_pairing = meta.at("exact_pairing").get<double>();
    run.states = meta.at("states").get<std::size_t>();
    run.nonzeros = meta.at("nonzeros").get<std::size_t>();
    run.max_exit_rate = meta.at("max_exit_rate").get<double>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("oracle_run.json: ") + e.what());
  }
  run.grid = config.grid;
  run.kernel = config.kernel;
  run.alpha = config.alpha;
  const StateSpace space = run.one_body_space();
  const auto load = [&](const char* stem, std::size_t m, int order) {
    NTensor t = read_tensor(dir / numbered(stem, m), config.oracle.state_cap);
    if (t.order() != order || !(t.space() == space)) {
      throw FormatError(std::string(stem) + " snapshot does not match the configured grid");
    }
    return std::vector<double>(t.values().begin(), t.values().end());
  };
  for (std::size_t m = 0; m < run.times.size(); ++m) {
    run.forward.push_back(load("F", m, run.particles));
    run.backward.push_back(load("Phi", m, run.particles));
    run.meanfield.push_back(load("f", m, 1));
  }
  if (run.times.size() < 2) throw FormatError("oracle run needs at least two snapshots");
  return run;
}

HierarchyResult run_hierarchy(const OracleRun& run, const ExperimentConfig& config) {
  const int N = run.particles;
  const int nmax = std::min(config.hierarchy.nmax, N);
  const LadderSeries series = extract_correlation_series(run, std::min(N, nmax + 2));
  HierarchyResult out;
  out.residuals = bbgky_residual(run, series, nmax);
  const double psi_sup = sup_abs(config.test_function().sample(run.grid));
  out.z = generating_function(series, config.hierarchy.radii, psi_sup, config.k);
  for (std::size_t m = 0; m < run.snapshots(); ++m) out.lambda.push_back(lambda_f(run.density(m), run.kernel));
  out.windows = uniqueness_windows(run.times, out.lambda, config.hierarchy.window_budget);
  return out;
}

void write_hierarchy_csv(const fs::path& path, const HierarchyResult& result) {
  std::vector<std::string> columns{"t", "n", "interior", "residual", "projected_residual", "reduced",
                                   "reduced_projected"};
  for (double r : result.z.radii) columns.push_back("Z_r=" + format_number(r));
  columns.push_back("lambda_f");
  columns.push_back("window");
  CsvWriter w(path, columns);
  const auto& times = result.z.times;
  for (const ResidualRow& row : result.residuals.rows) {
    const auto it = std::find(times.begin(), times.end(), row.t);
    if (it == times.end()) throw IndexRange("residual row time is not a snapshot");
    const std::size_t m = static_cast<std::size_t>(it - times.begin());
    long long window = -1;
    for (std::size_t i = 0; i < result.windows.windows.size(); ++i) {
      const auto [a, b] = result.windows.windows[i];
      if (row.t >= a - 1e-12 && row.t <= b + 1e-12) {
        window = static_cast<long long>(i);
        break;
      }
    }
    std::vector<CsvWriter::Cell> cells{row.t,        static_cast<long long>(row.n),
                                       static_cast<long long>(row.interior),
                                       row.residual, row.projected,
                                       row.reduced,  row.reduced_projected};
    for (double z : result.z.values[m]) cells.emplace_back(z);
    cells.emplace_back(result.lambda[m]);
    cells.emplace_back(window);
    w.row(cells);
  }
}

void write_windows_csv(const fs::path& path, const UniquenessWindows& windows) {
  CsvWriter w(path, {"window", "start", "end"});
  for (std::size_t i = 0; i < windows.windows.size(); ++i) {
    w.row({static_cast<long long>(i), windows.windows[i].first, windows.windows[i].second});
  }
}

Manifest run_simulate_command(const ExperimentConfig& config, const fs::path& out) {
  const Stopwatch clock;
  Manifest manifest = begin_manifest(config, out, ExperimentKind::Simulate);
  const TestFunction psi = config.test_function();
  const int d = config.dim;
  std::vector<Observer> observers{
      {"psi_moment", [&](const ParticleState& s) { return psi_u_statistic(s, psi, config.k); }},
      {"center_of_mass_0", [&](const ParticleState& s) {
         CompensatedSum sum;
         for (int i = 0; i < s.particles; ++i) sum += s.unwrapped[static_cast<std::size_t>(i) * d];
         return sum.value() / s.particles;
       }}};
  if (config.order == Order::Second) {
    observers.push_back({"momentum_0", [&](const ParticleState& s) {
                           CompensatedSum sum;
                           for (int i = 0; i < s.particles; ++i) sum += s.velocity(i)[0];
                           return sum.value() / s.particles;
                         }});
  }
  long incidents = 0;
  for (int n : config.particles) {
    EnsembleOptions options;
    options.replicas = config.replicas;
    options.record_times = snapped_record_times(config);
    const EnsembleResult ens =
        run_ensemble(config.sim_config(n), config.kernel, config.initial_density(), options, observers);
    incidents += ens.total_incidents();
    const std::string name = per_particles("observations", n, ".csv");
    write_observations_csv(ens, (out / name).string());
    manifest.files.push_back(name);
  }
  manifest.incidents["collision_clamps"] = incidents;
  manifest.wall_time_s = clock.seconds();
  write_manifest(out, manifest);
  return manifest;
}

Manifest run_meanfield_command(const ExperimentConfig& config, const fs::path& out) {
  const Stopwatch clock;
  Manifest manifest = begin_manifest(config, out, ExperimentKind::Meanfield);
  const MeanFieldSolver solver(config.kernel, config.grid);
  DensityField f = config.initial_density();
  CsvWriter diag(out / "diagnostics.csv", {"t", "mass", "fisher", "lambda_f"});
  manifest.files.push_back("diagnostics.csv");
  std::size_t clamped = 0;
  const std::vector<double> times = snapped_record_times(config);
  for (std::size_t m = 0; m < times.size(); ++m) {
    f = solver.evolve(f, config.alpha, config.dt, times[m]);
    const TwoPointField vf(f, config.kernel);
    clamped = std::max(clamped, vf.clamped_cells());
    diag.row({f.time(), f.mass(), fisher_information(f), lambda_f(vf)});
    const std::string name = numbered("f", m);
    write_field(out / name, f);
    manifest.files.push_back(name);
  }
  diag.flush();
  manifest.incidents["max_clamped_cells"] = clamped;
  manifest.wall_time_s = clock.seconds();
  write_manifest(out, manifest);
  return manifest;
}

Manifest run_oracle_command(const ExperimentConfig& config, const fs::path& out) {
  const Stopwatch clock;
  Manifest manifest = begin_manifest(config, out, ExperimentKind::Oracle);
  long failures = 0;
  const double psi_sup = sup_abs(config.test_function().sample(config.grid));
  for (int n : config.particles) {
    const OracleExperiment exp = run_oracle_experiment(config, n);
    const std::string dir = per_particles("oracle", n);
    for (const std::string& f : save_oracle_run(out / dir, exp.run)) manifest.files.push_back(dir + "/" + f);
    const std::string csv = per_particles("oracle", n, ".csv");
    write_oracle_csv(out / csv, exp.run, exp.series, psi_sup, config.k);
    const std::string suite = per_particles("suite", n, ".json");
    std::ofstream(out / suite) << exp.suite.to_json().dump(2) << '\n';
    manifest.files.push_back(csv);
    manifest.files.push_back(suite);
    for (const SuiteCheck& c : exp.suite.checks) failures += c.passed() ? 0 : 1;
  }
  manifest.incidents["suite_failures"] = failures;
  manifest.wall_time_s = clock.seconds();
  write_manifest(out, manifest);
  return manifest;
}

Manifest run_hierarchy_command(const ExperimentConfig& config, const fs::path& out) {
  const Stopwatch clock;
  Manifest manifest = begin_manifest(config, out, ExperimentKind::Hierarchy);
  std::optional<ExperimentConfig> source;
  if (!config.hierarchy.oracle_dir.empty()) {
    // The oracle run's own config fixes grid, kernel and alpha.
    source = parse_config(read_manifest(config.hierarchy.oracle_dir).config);
  }
  for (int n : config.particles) {
    const OracleRun run =
        source ? load_oracle_run(fs::path(config.hierarchy.oracle_dir) / per_particles("oracle", n), *source)
               : run_oracle_experiment(config, n).run;
    const HierarchyResult result = run_hierarchy(run, config);
    const std::string csv = per_particles("hierarchy", n, ".csv");
    const std::string windows = per_particles("windows", n, ".csv");
    write_hierarchy_csv(out / csv, result);
    write_windows_csv(out / windows, result.windows);
    manifest.files.push_back(csv);
    manifest.files.push_back(windows);
  }
  manifest.wall_time_s = clock.seconds();
  write_manifest(out, manifest);
  return manifest;
}

Manifest run_chaos_command(const ExperimentConfig& config, const fs::path& out) {
  const Stopwatch clock;
  Manifest manifest = begin_manifest(config, out, ExperimentKind::Chaos);
  manifest.files = {"chaos.csv"};
  manifest.status = "partial";
  {
    // Written up front so an interrupted run still leaves a readable manifest.
    std::ofstream(out / "chaos.csv");
    write_manifest(out, manifest);
  }
  const ChaosResult result = run_chaos_experiment(config, out / "chaos.csv");

  CsvWriter ref(out / "reference.csv", {"t", "coarse", "fine", "reference", "delta"});
  for (std::size_t m = 0; m < result.reference.times.size(); ++m) {
    ref.row({result.reference.times[m], result.reference.coarse[m], result.reference.fine[m],
             result.reference.value[m], result.reference.delta[m]});
  }
  CsvWriter rates(out / "rates.csv", {"t", "k", "slope", "slope_stderr", "ci_low", "ci_high", "points"});
  for (const RateFit& f : fit_rate(result.rows)) {
    rates.row({f.t, static_cast<long long>(f.k), f.slope, f.slope_stderr, f.ci_low, f.ci_high,
               static_cast<long long>(f.points)});
  }
  manifest.files = {"chaos.csv", "reference.csv", "rates.csv"};
  manifest.status = "complete";
  manifest.incidents["collision_clamps"] = result.incidents;
  manifest.wall_time_s = clock.seconds();
  write_manifest(out, manifest);
  return manifest;
}

Manifest run_report_command(const ExperimentConfig& config, const fs::path& out) {
  const Stopwatch clock;
  const Manifest chaos = read_manifest(out);
  if (chaos.kind != "chaos") throw ConfigError("report expects a chaos run directory");
  const fs::path dir = out / "report";
  ExperimentConfig any = config;
  any.kind.reset();  // the report accepts the config of the run it summarizes
  Manifest manifest = begin_manifest(any, dir, ExperimentKind::Report);
  const std::vector<RateFit> fits = fit_rate(read_csv(out / "chaos.csv"));
  CsvWriter rates(dir / "rates.csv", {"t", "k", "slope", "slope_stderr", "ci_low", "ci_high", "points"});
  std::ofstream md(dir / "summary.md");
  md << "# Rate profile for run " << chaos.run_hash << "\n\n"
     << "| t | k | slope | stderr | points |\n|---|---|---|---|---|\n";
  for (const RateFit& f : fits) {
    rates.row({f.t, static_cast<long long>(f.k), f.slope, f.slope_stderr, f.ci_low, f.ci_high,
               static_cast<long long>(f.points)});
    md << "| " << format_number(f.t) << " | " << f.k << " | " << format_number(f.slope) << " | "
       << format_number(f.slope_stderr) << " | " << f.points << " |\n";
  }
  manifest.files = {"rates.csv", "summary.md"};
  manifest.wall_time_s = clock.seconds();
  write_manifest(dir, manifest);
  return manifest;
}

}  // namespace mfchaos
