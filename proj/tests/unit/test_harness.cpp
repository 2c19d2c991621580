#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "mfchaos/config.hpp"
#include "mfchaos/errors.hpp"
#include "mfchaos/harness.hpp"
#include "mfchaos/io.hpp"
#include "mfchaos/numeric.hpp"

using namespace mfchaos;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mfchaos_unit_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

json small_chaos() {
  return json{{"schema_version", 1},
              {"experiment_id", "unit"},
              {"kind", "chaos"},
              {"order", "first"},
              {"kernel", {{"family", "sine"}, {"amplitude", 0.5}}},
              {"grid", {{"mx", 16}}},
              {"initial", {{"amplitude", 0.4}}},
              {"particles", {4, 8}},
              {"replicas", 24},
              {"k", 1},
              {"psi", {{"family", "fourier_gauss"}}},
              {"alpha", 0.05},
              {"t_end", 0.1},
              {"dt", 0.025},
              {"record", {{"times", {0.05, 0.1}}}},
              {"seed", 11}};
}

json small_oracle() {
  return json{{"schema_version", 1},
              {"kind", "oracle"},
              {"order", "first"},
              {"kernel", {{"family", "sine"}, {"amplitude", 0.6}}},
              {"grid", {{"mx", 12}}},
              {"initial", {{"amplitude", 0.4}}},
              {"particles", {4}},
              {"k", 2},
              {"psi", {{"family", "fourier_gauss"}, {"offset", 0.3}, {"scale", 0.7}}},
              {"alpha", 0.05},
              {"t_end", 0.2},
              {"dt", 0.05},
              {"oracle", {{"stepping", "matrix_exponential"}, {"nmax", 4}}}};
}

// Exact psi = cos(2 pi x) integral over the law that is uniform inside each cell.
double cell_exact_cos_moment(const DensityField& f) {
  const PhaseGrid& g = f.grid();
  double sum = 0.0;
  for (int i = 0; i < g.mx; ++i) {
    const double a = (i - 0.5) * g.dx(), b = (i + 0.5) * g.dx();
    sum += f[i] * (std::sin(kTwoPi * b) - std::sin(kTwoPi * a)) / kTwoPi;
  }
  return sum;
}

}  // namespace

TEST_CASE("symmetric_mean matches the subset average") {
  const std::vector<double> psi{0.3, -1.2, 0.7, 2.0, -0.4, 1.1};
  for (int k = 1; k <= 4; ++k) {
    double brute = 0.0;
    for_each_subset(6, k, [&](std::span<const int> s) {
      double p = 1.0;
      for (int i : s) p *= psi[i];
      brute += p;
    });
    CHECK(symmetric_mean(psi, k) == doctest::Approx(brute / binom(6, k)).epsilon(1e-14));
  }
  CHECK_THROWS_AS((void)symmetric_mean(psi, 0), IndexRange);
  CHECK_THROWS_AS((void)symmetric_mean(psi, 7), IndexRange);
}

TEST_CASE("estimate_psi_moment of psi = 1 is exactly one") {
  const ExperimentConfig c = parse_config(small_chaos());
  const TestFunction one(PsiSpec{.family = "constant", .value = 1.0}, c.grid);
  std::vector<ParticleState> snap;
  for (int r = 0; r < 10; ++r) snap.push_back(sample_initial(c.initial_density(), 7, Order::First, CounterRng(3, r)));
  const MomentEstimate est = estimate_psi_moment(snap, one, 3);
  CHECK(est.value == 1.0);
  CHECK(est.stderr == 0.0);
  CHECK_THROWS_AS((void)estimate_psi_moment(std::span(snap).first(1), one, 1), ConfigError);
}

TEST_CASE("estimator is unbiased on i.i.d. initial samples") {
  const PhaseGrid g = PhaseGrid::spatial(1, 64);
  const DensityField f = DensityField::from_function(g, [](std::span<const double> z) {
    return 1.0 + 0.6 * std::cos(kTwoPi * z[0]);
  });
  const TestFunction psi(PsiSpec{.family = "fourier_gauss", .offset = 0.0, .scale = 1.0}, g);
  const double m1 = cell_exact_cos_moment(f);
  for (int k : {1, 2}) {
    std::vector<ParticleState> snap;
    for (int r = 0; r < 800; ++r) snap.push_back(sample_initial(f, 10, Order::First, CounterRng(5 + k, r)));
    const MomentEstimate est = estimate_psi_moment(snap, psi, k);
    CHECK(std::abs(est.value - std::pow(m1, k)) <= 4.0 * est.stderr);
  }

  SUBCASE("uniform density, cosine psi gives zero") {
    const DensityField u = DensityField::uniform(g);
    std::vector<ParticleState> snap;
    for (int r = 0; r < 500; ++r) snap.push_back(sample_initial(u, 8, Order::First, CounterRng(9, r)));
    const MomentEstimate est = estimate_psi_moment(snap, psi, 1);
    CHECK(std::abs(est.value) <= 4.0 * est.stderr);
  }
}

TEST_CASE("config parsing accepts the documented schema") {
  const ExperimentConfig c = parse_config(small_chaos());
  CHECK(c.kind == ExperimentKind::Chaos);
  CHECK(c.grid == PhaseGrid::spatial(1, 16));
  CHECK(c.particles == std::vector<int>{4, 8});
  CHECK(c.seed == 11);
  CHECK(c.record_times == std::vector<double>{0.05, 0.1});
  CHECK(c.kernel.family_name() == KernelSpec::sine(0.5).family_name());

  json geo = small_chaos();
  geo["record"] = {{"geometric", {{"first", 0.01}, {"ratio", 2.0}, {"count", 10}}}};
  CHECK(parse_config(geo).record_times == std::vector<double>{0.01, 0.02, 0.04, 0.08, 0.1});

  json kinetic = small_chaos();
  kinetic["order"] = "second";
  kinetic["grid"] = {{"mx", 8}, {"mv", 8}, {"lv", 5.0}};
  kinetic["kernel"] = {{"family", "fourier"},
                       {"modes", {{{"wavevector", {1}}, {"amplitude", {0.2}}}}},
                       {"mollify", 0.1}};
  CHECK(parse_config(kinetic).grid == PhaseGrid::kinetic(1, 8, 8, 5.0));

  json vortex = small_chaos();
  vortex["dim"] = 2;
  vortex["kernel"] = {{"family", "biot_savart"}, {"mollify", 0.05}};
  CHECK(parse_config(vortex).kernel.dim() == 2);
}

TEST_CASE("config parsing rejects unknown keys and bad values") {
  const auto rejects = [](const std::function<void(json&)>& edit) {
    json doc = small_chaos();
    edit(doc);
    INFO(doc.dump());
    CHECK_THROWS_AS((void)parse_config(doc), ConfigError);
  };
  rejects([](json& d) { d["bogus"] = 1; });
  rejects([](json& d) { d["kernel"]["bogus"] = 1; });
  rejects([](json& d) { d["grid"]["my"] = 4; });
  rejects([](json& d) { d["psi"]["width"] = 1.0; });
  rejects([](json& d) { d["record"] = {{"geometric", {{"first", 0.1}, {"ratio", 0.5}, {"count", 2}}}}; });
  rejects([](json& d) { d["oracle"] = {{"steps", 3}}; });
  rejects([](json& d) { d["schema_version"] = 2; });
  rejects([](json& d) { d.erase("schema_version"); });
  rejects([](json& d) { d["replicas"] = "many"; });
  rejects([](json& d) { d["kind"] = "dance"; });
  rejects([](json& d) {
    d["order"] = "second";
    d["grid"]["mv"] = 0;
  });
  rejects([](json& d) { d["k"] = 5; });              // exceeds N = 4
  rejects([](json& d) { d["kernel"] = {{"family", "biot_savart"}}; });  // dim 1
  rejects([](json& d) { d["seed"] = -3; });
  rejects([](json& d) { d["initial"]["amplitude"] = 1.5; });
  rejects([](json& d) { d["record"]["times"] = {0.5}; });
  rejects([](json& d) { d["hierarchy"] = {{"radii", {1.0}}}; });
  CHECK_THROWS_AS((void)load_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("binary snapshots round trip and reject corruption") {
  const fs::path dir = scratch("binary");
  const DensityField f = DensityField::from_function(PhaseGrid::kinetic(1, 6, 4, 3.0), [](std::span<const double> z) {
    return 1.0 + 0.3 * std::cos(kTwoPi * z[0]) + 0.01 * z[1] * z[1];
  });
  DensityField timed = f;
  timed.set_time(0.375);
  write_field(dir / "f.bin", timed);
  const DensityField back = read_field(dir / "f.bin");
  CHECK(back.grid() == f.grid());
  CHECK(back.time() == 0.375);
  CHECK(std::equal(back.values().begin(), back.values().end(), f.values().begin(), f.values().end()));

  NTensor t(3, StateSpace{5, 0.2});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = std::sin(0.1 * static_cast<double>(i));
  write_tensor(dir / "t.bin", t);
  const NTensor tb = read_tensor(dir / "t.bin");
  CHECK(tb.order() == 3);
  CHECK(tb.space() == t.space());
  CHECK(std::equal(tb.values().begin(), tb.values().end(), t.values().begin(), t.values().end()));

  CHECK_THROWS_AS((void)read_field(dir / "t.bin"), FormatError);  // wrong kind
  CHECK_THROWS_AS((void)read_tensor(dir / "t.bin", 16), MemoryCap);
  std::string bytes = slurp(dir / "t.bin");
  std::ofstream(dir / "truncated.bin", std::ios::binary) << bytes.substr(0, bytes.size() - 3);
  CHECK_THROWS_AS((void)read_tensor(dir / "truncated.bin"), FormatError);
  bytes[0] = 'X';
  std::ofstream(dir / "magic.bin", std::ios::binary) << bytes;
  CHECK_THROWS_AS((void)read_tensor(dir / "magic.bin"), FormatError);
  CHECK_THROWS_AS((void)read_tensor(dir / "missing.bin"), FormatError);
}

TEST_CASE("manifest round trip and run hash") {
  CHECK(run_hash(json{{"a", 1}}) == "9f89c740ceb46d7418c924a78ac57941d5e96520");
  const fs::path dir = scratch("manifest");
  std::ofstream(dir / "x.csv") << "a\n1\n";
  Manifest m;
  m.kind = "chaos";
  m.config = small_chaos();
  m.run_hash = run_hash(m.config);
  m.files = {"x.csv"};
  m.wall_time_s = 1.5;
  m.incidents["collision_clamps"] = 0;
  write_manifest(dir, m);
  const Manifest back = read_manifest(dir);
  CHECK(back.kind == "chaos");
  CHECK(back.run_hash == m.run_hash);
  CHECK(back.config == m.config);
  CHECK(back.files == m.files);
  fs::remove(dir / "x.csv");
  CHECK_THROWS_AS((void)read_manifest(dir), FormatError);
  CHECK_THROWS_AS((void)read_manifest(scratch("manifest_missing")), FormatError);
}

TEST_CASE("csv writer formats round-trip numbers and rejects separators") {
  const fs::path dir = scratch("csv");
  {
    CsvWriter w(dir / "a.csv", {"x", "n", "s"});
    w.row({0.1, 3LL, std::string("ok")});
    w.row({1.0 / 3.0, -1LL, std::string("a;b")});
    CHECK_THROWS_AS(w.row({1.0, 1LL, std::string("a,b")}), FormatError);
    CHECK_THROWS_AS(w.row({1.0}), FormatError);
  }
  CHECK(slurp(dir / "a.csv") == "x,n,s\n0.1,3,ok\n0.3333333333333333,-1,a;b\n");
  const CsvTable t = read_csv(dir / "a.csv");
  CHECK(t.number(1, "x") == 1.0 / 3.0);
  CHECK_THROWS_AS((void)t.column("y"), FormatError);
}

TEST_CASE("PDE reference with K = 0 matches the heat semigroup") {
  json doc = small_chaos();
  doc["kernel"] = {{"family", "zero"}};
  doc["alpha"] = 0.1;
  const ExperimentConfig c = parse_config(doc);
  const std::vector<double> times{0.05, 0.1};
  const PdeReference ref = pde_reference(c, times);
  // Cell averages of cos on the fine grid carry sin(pi h) / (pi h); against
  // 1 + a cos the grid sum is then a/2 times that, and heat damps mode 1 by
  // e^{-4 pi^2 alpha t}.
  const double h = 1.0 / (c.grid.mx * c.reference.refine);
  const double cell = std::sin(std::numbers::pi * h) / (std::numbers::pi * h);
  for (std::size_t m = 0; m < times.size(); ++m) {
    const double exact = 0.5 * 0.4 * cell * std::exp(-kTwoPi * kTwoPi * 0.1 * times[m]);
    CHECK(ref.fine[m] == doctest::Approx(exact).epsilon(1e-9));
    // The coarse grid holds a cruder initial law, so only its change is used.
    CHECK(std::abs(ref.value[m] - exact) <= ref.delta[m]);
    CHECK(ref.delta[m] < 1e-3);
  }
}

TEST_CASE("chaos experiment output is reproducible and schema-stable") {
  const ExperimentConfig c = parse_config(small_chaos());
  const fs::path a = scratch("chaos_a"), b = scratch("chaos_b");
  run_chaos_command(c, a);
  run_chaos_command(c, b);
  const std::string text = slurp(a / "chaos.csv");
  CHECK(text == slurp(b / "chaos.csv"));
  CHECK(slurp(a / "rates.csv") == slurp(b / "rates.csv"));
  CHECK(text.substr(0, text.find('\n')) == "experiment_id,t,N,k,estimator,mc_stderr,reference,weak_error,notes");

  const CsvTable t = read_csv(a / "chaos.csv");
  REQUIRE(t.rows.size() == 4);
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    CHECK(t.number(i, "weak_error") == std::abs(t.number(i, "estimator") - t.number(i, "reference")));
    CHECK(t.rows[i][t.column("experiment_id")] == "unit");
  }
  const Manifest m = read_manifest(a);
  CHECK(m.status == "complete");
  CHECK(m.run_hash == run_hash(small_chaos()));
  CHECK(m.config == small_chaos());

  const Manifest report = run_report_command(c, a);
  CHECK(report.kind == "report");
  CHECK(slurp(a / "report" / "rates.csv") == slurp(a / "rates.csv"));

  json other = small_chaos();
  other["kind"] = "oracle";
  CHECK_THROWS_AS(run_chaos_command(parse_config(other), scratch("chaos_kind")), ConfigError);
}

TEST_CASE("fit_rate recovers synthetic power laws") {
  std::vector<ResultRow> rows;
  for (double t : {0.1, 0.5}) {
    for (int n : {8, 16, 32, 64, 128}) {
      ResultRow r;
      r.t = t;
      r.particles = n;
      r.k = 1;
      r.weak_error = (t < 0.2 ? 0.3 : 0.8) * std::pow(n, t < 0.2 ? -1.0 : -0.5);
      r.mc_stderr = 0.01 * r.weak_error * (1.0 + 0.1 * n);
      rows.push_back(r);
    }
  }
  const std::vector<RateFit> fits = fit_rate(rows);
  REQUIRE(fits.size() == 2);
  CHECK(fits[0].slope == doctest::Approx(-1.0).epsilon(1e-10));
  CHECK(fits[1].slope == doctest::Approx(-0.5).epsilon(1e-10));
  CHECK(fits[0].points == 5);
  CHECK(fits[0].ci_low <= fits[0].slope);
  CHECK(fits[0].ci_high >= fits[0].slope);

  const fs::path dir = scratch("fit");
  {
    CsvWriter w(dir / "chaos.csv", kChaosColumns);
    for (const ResultRow& r : rows) {
      w.row({std::string("x"), r.t, static_cast<long long>(r.particles), 1LL, 0.0, r.mc_stderr, 0.0,
             r.weak_error, std::string("")});
    }
  }
  const std::vector<RateFit> again = fit_rate(read_csv(dir / "chaos.csv"));
  REQUIRE(again.size() == 2);
  CHECK(again[0].slope == doctest::Approx(-1.0).epsilon(1e-10));
}

TEST_CASE("oracle suite passes on the default run and catches a non-adjoint backward solve") {
  const ExperimentConfig c = parse_config(small_oracle());
  OracleExperiment exp = run_oracle_experiment(c, 4);
  CHECK(exp.suite.passed());
  for (const SuiteCheck& check : exp.suite.checks) {
    INFO(check.name);
    CHECK(check.passed());
    if (check.name.rfind("apriori", 0) == 0) CHECK(check.margin() > 0.0);
  }
  CHECK(exp.suite.check("duality").value <= 1e-10);
  CHECK(exp.suite.to_json()["passed"] == true);

  // Backward solve with a different diffusion: no longer the transpose of the forward generator.
  const OracleConfig oc = c.oracle_config(4);
  const DiscreteGenerator wrong(oc.grid, oc.kernel, 3.0 * oc.alpha, 4);
  exp.run.backward = evolve_backward(wrong.backward(), wrong.max_exit_rate(), exp.run.backward.back(), oc.time,
                                     exp.run.stepping);
  const LadderSeries series = extract_correlation_series(exp.run, 2);
  const OracleSuiteReport broken = evaluate_oracle_suite(exp.run, series, 1.0, c.k);
  CHECK_FALSE(broken.passed());
  CHECK_FALSE(broken.check("duality").passed());
  CHECK(broken.check("mass").passed());
}

TEST_CASE("oracle and hierarchy commands persist and reload runs") {
  json doc = small_oracle();
  doc["particles"] = {3};
  doc["hierarchy"] = {{"nmax", 2}};
  const ExperimentConfig c = parse_config(doc);
  const fs::path dir = scratch("oracle_cmd");
  const Manifest m = run_oracle_command(c, dir);
  CHECK(m.incidents["suite_failures"] == 0);
  const CsvTable oracle = read_csv(dir / "oracle_N3.csv");
  CHECK(oracle.columns == kOracleColumns);

  const OracleRun fresh = run_oracle_experiment(c, 3).run;
  const OracleRun loaded = load_oracle_run(dir / "oracle_N3", c);
  REQUIRE(loaded.snapshots() == fresh.snapshots());
  for (std::size_t s = 0; s < loaded.snapshots(); ++s) CHECK(loaded.pairing(s) == fresh.pairing(s));
  CHECK(loaded.exact_pairing == fresh.exact_pairing);

  json hdoc = doc;
  hdoc["kind"] = "hierarchy";
  hdoc["hierarchy"]["oracle_dir"] = dir.string();
  const fs::path hdir = scratch("hierarchy_cmd");
  run_hierarchy_command(parse_config(hdoc), hdir);
  const CsvTable h = read_csv(hdir / "hierarchy_N3.csv");
  CHECK(h.columns.front() == "t");
  CHECK(h.column("projected_residual") == 4);
  CHECK(h.column("Z_r=0.5") > 0);
  CHECK(h.rows.size() == 3 * fresh.snapshots());
  const CsvTable w = read_csv(hdir / "windows_N3.csv");
  CHECK(w.number(0, "start") == 0.0);
  CHECK(w.number(w.rows.size() - 1, "end") == doctest::Approx(0.2));
}

TEST_CASE("simulate and meanfield commands write their outputs") {
  json doc = small_chaos();
  doc.erase("kind");
  doc["replicas"] = 4;
  const ExperimentConfig c = parse_config(doc);
  const fs::path sim = scratch("simulate_cmd");
  run_simulate_command(c, sim);
  const CsvTable obs = read_csv(sim / "observations_N4.csv");
  CHECK(obs.columns == std::vector<std::string>{"replica", "t", "observable_name", "value"});
  CHECK(obs.rows.size() == 4u * 2u * 2u);

  const fs::path mf = scratch("meanfield_cmd");
  run_meanfield_command(c, mf);
  const CsvTable diag = read_csv(mf / "diagnostics.csv");
  CHECK(diag.columns == std::vector<std::string>{"t", "mass", "fisher", "lambda_f"});
  for (std::size_t i = 0; i < diag.rows.size(); ++i) CHECK(diag.number(i, "mass") == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(read_field(mf / "f_0001.bin").time() == doctest::Approx(0.1));
}

TEST_CASE("shipped example configs parse and name their subcommand") {
  int seen = 0;
  for (const auto& entry : fs::directory_iterator(fs::path(MFCHAOS_SOURCE_DIR) / "configs")) {
    if (entry.path().extension() != ".json") continue;
    CAPTURE(entry.path().string());
    const ExperimentConfig c = load_config(entry.path());
    CHECK(c.kind.has_value());
    ++seen;
  }
  CHECK(seen >= 5);
}
