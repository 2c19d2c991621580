#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <json.hpp>

#include "mfchaos/config.hpp"
#include "mfchaos/errors.hpp"
#include "mfchaos/harness.hpp"

namespace {

using namespace mfchaos;

nlohmann::json read_document(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open " + path);
  try {
    return nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mean-field propagation-of-chaos experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  for (const char* name : {"simulate", "meanfield", "oracle", "hierarchy", "chaos", "report"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "experiment JSON")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory (default: the config's output_dir)");
    sub->add_option("--seed", seed, "overrides the config seed");
  }
  CLI11_PARSE(app, argc, argv);

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    nlohmann::json doc = read_document(config_path);
    // The override goes into the document so the manifest echo and run hash see it.
    if (seed) doc["seed"] = *seed;
    const ExperimentConfig config = parse_config(doc);
    const std::filesystem::path out = std::filesystem::path(out_dir.empty() ? config.output_dir : out_dir);

    Manifest manifest;
    switch (parse_kind(command)) {
      case ExperimentKind::Simulate: manifest = run_simulate_command(config, out); break;
      case ExperimentKind::Meanfield: manifest = run_meanfield_command(config, out); break;
      case ExperimentKind::Oracle: manifest = run_oracle_command(config, out); break;
      case ExperimentKind::Hierarchy: manifest = run_hierarchy_command(config, out); break;
      case ExperimentKind::Chaos: manifest = run_chaos_command(config, out); break;
      case ExperimentKind::Report: manifest = run_report_command(config, out); break;
    }
    std::cout << command << ": " << manifest.files.size() << " files in " << out.string() << " (run "
              << manifest.run_hash.substr(0, 12) << ", " << manifest.wall_time_s << " s)\n";
    if (manifest.incidents.contains("suite_failures") && manifest.incidents["suite_failures"] != 0) {
      std::cerr << "oracle suite reported failures; see suite_N*.json\n";
      return 2;
    }
  } catch (const ConfigError& e) {
    std::cerr << e.what() << '\n';
    return 64;
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return 1;
  }
  return 0;
}
