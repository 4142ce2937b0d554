#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "regdiff/config.hpp"
#include "regdiff/experiment.hpp"
#include "regdiff/presets.hpp"

namespace {

// Config path or "preset:<name>" for the builtin experiments.
regdiff::json load_raw(const std::string& path) {
  if (path.rfind("preset:", 0) == 0) return regdiff::preset_config(path.substr(7));
  std::ifstream in(path);
  if (!in) throw regdiff::ConfigParse("cannot open config file: " + path);
  regdiff::json j;
  try {
    in >> j;
  } catch (const regdiff::json::exception& e) {
    throw regdiff::ConfigParse(std::string("invalid JSON in ") + path + ": " + e.what());
  }
  return j;
}

regdiff::ExperimentConfig resolve(const std::string& path,
                                  const std::vector<std::string>& overrides,
                                  std::uint64_t* seed_override) {
  regdiff::json j = regdiff::apply_overrides(load_raw(path), overrides);
  if (seed_override) j["algorithm"]["seed"] = *seed_override;
  return regdiff::parse_config(j);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"regdiff: regularized diffusion adaptation simulator"};
  app.require_subcommand(1);

  std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
  app.add_option("--workers", workers, "worker threads for repetitions and sweeps");
  std::uint64_t seed = 0;
  bool seed_set = false;
  app.add_option("--seed", seed, "override the config seed")
      ->each([&](const std::string&) { seed_set = true; });

  // run
  std::string run_config;
  std::vector<std::string> run_overrides;
  auto* run_cmd = app.add_subcommand("run", "execute an experiment config");
  run_cmd->add_option("config", run_config, "config path or preset:<name>")->required();
  run_cmd->add_option("--override", run_overrides, "key=value config override");

  // verify
  std::string verify_which, verify_config;
  std::vector<std::string> verify_overrides;
  auto* verify_cmd = app.add_subcommand("verify", "run a bound verification");
  verify_cmd->add_option("which", verify_which, "bias | contraction | msd")->required();
  verify_cmd->add_option("config", verify_config, "config path or preset:<name>")
      ->required();
  verify_cmd->add_option("--override", verify_overrides, "key=value config override");

  // preset
  std::string preset_name, preset_out = ".";
  auto* preset_cmd = app.add_subcommand("preset", "write a builtin preset config");
  preset_cmd->add_option("name", preset_name, "preset name")->required();
  preset_cmd->add_option("--out", preset_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      auto config = resolve(run_config, run_overrides, seed_set ? &seed : nullptr);
      auto result = regdiff::run_experiment(config, workers);
      std::cout << "wrote artifacts to " << config.output_dir << '\n';
      for (const auto& curve : result.curves)
        for (const auto& pt : curve.points)
          std::cout << "curve " << curve.name << " mu=" << pt.mu
                    << " final msd=" << pt.averaged.rows.back().msd_network << '\n';
      return 0;
    }
    if (*verify_cmd) {
      auto config = resolve(verify_config, verify_overrides, seed_set ? &seed : nullptr);
      regdiff::VerifyReport report;
      if (verify_which == "bias")
        report = regdiff::verify_bias(config, {1e-1, 1e-2, 1e-3, 1e-4}, true);
      else if (verify_which == "contraction")
        report = regdiff::verify_contraction(config);
      else if (verify_which == "msd")
        report = regdiff::verify_msd(config, workers, true);
      else
        throw regdiff::ConfigParse("unknown verification: " + verify_which);
      for (const auto& line : report.lines) std::cout << line << '\n';
      std::cout << (report.pass ? "VERIFY PASS" : "VERIFY FAIL") << '\n';
      return report.pass ? 0 : 1;
    }
    if (*preset_cmd) {
      auto j = regdiff::preset_config(preset_name);
      std::filesystem::create_directories(preset_out);
      const std::string path = preset_out + "/" + preset_name + ".json";
      std::ofstream out(path);
      out << j.dump(2) << '\n';
      std::cout << "wrote " << path << '\n';
      return 0;
    }
  } catch (const regdiff::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
