// osrlab: command-line driver for the open-set recognition pipeline.
//
//   osrlab <stage> --config <file> [--out <dir>]
//   osrlab pipeline --config <file> [--out <dir>]
//   osrlab validate --config <file>
//
// Exit codes: 0 success, 2 configuration error, 3 dependency error,
// 4 runtime failure.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "osrlab/pipeline/config.hpp"
#include "osrlab/pipeline/pipeline.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitDependency = 3;
constexpr int kExitRuntime = 4;

struct Options {
  std::string config;
  std::string out;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Options& o, bool with_out) {
  cmd->add_option("-c,--config", o.config, "pipeline configuration (JSON)")->required();
  if (with_out) cmd->add_option("-o,--out", o.out, "output directory (overrides output_dir in the config)");
  cmd->add_flag("-q,--quiet", o.quiet, "only print errors");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Open-set recognition pipeline: backbone, KUT mining, confidence subnetwork, evaluation."};
  app.require_subcommand(1);
  Options opt;

  std::vector<std::pair<CLI::App*, std::optional<osrlab::pipeline::Stage>>> commands;
  for (auto stage : osrlab::pipeline::kStages) {
    const std::string name = osrlab::pipeline::to_string(stage);
    auto* cmd = app.add_subcommand(name, stage == osrlab::pipeline::Stage::report
                                             ? "aggregate every seed's evaluation into metrics.csv and summary.txt"
                                             : "run the '" + name + "' stage for every configured seed");
    add_common(cmd, opt, true);
    commands.emplace_back(cmd, stage);
  }
  auto* pipeline_cmd = app.add_subcommand("pipeline", "run all nine stages in order");
  add_common(pipeline_cmd, opt, true);
  auto* validate_cmd = app.add_subcommand("validate", "check a configuration and print its normalised form");
  add_common(validate_cmd, opt, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  osrlab::pipeline::PipelineConfig cfg;
  try {
    cfg = osrlab::pipeline::load_config(opt.config);
  } catch (const osrlab::pipeline::ConfigError& e) {
    std::cerr << "osrlab: " << opt.config << ": invalid configuration\n";
    for (const auto& msg : e.errors()) std::cerr << "  " << msg << "\n";
    return kExitConfig;
  }

  if (validate_cmd->parsed()) {
    if (!opt.quiet) std::cout << osrlab::pipeline::config_to_json(cfg).dump(2) << "\n";
    return 0;
  }

  try {
    osrlab::pipeline::Pipeline::Logger log;
    if (!opt.quiet) log = [](const std::string& msg) { std::cerr << "osrlab: " << msg << "\n"; };
    osrlab::pipeline::Pipeline p(cfg, opt.out.empty() ? cfg.output_dir : opt.out, log);
    if (pipeline_cmd->parsed()) {
      p.run_all();
    } else {
      for (const auto& [cmd, stage] : commands) {
        if (cmd->parsed()) p.run(*stage);
      }
    }
  } catch (const osrlab::pipeline::DependencyError& e) {
    std::cerr << "osrlab: " << e.what() << "\n";
    return kExitDependency;
  } catch (const std::exception& e) {
    std::cerr << "osrlab: error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
